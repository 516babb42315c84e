"""Server-side combination of client uploads into the next global model.

Three aggregators, all convex combinations over the accepted set:
data-size FedAvg, a test-weighted scheme that scores every upload on a
held-out validation split, and inverse-variance weighting for runs where
clients declare their noise levels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .client import ClientUpdate
from .errors import ConfigError, ProtocolError, RoundAbandoned
from .model import ModelSpec, evaluate

log = logging.getLogger(__name__)

# AggregationWeights: dict client_id -> weight, nonnegative, summing to 1.


@dataclass(frozen=True)
class TestWeightedConfig:
    """Knobs for the validation-score aggregator.

    ``temperature`` softens the score; ``memory`` blends this round's weights
    with the previous round's. ``score`` picks validation loss (default) or
    accuracy as the quality signal.
    """

    validation_fraction: float = 0.1
    temperature: float = 1.0
    memory: float = 0.5
    score: str = "loss"

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError("aggregator.temperature must be > 0")
        if not 0 <= self.memory < 1:
            raise ConfigError("aggregator.memory must be in [0, 1)")
        if self.score not in ("loss", "accuracy"):
            raise ConfigError("aggregator.score must be 'loss' or 'accuracy'")
        if not 0 < self.validation_fraction < 1:
            raise ConfigError("aggregator.validation_fraction must be in (0, 1)")


def reduce_dummy(payload: list[np.ndarray]) -> np.ndarray:
    """Coordinate-wise mean of a dummy payload set.

    The server cannot tell the true vector from the decoys; under the
    client's construction the mean is an unbiased stand-in.
    """
    if not payload:
        raise ProtocolError("empty payload set")
    lengths = {v.shape for v in payload}
    if len(lengths) != 1:
        raise ProtocolError(f"mismatched payload vector lengths {sorted(lengths)}")
    if len(payload) == 1:
        return payload[0]
    return np.mean(payload, axis=0)


def _single_vectors(updates: list[ClientUpdate]) -> list[tuple[int, np.ndarray, int]]:
    """(client_id, vector, num_samples) in ascending id order, dummies reduced."""
    if not updates:
        raise RoundAbandoned("no accepted clients, round abandoned")
    rows = [(u.client_id, reduce_dummy(u.payload), u.num_samples) for u in updates]
    rows.sort(key=lambda r: r[0])
    return rows


def _combine(rows, raw_weights: np.ndarray) -> tuple[np.ndarray, dict[int, float]]:
    total = raw_weights.sum()
    if not np.isfinite(total) or total <= 0:
        raise RoundAbandoned("aggregation weights vanished, round abandoned")
    w = raw_weights / total
    stack = np.stack([vec for _, vec, _ in rows])
    return w @ stack, {cid: float(wi) for (cid, _, _), wi in zip(rows, w)}


def fedavg(updates: list[ClientUpdate]) -> tuple[np.ndarray, dict[int, float]]:
    """Weighted average by declared data size: w_i = n_i / sum(n)."""
    rows = _single_vectors(updates)
    sizes = np.array([n for _, _, n in rows], dtype=np.float64)
    return _combine(rows, sizes)


def test_weighted_aggregate(
    updates: list[ClientUpdate],
    validation_inputs: np.ndarray,
    validation_labels: np.ndarray,
    spec: ModelSpec,
    prev_weights: dict[int, float] | None,
    cfg: TestWeightedConfig,
) -> tuple[np.ndarray, dict[int, float]]:
    """Score each upload on the server's validation split and reweight.

    Raw quality q_i = exp(-loss_i / T) (or exp(acc_i / T)), blended with data
    size as p_i ~ n_i * q_i, then smoothed across rounds with the memory
    factor: w_i = m * prev_w_i + (1 - m) * p_i, renormalized. Clients whose
    validation evaluation fails get zero quality and are logged.
    """
    if len(validation_labels) == 0:
        raise ConfigError("test-weighted aggregation needs a nonempty validation set")
    rows = _single_vectors(updates)
    quality = np.zeros(len(rows))
    for k, (cid, vec, _) in enumerate(rows):
        try:
            acc, loss = evaluate(vec, spec, validation_inputs, validation_labels)
        except Exception:  # noqa: BLE001 - a broken upload must not kill the round
            log.warning("client %d: validation evaluation failed, weight zeroed", cid)
            continue
        signal = acc if cfg.score == "accuracy" else -loss
        if not np.isfinite(signal):
            log.warning("client %d: non-finite validation score, weight zeroed", cid)
            continue
        quality[k] = np.exp(signal / cfg.temperature)

    sizes = np.array([n for _, _, n in rows], dtype=np.float64)
    p = sizes * quality
    total = p.sum()
    if total <= 0:
        raise RoundAbandoned("every upload failed validation, round abandoned")
    p /= total
    if cfg.memory > 0:
        prev_weights = prev_weights or {}
        prev = np.array(
            [prev_weights.get(cid, p[k]) for k, (cid, _, _) in enumerate(rows)]
        )
        p = cfg.memory * prev + (1 - cfg.memory) * p
    return _combine(rows, p)


def inverse_variance_aggregate(
    updates: list[ClientUpdate],
    variances: dict[int, float],
    floor: float = 1e-6,
) -> tuple[np.ndarray, dict[int, float]]:
    """MMSE-flavored weighting: w_i ~ n_i / (sigma_i^2 + floor)."""
    rows = _single_vectors(updates)
    try:
        var = np.array([variances[cid] for cid, _, _ in rows], dtype=np.float64)
    except KeyError as exc:
        raise ConfigError(f"aggregator.variances missing client {exc.args[0]}") from exc
    if np.any(var < 0):
        raise ConfigError("aggregator.variances must be >= 0")
    sizes = np.array([n for _, _, n in rows], dtype=np.float64)
    with np.errstate(divide="ignore"):
        raw = sizes / (var + floor)
    raw[~np.isfinite(raw)] = 0.0
    if raw.sum() <= 0:
        raise RoundAbandoned("all declared variances infinite, round abandoned")
    return _combine(rows, raw)
