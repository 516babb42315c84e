"""Declarative experiment runner.

One RunConfig describes one experiment arm: repeats x rounds of
broadcast -> local training -> privacy or attack -> (optional) deadline
policy -> (optional) secure aggregation -> aggregate -> evaluate. Every
stochastic choice derives its generator from
(master_seed, repeat, round, client_id, purpose), so output bytes are a
pure function of the config and adding one arm never perturbs another.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import seeding
from .aggregation import fedavg, inverse_variance_aggregate, test_weighted_aggregate
from .client import ClientConfig, ClientUpdate, apply_behavior, apply_privacy, local_train
from .config import RunConfig, validated
from .data import Dataset, load_idx, partition_iid, partition_non_iid
from .errors import ConfigError, NumericError, RoundAbandoned
from .metrics import ArmSummary, RoundMetrics, emit_csv, summarize
from .model import evaluate, init_params
from .network import client_delay, place_clients, round_delay
from .secagg import FixedPointCodec, run_session
from .synthetic import ensure_synthetic_dir

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    config: RunConfig
    rows: list[RoundMetrics]

    def summary(self, name: str = "") -> ArmSummary:
        return summarize(
            self.rows,
            name=name,
            target_accuracy=self.config.stop_accuracy or 0.9,
            failure_threshold=self.config.failure_threshold,
        )


def load_run_dataset(cfg: RunConfig) -> tuple[Dataset, Dataset]:
    """Materialize the train/test pair this config asks for."""
    paths = cfg.resolve_data_paths()
    if paths is None:
        generated = ensure_synthetic_dir(
            Path(cfg.output_dir) / "data",
            cfg.synthetic_train,
            cfg.synthetic_test,
            cfg.synthetic_seed,
            cfg.synthetic_noise,
        )
        paths = {k: str(v) for k, v in generated.items()}
    for key, p in paths.items():
        if not Path(p).exists():
            raise ConfigError(f"data.{key}: file not found: {p}")
    train = load_idx(paths["train_images"], paths["train_labels"])
    test = load_idx(paths["test_images"], paths["test_labels"])
    return train, test


def _partition(cfg: RunConfig, train: Dataset, repeat: int):
    seed_rng = seeding.rng(cfg.master_seed, repeat, "partition")
    if cfg.partition == "iid":
        return partition_iid(train, cfg.n_clients, seed_rng)
    return partition_non_iid(train, cfg.n_clients, cfg.shards_per_client, seed_rng)


def _select_clients(cfg: RunConfig, repeat: int, rnd: int) -> list[int]:
    count = cfg.selected_per_round()
    if count >= cfg.n_clients:
        return list(range(cfg.n_clients))
    gen = seeding.rng(cfg.master_seed, repeat, rnd, "select")
    return sorted(gen.choice(cfg.n_clients, size=count, replace=False).tolist())


def _secure_fedavg(
    updates: list[ClientUpdate], accepted: set[int], cfg: RunConfig, repeat: int, rnd: int
) -> tuple[np.ndarray, dict[int, float]]:
    """Data-size FedAvg computed through the masking protocol.

    Sample counts are public metadata, so clients pre-scale their vector by
    n_i; the server divides the exact masked sum by the survivors' total.
    """
    codec = FixedPointCodec(cfg.scale_bits)
    scaled = [
        ClientUpdate(u.client_id, [u.single() * u.num_samples], u.num_samples, u.local_loss)
        for u in updates
    ]
    session_rng = seeding.rng(cfg.master_seed, repeat, rnd, "secagg")
    total = run_session(scaled, accepted, session_rng, codec, round_tag=rnd)
    sizes = {u.client_id: u.num_samples for u in updates if u.client_id in accepted}
    denom = sum(sizes.values())
    weights = {cid: n / denom for cid, n in sizes.items()}
    return total / denom, weights


def run(cfg: RunConfig) -> RunResult:
    """Execute all repeats of one experiment arm."""
    cfg = validated(cfg)
    spec = cfg.model_spec()
    train, test = load_run_dataset(cfg)
    if spec.input_dim != train.images.shape[1]:
        raise ConfigError("model input dimension does not match the dataset")

    mech = cfg.privacy()
    behavior = cfg.behavior() if cfg.n_malicious > 0 else None
    malicious_ids = set(range(cfg.n_malicious))
    tw_cfg = cfg.test_weighted() if cfg.aggregator == "test_weighted" else None
    variances = cfg.variance_map() if cfg.aggregator == "inverse_variance" else None

    rows: list[RoundMetrics] = []
    for repeat in range(cfg.repeats):
        rows.extend(_run_repeat(cfg, spec, train, test, mech, behavior, malicious_ids, tw_cfg, variances, repeat))
    return RunResult(cfg, rows)


def _run_repeat(cfg, spec, train, test, mech, behavior, malicious_ids, tw_cfg, variances, repeat):
    partition = _partition(cfg, train, repeat)
    params = init_params(spec, seeding.rng(cfg.master_seed, repeat, "init"))

    # Server-side validation split is carved from the test set and excluded
    # from the reported accuracy, so the defense cannot grade itself.
    if tw_cfg is not None:
        n_val = max(1, round(tw_cfg.validation_fraction * len(test)))
        val_idx = seeding.rng(cfg.master_seed, repeat, "valsplit").choice(
            len(test), size=n_val, replace=False
        )
        mask = np.ones(len(test), dtype=bool)
        mask[val_idx] = False
        validation = test.subset(val_idx)
        heldout = test.subset(np.flatnonzero(mask))
    else:
        validation, heldout = None, test

    positions = None
    delay_cfg = None
    if cfg.delay_enabled:
        positions = place_clients(
            cfg.n_clients,
            seeding.rng(cfg.master_seed, repeat, "placement"),
            cfg.area_side_m,
        )
        delay_cfg = cfg.delay_config(payload_bits=float(spec.dimension * cfg.bits_per_param))

    client_cfgs = {
        cid: ClientConfig(
            client_id=cid,
            shard=partition.shard(cid),
            local_iterations=cfg.local_iterations,
            batch_size=cfg.batch_size,
            learning_rate=cfg.learning_rate,
            privacy=None if cid in malicious_ids else mech,
            behavior=behavior if cid in malicious_ids else None,
            position=tuple(positions[cid]) if positions is not None else (0.0, 0.0),
        )
        for cid in range(cfg.n_clients)
    }

    rows = []
    prev_weights: dict[int, float] | None = None
    last_eval: tuple[float, float] | None = None
    for rnd in range(cfg.rounds):
        selected = _select_clients(cfg, repeat, rnd)
        updates = []
        for cid in selected:
            ccfg = client_cfgs[cid]
            try:
                trained, loss = local_train(
                    params, ccfg, spec, train.images, train.labels,
                    seeding.rng(cfg.master_seed, repeat, rnd, cid, "train"),
                )
            except NumericError as exc:
                raise NumericError(f"repeat {repeat}, round {rnd}: {exc}") from exc
            update = ClientUpdate(cid, [trained], len(ccfg.shard), loss, cid in malicious_ids)
            if ccfg.behavior is not None:
                update = apply_behavior(
                    update, ccfg.behavior, seeding.rng(cfg.master_seed, repeat, rnd, cid, "behavior")
                )
            elif ccfg.privacy is not None:
                update = apply_privacy(
                    update, ccfg.privacy, seeding.rng(cfg.master_seed, repeat, rnd, cid, "privacy")
                )
            updates.append(update)

        delay_s = None
        if delay_cfg is not None:
            timings = {
                cid: client_delay(
                    delay_cfg,
                    client_cfgs[cid].position,
                    cfg.local_iterations,
                    min(cfg.batch_size, len(client_cfgs[cid].shard)),
                )
                for cid in selected
            }
            timing = round_delay(timings, delay_cfg)
            delay_s = timing.round_delay_s
            if timing.abandoned:
                if last_eval is None:
                    last_eval = evaluate(params, spec, heldout.images, heldout.labels)
                rows.append(
                    RoundMetrics(repeat, rnd, last_eval[0], last_eval[1], delay_s, True, (), {})
                )
                continue
            accepted = set(timing.accepted)
            updates = [u for u in updates if u.client_id in accepted]
        else:
            accepted = set(selected)

        try:
            if cfg.secure_aggregation:
                params, weights = _secure_fedavg(updates, accepted, cfg, repeat, rnd)
            elif cfg.aggregator == "test_weighted":
                params, weights = test_weighted_aggregate(
                    updates, validation.images, validation.labels, spec, prev_weights, tw_cfg
                )
                prev_weights = weights
            elif cfg.aggregator == "inverse_variance":
                params, weights = inverse_variance_aggregate(
                    updates, variances, cfg.variance_floor
                )
            else:
                params, weights = fedavg(updates)
        except RoundAbandoned:
            if last_eval is None:
                last_eval = evaluate(params, spec, heldout.images, heldout.labels)
            rows.append(
                RoundMetrics(repeat, rnd, last_eval[0], last_eval[1], delay_s, True, (), {})
            )
            continue

        last_eval = evaluate(params, spec, heldout.images, heldout.labels)
        rows.append(
            RoundMetrics(
                repeat, rnd, last_eval[0], last_eval[1], delay_s, False,
                tuple(sorted(accepted)), weights,
            )
        )
        if cfg.stop_accuracy is not None and last_eval[0] >= cfg.stop_accuracy:
            break
    return rows


def write_outputs(result: RunResult, stem: Path, title: str = "") -> dict[str, Path]:
    """CSV + resolved config + deterministic SVG + matplotlib PNG for one arm."""
    from .config import snapshot
    from .plots import render_png
    from .svgchart import emit_plot

    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    files = {
        "csv": stem.with_suffix(".csv"),
        "svg": stem.with_suffix(".svg"),
        "png": stem.with_suffix(".png"),
        "config": stem.parent / f"{stem.name}_resolved.ini",
    }
    emit_csv(result.rows, files["csv"])
    snapshot(result.config, files["config"])
    summary = result.summary(name=stem.name)
    emit_plot([summary], "accuracy", files["svg"], title=title or stem.name)
    render_png([summary], "accuracy", files["png"], title=title or stem.name)
    return files
