"""Geometric straggler model: placement, per-client delay, deadline policy.

Compute time is cycles-per-sample work at a fixed CPU rate; transmit time
is payload size over a Shannon-capacity link with distance power-law path
loss. All constants are config fields because absolute delays depend
entirely on them; only trends are meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class DelayConfig:
    area_side_m: float = 1000.0
    server_pos: tuple[float, float] = (500.0, 500.0)
    cpu_cycles_per_sample: float = 1e6
    cpu_rate_hz: float = 1e9
    payload_bits: float = 0.0  # model dimension x bits_per_param, set by the harness
    bandwidth_hz: float = 1e6
    tx_power_w: float = 0.1
    noise_w: float = 4e-15
    path_loss_exponent: float = 3.5
    reference_distance_m: float = 1.0
    deadline_s: float | None = None
    min_clients: int = 1
    composition: str = "per_client_total"  # or "max_plus_max"

    def __post_init__(self):
        positive = (
            ("delay.area_side_m", self.area_side_m),
            ("delay.cpu_cycles_per_sample", self.cpu_cycles_per_sample),
            ("delay.cpu_rate_hz", self.cpu_rate_hz),
            ("delay.bandwidth_hz", self.bandwidth_hz),
            ("delay.tx_power_w", self.tx_power_w),
            ("delay.noise_w", self.noise_w),
            ("delay.reference_distance_m", self.reference_distance_m),
        )
        errors = [f"{name} must be > 0" for name, v in positive if v <= 0]
        if self.path_loss_exponent < 2:
            errors.append("delay.path_loss_exponent must be >= 2")
        if self.deadline_s is not None and self.deadline_s <= 0:
            errors.append("delay.deadline_s must be > 0 when set")
        if self.min_clients < 1:
            errors.append("delay.min_clients must be >= 1")
        if self.composition not in ("per_client_total", "max_plus_max"):
            errors.append("delay.composition must be per_client_total or max_plus_max")
        if errors:
            raise ConfigError(errors)


@dataclass(frozen=True)
class RoundTiming:
    compute_s: dict[int, float]
    transmit_s: dict[int, float]
    accepted: tuple[int, ...]
    round_delay_s: float
    abandoned: bool

    def total_s(self, client_id: int) -> float:
        return self.compute_s[client_id] + self.transmit_s[client_id]


def place_clients(n: int, seed, area_side_m: float = 1000.0) -> np.ndarray:
    """(n, 2) i.i.d. uniform positions over the square area."""
    if n < 1:
        raise ConfigError("placement needs n >= 1")
    rng = np.random.default_rng(seed)
    return rng.uniform(0.0, area_side_m, size=(n, 2))


def client_delay(
    cfg: DelayConfig, position: tuple[float, float], local_iterations: int, batch_per_step: int
) -> tuple[float, float]:
    """(compute_s, transmit_s) for one client at one position."""
    x, y = position
    if not (0 <= x <= cfg.area_side_m and 0 <= y <= cfg.area_side_m):
        raise ConfigError(f"client position {position} outside the area")
    compute = local_iterations * batch_per_step * cfg.cpu_cycles_per_sample / cfg.cpu_rate_hz
    dist = max(math.hypot(x - cfg.server_pos[0], y - cfg.server_pos[1]), cfg.reference_distance_m)
    snr = cfg.tx_power_w / (cfg.noise_w * dist**cfg.path_loss_exponent)
    if snr <= 0 or not math.isfinite(snr):
        raise ConfigError(f"non-positive SNR at distance {dist:.1f} m")
    rate = cfg.bandwidth_hz * math.log2(1.0 + snr)
    transmit = cfg.payload_bits / rate
    return compute, transmit


def round_delay(
    timings: dict[int, tuple[float, float]], cfg: DelayConfig
) -> RoundTiming:
    """Apply the straggler and deadline/abandon policy to one round.

    Without a deadline every client is accepted and the delay is the slowest
    client's total. With a deadline, clients whose total exceeds it are
    dropped; if fewer than min_clients remain the round is abandoned and the
    full deadline is charged.
    """
    if not timings:
        raise ConfigError("round_delay needs at least one participating client")
    compute = {cid: t[0] for cid, t in timings.items()}
    transmit = {cid: t[1] for cid, t in timings.items()}
    totals = {cid: compute[cid] + transmit[cid] for cid in timings}

    def delay_over(ids) -> float:
        if cfg.composition == "max_plus_max":
            return max(compute[c] for c in ids) + max(transmit[c] for c in ids)
        return max(totals[c] for c in ids)

    if cfg.deadline_s is None:
        accepted = tuple(sorted(timings))
        return RoundTiming(compute, transmit, accepted, delay_over(accepted), False)

    accepted = tuple(sorted(c for c in timings if totals[c] <= cfg.deadline_s))
    if len(accepted) < cfg.min_clients:
        return RoundTiming(compute, transmit, (), cfg.deadline_s, True)
    return RoundTiming(
        compute, transmit, accepted, min(cfg.deadline_s, delay_over(accepted)), False
    )


def total_delay(
    round_delays: list[float], accuracies: list[float], target_accuracy: float = 0.9
) -> float | None:
    """Sum of round delays up to the first round reaching the target.

    Returns None when the target is never reached.
    """
    if len(round_delays) != len(accuracies):
        raise ConfigError("total_delay needs one delay per recorded round")
    for idx, acc in enumerate(accuracies):
        if acc >= target_accuracy:
            return float(sum(round_delays[: idx + 1]))
    return None
