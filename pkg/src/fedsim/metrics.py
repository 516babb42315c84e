"""Per-round records, the delimited output schema, and repeat summaries.

CSV schema, byte-exact: header
``repeat,round,accuracy,loss,delay_s,abandoned,accepted,weights``,
UTF-8, newline "\\n". ``accepted`` is ';'-joined client ids, ``weights``
';'-joined ``id=weight`` at 9 significant digits, ``abandoned`` is
true/false, ``delay_s`` empty when the delay model is off. Other floats
use the shortest round-trip representation so reloading is lossless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .network import total_delay

CSV_HEADER = "repeat,round,accuracy,loss,delay_s,abandoned,accepted,weights"


@dataclass
class RoundMetrics:
    repeat: int
    round: int
    accuracy: float
    loss: float
    delay_s: float | None
    abandoned: bool
    accepted: tuple[int, ...]
    weights: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.accuracy <= 1.0:
            raise ConfigError(f"accuracy {self.accuracy} outside [0, 1]")
        if set(self.weights) - set(self.accepted):
            raise ConfigError("weights recorded for clients outside the accepted set")


def _row(m: RoundMetrics) -> str:
    delay = "" if m.delay_s is None else repr(float(m.delay_s))
    accepted = ";".join(str(c) for c in m.accepted)
    weights = ";".join(f"{c}={m.weights[c]:.9g}" for c in sorted(m.weights))
    return ",".join(
        [
            str(m.repeat),
            str(m.round),
            repr(float(m.accuracy)),
            repr(float(m.loss)),
            delay,
            "true" if m.abandoned else "false",
            accepted,
            weights,
        ]
    )


def emit_csv(rows: list[RoundMetrics], path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER] + [_row(m) for m in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def load_csv(path) -> list[RoundMetrics]:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if not lines or lines[0] != CSV_HEADER:
        raise ConfigError(f"{path}: unexpected CSV header")
    out = []
    for line in lines[1:]:
        if not line:
            continue
        rep, rnd, acc, loss, delay, abandoned, accepted, weights = line.split(",")
        out.append(
            RoundMetrics(
                repeat=int(rep),
                round=int(rnd),
                accuracy=float(acc),
                loss=float(loss),
                delay_s=None if delay == "" else float(delay),
                abandoned=abandoned == "true",
                accepted=tuple(int(c) for c in accepted.split(";") if c),
                weights={
                    int(k): float(v)
                    for k, v in (pair.split("=") for pair in weights.split(";") if pair)
                },
            )
        )
    return out


@dataclass
class ArmSummary:
    """Cross-repeat statistics for one experiment arm."""

    name: str
    rounds: list[int]
    accuracy_mean: list[float]
    accuracy_std: list[float]
    loss_mean: list[float]
    loss_std: list[float]
    delay_mean: list[float | None]
    n_repeats: list[int]
    final_accuracies: list[float]  # one per repeat
    total_delays: list[float | None]  # one per repeat, None if target never reached
    failure: bool

    @property
    def final_accuracy_mean(self) -> float:
        return float(np.mean(self.final_accuracies))

    @property
    def final_accuracy_std(self) -> float:
        return float(np.std(self.final_accuracies))

    @property
    def total_delay_mean(self) -> float | None:
        if any(d is None for d in self.total_delays) or not self.total_delays:
            return None
        return float(np.mean([d for d in self.total_delays]))


def summarize(
    rows: list[RoundMetrics],
    name: str = "",
    target_accuracy: float = 0.9,
    failure_threshold: float = 0.10,
) -> ArmSummary:
    """Arithmetic mean/std across repeats, round by round.

    Repeats stopped early (stop-at-accuracy) simply contribute fewer rounds;
    each round's statistics run over the repeats that reached it.
    """
    if not rows:
        raise ConfigError("summarize: no metrics rows")
    by_repeat: dict[int, list[RoundMetrics]] = {}
    for m in rows:
        by_repeat.setdefault(m.repeat, []).append(m)
    for series in by_repeat.values():
        series.sort(key=lambda m: m.round)

    all_rounds = sorted({m.round for m in rows})
    acc_mean, acc_std, loss_mean, loss_std, delay_mean, counts = [], [], [], [], [], []
    for rnd in all_rounds:
        present = [m for series in by_repeat.values() for m in series if m.round == rnd]
        accs = np.array([m.accuracy for m in present])
        losses = np.array([m.loss for m in present])
        delays = [m.delay_s for m in present if m.delay_s is not None]
        acc_mean.append(float(accs.mean()))
        acc_std.append(float(accs.std()))
        loss_mean.append(float(losses.mean()))
        loss_std.append(float(losses.std()))
        delay_mean.append(float(np.mean(delays)) if delays else None)
        counts.append(len(present))

    finals, totals = [], []
    for rep in sorted(by_repeat):
        series = by_repeat[rep]
        finals.append(series[-1].accuracy)
        if all(m.delay_s is not None for m in series):
            totals.append(
                total_delay(
                    [m.delay_s for m in series],
                    [m.accuracy for m in series],
                    target_accuracy,
                )
            )
        else:
            totals.append(None)

    mean_final = float(np.mean(finals))
    return ArmSummary(
        name=name,
        rounds=all_rounds,
        accuracy_mean=acc_mean,
        accuracy_std=acc_std,
        loss_mean=loss_mean,
        loss_std=loss_std,
        delay_mean=delay_mean,
        n_repeats=counts,
        final_accuracies=finals,
        total_delays=totals,
        failure=mean_final <= failure_threshold,
    )
