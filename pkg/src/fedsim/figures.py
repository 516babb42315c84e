"""Bundled experiment recipes, one per reproduced result figure.

fig2  accuracy under parameter noise (Gaussian/Laplace at matched variance)
fig3  the same noise sweep on a second network architecture
fig4  accuracy with 0/3/9/15 sign-flipping clients under data-size FedAvg
fig5  time-to-90%-accuracy for 10 vs 50 clients under the delay model
fig6  the fig4 attack sweep under the test-weighted aggregator

Two scales: ``paper`` keeps the reference protocol (300 rounds, 20 repeats,
120 local iterations, batch 1200, 60k/10k examples) and is hours of compute;
``desk`` shrinks rounds, repeats, local work and corpus so each figure runs
in minutes while preserving the trends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

from .config import RunConfig, snapshot
from .errors import ConfigError
from .harness import RunResult, run
from .metrics import ArmSummary, emit_csv
from .plots import render_png
from .svgchart import emit_plot

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6")


@dataclass(frozen=True)
class ScaleParams:
    rounds: int
    repeats: int
    local_iterations: int
    batch_size: int
    learning_rate: float
    train_examples: int
    test_examples: int


SCALES = {
    "desk": ScaleParams(
        rounds=60, repeats=5, local_iterations=5, batch_size=50,
        learning_rate=0.1, train_examples=12000, test_examples=2000,
    ),
    "paper": ScaleParams(
        rounds=300, repeats=20, local_iterations=120, batch_size=1200,
        learning_rate=0.05, train_examples=60000, test_examples=10000,
    ),
}

# Noise arms: Laplace scales chosen so both distributions match variance
# (2 * lambda^2 = std^2). The large level is the documented failure case.
NOISE_SMALL_STD = 0.05
NOISE_LARGE_STD = 10.0

POISON_COUNTS = (0, 3, 9, 15)
POISON_CLIENTS = 30
SCALING_CLIENTS = (10, 50)


@dataclass(frozen=True)
class Arm:
    slug: str
    label: str
    config: RunConfig


@dataclass
class FigureResult:
    name: str
    arms: list[Arm]
    results: dict[str, RunResult]
    summaries: dict[str, ArmSummary]
    files: dict[str, Path]


def _base(scale: ScaleParams, output_dir: str, master_seed: int, n_clients: int) -> RunConfig:
    return RunConfig(
        rounds=scale.rounds,
        repeats=scale.repeats,
        master_seed=master_seed,
        output_dir=output_dir,
        data_source="synthetic",
        synthetic_train=scale.train_examples,
        synthetic_test=scale.test_examples,
        partition="non_iid",
        shards_per_client=2,
        n_clients=n_clients,
        local_iterations=scale.local_iterations,
        batch_size=scale.batch_size,
        learning_rate=scale.learning_rate,
    )


def _noise_arms(base: RunConfig) -> list[Arm]:
    small_lap = NOISE_SMALL_STD / math.sqrt(2.0)
    large_lap = NOISE_LARGE_STD / math.sqrt(2.0)
    return [
        Arm("no_noise", "no noise", base),
        Arm(
            "gaussian_small",
            f"Gaussian std {NOISE_SMALL_STD}",
            replace(base, privacy_mechanism="gaussian", gaussian_param=NOISE_SMALL_STD),
        ),
        Arm(
            "laplace_small",
            f"Laplace scale {small_lap:.4g}",
            replace(base, privacy_mechanism="laplace", laplace_scale=small_lap),
        ),
        Arm(
            "gaussian_large",
            f"Gaussian std {NOISE_LARGE_STD}",
            replace(base, privacy_mechanism="gaussian", gaussian_param=NOISE_LARGE_STD),
        ),
        Arm(
            "laplace_large",
            f"Laplace scale {large_lap:.4g}",
            replace(base, privacy_mechanism="laplace", laplace_scale=large_lap),
        ),
    ]


def _poison_arms(base: RunConfig, aggregator: str) -> list[Arm]:
    arms = []
    for m in POISON_COUNTS:
        cfg = replace(base, n_malicious=m, attack_behavior="sign_flip", aggregator=aggregator)
        arms.append(Arm(f"malicious_{m}", f"{m} malicious", cfg))
    return arms


def figure_arms(name: str, scale: str, output_dir: str) -> tuple[list[Arm], str]:
    """(arms, title) for one figure recipe."""
    if name not in FIGURES:
        raise ConfigError(f"unknown figure {name!r}, expected one of {FIGURES}")
    if scale not in SCALES:
        raise ConfigError(f"unknown scale {scale!r}, expected desk or paper")
    sp = SCALES[scale]

    if name == "fig2":
        base = _base(sp, output_dir, master_seed=2, n_clients=10)
        return _noise_arms(base), "Accuracy vs rounds under upload noise"
    if name == "fig3":
        base = _base(sp, output_dir, master_seed=3, n_clients=10)
        base = replace(base, layer_sizes=(784, 64, 32, 10))
        return _noise_arms(base), "Accuracy vs rounds under upload noise (deeper net)"
    if name == "fig4":
        base = _base(sp, output_dir, master_seed=4, n_clients=POISON_CLIENTS)
        return _poison_arms(base, "fedavg"), "Accuracy vs rounds with sign-flipping clients"
    if name == "fig5":
        base = _base(sp, output_dir, master_seed=5, n_clients=SCALING_CLIENTS[0])
        base = replace(base, delay_enabled=True, stop_accuracy=0.9)
        arms = [
            Arm(f"clients_{n}", f"{n} clients", replace(base, n_clients=n))
            for n in SCALING_CLIENTS
        ]
        return arms, "Time to 90% accuracy vs client count"
    # fig6
    base = _base(sp, output_dir, master_seed=6, n_clients=POISON_CLIENTS)
    return (
        _poison_arms(base, "test_weighted"),
        "Sign-flip attack under the test-weighted aggregator",
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_round_summary_csv(summaries: list[ArmSummary], path: Path) -> None:
    lines = ["arm,round,n_repeats,accuracy_mean,accuracy_std,loss_mean,loss_std,delay_s_mean"]
    for s in summaries:
        for i, rnd in enumerate(s.rounds):
            lines.append(
                ",".join(
                    [
                        s.name,
                        str(rnd),
                        str(s.n_repeats[i]),
                        _fmt(s.accuracy_mean[i]),
                        _fmt(s.accuracy_std[i]),
                        _fmt(s.loss_mean[i]),
                        _fmt(s.loss_std[i]),
                        _fmt(s.delay_mean[i]),
                    ]
                )
            )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_final_summary_csv(summaries: list[ArmSummary], path: Path) -> None:
    lines = ["arm,final_accuracy_mean,final_accuracy_std,failure,total_delay_s_mean"]
    for s in summaries:
        lines.append(
            ",".join(
                [
                    s.name,
                    _fmt(s.final_accuracy_mean),
                    _fmt(s.final_accuracy_std),
                    "true" if s.failure else "false",
                    _fmt(s.total_delay_mean),
                ]
            )
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def run_figure(name: str, scale: str, output_dir) -> FigureResult:
    """Run every arm of a figure recipe and write the report bundle.

    Outputs under ``output_dir``: <name>.csv (per-round summary across arms),
    <name>_final.csv, <name>.svg (deterministic chart), <name>.png
    (matplotlib render), plus per-arm raw metrics and resolved config
    snapshots under arms/.
    """
    output_dir = Path(output_dir)
    arms, title = figure_arms(name, scale, str(output_dir))
    arms_dir = output_dir / "arms"
    arms_dir.mkdir(parents=True, exist_ok=True)

    results: dict[str, RunResult] = {}
    summaries: dict[str, ArmSummary] = {}
    for arm in arms:
        result = run(arm.config)
        results[arm.slug] = result
        summaries[arm.slug] = result.summary(name=arm.label)
        emit_csv(result.rows, arms_dir / f"{name}_{arm.slug}.csv")
        snapshot(result.config, arms_dir / f"{name}_{arm.slug}_resolved.ini")

    ordered = [summaries[arm.slug] for arm in arms]
    files = {
        "csv": output_dir / f"{name}.csv",
        "final": output_dir / f"{name}_final.csv",
        "svg": output_dir / f"{name}.svg",
        "png": output_dir / f"{name}.png",
    }
    write_round_summary_csv(ordered, files["csv"])
    write_final_summary_csv(ordered, files["final"])
    emit_plot(ordered, "accuracy", files["svg"], title=title)
    render_png(ordered, "accuracy", files["png"], title=title)
    return FigureResult(name, arms, results, summaries, files)
