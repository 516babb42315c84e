"""Declarative run configuration: INI-style files, validation, snapshots.

A config file is flat ``[section]`` / ``key = value`` text. Every field has
a default, unknown keys are rejected, and validation reports every problem
with its ``section.key`` path. A resolved snapshot (all defaults filled,
canonical ordering and formatting) is written next to any run output so a
run can be reproduced from its artifacts alone.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass
from pathlib import Path

from .aggregation import TestWeightedConfig
from .client import Dummy, Gaussian, Laplace, PrivacyMechanism, RandomUniform, SignFlip
from .errors import ConfigError
from .model import ModelSpec
from .network import DelayConfig

DATA_DIR_ENV = "FEDSIM_DATA_DIR"

STANDARD_NAMES = {
    "train_images": ("train-images-idx3-ubyte.gz", "train-images-idx3-ubyte", "train-images.idx3-ubyte"),
    "train_labels": ("train-labels-idx1-ubyte.gz", "train-labels-idx1-ubyte", "train-labels.idx1-ubyte"),
    "test_images": ("t10k-images-idx3-ubyte.gz", "t10k-images-idx3-ubyte", "t10k-images.idx3-ubyte"),
    "test_labels": ("t10k-labels-idx1-ubyte.gz", "t10k-labels-idx1-ubyte", "t10k-labels.idx1-ubyte"),
}


@dataclass
class RunConfig:
    # [run]
    rounds: int = 300
    repeats: int = 20
    master_seed: int = 0
    stop_accuracy: float | None = None
    failure_threshold: float = 0.10
    output_dir: str = "out"
    # [model]
    layer_sizes: tuple[int, ...] = (784, 64, 10)
    # [data]
    data_source: str = "synthetic"  # synthetic | idx
    train_images: str = ""
    train_labels: str = ""
    test_images: str = ""
    test_labels: str = ""
    synthetic_train: int = 12000
    synthetic_test: int = 2000
    synthetic_seed: int = 7
    synthetic_noise: float = 0.25
    # [partition]
    partition: str = "non_iid"  # non_iid | iid
    shards_per_client: int = 2
    # [clients]
    n_clients: int = 10
    clients_per_round: float = 1.0  # fraction in (0, 1], or an integer count > 1
    local_iterations: int = 120
    batch_size: int = 1200
    learning_rate: float = 0.05
    # [privacy]
    privacy_mechanism: str = "none"  # none | gaussian | laplace | dummy
    gaussian_param: float = 0.0
    gaussian_reading: str = "std"  # std | variance: how N(0, x) is interpreted
    laplace_scale: float = 0.0
    dummy_count: int = 1
    dummy_std: float = 0.0
    # [attack]
    n_malicious: int = 0
    attack_behavior: str = "sign_flip"  # sign_flip | random_uniform
    random_lo: float = -1.0
    random_hi: float = 1.0
    # [aggregator]
    aggregator: str = "fedavg"  # fedavg | test_weighted | inverse_variance
    validation_fraction: float = 0.1
    temperature: float = 1.0
    weight_memory: float = 0.5
    score: str = "loss"
    variances: str = ""  # "id=sigma2;..." or one value broadcast to all clients
    variance_floor: float = 1e-6
    # [secure_aggregation]
    secure_aggregation: bool = False
    scale_bits: int = 24
    # [delay]
    delay_enabled: bool = False
    area_side_m: float = 1000.0
    server_x: float = 500.0
    server_y: float = 500.0
    cpu_cycles_per_sample: float = 1e6
    cpu_rate_hz: float = 1e9
    bits_per_param: int = 32
    bandwidth_hz: float = 1e6
    tx_power_w: float = 0.1
    noise_w: float = 4e-15
    path_loss_exponent: float = 3.5
    deadline_s: float | None = None
    min_clients: int = 1
    delay_composition: str = "per_client_total"

    # --- derived objects -------------------------------------------------

    def model_spec(self) -> ModelSpec:
        return ModelSpec(self.layer_sizes)

    def privacy(self) -> PrivacyMechanism:
        if self.privacy_mechanism == "none":
            return None
        if self.privacy_mechanism == "gaussian":
            std = self.gaussian_param
            if self.gaussian_reading == "variance":
                std = math.sqrt(std)
            return Gaussian(std)
        if self.privacy_mechanism == "laplace":
            return Laplace(self.laplace_scale)
        if self.privacy_mechanism == "dummy":
            return Dummy(self.dummy_count, self.dummy_std)
        raise ConfigError(f"privacy.mechanism: unknown value {self.privacy_mechanism!r}")

    def behavior(self):
        if self.attack_behavior == "sign_flip":
            return SignFlip()
        if self.attack_behavior == "random_uniform":
            return RandomUniform(self.random_lo, self.random_hi)
        raise ConfigError(f"attack.behavior: unknown value {self.attack_behavior!r}")

    def test_weighted(self) -> TestWeightedConfig:
        return TestWeightedConfig(
            validation_fraction=self.validation_fraction,
            temperature=self.temperature,
            memory=self.weight_memory,
            score=self.score,
        )

    def delay_config(self, payload_bits: float) -> DelayConfig:
        return DelayConfig(
            area_side_m=self.area_side_m,
            server_pos=(self.server_x, self.server_y),
            cpu_cycles_per_sample=self.cpu_cycles_per_sample,
            cpu_rate_hz=self.cpu_rate_hz,
            payload_bits=payload_bits,
            bandwidth_hz=self.bandwidth_hz,
            tx_power_w=self.tx_power_w,
            noise_w=self.noise_w,
            path_loss_exponent=self.path_loss_exponent,
            deadline_s=self.deadline_s,
            min_clients=self.min_clients,
            composition=self.delay_composition,
        )

    def variance_map(self) -> dict[int, float]:
        """Per-client declared variances for the inverse-variance aggregator."""
        mech = self.privacy()
        default = mech.variance() if mech is not None else 0.0
        out = {cid: default for cid in range(self.n_clients)}
        text = self.variances.strip()
        if not text:
            return out
        if "=" not in text:
            return {cid: float(text) for cid in out}
        for pair in text.split(";"):
            pair = pair.strip()
            if not pair:
                continue
            cid, value = pair.split("=")
            out[int(cid)] = float(value)
        return out

    def selected_per_round(self) -> int:
        if self.clients_per_round > 1:
            return int(self.clients_per_round)
        return max(1, round(self.clients_per_round * self.n_clients))

    def resolve_data_paths(self) -> dict[str, str] | None:
        """Explicit IDX paths, honoring the data-directory override env var.

        Returns None for synthetic mode with no override, meaning the harness
        must generate the corpus.
        """
        env_dir = os.environ.get(DATA_DIR_ENV, "")
        if env_dir:
            found = {}
            for key, names in STANDARD_NAMES.items():
                for name in names:
                    candidate = Path(env_dir) / name
                    if candidate.exists():
                        found[key] = str(candidate)
                        break
            if len(found) == 4:
                return found
        if self.data_source == "idx":
            return {
                "train_images": self.train_images,
                "train_labels": self.train_labels,
                "test_images": self.test_images,
                "test_labels": self.test_labels,
            }
        return None


# table of (section, key, attribute, kind); kind drives parsing + formatting
_SCHEMA = [
    ("run", "rounds", "rounds", "int"),
    ("run", "repeats", "repeats", "int"),
    ("run", "master_seed", "master_seed", "int"),
    ("run", "stop_accuracy", "stop_accuracy", "optfloat"),
    ("run", "failure_threshold", "failure_threshold", "float"),
    ("run", "output_dir", "output_dir", "str"),
    ("model", "layer_sizes", "layer_sizes", "ints"),
    ("data", "source", "data_source", "str"),
    ("data", "train_images", "train_images", "str"),
    ("data", "train_labels", "train_labels", "str"),
    ("data", "test_images", "test_images", "str"),
    ("data", "test_labels", "test_labels", "str"),
    ("data", "synthetic_train", "synthetic_train", "int"),
    ("data", "synthetic_test", "synthetic_test", "int"),
    ("data", "synthetic_seed", "synthetic_seed", "int"),
    ("data", "synthetic_noise", "synthetic_noise", "float"),
    ("partition", "kind", "partition", "str"),
    ("partition", "shards_per_client", "shards_per_client", "int"),
    ("clients", "n_clients", "n_clients", "int"),
    ("clients", "clients_per_round", "clients_per_round", "float"),
    ("clients", "local_iterations", "local_iterations", "int"),
    ("clients", "batch_size", "batch_size", "int"),
    ("clients", "learning_rate", "learning_rate", "float"),
    ("privacy", "mechanism", "privacy_mechanism", "str"),
    ("privacy", "gaussian_param", "gaussian_param", "float"),
    ("privacy", "gaussian_reading", "gaussian_reading", "str"),
    ("privacy", "laplace_scale", "laplace_scale", "float"),
    ("privacy", "dummy_count", "dummy_count", "int"),
    ("privacy", "dummy_std", "dummy_std", "float"),
    ("attack", "n_malicious", "n_malicious", "int"),
    ("attack", "behavior", "attack_behavior", "str"),
    ("attack", "random_lo", "random_lo", "float"),
    ("attack", "random_hi", "random_hi", "float"),
    ("aggregator", "kind", "aggregator", "str"),
    ("aggregator", "validation_fraction", "validation_fraction", "float"),
    ("aggregator", "temperature", "temperature", "float"),
    ("aggregator", "weight_memory", "weight_memory", "float"),
    ("aggregator", "score", "score", "str"),
    ("aggregator", "variances", "variances", "str"),
    ("aggregator", "variance_floor", "variance_floor", "float"),
    ("secure_aggregation", "enabled", "secure_aggregation", "bool"),
    ("secure_aggregation", "scale_bits", "scale_bits", "int"),
    ("delay", "enabled", "delay_enabled", "bool"),
    ("delay", "area_side_m", "area_side_m", "float"),
    ("delay", "server_x", "server_x", "float"),
    ("delay", "server_y", "server_y", "float"),
    ("delay", "cpu_cycles_per_sample", "cpu_cycles_per_sample", "float"),
    ("delay", "cpu_rate_hz", "cpu_rate_hz", "float"),
    ("delay", "bits_per_param", "bits_per_param", "int"),
    ("delay", "bandwidth_hz", "bandwidth_hz", "float"),
    ("delay", "tx_power_w", "tx_power_w", "float"),
    ("delay", "noise_w", "noise_w", "float"),
    ("delay", "path_loss_exponent", "path_loss_exponent", "float"),
    ("delay", "deadline_s", "deadline_s", "optfloat"),
    ("delay", "min_clients", "min_clients", "int"),
    ("delay", "composition", "delay_composition", "str"),
]


def _parse_value(kind: str, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "optfloat":
            return None if raw == "" else float(raw)
        if kind == "bool":
            if raw.lower() in ("true", "yes", "1", "on"):
                return True
            if raw.lower() in ("false", "no", "0", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "ints":
            return tuple(int(part) for part in raw.split(",") if part.strip())
        return raw
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def _format_value(kind: str, value) -> str:
    if kind == "optfloat":
        return "" if value is None else repr(float(value))
    if kind == "float":
        return repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "ints":
        return ",".join(str(v) for v in value)
    return str(value)


def parse_config(path) -> RunConfig:
    """Read one INI file into a RunConfig; unknown sections or keys fail."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    known = {(s, k): (attr, kind) for s, k, attr, kind in _SCHEMA}
    errors = []
    values = {}
    for section in parser.sections():
        for key, raw in parser.items(section):
            if (section, key) not in known:
                errors.append(f"{section}.{key}: unknown field")
                continue
            attr, kind = known[(section, key)]
            try:
                values[attr] = _parse_value(kind, raw, f"{section}.{key}")
            except ConfigError as exc:
                errors.extend(exc.errors)
    if errors:
        raise ConfigError(errors)
    return RunConfig(**values)


def validate(cfg: RunConfig) -> list[str]:
    """All validation problems, each prefixed with its section.key path."""
    errs = []

    def check(ok: bool, message: str):
        if not ok:
            errs.append(message)

    check(cfg.rounds >= 1, "run.rounds: must be >= 1")
    check(cfg.repeats >= 1, "run.repeats: must be >= 1")
    check(
        cfg.stop_accuracy is None or 0 < cfg.stop_accuracy <= 1,
        "run.stop_accuracy: must be in (0, 1] when set",
    )
    check(0 <= cfg.failure_threshold < 1, "run.failure_threshold: must be in [0, 1)")

    try:
        spec = cfg.model_spec()
        check(spec.input_dim == 784, "model.layer_sizes: input dimension must be 784")
        check(spec.n_classes == 10, "model.layer_sizes: class count must be 10")
    except ConfigError as exc:
        errs.extend(exc.errors)

    check(cfg.data_source in ("synthetic", "idx"), "data.source: must be synthetic or idx")
    if cfg.data_source == "idx" and not os.environ.get(DATA_DIR_ENV):
        for attr in ("train_images", "train_labels", "test_images", "test_labels"):
            check(bool(getattr(cfg, attr)), f"data.{attr}: path required for idx source")
    if cfg.data_source == "synthetic":
        check(cfg.synthetic_train >= 10, "data.synthetic_train: must be >= 10")
        check(cfg.synthetic_test >= 10, "data.synthetic_test: must be >= 10")
        check(0 <= cfg.synthetic_noise < 1, "data.synthetic_noise: must be in [0, 1)")

    check(cfg.partition in ("iid", "non_iid"), "partition.kind: must be iid or non_iid")
    check(cfg.shards_per_client >= 1, "partition.shards_per_client: must be >= 1")

    check(cfg.n_clients >= 1, "clients.n_clients: must be >= 1")
    if cfg.clients_per_round > 1:
        check(
            float(cfg.clients_per_round).is_integer()
            and cfg.clients_per_round <= cfg.n_clients,
            "clients.clients_per_round: count must be an integer <= n_clients",
        )
    else:
        check(cfg.clients_per_round > 0, "clients.clients_per_round: fraction must be > 0")
    check(cfg.local_iterations >= 1, "clients.local_iterations: must be >= 1")
    check(cfg.batch_size >= 1, "clients.batch_size: must be >= 1")
    check(cfg.learning_rate > 0, "clients.learning_rate: must be > 0")

    check(
        cfg.privacy_mechanism in ("none", "gaussian", "laplace", "dummy"),
        "privacy.mechanism: must be none, gaussian, laplace or dummy",
    )
    check(cfg.gaussian_param >= 0, "privacy.gaussian_param: must be >= 0")
    check(
        cfg.gaussian_reading in ("std", "variance"),
        "privacy.gaussian_reading: must be std or variance",
    )
    check(cfg.laplace_scale >= 0, "privacy.laplace_scale: must be >= 0")
    check(cfg.dummy_count >= 1, "privacy.dummy_count: must be >= 1")
    check(cfg.dummy_std >= 0, "privacy.dummy_std: must be >= 0")

    check(0 <= cfg.n_malicious <= cfg.n_clients, "attack.n_malicious: must be in [0, n_clients]")
    check(
        cfg.attack_behavior in ("sign_flip", "random_uniform"),
        "attack.behavior: must be sign_flip or random_uniform",
    )
    check(cfg.random_lo < cfg.random_hi, "attack.random_lo: must be < attack.random_hi")

    check(
        cfg.aggregator in ("fedavg", "test_weighted", "inverse_variance"),
        "aggregator.kind: must be fedavg, test_weighted or inverse_variance",
    )
    if cfg.aggregator == "test_weighted":
        try:
            cfg.test_weighted()
        except ConfigError as exc:
            errs.extend(exc.errors)
    if cfg.aggregator == "inverse_variance":
        check(cfg.variance_floor > 0, "aggregator.variance_floor: must be > 0")
        try:
            cfg.variance_map()
        except (ValueError, ConfigError):
            errs.append("aggregator.variances: expected 'id=value;...' or a single number")

    check(0 < cfg.scale_bits < 63, "secure_aggregation.scale_bits: must be in (0, 63)")
    if cfg.secure_aggregation:
        check(
            cfg.aggregator == "fedavg",
            "secure_aggregation.enabled: only the fedavg aggregator can run on masked sums",
        )
        check(
            cfg.privacy_mechanism != "dummy",
            "secure_aggregation.enabled: dummy payload sets cannot be masked",
        )

    if cfg.delay_enabled:
        try:
            cfg.delay_config(payload_bits=1.0)
        except ConfigError as exc:
            errs.extend(exc.errors)
        check(cfg.bits_per_param >= 1, "delay.bits_per_param: must be >= 1")
        check(
            cfg.min_clients <= cfg.n_clients,
            "delay.min_clients: cannot exceed clients.n_clients",
        )

    return errs


def validated(cfg: RunConfig) -> RunConfig:
    errs = validate(cfg)
    if errs:
        raise ConfigError(errs)
    return cfg


def snapshot(cfg: RunConfig, path) -> None:
    """Write the resolved config: every field, canonical order and format."""
    lines = []
    current = None
    for section, key, attr, kind in _SCHEMA:
        if section != current:
            if current is not None:
                lines.append("")
            lines.append(f"[{section}]")
            current = section
        lines.append(f"{key} = {_format_value(kind, getattr(cfg, attr))}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
