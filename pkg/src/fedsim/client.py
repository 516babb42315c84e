"""One client's round: local SGD, then a privacy mechanism or an attack.

Privacy mechanisms and malicious behaviors are mutually exclusive per client
in one run; the harness applies exactly one of them to the upload.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericError
from .model import ModelSpec, loss_and_grad


@dataclass(frozen=True)
class Gaussian:
    """Add i.i.d. N(0, std^2) to every uploaded coordinate."""

    std: float

    def __post_init__(self):
        if self.std < 0:
            raise ConfigError("privacy.gaussian_std must be >= 0")

    def variance(self) -> float:
        return self.std**2


@dataclass(frozen=True)
class Laplace:
    """Add i.i.d. Laplace(0, scale); variance is 2*scale^2."""

    scale: float

    def __post_init__(self):
        if self.scale < 0:
            raise ConfigError("privacy.laplace_scale must be >= 0")

    def variance(self) -> float:
        return 2.0 * self.scale**2


@dataclass(frozen=True)
class Dummy:
    """Upload the true vector hidden among ``decoys`` noise-displaced copies."""

    decoys: int = 1
    decoy_std: float = 0.0

    def __post_init__(self):
        if self.decoys < 1:
            raise ConfigError("privacy.dummy_count must be >= 1")
        if self.decoy_std < 0:
            raise ConfigError("privacy.dummy_std must be >= 0")

    def variance(self) -> float:
        # variance of the server-side mean over the k+1 payload vectors
        k = self.decoys
        return k * self.decoy_std**2 / (k + 1) ** 2


PrivacyMechanism = Gaussian | Laplace | Dummy | None


@dataclass(frozen=True)
class SignFlip:
    """Upload the opposite of every trained parameter value."""


@dataclass(frozen=True)
class RandomUniform:
    """Replace every parameter with an independent draw from U[lo, hi]."""

    lo: float = -1.0
    hi: float = 1.0

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigError("attack.random bounds must satisfy lo < hi")


Behavior = SignFlip | RandomUniform | None  # None = honest


@dataclass(frozen=True)
class ClientConfig:
    client_id: int
    shard: np.ndarray
    local_iterations: int = 120
    batch_size: int = 1200
    learning_rate: float = 0.05
    privacy: PrivacyMechanism = None
    behavior: Behavior = None
    position: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.local_iterations < 1:
            raise ConfigError("clients.local_iterations must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("clients.batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("clients.learning_rate must be > 0")


@dataclass
class ClientUpdate:
    """Upload plus harness-only ground truth; aggregators never see ``malicious``."""

    client_id: int
    payload: list[np.ndarray]
    num_samples: int
    local_loss: float
    malicious: bool = False

    def single(self) -> np.ndarray:
        if len(self.payload) != 1:
            raise ConfigError("update holds a dummy payload set, expected one vector")
        return self.payload[0]


def local_train(
    global_params: np.ndarray,
    cfg: ClientConfig,
    spec: ModelSpec,
    images: np.ndarray,
    labels: np.ndarray,
    rng: np.random.Generator,
) -> tuple[np.ndarray, float]:
    """Run the client's local SGD pass from the broadcast model.

    Each of the E steps consumes min(B, shard) indices without replacement
    from a seeded permutation of the shard; the permutation is redrawn when
    a full pass is exhausted. Returns the full trained parameter vector and
    the mean per-step training loss.
    """
    shard = cfg.shard
    if len(shard) == 0:
        raise ConfigError(f"client {cfg.client_id}: empty shard")
    bsz = min(cfg.batch_size, len(shard))
    order = rng.permutation(shard)
    ptr = 0
    params = global_params
    losses = np.empty(cfg.local_iterations)
    for step in range(cfg.local_iterations):
        if ptr + bsz > len(order):
            order = rng.permutation(shard)
            ptr = 0
        batch = order[ptr : ptr + bsz]
        ptr += bsz
        try:
            loss, grad = loss_and_grad(params, spec, images[batch], labels[batch])
        except NumericError as exc:
            raise NumericError(f"client {cfg.client_id}, local step {step}: {exc}") from exc
        losses[step] = loss
        params = params - cfg.learning_rate * grad
    return params, float(losses.mean())


def apply_privacy(
    update: ClientUpdate, mech: PrivacyMechanism, rng: np.random.Generator
) -> ClientUpdate:
    """Perturb an honest upload. A zero-parameter mechanism is a strict no-op."""
    if mech is None:
        return update
    vec = update.single()
    if isinstance(mech, Gaussian):
        if mech.std == 0:
            return update
        payload = [vec + rng.normal(0.0, mech.std, size=vec.shape)]
    elif isinstance(mech, Laplace):
        if mech.scale == 0:
            return update
        payload = [vec + rng.laplace(0.0, mech.scale, size=vec.shape)]
    elif isinstance(mech, Dummy):
        decoys = [vec + rng.normal(0.0, mech.decoy_std, size=vec.shape) for _ in range(mech.decoys)]
        payload = [vec] + decoys
        rng.shuffle(payload)  # set order must leak nothing about the true vector
    else:
        raise ConfigError(f"unknown privacy mechanism {mech!r}")
    return replace(update, payload=payload)


def apply_behavior(
    update: ClientUpdate, behavior: Behavior, rng: np.random.Generator
) -> ClientUpdate:
    """Falsify a malicious upload; num_samples is reported unchanged."""
    if behavior is None:
        return update
    vec = update.single()
    if isinstance(behavior, SignFlip):
        payload = [-vec]
    elif isinstance(behavior, RandomUniform):
        payload = [rng.uniform(behavior.lo, behavior.hi, size=vec.shape)]
    else:
        raise ConfigError(f"unknown behavior {behavior!r}")
    return replace(update, payload=payload, malicious=True)
