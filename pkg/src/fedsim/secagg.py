"""Pairwise additive masking with exact sum recovery.

Simplified realization of the four-round reporting protocol: advertise,
share, commit, finalize. Real key agreement and threshold secret sharing
are replaced by a simulated trusted setup that hands each unordered pair a
shared seed; this is a fidelity boundary, not a cryptographic guarantee.
Arithmetic is fixed-point over Z_2^64 so the unmasked aggregate equals the
direct modular sum of the survivors' encodings, exactly.

Wire form of a masked vector, should this ever leave the process: the
uint64 coordinates serialized little-endian (see MaskedUpdate.to_bytes).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ProtocolError, RoundAbandoned
from .seeding import derive_key

PHASES = ("advertise", "share", "commit", "finalize")


@dataclass(frozen=True)
class FixedPointCodec:
    """Round-to-nearest fixed point with ``scale_bits`` fraction bits.

    Encoding wraps into uint64; decoding takes the centered (two's
    complement) lift. Sums of up to ~2^(63 - scale_bits) stay exact.
    """

    scale_bits: int = 24

    def __post_init__(self):
        if not 0 < self.scale_bits < 63:
            raise ConfigError("secure_aggregation.scale_bits must be in (0, 63)")

    @property
    def scale(self) -> float:
        return float(1 << self.scale_bits)

    def encode(self, values: np.ndarray) -> np.ndarray:
        if not np.all(np.isfinite(values)):
            raise ConfigError("cannot encode non-finite values")
        return np.rint(np.asarray(values, dtype=np.float64) * self.scale).astype(
            np.int64
        ).astype(np.uint64)

    def decode(self, words: np.ndarray) -> np.ndarray:
        return words.astype(np.int64).astype(np.float64) / self.scale


def _prg(pair_seed: int, round_tag: int, length: int) -> np.ndarray:
    """Deterministic uint64 stream for one pair and round."""
    key = derive_key("secagg-mask", pair_seed, round_tag)
    return np.random.Philox(key=key).random_raw(length).astype(np.uint64)


@dataclass
class MaskSession:
    """Single-owner state for one aggregation round.

    Phases advance strictly advertise -> share -> commit -> finalize.
    """

    participants: tuple[int, ...]
    round_tag: int
    length: int
    phase: str = "advertise"
    pair_seeds: dict[tuple[int, int], int] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.participants)) != len(self.participants):
            raise ProtocolError("duplicate participant ids")
        self.participants = tuple(sorted(self.participants))

    def _require(self, phase: str) -> None:
        if self.phase != phase:
            raise ProtocolError(f"operation requires phase {phase!r}, session is in {self.phase!r}")

    def advance(self) -> str:
        idx = PHASES.index(self.phase)
        if idx == len(PHASES) - 1:
            raise ProtocolError("session already finalized")
        self.phase = PHASES[idx + 1]
        return self.phase

    def share_seeds(self, rng: np.random.Generator) -> None:
        """Simulated key agreement: both parties of each pair get one seed."""
        self._require("share")
        for a_idx, a in enumerate(self.participants):
            for b in self.participants[a_idx + 1 :]:
                self.pair_seeds[(a, b)] = int(rng.integers(0, 2**63))

    def seed_for(self, i: int, j: int) -> int:
        return self.pair_seeds[(min(i, j), max(i, j))]


@dataclass(frozen=True)
class MaskedUpdate:
    client_id: int
    values: np.ndarray  # uint64, length d

    def to_bytes(self) -> bytes:
        return self.values.astype("<u8").tobytes()


def mask_vector(encoded: np.ndarray, own_id: int, session: MaskSession) -> MaskedUpdate:
    """Commit-phase masking: add +PRG for higher-id peers, subtract for lower."""
    session._require("commit")
    if own_id not in session.participants:
        raise ProtocolError(f"client {own_id} is not in the session")
    if encoded.shape != (session.length,):
        raise ProtocolError(
            f"client {own_id}: vector length {encoded.shape} != session length {session.length}"
        )
    masked = encoded.copy()
    for peer in session.participants:
        if peer == own_id:
            continue
        stream = _prg(session.seed_for(own_id, peer), session.round_tag, session.length)
        if peer > own_id:
            masked += stream
        else:
            masked -= stream
    return MaskedUpdate(own_id, masked)


def unmask_sum(
    masked: list[MaskedUpdate], session: MaskSession, survivors: set[int]
) -> np.ndarray:
    """Finalize: cancel dropped clients' mask contributions, return uint64 sum."""
    session._require("finalize")
    dropped = [p for p in session.participants if p not in survivors]
    total = np.zeros(session.length, dtype=np.uint64)
    for upd in masked:
        if upd.client_id in survivors:
            total += upd.values
    # Survivors reveal the pairwise seeds they shared with each dropped client;
    # the server regenerates those streams and removes them from the sum.
    for alive in sorted(survivors):
        for gone in dropped:
            stream = _prg(session.seed_for(alive, gone), session.round_tag, session.length)
            if gone > alive:
                total -= stream
            else:
                total += stream
    return total


def run_session(
    updates: list,
    survivors: set[int] | None,
    rng: np.random.Generator,
    codec: FixedPointCodec | None = None,
    round_tag: int = 0,
) -> np.ndarray:
    """Drive all four phases in-process and return the decoded survivor sum.

    ``updates`` are ClientUpdates with single-vector payloads. Clients outside
    ``survivors`` are treated as dropped after the commit phase began: their
    masked vectors never reach the server and their masks are cancelled via
    seed reveal.
    """
    codec = codec or FixedPointCodec()
    ids = [u.client_id for u in updates]
    if not ids:
        raise RoundAbandoned("secure aggregation with no participants")
    vectors = {u.client_id: u.single() for u in updates}
    lengths = {v.shape for v in vectors.values()}
    if len(lengths) != 1:
        raise ProtocolError(f"mismatched vector lengths {sorted(lengths)}")
    (d,) = lengths.pop()

    if survivors is None:
        survivors = set(ids)
    survivors = set(survivors) & set(ids)
    if not survivors:
        raise RoundAbandoned("all clients dropped, round abandoned")

    session = MaskSession(tuple(ids), round_tag, d)  # advertise: ids exchanged
    session.advance()
    session.share_seeds(rng)
    session.advance()
    masked = [
        mask_vector(codec.encode(vectors[cid]), cid, session)
        for cid in sorted(survivors)
    ]
    session.advance()
    return codec.decode(unmask_sum(masked, session, survivors))
