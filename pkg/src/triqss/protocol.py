"""Round-level simulation of the three-user secret sharing protocol.

Each round the two players (a and b) pick a random bit and a random basis,
encode them as pulse phases, and the dealer (c) picks a basis and adds the
matching phase offset on player b's arm before the beam splitter.  Detector
1 fires on constructive interference (relative phase 0) and yields dealer
bit 0; detector 2 fires at relative phase pi and yields bit 1.  A round with
no click is discarded; a double click is kept and resolved to a uniformly
random bit.

Detected rounds are sifted by the announced bases into three sets:

- ``X_SET``: all three chose X; produces key bits.
- ``YBC_SET``: player b and the dealer chose Y, player a chose X.
- ``YAC_SET``: player a and the dealer chose Y, player b chose X.  The
  interference condition is inverted in this set, so the dealer flips his
  bit there (:func:`apply_yac_flip`).

In every sifted set the dealer's (possibly flipped) bit should equal the
XOR of the players' bits; disagreements are tallied as errors.

``run_protocol`` simulates in fixed-size blocks, each driven by its own
child of the master seed, so results are reproducible and blocks can be
merged by addition in block order regardless of how they were produced.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .errors import ParameterError, ProtocolAbortError
from .optics import ChannelModel, SourceParams, gain, transmittance

__all__ = [
    "Basis",
    "Outcome",
    "SetTag",
    "SetThresholds",
    "ClickProbabilities",
    "RoundRecord",
    "SiftedTallies",
    "ProtocolRun",
    "encode_player_phase",
    "dealer_phase",
    "click_probabilities",
    "simulate_round",
    "apply_yac_flip",
    "run_protocol",
    "verify_correlation",
]


class Basis(IntEnum):
    X = 0
    Y = 1


class Outcome(IntEnum):
    ZERO = 0
    ONE = 1
    NONE = 2
    DOUBLE = 3


class SetTag(IntEnum):
    X_SET = 0
    YBC_SET = 1
    YAC_SET = 2
    DISCARD = 3


class ClickProbabilities(NamedTuple):
    """Distribution over registered round outcomes; sums to one."""

    only0: float
    only1: float
    none: float
    double: float


@dataclass(frozen=True)
class SetThresholds:
    """Target detection counts per sifted set for a threshold-driven run."""

    n_x: int
    n_ybc: int
    n_yac: int

    def __post_init__(self):
        if min(self.n_x, self.n_ybc, self.n_yac) < 1:
            raise ParameterError("set thresholds must be at least 1")


@dataclass(frozen=True)
class RoundRecord:
    """Full description of one simulated round.

    ``s_c`` is the dealer's registered bit and is present exactly when the
    outcome is not ``NONE``; for ``DOUBLE`` it carries the random resolution.
    The record holds the raw bit, before any YAC flip.
    """

    index: int
    s_a: int
    s_b: int
    basis_a: Basis
    basis_b: Basis
    basis_c: Basis
    outcome: Outcome
    s_c: int | None
    set_tag: SetTag


@dataclass(frozen=True)
class SiftedTallies:
    """Detection and error counts per sifted set, plus rounds consumed."""

    n_x: int = 0
    m_x: int = 0
    n_ybc: int = 0
    m_ybc: int = 0
    n_yac: int = 0
    m_yac: int = 0
    rounds: int = 0

    @property
    def n_y(self) -> int:
        return self.n_ybc + self.n_yac

    def merged(self, other: "SiftedTallies") -> "SiftedTallies":
        return SiftedTallies(
            n_x=self.n_x + other.n_x, m_x=self.m_x + other.m_x,
            n_ybc=self.n_ybc + other.n_ybc, m_ybc=self.m_ybc + other.m_ybc,
            n_yac=self.n_yac + other.n_yac, m_yac=self.m_yac + other.m_yac,
            rounds=self.rounds + other.rounds,
        )


@dataclass(frozen=True)
class ProtocolRun:
    """Result of :func:`run_protocol`: tallies plus the raw key bit triples."""

    tallies: SiftedTallies
    key_a: np.ndarray
    key_b: np.ndarray
    key_c: np.ndarray
    rounds_used: int
    seed: int


_PHASE_X = (0.0, math.pi)
_PHASE_Y = (1.5 * math.pi, 0.5 * math.pi)


def encode_player_phase(basis: Basis, bit: int) -> float:
    """Pulse phase a player applies for a given basis and bit."""
    if bit not in (0, 1):
        raise ParameterError("bit must be 0 or 1")
    return _PHASE_X[bit] if basis == Basis.X else _PHASE_Y[bit]


def dealer_phase(basis: Basis) -> float:
    """Phase offset the dealer adds on player b's arm for his basis choice."""
    return 0.0 if basis == Basis.X else 0.5 * math.pi


def click_probabilities(
    phase_a: float,
    phase_b: float,
    mu: float,
    eta: float,
    dark: float,
    misalignment: float,
) -> ClickProbabilities:
    """Outcome distribution for one round at given total arm phases.

    ``phase_b`` is the total phase on player b's arm (encoding plus dealer
    offset).  The two output ports receive mean photon numbers
    ``2 mu eta cos^2(dphi/2)`` and ``2 mu eta sin^2(dphi/2)``; each detector
    additionally fires independently with the dark count probability, and a
    lone signal click is swapped to the other detector with probability
    ``misalignment``.
    """
    if mu < 0 or eta < 0 or not 0 <= dark < 1 or not 0 <= misalignment <= 0.5:
        raise ParameterError("click model arguments out of range")
    dphi = phase_b - phase_a
    i1 = 2.0 * mu * eta * math.cos(0.5 * dphi) ** 2
    i2 = 2.0 * mu * eta * math.sin(0.5 * dphi) ** 2
    quiet1 = (1.0 - dark) * math.exp(-i1)
    quiet2 = (1.0 - dark) * math.exp(-i2)
    raw0 = (1.0 - quiet1) * quiet2
    raw1 = (1.0 - quiet2) * quiet1
    return ClickProbabilities(
        only0=(1.0 - misalignment) * raw0 + misalignment * raw1,
        only1=(1.0 - misalignment) * raw1 + misalignment * raw0,
        none=quiet1 * quiet2,
        double=(1.0 - quiet1) * (1.0 - quiet2),
    )


def _sift(basis_a: Basis, basis_b: Basis, basis_c: Basis, detected: bool) -> SetTag:
    if not detected:
        return SetTag.DISCARD
    if basis_a == Basis.X and basis_b == Basis.X and basis_c == Basis.X:
        return SetTag.X_SET
    if basis_a == Basis.X and basis_b == Basis.Y and basis_c == Basis.Y:
        return SetTag.YBC_SET
    if basis_a == Basis.Y and basis_b == Basis.X and basis_c == Basis.Y:
        return SetTag.YAC_SET
    return SetTag.DISCARD


def simulate_round(
    source: SourceParams,
    channel: ChannelModel,
    rng: np.random.Generator,
    index: int = 0,
) -> RoundRecord:
    """Simulate a single round with explicit draw order.

    Draws, in order: player a's bit, player b's bit, then the three basis
    choices (uniform variate compared against ``px``, players first, dealer
    last), the outcome variate, and finally, only on a double click, the
    resolution bit.
    """
    s_a = int(rng.integers(0, 2))
    s_b = int(rng.integers(0, 2))
    basis_a = Basis.X if rng.random() < source.px else Basis.Y
    basis_b = Basis.X if rng.random() < source.px else Basis.Y
    basis_c = Basis.X if rng.random() < source.px else Basis.Y

    phase_a = encode_player_phase(basis_a, s_a)
    phase_b = encode_player_phase(basis_b, s_b) + dealer_phase(basis_c)
    probs = click_probabilities(
        phase_a, phase_b, source.intensity, transmittance(channel),
        channel.dark_count, channel.misalignment,
    )
    u = rng.random()
    if u < probs.only0:
        outcome, s_c = Outcome.ZERO, 0
    elif u < probs.only0 + probs.only1:
        outcome, s_c = Outcome.ONE, 1
    elif u < probs.only0 + probs.only1 + probs.none:
        outcome, s_c = Outcome.NONE, None
    else:
        outcome, s_c = Outcome.DOUBLE, int(rng.integers(0, 2))

    tag = _sift(basis_a, basis_b, basis_c, outcome != Outcome.NONE)
    return RoundRecord(
        index=index, s_a=s_a, s_b=s_b,
        basis_a=basis_a, basis_b=basis_b, basis_c=basis_c,
        outcome=outcome, s_c=s_c, set_tag=tag,
    )


def apply_yac_flip(record: RoundRecord) -> RoundRecord:
    """Flip the dealer's bit on YAC rounds, where interference is inverted.

    Applying the flip twice returns the original record.  Records from other
    sets pass through unchanged; a record without a dealer bit is rejected.
    """
    if record.set_tag != SetTag.YAC_SET:
        return record
    if record.s_c is None:
        raise ParameterError("cannot flip a round with no detection")
    return replace(record, s_c=record.s_c ^ 1)


class _Block(NamedTuple):
    """Per-round arrays for one simulated block."""

    s_a: np.ndarray
    s_b: np.ndarray
    basis_a: np.ndarray
    basis_b: np.ndarray
    basis_c: np.ndarray
    outcome: np.ndarray
    s_c_eff: np.ndarray
    in_x: np.ndarray
    in_ybc: np.ndarray
    in_yac: np.ndarray
    err: np.ndarray


def _simulate_block(
    source: SourceParams,
    channel: ChannelModel,
    rng: np.random.Generator,
    n: int,
) -> _Block:
    """Vectorized simulation of ``n`` rounds on one generator.

    Stream layout per block: player bits, then the three basis variates,
    then the outcome variate, then resolution bits for every round.
    """
    px = source.px
    s_a = rng.integers(0, 2, n, dtype=np.uint8)
    s_b = rng.integers(0, 2, n, dtype=np.uint8)
    basis_a = (rng.random(n) >= px).astype(np.uint8)
    basis_b = (rng.random(n) >= px).astype(np.uint8)
    basis_c = (rng.random(n) >= px).astype(np.uint8)
    u = rng.random(n)
    resolve = rng.integers(0, 2, n, dtype=np.uint8)

    phase_a = np.where(basis_a == 0, s_a * math.pi, (1.5 - s_a) * math.pi)
    phase_b = np.where(basis_b == 0, s_b * math.pi, (1.5 - s_b) * math.pi)
    phase_b = phase_b + np.where(basis_c == 0, 0.0, 0.5 * math.pi)
    dphi = phase_b - phase_a

    mu_eta = 2.0 * source.intensity * transmittance(channel)
    i1 = mu_eta * np.cos(0.5 * dphi) ** 2
    i2 = mu_eta - i1
    dark = channel.dark_count
    ed = channel.misalignment
    quiet1 = (1.0 - dark) * np.exp(-i1)
    quiet2 = (1.0 - dark) * np.exp(-i2)
    raw0 = (1.0 - quiet1) * quiet2
    raw1 = (1.0 - quiet2) * quiet1
    p0 = (1.0 - ed) * raw0 + ed * raw1
    p1 = (1.0 - ed) * raw1 + ed * raw0
    pn = quiet1 * quiet2

    outcome = np.where(
        u < p0, 0, np.where(u < p0 + p1, 1, np.where(u < p0 + p1 + pn, 2, 3))
    ).astype(np.uint8)
    detected = outcome != 2
    s_c = np.where(outcome == 0, 0, np.where(outcome == 1, 1, resolve)).astype(np.uint8)

    in_x = detected & (basis_a == 0) & (basis_b == 0) & (basis_c == 0)
    in_ybc = detected & (basis_a == 0) & (basis_b == 1) & (basis_c == 1)
    in_yac = detected & (basis_a == 1) & (basis_b == 0) & (basis_c == 1)

    s_c_eff = s_c ^ in_yac.astype(np.uint8)
    err = (s_c_eff != (s_a ^ s_b)) & detected

    return _Block(s_a, s_b, basis_a, basis_b, basis_c, outcome, s_c_eff,
                  in_x, in_ybc, in_yac, err)


def _tally_prefix(block: _Block, keep: int) -> SiftedTallies:
    sl = slice(0, keep)
    return SiftedTallies(
        n_x=int(block.in_x[sl].sum()),
        m_x=int((block.err & block.in_x)[sl].sum()),
        n_ybc=int(block.in_ybc[sl].sum()),
        m_ybc=int((block.err & block.in_ybc)[sl].sum()),
        n_yac=int(block.in_yac[sl].sum()),
        m_yac=int((block.err & block.in_yac)[sl].sum()),
        rounds=keep,
    )


_TRACE_HEADER = ["i", "s_a", "s_b", "basis_a", "basis_b", "basis_c", "outcome", "s_c", "set_tag"]
_OUTCOME_NAMES = ("zero", "one", "none", "double")
_TAG_NAMES = ("X", "YBC", "YAC", "DISCARD")


def _write_trace_rows(writer, start: int, block: _Block, keep: int) -> None:
    tag = np.full(len(block.s_a), int(SetTag.DISCARD), dtype=np.uint8)
    tag[block.in_x] = SetTag.X_SET
    tag[block.in_ybc] = SetTag.YBC_SET
    tag[block.in_yac] = SetTag.YAC_SET
    for j in range(keep):
        out = block.outcome[j]
        # the trace shows the raw dealer bit, before the YAC flip
        raw_bit = block.s_c_eff[j] ^ (tag[j] == SetTag.YAC_SET)
        writer.writerow([
            start + j, int(block.s_a[j]), int(block.s_b[j]),
            "XY"[block.basis_a[j]], "XY"[block.basis_b[j]], "XY"[block.basis_c[j]],
            _OUTCOME_NAMES[out],
            int(raw_bit) if out != Outcome.NONE else "",
            _TAG_NAMES[tag[j]],
        ])


def run_protocol(
    source: SourceParams,
    channel: ChannelModel,
    *,
    seed: int,
    thresholds: SetThresholds | tuple | None = None,
    max_rounds: int | None = None,
    block_size: int = 1_000_000,
    trace_path=None,
) -> ProtocolRun:
    """Run the protocol until the set thresholds are met.

    Parameters
    ----------
    thresholds:
        Target detection counts per set.  When given, the run stops at the
        exact round where the last threshold is reached; if it would take
        more than ``max_rounds`` (default: 100x the expected requirement)
        the run aborts with the partial result attached.  When ``None``,
        exactly ``max_rounds`` rounds are simulated.
    seed:
        Master seed.  Blocks draw from sequentially spawned child generators,
        so results reproduce exactly for a given (seed, block_size) pair; the
        block layout is part of the stream definition.
    trace_path:
        Optional CSV path recording every simulated round.
    """
    if thresholds is not None and not isinstance(thresholds, SetThresholds):
        thresholds = SetThresholds(*thresholds)
    if thresholds is None and max_rounds is None:
        raise ParameterError("need thresholds or an explicit number of rounds")
    if block_size < 1:
        raise ParameterError("block size must be positive")

    if thresholds is not None and max_rounds is None:
        q = gain(source.intensity, transmittance(channel), channel.dark_count)
        p_x = source.px ** 3 * q
        p_y = source.px * (1.0 - source.px) ** 2 * q
        if p_x <= 0.0 or p_y <= 0.0:
            raise ProtocolAbortError("thresholds unreachable: zero detection probability")
        expected = max(thresholds.n_x / p_x, thresholds.n_ybc / p_y, thresholds.n_yac / p_y)
        max_rounds = math.ceil(100.0 * expected)

    ss = np.random.SeedSequence(seed)
    total = SiftedTallies()
    keys_a, keys_b, keys_c = [], [], []
    trace_file = writer = None
    if trace_path is not None:
        trace_file = open(trace_path, "w", newline="")
        writer = csv.writer(trace_file)
        writer.writerow(_TRACE_HEADER)

    try:
        done = False
        while not done and total.rounds < max_rounds:
            n = min(block_size, max_rounds - total.rounds)
            rng = np.random.default_rng(ss.spawn(1)[0])
            block = _simulate_block(source, channel, rng, n)
            keep = n
            if thresholds is not None:
                met = (
                    (total.n_x + np.cumsum(block.in_x) >= thresholds.n_x)
                    & (total.n_ybc + np.cumsum(block.in_ybc) >= thresholds.n_ybc)
                    & (total.n_yac + np.cumsum(block.in_yac) >= thresholds.n_yac)
                )
                if met.any():
                    keep = int(np.argmax(met)) + 1
                    done = True
            if writer is not None:
                _write_trace_rows(writer, total.rounds, block, keep)
            in_x = block.in_x.copy()
            in_x[keep:] = False
            keys_a.append(block.s_a[in_x])
            keys_b.append(block.s_b[in_x])
            keys_c.append(block.s_c_eff[in_x])
            total = total.merged(_tally_prefix(block, keep))
    finally:
        if trace_file is not None:
            trace_file.close()

    run = ProtocolRun(
        tallies=total,
        key_a=np.concatenate(keys_a) if keys_a else np.empty(0, np.uint8),
        key_b=np.concatenate(keys_b) if keys_b else np.empty(0, np.uint8),
        key_c=np.concatenate(keys_c) if keys_c else np.empty(0, np.uint8),
        rounds_used=total.rounds,
        seed=seed,
    )
    if thresholds is not None and not done:
        raise ProtocolAbortError(
            f"round cap {max_rounds} reached before thresholds were met", partial=run,
        )
    return run


def verify_correlation(key_a, key_b, key_c) -> bool:
    """Check the secret sharing correlation: dealer bit equals XOR of players'."""
    a = np.asarray(key_a, dtype=np.uint8)
    b = np.asarray(key_b, dtype=np.uint8)
    c = np.asarray(key_c, dtype=np.uint8)
    if not (a.shape == b.shape == c.shape):
        raise ParameterError("key arrays must have equal length")
    return bool(((a ^ b) == c).all())
