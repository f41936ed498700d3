"""Ingestion and analysis of measured detection-count tables.

A count table is a CSV with header ``phase_a,phase_b,phase_c,spd1,spd2``.
Phases are encoded as quarter-turn integers (0 -> 0, 1 -> pi/2, 2 -> pi,
3 -> 3pi/2) and each row gives the number of clicks per detector accumulated
over all rounds announced with that phase triple.

Decoding: players signal in the X basis with phases {0, pi} and in the Y
basis with {pi/2, 3pi/2}; the dealer's recorded phase is even (X) or odd (Y)
in the same units, with an extra pi sometimes added for balance.  For every
tabulated triple the interferometer output is deterministic up to noise:
detector 1 is the expected port when the net phase difference
``phase_b + phase_c - phase_a`` vanishes mod 2 pi, detector 2 when it equals
pi.  Clicks in the unexpected port count as errors.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass

from .errors import CountTableError, ParameterError
from .finitekey import EpsilonBudget, KeyRateReport, key_length, phase_error_upper_bound
from .optics import ChannelModel, binary_entropy, gain, transmittance
from .protocol import SetTag

__all__ = [
    "CountRow",
    "RowClass",
    "ExperimentSummary",
    "COUNT_HEADER",
    "parse_counts",
    "render_counts",
    "classify_row",
    "tally_sets",
    "experiment_skr",
]

COUNT_HEADER = ["phase_a", "phase_b", "phase_c", "spd1", "spd2"]

_PLAYER_BASIS = {0: "X", 2: "X", 1: "Y", 3: "Y"}


@dataclass(frozen=True)
class CountRow:
    """One table row: a phase triple and its two detector counts."""

    phase_a: int
    phase_b: int
    phase_c: int
    spd1: int
    spd2: int

    def __post_init__(self):
        for name in ("phase_a", "phase_b", "phase_c"):
            if getattr(self, name) not in (0, 1, 2, 3):
                raise CountTableError(f"{name} must be a quarter-turn code 0..3")
        if self.spd1 < 0 or self.spd2 < 0:
            raise CountTableError("detector counts must be nonnegative")

    @property
    def triple(self) -> tuple:
        return (self.phase_a, self.phase_b, self.phase_c)


@dataclass(frozen=True)
class RowClass:
    """Sifting classification of one phase triple.

    ``expected_spd`` is 1 or 2 for rows belonging to a sifted set and None
    for discarded patterns, whose expected port can be undefined.
    """

    set_tag: SetTag
    expected_spd: int | None


def parse_counts(source) -> list[CountRow]:
    """Parse a count table from a path or an open text stream.

    The header row must match ``phase_a,phase_b,phase_c,spd1,spd2``; an
    entirely empty input parses to an empty list.  Repeated phase triples
    and malformed lines are rejected with their line number.
    """
    if isinstance(source, (str, os.PathLike)):
        with open(source, newline="") as fh:
            return parse_counts(fh)

    reader = csv.reader(source)
    rows: list[CountRow] = []
    seen: dict[tuple, int] = {}
    header = next(reader, None)
    if header is None:
        return rows
    if [h.strip() for h in header] != COUNT_HEADER:
        raise CountTableError(f"expected header {','.join(COUNT_HEADER)}", line=1)
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != 5:
            raise CountTableError(f"expected 5 fields, got {len(rec)}", line=lineno)
        try:
            values = [int(field.strip()) for field in rec]
        except ValueError:
            raise CountTableError(f"non-integer field in {rec!r}", line=lineno) from None
        try:
            row = CountRow(*values)
        except CountTableError as exc:
            raise CountTableError(str(exc), line=lineno) from None
        if row.triple in seen:
            raise CountTableError(
                f"duplicate phase triple {row.triple}, first seen on line {seen[row.triple]}",
                line=lineno,
            )
        seen[row.triple] = lineno
        rows.append(row)
    return rows


def render_counts(rows) -> str:
    """Serialize rows back to CSV text; inverse of :func:`parse_counts`."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(COUNT_HEADER)
    for row in rows:
        writer.writerow([row.phase_a, row.phase_b, row.phase_c, row.spd1, row.spd2])
    return out.getvalue()


def classify_row(row: CountRow) -> RowClass:
    """Assign a row to its sifted set and find the expected detector.

    The set follows from the announced bases alone; the expected port from
    the net phase difference.  Patterns matching no set are ``DISCARD``.
    """
    ba = _PLAYER_BASIS[row.phase_a]
    bb = _PLAYER_BASIS[row.phase_b]
    bc = _PLAYER_BASIS[row.phase_c]
    if (ba, bb, bc) == ("X", "X", "X"):
        tag = SetTag.X_SET
    elif (ba, bb, bc) == ("X", "Y", "Y"):
        tag = SetTag.YBC_SET
    elif (ba, bb, bc) == ("Y", "X", "Y"):
        tag = SetTag.YAC_SET
    else:
        return RowClass(set_tag=SetTag.DISCARD, expected_spd=None)

    dphi = (row.phase_b + row.phase_c - row.phase_a) % 4
    # dphi is even for every set pattern; odd values only occur in DISCARD rows
    expected = 1 if dphi == 0 else 2
    return RowClass(set_tag=tag, expected_spd=expected)


@dataclass(frozen=True)
class ExperimentSummary:
    """Set tallies and error rates extracted from one count table."""

    n_x: int
    m_x: int
    n_ybc: int
    m_ybc: int
    n_yac: int
    m_yac: int
    mu: float | None = None
    px: float | None = None

    @property
    def n_y(self) -> int:
        return self.n_ybc + self.n_yac

    @property
    def eb_x(self) -> float:
        return self.m_x / self.n_x

    @property
    def eb_ybc(self) -> float:
        return self.m_ybc / self.n_ybc

    @property
    def eb_yac(self) -> float:
        return self.m_yac / self.n_yac

    @property
    def eb_y_worst(self) -> float:
        return max(self.eb_ybc, self.eb_yac)

    def as_report(self) -> dict:
        out = {
            "n_x": self.n_x, "m_x": self.m_x,
            "n_ybc": self.n_ybc, "m_ybc": self.m_ybc,
            "n_yac": self.n_yac, "m_yac": self.m_yac,
            "n_y": self.n_y,
            "eb_x": self.eb_x, "eb_ybc": self.eb_ybc, "eb_yac": self.eb_yac,
            "eb_y_worst": self.eb_y_worst,
        }
        if self.mu is not None:
            out["mu"] = self.mu
        if self.px is not None:
            out["px"] = self.px
        return out


def tally_sets(rows, *, mu: float | None = None, px: float | None = None) -> ExperimentSummary:
    """Accumulate per-set detection and error counts over table rows.

    Discarded patterns contribute nothing.  All three sets must end up
    nonempty, otherwise the table cannot support the analysis.
    """
    n = {SetTag.X_SET: 0, SetTag.YBC_SET: 0, SetTag.YAC_SET: 0}
    m = {SetTag.X_SET: 0, SetTag.YBC_SET: 0, SetTag.YAC_SET: 0}
    for row in rows:
        cls = classify_row(row)
        if cls.set_tag == SetTag.DISCARD:
            continue
        n[cls.set_tag] += row.spd1 + row.spd2
        m[cls.set_tag] += row.spd2 if cls.expected_spd == 1 else row.spd1
    for tag, total in n.items():
        if total == 0:
            raise CountTableError(f"no detections in required set {tag.name}")
    return ExperimentSummary(
        n_x=n[SetTag.X_SET], m_x=m[SetTag.X_SET],
        n_ybc=n[SetTag.YBC_SET], m_ybc=m[SetTag.YBC_SET],
        n_yac=n[SetTag.YAC_SET], m_yac=m[SetTag.YAC_SET],
        mu=mu, px=px,
    )


def observed_sifted_gain(summary: ExperimentSummary, n_pulses: float, px: float) -> float:
    """Per-round click probability inferred from the sifted counts.

    The sifted sets witness a fraction ``px^3 + 2 px (1-px)^2`` of all
    rounds, so the gain estimate is the sifted total over that share of the
    emitted pulses.
    """
    if n_pulses <= 0:
        raise ParameterError("n_pulses must be positive")
    share = px ** 3 + 2.0 * px * (1.0 - px) ** 2
    return (summary.n_x + summary.n_y) / (n_pulses * share)


def experiment_skr(
    summary: ExperimentSummary,
    n_pulses: float,
    budget: EpsilonBudget | None = None,
    *,
    mu: float | None = None,
    px: float | None = None,
    ec_efficiency: float = 1.16,
    gain_mode: str = "observed",
    channel: ChannelModel | None = None,
    rep_rate_hz: float = 1e8,
) -> KeyRateReport:
    """Secure key rate extracted from measured tallies.

    The concentration pipeline runs separately on the two checked Y sets and
    the larger resulting phase error bound is kept.  The coin imbalance uses
    the observed sifted gain by default; ``gain_mode='analytic'`` computes
    the model gain instead and then requires ``channel``.

    ``n_pulses`` is interpreted as the total number of emitted pulses;
    ``rep_rate_hz`` only converts the per-pulse rate to bits per second.
    """
    if budget is None:
        budget = EpsilonBudget()
    mu = mu if mu is not None else summary.mu
    px = px if px is not None else summary.px
    if mu is None or px is None:
        raise ParameterError("mu and px are required (argument or summary metadata)")

    if gain_mode == "observed":
        q = observed_sifted_gain(summary, n_pulses, px)
    elif gain_mode == "analytic":
        if channel is None:
            raise ParameterError("analytic gain mode requires a channel model")
        q = gain(mu, transmittance(channel), channel.dark_count)
    else:
        raise ParameterError("gain_mode must be 'observed' or 'analytic'")

    bound_bc = phase_error_upper_bound(summary.n_x, summary.n_ybc, summary.m_ybc, mu, q, budget)
    bound_ac = phase_error_upper_bound(summary.n_x, summary.n_yac, summary.m_yac, mu, q, budget)
    worst = bound_bc if bound_bc.ep_bar >= bound_ac.ep_bar else bound_ac

    ell = key_length(summary.n_x, worst.ep_bar, summary.eb_x, ec_efficiency, budget)
    lam_ec = summary.n_x * ec_efficiency * binary_entropy(summary.eb_x)
    return KeyRateReport(
        n_pulses=n_pulses,
        n_x=summary.n_x,
        eb_x=summary.eb_x,
        ep_bar=worst.ep_bar,
        lambda_ec=lam_ec,
        ell=ell,
        rate_per_pulse=ell / n_pulses,
        abort=ell == 0,
        rate_per_second=ell / (n_pulses / rep_rate_hz),
        phase=worst,
        budget=budget,
    )
