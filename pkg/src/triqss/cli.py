"""Command line interface.

Four subcommands: ``simulate`` (round-level protocol simulation),
``sweep`` (optimized key rate versus distance, CSV output), ``analyze``
(measured count tables to tallies and key rate), and ``kato`` (inspect one
concentration bound, with a numeric self-check).

Settings resolve with precedence command-line flag, then config file
(``--config``, flat ``key = value`` lines), then built-in default.  The
effective configuration is echoed as ``#`` comment lines at the top of every
output, so a result file records how it was produced.  Outputs contain no
timestamps: rerunning a command with the same inputs gives identical bytes.

Exit codes: 0 success, 2 protocol abort (no key under the requested
conditions), 3 input error, 4 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import io
import math
import re
import sys

from . import expdata, rates, report
from .errors import (
    CountTableError,
    DegenerateGainError,
    NumericalDegeneracyError,
    ParameterError,
    ProtocolAbortError,
    QssError,
)
from .finitekey import (
    EpsilonBudget,
    azuma_deviation,
    expected_to_observed,
    kato_coeffs_numeric,
    kato_lower_coeffs,
    kato_upper_coeffs,
    observed_to_expected,
)
from .optics import ChannelModel, SourceParams
from .protocol import SetThresholds, run_protocol

EXIT_OK = 0
EXIT_ABORT = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4

DEFAULTS = {
    "alpha": 0.167,        # fiber attenuation, dB/km
    "eta_d": 0.4,          # detector efficiency
    "dark": 2e-8,          # dark count probability per gate
    "ed": 0.015,           # misalignment
    "fe": 1.16,            # error correction efficiency
    "eps_c": 1e-10,
    "eps_pa": 1e-10,
    "eps_a": 1e-10,
    "eps_b": 1e-10,
    "mu": 9e-4,
    "px": 0.9,
}


class _Parser(argparse.ArgumentParser):
    """argparse variant that reports usage problems with exit code 3."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _float_or_inf(text: str) -> float:
    if text.strip().lower() in ("inf", "infinite", "asymptotic"):
        return math.inf
    return float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="triqss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key = value config file")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--mu", type=float, help="pulse intensity per player")
        p.add_argument("--px", type=float, help="X basis probability")
        p.add_argument("--loss-db", type=float, dest="loss_db",
                       help="total player-to-player loss in dB (overrides --length-km)")
        p.add_argument("--length-km", type=float, dest="length_km", help="fiber length in km")
        p.add_argument("--alpha", type=float, help="attenuation in dB/km")
        p.add_argument("--eta-d", type=float, dest="eta_d", help="detector efficiency")
        p.add_argument("--dark", type=float, help="dark count probability per gate")
        p.add_argument("--ed", type=float, help="misalignment probability")
        p.add_argument("--fe", type=float, help="error correction efficiency")
        for eps in ("eps_c", "eps_pa", "eps_a", "eps_b"):
            p.add_argument(f"--{eps.replace('_', '-')}", type=float, dest=eps)

    p_sim = sub.add_parser("simulate", help="simulate protocol rounds")
    add_common(p_sim)
    p_sim.add_argument("--seed", type=int, help="master seed (required)")
    p_sim.add_argument("--rounds", type=float, help="simulate exactly this many rounds")
    p_sim.add_argument("--nx", type=int, help="X-set detection threshold")
    p_sim.add_argument("--nybc", type=int, help="YBC-set detection threshold")
    p_sim.add_argument("--nyac", type=int, help="YAC-set detection threshold")
    p_sim.add_argument("--max-rounds", type=float, dest="max_rounds",
                       help="round cap in threshold mode")
    p_sim.add_argument("--trace", help="write a per-round trace CSV to this path")

    p_sweep = sub.add_parser("sweep", help="optimized key rate versus distance")
    add_common(p_sweep)
    p_sweep.add_argument("--N", type=_float_or_inf, dest="n_pulses",
                         help="total pulses, or 'inf' for the asymptotic curve")
    p_sweep.add_argument("--Lmin", type=float, dest="lmin", help="start distance, km")
    p_sweep.add_argument("--Lmax", type=float, dest="lmax", help="end distance, km")
    p_sweep.add_argument("--step", type=float, help="distance step, km")

    p_an = sub.add_parser("analyze", help="analyze measured count tables")
    add_common(p_an)
    p_an.add_argument("tables", nargs="+", help="count table CSV paths")
    p_an.add_argument("--N", type=float, dest="n_pulses", help="total emitted pulses")
    p_an.add_argument("--rep-rate", type=float, dest="rep_rate",
                      help="pulse rate in Hz for bits-per-second conversion")
    p_an.add_argument("--analytic-gain", action="store_true", dest="analytic_gain",
                      help="use the model gain for the coin imbalance "
                           "instead of the observed sifted gain")

    p_kato = sub.add_parser("kato", help="inspect one concentration bound")
    add_common(p_kato)
    p_kato.add_argument("--k", type=float, required=True, help="number of trials")
    p_kato.add_argument("--lam", type=float, required=True, help="observed sum")
    p_kato.add_argument("--eps", type=float, help="failure probability (default 1e-10)")
    p_kato.add_argument("--dir", choices=("upper", "lower"), dest="direction",
                        help="bound direction (default: upper)")
    return parser


class Settings:
    """Effective configuration after flag > config > default resolution."""

    def __init__(self, ns: argparse.Namespace):
        self._ns = ns
        self._config = {}
        if getattr(ns, "config", None):
            with open(ns.config) as fh:
                self._config = report.parse_kv(fh.read())
        self.effective: dict = {}

    def flag_or_config(self, name: str, conv=float):
        """Flag > config lookup with no default and no effective-echo entry."""
        value = getattr(self._ns, name, None)
        if value is None and name in self._config:
            raw = self._config[name]
            value = conv(raw) if conv is not None else raw
        return value

    def get(self, name: str, conv=float, default=None):
        value = self.flag_or_config(name, conv)
        if value is None:
            value = DEFAULTS.get(name, default)
        self.effective[name] = value
        return value

    def channel(self) -> ChannelModel:
        alpha = self.get("alpha")
        loss_db = self.get("loss_db", float, None)
        if loss_db is not None:
            length = loss_db / alpha
            self.effective["length_km"] = length
        else:
            length = self.get("length_km", float, 0.0)
        return ChannelModel(
            alpha_db_per_km=alpha,
            length_km=length,
            det_efficiency=self.get("eta_d"),
            dark_count=self.get("dark"),
            misalignment=self.get("ed"),
        )

    def budget(self) -> EpsilonBudget:
        return EpsilonBudget(
            eps_c=self.get("eps_c"),
            eps_pa=self.get("eps_pa"),
            eps_a=self.get("eps_a"),
            eps_b=self.get("eps_b"),
        )


def _emit(ns: argparse.Namespace, text: str) -> None:
    if getattr(ns, "out", None):
        with open(ns.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _header(command: str, settings: Settings) -> str:
    lines = [f"# triqss {command}"]
    for key, value in settings.effective.items():
        if value is not None:
            lines.append(f"# config.{key} = {report.fmt_value(value)}")
    return "\n".join(lines) + "\n"


def cmd_simulate(ns: argparse.Namespace) -> int:
    settings = Settings(ns)
    source = SourceParams(intensity=settings.get("mu"), px=settings.get("px"))
    channel = settings.channel()
    seed = settings.get("seed", int, None)
    if seed is None:
        raise ParameterError("simulate is stochastic: --seed is required")
    rounds = settings.get("rounds", float, None)
    nx = settings.get("nx", int, None)
    nybc = settings.get("nybc", int, None)
    nyac = settings.get("nyac", int, None)
    max_rounds = settings.get("max_rounds", float, None)
    trace = settings.get("trace", str, None)

    thresholds = None
    if nx is not None or nybc is not None or nyac is not None:
        if None in (nx, nybc, nyac):
            raise ParameterError("threshold mode needs all of --nx, --nybc, --nyac")
        thresholds = SetThresholds(n_x=nx, n_ybc=nybc, n_yac=nyac)
    elif rounds is None:
        raise ParameterError("give --rounds or all of --nx, --nybc, --nyac")

    abort_exc = None
    try:
        run = run_protocol(
            source, channel, seed=int(seed),
            thresholds=thresholds,
            max_rounds=int(rounds) if rounds is not None else (
                int(max_rounds) if max_rounds is not None else None),
            trace_path=trace,
        )
    except ProtocolAbortError as exc:
        if exc.partial is None:
            raise
        run, abort_exc = exc.partial, exc

    t = run.tallies
    body = {
        "rounds_used": t.rounds,
        "n_x": t.n_x, "m_x": t.m_x,
        "n_ybc": t.n_ybc, "m_ybc": t.m_ybc,
        "n_yac": t.n_yac, "m_yac": t.m_yac,
        "n_y": t.n_y,
        "key_bits": int(run.key_a.size),
        "abort": abort_exc is not None,
    }
    if t.n_x:
        body["eb_x_observed"] = t.m_x / t.n_x
    if t.n_ybc:
        body["eb_ybc_observed"] = t.m_ybc / t.n_ybc
    if t.n_yac:
        body["eb_yac_observed"] = t.m_yac / t.n_yac
    _emit(ns, _header("simulate", settings) + report.render_kv(body))
    if abort_exc is not None:
        print(f"abort: {abort_exc}", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def cmd_sweep(ns: argparse.Namespace) -> int:
    settings = Settings(ns)
    channel = settings.channel()
    budget = settings.budget()
    fe = settings.get("fe")
    n_pulses = settings.get("n_pulses", _float_or_inf, 1e10)
    lmin = settings.get("lmin", float, 0.0)
    lmax = settings.get("lmax", float, 260.0)
    step = settings.get("step", float, 5.0)
    if step <= 0 or lmax < lmin:
        raise ParameterError("need step > 0 and Lmax >= Lmin")

    lengths = [lmin + i * step for i in range(int((lmax - lmin) / step) + 1)]
    if math.isinf(n_pulses):
        points = rates.asymptotic_sweep(lengths, channel, fe)
    else:
        points = rates.sweep_distance(lengths, n_pulses, channel, fe, budget)

    buf = io.StringIO()
    buf.write(_header("sweep", settings))
    rates.write_rate_csv(points, buf)
    _emit(ns, buf.getvalue())
    return EXIT_OK


_MU_IN_NAME = re.compile(r"mu([0-9]+(?:\.[0-9]+)?e-?[0-9]+|[0-9.]+)", re.IGNORECASE)
_PX_BY_TABLE = {"a": 0.9, "b": 0.8, "c": 0.7}
_TABLE_IN_NAME = re.compile(r"tableIII([abc])", re.IGNORECASE)


def _infer_from_name(path: str) -> tuple:
    """Best-effort (mu, px) from fixture-style file names; None when absent."""
    mu = px = None
    m = _MU_IN_NAME.search(path)
    if m:
        try:
            mu = float(m.group(1))
        except ValueError:
            mu = None
    m = _TABLE_IN_NAME.search(path)
    if m:
        px = _PX_BY_TABLE[m.group(1).lower()]
    return mu, px


def cmd_analyze(ns: argparse.Namespace) -> int:
    settings = Settings(ns)
    budget = settings.budget()
    fe = settings.get("fe")
    n_pulses = settings.get("n_pulses", float, 5e10)
    rep_rate = settings.get("rep_rate", float, 1e8)
    analytic = bool(getattr(ns, "analytic_gain", False))
    settings.effective["gain_mode"] = "analytic" if analytic else "observed"
    channel = settings.channel() if analytic else None

    results = []
    for path in ns.tables:
        # mu/px: explicit flag or config wins, else inferred from the file
        # name; the global defaults are NOT applied here because silently
        # rating a table at the wrong intensity would be worse than failing.
        mu_name, px_name = _infer_from_name(path)
        mu = settings.flag_or_config("mu")
        px = settings.flag_or_config("px")
        mu = mu if mu is not None else mu_name
        px = px if px is not None else px_name
        if mu is None or px is None:
            raise ParameterError(
                f"{path}: cannot infer mu/px from the file name; pass --mu and --px"
            )
        summary = expdata.tally_sets(expdata.parse_counts(path), mu=mu, px=px)
        result = expdata.experiment_skr(
            summary, n_pulses, budget,
            ec_efficiency=fe,
            gain_mode="analytic" if analytic else "observed",
            channel=channel,
            rep_rate_hz=rep_rate,
        )
        results.append((path, summary, result))

    out = [_header("analyze", settings)]
    out.append("# n_pulses counts every emitted pulse\n")
    if len(results) == 1:
        path, summary, result = results[0]
        body = {"table": path}
        body.update(summary.as_report())
        body.update(result.as_report())
        out.append(report.render_kv(body))
    else:
        # summary table, one row per input, ordered by px then mu descending
        results.sort(key=lambda r: (-(r[1].px or 0), -(r[1].mu or 0)))
        out.append("px,mu,EbX_pct,EbY_pct,Ep_pct,n_x,n_y,skr_per_pulse,skr_per_s\n")
        for path, summary, result in results:
            row = [
                report.fmt_value(summary.px), report.fmt_value(summary.mu),
                f"{100.0 * summary.eb_x:.2f}", f"{100.0 * summary.eb_y_worst:.2f}",
                f"{100.0 * result.ep_bar:.2f}",
                str(summary.n_x), str(summary.n_y),
                report.fmt_value(result.rate_per_pulse),
                report.fmt_value(result.rate_per_second),
            ]
            out.append(",".join(row) + "\n")
    _emit(ns, "".join(out))
    if any(result.abort for _, _, result in results):
        return EXIT_ABORT
    return EXIT_OK


def cmd_kato(ns: argparse.Namespace) -> int:
    settings = Settings(ns)
    k = settings.get("k", float, None)
    lam = settings.get("lam", float, None)
    eps = settings.get("eps", float, 1e-10)
    direction = settings.get("direction", str, "upper")

    closed = (kato_upper_coeffs if direction == "upper" else kato_lower_coeffs)(lam, k, eps)
    numeric = kato_coeffs_numeric(lam, k, eps, direction)
    body = {
        "direction": direction,
        "k": k, "lam": lam, "eps": eps,
        "a": closed.a, "b": closed.b,
        "deviation": closed.deviation,
        "bound": observed_to_expected(lam, k, eps, direction),
        "numeric_a": numeric.a,
        "numeric_deviation": numeric.deviation,
        "closed_numeric_rel_diff": abs(closed.deviation - numeric.deviation)
        / max(abs(numeric.deviation), 1e-300),
        "zero_coeff_deviation": expected_to_observed(lam, k, eps, "upper") - lam,
        "azuma_deviation": azuma_deviation(k, eps),
    }
    _emit(ns, _header("kato", settings) + report.render_kv(body))
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "analyze": cmd_analyze,
    "kato": cmd_kato,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return _COMMANDS[ns.command](ns)
    except (NumericalDegeneracyError, DegenerateGainError) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ProtocolAbortError as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return EXIT_ABORT
    except (CountTableError, ParameterError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except QssError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
