"""Finite-size security analysis: concentration bounds and key length.

The phase error rate of the sifted key cannot be observed directly.  It is
estimated from the Y-basis error counts through a chain of concentration
steps relating observed sums of (possibly correlated) indicator variables to
their conditional expectations:

1. the observed Y-basis error count is lifted to an upper bound on its
   expectation (coefficient-optimized bound, ``kato_upper_coeffs``),
2. the expected Y-basis error rate is mapped to an expected phase error
   rate through the basis-coin imbalance (``optics.phase_error_from_y``),
3. the expected phase error count in the key basis is pushed back to an
   observed count (zero-coefficient bound, ``expected_to_observed``).

Each step consumes failure probability from an :class:`EpsilonBudget`.  The
final key length applies privacy amplification and error-correction costs to
the X-basis detection count.

The coefficient-optimized bound states that for indicators ``xi_i`` with
partial sums ``L_k``, and any ``b >= |a|``,

    Pr[ sum E(xi_i | F_{i-1}) - L_k >= (b + a(2 L_k / k - 1)) sqrt(k) ]
        <= exp(-2 (b^2 - a^2) / (1 + 4a / (3 sqrt(k)))^2),

with a mirrored variant (``a -> -a`` in the denominator) bounding the other
tail.  For a target failure probability the optimal ``(a, b)`` minimizing
the deviation has a closed form, implemented here and cross-checkable
against a direct numerical minimization (``kato_coeffs_numeric``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NumericalDegeneracyError, ParameterError
from .optics import binary_entropy, coin_imbalance, phase_error_terms

__all__ = [
    "EpsilonBudget",
    "KatoCoefficients",
    "kato_upper_coeffs",
    "kato_lower_coeffs",
    "kato_coeffs_numeric",
    "kato_failure_probability",
    "observed_to_expected",
    "expected_to_observed",
    "azuma_deviation",
    "PhaseErrorBound",
    "phase_error_upper_bound",
    "key_length",
    "key_length_raw",
    "KeyRateReport",
]


@dataclass(frozen=True)
class EpsilonBudget:
    """Failure probabilities of the individual security steps.

    Attributes
    ----------
    eps_c:
        Correctness failure (hash comparison after error correction).
    eps_pa:
        Privacy amplification failure.
    eps_a:
        Failure of the observed-to-expected concentration step.
    eps_b:
        Failure of the expected-to-observed concentration step.
    """

    eps_c: float = 1e-10
    eps_pa: float = 1e-10
    eps_a: float = 1e-10
    eps_b: float = 1e-10

    def __post_init__(self):
        # each failure lives in the open interval; values near 1 are useless
        # for security but legitimate for limit checks, so no sum constraint
        for name in ("eps_c", "eps_pa", "eps_a", "eps_b"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterError(f"{name} must be in (0, 1)")

    @property
    def eps_phase(self) -> float:
        """Total failure probability of the phase error estimation chain."""
        return self.eps_a + self.eps_b

    @property
    def eps_secrecy(self) -> float:
        """Secrecy parameter: sqrt of the estimation failure plus eps_pa."""
        return math.sqrt(self.eps_phase) + self.eps_pa


@dataclass(frozen=True)
class KatoCoefficients:
    """Optimized coefficients for one tail at one observation point.

    ``deviation`` is the additive bound ``(b + a(2 lam / k - 1)) sqrt(k)``
    evaluated at the observed sum ``lam``; it is nonnegative for the
    minimizing solution because ``b >= |a|``.
    """

    a: float
    b: float
    deviation: float
    epsilon: float


def _validate_kato_args(lam: float, k: float, eps: float) -> None:
    if k <= 0:
        raise ParameterError("number of trials k must be positive")
    if not 0 <= lam <= k:
        raise ParameterError("observed sum must lie in [0, k]")
    if not 0.0 < eps < 1.0:
        raise ParameterError("failure probability must be in (0, 1)")


def _a_opt_upper(lam: float, k: float, t: float) -> float:
    """Closed-form minimizer of the upper-tail deviation; t = ln(eps) < 0."""
    sk = math.sqrt(k)
    inner = -(k * k) * t * (9.0 * lam * (k - lam) - 2.0 * k * t)
    if inner < 0.0:
        raise NumericalDegeneracyError("negative discriminant in coefficient formula")
    num = 3.0 * (
        72.0 * sk * lam * (k - lam) * t
        - 16.0 * k * sk * t * t
        + 9.0 * math.sqrt(2.0) * (k - 2.0 * lam) * math.sqrt(inner)
    )
    den = 4.0 * (9.0 * k - 8.0 * t) * (9.0 * lam * (k - lam) - 2.0 * k * t)
    return num / den


def _b_from_constraint(a: float, k: float, t: float, sign: float) -> float:
    """Solve the failure-probability equality for b; sign picks the tail."""
    arg = 18.0 * a * a * k - (16.0 * a * a + sign * 24.0 * a * math.sqrt(k) + 9.0 * k) * t
    if arg < 0.0:
        raise NumericalDegeneracyError("no real b solves the failure-probability constraint")
    return math.sqrt(arg) / (3.0 * math.sqrt(2.0 * k))


def kato_upper_coeffs(lam: float, k: float, eps: float) -> KatoCoefficients:
    """Optimal coefficients bounding the expectation from above.

    Parameters
    ----------
    lam:
        Observed sum of the indicator variables (may be fractional when used
        on expected counts).
    k:
        Number of trials.
    eps:
        Allowed failure probability of the bound.
    """
    _validate_kato_args(lam, k, eps)
    t = math.log(eps)
    a = _a_opt_upper(lam, k, t)
    b = _b_from_constraint(a, k, t, +1.0)
    dev = (b + a * (2.0 * lam / k - 1.0)) * math.sqrt(k)
    return KatoCoefficients(a=a, b=b, deviation=dev, epsilon=eps)


def kato_lower_coeffs(lam: float, k: float, eps: float) -> KatoCoefficients:
    """Optimal coefficients bounding the expectation from below.

    Mirror of the upper tail: replacing every indicator by its complement
    swaps the tails and maps ``(lam, a)`` to ``(k - lam, -a)``, so the
    minimizer is ``-a_upper(k - lam)`` with the sign-flipped constraint.
    """
    _validate_kato_args(lam, k, eps)
    t = math.log(eps)
    a = -_a_opt_upper(k - lam, k, t)
    b = _b_from_constraint(a, k, t, -1.0)
    dev = (b + a * (2.0 * lam / k - 1.0)) * math.sqrt(k)
    return KatoCoefficients(a=a, b=b, deviation=dev, epsilon=eps)


def kato_failure_probability(a: float, b: float, k: float, direction: str) -> float:
    """Failure probability of the stated bound for given coefficients."""
    if direction not in ("upper", "lower"):
        raise ParameterError("direction must be 'upper' or 'lower'")
    if b < abs(a):
        raise ParameterError("coefficients require b >= |a|")
    sign = 1.0 if direction == "upper" else -1.0
    denom = 1.0 + sign * 4.0 * a / (3.0 * math.sqrt(k))
    return math.exp(-2.0 * (b * b - a * a) / (denom * denom))


def kato_coeffs_numeric(lam: float, k: float, eps: float, direction: str) -> KatoCoefficients:
    """Reference minimizer, independent of the closed forms.

    Solves the same constrained problem by golden-section search on ``a``
    with ``b`` eliminated through the failure-probability equality.  The
    objective is convex (square root of an upward parabola plus a linear
    term), so the search bracket only needs to contain the minimum.  Slow;
    intended for self-checks.
    """
    _validate_kato_args(lam, k, eps)
    if direction not in ("upper", "lower"):
        raise ParameterError("direction must be 'upper' or 'lower'")
    t = math.log(eps)
    sign = 1.0 if direction == "upper" else -1.0
    c = 2.0 * lam / k - 1.0

    def objective(a: float) -> float:
        return _b_from_constraint(a, k, t, sign) + a * c

    lo, hi = -3.0 * math.sqrt(k), 3.0 * math.sqrt(k)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = hi - invphi * (hi - lo)
    x2 = lo + invphi * (hi - lo)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(220):
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - invphi * (hi - lo)
            f1 = objective(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + invphi * (hi - lo)
            f2 = objective(x2)
    a = 0.5 * (lo + hi)
    b = _b_from_constraint(a, k, t, sign)
    return KatoCoefficients(a=a, b=b, deviation=objective(a) * math.sqrt(k), epsilon=eps)


def observed_to_expected(lam: float, k: float, eps: float, direction: str) -> float:
    """Bound the expectation given an observed sum.

    ``direction='upper'`` returns ``lam + deviation``; ``'lower'`` returns
    ``max(lam - deviation, 0)`` since the expectation of nonnegative
    indicators cannot be negative.
    """
    if direction == "upper":
        return lam + kato_upper_coeffs(lam, k, eps).deviation
    if direction == "lower":
        return max(lam - kato_lower_coeffs(lam, k, eps).deviation, 0.0)
    raise ParameterError("direction must be 'upper' or 'lower'")


def expected_to_observed(lam_star: float, k: float, eps: float, direction: str) -> float:
    """Bound the observed sum given its expectation.

    The observed sum is unknown here, so the coefficient optimization is
    unavailable; the zero-``a`` bound gives a deviation of
    ``sqrt(k ln(1/eps) / 2)`` independent of the observation.
    """
    if k <= 0:
        raise ParameterError("number of trials k must be positive")
    if lam_star < 0:
        raise ParameterError("expected sum must be nonnegative")
    if not 0.0 < eps < 1.0:
        raise ParameterError("failure probability must be in (0, 1)")
    delta = math.sqrt(0.5 * k * math.log(1.0 / eps))
    if direction == "upper":
        return lam_star + delta
    if direction == "lower":
        return max(lam_star - delta, 0.0)
    raise ParameterError("direction must be 'upper' or 'lower'")


def azuma_deviation(k: float, eps: float) -> float:
    """Deviation of the classical martingale bound, for comparison.

    Always exactly twice the zero-coefficient deviation used in
    :func:`expected_to_observed`, which is why the optimized bound wins.
    """
    if k <= 0:
        raise ParameterError("number of trials k must be positive")
    if not 0.0 < eps < 1.0:
        raise ParameterError("failure probability must be in (0, 1)")
    return math.sqrt(2.0 * k * math.log(1.0 / eps))


@dataclass(frozen=True)
class PhaseErrorBound:
    """All intermediates of the phase error estimation chain for one Y set."""

    n_x: float
    n_y: float
    m_y: float
    m_y_expected: float
    eb_y_expected: float
    delta: float
    ep_expected: float
    m_p_expected: float
    m_p_observed: float
    ep_bar: float
    eps_a: float
    eps_b: float
    eby_clamped: bool = False
    ep_clamped: bool = False
    epbar_clamped: bool = False

    def as_report(self, prefix: str = "") -> dict:
        out = {}
        for name in (
            "n_x", "n_y", "m_y", "m_y_expected", "eb_y_expected", "delta",
            "ep_expected", "m_p_expected", "m_p_observed", "ep_bar",
            "eps_a", "eps_b", "eby_clamped", "ep_clamped", "epbar_clamped",
        ):
            out[prefix + name] = getattr(self, name)
        return out


def phase_error_upper_bound(
    n_x: float,
    n_y: float,
    m_y: float,
    mu: float,
    gain_value: float,
    budget: EpsilonBudget,
) -> PhaseErrorBound:
    """Upper-bound the key-basis phase error rate from one Y-set tally.

    Parameters
    ----------
    n_x, n_y:
        Detection counts in the key set and in the checked Y set.
    m_y:
        Error count in the checked Y set.
    mu:
        Pulse intensity, which sets the basis overlap.
    gain_value:
        Per-round detection gain used for the coin imbalance; either the
        analytic model value or an observed sifted gain.
    budget:
        Failure probabilities; consumes ``eps_a`` and ``eps_b``.
    """
    if n_x <= 0 or n_y <= 0:
        raise ParameterError("detection counts must be positive")
    if not 0 <= m_y <= n_y:
        raise ParameterError("error count must lie in [0, n_y]")

    m_y_expected = observed_to_expected(m_y, n_y, budget.eps_a, "upper")
    eby_clamped = m_y_expected > n_y
    eb_y_expected = min(m_y_expected / n_y, 1.0)

    delta = coin_imbalance(mu, gain_value)
    ep_raw = math.fsum(phase_error_terms(eb_y_expected, delta))
    ep_clamped = ep_raw > 1.0
    ep_expected = min(ep_raw, 1.0)

    m_p_expected = ep_expected * n_x
    m_p_observed = expected_to_observed(m_p_expected, n_x, budget.eps_b, "upper")
    epbar_clamped = m_p_observed > n_x
    ep_bar = min(m_p_observed / n_x, 1.0)

    return PhaseErrorBound(
        n_x=n_x, n_y=n_y, m_y=m_y,
        m_y_expected=m_y_expected, eb_y_expected=eb_y_expected, delta=delta,
        ep_expected=ep_expected, m_p_expected=m_p_expected,
        m_p_observed=m_p_observed, ep_bar=ep_bar,
        eps_a=budget.eps_a, eps_b=budget.eps_b,
        eby_clamped=eby_clamped, ep_clamped=ep_clamped, epbar_clamped=epbar_clamped,
    )


def key_length_raw(
    n_x: float,
    ep_bar: float,
    eb_x: float,
    ec_efficiency: float,
    budget: EpsilonBudget,
) -> float:
    """Real-valued extractable key length before flooring.

    ``n_x (1 - H(ep_bar)) - lambda_EC - log2(2 / eps_c) - log2(1 / (4 eps_pa^2))``
    with ``lambda_EC = n_x * f * H(eb_x)``.  May be negative.

    The privacy-amplification term treats any phase error rate at or above
    one half as total leakage.  The symmetric dip of H above 1/2 is an
    artifact of the entropy function, not recovered secrecy; without the cap
    the expression would grow again as ep_bar -> 1 and break monotonicity.
    """
    if n_x <= 0:
        raise ParameterError("key-set detection count must be positive")
    if ec_efficiency < 1.0:
        raise ParameterError("error-correction efficiency must be at least 1")
    lam_ec = n_x * ec_efficiency * binary_entropy(eb_x)
    return (
        n_x * (1.0 - binary_entropy(min(ep_bar, 0.5)))
        - lam_ec
        - math.log2(2.0 / budget.eps_c)
        - math.log2(1.0 / (4.0 * budget.eps_pa ** 2))
    )


def key_length(
    n_x: float,
    ep_bar: float,
    eb_x: float,
    ec_efficiency: float,
    budget: EpsilonBudget,
) -> int:
    """Secure key length in bits: floored and clamped at zero."""
    return max(0, math.floor(key_length_raw(n_x, ep_bar, eb_x, ec_efficiency, budget)))


@dataclass(frozen=True)
class KeyRateReport:
    """Result of one finite-size key rate evaluation."""

    n_pulses: float
    n_x: float
    eb_x: float
    ep_bar: float
    lambda_ec: float
    ell: int
    rate_per_pulse: float
    abort: bool
    rate_per_second: float | None = None
    phase: PhaseErrorBound | None = None
    budget: EpsilonBudget = field(default_factory=EpsilonBudget)

    def as_report(self) -> dict:
        out = {
            "n_pulses": self.n_pulses,
            "n_x": self.n_x,
            "eb_x": self.eb_x,
            "ep_bar": self.ep_bar,
            "lambda_ec": self.lambda_ec,
            "ell": self.ell,
            "rate_per_pulse": self.rate_per_pulse,
            "abort": self.abort,
        }
        if self.rate_per_second is not None:
            out["rate_per_second"] = self.rate_per_second
        if self.phase is not None:
            out.update(self.phase.as_report(prefix="phase."))
        out.update({
            "eps_c": self.budget.eps_c,
            "eps_pa": self.budget.eps_pa,
            "eps_a": self.budget.eps_a,
            "eps_b": self.budget.eps_b,
            "eps_phase": self.budget.eps_phase,
            "eps_secrecy": self.budget.eps_secrecy,
        })
        return out
