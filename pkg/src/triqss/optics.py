"""Pulse-level optical model of the two-arm interference measurement.

Both players send phase-encoded weak coherent pulses of intensity ``mu``
through symmetric fiber arms to the dealer, who interferes them on a beam
splitter monitored by two single-photon detectors.  The functions here give
the per-round detection gain, the X-basis bit error rate, and the quantities
entering the phase-error estimate: the overlap between the two basis state
families and the resulting imbalance of the virtual basis-choice coin.

All formulas treat detector dark counts as independent per-detector events
and fold misalignment in as a probability ``e_d`` that a single click lands
in the wrong detector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DegenerateGainError, ParameterError

__all__ = [
    "ChannelModel",
    "SourceParams",
    "transmittance",
    "gain",
    "bit_error_x",
    "basis_overlap",
    "coin_imbalance",
    "phase_error_terms",
    "phase_error_from_y",
    "binary_entropy",
]


@dataclass(frozen=True)
class ChannelModel:
    """Symmetric channel and detector parameters.

    Attributes
    ----------
    alpha_db_per_km:
        Fiber attenuation in dB per km.
    length_km:
        Total fiber length between the two players; each player sits half
        this distance from the dealer.
    det_efficiency:
        Detector efficiency ``eta_d`` in (0, 1].
    dark_count:
        Dark count probability per detector per gate.
    misalignment:
        Probability ``e_d`` that a single click is registered by the wrong
        detector.
    """

    alpha_db_per_km: float = 0.167
    length_km: float = 0.0
    det_efficiency: float = 0.4
    dark_count: float = 2e-8
    misalignment: float = 0.015

    def __post_init__(self):
        if self.alpha_db_per_km < 0:
            raise ParameterError("attenuation must be nonnegative")
        if self.length_km < 0:
            raise ParameterError("fiber length must be nonnegative")
        if not 0 < self.det_efficiency <= 1:
            raise ParameterError("detector efficiency must be in (0, 1]")
        if not 0 <= self.dark_count < 1:
            raise ParameterError("dark count probability must be in [0, 1)")
        if not 0 <= self.misalignment <= 0.5:
            raise ParameterError("misalignment must be in [0, 0.5]")


@dataclass(frozen=True)
class SourceParams:
    """Per-player source settings: pulse intensity and X-basis probability."""

    intensity: float
    px: float

    def __post_init__(self):
        if self.intensity < 0:
            raise ParameterError("pulse intensity must be nonnegative")
        if not 0 < self.px < 1:
            raise ParameterError("X-basis probability must be in (0, 1)")

    @property
    def py(self) -> float:
        return 1.0 - self.px


def transmittance(channel: ChannelModel) -> float:
    """Single-arm transmittance including detector efficiency.

    Each arm spans half the player-to-player distance, so the arm loss in dB
    is ``alpha * L / 2`` and the transmittance seen by either pulse is
    ``eta_d * 10**(-alpha * L / 20)``.
    """
    return channel.det_efficiency * 10.0 ** (-channel.alpha_db_per_km * channel.length_km / 20.0)


def gain(mu: float, eta: float, dark: float) -> float:
    """Probability that exactly one detector clicks in a round.

    With ideal interference all signal photons reach one output port, whose
    total mean photon number is ``2 * mu * eta``.  Either detector can also
    fire from a dark count.

    Parameters
    ----------
    mu:
        Pulse intensity per player.
    eta:
        Single-arm transmittance, from :func:`transmittance`.
    dark:
        Dark count probability per detector per gate.
    """
    if mu < 0 or eta < 0 or not 0 <= dark < 1:
        raise ParameterError("gain arguments out of range")
    x = 2.0 * mu * eta
    # -expm1 keeps 1 - exp(-x) accurate when x is far below 1e-8
    return (1.0 - dark) * (-math.expm1(-x) + 2.0 * dark * math.exp(-x))


def bit_error_x(mu: float, eta: float, dark: float, misalignment: float) -> float:
    """X-basis bit error rate conditioned on a single click.

    Combines misaligned signal clicks with dark counts landing in the wrong
    detector.  In the dark-count-free limit this tends to the misalignment
    probability itself.
    """
    if not 0 <= misalignment <= 0.5:
        raise ParameterError("misalignment must be in [0, 0.5]")
    q = gain(mu, eta, dark)
    if q <= 0.0:
        raise DegenerateGainError("zero detection gain: bit error rate undefined")
    x = 2.0 * mu * eta
    wrong = misalignment * (1.0 - dark) * (-math.expm1(-x) + dark * math.exp(-x))
    wrong += (1.0 - misalignment) * dark * (1.0 - dark) * math.exp(-x)
    return wrong / q


def basis_overlap(mu: float) -> float:
    """Inner product of the joint X-basis and Y-basis state families.

    For coherent encoding at intensity ``mu`` the overlap has the closed
    form ``exp(-mu) * (cos(mu) + sin(mu))``, which equals
    ``1 - mu**2 + (2/3) mu**3 - ...`` for small ``mu``.
    """
    if mu < 0:
        raise ParameterError("pulse intensity must be nonnegative")
    return math.exp(-mu) * (math.cos(mu) + math.sin(mu))


def coin_imbalance(mu: float, gain_value: float) -> float:
    """Imbalance of the virtual basis-choice coin, conditioned on a click.

    The imbalance ``delta = (1 - overlap) / (2 * gain)`` quantifies how far
    the detected rounds are from a fair basis coin.  The security argument
    requires ``delta <= 1/2``.
    """
    if gain_value <= 0.0:
        raise DegenerateGainError("zero detection gain: coin imbalance undefined")
    delta = (1.0 - basis_overlap(mu)) / (2.0 * gain_value)
    if delta > 0.5:
        raise ParameterError(
            f"coin imbalance {delta:.6g} exceeds 1/2; intensity too high for this gain"
        )
    return delta


def phase_error_terms(eb_y: float, delta: float) -> tuple[float, float, float]:
    """The three additive terms of the phase error bound, unclamped.

    Separated out so callers can detect when the sum exceeds one.
    """
    if not 0 <= eb_y <= 1:
        raise ParameterError("Y-basis error rate must be in [0, 1]")
    if not 0 <= delta <= 0.5:
        raise ParameterError("coin imbalance must be in [0, 1/2]")
    t1 = eb_y
    t2 = 4.0 * delta * (1.0 - delta) * (1.0 - 2.0 * eb_y)
    t3 = 4.0 * (1.0 - 2.0 * delta) * math.sqrt(delta * (1.0 - delta) * eb_y * (1.0 - eb_y))
    return t1, t2, t3


def phase_error_from_y(eb_y: float, delta: float) -> float:
    """X-basis phase error rate bound from the Y-basis error rate.

    Equals ``eb_y`` exactly when the coin is balanced (``delta == 0``) and
    grows with the imbalance.  The formula can exceed one for large inputs;
    the returned value is clamped to one since it bounds a probability.
    """
    return min(1.0, math.fsum(phase_error_terms(eb_y, delta)))


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy ``H(x)`` in bits, with ``H(0) = H(1) = 0``."""
    if not 0 <= x <= 1:
        raise ParameterError("entropy argument must be in [0, 1]")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)
