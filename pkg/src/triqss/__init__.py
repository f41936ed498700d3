"""Three-player phase-encoded quantum secret sharing: simulation and security analysis.

Two players imprint random phases on attenuated laser pulses travelling
around a loop; a dealer's basis phase and a beam splitter turn matched
settings into correlated bits.  This package simulates that loop at the
pulse level, evaluates asymptotic and finite-size secure key rates with
concentration bounds that exploit the basis-choice bias, optimizes the
source settings, and turns measured detector-count tables into key rates.
"""

from .errors import (
    AllAbortError,
    CountTableError,
    DegenerateGainError,
    NumericalDegeneracyError,
    ParameterError,
    ProtocolAbortError,
    QssError,
    ZeroCountError,
)
from .expdata import (
    CountRow,
    ExperimentSummary,
    classify_row,
    experiment_skr,
    observed_sifted_gain,
    parse_counts,
    render_counts,
    tally_sets,
)
from .finitekey import (
    EpsilonBudget,
    KatoCoefficients,
    KeyRateReport,
    PhaseErrorBound,
    azuma_deviation,
    expected_to_observed,
    kato_coeffs_numeric,
    kato_failure_probability,
    kato_lower_coeffs,
    kato_upper_coeffs,
    key_length,
    key_length_raw,
    observed_to_expected,
    phase_error_upper_bound,
)
from .optics import (
    ChannelModel,
    SourceParams,
    basis_overlap,
    binary_entropy,
    bit_error_x,
    coin_imbalance,
    gain,
    phase_error_from_y,
    phase_error_terms,
    transmittance,
)
from .protocol import (
    Basis,
    Outcome,
    ProtocolRun,
    RoundRecord,
    SetTag,
    SetThresholds,
    SiftedTallies,
    apply_yac_flip,
    click_probabilities,
    dealer_phase,
    encode_player_phase,
    run_protocol,
    simulate_round,
    verify_correlation,
)
from .rates import (
    OptimizationResult,
    RatePoint,
    asymptotic_rate,
    asymptotic_sweep,
    finite_rate,
    golden_max,
    optimize_params,
    sweep_distance,
    write_rate_csv,
)

__version__ = "0.1.0"

__all__ = [
    "AllAbortError",
    "Basis",
    "ChannelModel",
    "CountRow",
    "CountTableError",
    "DegenerateGainError",
    "EpsilonBudget",
    "ExperimentSummary",
    "KatoCoefficients",
    "KeyRateReport",
    "NumericalDegeneracyError",
    "OptimizationResult",
    "Outcome",
    "ParameterError",
    "PhaseErrorBound",
    "ProtocolAbortError",
    "ProtocolRun",
    "QssError",
    "RatePoint",
    "RoundRecord",
    "SetTag",
    "SetThresholds",
    "SiftedTallies",
    "SourceParams",
    "ZeroCountError",
    "apply_yac_flip",
    "asymptotic_rate",
    "asymptotic_sweep",
    "azuma_deviation",
    "basis_overlap",
    "binary_entropy",
    "bit_error_x",
    "classify_row",
    "click_probabilities",
    "coin_imbalance",
    "dealer_phase",
    "encode_player_phase",
    "expected_to_observed",
    "experiment_skr",
    "finite_rate",
    "gain",
    "golden_max",
    "kato_coeffs_numeric",
    "kato_failure_probability",
    "kato_lower_coeffs",
    "kato_upper_coeffs",
    "key_length",
    "key_length_raw",
    "observed_sifted_gain",
    "observed_to_expected",
    "optimize_params",
    "parse_counts",
    "phase_error_from_y",
    "phase_error_terms",
    "phase_error_upper_bound",
    "render_counts",
    "run_protocol",
    "simulate_round",
    "sweep_distance",
    "tally_sets",
    "transmittance",
    "verify_correlation",
    "write_rate_csv",
]
