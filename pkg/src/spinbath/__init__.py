"""spinbath: dipolar spin-bath decoherence simulation and analysis.

The pipeline runs lattice placement -> dipolar couplings -> pair
flip-flop dynamics per random bath realization, aggregates realizations
into ensemble distributions, and produces free-induction and spin-echo
decay curves with their concentration scalings.
"""

__version__ = "0.1.0"

from .analysis import (SamplePoint, ScalingFit, StretchedExpFit,
                       extract_envelope, fit_scaling, fit_stretched_exp,
                       normalize_basis, read_sample_csv, write_sample_csv)
from .bath_dynamics import (DEFAULT_EXCLUSION_FRACTION, HYPERFINE_PARALLEL,
                            HYPERFINE_PERP, BathRealizationSummary,
                            OracleRate, PseudoSpinPair, bath_dephasing_rate,
                            correlation_time, flip_flop_rate,
                            flip_flop_rate_oracle, hyperfine_shift,
                            pair_detuning, pseudo_spin_pair)
from .decoherence import (DecayCurve, OuNoiseModel, PulseSequence, chi,
                          chi_short_time, filter_function, ou_monte_carlo,
                          single_nv_signal)
from .dipolar import (CONVENTIONS, DEFAULT_CONVENTION, NvCouplingSummary,
                      PairCoupling, coupling_coefficients, mean_abs_coupling,
                      nv_bath_coupling, pair_coupling_matrices)
from .ensemble import (ConcentrationSweepResult, EnsembleDecayParams,
                       EnsembleStatistics, cdf_delta, cdf_tau_c,
                       ensemble_echo, ensemble_fid, fit_delta_distribution,
                       fit_distributions, fit_tau_histogram, fit_tau_median,
                       fit_tau_mle, pdf_delta, pdf_tau_c, sample_delta,
                       sample_tau_c, sweep_concentration)
from .errors import (DataFormatError, DegenerateConfigurationError,
                     EnvelopeFailureError, FitFailureError,
                     IntegrationFailureError, SpinBathError)
from .lattice import (DEFAULT_CONSTANTS, BathConfiguration, BathSpin,
                      PhysicalConstants, box_half_width_for_target,
                      crystal_axes, generate_bath, ppm_to_number_density)

__all__ = [
    "__version__",
    "BathConfiguration", "BathRealizationSummary", "BathSpin",
    "ConcentrationSweepResult", "CONVENTIONS", "DataFormatError",
    "DecayCurve", "DEFAULT_CONSTANTS", "DEFAULT_CONVENTION",
    "DEFAULT_EXCLUSION_FRACTION", "DegenerateConfigurationError",
    "EnsembleDecayParams", "EnsembleStatistics", "EnvelopeFailureError",
    "FitFailureError", "HYPERFINE_PARALLEL", "HYPERFINE_PERP",
    "IntegrationFailureError", "NvCouplingSummary", "OracleRate",
    "OuNoiseModel", "PairCoupling", "PhysicalConstants", "PseudoSpinPair",
    "PulseSequence", "SamplePoint", "ScalingFit", "SpinBathError",
    "StretchedExpFit", "bath_dephasing_rate", "box_half_width_for_target",
    "cdf_delta", "cdf_tau_c", "chi", "chi_short_time", "correlation_time",
    "coupling_coefficients", "crystal_axes", "ensemble_echo", "ensemble_fid",
    "extract_envelope", "filter_function", "fit_delta_distribution",
    "fit_distributions", "fit_scaling", "fit_stretched_exp",
    "fit_tau_histogram", "fit_tau_median", "fit_tau_mle", "flip_flop_rate",
    "flip_flop_rate_oracle",
    "generate_bath", "hyperfine_shift", "mean_abs_coupling",
    "normalize_basis", "nv_bath_coupling", "ou_monte_carlo",
    "pair_coupling_matrices", "pair_detuning", "pdf_delta", "pdf_tau_c",
    "ppm_to_number_density", "pseudo_spin_pair", "read_sample_csv",
    "sample_delta", "sample_tau_c", "single_nv_signal",
    "sweep_concentration", "write_sample_csv",
]
