"""Nonasymptotic rate bounds for noncoherent MIMO Rayleigh block fading.

Lower (dependency-testing) and upper (meta-converse) bounds on the maximal
coding rate under unitary space-time inputs, with outage-capacity and
diversity-scheme baselines and a sweep CLI over the coherence interval.
"""

from .baselines import (
    DmtCurve,
    OutageCurve,
    alamouti_rate_sample,
    dmt_curve,
    ergodic_reference,
    fstd_rate_sample,
    mutual_info_sample,
    outage_capacity,
    outage_probability,
)
from .bounds import (
    MonteCarloEstimate,
    RateBoundResult,
    ResampleBudgetError,
    SampleBank,
    build_bank,
    dt_error_prob,
    dt_max_rate,
    mc_gamma,
    mc_tail_prob,
    mc_upper_rate,
)
from .cli import RatePoint, SweepSpec, parse_config, run_sweep, write_csv
from .matkit import (
    RngStream,
    hermitian_eigenvalues,
    log_multivariate_gamma,
    log_regularized_lower_incomplete_gamma,
    regularized_lower_incomplete_gamma,
    sample_isotropic_unitary,
    sample_standard_complex_gaussian,
    singular_values,
)
from .ustm import (
    DegenerateSpectrumError,
    DensityParams,
    NonPositiveDensityError,
    a_matrix_entry,
    c_const,
    d_matrix_diagonal,
    log_channel_pdf,
    log_f,
    log_output_pdf,
    sample_K,
    sample_S,
)

__version__ = "0.1.0"
