"""One-bit massive MIMO uplink: detection, channel estimation, analysis.

The receive chain quantizes each real and imaginary sample to a single
bit.  This package implements the matching multiuser detectors
(exhaustive ML, one- and two-stage near-ML via projected gradient
ascent, a ZF baseline), training-based channel estimators, closed-form
receiver statistics with Monte-Carlo checks, and a reproducible
experiment harness with a CLI.

Hot kernels run on a compiled extension when it was built, with a pure
NumPy fallback otherwise; ``BACKEND`` says which one is active and the
``ONEBIT_MIMO_BACKEND`` environment variable forces a choice.
"""

from ._backend import BACKEND
from .analysis import (
    CollisionSpec,
    collision_probability_closed_form,
    collision_probability_monte_carlo,
    lemma1_norm_check,
    sign_agreement_monte_carlo,
    sign_agreement_probability,
)
from .chanest import (
    ChannelEstimate,
    TrainingBlock,
    estimate_ml,
    estimate_zf,
    make_unitary_training,
    mse,
    nmse,
    observe_training,
    training_real_rows,
)
from .detectors import (
    DegenerateEstimateError,
    DetectorOutput,
    ENUMERATION_CAP,
    NmlConfig,
    SearchSpaceTooLargeError,
    SingularChannelError,
    build_candidate_set,
    detect_ml_exhaustive,
    detect_nml_one_stage,
    detect_nml_two_stage,
    detect_zf,
    log_likelihood,
)
from .model import (
    Constellation,
    draw_rayleigh_channel,
    draw_symbols,
    expand_real,
    indices_to_symbols,
    make_constellation,
    nearest_symbol,
    nearest_symbols,
    one_bit_quantize,
    real_stack,
    sgn,
    sign_refine,
    transmit,
)
from .numerics import (
    RngStream,
    draw_std_complex_gaussian,
    log_norm_cdf,
    norm_hazard,
)
from .pga import PgaResult, solve as pga_solve
from .sim import (
    ChanestSweepConfig,
    CsiModel,
    MulticellConfig,
    MulticellDrop,
    SweepConfig,
    SweepResult,
    apply_csi_model,
    drop_users,
    hex_centers,
    multicell_sinr,
    run_chanest_sweep,
    run_multicell_sweep,
    run_ser_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BACKEND",
    "RngStream",
    "log_norm_cdf",
    "norm_hazard",
    "draw_std_complex_gaussian",
    "Constellation",
    "make_constellation",
    "draw_rayleigh_channel",
    "draw_symbols",
    "sgn",
    "one_bit_quantize",
    "transmit",
    "expand_real",
    "sign_refine",
    "nearest_symbol",
    "nearest_symbols",
    "indices_to_symbols",
    "real_stack",
    "NmlConfig",
    "DetectorOutput",
    "ENUMERATION_CAP",
    "SearchSpaceTooLargeError",
    "SingularChannelError",
    "DegenerateEstimateError",
    "log_likelihood",
    "detect_ml_exhaustive",
    "detect_zf",
    "detect_nml_one_stage",
    "detect_nml_two_stage",
    "build_candidate_set",
    "PgaResult",
    "pga_solve",
    "TrainingBlock",
    "ChannelEstimate",
    "make_unitary_training",
    "training_real_rows",
    "observe_training",
    "estimate_ml",
    "estimate_zf",
    "mse",
    "nmse",
    "CollisionSpec",
    "collision_probability_closed_form",
    "collision_probability_monte_carlo",
    "sign_agreement_probability",
    "sign_agreement_monte_carlo",
    "lemma1_norm_check",
    "CsiModel",
    "SweepConfig",
    "ChanestSweepConfig",
    "MulticellConfig",
    "MulticellDrop",
    "SweepResult",
    "apply_csi_model",
    "run_ser_sweep",
    "run_chanest_sweep",
    "hex_centers",
    "drop_users",
    "multicell_sinr",
    "run_multicell_sweep",
]
