"""Toeplitz space-time block codes for MISO links.

Encoding, correlated Rayleigh channels, linear and ML receivers, error
probability analytics, transmission-matrix design and Monte Carlo sweeps.
"""

from .analytics import (
    ConstantEstimate,
    ToeplitzFamily,
    avg_sep_bound,
    diversity_prediction,
    diversity_slope_estimate,
    estimate_constants,
    pep_chernoff,
    pep_exact,
    sep_upper_bound,
    sep_zf,
    sep_zf_qam_angular,
)
from .channel import ChannelModel, block_snr, correlation_broadside, transmit
from .design import (
    BeamformerDesign,
    BeamformerDesigner,
    g_objective,
    identity_beamformer,
    optimize_exact,
    optimize_waterfill,
)
from .detect import (
    DetectionProblem,
    MLDetector,
    MMSEDetector,
    ZFDetector,
    ZFDFEDetector,
    ml_detect_exhaustive,
    ml_detect_viterbi,
    mmse_detect,
    zf_detect,
    zf_dfe_detect,
)
from .exceptions import (
    CapacityError,
    ConfigError,
    ConvergenceError,
    NumericalError,
    SingularChannelError,
    StbcError,
)
from .modulation import Constellation, SymbolMapper, demodulate, make_constellation, modulate
from .sim import CurveRecord, ExperimentConfig, emit_csv, parse_config, preset, run_experiment, serialize_config
from .stbc import ToeplitzCode, ToeplitzEncoder, encode, equivalent_channel, toeplitz_matrix

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
