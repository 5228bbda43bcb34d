"""Age of information for multi-source status updates through an energy-harvesting sensor."""

__version__ = "0.1.0"

from .analytic import (
    AoiValue,
    cdf_delta,
    cdf_delta_oracle,
    epoch_moments,
    maf_aoi,
    mean_delta,
    mean_w,
    mean_w_sq,
    percentage_gain,
    single_source_aoi,
    symmetric_maf_aoi,
)
from .core import (
    EpochMoments,
    SimReport,
    SweepRow,
    SystemParams,
    ThresholdPolicy,
    validate_params,
)
from .optimize import OptResult, optimize_threshold, sweep_n, sweep_q
from .sim import SimConfig, empirical_cdf, run_epoch_sim, run_event_sim
