"""ICA under perturbed and approximately isometric mixings."""

from .experiments import (
    DimScalingConfig,
    EtaScalingConfig,
    IsoIcaConfig,
    ScalingReport,
    fit_loglog_slope,
    run_dim_scaling,
    run_eta_scaling,
    run_iso_ica,
)
from .ica import get_contrast, reference_wbar, reference_wtilde, run_ica
from .linalg_so import dist_to_so, project_to_so
from .metrics import mcc, verify_mcc_bound_general, verify_mcc_bound_independent
from .model import MixingModel, SourceSpec, estimate_theta, mix, sample_sources
from .whiten import apply_whitener, fit_whitener

__version__ = "0.1.0"
