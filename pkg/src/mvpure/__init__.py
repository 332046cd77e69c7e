"""Reduced-rank (MV-PURE) spatial filters for source reconstruction from
sensor-array measurements, with a Monte-Carlo benchmark harness."""
from .filters import (FilterKind, SpatialFilter, Variant, apply_filter,
                      eigenspace_lcmv, lcmv, mmse, mvpure_free, mvpure_int,
                      mvpure_patch, nulling, nulling_patch, select_rank,
                      zero_forcing)
from .model import (CovarianceModel, ForwardModel, estimate_Q_free,
                    estimate_Q_int, mse_free, mse_int, sample_covariance)

__version__ = "0.1.0"

__all__ = [
    "CovarianceModel", "FilterKind", "ForwardModel", "SpatialFilter", "Variant",
    "apply_filter", "eigenspace_lcmv", "estimate_Q_free", "estimate_Q_int",
    "lcmv", "mmse", "mse_free", "mse_int", "mvpure_free", "mvpure_int",
    "mvpure_patch", "nulling", "nulling_patch", "sample_covariance",
    "select_rank", "zero_forcing",
]
