"""Spatial linear processes on Z^d over inflated sampling regions.

Tools to compute the region-windowed coefficient sums theta_n(i), their
variance sigma_n^2, the limiting variances of the PSD / SRD / ND regimes,
and Monte Carlo normality diagnostics for the standardized sum.
"""

__version__ = "0.1.0"

from .geometry import (
    RegionPrototype,
    InflatedRegion,
    SiteSet,
    BoundaryClassification,
    cube,
    ball,
    ellipsoid,
    polar_star,
    enumerate_sites,
    classify_sites,
    enlargement_measure,
)
from .coefficients import (
    CoefficientModel,
    DependenceClass,
    delta_model,
    isotropic_model,
    anisotropic_orthant_model,
    directional_cones_model,
    separable_nd_model,
    table_model,
    classify,
    total_sum,
    regular_variation_diagnostic,
)
from .theta import (
    ThetaField,
    VarianceDecomposition,
    theta_direct,
    theta_fft,
    sigma_sq,
    lindeberg_ratio,
    variance_decompose,
)
from .limits import (
    LimitVariance,
    G_infty_at,
    G_dagger_at,
    limit_variance_psd,
    limit_variance_nd,
    limit_variance_srd,
    sigma_EE_extrapolate,
    example42_sigma0,
    critical_combined_variance,
)
from .montecarlo import (
    InnovationSpec,
    CltReport,
    INNOVATIONS,
    simulate_sum,
    sample_sums,
    normality_test,
    growth_regression,
    regime_experiment,
)
from .config import RunConfig, parse_config, ConfigError

__all__ = [name for name in dir() if not name.startswith("_")]
