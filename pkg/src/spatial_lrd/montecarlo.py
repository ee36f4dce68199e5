"""Monte Carlo verification of the central limit behavior.

The centered region sum equals sum_i theta_n(i) eps(i) exactly, so replicates
are drawn by sampling the innovations on the theta window and contracting
against the field.  Replicate k uses an independent stream seeded by a
splitmix64 mix of (base_seed, k); identical inputs reproduce bit-identical
sample lists regardless of thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .coefficients import CoefficientModel, classify, total_sum
from .geometry import RegionPrototype, classify_sites, default_t_n, enumerate_sites
from .limits import (LimitVariance, example42_sigma0, limit_variance_nd,
                     limit_variance_psd, sigma_EE_extrapolate)
from .numerics import derive_stream_seed, kolmogorov_threshold
from .theta import ThetaField, lindeberg_ratio, sigma_sq, theta_fft, variance_decompose


class MonteCarloError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Innovations
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InnovationSpec:
    """A zero-mean unit-variance innovation law."""

    name: str

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.name == "gaussian":
            return rng.standard_normal(n)
        if self.name == "rademacher":
            return 2.0 * rng.integers(0, 2, size=n).astype(np.float64) - 1.0
        if self.name == "centered-exponential":
            return rng.standard_exponential(n) - 1.0
        if self.name == "shifted-uniform":
            return rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size=n)
        raise MonteCarloError(f"unknown innovation {self.name!r}")


INNOVATIONS = {
    name: InnovationSpec(name)
    for name in ("gaussian", "rademacher", "centered-exponential", "shifted-uniform")
}


# ---------------------------------------------------------------------------
# Replicates
# ---------------------------------------------------------------------------

_CHUNK = 1 << 20


def simulate_sum(theta: ThetaField, innovation: InnovationSpec, seed: int) -> float:
    """One draw of sum over the window of theta(i) eps(i), deterministic in seed.

    The part of the sum outside the window is not simulated; its standard
    deviation is bounded by sqrt(theta.tail_bound).
    """
    rng = np.random.Generator(np.random.PCG64(seed & ((1 << 64) - 1)))
    flat = theta.values.ravel()
    parts = []
    for lo in range(0, flat.size, _CHUNK):
        n = min(_CHUNK, flat.size - lo)
        eps = innovation.sample(rng, n)
        parts.append(float(np.sum(flat[lo:lo + n] * eps)))
    return math.fsum(parts)


def sample_sums(theta: ThetaField, innovation: InnovationSpec, replicates: int,
                base_seed: int) -> np.ndarray:
    """Independent replicates with per-replicate derived stream seeds."""
    if replicates < 1:
        raise MonteCarloError("need at least one replicate")
    out = np.empty(replicates)
    for k in range(replicates):
        out[k] = simulate_sum(theta, innovation, derive_stream_seed(base_seed, k))
    return out


# ---------------------------------------------------------------------------
# Normality diagnostics
# ---------------------------------------------------------------------------

@dataclass
class CltReport:
    """Kolmogorov-Smirnov and moment diagnostics for standardized sums."""

    replicate_count: int
    sample_mean: float
    sample_variance: float
    skewness: float
    excess_kurtosis: float
    ks_statistic: float
    ks_threshold: float
    passed: bool
    predicted_scale: float
    scale_provenance: str
    level: float = 0.01
    degenerate: bool = False
    tail_std_fraction: float = 0.0

    def to_json_dict(self) -> dict:
        return {
            "replicate_count": self.replicate_count,
            "sample_mean": self.sample_mean,
            "sample_variance": self.sample_variance,
            "skewness": self.skewness,
            "excess_kurtosis": self.excess_kurtosis,
            "ks_statistic": self.ks_statistic,
            "ks_threshold": self.ks_threshold,
            "pass": self.passed,
            "predicted_scale": self.predicted_scale,
            "scale_provenance": self.scale_provenance,
            "level": self.level,
            "degenerate": self.degenerate,
            "tail_std_fraction": self.tail_std_fraction,
        }


def normality_test(samples, predicted_scale: float, level: float = 0.01,
                   scale_provenance: str = "computed-sigma",
                   tail_std_fraction: float = 0.0) -> CltReport:
    """KS distance of samples / predicted_scale to the standard normal."""
    samples = np.asarray(samples, dtype=np.float64)
    n = samples.size
    if n < 100:
        raise MonteCarloError("normality reports require at least 100 replicates")
    if predicted_scale <= 0.0:
        raise MonteCarloError("predicted scale must be positive")
    z = np.sort(samples / predicted_scale)
    var = float(np.var(z, ddof=1))
    threshold = kolmogorov_threshold(n, level)
    if var == 0.0:
        return CltReport(n, float(np.mean(z)), 0.0, 0.0, 0.0, math.inf, threshold,
                         False, predicted_scale, scale_provenance, level,
                         degenerate=True, tail_std_fraction=tail_std_fraction)
    cdf = stats.norm.cdf(z)
    grid = np.arange(1, n + 1) / n
    d_plus = float(np.max(grid - cdf))
    d_minus = float(np.max(cdf - (grid - 1.0 / n)))
    ks = max(d_plus, d_minus)
    return CltReport(
        replicate_count=n,
        sample_mean=float(np.mean(z)),
        sample_variance=var,
        skewness=float(stats.skew(z)),
        excess_kurtosis=float(stats.kurtosis(z)),
        ks_statistic=ks,
        ks_threshold=threshold,
        passed=ks < threshold,
        predicted_scale=predicted_scale,
        scale_provenance=scale_provenance,
        level=level,
        tail_std_fraction=tail_std_fraction,
    )


def growth_regression(pairs) -> tuple[float, float, float]:
    """Least-squares slope of log sigma^2 on log lambda.

    Returns (slope, intercept, confidence half-width at 95% from residuals).
    """
    pairs = [(float(l), float(v)) for l, v in pairs]
    if len(pairs) < 4:
        raise MonteCarloError("need at least four (lambda, sigma^2) points")
    lams = np.array([p[0] for p in pairs])
    vals = np.array([p[1] for p in pairs])
    if np.any(vals <= 0.0) or np.any(lams <= 0.0):
        raise MonteCarloError("variance and lambda values must be positive")
    if np.any(np.diff(lams) <= 0.0):
        raise MonteCarloError("lambda grid must be strictly increasing")
    if lams[-1] / lams[0] < 4.0:
        raise MonteCarloError("lambda grid must span at least a factor of 4")
    x = np.log(lams)
    y = np.log(vals)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = len(pairs) - 2
    if dof > 0 and float(np.sum(resid**2)) > 0.0:
        s2 = float(np.sum(resid**2)) / dof
        sxx = float(np.sum((x - x.mean()) ** 2))
        half = float(stats.t.ppf(0.975, dof)) * math.sqrt(s2 / sxx)
    else:
        half = 0.0
    return float(coef[0]), float(coef[1]), half


# ---------------------------------------------------------------------------
# Regime experiment
# ---------------------------------------------------------------------------

@dataclass
class RegimeExperimentReport:
    regime_label: str
    predicted_exponent: float
    per_lambda: list = field(default_factory=list)
    slope: float = math.nan
    intercept: float = math.nan
    slope_halfwidth: float = math.nan
    limit: LimitVariance | None = None
    theory_scale_sq_largest: float = math.nan
    ratio_largest: float = math.nan
    clt: CltReport | None = None
    clt_theorem_scale: float = math.nan
    histogram: dict | None = None
    innovation: str = ""
    replicates: int = 0
    base_seed: int = 0

    def to_json_dict(self) -> dict:
        out = {
            "regime": self.regime_label,
            "predicted_exponent": self.predicted_exponent,
            "slope": self.slope,
            "intercept": self.intercept,
            "slope_halfwidth": self.slope_halfwidth,
            "theory_scale_sq_largest": self.theory_scale_sq_largest,
            "ratio_largest": self.ratio_largest,
            "clt_theorem_scale": self.clt_theorem_scale,
            "innovation": self.innovation,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "per_lambda": self.per_lambda,
        }
        if self.limit is not None:
            out["limit"] = self.limit.to_json_dict()
            if self.limit.cross_check is not None:
                out["limit_cross_check"] = self.limit.cross_check
        if self.clt is not None:
            out["clt"] = self.clt.to_json_dict()
        return out


def slowly_varying_limit(model: CoefficientModel, lam: float) -> float:
    """L(lambda) entering the theoretical scale: the slowly varying factor of
    the radial maximum at the inflation scale."""
    if model.kind == "isotropic":
        c0 = abs(model.params["c0"])
        p = model.params["log_exponent"]
        return c0 * math.log(math.e + lam) ** p if p != 0.0 else c0
    if model.kind == "anisotropic-orthant":
        return model.params["c_norm"]
    if model.kind == "directional-cones":
        return model.params["c_norm"]
    return 1.0


def theory_variance(model: CoefficientModel, prototype: RegionPrototype,
                    lam: float, regime_label: str, predicted_exponent: float,
                    limit: LimitVariance | None, A: float | None) -> float:
    """Theorem-predicted Var(S_n) at inflation lam for the given regime."""
    d = model.dimension
    if regime_label == "SRD":
        vol = prototype.volume
        return vol * lam**d * (A or 0.0) ** 2
    L = slowly_varying_limit(model, lam)
    if regime_label in ("PSD", "ND-NEE"):
        return lam ** (3.0 * d - 2.0 * model.beta) * L**2 * (limit.value if limit else math.nan)
    # edge-effect rates
    return lam ** (d - 1.0) * (limit.value if limit else math.nan)


def regime_experiment(model: CoefficientModel, prototype: RegionPrototype,
                      lambda_grid, innovation: InnovationSpec | str = "gaussian",
                      replicates: int = 2000, base_seed: int = 0,
                      rho: float = 4.0, t_rule: str = "log",
                      run_clt: bool = True, compute_limit: bool = True,
                      workers: int = 1, progress=None) -> RegimeExperimentReport:
    """Scan the lambda grid, compare growth and scale to the regime prediction,
    and test normality of standardized replicate sums at the largest lambda."""
    if isinstance(innovation, str):
        innovation = INNOVATIONS[innovation]
    lambda_grid = [float(l) for l in lambda_grid]
    if any(b <= a for a, b in zip(lambda_grid, lambda_grid[1:])):
        raise MonteCarloError("lambda grid must be strictly increasing")
    regime = classify(model)
    A = None
    if regime.total is not None:
        A = regime.total.value

    rows = []
    theta_largest: ThetaField | None = None
    for lam in lambda_grid:
        if progress:
            progress(f"lambda={lam:g}: enumerating sites")
        sites = enumerate_sites(prototype, lam)
        theta = theta_fft(model, sites, rho=rho, workers=workers)
        value, tail = sigma_sq(theta)
        t_n = default_t_n(lam, t_rule)
        cls = classify_sites(prototype, lam, t_n, theta.window_lo, theta.window_hi)
        dec = variance_decompose(theta, cls)
        rows.append({
            "lambda": lam,
            "N_n": sites.count,
            "sigma_sq": value,
            "tail_bound": tail,
            "lindeberg_ratio": lindeberg_ratio(theta),
            "interior_sum": dec.interior_sum,
            "exterior_sum": dec.exterior_sum,
            "boundary_sum": dec.boundary_sum,
            "boundary_sum_scaled": dec.boundary_sum_scaled,
            "t_n": t_n,
        })
        if lam == lambda_grid[-1]:
            theta_largest = theta
        else:
            del theta

    slope, intercept, half = growth_regression(
        [(r["lambda"], r["sigma_sq"]) for r in rows])

    limit: LimitVariance | None = None
    if compute_limit:
        if regime.label == "PSD":
            limit = limit_variance_psd(model, prototype)
        elif regime.label == "ND-NEE":
            limit = limit_variance_nd(model, prototype)
        elif regime.label in ("ND-EE", "ND-critical"):
            if model.kind == "separable-nd":
                val, err = example42_sigma0(model.params["b"], with_error=True)
                limit = LimitVariance("ND-EE", val, "truncated-series", err,
                                      "separable-boundary-series")
            else:
                limit = sigma_EE_extrapolate(
                    [(r["lambda"], r["boundary_sum_scaled"]) for r in rows],
                    t_values=[r["t_n"] for r in rows])
        elif regime.label == "SRD":
            ts = regime.total or total_sum(model)
            err = 2.0 * abs(ts.value) * ts.tail_bound + ts.tail_bound**2
            limit = LimitVariance("SRD", ts.value**2, "truncated-series", err,
                                  "srd-squared-total-sum")

    for r in rows:
        theo = theory_variance(model, prototype, r["lambda"], regime.label,
                               regime.predicted_variance_exponent, limit, A)
        r["theory_scale_sq"] = theo
        r["ratio"] = r["sigma_sq"] / theo if theo and not math.isnan(theo) else math.nan

    report = RegimeExperimentReport(
        regime_label=regime.label,
        predicted_exponent=regime.predicted_variance_exponent,
        per_lambda=rows,
        slope=slope,
        intercept=intercept,
        slope_halfwidth=half,
        limit=limit,
        theory_scale_sq_largest=rows[-1]["theory_scale_sq"],
        ratio_largest=rows[-1]["ratio"],
        innovation=innovation.name,
        replicates=replicates,
        base_seed=base_seed,
    )

    if run_clt and theta_largest is not None:
        if progress:
            progress(f"clt: {replicates} replicates at lambda={lambda_grid[-1]:g}")
        value, tail = sigma_sq(theta_largest)
        sigma_n = math.sqrt(value)
        samples = sample_sums(theta_largest, innovation, replicates, base_seed)
        report.clt = normality_test(
            samples, sigma_n,
            scale_provenance="computed-sigma",
            tail_std_fraction=math.sqrt(tail) / sigma_n if sigma_n > 0 else math.inf,
        )
        theo = rows[-1]["theory_scale_sq"]
        report.clt_theorem_scale = math.sqrt(theo) if theo and theo > 0 else math.nan
        z = samples / sigma_n
        counts, edges = np.histogram(z, bins=48, range=(-6.0, 6.0))
        report.histogram = {"edges": edges.tolist(), "counts": counts.tolist()}
    return report
