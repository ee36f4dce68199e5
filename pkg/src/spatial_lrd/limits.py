"""Limiting variances: region convolutions of the profile limit and friends.

The profile limits g_infty of the catalogue models are homogeneous of degree
-q, so every integral of g_infty(y - x) over the prototype region (or its
complement) reduces, along each ray from x, to a closed-form radial factor
times the profile value on the unit sphere.  Region boundaries enter only
through ray-crossing parameters, which are closed-form for the convex
prototypes and bisected for polar stars.  This gives fast, singularity-exact
evaluation of

* G(x)      = integral over R0 of g_infty(y - x) dy,
* Gdag(x)   = the centered variant: same integral outside the closed region,
              the complement integral inside, zero on the boundary,

and of their squared integrals over R^d, which are the limiting variances in
the strong-dependence and negative-dependence regimes.  Each squared integral
is evaluated both by graded polar quadrature and by importance-sampled Monte
Carlo; the two must agree within their reported errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coefficients import BSequence, CoefficientModel, CoefficientError
from .geometry import RegionPrototype

TWO_PI = 2.0 * math.pi


class LimitError(ValueError):
    pass


@dataclass
class LimitVariance:
    """A limiting-variance value with its provenance and error estimate."""

    regime: str
    value: float
    method: str  # quadrature | monte-carlo-integration | truncated-series | extrapolation
    error_estimate: float
    provenance: str
    cross_check: float | None = None  # companion-method value, when computed

    def __post_init__(self):
        if self.value < -1e-12:
            raise LimitError("limit variance must be nonnegative")
        self.value = max(self.value, 0.0)
        self.error_estimate = max(self.error_estimate, 0.0)

    def to_json_dict(self) -> dict:
        return {
            "regime": self.regime,
            "value": self.value,
            "method": self.method,
            "error_estimate": self.error_estimate,
            "provenance": self.provenance,
        }


# ---------------------------------------------------------------------------
# Ray machinery
# ---------------------------------------------------------------------------

def _angular_nodes(dimension: int, n: int):
    """Unit directions and quadrature weights for the sphere."""
    if dimension == 2:
        phi = TWO_PI * (np.arange(n) + 0.5) / n
        units = np.column_stack([np.cos(phi), np.sin(phi)])
        weights = np.full(n, TWO_PI / n)
        return units, weights
    if dimension == 3:
        k = np.arange(n, dtype=np.float64)
        golden = (1.0 + math.sqrt(5.0)) / 2.0
        z = 1.0 - (2.0 * k + 1.0) / n
        theta = TWO_PI * k / golden
        s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        units = np.column_stack([s * np.cos(theta), s * np.sin(theta), z])
        weights = np.full(n, 4.0 * math.pi / n)
        return units, weights
    raise LimitError("limit functionals are implemented for d = 2 and d = 3")


def _radial_F(s: np.ndarray, q: float, d: int) -> np.ndarray:
    """Antiderivative of s^(d-1-q), with F(0)=0 for q<d and F(inf)=0 for q>d."""
    p = d - q
    s = np.asarray(s, dtype=np.float64)
    if abs(p) < 1e-12:
        with np.errstate(divide="ignore"):
            return np.log(np.maximum(s, 1e-300))
    with np.errstate(divide="ignore"):
        return np.where(s > 0.0, s**p, 0.0) / p


def _check_profile(model: CoefficientModel):
    if not model.profile_integrable:
        raise CoefficientError(
            "the separable product profile is not locally integrable; "
            "region convolutions are undefined for this kind")


def _g_on_units(model: CoefficientModel, units: np.ndarray) -> np.ndarray:
    if model.l2_limit_zero:
        return np.zeros(units.shape[0])
    return np.atleast_1d(model.g_limit_values(units))


def _convolution_batch(model: CoefficientModel, prototype: RegionPrototype,
                       X: np.ndarray, n_phi: int, over_complement: np.ndarray):
    """Ray-quadrature values of the region (or complement) convolution at X.

    over_complement is a boolean per point: integrate g over R0^c instead of
    R0 (used for interior points of the dagger variant).
    """
    d = prototype.dimension
    q = model.profile_homogeneity
    units, weights = _angular_nodes(d, n_phi)
    g_weighted = _g_on_units(model, units) * weights
    K = X.shape[0]
    out = np.zeros(K)
    if not np.any(g_weighted):
        return out
    if np.any(over_complement) and q <= d:
        raise LimitError("complement integral requires q > d")
    convex = prototype.kind != "polar-star"
    batch = max(1, 4_000_000 // n_phi)
    for lo in range(0, K, batch):
        hi = min(lo + batch, K)
        xs = X[lo:hi]
        nb = hi - lo
        if convex:
            seg_lo, seg_hi = prototype.ray_crossings_convex(xs, units)
            contrib = _radial_F(seg_hi, q, d) - _radial_F(seg_lo, q, d)
            contrib[seg_hi <= seg_lo] = 0.0
        else:
            origins = np.repeat(xs, n_phi, axis=0)
            dirs = np.tile(units, (nb, 1))
            s_lo, s_hi, ridx = prototype.ray_boundary_crossings(origins, dirs)
            flat = np.zeros(nb * n_phi)
            if s_lo.size:
                np.add.at(flat, ridx, _radial_F(s_hi, q, d) - _radial_F(s_lo, q, d))
            contrib = flat.reshape(nb, n_phi)
        comp_rows = over_complement[lo:hi]
        if np.any(comp_rows):
            # For an interior point each ray meets R0 in [0,s1], [s2,s3], ...
            # The complement pieces (s1,s2), ..., (s_last, inf) telescope to
            # minus the region increments: F(0) carries coefficient zero by
            # construction and F(inf) = 0 when q > d.
            contrib = np.where(comp_rows[:, None], -contrib, contrib)
        out[lo:hi] = contrib @ g_weighted
    return out


def _convolution_at(model: CoefficientModel, prototype: RegionPrototype,
                    X: np.ndarray, n_phi: int, complement_mask=None) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if complement_mask is None:
        complement_mask = np.zeros(X.shape[0], dtype=bool)
    return _convolution_batch(model, prototype, X, n_phi, complement_mask)


def G_infty_at(model: CoefficientModel, prototype: RegionPrototype, x,
               n_phi: int = 2048, return_error: bool = False):
    """Region convolution of the profile limit at x.

    Defined pointwise for q < d; for q >= d it exists only off the closed
    region, so such calls require a strictly exterior x.
    """
    _check_profile(model)
    if model.l2_limit_zero:
        return (0.0, 0.0) if return_error else 0.0
    d = prototype.dimension
    q = model.profile_homogeneity
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise LimitError("x must be a single point of dimension d")
    if q >= d:
        inside = prototype.membership(x)
        dist = prototype.boundary_distance(x)
        if inside or dist <= max(1e-9, prototype.distance_error_bound):
            raise LimitError(
                "pointwise region convolution may diverge for q >= d; "
                "only strictly exterior points are supported in this regime")
    coarse = float(_convolution_at(model, prototype, x[None, :], n_phi // 2)[0])
    fine = float(_convolution_at(model, prototype, x[None, :], n_phi)[0])
    err = abs(fine - coarse)
    return (fine, err) if return_error else fine


def G_dagger_at(model: CoefficientModel, prototype: RegionPrototype, x,
                n_phi: int = 2048, return_error: bool = False):
    """Centered variant: region integral outside, complement integral inside,
    zero on the boundary itself."""
    _check_profile(model)
    d = prototype.dimension
    q = model.profile_homogeneity
    if not model.l2_limit_zero and q <= d:
        raise LimitError("the centered convolution requires beta > d")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (d,):
        raise LimitError("x must be a single point of dimension d")
    if model.l2_limit_zero:
        return (0.0, 0.0) if return_error else 0.0
    tol = max(1e-12, prototype.distance_error_bound)
    if prototype.boundary_distance(x) <= tol:
        return (0.0, 0.0) if return_error else 0.0
    inside = bool(prototype.membership(x))
    mask = np.array([inside])
    coarse = float(_convolution_at(model, prototype, x[None, :], n_phi // 2, mask)[0])
    fine = float(_convolution_at(model, prototype, x[None, :], n_phi, mask)[0])
    err = abs(fine - coarse)
    return (fine, err) if return_error else fine


# ---------------------------------------------------------------------------
# Squared integrals over R^d
# ---------------------------------------------------------------------------

def _graded_tau(n_panels: int = 16, nodes_per_panel: int = 4,
                toward_one: bool = True):
    """Gauss nodes on [0,1) with panels geometrically graded toward 1 (or 0)."""
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes_per_panel)
    edges = 1.0 - 0.5 ** np.arange(n_panels + 1)
    edges[-1] = 1.0 - 0.5**n_panels
    taus, wts = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        taus.append(mid + half * gl_x)
        wts.append(half * gl_w)
    taus = np.concatenate(taus)
    wts = np.concatenate(wts)
    if not toward_one:
        taus = 1.0 - taus
    return taus, wts, 0.5**n_panels  # last: width of the dropped sliver


def _boundary_radius(prototype: RegionPrototype, units: np.ndarray) -> np.ndarray:
    """Radius of the star-shaped boundary along each direction from origin."""
    origins = np.zeros_like(units)
    lo, hi, ridx = prototype.ray_boundary_crossings(origins, units)
    out = np.zeros(units.shape[0])
    # star-shaped about origin: keep the largest exit per ray
    np.maximum.at(out, ridx, hi)
    if np.any(out <= 0.0):
        raise LimitError("prototype does not contain the origin star-shapedly")
    return out


def _squared_integral_quadrature(eval_points_fn, prototype: RegionPrototype,
                                 q: float, gmax: float, n_psi: int,
                                 far_radius: float = 24.0):
    """Polar quadrature of F(x)^2 over R^d with panels graded at the boundary.

    eval_points_fn(X, inside_mask) returns the integrand's square root (G or
    Gdag values) at the points X.  Returns (value, error_estimate).
    """
    d = prototype.dimension
    units, wpsi = _angular_nodes(d, n_psi)
    rho = _boundary_radius(prototype, units)

    n_grade = 24
    tau_in, w_in, sliver = _graded_tau(n_grade, 4, toward_one=True)
    tau_out, w_out, _ = _graded_tau(n_grade, 4, toward_one=False)

    value = 0.0
    band = 1.5
    S_in = rho[:, None] * tau_in[None, :]
    S_band = rho[:, None] + band * tau_out[None, :]
    gl_x, gl_w = np.polynomial.legendre.leggauss(8)
    far_edges = np.geomspace(1.0, far_radius, 14)
    far_nodes, far_wts = [], []
    for a, b in zip(far_edges[:-1], far_edges[1:]):
        mid, half = 0.5 * (a + b), 0.5 * (b - a)
        far_nodes.append(mid + half * gl_x)
        far_wts.append(half * gl_w)
    far_nodes = np.concatenate(far_nodes)
    far_wts = np.concatenate(far_wts)
    S_far = rho[:, None] + band - 1.0 + far_nodes[None, :]

    for S, W, jac, inside in (
        (S_in, w_in, rho, True),
        (S_band, w_out, np.full_like(rho, band), False),
        (S_far, far_wts, np.ones_like(rho), False),
    ):
        flat = (S[..., None] * units[:, None, :]).reshape(-1, d)
        vals = eval_points_fn(flat, inside).reshape(S.shape)
        radial = np.sum(vals**2 * S ** (d - 1) * W[None, :], axis=1) * jac
        value += float(np.sum(radial * wpsi))

    # Dropped boundary slivers: |F| <= c_loc * gmax * dist^(d-q) near the
    # boundary, so each sliver of width h contributes O(h^(1 + 2(d-q))).
    rho_max = float(np.max(rho))
    h = rho_max * sliver
    p_sing = 1.0 + 2.0 * (d - q)
    c_loc = TWO_PI * gmax / max(abs(q - d), 0.05)
    if p_sing > 1e-9:
        err = 2.0 * TWO_PI * rho_max * c_loc**2 * h**p_sing / p_sing
    else:
        # borderline square integrability: report the logarithmic residual
        err = 2.0 * TWO_PI * rho_max * c_loc**2 * (n_grade + 1.0) * math.log(2.0)
    s_end = rho_max + band - 1.0 + far_radius
    far0 = s_end - prototype.bounding_radius
    vol = prototype.volume
    err += TWO_PI * (vol * gmax) ** 2 * far0 ** (d - 2.0 * q) / (2.0 * q - d) \
        if 2.0 * q > d else math.inf
    return value, err


def _squared_integral_mc(eval_points_fn, prototype: RegionPrototype, q: float,
                         n_samples: int, seed: int):
    """Importance-sampled integral of F^2: uniform core + Pareto radial tail."""
    d = prototype.dimension
    if d != 2:
        raise LimitError("Monte Carlo route implemented for d = 2")
    r1 = prototype.bounding_radius + 1.5
    a = q
    w_core = 0.65
    rng = np.random.Generator(np.random.PCG64(seed))
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk = 100_000
    while done < n_samples:
        m = min(chunk, n_samples - done)
        pick_core = rng.random(m) < w_core
        s = np.empty(m)
        u = rng.random(m)
        s[pick_core] = r1 * np.sqrt(u[pick_core])
        s[~pick_core] = r1 * u[~pick_core] ** (-1.0 / a)
        phi = TWO_PI * rng.random(m)
        X = np.column_stack([s * np.cos(phi), s * np.sin(phi)])
        dens = np.where(
            s < r1, w_core / (math.pi * r1**2), 0.0
        ) + np.where(
            s >= r1, (1.0 - w_core) * a * r1**a * s ** (-a - 2.0) / TWO_PI, 0.0
        )
        inside = np.asarray(prototype.membership(X))
        vals = np.empty(m)
        if inside.any():
            vals[inside] = eval_points_fn(X[inside], True)
        if (~inside).any():
            vals[~inside] = eval_points_fn(X[~inside], False)
        f = vals**2 / dens
        total += float(np.sum(f))
        total_sq += float(np.sum(f * f))
        done += m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean**2, 0.0)
    return mean, math.sqrt(var / n_samples)


def _make_eval_fn(model: CoefficientModel, prototype: RegionPrototype,
                  dagger: bool, n_phi: int):
    boundary_tol = max(1e-12, prototype.distance_error_bound)

    def eval_points(X: np.ndarray, inside_hint) -> np.ndarray:
        X = np.atleast_2d(X)
        if dagger:
            if isinstance(inside_hint, bool):
                mask = np.full(X.shape[0], inside_hint)
            else:
                mask = np.asarray(inside_hint)
            vals = _convolution_at(model, prototype, X, n_phi, mask)
            dist = prototype.boundary_distance(X)
            return np.where(dist <= boundary_tol, 0.0, vals)
        return _convolution_at(model, prototype, X, n_phi)

    return eval_points


def _dual_squared_integral(model, prototype, dagger: bool, regime: str,
                           provenance: str, n_psi: int, n_phi: int,
                           mc_samples: int, seed: int) -> LimitVariance:
    _check_profile(model)
    q = model.profile_homogeneity
    units, _ = _angular_nodes(prototype.dimension, 4096)
    gmax = float(np.max(np.abs(_g_on_units(model, units))))
    if gmax == 0.0:
        return LimitVariance(regime, 0.0, "quadrature", 0.0, provenance, 0.0)
    eval_fn = _make_eval_fn(model, prototype, dagger, n_phi)
    val_q, err_q = _squared_integral_quadrature(eval_fn, prototype, q, gmax, n_psi)
    coarse_fn = _make_eval_fn(model, prototype, dagger, n_phi // 2)
    val_c, _ = _squared_integral_quadrature(coarse_fn, prototype, q, gmax, n_psi // 2)
    err_q += abs(val_q - val_c)
    val_mc, se_mc = _squared_integral_mc(eval_fn, prototype, q, mc_samples, seed)
    return LimitVariance(
        regime=regime,
        value=val_q,
        method="quadrature",
        error_estimate=err_q + 3.0 * se_mc + abs(val_q - val_mc),
        provenance=provenance,
        cross_check=val_mc,
    )


def limit_variance_psd(model: CoefficientModel, prototype: RegionPrototype,
                       n_psi: int = 320, n_phi: int = 512,
                       mc_samples: int = 250_000, seed: int = 7) -> LimitVariance:
    """Integral of G^2 over R^d: the PSD limiting variance (beta in (d/2, d))."""
    from .coefficients import classify

    cls = classify(model)
    if cls.label != "PSD":
        raise LimitError(f"PSD limit variance requires the PSD regime, got {cls.label}")
    return _dual_squared_integral(model, prototype, dagger=False, regime="PSD",
                                  provenance="psd-region-convolution-variance",
                                  n_psi=n_psi, n_phi=n_phi,
                                  mc_samples=mc_samples, seed=seed)


def limit_variance_nd(model: CoefficientModel, prototype: RegionPrototype,
                      n_psi: int = 320, n_phi: int = 512,
                      mc_samples: int = 250_000, seed: int = 11,
                      enforce_regime: bool = True) -> LimitVariance:
    """Integral of Gdag^2: the ND limiting variance without edge effects."""
    from .coefficients import classify

    if enforce_regime:
        cls = classify(model)
        if cls.label != "ND-NEE":
            raise LimitError(
                f"this limit requires the no-edge-effect ND regime, got {cls.label}")
    return _dual_squared_integral(model, prototype, dagger=True, regime="ND-NEE",
                                  provenance="nd-centered-convolution-variance",
                                  n_psi=n_psi, n_phi=n_phi,
                                  mc_samples=mc_samples, seed=seed)


# ---------------------------------------------------------------------------
# Edge-effect constants
# ---------------------------------------------------------------------------

def sigma_EE_extrapolate(pairs, t_values=None) -> LimitVariance:
    """Extrapolate lambda^-(d-1) boundary sums to their limit via a + b/lambda.

    pairs: iterable of (lambda, boundary_sum_scaled), lambdas increasing,
    at least three of them.
    """
    pairs = [(float(l), float(v)) for l, v in pairs]
    if len(pairs) < 3:
        raise LimitError("need at least three (lambda, value) pairs")
    lams = np.array([p[0] for p in pairs])
    vals = np.array([p[1] for p in pairs])
    if np.any(np.diff(lams) <= 0.0):
        raise LimitError("lambda values must be strictly increasing")
    A = np.column_stack([np.ones_like(lams), 1.0 / lams])
    coef, res, *_ = np.linalg.lstsq(A, vals, rcond=None)
    fitted = A @ coef
    rms = float(np.sqrt(np.mean((vals - fitted) ** 2)))
    # parameter variance of the intercept from the normal equations
    cov = np.linalg.inv(A.T @ A)
    dof = max(len(pairs) - 2, 1)
    sigma2 = float(np.sum((vals - fitted) ** 2)) / dof
    err = math.sqrt(max(cov[0, 0] * sigma2, 0.0)) + rms
    note = "edge-effect-boundary-limit"
    if t_values is not None:
        note += " t_n=" + ",".join(str(t) for t in t_values)
    return LimitVariance("ND-EE", float(coef[0]), "extrapolation", err, note)


def example42_sigma0(b: BSequence, k_max: int | None = None,
                     with_error: bool = False):
    """Boundary-limit constant of the separable construction:

        sigma0^2 = 16 B^2 [ B^2 + sum_k (T_k)^2 + sum_k (T_{k+1})^2 ],

    with B the half-line sum of b and T_k its tails.  Tail sums are exact for
    power-law b (Hurwitz zeta); the k-series is truncated with an explicit
    remainder bound.
    """
    B = b.total
    if not 0.0 < B < math.inf:
        raise LimitError("b must have a positive finite sum")
    if b.scale > 0.0 and b.exponent <= 1.5:
        raise LimitError("k-series diverges for tail exponents <= 3/2")

    def tail_bound(K: int) -> float:
        if b.scale == 0.0:
            return 0.0 if K >= len(b.prefix) else math.inf
        e = b.exponent
        c = b.scale
        return c**2 * (K - 1.0) ** (3.0 - 2.0 * e) / ((e - 1.0) ** 2 * (2.0 * e - 3.0))

    K = k_max or 64
    while k_max is None and tail_bound(K) > 1e-12 * max(B**4, 1e-30) and K < 1 << 22:
        K *= 2
    ks = np.arange(1, K + 1)
    T = np.array([b.tail_sum(int(k)) for k in ks])
    T1 = np.array([b.tail_sum(int(k) + 1) for k in ks])
    s1 = float(np.sum(T**2))
    s2 = float(np.sum(T1**2))
    rem = 2.0 * tail_bound(K + 1)
    value = 16.0 * B**2 * (B**2 + s1 + s2)
    err = 16.0 * B**2 * rem
    if with_error:
        return value, err
    return value


def limit_variance_srd(model: CoefficientModel, radius: int = 1000) -> LimitVariance:
    """A^2 with the truncation-tail error, the SRD limiting variance of the
    normalized sum."""
    from .coefficients import classify, total_sum

    cls = classify(model, radius)
    if cls.label != "SRD":
        raise LimitError(f"SRD limit variance requires the SRD regime, got {cls.label}")
    ts = total_sum(model, radius)
    if abs(ts.value) <= ts.tail_bound:
        raise LimitError("total sum indistinguishable from zero at this radius")
    err = 2.0 * abs(ts.value) * ts.tail_bound + ts.tail_bound**2
    return LimitVariance("SRD", ts.value**2, "truncated-series", err,
                         "srd-squared-total-sum")


def critical_combined_variance(model: CoefficientModel, prototype: RegionPrototype,
                               c0: float, pairs, **nd_kwargs) -> LimitVariance:
    """Critical-exponent combination: edge-effect constant plus c0^2 times the
    centered-convolution integral.

    At the critical exponent the centered convolution is only borderline
    square integrable for generic profiles; the quadrature's graded panels
    stop at a small boundary sliver and the reported error carries the
    residual, so treat the value as the regularized integral it is.
    """
    ee = sigma_EE_extrapolate(pairs)
    if c0 == 0.0:
        return LimitVariance("ND-critical", ee.value, "extrapolation",
                             ee.error_estimate, "critical-edge-only")
    nd_kwargs.setdefault("enforce_regime", False)
    nd = limit_variance_nd(model, prototype, **nd_kwargs)
    return LimitVariance(
        "ND-critical",
        ee.value + c0**2 * nd.value,
        "quadrature",
        ee.error_estimate + c0**2 * nd.error_estimate,
        "critical-edge-plus-centered-convolution",
    )
