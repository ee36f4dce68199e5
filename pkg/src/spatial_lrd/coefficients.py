"""Coefficient fields alpha(.) for spatial linear processes on Z^d.

Each model carries the data needed by the rest of the package:

* pointwise evaluation ``alpha`` (vectorized over integer vectors),
* the radial maximum ``gamma(t) = max |alpha(floor(u t))|`` over unit
  directions, with an enclosure bracket from ``| ||floor(tu)|| - t | <= sqrt(d)``,
* the rescaled profiles ``g_t(x) = alpha(floor(t x)) / gamma(t)`` and their
  closed-form limits,
* a radial envelope that dominates ``|alpha|`` outside any ball, used for all
  truncation-tail bounds,
* the total sum A with a tail bound, and the dependence classification
  (PSD / SRD / ND with or without edge effects) with its predicted variance
  growth exponent.

Catalogue kinds: ``delta``, ``isotropic`` (power-law decay with an optional
``(log t)^p`` slowly varying factor), ``anisotropic-orthant`` (products of
directional powers restricted to cones around orthonormal axes),
``directional-cones`` (sums of cone-restricted power laws with per-direction
exponents), ``separable-nd`` (the two-dimensional product construction whose
total sum vanishes identically), and ``table`` (explicit finite support).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import zeta as hurwitz_zeta

from .numerics import improper_power_quad, linf_tail_sum_bound


class CoefficientError(ValueError):
    pass


class UnclassifiableError(CoefficientError):
    pass


class ProfileUndefinedError(CoefficientError):
    pass


KINDS = ("delta", "isotropic", "anisotropic-orthant", "directional-cones",
         "separable-nd", "table")


# ---------------------------------------------------------------------------
# One-dimensional sequences b(i) for the separable construction
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BSequence:
    """Positive symmetric sequence b(i), i >= 1: explicit prefix + power tail.

    b(i) = prefix[i-1] for i <= len(prefix), else scale * i^(-exponent).
    The pure power-law family has exact tail sums via the Hurwitz zeta
    function; general prefixes only change finitely many terms.
    """

    exponent: float = 3.0
    scale: float = 1.0
    prefix: tuple[float, ...] = ()

    def __post_init__(self):
        if self.scale < 0.0:
            raise CoefficientError("b scale must be nonnegative")
        if self.scale > 0.0 and self.exponent <= 1.0:
            raise CoefficientError("b tail exponent must exceed 1 for summability")
        if any(v < 0.0 for v in self.prefix):
            raise CoefficientError("b values must be positive")

    def value(self, i):
        i = np.abs(np.asarray(i, dtype=np.float64))
        safe = np.maximum(i, 1.0)
        out = np.where(i >= 1.0, self.scale * safe ** (-self.exponent), 0.0)
        for k, v in enumerate(self.prefix, start=1):
            out = np.where(i == k, v, out)
        return out

    def tail_sum(self, k: int) -> float:
        """T_k = sum_{j >= k} b(j), exact for the power tail."""
        k = max(int(k), 1)
        n0 = len(self.prefix)
        head = sum(self.prefix[j - 1] for j in range(k, n0 + 1))
        start = max(k, n0 + 1)
        if self.scale == 0.0:
            return float(head)
        return float(head + self.scale * hurwitz_zeta(self.exponent, start))

    @property
    def total(self) -> float:
        """B = sum_{i >= 1} b(i)."""
        return self.tail_sum(1)

    def scaled(self, c: float) -> "BSequence":
        return BSequence(self.exponent, c * self.scale,
                         tuple(c * v for v in self.prefix))


# ---------------------------------------------------------------------------
# The coefficient model
# ---------------------------------------------------------------------------

class CoefficientModel:
    """A coefficient field alpha(.) with its decay metadata.

    ``beta`` is the effective decay exponent of the radial maximum gamma(t);
    for the separable kind this is the one-dimensional exponent of b (the
    combined two-dimensional exponent is ``2 * beta`` and governs the product
    profile, see ``g_limit``).  ``overrides`` is an explicit finite map that
    takes precedence near the origin.
    """

    def __init__(self, kind: str, dimension: int, beta: float, params: dict,
                 overrides: dict[tuple[int, ...], float] | None = None,
                 structural_zero_sum: bool = False):
        if kind not in KINDS:
            raise CoefficientError(f"unknown coefficient kind {kind!r}")
        self.kind = kind
        self.dimension = int(dimension)
        self.beta = float(beta)
        self.params = params
        self.overrides = dict(overrides or {})
        self.structural_zero_sum = bool(structural_zero_sum)
        if self.kind not in ("delta", "table") and not self.beta > self.dimension / 2.0:
            raise CoefficientError("beta must exceed d/2 for square summability")
        self._key = (kind, dimension, beta, _freeze(params),
                     tuple(sorted(self.overrides.items())), structural_zero_sum)

    def __eq__(self, other) -> bool:
        return isinstance(other, CoefficientModel) and self._key == other._key

    def __hash__(self) -> int:
        return hash(self._key)

    def __repr__(self) -> str:
        return f"CoefficientModel({self.kind}, d={self.dimension}, beta={self.beta})"

    # -- pointwise evaluation -------------------------------------------------

    def alpha(self, i) -> np.ndarray | float:
        """Coefficient alpha(i) for integer vectors i, shape (d,) or (..., d)."""
        arr = np.asarray(i)
        scalar = arr.ndim == 1
        pts = np.atleast_2d(arr).astype(np.int64)
        if pts.shape[-1] != self.dimension:
            raise CoefficientError("coefficient index has wrong dimension")
        flat = pts.reshape(-1, self.dimension)
        vals = self._alpha_formula(flat)
        for coord, v in self.overrides.items():
            match = np.all(flat == np.asarray(coord, dtype=np.int64), axis=-1)
            if match.any():
                vals = np.where(match, v, vals)
        if scalar:
            return float(vals[0])
        return vals.reshape(arr.shape[:-1])

    def _alpha_formula(self, pts: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind == "delta":
            return np.all(pts == 0, axis=-1).astype(np.float64)
        if kind == "table":
            vals = np.zeros(pts.shape[0])
            for coord, v in self.params["entries"]:
                match = np.all(pts == np.asarray(coord, dtype=np.int64), axis=-1)
                vals = np.where(match, v, vals)
            return vals
        x = pts.astype(np.float64)
        r = np.linalg.norm(x, axis=-1)
        if kind == "isotropic":
            c0 = self.params["c0"]
            p = self.params["log_exponent"]
            amp = c0 * np.log(math.e + r) ** p if p != 0.0 else c0
            return amp * (1.0 + r) ** (-self.beta)
        if kind == "separable-nd":
            b: BSequence = self.params["b"]
            i, j = pts[:, 0], pts[:, 1]
            vals = np.where((i != 0) & (j != 0), b.value(i) * b.value(j), 0.0)
            origin = (i == 0) & (j == 0)
            return np.where(origin, -4.0 * b.total**2, vals)
        gamma_r = self.params["origin_zero_radius"]
        in_gap = r < gamma_r
        safe_r = np.where(r > 0, r, 1.0)
        if kind == "anisotropic-orthant":
            O = np.asarray(self.params["rows"])
            a = np.asarray(self.params["exponents"])
            delta = self.params["delta"]
            proj = x @ O.T
            phi = np.abs(proj) / safe_r[:, None]
            ind = np.all(phi > delta, axis=-1) & ~in_gap
            base = np.where(ind[:, None], np.abs(proj), 1.0)
            vals = np.prod(base ** (-a[None, :]), axis=-1)
            return np.where(ind, vals, 0.0)
        if kind == "directional-cones":
            dirs = np.asarray(self.params["directions"])
            deltas = np.asarray(self.params["deltas"])
            exps = np.asarray(self.params["exponents"])
            proj = np.abs(x @ dirs.T)
            phi = proj / safe_r[:, None]
            psi = np.where(phi > deltas[None, :], phi, 0.0)
            terms = psi / (1.0 + safe_r[:, None] ** exps[None, :])
            vals = terms.sum(axis=-1)
            return np.where(in_gap, 0.0, vals)
        raise CoefficientError(f"unhandled kind {kind}")

    # -- radial envelope -------------------------------------------------------

    def envelope(self, t) -> np.ndarray:
        """Nonincreasing bound for max{|alpha(j)| : ||j|| >= t}."""
        t = np.maximum(np.asarray(t, dtype=np.float64), 1e-12)
        out = self._envelope_formula(t)
        if self.overrides:
            radii = np.sort([np.linalg.norm(c) for c in self.overrides])
            magn = np.array([abs(v) for _, v in sorted(
                self.overrides.items(), key=lambda kv: np.linalg.norm(kv[0]))])
            # suffix max over override radii >= t
            suffix = np.maximum.accumulate(magn[::-1])[::-1]
            idx = np.searchsorted(radii, t, side="left")
            extra = np.where(idx < len(radii), suffix[np.minimum(idx, len(radii) - 1)], 0.0)
            out = np.maximum(out, extra)
        return out

    def _envelope_formula(self, t: np.ndarray) -> np.ndarray:
        kind = self.kind
        if kind == "delta":
            return np.where(t <= 0.0, 1.0, 0.0)
        if kind == "table":
            radii = self.params["radii_sorted"]
            suffix = self.params["suffix_max"]
            idx = np.searchsorted(radii, t, side="left")
            return np.where(idx < len(radii), suffix[np.minimum(idx, len(radii) - 1)], 0.0)
        if kind == "isotropic":
            c0 = abs(self.params["c0"])
            p = self.params["log_exponent"]

            def h(s):
                return c0 * np.log(math.e + s) ** p * (1.0 + s) ** (-self.beta)

            if p <= 0.0:
                return h(t)
            # h rises before its maximizer near exp(p/beta); cap the sup there.
            s_star = 3.0 * math.exp(p / self.beta)
            grid = np.geomspace(1e-2, 10.0 * s_star, 2048)
            peak = 1.01 * float(np.max(h(grid)))
            return np.where(t >= s_star, h(t), np.maximum(h(t), peak))
        if kind == "separable-nd":
            # Off-axis pairs satisfy max(|i|,|j|) >= t/sqrt(2); the envelope of
            # b is nonincreasing, so the product is at most bmax * env(t/sqrt2).
            b: BSequence = self.params["b"]
            bmax = float(_b_envelope(b, np.asarray(1.0)))
            arg = np.maximum(t / math.sqrt(2.0), 1.0)
            return bmax * _b_envelope(b, arg)
        if kind == "anisotropic-orthant":
            delta = self.params["delta"]
            return delta ** (-self.beta) * t ** (-self.beta)
        if kind == "directional-cones":
            exps = np.asarray(self.params["exponents"])
            tt = np.atleast_1d(t)
            vals = np.sum(1.0 / (1.0 + tt[:, None] ** exps[None, :]), axis=-1)
            return vals.reshape(np.shape(t))
        raise CoefficientError(f"unhandled kind {kind}")

    @property
    def envelope_tail_power(self) -> float:
        """Exponent p with envelope(t) = O(t^-p) (up to slowly varying factors)."""
        if self.kind in ("delta", "table"):
            return math.inf
        return self.beta

    @property
    def compact_support(self) -> bool:
        return self.kind in ("delta", "table")

    # -- profiles ---------------------------------------------------------------

    @property
    def profile_homogeneity(self) -> float:
        """Degree q with g_limit(s x) = s^-q g_limit(x)."""
        if self.kind == "separable-nd":
            return 2.0 * self.beta
        return self.beta

    @property
    def l2_limit_zero(self) -> bool:
        """True when the gamma-normalized profile limit is identically zero.

        The separable construction concentrates near the axes, so its
        gamma-normalized profiles vanish in L^b; its ``g_limit`` reports the
        product-form profile under the combined-exponent rescaling instead.
        """
        return self.kind in ("delta", "table", "separable-nd")

    def g_limit_values(self, x) -> np.ndarray | float:
        """Closed-form profile limit g_infty(x); see ``l2_limit_zero`` caveat."""
        arr = np.asarray(x, dtype=np.float64)
        scalar = arr.ndim == 1
        pts = np.atleast_2d(arr).reshape(-1, self.dimension)
        r = np.linalg.norm(pts, axis=-1)
        if np.any(r == 0.0):
            raise CoefficientError("g_limit is undefined at x = 0")
        kind = self.kind
        if kind in ("delta", "table"):
            vals = np.zeros(pts.shape[0])
        elif kind == "isotropic":
            sign = 1.0 if self.params["c0"] > 0 else -1.0
            vals = sign * r ** (-self.beta)
        elif kind == "separable-nd":
            # Product-form profile under the combined-exponent rescaling
            # t^{-2 beta}; the gamma-normalized L^b limit is identically zero.
            prod = np.abs(pts[:, 0] * pts[:, 1])
            with np.errstate(divide="ignore"):
                vals = np.where(prod > 0.0, prod ** (-self.beta), 0.0)
        elif kind == "anisotropic-orthant":
            O = np.asarray(self.params["rows"])
            a = np.asarray(self.params["exponents"])
            delta = self.params["delta"]
            proj = pts @ O.T
            phi = np.abs(proj) / r[:, None]
            ind = np.all(phi > delta, axis=-1)
            base = np.where(ind[:, None], np.abs(proj), 1.0)
            vals = np.where(ind, np.prod(base ** (-a[None, :]), axis=-1), 0.0)
            vals = vals / self.params["c_norm"]
        else:  # directional-cones
            dirs = np.asarray(self.params["directions"])
            deltas = np.asarray(self.params["deltas"])
            exps = np.asarray(self.params["exponents"])
            a0 = float(np.min(exps))
            lead = exps == a0
            phi = np.abs(pts @ dirs.T) / r[:, None]
            psi = np.where(phi > deltas[None, :], phi, 0.0)
            vals = psi[:, lead].sum(axis=-1) / (self.params["c_norm"] * r**a0)
        if scalar:
            return float(vals[0])
        return vals.reshape(arr.shape[:-1])

    def g_sphere(self, units: np.ndarray) -> np.ndarray:
        """g_infty on unit vectors (profile is homogeneous of degree -q)."""
        if self.l2_limit_zero and self.kind != "separable-nd":
            return np.zeros(units.shape[0])
        return np.atleast_1d(self.g_limit_values(units))

    @property
    def profile_integrable(self) -> bool:
        """Whether g_limit is locally integrable away from 0 (needed by the
        region-convolution integrals).  The separable product profile is not."""
        return self.kind != "separable-nd"

    # -- misc -------------------------------------------------------------------

    def scaled(self, c: float) -> "CoefficientModel":
        """The model with every coefficient multiplied by c."""
        params = dict(self.params)
        overrides = {k: c * v for k, v in self.overrides.items()}
        if self.kind == "isotropic":
            params["c0"] = c * params["c0"]
        elif self.kind == "table":
            params = {"entries": tuple((coord, c * v) for coord, v in params["entries"])}
            return table_model(dict(params["entries"]), dimension=self.dimension)
        elif self.kind == "separable-nd":
            if c < 0:
                raise CoefficientError("separable-nd requires positive b")
            params["b"] = params["b"].scaled(math.sqrt(c))
        elif self.kind == "delta":
            return table_model({(0,) * self.dimension: c}, dimension=self.dimension)
        else:
            raise CoefficientError(f"scaling not defined for kind {self.kind}")
        return CoefficientModel(self.kind, self.dimension, self.beta, params,
                                overrides, self.structural_zero_sum)


def _b_envelope(b: BSequence, s):
    """Nonincreasing bound for max{b(i) : i >= s}."""
    vals = b.value(np.ceil(s))
    if b.prefix:
        # prefix values may be non-monotone: take suffix maxima over them
        pref = np.asarray(b.prefix + (b.value(len(b.prefix) + 1),))
        suf = np.maximum.accumulate(pref[::-1])[::-1]
        idx = np.minimum(np.ceil(s).astype(int), len(b.prefix) + 1) - 1
        idx = np.maximum(idx, 0)
        vals = np.where(np.ceil(s) <= len(b.prefix) + 1, suf[idx], vals)
    return vals


def _freeze(obj):
    if isinstance(obj, dict):
        return tuple(sorted((k, _freeze(v)) for k, v in obj.items()))
    if isinstance(obj, (list, tuple)):
        return tuple(_freeze(v) for v in obj)
    if isinstance(obj, np.ndarray):
        return (obj.shape, obj.tobytes())
    return obj


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def delta_model(dimension: int = 2) -> CoefficientModel:
    """Point mass at the origin: alpha(0) = 1."""
    return CoefficientModel("delta", dimension, math.inf, {})


def table_model(entries: dict, dimension: int | None = None) -> CoefficientModel:
    """Explicit finite coefficient map {integer vector: value}."""
    items = tuple(sorted((tuple(int(c) for c in coord), float(v))
                         for coord, v in entries.items()))
    if not items:
        raise CoefficientError("table model needs at least one entry")
    d = dimension or len(items[0][0])
    radii = np.array([np.linalg.norm(c) for c, _ in items])
    order = np.argsort(radii)
    radii_sorted = radii[order]
    mags = np.array([abs(v) for _, v in items])[order]
    suffix = np.maximum.accumulate(mags[::-1])[::-1]
    params = {"entries": items, "radii_sorted": radii_sorted, "suffix_max": suffix}
    return CoefficientModel("table", d, math.inf, params)


def isotropic_model(beta: float, dimension: int = 2, c0: float = 1.0,
                    log_exponent: float = 0.0, zero_sum: bool = False,
                    overrides: dict | None = None) -> CoefficientModel:
    """alpha(i) = a(||i||) (1+||i||)^-beta with a(t) = c0 (log(e+t))^p.

    ``zero_sum=True`` (d=2, beta>d) replaces alpha(0) so the total sum
    vanishes identically; the replacement value is computed to ~1e-10 via an
    Euler-Maclaurin-corrected lattice tail, giving a structurally centered
    model with the same tail profile.
    """
    if c0 == 0.0:
        raise CoefficientError("c0 must be nonzero")
    params = {"c0": float(c0), "log_exponent": float(log_exponent)}
    overrides = dict(overrides or {})
    structural = False
    if zero_sum:
        if dimension != 2:
            raise CoefficientError("zero_sum construction implemented for d=2")
        if not beta > dimension:
            raise CoefficientError("zero_sum needs beta > d (absolute summability)")
        s = _isotropic_offsum(beta, c0, log_exponent)
        overrides[(0,) * dimension] = -s
        structural = True
    return CoefficientModel("isotropic", dimension, beta, params, overrides, structural)


def anisotropic_orthant_model(exponents, delta: float, dimension: int = 2,
                              rotation: float = 0.0,
                              origin_zero_radius: float = 1.0,
                              overrides: dict | None = None) -> CoefficientModel:
    """Products |o_k . x|^{-a_k} on the cones |o_k . x| > delta ||x||.

    The rows o_k are an orthonormal frame (a planar rotation by ``rotation``
    for d=2, the identity otherwise); the combined exponent sum(a_k) is the
    effective decay rate.
    """
    a = tuple(float(v) for v in exponents)
    if len(a) != dimension or any(v < 0 for v in a):
        raise CoefficientError("need one nonnegative exponent per dimension")
    beta = sum(a)
    if not 0.0 < delta < 1.0 / math.sqrt(dimension):
        raise CoefficientError("cone half-width delta must lie in (0, 1/sqrt(d))")
    if dimension == 2:
        c, s = math.cos(rotation), math.sin(rotation)
        rows = ((c, s), (-s, c))
    else:
        if rotation != 0.0:
            raise CoefficientError("rotation parameter only supported for d=2")
        rows = tuple(tuple(1.0 if i == j else 0.0 for j in range(dimension))
                     for i in range(dimension))
    c_norm = _orthant_norm_constant(np.asarray(rows), np.asarray(a), delta)
    params = {"rows": rows, "exponents": a, "delta": float(delta),
              "origin_zero_radius": float(origin_zero_radius), "c_norm": c_norm}
    return CoefficientModel("anisotropic-orthant", dimension, beta, params, overrides)


def directional_cones_model(directions, deltas, exponents, dimension: int = 2,
                            origin_zero_radius: float = 1.0,
                            overrides: dict | None = None) -> CoefficientModel:
    """Sum of cone-restricted terms phi_i(x) 1(phi_i > delta_i) / (1+||x||^{a_i}).

    ``directions`` are unit vectors (angles accepted for d=2); the smallest
    exponent a_0 = min a_i drives the decay and only its cones survive in the
    profile limit.
    """
    dirs = []
    for o in directions:
        if np.isscalar(o):
            if dimension != 2:
                raise CoefficientError("angle directions only make sense for d=2")
            dirs.append((math.cos(o), math.sin(o)))
        else:
            v = np.asarray(o, dtype=float)
            dirs.append(tuple(v / np.linalg.norm(v)))
    deltas = tuple(float(v) for v in deltas)
    exps = tuple(float(v) for v in exponents)
    if not (len(dirs) == len(deltas) == len(exps)):
        raise CoefficientError("directions, deltas, exponents must align")
    if any(not 0.0 < dv < 1.0 for dv in deltas):
        raise CoefficientError("cone widths must lie in (0, 1)")
    if any(e <= 0 for e in exps):
        raise CoefficientError("exponents must be positive")
    beta = min(exps)
    c_norm = _cones_norm_constant(np.asarray(dirs), np.asarray(deltas),
                                  np.asarray(exps), dimension)
    params = {"directions": tuple(dirs), "deltas": deltas, "exponents": exps,
              "origin_zero_radius": float(origin_zero_radius), "c_norm": c_norm}
    return CoefficientModel("directional-cones", dimension, beta, params, overrides)


def separable_nd_model(b: BSequence | None = None, *, b_exponent: float = 3.0,
                       b_scale: float = 1.0) -> CoefficientModel:
    """The d=2 product construction: alpha(i,j) = b(i)b(j) off the axes,
    0 on the punctured axes, and -4B^2 at the origin, so that A = 0."""
    b = b or BSequence(exponent=b_exponent, scale=b_scale)
    if b.total <= 0.0:
        raise CoefficientError("b must have positive total mass")
    params = {"b": b, "bpeak": b.prefix or (b.value(1),)}
    return CoefficientModel("separable-nd", 2, b.exponent, params,
                            structural_zero_sum=True)


def _orthant_norm_constant(rows: np.ndarray, a: np.ndarray, delta: float) -> float:
    """sup of prod |o_k . u|^{-a_k} over the closed cone set on the sphere."""
    d = rows.shape[0]
    if d == 2:
        # Max sits where one |coordinate| equals delta.
        v1 = delta ** (-a[0]) * (1.0 - delta**2) ** (-a[1] / 2.0)
        v2 = (1.0 - delta**2) ** (-a[0] / 2.0) * delta ** (-a[1])
        return float(max(v1, v2))
    units = direction_grid(d, 1 << 14)
    phi = np.abs(units @ rows.T)
    ok = np.all(phi >= delta, axis=-1)
    if not ok.any():
        raise CoefficientError("empty cone intersection: delta too large")
    vals = np.prod(phi[ok] ** (-a[None, :]), axis=-1)
    return float(vals.max())


def _cones_norm_constant(dirs, deltas, exps, dimension) -> float:
    a0 = float(np.min(exps))
    lead = exps == a0
    units = direction_grid(dimension, 1 << 16 if dimension == 2 else 1 << 14)
    phi = np.abs(units @ dirs.T)
    psi = np.where(phi > deltas[None, :], phi, 0.0)
    c1 = float(psi[:, lead].sum(axis=-1).max())
    if c1 <= 0.0:
        raise CoefficientError("leading cones cover no direction")
    return c1


def _isotropic_offsum(beta: float, c0: float, p: float, direct_radius: int = 600) -> float:
    """sum_{i != 0} a(||i||)(1+||i||)^-beta for d=2, to ~1e-10 absolute.

    Direct sum over the centered box of half-width R, plus the integral of the
    summand outside the matching half-open cell union with a -Laplacian/24
    Euler-Maclaurin correction; the neglected term is O(R^{-beta-2}).
    """

    def f(s):
        s = np.asarray(s, dtype=np.float64)
        amp = c0 * np.log(math.e + s) ** p if p != 0.0 else c0
        return amp * (1.0 + s) ** (-beta)

    def fprime(s):
        s = np.asarray(s, dtype=np.float64)
        base = (1.0 + s) ** (-beta)
        if p != 0.0:
            lg = np.log(math.e + s)
            return c0 * lg**p * base * (p / ((math.e + s) * lg) - beta / (1.0 + s))
        return -beta * c0 * base / (1.0 + s)

    R = int(direct_radius)
    axis = np.arange(-R, R + 1, dtype=np.float64)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    rr = np.hypot(gx, gy)
    vals = f(rr)
    vals[R, R] = 0.0
    direct = float(vals.sum())

    M = R + 0.5
    whole_head, _ = integrate.quad(lambda s: s * f(s), 0.0, 8.0 * M, limit=400)
    whole = whole_head + improper_power_quad(lambda s: s * f(s), 8.0 * M)
    whole *= 2.0 * math.pi

    def box_radius(theta):
        return M / np.cos(theta)

    def inner(theta):
        rho = box_radius(theta)
        val, _ = integrate.quad(lambda s: s * f(s), 0.0, rho, limit=200)
        return val

    thetas, wts = np.polynomial.legendre.leggauss(64)
    thetas = 0.5 * (thetas + 1.0) * (math.pi / 4.0)
    wts = wts * (math.pi / 8.0)
    box_int = 8.0 * float(np.sum(wts * np.array([inner(t) for t in thetas])))
    tail_f = whole - box_int

    rho = box_radius(thetas)
    tail_lap = -8.0 * float(np.sum(wts * rho * fprime(rho)))
    return direct + tail_f - tail_lap / 24.0


# ---------------------------------------------------------------------------
# Direction grids and gamma
# ---------------------------------------------------------------------------

@lru_cache(maxsize=16)
def direction_grid(dimension: int, n: int = 8192) -> np.ndarray:
    """Unit directions: uniform circle (d=2), Fibonacci sphere (d=3), or a
    product spherical grid in higher dimensions.  Includes the first axis."""
    if dimension == 1:
        return np.array([[1.0], [-1.0]])
    if dimension == 2:
        phi = 2.0 * math.pi * np.arange(n) / n
        return np.column_stack([np.cos(phi), np.sin(phi)])
    if dimension == 3:
        k = np.arange(n, dtype=np.float64)
        golden = (1.0 + math.sqrt(5.0)) / 2.0
        z = 1.0 - (2.0 * k + 1.0) / n
        theta = 2.0 * math.pi * k / golden
        s = np.sqrt(np.maximum(1.0 - z * z, 0.0))
        pts = np.column_stack([s * np.cos(theta), s * np.sin(theta), z])
        return np.concatenate([np.eye(3), pts], axis=0)
    per = max(8, int(round(n ** (1.0 / (dimension - 1)))))
    polar = [np.linspace(0.0, math.pi, per) for _ in range(dimension - 2)]
    azim = [np.linspace(0.0, 2.0 * math.pi, 2 * per, endpoint=False)]
    grids = np.meshgrid(*(polar + azim), indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=-1)
    pts = np.empty((angles.shape[0], dimension))
    sin_prod = np.ones(angles.shape[0])
    for k in range(dimension - 1):
        pts[:, k] = sin_prod * np.cos(angles[:, k])
        sin_prod = sin_prod * np.sin(angles[:, k])
    pts[:, dimension - 1] = sin_prod
    pts = np.concatenate([np.eye(dimension), pts], axis=0)
    return pts


def gamma(model: CoefficientModel, t: float, n_directions: int = 8192) -> float:
    """Radial maximum gamma(t) = max over the direction grid of |alpha(floor(u t))|."""
    if t <= 0.0:
        raise CoefficientError("gamma requires t > 0")
    units = direction_grid(model.dimension, n_directions)
    pts = np.floor(units * t).astype(np.int64)
    return float(np.max(np.abs(model.alpha(pts))))


def gamma_bracket(model: CoefficientModel, t: float,
                  n_directions: int = 8192) -> tuple[float, float]:
    """(grid maximum, certified upper bound) for gamma(t).

    Any floored direction point has norm at least t - sqrt(d), so the radial
    envelope evaluated there dominates the supremum over all directions.
    """
    lo = gamma(model, t, n_directions)
    sd = math.sqrt(model.dimension)
    if t - sd < 1.0:
        # floor points may reach small lattice vectors: bound by the local max
        box = np.arange(-int(sd) - 1, int(sd) + 2)
        grids = np.meshgrid(*([box] * model.dimension), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        hi = max(float(np.max(np.abs(model.alpha(pts)))), float(model.envelope(1.0)))
    else:
        hi = float(model.envelope(t - sd))
    return lo, max(lo, hi)


def g_profile(model: CoefficientModel, t: float, x) -> np.ndarray | float:
    """Rescaled profile alpha(floor(t x)) / gamma(t)."""
    g = gamma(model, t)
    if g == 0.0:
        raise ProfileUndefinedError(f"gamma({t}) = 0: profile undefined at this scale")
    arr = np.asarray(x, dtype=np.float64)
    pts = np.floor(np.atleast_2d(arr) * t).astype(np.int64)
    vals = model.alpha(pts) / g
    if arr.ndim == 1:
        return float(vals[0]) if np.ndim(vals) else float(vals)
    return vals


def g_limit(model: CoefficientModel, x) -> np.ndarray | float:
    return model.g_limit_values(x)


# ---------------------------------------------------------------------------
# Total sum and classification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TotalSum:
    value: float
    tail_bound: float
    structural_zero: bool


def total_sum(model: CoefficientModel, radius: int = 1000) -> TotalSum:
    """A = sum of alpha over ||i||_inf <= radius, with an envelope tail bound."""
    if not model.compact_support and model.beta <= model.dimension:
        raise CoefficientError(
            "total sum requires beta > d (absolute summability not guaranteed)")
    d = model.dimension
    if model.compact_support:
        if model.kind == "delta":
            return TotalSum(1.0, 0.0, False)
        value = math.fsum(v for _, v in model.params["entries"])
        for coord, v in model.overrides.items():
            value += v - dict(model.params["entries"]).get(coord, 0.0)
        return TotalSum(value, 0.0, False)
    axis = np.arange(-radius, radius + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    value = float(np.sum(model.alpha(pts), dtype=np.float64))
    if model.kind == "separable-nd":
        b: BSequence = model.params["b"]
        tb = b.tail_sum(radius + 1)
        tail = 8.0 * b.total * tb + 4.0 * tb * tb
    else:
        tail = linf_tail_sum_bound(model.envelope, radius, d, model.beta)
    return TotalSum(value, float(tail), model.structural_zero_sum)


@dataclass(frozen=True)
class DependenceClass:
    """Regime label with the predicted exponent of lambda in Var(S_n)."""

    label: str  # PSD | SRD | ND-NEE | ND-EE | ND-critical
    predicted_variance_exponent: float
    requires_A_zero: bool
    beta: float
    total: TotalSum | None = None


def _gamma_integral_finite(model: CoefficientModel) -> bool:
    """Whether int t^{d-1} gamma(t) dt converges (SRD precondition)."""
    d = model.dimension
    if model.compact_support:
        return True
    if model.beta > d:
        return True
    if model.beta == d and model.kind == "isotropic":
        return model.params["log_exponent"] < -1.0
    return False


def classify(model: CoefficientModel, radius: int = 1000) -> DependenceClass:
    """Label the dependence regime from (beta, A) per the rate taxonomy."""
    d = model.dimension
    beta = model.beta
    if not model.compact_support and beta < d:
        if beta <= d / 2.0:
            raise UnclassifiableError("beta <= d/2 is outside the square-summable range")
        return DependenceClass("PSD", 3.0 * d - 2.0 * beta, False, beta)
    total = total_sum(model, radius) if (model.compact_support or beta > d) else None
    if beta == d and not model.compact_support:
        if not _gamma_integral_finite(model):
            raise UnclassifiableError(
                "beta = d with divergent radial-envelope integral: not classifiable")
        total = total_sum(model, radius)
    a_zero = model.structural_zero_sum
    if total is not None and not a_zero:
        if abs(total.value) <= total.tail_bound:
            raise UnclassifiableError(
                "total sum indistinguishable from zero at this truncation; "
                "use a structurally centered model or a larger radius")
    if not a_zero:
        return DependenceClass("SRD", float(d), False, beta, total)
    if beta < d + 0.5:
        return DependenceClass("ND-NEE", 3.0 * d - 2.0 * beta, True, beta, total)
    if beta == d + 0.5:
        # 3d - 2 beta = d - 1 here, so both candidate rates coincide.
        return DependenceClass("ND-critical", float(d - 1), True, beta, total)
    if d >= 2:
        return DependenceClass("ND-EE", float(d - 1), True, beta, total)
    raise UnclassifiableError(
        "d = 1 with A = 0 and beta > 3/2: the variance need not diverge")


# ---------------------------------------------------------------------------
# Regular variation diagnostic
# ---------------------------------------------------------------------------

def regular_variation_diagnostic(model: CoefficientModel, t: float,
                                 shell: tuple[float, float],
                                 grid_n: int = 1024) -> float:
    """Midpoint-grid L^b distance between g_t and the profile limit over a shell.

    b = 2 when beta <= d, else 1.  The limit is the gamma-normalized one (zero
    for the separable / compact kinds).
    """
    delta, R = shell
    if not 0.0 < delta < R:
        raise CoefficientError("need 0 < delta < R")
    d = model.dimension
    b = 2.0 if model.beta <= d else 1.0
    g = gamma(model, t)
    if g == 0.0:
        raise ProfileUndefinedError("gamma(t) = 0 in diagnostic")
    n = grid_n if d == 2 else 128
    h = 2.0 * R / n
    axis = -R + h * (np.arange(n) + 0.5)
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g_.ravel() for g_ in grids], axis=-1)
    r = np.linalg.norm(pts, axis=-1)
    mask = (r >= delta) & (r <= R)
    pts = pts[mask]
    gt = model.alpha(np.floor(pts * t).astype(np.int64)) / g
    if model.l2_limit_zero:
        ginf = np.zeros(pts.shape[0])
    else:
        ginf = np.atleast_1d(model.g_limit_values(pts))
    return float(np.sum(np.abs(gt - ginf) ** b) * h**d)
