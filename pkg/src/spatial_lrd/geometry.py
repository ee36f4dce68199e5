"""Prototype regions in (-1/2, 1/2]^d, their inflations, and lattice sites.

A prototype region R0 contains the origin and is star-shaped about it; the
sampling region is the inflation lambda * R0 and the data sites are its
lattice points.  Four prototype kinds are supported:

* ``cube``        the half-open cell (-1/2, 1/2]^d,
* ``ball``        open Euclidean ball of radius r <= 1/2,
* ``ellipsoid``   open axis-aligned ellipsoid with semi-axes <= 1/2,
* ``polar-star``  (d=2) open star-shaped set {s e(phi): s < r(phi)} with the
  radial profile r sampled on a uniform angle grid and linearly interpolated.

Membership uses the open-set convention: points on the topological boundary
are outside (the cube keeps its half-open upper faces so that lattice counts
match the cell (-lambda/2, lambda/2]^d exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.spatial import cKDTree


class GeometryError(ValueError):
    pass


class WindowTooSmallError(GeometryError):
    pass


# ---------------------------------------------------------------------------
# Prototype regions
# ---------------------------------------------------------------------------

class RegionPrototype:
    """A prototype set R0 with membership, boundary distance and ray queries.

    ``kind`` is one of cube / ball / ellipsoid / polar-star, ``parameters``
    the kind-specific real vector, ``dimension`` the ambient dimension d.
    """

    def __init__(self, kind: str, parameters: tuple[float, ...], dimension: int):
        if dimension < 1:
            raise GeometryError("dimension must be a positive integer")
        self.kind = kind
        self.parameters = tuple(float(p) for p in parameters)
        self.dimension = int(dimension)
        self._star_cache: dict | None = None
        self._validate()

    # -- construction -------------------------------------------------------

    def _validate(self) -> None:
        d = self.dimension
        if self.kind == "cube":
            if self.parameters:
                raise GeometryError("cube takes no parameters")
        elif self.kind == "ball":
            (r,) = self.parameters
            if not 0.0 < r <= 0.5:
                raise GeometryError("ball radius must lie in (0, 1/2]")
        elif self.kind == "ellipsoid":
            if len(self.parameters) != d:
                raise GeometryError("ellipsoid needs one semi-axis per dimension")
            if any(not 0.0 < a <= 0.5 for a in self.parameters):
                raise GeometryError("ellipsoid semi-axes must lie in (0, 1/2]")
        elif self.kind == "polar-star":
            if d != 2:
                raise GeometryError("polar-star prototypes are implemented for d=2")
            if len(self.parameters) < 8:
                raise GeometryError("polar-star needs a radial profile on >= 8 angles")
            radii = np.asarray(self.parameters)
            if np.any(radii <= 0.0) or np.any(radii > 0.5):
                raise GeometryError("polar-star radii must lie in (0, 1/2]")
        else:
            raise GeometryError(f"unknown prototype kind {self.kind!r}")

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, RegionPrototype)
            and self.kind == other.kind
            and self.parameters == other.parameters
            and self.dimension == other.dimension
        )

    def __hash__(self) -> int:
        return hash((self.kind, self.parameters, self.dimension))

    def __repr__(self) -> str:
        if self.kind == "polar-star":
            return f"RegionPrototype(polar-star, {len(self.parameters)} angles, d=2)"
        return f"RegionPrototype({self.kind}, {self.parameters}, d={self.dimension})"

    # -- queries -------------------------------------------------------------

    @property
    def bounding_radius(self) -> float:
        """Radius of the smallest origin-centered ball containing R0."""
        if self.kind == "cube":
            return 0.5 * math.sqrt(self.dimension)
        if self.kind == "ball":
            return self.parameters[0]
        if self.kind == "ellipsoid":
            return max(self.parameters)
        return max(self.parameters)

    @property
    def bounding_box_halfwidths(self) -> tuple[float, ...]:
        if self.kind == "cube":
            return (0.5,) * self.dimension
        if self.kind == "ball":
            return (self.parameters[0],) * self.dimension
        if self.kind == "ellipsoid":
            return self.parameters
        return (max(self.parameters),) * 2

    @property
    def volume(self) -> float:
        """Lebesgue measure of R0 (exact except polar-star, trapezoid there)."""
        d = self.dimension
        if self.kind == "cube":
            return 1.0
        unit_ball = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
        if self.kind == "ball":
            return unit_ball * self.parameters[0] ** d
        if self.kind == "ellipsoid":
            return unit_ball * float(np.prod(self.parameters))
        radii = np.asarray(self.parameters)
        return 0.5 * float(np.mean(radii**2)) * 2.0 * math.pi

    def _star(self) -> dict:
        """Lazy polar-star helpers: interpolation grid, boundary tree, error."""
        if self._star_cache is None:
            radii = np.asarray(self.parameters, dtype=np.float64)
            n = radii.size
            grid = 2.0 * math.pi * np.arange(n + 1) / n
            radii_ext = np.concatenate([radii, radii[:1]])
            sub = max(4, 32768 // n)
            phi_fine = 2.0 * math.pi * np.arange(n * sub) / (n * sub)
            r_fine = np.interp(phi_fine, grid, radii_ext)
            pts = np.column_stack([r_fine * np.cos(phi_fine), r_fine * np.sin(phi_fine)])
            tree = cKDTree(pts)
            # Empirical chord error: curve point at each angular midpoint vs chord.
            phi_mid = phi_fine + math.pi / (n * sub)
            r_mid = np.interp(np.mod(phi_mid, 2.0 * math.pi), grid, radii_ext)
            mids_curve = np.column_stack([r_mid * np.cos(phi_mid), r_mid * np.sin(phi_mid)])
            mids_chord = 0.5 * (pts + np.roll(pts, -1, axis=0))
            sagitta = float(np.max(np.linalg.norm(mids_curve - mids_chord, axis=1)))
            self._star_cache = {
                "grid": grid,
                "radii_ext": radii_ext,
                "points": pts,
                "tree": tree,
                "distance_error": sagitta,
            }
        return self._star_cache

    @property
    def distance_error_bound(self) -> float:
        """Worst-case error of boundary_distance (0 for exact kinds)."""
        if self.kind == "polar-star":
            return self._star()["distance_error"]
        return 1e-13

    def membership(self, x: np.ndarray) -> np.ndarray | bool:
        """True iff x lies in R0.  Accepts shape (d,) or (..., d)."""
        pts = np.asarray(x, dtype=np.float64)
        scalar = pts.ndim == 1
        if pts.shape[-1] != self.dimension:
            raise GeometryError(
                f"point dimension {pts.shape[-1]} != region dimension {self.dimension}"
            )
        pts2 = np.atleast_2d(pts)
        if self.kind == "cube":
            inside = np.all((pts2 > -0.5) & (pts2 <= 0.5), axis=-1)
        elif self.kind == "ball":
            inside = np.einsum("...k,...k->...", pts2, pts2) < self.parameters[0] ** 2
        elif self.kind == "ellipsoid":
            scaled = pts2 / np.asarray(self.parameters)
            inside = np.einsum("...k,...k->...", scaled, scaled) < 1.0
        else:
            star = self._star()
            phi = np.mod(np.arctan2(pts2[..., 1], pts2[..., 0]), 2.0 * math.pi)
            r_bound = np.interp(phi, star["grid"], star["radii_ext"])
            inside = np.linalg.norm(pts2, axis=-1) < r_bound
        return bool(inside[0]) if scalar else inside.reshape(pts.shape[:-1])

    def boundary_distance(self, x: np.ndarray) -> np.ndarray | float:
        """Euclidean distance from x to the boundary of R0.

        Exact for cube and ball, root-finder exact for the ellipsoid, and
        polyline-interpolated for polar-star (see ``distance_error_bound``).
        """
        pts = np.asarray(x, dtype=np.float64)
        scalar = pts.ndim == 1
        pts2 = np.atleast_2d(pts).reshape(-1, self.dimension)
        if self.kind == "cube":
            out = _cube_boundary_distance(pts2)
        elif self.kind == "ball":
            out = np.abs(self.parameters[0] - np.linalg.norm(pts2, axis=-1))
        elif self.kind == "ellipsoid":
            out = _ellipsoid_boundary_distance(pts2, np.asarray(self.parameters))
        else:
            out = self._star_boundary_distance(pts2)
        return float(out[0]) if scalar else out.reshape(np.shape(x)[:-1])

    def _star_boundary_distance(self, pts: np.ndarray) -> np.ndarray:
        star = self._star()
        bpts = star["points"]
        n = bpts.shape[0]
        _, idx = star["tree"].query(pts, k=1)
        # Refine with the polyline segments adjacent to the nearest vertex.
        best = np.full(pts.shape[0], np.inf)
        for off in (-2, -1, 0, 1):
            a = bpts[(idx + off) % n]
            b = bpts[(idx + off + 1) % n]
            best = np.minimum(best, _point_segment_distance(pts, a, b))
        return best

    def ray_boundary_crossings(self, origins: np.ndarray, dirs: np.ndarray):
        """Per-ray segments [s_lo, s_hi] where origin + s*dir lies in R0 (s >= 0).

        Returns (starts, ends, ray_index) flat arrays; convex kinds yield at
        most one segment per ray, polar-star may yield several.
        """
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        if self.kind == "cube":
            lo, hi = _ray_box(origins, dirs, np.full(self.dimension, 0.5))
        elif self.kind == "ball":
            lo, hi = _ray_ball(origins, dirs, self.parameters[0])
        elif self.kind == "ellipsoid":
            # Scaling origins and directions together preserves the ray parameter.
            a = np.asarray(self.parameters)
            lo, hi = _ray_ball(origins / a, dirs / a, 1.0)
        else:
            return self._ray_star(origins, dirs)
        ok = hi > lo + 1e-15
        ray_index = np.nonzero(ok)[0]
        return lo[ok], hi[ok], ray_index

    def ray_crossings_convex(self, points: np.ndarray, units: np.ndarray):
        """Broadcast ray-crossing parameters for convex kinds.

        points (K, d) and unit directions (M, d) give (lo, hi) arrays of
        shape (K, M); misses have hi == lo.  Raises for polar-star.
        """
        if self.kind == "polar-star":
            raise GeometryError("broadcast crossings require a convex prototype")
        points = np.asarray(points, dtype=np.float64)
        units = np.asarray(units, dtype=np.float64)
        if self.kind == "ball":
            r = self.parameters[0]
            return _ray_ball_broadcast(points, units, r)
        if self.kind == "ellipsoid":
            a = np.asarray(self.parameters)
            su = units / a
            return _ray_scaled_ball_broadcast(points / a, su, 1.0)
        half = np.full(self.dimension, 0.5)
        lo = np.full((points.shape[0], units.shape[0]), -np.inf)
        hi = np.full((points.shape[0], units.shape[0]), np.inf)
        for k in range(self.dimension):
            u = units[:, k][None, :]
            x = points[:, k][:, None]
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (-half[k] - x) / u
                t2 = (half[k] - x) / u
            finite = np.abs(u) > 1e-300
            t_lo = np.where(finite, np.minimum(t1, t2), -np.inf)
            t_hi = np.where(finite, np.maximum(t1, t2), np.inf)
            miss = (~finite) & (np.abs(x) > half[k])
            lo = np.maximum(lo, t_lo)
            hi = np.minimum(hi, t_hi)
            hi = np.where(miss, lo - 1.0, hi)
        lo = np.maximum(lo, 0.0)
        hi = np.maximum(hi, lo)
        return lo, hi

    def _ray_star(self, origins: np.ndarray, dirs: np.ndarray):
        n_rays = origins.shape[0]
        s_max = np.linalg.norm(origins, axis=1) + self.bounding_radius + 0.05
        n_s = 384
        tgrid = np.linspace(0.0, 1.0, n_s + 1)[1:]
        svals = s_max[:, None] * tgrid[None, :]
        probe = origins[:, None, :] + svals[..., None] * dirs[:, None, :]
        inside = self.membership(probe.reshape(-1, 2)).reshape(n_rays, n_s)
        inside0 = np.asarray(self.membership(origins))
        padded = np.concatenate([inside0[:, None], inside, np.zeros((n_rays, 1), bool)], axis=1)
        flips = padded[:, 1:] != padded[:, :-1]
        ridx, sidx = np.nonzero(flips)
        s_prev = np.where(sidx == 0, 0.0, s_max[ridx] * tgrid[np.maximum(sidx - 1, 0)])
        s_next = np.where(sidx == n_s, s_max[ridx], s_max[ridx] * tgrid[np.minimum(sidx, n_s - 1)])
        lo, hi = s_prev.copy(), s_next.copy()
        state = padded[ridx, sidx]  # inside before the flip
        for _ in range(45):
            mid = 0.5 * (lo + hi)
            m_in = self.membership(origins[ridx] + mid[:, None] * dirs[ridx])
            going_out = state  # flip is inside->outside
            take_lo = m_in == going_out
            lo = np.where(take_lo, mid, lo)
            hi = np.where(take_lo, hi, mid)
        cross = 0.5 * (lo + hi)
        starts, ends, rays = [], [], []
        order = np.lexsort((cross, ridx))
        ridx, cross, state = ridx[order], cross[order], state[order]
        open_s = {}
        for r, s, was_inside in zip(ridx, cross, state):
            if was_inside:  # closing a segment
                starts.append(open_s.pop(r, 0.0))
                ends.append(s)
                rays.append(r)
            else:
                open_s[r] = s
        return (np.asarray(starts), np.asarray(ends), np.asarray(rays, dtype=np.intp))


def cube(dimension: int = 2) -> RegionPrototype:
    return RegionPrototype("cube", (), dimension)


def ball(radius: float = 0.5, dimension: int = 2) -> RegionPrototype:
    return RegionPrototype("ball", (radius,), dimension)


def ellipsoid(semi_axes) -> RegionPrototype:
    semi_axes = tuple(float(a) for a in semi_axes)
    return RegionPrototype("ellipsoid", semi_axes, len(semi_axes))


def polar_star(radii=None, *, base: float = 0.35, amplitude: float = 0.1,
               lobes: int = 5, n_directions: int = 4096) -> RegionPrototype:
    """Star-shaped d=2 prototype from an explicit radial profile or a cosine one."""
    if radii is None:
        phi = 2.0 * math.pi * np.arange(n_directions) / n_directions
        radii = base + amplitude * np.cos(lobes * phi)
    return RegionPrototype("polar-star", tuple(np.asarray(radii, dtype=float)), 2)


# ---------------------------------------------------------------------------
# Distance helpers
# ---------------------------------------------------------------------------

def _cube_boundary_distance(pts: np.ndarray) -> np.ndarray:
    q = np.abs(pts) - 0.5
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
    inside = -np.max(q, axis=-1)
    return np.where(np.any(q > 0.0, axis=-1), outside, inside)


def _point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.maximum(denom, 1e-300), 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.linalg.norm(p - proj, axis=-1)


def _ellipsoid_boundary_distance(pts: np.ndarray, axes: np.ndarray) -> np.ndarray:
    """Exact distance to the ellipsoid sum (x_k/a_k)^2 = 1 via KKT root-finding.

    The nearest boundary point satisfies y_k = a_k^2 p_k / (a_k^2 + t); the
    generic branch solves F(t)=1 by bisection, and for every coordinate with
    p_k = 0 the degenerate branch t = -a_k^2 is enumerated as a candidate.
    """
    p = np.abs(pts)
    n, d = p.shape
    a2 = axes**2
    best = np.full(n, np.inf)

    nz = p > 0.0
    any_nz = nz.any(axis=1)
    # Generic branch restricted to the nonzero coordinates.
    if any_nz.any():
        sel = np.nonzero(any_nz)[0]
        psel = p[sel]
        nzsel = nz[sel]
        a2_min = np.where(nzsel, a2[None, :], np.inf).min(axis=1)
        t_lo = -a2_min + 1e-300
        t_hi = np.maximum(np.linalg.norm(psel * axes, axis=1), a2.max()) + a2.max()

        def F(t):
            denom = a2[None, :] + t[:, None]
            terms = np.where(nzsel, (axes[None, :] * psel / denom) ** 2, 0.0)
            return terms.sum(axis=1)

        while np.any(F(t_hi) > 1.0):
            t_hi = np.where(F(t_hi) > 1.0, 2.0 * t_hi + 1.0, t_hi)
        lo = np.full(len(sel), 0.0) + t_lo
        hi = t_hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            too_big = F(mid) > 1.0
            lo = np.where(too_big, mid, lo)
            hi = np.where(too_big, hi, mid)
        t = 0.5 * (lo + hi)
        denom = a2[None, :] + t[:, None]
        y = np.where(nzsel, a2[None, :] * psel / denom, 0.0)
        best[sel] = np.linalg.norm(psel - y, axis=1)

    # Degenerate branches: one zero coordinate carries the slack.
    for j in range(d):
        cand = ~nz[:, j]
        if not cand.any():
            continue
        sel = np.nonzero(cand)[0]
        psel = p[sel]
        denom = a2[None, :] - a2[j]
        safe = np.abs(denom) > 1e-14
        feasible = np.all(safe | (psel == 0.0), axis=1)
        y = np.zeros_like(psel)
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(safe & (psel > 0), a2[None, :] * psel / denom, 0.0)
        r2 = 1.0 - np.sum(np.where(psel > 0, (y / axes[None, :]) ** 2, 0.0), axis=1)
        feasible &= r2 >= 0.0
        dist2 = np.sum((psel - y) ** 2, axis=1) + a2[j] * np.maximum(r2, 0.0)
        dist = np.where(feasible, np.sqrt(dist2), np.inf)
        best[sel] = np.minimum(best[sel], dist)

    # Origin: nearest boundary point sits on the shortest semi-axis.
    zero = ~any_nz
    if zero.any():
        best[zero] = axes.min()
    return best


def _ray_box(origins, dirs, half):
    """Slab intersection of rays with the box [-half, half]; s >= 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / dirs
    t1 = (-half[None, :] - origins) * inv
    t2 = (half[None, :] - origins) * inv
    t_lo = np.where(np.isfinite(inv), np.minimum(t1, t2), -np.inf)
    t_hi = np.where(np.isfinite(inv), np.maximum(t1, t2), np.inf)
    parallel_out = (~np.isfinite(inv)) & (np.abs(origins) > half[None, :])
    lo = np.max(t_lo, axis=1)
    hi = np.min(t_hi, axis=1)
    hi = np.where(parallel_out.any(axis=1), lo - 1.0, hi)
    lo = np.maximum(lo, 0.0)
    return lo, np.maximum(hi, lo)


def _ray_ball_broadcast(points, units, radius):
    """(K, M) crossing parameters for unit directions against a ball."""
    b = points @ units.T
    c = np.einsum("kd,kd->k", points, points)[:, None] - radius**2
    disc = b * b - c
    ok = disc > 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    lo = np.where(ok, -b - sq, 0.0)
    hi = np.where(ok, -b + sq, 0.0)
    lo = np.maximum(lo, 0.0)
    return lo, np.maximum(hi, lo)


def _ray_scaled_ball_broadcast(points, scaled_units, radius):
    """Ellipsoid case: directions are scaled and no longer unit length."""
    dd = np.einsum("md,md->m", scaled_units, scaled_units)[None, :]
    b = points @ scaled_units.T
    c = np.einsum("kd,kd->k", points, points)[:, None] - radius**2
    disc = b * b - dd * c
    ok = disc > 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    lo = np.where(ok, (-b - sq) / dd, 0.0)
    hi = np.where(ok, (-b + sq) / dd, 0.0)
    lo = np.maximum(lo, 0.0)
    return lo, np.maximum(hi, lo)


def _ray_ball(origins, dirs, radius):
    b = np.einsum("ij,ij->i", origins, dirs)
    dd = np.einsum("ij,ij->i", dirs, dirs)
    c = np.einsum("ij,ij->i", origins, origins) - radius**2
    disc = b * b - dd * c
    ok = disc > 0.0
    sq = np.sqrt(np.maximum(disc, 0.0))
    lo = np.where(ok, (-b - sq) / dd, 0.0)
    hi = np.where(ok, (-b + sq) / dd, 0.0)
    lo = np.maximum(lo, 0.0)
    return lo, np.maximum(hi, lo)


# ---------------------------------------------------------------------------
# Inflated regions and site sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InflatedRegion:
    """The sampling region lambda * R0."""

    prototype: RegionPrototype
    lam: float

    def __post_init__(self):
        if self.lam <= 0.0:
            raise GeometryError("inflation factor must be positive")

    def membership(self, x) -> np.ndarray | bool:
        return self.prototype.membership(np.asarray(x, dtype=np.float64) / self.lam)

    def boundary_distance(self, x) -> np.ndarray | float:
        scaled = self.prototype.boundary_distance(np.asarray(x, dtype=np.float64) / self.lam)
        return scaled * self.lam


@dataclass(frozen=True)
class SiteSet:
    """Lattice sites of an inflated region, in lexicographic order."""

    sites: np.ndarray  # (N, d) int64
    lam: float
    window_lo: tuple[int, ...]
    window_hi: tuple[int, ...]

    @property
    def count(self) -> int:
        return int(self.sites.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.sites.shape[1])

    @property
    def bounding_window(self) -> tuple[tuple[int, ...], tuple[int, ...]]:
        return (self.window_lo, self.window_hi)

    def translated(self, v) -> "SiteSet":
        v = np.asarray(v, dtype=np.int64)
        return SiteSet(
            sites=self.sites + v,
            lam=self.lam,
            window_lo=tuple(int(a + b) for a, b in zip(self.window_lo, v)),
            window_hi=tuple(int(a + b) for a, b in zip(self.window_hi, v)),
        )

    def to_csv(self, path) -> None:
        d = self.dimension
        header = ",".join(f"i{k + 1}" for k in range(d))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(header + "\n")
            for row in self.sites:
                fh.write(",".join(str(int(v)) for v in row) + "\n")


def enumerate_sites(prototype: RegionPrototype, lam: float) -> SiteSet:
    """All lattice points of lambda * R0, ordered lexicographically."""
    if lam < 1.0:
        raise GeometryError("inflation factor must be >= 1")
    d = prototype.dimension
    half = prototype.bounding_box_halfwidths
    axes = []
    for k in range(d):
        hi = math.floor(lam * half[k] + 1e-12)
        lo = -hi
        axes.append(np.arange(lo, hi + 1, dtype=np.int64))
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    inside = prototype.membership(pts.astype(np.float64) / lam)
    sites = pts[inside]
    if sites.shape[0] == 0:
        raise GeometryError("degenerate region: no lattice sites (empty D_n)")
    return SiteSet(
        sites=sites,
        lam=float(lam),
        window_lo=tuple(int(a[0]) for a in axes),
        window_hi=tuple(int(a[-1]) for a in axes),
    )


# ---------------------------------------------------------------------------
# Boundary classification
# ---------------------------------------------------------------------------

INTERIOR, EXTERIOR, BOUNDARY = np.uint8(0), np.uint8(1), np.uint8(2)


@dataclass
class BoundaryClassification:
    """Partition of a lattice window into interior / exterior / boundary sites.

    A site is interior when the open ball B(i; t_n) fits inside the inflated
    region, exterior when it fits inside the complement, boundary otherwise.
    """

    window_lo: tuple[int, ...]
    window_hi: tuple[int, ...]
    t_n: float
    lam: float
    labels: np.ndarray = field(repr=False)  # uint8 grid over the window

    def _coords(self, code) -> np.ndarray:
        idx = np.argwhere(self.labels == code)
        return idx + np.asarray(self.window_lo, dtype=np.int64)

    @property
    def interior_sites(self) -> np.ndarray:
        return self._coords(INTERIOR)

    @property
    def exterior_window_sites(self) -> np.ndarray:
        return self._coords(EXTERIOR)

    @property
    def boundary_sites(self) -> np.ndarray:
        return self._coords(BOUNDARY)

    @property
    def counts(self) -> dict[str, int]:
        return {
            "interior": int(np.count_nonzero(self.labels == INTERIOR)),
            "exterior": int(np.count_nonzero(self.labels == EXTERIOR)),
            "boundary": int(np.count_nonzero(self.labels == BOUNDARY)),
        }

    @property
    def window_size(self) -> int:
        return int(self.labels.size)


def window_grid(window_lo, window_hi) -> np.ndarray:
    axes = [np.arange(lo, hi + 1, dtype=np.int64) for lo, hi in zip(window_lo, window_hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def classify_sites(prototype: RegionPrototype, lam: float, t_n: float,
                   window_lo, window_hi) -> BoundaryClassification:
    """Classify every window site by whether B(i; t_n) fits in R_n or R_n^c."""
    if not 0.0 < t_n < lam:
        raise GeometryError("need 0 < t_n < lambda")
    window_lo = tuple(int(v) for v in window_lo)
    window_hi = tuple(int(v) for v in window_hi)
    half = prototype.bounding_box_halfwidths
    for k in range(prototype.dimension):
        need = math.floor(lam * half[k] + t_n)
        if window_lo[k] > -need or window_hi[k] < need:
            raise WindowTooSmallError(
                f"window axis {k} must cover [-{need}, {need}] to contain the "
                f"t_n-enlargement of the region"
            )
    pts = window_grid(window_lo, window_hi)
    scaled = pts.astype(np.float64) / lam
    inside = prototype.membership(scaled)
    dist = prototype.boundary_distance(scaled) * lam
    labels = np.full(pts.shape[0], BOUNDARY, dtype=np.uint8)
    labels[inside & (dist > t_n)] = INTERIOR
    labels[(~inside) & (dist > t_n)] = EXTERIOR
    shape = tuple(hi - lo + 1 for lo, hi in zip(window_lo, window_hi))
    return BoundaryClassification(
        window_lo=window_lo,
        window_hi=window_hi,
        t_n=float(t_n),
        lam=float(lam),
        labels=labels.reshape(shape),
    )


def default_t_n(lam: float, rule: str = "log") -> float:
    """Shell half-width: max(2, floor(log lambda)) by default; sqrt or fixed."""
    if rule == "log":
        return float(max(2, math.floor(math.log(lam))))
    if rule == "sqrt":
        return float(max(2.0, math.sqrt(lam)))
    if rule.startswith("fixed:"):
        return float(rule.split(":", 1)[1])
    raise GeometryError(f"unknown t_n rule {rule!r}")


# ---------------------------------------------------------------------------
# Boundary-measure diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MeasureEstimate:
    value: float
    standard_error: float


def enlargement_measure(prototype: RegionPrototype, epsilon: float,
                        samples: int = 200_000, seed: int = 0) -> MeasureEstimate:
    """Monte Carlo estimate of the Lebesgue measure of the eps-enlarged boundary.

    Samples the bounding box of the enlargement uniformly and counts points
    whose boundary distance is at most epsilon.
    """
    if not 0.0 < epsilon < 0.25:
        raise GeometryError("epsilon must lie in (0, 1/4)")
    d = prototype.dimension
    half = np.asarray(prototype.bounding_box_halfwidths) + epsilon
    vol_box = float(np.prod(2.0 * half))
    rng = np.random.Generator(np.random.PCG64(seed))
    pts = rng.uniform(-half, half, size=(samples, d))
    hit = prototype.boundary_distance(pts) <= epsilon
    p = float(np.count_nonzero(hit)) / samples
    return MeasureEstimate(
        value=p * vol_box,
        standard_error=vol_box * math.sqrt(max(p * (1.0 - p), 0.0) / samples),
    )


def boundary_condition_diagnostic(prototype: RegionPrototype, f, eps_values,
                                  samples: int = 200_000, seed: int = 1) -> np.ndarray:
    """Ratio of the boundary-shell integral of f(distance) to int_0^eps f.

    Bounded ratios across shrinking eps support the regularity condition used
    by the negative-dependence results (checked for f == 1 and power laws).
    """
    d = prototype.dimension
    out = []
    rng = np.random.Generator(np.random.PCG64(seed))
    for eps in eps_values:
        half = np.asarray(prototype.bounding_box_halfwidths) + eps
        vol_box = float(np.prod(2.0 * half))
        pts = rng.uniform(-half, half, size=(samples, d))
        dist = prototype.boundary_distance(pts)
        mask = dist <= eps
        weights = np.zeros(samples)
        weights[mask] = f(np.maximum(dist[mask], 1e-12))
        numer = vol_box * float(np.mean(weights))
        denom, _ = integrate.quad(f, 0.0, eps, points=[0.0], limit=200)
        out.append(numer / denom)
    return np.asarray(out)
