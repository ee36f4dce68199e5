"""Shared numeric helpers: seeding, compensated sums, lattice tail bounds."""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate

_MASK64 = (1 << 64) - 1
_GOLDEN64 = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One step of the splitmix64 finalizer (Steele et al.), on 64-bit ints."""
    z = (state + _GOLDEN64) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_stream_seed(base_seed: int, index: int) -> int:
    """Per-replicate stream seed: mix the base seed with the replicate index.

    Two splitmix64 rounds on (base_seed advanced by index) give well separated
    64-bit seeds for any (base, index) pair without storing generator state.
    """
    s = (int(base_seed) + (int(index) + 1) * _GOLDEN64) & _MASK64
    return splitmix64(splitmix64(s))


def compensated_sum(values: np.ndarray, chunk: int = 1 << 14) -> float:
    """Deterministic compensated sum of a float array.

    Pairwise-summed chunks (fixed C-order) are combined with math.fsum, so the
    result does not depend on thread count and the cross-chunk accumulation is
    exact.  Good to ~1e-15 relative even when entries span many magnitudes.
    """
    flat = np.ascontiguousarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        return 0.0
    if flat.size <= chunk:
        return math.fsum(flat.tolist())
    n_full = (flat.size // chunk) * chunk
    partials = flat[:n_full].reshape(-1, chunk).sum(axis=1)
    rest = flat[n_full:]
    pieces = partials.tolist()
    if rest.size:
        pieces.append(math.fsum(rest.tolist()))
    return math.fsum(pieces)


def compensated_dot(a: np.ndarray, b: np.ndarray, chunk: int = 1 << 16) -> float:
    """Deterministic dot product: chunked products, fsum across chunk sums."""
    a = a.ravel()
    b = b.ravel()
    if a.size != b.size:
        raise ValueError("length mismatch in dot product")
    parts = []
    for lo in range(0, a.size, chunk):
        hi = min(lo + chunk, a.size)
        parts.append(float(np.sum(a[lo:hi] * b[lo:hi])))
    return math.fsum(parts)


def linf_shell_counts(k: np.ndarray, dim: int) -> np.ndarray:
    """Number of lattice points with ||i||_inf == k (k >= 1)."""
    k = np.asarray(k, dtype=np.float64)
    return (2.0 * k + 1.0) ** dim - (2.0 * k - 1.0) ** dim


def linf_tail_sum_bound(envelope, start: int, dim: int, power: float,
                        direct_upto: int | None = None) -> float:
    """Upper bound for sum of envelope(||i||) over lattice points ||i||_inf > start.

    envelope must be a nonincreasing radial bound for the summand; ``power``
    is an exponent with envelope(t) * t^power bounded nonincreasing at large t,
    used only to integrate the remainder beyond the directly summed shells.
    """
    if start < 1:
        start = 1
    upto = direct_upto or max(4 * start, 4096)
    ks = np.arange(start + 1, upto + 1, dtype=np.float64)
    total = 0.0
    if ks.size:
        total += float(np.sum(linf_shell_counts(ks, dim) * envelope(ks)))
    # Remainder: shell count <= 2 d (2t+1)^{d-1}; integrate the envelope.
    def integrand(t):
        return 2.0 * dim * (2.0 * t + 1.0) ** (dim - 1) * envelope(t)

    if power > dim:
        rem = improper_power_quad(integrand, float(upto))
    else:
        rem = math.inf
    return total + rem


def improper_power_quad(fn, a: float) -> float:
    """Integral of fn over [a, inf) via the u = a/t substitution.

    Suitable for power-decay integrands, where direct quad to infinity
    converges slowly.
    """
    if a <= 0.0:
        raise ValueError("lower limit must be positive")

    def transformed(u):
        t = a / u
        return fn(t) * a / (u * u)

    val, _ = integrate.quad(transformed, 0.0, 1.0, limit=200)
    return float(val)


def kolmogorov_threshold(n: int, level: float = 0.01) -> float:
    """Critical KS distance at the given level with Stephens' finite-n correction."""
    from scipy.special import kolmogi

    c = float(kolmogi(level))
    return c / (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n))


def next_fast_size(n: int) -> int:
    from scipy.fft import next_fast_len

    return int(next_fast_len(int(n), real=True))


def format_float(x: float) -> str:
    """Floats rendered with 17 significant digits, diff-stable across runs."""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def json_canonical(obj, indent: int = 0) -> str:
    """Serialize nested dict/list/scalars to JSON with .17g floats.

    Keys keep insertion order so reruns are byte identical.
    """
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = ",\n".join(
            f'{pad}  "{k}": {json_canonical(v, indent + 2)}' for k, v in obj.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if len(obj) == 0:
            return "[]"
        items = ", ".join(json_canonical(v, indent) for v in obj)
        return "[" + items + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, float):
        if math.isnan(obj) or math.isinf(obj):
            return f'"{format_float(obj)}"'
        return format_float(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return '"' + str(obj).replace("\\", "\\\\").replace('"', '\\"') + '"'
