"""Raw moments, the kernel conversion matrix and the triangular moment hierarchy."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ghostmoments.errors import InputError, SingularMatrixError
from ghostmoments.profiles import SampledProfile

DEFAULT_ORDER = 4
MAX_WELL_CONDITIONED_ORDER = 8


def _readonly(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class MomentVector:
    """Raw moments of orders 0..K about ``basis_shift``."""

    values: np.ndarray
    basis_shift: float = 0.0

    def __post_init__(self):
        v = _readonly(self.values)
        if v.ndim != 1 or v.size == 0:
            raise InputError("moment vector must be a nonempty 1-D array")
        object.__setattr__(self, "values", v)

    @property
    def order_max(self) -> int:
        return self.values.size - 1

    def __getitem__(self, i):
        return self.values[i]

    def to_dict(self) -> dict:
        return {"order_max": self.order_max, "basis_shift": self.basis_shift, "values": self.values.tolist()}


@dataclass(frozen=True, eq=False)
class ConversionMatrix:
    """Lower-triangular matrix of binomially weighted kernel moments (or its inverse)."""

    entries: np.ndarray
    basis_shift: float = 0.0

    def __post_init__(self):
        e = _readonly(self.entries)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise InputError(f"conversion matrix must be square, got shape {e.shape}")
        if np.any(np.triu(e, 1) != 0):
            raise InputError("conversion matrix must be lower triangular")
        object.__setattr__(self, "entries", e)

    @property
    def order_max(self) -> int:
        return self.entries.shape[0] - 1

    def to_dict(self) -> dict:
        return {"order_max": self.order_max, "basis_shift": self.basis_shift, "entries": self.entries.tolist()}


def _check_order(K: int) -> int:
    if int(K) != K or K < 0:
        raise InputError(f"moment order must be a nonnegative integer, got {K}")
    if K > MAX_WELL_CONDITIONED_ORDER:
        warnings.warn(f"moment order {K} > {MAX_WELL_CONDITIONED_ORDER}: the hierarchy is poorly conditioned", stacklevel=3)
    return int(K)


def _power_moments(p: SampledProfile, K: int, shift: float) -> np.ndarray:
    t = p.x - shift
    weights = p.grid.weights * p.values
    out = np.empty(K + 1)
    # order 0 computed exactly as quadrature() does, so diag(C) == quadrature(H)
    out[0] = p.grid.weights @ p.values
    power = t.copy()
    for i in range(1, K + 1):
        out[i] = weights @ power
        power = power * t
    return out


def raw_moments(p: SampledProfile, K: int = DEFAULT_ORDER, shift: float = 0.0) -> MomentVector:
    """Trapezoidal moments ``int (x - shift)^i p(x) dx`` for i = 0..K."""
    K = _check_order(K)
    if p.kind != "density":
        raise InputError("raw_moments expects a density; use estimate_moments_from_counts for counts")
    return MomentVector(_power_moments(p, K, shift), float(shift))


def conversion_matrix(H: SampledProfile, K: int = DEFAULT_ORDER, shift: float = 0.0) -> ConversionMatrix:
    """``C[i, j] = binom(i, j) * int H(z) z^(i-j) dz`` for j <= i.

    Kernel moments are taken about the kernel origin whatever the basis shift
    of the profile moments: ``(x - c)^i = ((y - c) + z)^i`` expands with powers
    of the kernel displacement ``z`` only. ``shift`` labels the basis C acts on.
    """
    K = _check_order(K)
    if H.kind != "density":
        raise InputError("conversion_matrix expects a density kernel")
    mu = _power_moments(H, K, 0.0)
    C = np.zeros((K + 1, K + 1))
    for i in range(K + 1):
        for j in range(i + 1):
            C[i, j] = math.comb(i, j) * mu[i - j]
    return ConversionMatrix(C, float(shift))


def invert_lower_triangular(C: ConversionMatrix) -> ConversionMatrix:
    """Inverse of C by forward substitution, column by column."""
    A = C.entries
    n = A.shape[0]
    diag = np.diag(A)
    scale = np.max(np.abs(A))
    for i, d in enumerate(diag):
        if not abs(d) > 1e-12 * scale:
            raise SingularMatrixError(f"conversion matrix is singular: diagonal entry {i} is {d!r}")
    inv = np.zeros_like(A)
    for col in range(n):
        inv[col, col] = 1.0 / A[col, col]
        for i in range(col + 1, n):
            inv[i, col] = -(A[i, col:i] @ inv[col:i, col]) / A[i, i]
    return ConversionMatrix(inv, C.basis_shift)


def _check_compatible(m: MomentVector, C: ConversionMatrix) -> None:
    if m.order_max != C.order_max:
        raise InputError(f"order mismatch: moments K={m.order_max}, matrix K={C.order_max}")
    if m.basis_shift != C.basis_shift:
        raise InputError(f"basis shift mismatch: moments {m.basis_shift}, matrix {C.basis_shift}")


def deconvolve_moments(m: MomentVector, Cinv: ConversionMatrix) -> MomentVector:
    """True-line moments ``M = C^-1 m``; pass the inverse from invert_lower_triangular."""
    _check_compatible(m, Cinv)
    return MomentVector(Cinv.entries @ m.values, m.basis_shift)


def estimate_moments_from_counts(counts: SampledProfile, K: int = DEFAULT_ORDER, shift: float = 0.0):
    """Count-weighted moments ``(1/N) sum_k (x_k - shift)^i N(x_k)``.

    Returns ``(MomentVector, N)`` with ``N`` the total number of events.
    """
    K = _check_order(K)
    if counts.kind != "counts":
        raise InputError("estimate_moments_from_counts expects a counts profile")
    c = counts.values
    N = float(np.sum(c))
    if not N > 0:
        raise InputError("counts profile is empty (total count 0)")
    t = counts.x - shift
    out = np.empty(K + 1)
    out[0] = 1.0
    power = t.copy()
    for i in range(1, K + 1):
        out[i] = (c @ power) / N
        power = power * t
    return MomentVector(out, float(shift)), N


def normalized_moments(M: MomentVector) -> MomentVector:
    m0 = M.values[0]
    if not abs(m0) > 1e-12:
        raise InputError(f"zeroth moment {m0!r} vanishes; cannot normalize")
    if m0 == 1.0:
        return M
    return MomentVector(M.values / m0, M.basis_shift)
