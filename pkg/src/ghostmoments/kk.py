"""Kramers-Kronig phase retrieval and its sensitivity to instrumental blurring.

The principal-value transform ``-(1/2pi) PV int g(w') / (w' - w) dw'`` is
discretized on the uniform grid by dropping the singular node and weighting
the rest with trapezoidal weights. On a uniform grid this is a discrete
convolution with the antisymmetric kernel ``1 / (m h)``, ``m != 0``.

Blurring pads the input with its edge values before convolving, so a
slowly varying intensity is not dragged down at the grid boundary.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ghostmoments.errors import GridMismatchError, InputError
from ghostmoments.profiles import Grid, SampledProfile, convolve

EDGE_FRACTION = 0.05


@dataclass(frozen=True, eq=False)
class PhaseProfile:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,) or not np.all(np.isfinite(v)):
            raise InputError("phase profile must be finite on every grid point")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points


@dataclass(frozen=True, eq=False)
class TransmissionPair:
    F_eta: SampledProfile
    F_ref: SampledProfile

    def __post_init__(self):
        if self.F_eta.grid != self.F_ref.grid:
            raise GridMismatchError("sample and reference intensities must share a grid")
        if np.any(self.F_ref.values <= 0):
            raise InputError("reference intensity must be strictly positive")
        if np.any(self.F_eta.values <= 0):
            raise InputError("sample intensity must be strictly positive (log transmission)")

    @property
    def eta(self) -> SampledProfile:
        return SampledProfile(self.F_eta.grid, self.F_eta.values / self.F_ref.values)


@dataclass(frozen=True)
class KKErrorReport:
    closed: float
    direct: float
    edge_fraction: float

    @property
    def relative_gap(self) -> float:
        if self.closed == 0.0:
            return 0.0 if self.direct == 0.0 else math.inf
        return abs(self.direct - self.closed) / self.closed

    def to_dict(self) -> dict:
        return {
            "epsilon2_closed": self.closed,
            "epsilon2_direct": self.direct,
            "relative_gap": self.relative_gap,
            "edge_fraction": self.edge_fraction,
        }


def pv_kernel(n: int, h: float) -> np.ndarray:
    """Weights ``1 / (m h)`` for offsets m = -(n-1)..(n-1), zero at m = 0."""
    m = np.arange(-(n - 1), n, dtype=float)
    out = np.zeros_like(m)
    nz = m != 0
    out[nz] = 1.0 / (m[nz] * h)
    return out


def pv_transform(grid: Grid, g: np.ndarray) -> np.ndarray:
    """``-(1/2pi) PV int g(w') / (w' - w) dw'`` at every grid node."""
    n = grid.n_points
    # sum_j w_j g_j / (w_j - w_i) = sum_j (w g)_j k[j - i]; flip k to write it as a convolution
    full = np.convolve(grid.weights * g, pv_kernel(n, grid.step)[::-1])
    return -full[n - 1 : 2 * n - 1] / (2.0 * math.pi)


def kk_phase(eta: SampledProfile) -> PhaseProfile:
    """Phase from a transmission profile via the principal-value transform of log eta."""
    if np.any(eta.values <= 0):
        k = int(np.argmin(eta.values))
        raise InputError(f"transmission must be strictly positive (value {eta.values[k]} at index {k})")
    return PhaseProfile(eta.grid, pv_transform(eta.grid, np.log(eta.values)))


def blur(p: SampledProfile, H: SampledProfile) -> SampledProfile:
    """Convolve with H after padding p with its edge values over the kernel reach."""
    h = p.grid.step
    pad = int(math.ceil(max(abs(H.grid.x_min), abs(H.grid.x_max)) / h)) + 1
    wide = Grid(p.grid.x_min - pad * h, p.grid.x_max + pad * h, p.grid.n_points + 2 * pad)
    padded = SampledProfile(wide, np.pad(p.values, pad, mode="edge"))
    out = convolve(padded, H).values[pad:-pad]
    return SampledProfile(p.grid, out)


def blurred_transmission(pair: TransmissionPair, H: SampledProfile) -> SampledProfile:
    num = blur(pair.F_eta, H).values
    den = blur(pair.F_ref, H).values
    if np.any(den <= 0):
        raise InputError("blurred reference intensity vanishes")
    return SampledProfile(pair.F_eta.grid, num / den)


def _log_blur_ratio(F_eta: SampledProfile, H: SampledProfile) -> np.ndarray:
    if np.any(F_eta.values <= 0):
        raise InputError("sample intensity must be strictly positive")
    blurred = blur(F_eta, H).values
    if np.any(blurred <= 0):
        raise InputError("blurred sample intensity vanishes")
    return np.log(blurred / F_eta.values)


def phase_discrepancy(F_eta: SampledProfile, H: SampledProfile) -> PhaseProfile:
    """Phase error from blurring, assuming the reference is flat on the scale of H."""
    return PhaseProfile(F_eta.grid, pv_transform(F_eta.grid, _log_blur_ratio(F_eta, H)))


def kk_quadratic_error(F_eta: SampledProfile, H: SampledProfile) -> KKErrorReport:
    """Integrated squared phase error, both as ``int dphi^2`` and as ``(1/4) int log^2(...)``.

    ``edge_fraction`` is the share of ``int dphi^2`` collected in the outer 5%
    of bins on each side; a large value means the grid is too narrow.
    """
    g = _log_blur_ratio(F_eta, H)
    w = F_eta.grid.weights
    dphi = pv_transform(F_eta.grid, g)
    direct = float(w @ dphi**2)
    closed = 0.25 * float(w @ g**2)
    n_edge = max(1, int(EDGE_FRACTION * F_eta.grid.n_points))
    edge = float(w[:n_edge] @ dphi[:n_edge] ** 2 + w[-n_edge:] @ dphi[-n_edge:] ** 2)
    return KKErrorReport(closed, direct, edge / direct if direct > 0 else 0.0)
