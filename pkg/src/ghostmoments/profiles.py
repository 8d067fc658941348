"""Tabulated 1-D profiles on uniform grids.

Profiles are either densities (integrated with the trapezoidal rule) or
per-bin counts (integrated by plain summation, i.e. against the counting
measure of the detector bins).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
from scipy import integrate, special

from ghostmoments.errors import GridMismatchError, InputError

Kind = Literal["density", "counts"]
SHAPES = ("gaussian", "lorentzian", "supergaussian", "delta_bin")

STEP_RTOL = 1e-9
OUTSIDE_MASS_WARN = 1e-3


@dataclass(frozen=True)
class Grid:
    x_min: float = 0.0
    x_max: float = 1.0
    n_points: int = 1001

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise InputError(f"grid needs at least 2 points, got {self.n_points}")
        if not (math.isfinite(self.x_min) and math.isfinite(self.x_max)) or self.x_max <= self.x_min:
            raise InputError(f"grid bounds must satisfy x_min < x_max, got [{self.x_min}, {self.x_max}]")
        object.__setattr__(self, "n_points", int(self.n_points))
        object.__setattr__(self, "x_min", float(self.x_min))
        object.__setattr__(self, "x_max", float(self.x_max))

    @classmethod
    def parse(cls, text: str) -> Grid:
        """Build a grid from ``MIN:MAX:N``."""
        try:
            lo, hi, n = text.split(":")
            return cls(float(lo), float(hi), int(n))
        except ValueError as exc:
            raise InputError(f"bad grid specification {text!r}, expected MIN:MAX:N") from exc

    @property
    def step(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @cached_property
    def points(self) -> np.ndarray:
        x = self.x_min + np.arange(self.n_points) * self.step
        # pin the end node so a grid rebuilt from its own points compares equal
        x[-1] = self.x_max
        x.flags.writeable = False
        return x

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights."""
        w = np.full(self.n_points, self.step)
        w[0] = w[-1] = 0.5 * self.step
        w.flags.writeable = False
        return w

    def same_step(self, other: Grid) -> bool:
        return abs(self.step - other.step) <= STEP_RTOL * max(self.step, other.step)

    def contains(self, x: float) -> bool:
        return self.x_min <= x <= self.x_max

    def as_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points}


def kernel_grid(step: float, half_width: float) -> Grid:
    """Symmetric grid around 0 with the given step, wide enough to cover ``half_width``."""
    if step <= 0 or half_width <= 0:
        raise InputError("kernel grid needs positive step and half width")
    m = max(1, math.ceil(half_width / step - 1e-9))
    return Grid(-m * step, m * step, 2 * m + 1)


@dataclass(frozen=True, eq=False)
class SampledProfile:
    grid: Grid
    values: np.ndarray
    kind: Kind = "density"

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n_points,):
            raise InputError(f"expected {self.grid.n_points} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InputError("profile values must be finite")
        if np.any(v < 0):
            k = int(np.argmin(v))
            raise InputError(f"profile values must be nonnegative (value {v[k]} at index {k})")
        if self.kind not in ("density", "counts"):
            raise InputError(f"unknown profile kind {self.kind!r}")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.grid.points

    @property
    def is_integral(self) -> bool:
        return bool(np.all(self.values == np.round(self.values)))

    @property
    def total(self) -> float:
        """Total count (counts) or trapezoidal mass (density)."""
        return integrate_against(self, None)

    def scaled(self, factor: float) -> SampledProfile:
        return SampledProfile(self.grid, self.values * factor, self.kind)


def integrate_against(p: SampledProfile, g: np.ndarray | None) -> float:
    """Integrate ``g(x)`` against the measure described by ``p``.

    Densities use trapezoidal weights; counts are summed bin by bin.
    """
    integrand = p.values if g is None else g * p.values
    if p.kind == "density":
        return float(p.grid.weights @ integrand)
    return float(np.sum(integrand))


@dataclass(frozen=True)
class ProfileSpec:
    shape: str
    center: float
    fwhm: float = 0.0
    order: int | None = None
    amplitude_mass: float = 1.0

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise InputError(f"unknown shape {self.shape!r}; choose from {SHAPES}")
        if self.shape != "delta_bin" and not self.fwhm > 0:
            raise InputError(f"fwhm must be positive for {self.shape}, got {self.fwhm}")
        if self.shape == "supergaussian":
            if self.order is None or int(self.order) != self.order or self.order < 1:
                raise InputError("supergaussian needs a positive integer order")
        if not self.amplitude_mass > 0:
            raise InputError(f"amplitude_mass must be positive, got {self.amplitude_mass}")


def _supergaussian_width(fwhm: float, order: int) -> float:
    return 0.5 * fwhm / math.log(2.0) ** (1.0 / (2 * order))


def _analytic_cdf(spec: ProfileSpec, x: float) -> float:
    t = x - spec.center
    if spec.shape == "lorentzian":
        return 0.5 + math.atan(t / (0.5 * spec.fwhm)) / math.pi
    order = 1 if spec.shape == "gaussian" else spec.order
    w = _supergaussian_width(spec.fwhm, order)
    tail = 0.5 * special.gammaincc(1.0 / (2 * order), (abs(t) / w) ** (2 * order))
    return tail if t < 0 else 1.0 - tail


def outside_mass_fraction(spec: ProfileSpec, grid: Grid) -> float:
    """Fraction of the untruncated profile's mass falling outside the grid."""
    if spec.shape == "delta_bin":
        return 0.0
    return _analytic_cdf(spec, grid.x_min) + 1.0 - _analytic_cdf(spec, grid.x_max)


def _shape_values(spec: ProfileSpec, x: np.ndarray) -> np.ndarray:
    t = x - spec.center
    if spec.shape == "gaussian":
        sigma = spec.fwhm / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return np.exp(-0.5 * (t / sigma) ** 2)
    if spec.shape == "supergaussian":
        w = _supergaussian_width(spec.fwhm, spec.order)
        return np.exp(-((np.abs(t) / w) ** (2 * spec.order)))
    if spec.shape == "lorentzian":
        return 1.0 / (1.0 + (t / (0.5 * spec.fwhm)) ** 2)
    raise AssertionError(spec.shape)


def generate(spec: ProfileSpec, grid: Grid) -> SampledProfile:
    """Tabulate a synthetic lineshape, renormalized so its trapezoidal mass is exact."""
    if spec.shape == "delta_bin":
        if not grid.contains(spec.center):
            raise InputError(f"delta_bin center {spec.center} outside grid [{grid.x_min}, {grid.x_max}]")
        k = int(round((spec.center - grid.x_min) / grid.step))
        values = np.zeros(grid.n_points)
        values[k] = spec.amplitude_mass / grid.weights[k]
        return SampledProfile(grid, values)

    lost = outside_mass_fraction(spec, grid)
    if lost > OUTSIDE_MASS_WARN:
        warnings.warn(f"{spec.shape} profile loses {lost:.3g} of its mass outside the grid", stacklevel=2)
    values = _shape_values(spec, grid.points)
    mass = float(grid.weights @ values)
    if mass <= 0:
        raise InputError(f"{spec.shape} profile has no mass on the grid")
    return SampledProfile(grid, values * (spec.amplitude_mass / mass))


def identity_kernel(step: float, half_width: float | None = None) -> SampledProfile:
    """Unit-mass point kernel at 0 on a symmetric kernel grid."""
    g = kernel_grid(step, half_width if half_width is not None else 5 * step)
    return generate(ProfileSpec("delta_bin", 0.0), g)


def quadrature(p: SampledProfile) -> float:
    if p.kind != "density":
        raise InputError("quadrature expects a density profile")
    return float(p.grid.weights @ p.values)


def normalize(p: SampledProfile, target_mass: float = 1.0) -> SampledProfile:
    if not target_mass > 0:
        raise InputError(f"target mass must be positive, got {target_mass}")
    mass = quadrature(p)
    if mass <= 0:
        raise InputError("cannot normalize a profile with zero mass")
    return p.scaled(target_mass / mass)


def convolve(F: SampledProfile, H: SampledProfile) -> SampledProfile:
    """Discrete convolution ``f(x_k) = h * sum_j H(x_k - x_j) F(x_j)`` on F's grid.

    H lives in kernel coordinates; it is linearly interpolated and taken as 0
    outside its grid.
    """
    if F.kind != "density" or H.kind != "density":
        raise InputError("convolve expects density profiles")
    if not F.grid.same_step(H.grid):
        raise GridMismatchError(f"grid steps differ: {F.grid.step!r} vs {H.grid.step!r}")
    if not H.grid.contains(0.0):
        raise InputError("kernel grid must contain 0")
    h = F.grid.step
    n = F.grid.n_points
    lo = max(-(n - 1), math.floor(H.grid.x_min / h) - 1)
    hi = min(n - 1, math.ceil(H.grid.x_max / h) + 1)
    offsets = np.arange(lo, hi + 1) * h
    kernel = np.interp(offsets, H.x, H.values, left=0.0, right=0.0)
    full = np.convolve(F.values, kernel)
    return SampledProfile(F.grid, h * full[-lo : n - lo])


def raster_kernel(S: SampledProfile, epsilon: float) -> SampledProfile:
    """Slit-integrated response ``H(x) = Sigma(x + eps) - Sigma(x - eps)``.

    ``Sigma`` is the cumulative trapezoidal integral of the optical response S.
    """
    if S.kind != "density":
        raise InputError("raster_kernel expects a density profile")
    half_extent = 0.5 * (S.grid.x_max - S.grid.x_min)
    if not epsilon > 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    if epsilon < 0.5 * S.grid.step * (1 - STEP_RTOL):
        raise InputError(f"slit width 2*epsilon={2 * epsilon} is narrower than one grid step")
    if epsilon > half_extent:
        raise InputError(f"epsilon {epsilon} exceeds half the kernel grid extent {half_extent}")
    x = S.x
    cum = integrate.cumulative_trapezoid(S.values, x, initial=0.0)
    upper = np.interp(x + epsilon, x, cum, left=0.0, right=cum[-1])
    lower = np.interp(x - epsilon, x, cum, left=0.0, right=cum[-1])
    # interpolation of a monotone table can round to tiny negatives
    return SampledProfile(S.grid, np.clip(upper - lower, 0.0, None))


def counts_from_density(p: SampledProfile, total: float) -> SampledProfile:
    """Expected per-bin counts proportional to ``p`` with exactly ``total`` events."""
    if not total > 0:
        raise InputError(f"total count must be positive, got {total}")
    s = float(np.sum(p.values))
    if s <= 0:
        raise InputError("cannot build counts from a zero profile")
    return SampledProfile(p.grid, p.values * (total / s), "counts")


def density_from_counts(c: SampledProfile) -> SampledProfile:
    """Counts divided by the bin width."""
    return SampledProfile(c.grid, c.values / c.grid.step, "density")
