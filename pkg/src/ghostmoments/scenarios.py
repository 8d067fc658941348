"""Synthetic scenarios standing in for measured data.

``fig2-like`` keeps the roughly 8.6:1 object-to-kernel width ratio of a
7.3 nm supergaussian filter seen through a 0.85 nm instrumental line, mapped
onto the unit scan range.
"""
from __future__ import annotations

from dataclasses import dataclass

from ghostmoments.errors import InputError
from ghostmoments.profiles import (
    Grid,
    ProfileSpec,
    convolve,
    counts_from_density,
    generate,
    kernel_grid,
)

DEFAULT_N = 100_000
DEFAULT_N_KERNEL = 1_000


@dataclass(frozen=True)
class Scenario:
    object_spec: ProfileSpec
    kernel_spec: ProfileSpec
    grid: Grid
    kernel_half_width: float

    def build(self, N: float = DEFAULT_N):
        """Return ``(F, H, expected_counts)`` with ``N`` expected detected events."""
        if not N > 0:
            raise InputError(f"total count N must be positive, got {N}")
        F = generate(self.object_spec, self.grid)
        H = generate(self.kernel_spec, kernel_grid(self.grid.step, self.kernel_half_width))
        return F, H, counts_from_density(convolve(F, H), N)


PRESETS = {
    "fig2-like": Scenario(
        object_spec=ProfileSpec("supergaussian", center=0.40, fwhm=0.35, order=3),
        kernel_spec=ProfileSpec("gaussian", center=0.0, fwhm=0.05),
        grid=Grid(0.0, 1.0, 1001),
        kernel_half_width=0.15,
    ),
}


def preset(name: str, grid: Grid | None = None) -> Scenario:
    try:
        sc = PRESETS[name]
    except KeyError:
        raise InputError(f"unknown preset {name!r}; available: {sorted(PRESETS)}") from None
    if grid is not None:
        sc = Scenario(sc.object_spec, sc.kernel_spec, grid, sc.kernel_half_width)
    return sc


def parse_spec(text: str, *, kernel: bool = False) -> ProfileSpec:
    """``shape,center,fwhm[,order]`` (object) or ``shape,fwhm[,order]`` (kernel, centered at 0)."""
    parts = [p.strip() for p in text.split(",")]
    try:
        if kernel:
            shape, rest = parts[0], parts[1:]
            center = 0.0
        else:
            shape, center, rest = parts[0], float(parts[1]), parts[2:]
        fwhm = float(rest[0]) if rest else 0.0
        order = int(rest[1]) if len(rest) > 1 else None
    except (IndexError, ValueError) as exc:
        raise InputError(f"cannot parse profile spec {text!r}") from exc
    return ProfileSpec(shape, center, fwhm, order)

