"""Influence functions and semiparametric Cramer-Rao bounds for linear moment combinations.

An influence function here is a polynomial ``I(x) = sum_j a_j (x - c)^j / N``.
Its reproducing property ``int I f dx = beta`` and its second moment against
the measured intensity ``int I^2 f dx`` give the unconstrained bound. Imposing
``M0 = 1`` subtracts the constant ``beta / (tau N)`` from I, which lowers the
bound by exactly ``beta^2 / (tau N)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ghostmoments.errors import GridMismatchError, InputError
from ghostmoments.moments import (
    ConversionMatrix,
    MomentVector,
    conversion_matrix,
    estimate_moments_from_counts,
    invert_lower_triangular,
)
from ghostmoments.profiles import SampledProfile, integrate_against, normalize, quadrature

NORMALIZATION_RTOL = 1e-6


@dataclass(frozen=True, eq=False)
class InfluenceCoefficients:
    mu: np.ndarray
    coeffs: np.ndarray
    N: float
    tau: float = 1.0
    basis_shift: float = 0.0
    beta: float | None = None

    def __post_init__(self):
        if not self.N > 0:
            raise InputError(f"N must be positive, got {self.N}")
        if not self.tau > 0:
            raise InputError(f"tau must be positive, got {self.tau}")
        object.__setattr__(self, "mu", np.asarray(self.mu, dtype=float))
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))

    def __call__(self, x) -> np.ndarray:
        t = np.asarray(x, dtype=float) - self.basis_shift
        # Horner on the monomial coefficients
        out = np.zeros_like(t)
        for a in self.coeffs[::-1]:
            out = out * t + a
        return out / self.N


def linear_combination(mu, M: MomentVector) -> float:
    mu = np.asarray(mu, dtype=float)
    if mu.shape != M.values.shape:
        raise InputError(f"weights have length {mu.size}, moments have {M.values.size}")
    return float(mu @ M.values)


def unit_weights(i: int, K: int) -> np.ndarray:
    mu = np.zeros(K + 1)
    mu[i] = 1.0
    return mu


def influence_function(mu, Cinv: ConversionMatrix, N: float, tau: float = 1.0) -> InfluenceCoefficients:
    """Coefficients ``a_j = sum_i mu_i Cinv[i, j]``; ``Cinv`` must already be inverted."""
    mu = np.asarray(mu, dtype=float)
    if mu.size != Cinv.order_max + 1:
        raise InputError(f"weights have length {mu.size}, matrix order is {Cinv.order_max}")
    return InfluenceCoefficients(mu, mu @ Cinv.entries, N, tau, Cinv.basis_shift)


def _check_normalization(I: InfluenceCoefficients, f: SampledProfile) -> None:
    expected = I.tau * I.N
    total = integrate_against(f, None)
    if abs(total - expected) > NORMALIZATION_RTOL * expected:
        raise InputError(
            f"measured intensity integrates to {total!r}, expected tau*N = {expected!r}; "
            "normalize f to the total number of events"
        )


def reproduce(I: InfluenceCoefficients, f: SampledProfile) -> float:
    """``int I(x) f(x) dx``; equals beta for a valid influence function."""
    return integrate_against(f, I(f.x))


def crb_unconstrained(I: InfluenceCoefficients, f: SampledProfile) -> float:
    """``int I^2 f dx``; ``f`` must integrate to ``tau * N``."""
    _check_normalization(I, f)
    return integrate_against(f, I(f.x) ** 2)


def effective_influence(I: InfluenceCoefficients, beta: float, N: float | None = None,
                        tau: float | None = None) -> InfluenceCoefficients:
    N = I.N if N is None else N
    tau = I.tau if tau is None else tau
    if not N > 0 or not tau > 0:
        raise InputError(f"N and tau must be positive, got N={N}, tau={tau}")
    coeffs = I.coeffs.copy()
    # I is stored as coeffs / I.N, so an offset of beta/(tau N) on I is this on coeffs[0]
    coeffs[0] -= beta * I.N / (tau * N)
    return replace(I, coeffs=coeffs, tau=tau, beta=beta)


def crb_constrained(I: InfluenceCoefficients, f: SampledProfile, beta: float) -> float:
    """``int I_eff^2 f dx`` with ``I_eff = I - beta / (tau N)``."""
    return crb_unconstrained(effective_influence(I, beta), f)


@dataclass(frozen=True)
class CrbRow:
    label: str
    order: int
    beta_hat: float
    beta_used: float
    crb_unconstrained: float
    crb_constrained: float
    N: float
    K: int
    tau: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "i": self.order,
            "beta_hat": self.beta_hat,
            "beta_used": self.beta_used,
            "crb_unconstrained": self.crb_unconstrained,
            "crb_constrained": self.crb_constrained,
            "N": self.N,
            "K": self.K,
            "tau": self.tau,
        }


@dataclass(frozen=True)
class CrbReport:
    rows: tuple[CrbRow, ...]
    metadata: dict = field(default_factory=dict)

    def row(self, i: int) -> CrbRow:
        return next(r for r in self.rows if r.order == i)

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "metadata": dict(self.metadata)}


def crb_report(f_counts: SampledProfile, H: SampledProfile, K: int = 4, shift: float = 0.0,
               tau: float | None = None, beta_truth: MomentVector | None = None) -> CrbReport:
    """Plug-in estimates and both bounds for each moment M_1..M_K.

    ``f_counts`` are per-bin counts (observed or expected); bounds integrate
    against them bin by bin. ``tau`` rescales the kernel to that transmission;
    by default it is the kernel's own mass. With ``beta_truth`` (moments of the
    true line about the same shift) the constrained bound uses the true value
    instead of the plug-in estimate.
    """
    if f_counts.kind != "counts":
        raise InputError("crb_report expects a counts profile for f")
    if not f_counts.grid.same_step(H.grid):
        raise GridMismatchError(f"f and H grid steps differ: {f_counts.grid.step!r} vs {H.grid.step!r}")
    if tau is not None:
        H = normalize(H, tau)
    tau = quadrature(H)
    m_hat, n_detected = estimate_moments_from_counts(f_counts, K, shift)
    N = n_detected / tau
    Cinv = invert_lower_triangular(conversion_matrix(H, K, shift))
    M_hat = Cinv.entries @ (m_hat.values * tau)
    if beta_truth is not None and beta_truth.order_max < K:
        raise InputError(f"truth moments have order {beta_truth.order_max} < K={K}")

    rows = []
    for i in range(1, K + 1):
        I = influence_function(unit_weights(i, K), Cinv, N, tau)
        beta_hat = float(M_hat[i])
        beta_used = beta_hat if beta_truth is None else float(beta_truth.values[i])
        rows.append(CrbRow(
            label=f"M{i}",
            order=i,
            beta_hat=beta_hat,
            beta_used=beta_used,
            crb_unconstrained=crb_unconstrained(I, f_counts),
            crb_constrained=crb_constrained(I, f_counts, beta_used),
            N=N,
            K=K,
            tau=tau,
        ))
    metadata = {
        "beta_source": "plug-in" if beta_truth is None else "truth",
        "measure": "counts per bin (sum over bins)",
        "basis_shift": shift,
        "N_detected": n_detected,
        "grid": f_counts.grid.as_dict(),
        "kernel_grid": H.grid.as_dict(),
    }
    return CrbReport(tuple(rows), metadata)
