"""Poisson Monte Carlo for the moment estimators.

Every trial owns its random streams, derived from ``(seed, trial)`` through
``numpy.random.SeedSequence``, so results do not depend on how trials are
scheduled across workers. Each trial gets two child streams: one for the
measured spectrum and one for the kernel. A kernel-noise run and an f-only
run with the same seed therefore see identical spectrum draws.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ghostmoments.crb import crb_report
from ghostmoments.errors import GridMismatchError, InputError
from ghostmoments.moments import conversion_matrix, invert_lower_triangular
from ghostmoments.profiles import SampledProfile, density_from_counts, normalize, quadrature

MAX_REDRAWS = 1000


@dataclass(frozen=True)
class McConfig:
    trials: int = 4000
    seed: int = 0
    K: int = 4
    noise_on_kernel: bool = False
    constrained: bool = True
    shift: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if int(self.trials) != self.trials or self.trials < 2:
            raise InputError(f"need at least 2 trials, got {self.trials}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise InputError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.K) != self.K or self.K < 1:
            raise InputError(f"K must be a positive integer, got {self.K}")
        if self.workers < 1:
            raise InputError("workers must be >= 1")


@dataclass(frozen=True)
class McRow:
    order: int
    var_empirical: float
    mean_empirical: float
    crb_unconstrained: float
    crb_constrained: float
    beta_template: float
    inflation_ratio: float | None = None

    def to_dict(self) -> dict:
        d = {
            "i": self.order,
            "var_empirical": self.var_empirical,
            "mean_empirical": self.mean_empirical,
            "crb_unconstrained": self.crb_unconstrained,
            "crb_constrained": self.crb_constrained,
            "beta_template": self.beta_template,
        }
        if self.inflation_ratio is not None:
            d["inflation_ratio"] = self.inflation_ratio
        return d


@dataclass(frozen=True)
class McReport:
    rows: tuple[McRow, ...]
    trials: int
    seed: int
    rejected_trials: int
    N: float
    constrained: bool
    noise_on_kernel: bool
    N_H: float | None = None
    f_only_variances: tuple[float, ...] | None = None
    notes: dict = field(default_factory=dict)

    def row(self, i: int) -> McRow:
        return next(r for r in self.rows if r.order == i)

    @property
    def variance_rel_se(self) -> float:
        """Relative standard error of a sample variance, sqrt(2 / (trials - 1))."""
        return math.sqrt(2.0 / (self.trials - 1))

    def to_dict(self) -> dict:
        d = {
            "rows": [r.to_dict() for r in self.rows],
            "trials": self.trials,
            "seed": self.seed,
            "rejected_trials": self.rejected_trials,
            "N": self.N,
            "constrained": self.constrained,
            "noise_on_kernel": self.noise_on_kernel,
            "variance_rel_se": self.variance_rel_se,
            "notes": dict(self.notes),
        }
        if self.N_H is not None:
            d["N_H"] = self.N_H
        return d


def trial_generators(seed: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (spectrum, kernel) generators for one trial."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(trial),))
    f_ss, h_ss = ss.spawn(2)
    return np.random.Generator(np.random.PCG64(f_ss)), np.random.Generator(np.random.PCG64(h_ss))


def poisson_resample(template: SampledProfile, rng: np.random.Generator) -> SampledProfile:
    """Independent Poisson draw per bin with the template values as means."""
    return SampledProfile(template.grid, rng.poisson(template.values).astype(float), "counts")


def _draw_nonempty(template: SampledProfile, rng: np.random.Generator) -> tuple[SampledProfile, int]:
    for redraws in range(MAX_REDRAWS):
        sample = poisson_resample(template, rng)
        if np.sum(sample.values) > 0:
            return sample, redraws
    raise InputError(f"template produced {MAX_REDRAWS} empty resamples in a row")


def _power_matrix(x: np.ndarray, K: int, shift: float) -> np.ndarray:
    return (x - shift)[:, None] ** np.arange(K + 1)[None, :]


def _check_template(template: SampledProfile, what: str) -> None:
    if template.kind != "counts":
        raise InputError(f"{what} template must be a counts profile (expected counts per bin)")
    if not np.sum(template.values) > 0:
        raise InputError(f"{what} template is all zeros")


def _run_trials(cfg: McConfig, one_trial) -> tuple[np.ndarray, int]:
    estimates = np.empty((cfg.trials, cfg.K + 1))
    rejected = np.zeros(cfg.trials, dtype=int)

    def work(indices):
        for t in indices:
            estimates[t], rejected[t] = one_trial(t)

    chunks = np.array_split(np.arange(cfg.trials), cfg.workers)
    if cfg.workers == 1:
        work(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(work, chunks))
    return estimates, int(rejected.sum())


def _moment_estimate(sums: np.ndarray, Cinv: np.ndarray, tau: float, N_ref: float, constrained: bool) -> np.ndarray:
    # sums[i] = sum_k (x_k - c)^i N(x_k); scaling by the fixed expected total keeps
    # M0 random, the constrained estimator then divides by it
    M = Cinv @ (sums * (tau / N_ref))
    return M / M[0] if constrained else M


def _simulate_f_only(f_template: SampledProfile, H: SampledProfile, cfg: McConfig):
    tau = quadrature(H)
    Cinv = invert_lower_triangular(conversion_matrix(H, cfg.K, cfg.shift)).entries
    X = _power_matrix(f_template.x, cfg.K, cfg.shift)
    N_ref = float(np.sum(f_template.values))

    def one_trial(t):
        f_rng, _ = trial_generators(cfg.seed, t)
        counts, redraws = _draw_nonempty(f_template, f_rng)
        return _moment_estimate(counts.values @ X, Cinv, tau, N_ref, cfg.constrained), redraws

    return _run_trials(cfg, one_trial)


def _rows(estimates: np.ndarray, report, inflation=None) -> tuple[McRow, ...]:
    var = np.var(estimates, axis=0, ddof=1)
    mean = np.mean(estimates, axis=0)
    rows = []
    for r in report.rows:
        i = r.order
        rows.append(McRow(
            order=i,
            var_empirical=float(var[i]),
            mean_empirical=float(mean[i]),
            crb_unconstrained=r.crb_unconstrained,
            crb_constrained=r.crb_constrained,
            beta_template=r.beta_hat,
            inflation_ratio=None if inflation is None else float(inflation[i]),
        ))
    return tuple(rows)


def run_mc_f_noise(f_template: SampledProfile, H: SampledProfile, cfg: McConfig) -> McReport:
    """Poisson noise on the measured spectrum only; the kernel (and C) is exact.

    ``f_template`` holds expected counts per bin; ``H`` is the kernel density.
    """
    _check_template(f_template, "f")
    if not f_template.grid.same_step(H.grid):
        raise GridMismatchError(f"f and H grid steps differ: {f_template.grid.step!r} vs {H.grid.step!r}")
    estimates, rejected = _simulate_f_only(f_template, H, cfg)
    bounds = crb_report(f_template, H, cfg.K, cfg.shift)
    return McReport(
        rows=_rows(estimates, bounds),
        trials=cfg.trials,
        seed=cfg.seed,
        rejected_trials=rejected,
        N=float(np.sum(f_template.values)),
        constrained=cfg.constrained,
        noise_on_kernel=False,
        notes={"bounds": "computed from the noiseless templates"},
    )


def run_mc_fH_noise(f_template: SampledProfile, H_template: SampledProfile, cfg: McConfig) -> McReport:
    """Poisson noise on both the spectrum and the kernel measurement.

    Each trial renormalizes the resampled kernel to unit mass and rebuilds
    C^-1. The report carries the variance inflation against an f-only run
    with the same seed and the noiseless unit-mass kernel.
    """
    _check_template(f_template, "f")
    _check_template(H_template, "H")
    if not f_template.grid.same_step(H_template.grid):
        raise GridMismatchError(
            f"f and H grid steps differ: {f_template.grid.step!r} vs {H_template.grid.step!r}"
        )
    H_exact = normalize(density_from_counts(H_template), 1.0)
    X = _power_matrix(f_template.x, cfg.K, cfg.shift)
    N_ref = float(np.sum(f_template.values))

    def one_trial(t):
        f_rng, h_rng = trial_generators(cfg.seed, t)
        counts, f_redraws = _draw_nonempty(f_template, f_rng)
        h_counts, h_redraws = _draw_nonempty(H_template, h_rng)
        H_t = normalize(density_from_counts(h_counts), 1.0)
        Cinv = invert_lower_triangular(conversion_matrix(H_t, cfg.K, cfg.shift)).entries
        return _moment_estimate(counts.values @ X, Cinv, 1.0, N_ref, cfg.constrained), f_redraws + h_redraws

    estimates, rejected = _run_trials(cfg, one_trial)
    paired, _ = _simulate_f_only(f_template, H_exact, cfg)
    var_fh = np.var(estimates, axis=0, ddof=1)
    var_f = np.var(paired, axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        inflation = var_fh / var_f
    bounds = crb_report(f_template, H_exact, cfg.K, cfg.shift)
    return McReport(
        rows=_rows(estimates, bounds, inflation),
        trials=cfg.trials,
        seed=cfg.seed,
        rejected_trials=rejected,
        N=N_ref,
        constrained=cfg.constrained,
        noise_on_kernel=True,
        N_H=float(np.sum(H_template.values)),
        f_only_variances=tuple(float(v) for v in var_f[1:]),
        notes={"bounds": "computed from the noiseless templates, not per-trial kernels"},
    )
