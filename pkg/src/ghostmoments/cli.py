"""Command-line entry point.

Every run writes its outputs plus ``manifest.json`` (resolved configuration and
input hashes). ``ghostmoments rerun --manifest PATH`` replays a run and
reproduces the same files byte for byte.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ghostmoments import __version__
from ghostmoments.crb import crb_report
from ghostmoments.errors import GhostMomentsError, GridMismatchError, InputError
from ghostmoments.io import (
    dumps_json,
    profile_csv,
    read_profile_csv,
    read_transmission_csv,
    sha256_file,
    table_csv,
    atomic_write_text,
)
from ghostmoments.kk import (
    TransmissionPair,
    blurred_transmission,
    kk_phase,
    kk_quadratic_error,
    phase_discrepancy,
)
from ghostmoments.moments import (
    conversion_matrix,
    deconvolve_moments,
    estimate_moments_from_counts,
    invert_lower_triangular,
    normalized_moments,
    raw_moments,
)
from ghostmoments.montecarlo import McConfig, poisson_resample, run_mc_f_noise, run_mc_fH_noise, trial_generators
from ghostmoments.profiles import Grid, counts_from_density, normalize, quadrature
from ghostmoments.scenarios import DEFAULT_N, Scenario, parse_spec, preset

COMMANDS = ("simulate", "moments", "crb", "mc", "kk")
# execution details that must not change the results, kept out of the manifest
NON_REPRODUCIBLE = ("out", "workers")


@dataclass
class RunConfig:
    command: str
    inputs: list[str] = field(default_factory=list)
    kernel: str | None = None
    truth: str | None = None
    grid: str | None = None
    order: int = 4
    shift: float = 0.0
    tau: float | None = None
    trials: int = 4000
    seed: int | None = None
    constrained: bool = False
    noisy: bool = False
    format: str = "both"
    preset: str = "fig2-like"
    object: str | None = None
    kernel_shape: str | None = None
    counts: float = float(DEFAULT_N)
    kernel_counts: float | None = None
    out: str = "."
    workers: int = 1

    def manifest_config(self) -> dict:
        d = dataclasses.asdict(self)
        for key in NON_REPRODUCIBLE:
            d.pop(key)
        return d


def _input(cfg: RunConfig, i: int = 0) -> str:
    if len(cfg.inputs) <= i:
        raise InputError(f"{cfg.command} needs --input")
    return cfg.inputs[i]


def _kernel(cfg: RunConfig):
    if cfg.kernel is None:
        raise InputError(f"{cfg.command} needs --kernel")
    H = read_profile_csv(cfg.kernel)
    return H if cfg.tau is None else normalize(H, cfg.tau)


def _check_grid_override(cfg: RunConfig, grid: Grid) -> None:
    if cfg.grid is not None and Grid.parse(cfg.grid) != grid:
        raise GridMismatchError(f"input grid {grid.as_dict()} does not match --grid {cfg.grid}")


def _check_steps(f_grid: Grid, h_grid: Grid) -> None:
    if not f_grid.same_step(h_grid):
        raise GridMismatchError(f"f and H grid steps differ: {f_grid.step!r} vs {h_grid.step!r}")


def _wants(cfg: RunConfig, kind: str) -> bool:
    return cfg.format in (kind, "both")


def cmd_simulate(cfg: RunConfig) -> dict[str, str]:
    if not cfg.counts > 0:
        raise InputError(f"requested total count must be positive, got {cfg.counts}")
    grid = Grid.parse(cfg.grid) if cfg.grid else None
    if cfg.object or cfg.kernel_shape:
        if not (cfg.object and cfg.kernel_shape):
            raise InputError("explicit scenarios need both --object and --kernel-shape")
        obj = parse_spec(cfg.object)
        ker = parse_spec(cfg.kernel_shape, kernel=True)
        scenario = Scenario(obj, ker, grid or Grid(), 5.0 * max(ker.fwhm, 1e-12))
    else:
        scenario = preset(cfg.preset, grid)
    F, H, expected = scenario.build(cfg.counts)
    counts = poisson_resample(expected, trial_generators(cfg.seed, 0)[0]) if cfg.noisy else expected
    header = ["x", "value"]
    return {
        "F.csv": profile_csv(F.x, F.values, header=header),
        "H.csv": profile_csv(H.x, H.values, header=header),
        "f_counts.csv": profile_csv(counts.x, counts.values, header=header),
    }


def cmd_moments(cfg: RunConfig) -> dict[str, str]:
    f = read_profile_csv(_input(cfg), kind="counts")
    _check_grid_override(cfg, f.grid)
    H = _kernel(cfg)
    _check_steps(f.grid, H.grid)
    m_hat, N = estimate_moments_from_counts(f, cfg.order, cfg.shift)
    C = conversion_matrix(H, cfg.order, cfg.shift)
    Cinv = invert_lower_triangular(C)
    M = deconvolve_moments(m_hat, Cinv)
    M0 = normalized_moments(M)
    out = {}
    if _wants(cfg, "json"):
        out["moments.json"] = dumps_json({
            "N": N,
            "tau": quadrature(H),
            "measured": m_hat.to_dict(),
            "conversion_matrix": C.to_dict(),
            "inverse_conversion_matrix": Cinv.to_dict(),
            "deconvolved": M.to_dict(),
            "normalized": M0.to_dict(),
        })
    if _wants(cfg, "csv"):
        rows = [(i, float(m_hat[i]), float(M[i]), float(M0[i])) for i in range(cfg.order + 1)]
        out["moments.csv"] = table_csv(["i", "m_measured", "M_deconvolved", "M_normalized"], rows)
    return out


def cmd_crb(cfg: RunConfig) -> dict[str, str]:
    f = read_profile_csv(_input(cfg), kind="counts")
    _check_grid_override(cfg, f.grid)
    H = _kernel(cfg)
    truth = None
    if cfg.truth is not None:
        truth = normalized_moments(raw_moments(read_profile_csv(cfg.truth), cfg.order, cfg.shift))
    report = crb_report(f, H, cfg.order, cfg.shift, beta_truth=truth)
    out = {}
    if _wants(cfg, "json"):
        d = report.to_dict()
        d["metadata"]["inputs"] = _input_hashes(cfg)
        out["crb.json"] = dumps_json(d)
    if _wants(cfg, "csv"):
        rows = [(r.order, r.beta_hat, r.crb_unconstrained, r.crb_constrained) for r in report.rows]
        out["crb.csv"] = table_csv(["i", "beta_hat", "crb_unconstrained", "crb_constrained"], rows)
    return out


def cmd_mc(cfg: RunConfig) -> dict[str, str]:
    f = read_profile_csv(_input(cfg), kind="counts")
    _check_grid_override(cfg, f.grid)
    H = _kernel(cfg)
    mc_cfg = McConfig(
        trials=cfg.trials,
        seed=cfg.seed,
        K=cfg.order,
        noise_on_kernel=cfg.kernel_counts is not None,
        constrained=cfg.constrained,
        shift=cfg.shift,
        workers=cfg.workers,
    )
    if cfg.kernel_counts is not None:
        H_template = counts_from_density(normalize(H, 1.0), cfg.kernel_counts)
        report = run_mc_fH_noise(f, H_template, mc_cfg)
    else:
        report = run_mc_f_noise(f, H, mc_cfg)
    out = {}
    if _wants(cfg, "json"):
        out["mc.json"] = dumps_json(report.to_dict())
    if _wants(cfg, "csv"):
        rows = [
            (r.order, r.var_empirical, r.mean_empirical, r.crb_unconstrained, r.crb_constrained, r.inflation_ratio)
            for r in report.rows
        ]
        header = ["i", "var_empirical", "mean_empirical", "crb_unconstrained", "crb_constrained", "inflation_ratio"]
        out["mc.csv"] = table_csv(header, rows)
    return out


def cmd_kk(cfg: RunConfig) -> dict[str, str]:
    data = read_transmission_csv(_input(cfg))
    H = _kernel(cfg)
    if isinstance(data, TransmissionPair):
        eta, F_eta = data.eta, data.F_eta
    else:
        # a bare transmission stands in for F_eta under a flat reference
        eta = F_eta = data
    _check_grid_override(cfg, eta.grid)
    _check_steps(eta.grid, H.grid)
    phase = kk_phase(eta)
    dphi = phase_discrepancy(F_eta, H)
    err = kk_quadratic_error(F_eta, H)
    out = {}
    if _wants(cfg, "json"):
        report = err.to_dict()
        report["primary"] = "epsilon2_closed"
        report["input_kind"] = "pair" if isinstance(data, TransmissionPair) else "transmission"
        out["kk.json"] = dumps_json(report)
    if _wants(cfg, "csv"):
        out["phase.csv"] = profile_csv(phase.x, phase.values, header=["omega", "phi"])
        out["discrepancy.csv"] = profile_csv(dphi.x, dphi.values, header=["omega", "delta_phi"])
        if isinstance(data, TransmissionPair):
            eta_h = blurred_transmission(data, H)
            out["blurred_eta.csv"] = profile_csv(eta_h.x, eta_h.values, header=["omega", "eta_H"])
    return out


HANDLERS = {
    "simulate": cmd_simulate,
    "moments": cmd_moments,
    "crb": cmd_crb,
    "mc": cmd_mc,
    "kk": cmd_kk,
}


def _input_hashes(cfg: RunConfig) -> dict[str, str]:
    paths = list(cfg.inputs) + [p for p in (cfg.kernel, cfg.truth) if p is not None]
    return {p: sha256_file(p) for p in paths}


def _needs_seed(cfg: RunConfig) -> bool:
    return cfg.command == "mc" or (cfg.command == "simulate" and cfg.noisy)


def execute(cfg: RunConfig) -> dict[str, str]:
    """Run one command and write its files; returns ``{filename: contents}``."""
    if cfg.command not in HANDLERS:
        raise InputError(f"unknown command {cfg.command!r}")
    if cfg.seed is None and _needs_seed(cfg):
        cfg.seed = int(np.random.SeedSequence().entropy % 2**64)
    files = HANDLERS[cfg.command](cfg)
    files["manifest.json"] = dumps_json({
        "tool": "ghostmoments",
        "version": __version__,
        "config": cfg.manifest_config(),
        "inputs": _input_hashes(cfg),
    })
    out = Path(cfg.out)
    for name, text in files.items():
        atomic_write_text(out / name, text)
    return files


def config_from_manifest(path: str, out: str, workers: int = 1) -> RunConfig:
    manifest = json.loads(Path(path).read_text())
    cfg = RunConfig(**manifest["config"], out=out, workers=workers)
    for p, digest in manifest.get("inputs", {}).items():
        if sha256_file(p) != digest:
            raise InputError(f"input {p} changed since the manifest was written")
    return cfg


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--input", dest="inputs", action="append", default=[], metavar="PATH",
                        help="measured counts CSV, or transmission CSV for kk")
    common.add_argument("--kernel", metavar="PATH", help="instrumental function CSV in kernel coordinates")
    common.add_argument("--truth", metavar="PATH", help="true lineshape CSV; crb then uses true moments")
    common.add_argument("--grid", metavar="MIN:MAX:N")
    common.add_argument("--order", type=int, default=4, metavar="K")
    common.add_argument("--shift", type=float, default=0.0, metavar="C", help="moment origin")
    common.add_argument("--tau", type=float, metavar="T", help="rescale the kernel to this transmission")
    common.add_argument("--trials", type=int, default=4000, metavar="M")
    common.add_argument("--seed", type=int, metavar="S")
    common.add_argument("--constrained", action="store_true", help="normalize each estimate by its M0")
    common.add_argument("--noisy", action="store_true", help="simulate: Poisson-draw the counts")
    common.add_argument("--out", default=".", metavar="DIR")
    common.add_argument("--format", choices=("json", "csv", "both"), default="both")
    common.add_argument("--preset", default="fig2-like")
    common.add_argument("--object", metavar="SHAPE,CENTER,FWHM[,ORDER]")
    common.add_argument("--kernel-shape", metavar="SHAPE,FWHM[,ORDER]")
    common.add_argument("--counts", type=float, default=float(DEFAULT_N), metavar="N",
                        help="simulate: expected total events")
    common.add_argument("--kernel-counts", type=float, metavar="N_H",
                        help="mc: also resample the kernel with this many events")
    common.add_argument("--workers", type=int, default=1)

    parser = argparse.ArgumentParser(prog="ghostmoments", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    rerun = sub.add_parser("rerun", help="replay a run from its manifest")
    rerun.add_argument("--manifest", required=True)
    rerun.add_argument("--out", default=".")
    rerun.add_argument("--workers", type=int, default=1)
    return parser


def _error(exc: Exception, code: int, kind: str) -> int:
    payload = {"error": {"code": kind, "exit_code": code, "message": str(exc)}}
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            cfg = config_from_manifest(args.manifest, args.out, args.workers)
        else:
            fields = {f.name for f in dataclasses.fields(RunConfig)}
            cfg = RunConfig(**{k: v for k, v in vars(args).items() if k in fields})
        execute(cfg)
    except GhostMomentsError as exc:
        return _error(exc, exc.code, type(exc).__name__)
    except OSError as exc:
        return _error(exc, 4, "IOError")
    return 0


if __name__ == "__main__":
    sys.exit(main())
