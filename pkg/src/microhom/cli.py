"""Command-line front end.

Runs are driven by JSON config files; individual keys can be overridden on
the command line with dotted paths (--set solver.tol=1e-8).  Every run
writes the fully resolved config next to its outputs so it can be reproduced
bitwise, plus a machine-readable summary JSON.  Diagnostics go to stderr.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import dataset as dataset_mod
from . import plate as plate_mod
from .arrayio import read_array, write_array, write_pgm
from .errors import ConfigError, DomainError
from .homogenization import (
    anisotropy_indicator,
    homogenized_stiffness,
    strain_concentration,
)
from .microstructure import (
    Microstructure,
    SpinodalParams,
    assign_properties,
    generate_fiber_rve,
    generate_spinodal_rve,
)
from .solver import SolverConfig, solve_unit_load
from .voigt import IsotropicProps, effective_enu


def _log(verbose: bool, message: str):
    if verbose:
        print(message, file=sys.stderr)


def _load_config(args) -> dict:
    cfg = {}
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as err:
            raise ConfigError(f"cannot read config {args.config}: {err}") from err
        if not isinstance(cfg, dict):
            raise ConfigError("config file must hold a JSON object")
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key.path=value, got {item!r}")
        dotted, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        keys = dotted.split(".")
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {dotted!r} crosses a non-object")
        node[keys[-1]] = value
    return cfg


def _check_keys(cfg: dict, allowed, context: str):
    unknown = set(cfg) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {context} keys: {sorted(unknown)}")


def _echo_config(out: Path, cfg: dict):
    out.mkdir(parents=True, exist_ok=True)
    (out / "config_echo.json").write_text(json.dumps(cfg, indent=1), encoding="utf-8")


def _write_summary(out: Path, summary: dict, summary_path=None):
    path = Path(summary_path) if summary_path else out / "summary.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(summary, indent=1), encoding="utf-8")
    return path


def _props(cfg: dict, key: str) -> IsotropicProps:
    node = cfg.get(key)
    if not isinstance(node, dict) or set(node) != {"E", "nu"}:
        raise ConfigError(f"{key!r} must be an object with keys E and nu")
    return IsotropicProps(float(node["E"]), float(node["nu"]))


def _solver_config(cfg: dict) -> SolverConfig:
    node = cfg.get("solver", {})
    _check_keys(node, SolverConfig.__dataclass_fields__, "solver")
    return SolverConfig(**node)


_RVE_KEYS = {"file", "uniform", "fiber", "spinodal", "resolution"}


def _normalized_rve(cfg: dict) -> dict:
    """Validate the 'rve' config node and fill its defaults, so the echoed
    config reproduces the run without relying on implicit values."""
    node = cfg.get("rve")
    if not isinstance(node, dict):
        raise ConfigError("'rve' must be an object")
    _check_keys(node, _RVE_KEYS, "rve")
    if "file" in node:
        return {"file": str(node["file"])}
    resolution = [int(r) for r in node.get("resolution", [128, 128])]
    if "uniform" in node:
        phase = int(node["uniform"])
        if phase not in (0, 1):
            raise ConfigError("'rve.uniform' must be 0 or 1")
        return {"uniform": phase, "resolution": resolution}
    if "fiber" in node:
        sub = dict(node["fiber"])
        _check_keys(sub, {"vof", "r_mean", "r_std_frac", "seed", "gap_frac"}, "rve.fiber")
        return {
            "fiber": {
                "vof": float(sub.get("vof", 0.5)),
                "r_mean": float(sub.get("r_mean", 3.5)),
                "r_std_frac": float(sub.get("r_std_frac", 0.01)),
                "seed": int(sub.get("seed", 0)),
                "gap_frac": float(sub.get("gap_frac", 0.1)),
            },
            "resolution": resolution,
        }
    if "spinodal" in node:
        sub = dict(node["spinodal"])
        seed = int(sub.pop("seed", 0))
        _check_keys(sub, SpinodalParams.__dataclass_fields__, "rve.spinodal")
        return {
            "spinodal": {**asdict(SpinodalParams(**sub)), "seed": seed},
            "resolution": resolution,
        }
    raise ConfigError("'rve' needs one of: file, uniform, fiber, spinodal")


def _resolve_rve(node: dict, domain) -> Microstructure:
    """Materialize a normalized 'rve' node: a stored grid, a uniform phase,
    or a generated fiber/spinodal cell."""
    if "file" in node:
        grid = read_array(node["file"]).astype(np.uint8)
        return Microstructure(grid, tuple(domain), float(grid.mean()), seed=-1, kind="file")
    resolution = node["resolution"]
    if "uniform" in node:
        grid = np.full(tuple(resolution), node["uniform"], dtype=np.uint8)
        return Microstructure(
            grid, tuple(domain), float(node["uniform"]), seed=-1, kind="uniform"
        )
    if "fiber" in node:
        sub = node["fiber"]
        return generate_fiber_rve(
            vof_target=sub["vof"],
            r_mean=sub["r_mean"],
            r_std_frac=sub["r_std_frac"],
            domain=domain,
            resolution=resolution,
            seed=sub["seed"],
            gap_frac=sub["gap_frac"],
        )
    sub = dict(node["spinodal"])
    seed = sub.pop("seed")
    return generate_spinodal_rve(SpinodalParams(**sub), domain, resolution, seed)


def _cmd_gen_rve(args) -> int:
    cfg = _load_config(args)
    _check_keys(cfg, {"rve", "domain"}, "gen-rve")
    domain = [float(v) for v in cfg.get("domain", [50.0, 50.0])]
    node = _normalized_rve(cfg)
    out = Path(args.out)
    _echo_config(out, {"rve": node, "domain": domain})
    rve = _resolve_rve(node, domain)
    write_array(out / "rve.u8.bin", rve.grid)
    if args.pgm:
        write_pgm(out / "rve.pgm", rve.grid.astype(float))
    summary = {
        "kind": rve.kind,
        "resolution": list(rve.grid.shape),
        "domain": list(domain),
        "achieved_vof": rve.achieved_vof,
        "seed": rve.seed,
        "n_fibers": None if rve.centers_radii is None else len(rve.centers_radii),
    }
    _write_summary(out, summary, args.summary)
    _log(args.verbose, f"wrote {out / 'rve.u8.bin'} (vof {rve.achieved_vof:.4f})")
    return 0


def _cmd_solve(args) -> int:
    cfg = _load_config(args)
    _check_keys(
        cfg,
        {"rve", "domain", "fiber_props", "matrix_props", "macro_strain", "solver"},
        "solve",
    )
    domain = [float(v) for v in cfg.get("domain", [50.0, 50.0])]
    node = _normalized_rve(cfg)
    fiber, matrix = _props(cfg, "fiber_props"), _props(cfg, "matrix_props")
    solver = _solver_config(cfg)
    macro = [float(v) for v in cfg.get("macro_strain", [1.0, 0.0, 0.0])]
    out = Path(args.out)
    _echo_config(out, {
        "rve": node,
        "domain": domain,
        "fiber_props": asdict(fiber),
        "matrix_props": asdict(matrix),
        "macro_strain": macro,
        "solver": asdict(solver),
    })
    rve = _resolve_rve(node, domain)
    c_field = assign_properties(rve, fiber, matrix)
    result = solve_unit_load(c_field, macro, solver, domain=domain)
    write_array(out / "strain.f64.bin", result.strain)
    write_array(out / "stress.f64.bin", result.stress)
    summary = {
        "macro_strain": macro,
        "iterations": result.iterations,
        "converged": result.converged,
        "residual": result.residual_history[-1] if result.residual_history else 0.0,
        "mean_stress": result.stress.mean(axis=(0, 1)).tolist(),
    }
    _write_summary(out, summary, args.summary)
    return 0


def _cmd_homogenize(args) -> int:
    cfg = _load_config(args)
    _check_keys(cfg, {"rve", "domain", "fiber_props", "matrix_props", "solver"}, "homogenize")
    domain = [float(v) for v in cfg.get("domain", [50.0, 50.0])]
    node = _normalized_rve(cfg)
    fiber, matrix = _props(cfg, "fiber_props"), _props(cfg, "matrix_props")
    solver = _solver_config(cfg)
    out = Path(args.out)
    _echo_config(out, {
        "rve": node,
        "domain": domain,
        "fiber_props": asdict(fiber),
        "matrix_props": asdict(matrix),
        "solver": asdict(solver),
    })
    rve = _resolve_rve(node, domain)
    c_field = assign_properties(rve, fiber, matrix)
    conc = strain_concentration(c_field, solver, domain=domain)
    cbar, asym = homogenized_stiffness(c_field, conc)
    eff = effective_enu(cbar)
    write_array(out / "a_field.f64.bin", conc.a)
    summary = {
        "achieved_vof": rve.achieved_vof,
        "cbar": cbar.tolist(),
        "asymmetry": asym,
        "anisotropy_indicator": anisotropy_indicator(cbar),
        "E_eff": eff.E,
        "nu_eff": eff.nu,
        "loads": conc.metadata["loads"],
    }
    _write_summary(out, summary, args.summary)
    _log(args.verbose, f"E_eff = {eff.E:.6g} GPa, nu_eff = {eff.nu:.6g}")
    return 0


def _workers(args, cfg: dict) -> int:
    """--threads wins, then the config, then the available parallelism."""
    if args.threads:
        return args.threads
    return cfg.get("workers") or os.cpu_count() or 1


def _cmd_dataset(args) -> int:
    cfg = _load_config(args)
    if args.out:
        cfg["output_dir"] = args.out
    cfg["workers"] = _workers(args, cfg)
    manifest = dataset_mod.generate_dataset(dataset_mod.config_from_dict(cfg))
    summary = {
        "output_dir": cfg.get("output_dir", "dataset_out"),
        "n_requested": manifest["n_requested"],
        "n_generated": len(manifest["samples"]),
        "n_failed": len(manifest["failures"]),
        "config_hash": manifest["config_hash"],
    }
    _write_summary(Path(summary["output_dir"]), summary, args.summary)
    _log(args.verbose, f"generated {summary['n_generated']} samples")
    return 0 if not manifest["failures"] else 1


def _cmd_multiscale(args) -> int:
    cfg = _load_config(args)
    cfg["workers"] = _workers(args, cfg)
    summary = plate_mod.run_multiscale(cfg, args.out)
    if args.summary:
        _write_summary(Path(args.out), summary, args.summary)
    return 0


def _cmd_export_image(args) -> int:
    field = read_array(args.field).astype(float)
    if args.component:
        for token in args.component.split(","):
            index = int(token)
            if field.ndim < 3:
                raise DomainError("component selection exceeds field rank")
            field = field[..., index] if field.ndim == 3 else field[:, :, index]
    if field.ndim != 2:
        raise DomainError(
            f"field is {field.ndim}-D after component selection; need 2-D "
            "(use --component)"
        )
    write_pgm(args.out, field)
    return 0


def _cmd_validate(args) -> int:
    problems = dataset_mod.validate_dataset(args.dataset)
    for problem in problems:
        print(problem, file=sys.stderr)
    if problems:
        raise DomainError(f"dataset failed validation with {len(problems)} problem(s)")
    _log(args.verbose, "dataset is consistent")
    return 0


def _cmd_gen_spinodal(args) -> int:
    cfg = _load_config(args)
    _check_keys(
        cfg,
        {"domain", "resolution", "seed"} | set(SpinodalParams.__dataclass_fields__),
        "gen-spinodal",
    )
    domain = [float(v) for v in cfg.pop("domain", [50.0, 50.0])]
    resolution = [int(r) for r in cfg.pop("resolution", [256, 256])]
    seed = int(cfg.pop("seed", 0))
    params = SpinodalParams(**cfg)
    out = Path(args.out)
    _echo_config(
        out, {"domain": domain, "resolution": resolution, "seed": seed, **asdict(params)}
    )
    rve = generate_spinodal_rve(params, domain, resolution, seed)
    write_array(out / "rve.u8.bin", rve.grid)
    if args.pgm:
        write_pgm(out / "rve.pgm", rve.grid.astype(float))
    summary = {
        "kind": rve.kind,
        "resolution": list(rve.grid.shape),
        "hard_fraction": rve.achieved_vof,
        "mean_concentration": rve.metadata["mean_concentration"],
        "seed": seed,
    }
    _write_summary(out, summary, args.summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="microhom",
        description="Periodic micromechanics: RVE generation, spectral solves, "
        "homogenization, dataset production, multiscale plate runs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY.PATH=VALUE",
                       help="override a config key (dotted path, JSON value)")
        p.add_argument("--out", default=out_default, help="output directory")
        p.add_argument("--summary", help="summary JSON path (default <out>/summary.json)")
        p.add_argument("--threads", type=int, help="worker pool size")
        p.add_argument("--verbose", action="store_true")

    p = sub.add_parser("gen-rve", help="generate a microstructure")
    common(p, "rve_out")
    p.add_argument("--pgm", action="store_true", help="also export a PGM image")
    p.set_defaults(func=_cmd_gen_rve)

    p = sub.add_parser("gen-spinodal", help="generate a spinodal microstructure")
    common(p, "spinodal_out")
    p.add_argument("--pgm", action="store_true", help="also export a PGM image")
    p.set_defaults(func=_cmd_gen_spinodal)

    p = sub.add_parser("solve", help="solve one cell under a macro strain")
    common(p, "solve_out")
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("homogenize", help="concentration field and effective properties")
    common(p, "homogenize_out")
    p.set_defaults(func=_cmd_homogenize)

    p = sub.add_parser("dataset", help="batch-produce a labeled dataset")
    common(p, None)
    p.set_defaults(func=_cmd_dataset)

    p = sub.add_parser("multiscale", help="two-scale plate analysis")
    common(p, "multiscale_out")
    p.set_defaults(func=_cmd_multiscale)

    p = sub.add_parser("export-image", help="render an array file component to PGM")
    p.add_argument("--field", required=True, help="array file")
    p.add_argument("--component", help="trailing component indices, e.g. 0 or 0,0")
    p.add_argument("--out", required=True, help="output PGM path")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_export_image)

    p = sub.add_parser("validate", help="re-check a dataset directory")
    p.add_argument("--dataset", required=True, help="dataset root directory")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=_cmd_validate)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except DomainError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
