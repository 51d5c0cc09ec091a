"""Batch production of labeled concentration-tensor datasets.

One directory per sample under <output_dir>/samples plus a top-level
manifest, so runs can be regenerated partially and written concurrently.
Per-sample seeds derive from (master_seed, index) alone: removing or
reordering samples never changes the others.

Stiffness fields are not persisted by default: they are a deterministic
function of the stored grid and four scalars, and at production resolution
they dominate disk for no information gain.  ``store_stiffness`` restores
them.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .arrayio import read_array, read_header, write_array
from .errors import ConfigError, DomainError
from .homogenization import strain_concentration
from .microstructure import assign_properties, generate_fiber_rve
from .solver import SolverConfig
from .voigt import IsotropicProps

MANIFEST_NAME = "manifest.json"
CONFIG_ECHO_NAME = "config_echo.json"


@dataclass(frozen=True)
class DatasetConfig:
    n_samples: int = 20
    resolution: tuple = (128, 128)
    domain_size: tuple = (50.0, 50.0)
    vof_range: tuple = (0.40, 0.60)
    n_vof_groups: int = 20
    r_mean: float = 3.5
    r_std_frac: float = 0.01
    fiber_E_bounds: tuple = (5.0, 85.0)
    fiber_nu_bounds: tuple = (0.05, 0.45)
    matrix_E_bounds: tuple = (2.5, 5.0)
    matrix_nu_bounds: tuple = (0.3, 0.4)
    master_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    output_dir: str = "dataset_out"
    store_stiffness: bool = False
    gap_frac: float = 0.1
    workers: int = 1

    def __post_init__(self):
        for name in ("vof_range", "fiber_E_bounds", "fiber_nu_bounds",
                     "matrix_E_bounds", "matrix_nu_bounds"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise DomainError(f"{name} must be ordered lo <= hi, got ({lo}, {hi})")
        if self.n_samples % self.n_vof_groups != 0:
            raise DomainError(
                f"n_samples ({self.n_samples}) must be divisible by "
                f"n_vof_groups ({self.n_vof_groups})"
            )

    def property_bounds(self):
        """The four (lo, hi) pairs in (E_f, nu_f, E_m, nu_m) order."""
        return [self.fiber_E_bounds, self.fiber_nu_bounds,
                self.matrix_E_bounds, self.matrix_nu_bounds]


def config_from_dict(raw: dict) -> DatasetConfig:
    """Build a DatasetConfig from parsed JSON, rejecting unknown keys."""
    raw = dict(raw)
    solver_raw = raw.pop("solver", {})
    known = set(DatasetConfig.__dataclass_fields__) - {"solver"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown dataset config keys: {sorted(unknown)}")
    solver_known = set(SolverConfig.__dataclass_fields__)
    bad = set(solver_raw) - solver_known
    if bad:
        raise ConfigError(f"unknown solver config keys: {sorted(bad)}")
    for key in ("resolution", "domain_size", "vof_range", "fiber_E_bounds",
                "fiber_nu_bounds", "matrix_E_bounds", "matrix_nu_bounds"):
        if key in raw:
            raw[key] = tuple(raw[key])
    return DatasetConfig(solver=SolverConfig(**solver_raw), **raw)


def config_to_dict(cfg: DatasetConfig) -> dict:
    out = asdict(cfg)
    for key, value in out.items():
        if isinstance(value, tuple):
            out[key] = list(value)
    return out


def config_hash(cfg: DatasetConfig) -> str:
    canon = json.dumps(config_to_dict(cfg), sort_keys=True)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def lhs_sample(n: int, bounds, seed: int) -> np.ndarray:
    """Latin hypercube sample: per dimension, one point per equal-width
    stratum of n strata, jittered uniformly within its stratum."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    for lo, hi in bounds:
        if not lo < hi:
            raise DomainError(f"each bound must satisfy lo < hi, got ({lo}, {hi})")
    rng = np.random.default_rng(seed)
    cols = []
    for lo, hi in bounds:
        strata = rng.permutation(n)
        jitter = rng.uniform(0.0, 1.0, n)
        cols.append(lo + (hi - lo) * (strata + jitter) / n)
    return np.column_stack(cols)


def stratify_vof(n: int, vof_range, groups: int) -> np.ndarray:
    """Equally sized blocks over an evenly spaced grid of `groups` volume
    fractions spanning [lo, hi]; a single group degenerates to lo."""
    lo, hi = float(vof_range[0]), float(vof_range[1])
    if groups < 1:
        raise DomainError(f"groups must be >= 1, got {groups}")
    if n % groups != 0:
        raise DomainError(f"n ({n}) must be divisible by groups ({groups})")
    if groups == 1:
        values = np.array([lo])
    else:
        values = lo + np.arange(groups) * (hi - lo) / (groups - 1)
    return np.repeat(values, n // groups)


def sample_seed(master_seed: int, index: int) -> int:
    """Stable per-sample seed derived from (master_seed, index) only."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def _sample_dir(root: Path, index: int) -> Path:
    return root / "samples" / f"{index:06d}"


def _generate_one(cfg: DatasetConfig, index: int, props_row, vof: float, root: Path) -> dict:
    """Produce one sample directory; returns its manifest entry."""
    seed = sample_seed(cfg.master_seed, index)
    ef, nuf, em, num = (float(v) for v in props_row)
    rve = generate_fiber_rve(
        vof_target=float(vof),
        r_mean=cfg.r_mean,
        r_std_frac=cfg.r_std_frac,
        domain=cfg.domain_size,
        resolution=cfg.resolution,
        seed=seed,
        gap_frac=cfg.gap_frac,
    )
    c_field = assign_properties(rve, IsotropicProps(ef, nuf), IsotropicProps(em, num))
    conc = strain_concentration(c_field, cfg.solver, domain=cfg.domain_size)

    sdir = _sample_dir(root, index)
    sdir.mkdir(parents=True, exist_ok=True)
    write_array(sdir / "rve.u8.bin", rve.grid)
    write_array(sdir / "a_field.f64.bin", conc.a)
    files = {
        "rve.u8.bin": list(rve.grid.shape),
        "a_field.f64.bin": list(conc.a.shape),
    }
    if cfg.store_stiffness:
        write_array(sdir / "c_field.f64.bin", c_field.astype(float))
        files["c_field.f64.bin"] = list(c_field.shape)

    info = {
        "index": index,
        "seed": seed,
        "vof_target": float(vof),
        "achieved_vof": rve.achieved_vof,
        "domain_size": list(cfg.domain_size),
        "properties": {"E_f": ef, "nu_f": nuf, "E_m": em, "nu_m": num},
        "loads": conc.metadata["loads"],
    }
    (sdir / "sample.json").write_text(json.dumps(info, indent=1), encoding="utf-8")
    files["sample.json"] = None
    return {"dir": f"samples/{index:06d}", "files": files, **info}


def generate_dataset(cfg: DatasetConfig) -> dict:
    """Run the full pipeline and return the manifest (also written to disk).

    Material rows come from a Latin hypercube over the property bounds, the
    volume-fraction labels from even stratification.  Per-sample failures are
    recorded in the manifest with their reason and the run continues.
    """
    root = Path(cfg.output_dir)
    root.mkdir(parents=True, exist_ok=True)
    echo = config_to_dict(cfg)
    (root / CONFIG_ECHO_NAME).write_text(json.dumps(echo, indent=1), encoding="utf-8")

    props = lhs_sample(cfg.n_samples, cfg.property_bounds(), seed=cfg.master_seed)
    vofs = stratify_vof(cfg.n_samples, cfg.vof_range, cfg.n_vof_groups)

    def run(index):
        try:
            return index, _generate_one(cfg, index, props[index], vofs[index], root), None
        except DomainError as err:
            return index, None, f"{type(err).__name__}: {err}"

    results = []
    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(run, range(cfg.n_samples)))
    else:
        results = [run(i) for i in range(cfg.n_samples)]

    samples = [entry for _, entry, _ in sorted(results) if entry is not None]
    failures = [
        {"index": i, "reason": reason} for i, _, reason in sorted(results) if reason
    ]
    manifest = {
        "config": echo,
        "config_hash": config_hash(cfg),
        "n_requested": cfg.n_samples,
        "samples": samples,
        "failures": failures,
    }
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, indent=1), encoding="utf-8")
    return manifest


def validate_dataset(root, atol: float = 1e-8) -> list:
    """Re-check a dataset directory against its manifest.

    Verifies header/shape agreement for every referenced array, that every
    file under samples/ is referenced exactly once, and that each stored
    concentration field still averages to the identity within atol.
    Returns a list of human-readable problems (empty when clean).
    """
    root = Path(root)
    problems = []
    try:
        manifest = json.loads((root / MANIFEST_NAME).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as err:
        return [f"cannot read manifest: {err}"]

    referenced = set()
    for entry in manifest.get("samples", []):
        sdir = root / entry["dir"]
        for name, shape in entry["files"].items():
            path = sdir / name
            referenced.add(path.resolve())
            if not path.exists():
                problems.append(f"{path}: referenced but missing")
                continue
            if shape is None:
                continue
            try:
                header = read_header(path)
            except DomainError as err:
                problems.append(str(err))
                continue
            if list(header["shape"]) != list(shape):
                problems.append(
                    f"{path}: header shape {header['shape']} != manifest {shape}"
                )
        a_path = sdir / "a_field.f64.bin"
        if a_path.exists():
            a = read_array(a_path)
            dev = np.abs(a.mean(axis=(0, 1)) - np.eye(3)).max()
            if dev > atol:
                problems.append(
                    f"{a_path}: mean concentration deviates from identity by {dev:.3e}"
                )

    samples_root = root / "samples"
    if samples_root.exists():
        for path in sorted(samples_root.rglob("*")):
            if path.is_file() and path.resolve() not in referenced:
                problems.append(f"{path}: on disk but not referenced by the manifest")
    return problems
