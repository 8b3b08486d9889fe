"""``qlab`` command line: reproducible experiment runs with CSV and JSON outputs.

Each subcommand reads a YAML config, writes its data files into ``--out``
and a ``manifest.json`` next to them. Exit codes: 0 success, 2 usage or
config error, 3 experiment invariant violated, 4 solver non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_NOT_CONVERGED = 0, 2, 3, 4

EXPERIMENTS = ("quarter-frequency", "cylinder-singularity", "excess-decay", "cone-census")

DEFAULTS = {
    "quarter-frequency": {"h": 1 / 64, "data": "sin2", "radii": None, "height": "sphere",
                          "tolerances": {"solver": 1e-10, "max_sweeps": 100_000, "monotone_slack": 0.05, "corner_slack": 0.15,
                                         "height_slack": 0.2}},
    "cylinder-singularity": {"h": 1 / 12, "s_min": None, "tolerances": {"solver": 1e-10, "max_sweeps": 100_000}},
    "excess-decay": {"lam": 0.01, "rho": 0.5, "levels": 4, "resolution": 16, "max_small_lam": 0.1,
                     "tolerances": {}},
    "cone-census": {"q_max": 3, "n_max": 2, "max_pieces": 4, "max_multiplicity": 3, "gap_resolution": 12,
                    "tolerances": {}},
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str
    h: float | None
    seed: int
    tolerances: dict
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {"experiment": self.experiment, "h": self.h, "seed": self.seed,
                "tolerances": self.tolerances, **self.params}


def parse_config(raw: dict | None, experiment: str) -> ExperimentConfig:
    raw = dict(raw or {})
    name = raw.pop("experiment", experiment)
    if name != experiment:
        raise ConfigError(f"config is for {name!r}, not {experiment!r}")
    base = DEFAULTS[experiment]
    unknown = set(raw) - set(base) - {"seed"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    tol = dict(base["tolerances"])
    extra = set(raw.get("tolerances") or {}) - set(tol)
    if extra:
        raise ConfigError(f"unknown tolerances: {sorted(extra)}")
    tol.update(raw.pop("tolerances", None) or {})
    params = {k: raw.get(k, v) for k, v in base.items() if k not in ("h", "tolerances")}
    h = raw.get("h", base.get("h"))
    if h is not None:
        try:
            h = float(h)
        except (TypeError, ValueError):
            raise ConfigError(f"h must be a number, got {h!r}") from None
        if not h > 0:
            raise ConfigError("h must be positive")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed must be an integer")
    return ExperimentConfig(experiment, h, seed, tol, params)


def load_config(path, experiment: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if raw is not None and not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    return parse_config(raw, experiment)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return str(obj)


def _num(x) -> str:
    return repr(float(x))


# -- experiments ---------------------------------------------------------------------------


def run_quarter_frequency(cfg: ExperimentConfig, out: Path, oracle: bool = False) -> int:
    from . import dirichlet as dr
    from . import frequency as fq
    from .domains import ResolutionError, Tag, quarter_ball
    from .qpoints import batch_g2

    h, p, tol = cfg.h, cfg.params, cfg.tolerances
    mesh = quarter_ball(2, 1.0, h)
    if p["radii"] is not None and min(p["radii"]) <= h:
        raise ResolutionError(f"radius {min(p['radii'])} does not exceed the mesh size {h}")
    data = p["data"]
    if data == "zero":
        exact = None
        trace = dr.Trace.zero(2, 2)
    elif data in ("sin2", "sin4"):
        exact = fq.homogeneous_2d_solution(int(data[-1]), [[1.0, 0.0], [-1.0, 0.0]])
        trace = dr.Trace.custom(exact, 2, 2, data)
    else:
        raise ConfigError(f"unknown data {data!r}; use sin2, sin4 or zero")
    zero = dr.Trace.zero(2, 2)
    f0 = dr.dirichlet_problem(mesh, 2, 2, [((Tag.V0, Tag.V1), zero), ((Tag.LATERAL,), trace)])
    if oracle and exact is not None:
        f = dr.MultiField(mesh, exact(mesh.vertices), f0.fixed)
        report = None
    else:
        f, report = dr.minimize(f0, tol=tol["solver"], max_sweeps=int(tol["max_sweeps"]))
        report.save_csv(out / "convergence.csv")
    radii = p["radii"]
    if radii is None:
        radii = sorted(set(np.round(np.linspace(8 * h, 0.75, 8), 12).tolist()) | {0.5})
    center = int(np.flatnonzero(mesh.tag_mask(Tag.CORNER_L))[0])
    prof = fq.frequency_profile(f, center, radii, height=p["height"])
    prof.save_csv(out / "frequency.csv")
    verdict: dict = {"degenerate": prof.degenerate, "oracle_mode": oracle}
    if report is not None:
        verdict.update(solver_status=report.status.value, sweeps=report.sweeps)
    failed = False
    if not prof.degenerate:
        mono = fq.check_monotone(prof, tol["monotone_slack"])
        corner = fq.corner_frequency_bound(prof, tol["corner_slack"])
        alpha = corner.plateau
        decay = fq.height_decay_check(f, mesh.vertices[center], alpha, slack=tol["height_slack"])
        verdict.update(monotone=mono.passed, worst_increment=mono.worst_increment,
                       corner_bound=corner.passed, plateau=corner.plateau,
                       height_decay=decay.passed, height_decay_max_ratio=float(np.max(decay.ratios)))
        if 0.5 in list(prof.radii):
            verdict["I_at_half"] = float(prof.I[list(prof.radii).index(0.5)])
        if exact is not None:
            verdict["sup_error"] = float(np.max(np.sqrt(batch_g2(f.values, exact(mesh.vertices)))))
        failed = not (mono.passed and corner.passed and decay.passed)
    _write_json(out / "verdicts.json", verdict)
    if report is not None and not report.converged:
        return EXIT_NOT_CONVERGED
    return EXIT_INVARIANT if failed else EXIT_OK


def run_cylinder_singularity(cfg: ExperimentConfig, out: Path, oracle: bool = False) -> int:
    from . import dirichlet as dr
    from . import topology as tp
    from .domains import Tag, cylinder

    mesh = cylinder(cfg.h)
    f0 = dr.dirichlet_problem(mesh, 2, 2, [((Tag.BOTTOM,), dr.Trace.zero(2, 2)),
                                           ((Tag.LATERAL, Tag.TOP), dr.Trace(dr.TraceKind.SQRT_CYLINDER))])
    report = None
    if oracle:
        u = dr.MultiField(mesh, dr.sqrt_values(mesh.vertices), f0.fixed)
    else:
        u, report = dr.minimize(f0, tol=cfg.tolerances["solver"],
                                 max_sweeps=int(cfg.tolerances["max_sweeps"]))
        report.save_csv(out / "convergence.csv")
        if not report.converged:
            return EXIT_NOT_CONVERGED
    eta = tp.extract_normal_map(u)
    eta.save(out / "eta.txt")
    sing = tp.locate_essential_singularity(eta, cfg.params["s_min"])
    sing.save(out / "singularity.json", eta.mesh)
    origin = int(eta.mesh.nearest_vertex((0.0, 0.0)))
    summary = {
        "oracle_mode": oracle,
        "boundary_monodromy": tp.cycle_notation(sing.boundary_monodromy),
        "verdict": sing.verdict.value,
        "forced_components": len(sing.components),
        "origin_in_component": any(c.contains_point(eta.mesh, eta.mesh.vertices[origin]) for c in sing.components),
        "s_min": sing.s_min,
    }
    if report is not None:
        summary.update(solver_status=report.status.value, sweeps=report.sweeps)
    _write_json(out / "verdict.json", summary)
    if not sing.forced or not sing.components:
        return EXIT_INVARIANT
    return EXIT_OK


def run_excess_decay(cfg: ExperimentConfig, out: Path, oracle: bool = False) -> int:
    from . import transport as tr

    p = cfg.params
    lam, rho, levels, res = float(p["lam"]), float(p["rho"]), int(p["levels"]), int(p["resolution"])
    if not 0 < rho < 1 or levels < 1 or res < 2:
        raise ConfigError("need 0 < rho < 1, levels >= 1, resolution >= 2")
    e = np.eye(3)
    wedge = tr.WedgeBoundary.from_rays([e[0], e[1]])
    rows, values = [], []
    for k in range(levels):
        r = rho**k
        t_mu = tr.quadrant_measure(e[0], e[1], r, res, bend=e[2], lam=lam)
        c_mu = tr.quadrant_measure(e[0], e[1], r, res)
        ex = tr.strong_excess(t_mu, c_mu, wedge, r, 2)
        ratio = ex / values[-1] if values and values[-1] > 0 else float("nan")
        values.append(ex)
        rows.append([k, _num(r), _num(ex), _num(ratio)])
    _write_csv(out / "excess.csv", ["level", "r", "excess", "ratio"], rows)
    flags = ["NO_DECAY_CLAIM"] if abs(lam) > p["max_small_lam"] else []
    ratios = [values[i + 1] / values[i] for i in range(len(values) - 1) if values[i] > 0]
    _write_json(out / "report.json", {"lam": lam, "rho": rho, "flags": flags, "ratios": ratios,
                                      "decays": bool(ratios) and all(x < 1 for x in ratios),
                                      "all_zero": all(v == 0 for v in values)})
    return EXIT_OK


def run_cone_census(cfg: ExperimentConfig, out: Path, oracle: bool = False) -> int:
    from fractions import Fraction

    from . import cones as cn

    p = cfg.params
    rows = cn.census(int(p["q_max"]), int(p["n_max"]), int(p["max_pieces"]), int(p["max_multiplicity"]))
    violations = 0
    table = []
    for row in rows:
        c = row.classification
        equal = c.density == Fraction(c.q, 4)
        ok = c.density >= Fraction(c.q, 4) and equal == row.all_type1
        violations += not ok
        pieces = ";".join(f"{pc.kind.value}:{pc.multiplicity}:{'-'.join(str(x + 1) for x in pc.ends)}"
                          for pc in row.pieces)
        table.append([_cfg_str(row.config), pieces, str(c.density), c.q, c.verdict.value, int(ok)])
    _write_csv(out / "census.csv", ["config", "pieces", "density", "Q", "verdict", "bound_ok"], table)
    books = []
    for config in cn.boundary_configs(int(p["q_max"]), int(p["n_max"])):
        found = cn.enumerate_admissible_books(config)
        gap = cn.uniqueness_gap(config, int(p["gap_resolution"]))
        for book in found:
            books.append([_cfg_str(config), json.dumps(book.to_dict()["quadrants"]), str(cn.book_density(book)),
                          len(found), "INF" if gap == cn.INF else _num(gap)])
    _write_csv(out / "books.csv", ["config", "quadrants", "density", "books_for_config", "uniqueness_gap"], books)
    _write_json(out / "report.json", {"decompositions": len(rows), "violations": violations,
                                      "books": len(books)})
    return EXIT_INVARIANT if violations else EXIT_OK


def _cfg_str(c) -> str:
    return f"Q0={'/'.join(map(str, c.q0))} Q1={'/'.join(map(str, c.q1))}"


RUNNERS = {
    "quarter-frequency": run_quarter_frequency,
    "cylinder-singularity": run_cylinder_singularity,
    "excess-decay": run_excess_decay,
    "cone-census": run_cone_census,
}


# -- entry point ---------------------------------------------------------------------------


def _versions() -> dict:
    import scipy

    from . import __version__

    return {"qlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qlab", description="Q-valued harmonic map and corner cone experiments")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", type=Path, help="YAML config; defaults apply when omitted")
        cmd.add_argument("--out", type=Path, required=True, help="output directory")
        cmd.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP worker threads")
        cmd.add_argument("--oracle-mode", action="store_true", help="use exact analytic fields instead of solves")
    return parser


def run(experiment: str, cfg: ExperimentConfig, out: Path, oracle: bool = False, threads: int | None = None) -> int:
    from threadpoolctl import threadpool_limits

    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    with threadpool_limits(limits=threads):
        code = RUNNERS[experiment](cfg, out, oracle)
    files = sorted(p for p in out.iterdir() if p.is_file() and p.name != "manifest.json")
    _write_json(out / "manifest.json", {
        "config": cfg.echo(),
        "oracle_mode": oracle,
        "threads": threads,
        "versions": _versions(),
        "wall_time_s": round(time.perf_counter() - start, 3),
        "exit_code": code,
        "files": {p.name: _digest(p) for p in files},
    })
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads is not None and args.threads < 1:
        parser.error("--threads must be positive")
    from .domains import ResolutionError
    from .frequency import RadiusError

    try:
        cfg = load_config(args.config, args.experiment) if args.config else parse_config(None, args.experiment)
        return run(args.experiment, cfg, args.out, args.oracle_mode, args.threads)
    except (ConfigError, ResolutionError, RadiusError) as exc:
        print(f"qlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
