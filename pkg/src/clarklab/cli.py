"""Batch experiment runner.

Every verification in the library is exposed as a subcommand that writes
three kinds of artifact into --out: results.json (sorted keys; byte
identical across runs with the same config and seed), plain RFC-4180
CSV data files, and manifest.json (config echo, versions, wall time —
always written, even when the run fails its checks).

Exit codes: 0 success, 1 usage error, 2 verification/contract failure.

Config files are flat UTF-8 ``key = value`` lines (# comments allowed);
command-line flags override file values; unknown keys are rejected.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ClarkLabError
from .functionals import ps_diagnostic
from .models import CriticalSetOracle, clark_model, enumerate_critical_set
from .solvers import SolveConfig, accumulation_scan
from .spaces import Point
from .topology import Cloud, origin_component_stabilization


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage problems must exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# experiment parameter schemas: name -> (type, default, help)
SCHEMAS = {
    "enumerate": {
        "n": (int, 3, "truncation dimension"),
        "z_samples": (int, 201, "stationary-segment sample count"),
    },
    "scan": {
        "n": (int, 3, "truncation dimension"),
        "seeds": (int, 2000, "number of flow seeds"),
        "window_lo": (float, -2.0, "window lower edge"),
        "window_hi": (float, -1e-9, "window upper edge (<= 0)"),
        "max_flow_time": (float, 1e6, "per-seed flow-time budget"),
        "oracle_tol": (float, 1e-6, "max allowed distance to the enumerated set"),
    },
    "deform": {
        "samples": (int, 500, "points of the low-energy region to deform"),
        "circle_samples": (int, 64, "exterior-cluster sample count"),
        "odd_pairs": (int, 50, "antipodal pairs for the oddness check"),
        "budget": (int, 20000, "bound-estimation sampling budget"),
    },
    "stabilize": {
        "clouds": (int, 100, "random clouds for the nesting property"),
        "z_samples": (int, 20001, "stationary-segment samples for the model cloud"),
    },
    "minimax": {
        "n": (int, 8, "truncation dimension"),
        "jmax": (int, 6, "largest level"),
    },
    "bvp": {
        "p": (float, 0.5, "sublinearity exponent in (0,1)"),
        "kmax": (int, 6, "largest nodal-domain count"),
        "nodes": (int, 2000, "interior grid nodes"),
    },
    "psdiag": {
        "n": (int, 8, "truncation dimension"),
        "tol": (float, 1e-6, "clustering/convergence tolerance"),
    },
}


def _build_parser() -> _Parser:
    parser = _Parser(prog="clarklab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name, help=f"run the {name} experiment")
        for key, (typ, default, help_text) in schema.items():
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, type=typ,
                           help=f"{help_text} (default {default})")
        p.add_argument("--config", type=str, help="flat key = value config file")
        p.add_argument("--out", type=str, default="clarklab-output",
                       help="output directory")
        p.add_argument("--seed", type=int, default=0, help="rng seed")
        p.add_argument("--threads", type=int, default=1, help="worker threads")
    return parser


def _load_config(path: str, schema: dict, parser: _Parser) -> dict:
    values = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        parser.error(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            parser.error(f"{path}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if key in ("seed", "threads"):
            values[key] = int(val.strip())
            continue
        if key == "out":
            values[key] = val.strip()
            continue
        if key not in schema:
            parser.error(f"{path}:{lineno}: unknown key '{key}'")
        typ = schema[key][0]
        try:
            values[key] = typ(val.strip())
        except ValueError:
            parser.error(f"{path}:{lineno}: bad value for '{key}'")
    return values


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(c) if isinstance(c, float) else c for c in row])


def _write_json(path: Path, obj):
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# experiments: each returns (results dict, checks dict, csv files dict)

def _run_enumerate(ns, out: Path):
    model = clark_model(n=ns.n)
    es = enumerate_critical_set(model, z_samples=ns.z_samples)
    labels = [cp.label for cp in es.points]
    worst = max(cp.residual for cp in es.points)
    rows = [(cp.label, cp.sign_pattern or "", float(cp.value), float(cp.residual),
             float(cp.point.coords[0])) for cp in es.points]
    _write_csv(out / "points.csv", ["label", "pattern", "value", "residual", "t"], rows)
    results = {
        "n": ns.n,
        "counts": {lbl: labels.count(lbl) for lbl in sorted(set(labels))},
        "worst_residual": worst,
        "points": es.to_json_dict()["points"],
    }
    checks = {
        "branch_counts": labels.count("N") == 3 ** ns.n and labels.count("-N") == 3 ** ns.n,
        "residuals_vanish": worst <= 1e-12,
    }
    return results, checks


def _run_scan(ns, out: Path):
    model = clark_model(n=ns.n)
    oracle = CriticalSetOracle(model)
    z = np.zeros((401, ns.n + 1))
    z[:, 0] = np.linspace(-1.0, 1.0, 401)
    cfg = SolveConfig(seed_rng=ns.seed, max_flow_time=ns.max_flow_time)
    report = accumulation_scan(model, z, (ns.window_lo, ns.window_hi),
                               ns.seeds, cfg, threads=ns.threads)
    report.to_csv(out / "scan.csv")
    dists = [oracle.distance(e.coords) for e in report.entries]
    worst = max(dists) if dists else 0.0
    results = report.to_json_dict()
    results["worst_oracle_distance"] = worst
    checks = {
        "all_in_window_near_oracle": worst <= ns.oracle_tol,
        "edge_labels_only": all(e.label in ("N", "-N") for e in report.entries),
    }
    return results, checks


def _run_deform(ns, out: Path):
    from .deformation import (
        SampleSpec,
        estimate_bounds,
        eta_epsilon_batch,
        flow,
        make_setup,
        two_cluster_setup_clouds,
    )
    f, k0i, k0e, delta0 = two_cluster_setup_clouds(ns.circle_samples)
    r = delta0 / 3.0
    k0_all = Cloud(np.concatenate([k0i.coords, k0e.coords]))
    bounds = estimate_bounds(f, k0_all, k0e, r,
                             SampleSpec(budget=ns.budget, rng_seed=ns.seed))
    setup = make_setup(f, k0i, k0e, delta0, r, bounds)

    rng = np.random.default_rng(ns.seed)
    seeds = []
    while len(seeds) < ns.samples:
        cand = rng.uniform(-1.6, 1.6, size=(4 * ns.samples, 2))
        vals = f.value_of(cand)
        keep = cand[vals <= -setup.eps]
        seeds.extend(keep.tolist())
    seeds = np.array(seeds[: ns.samples])

    terminals, max_uptick, max_speed = eta_epsilon_batch(setup, seeds)

    odd_dev = 0.0
    for i in range(min(ns.odd_pairs, len(seeds))):
        tr_p = flow(setup, Point(seeds[i], f.space), setup.t_eps)
        tr_m = flow(setup, Point(-seeds[i], f.space), setup.t_eps)
        odd_dev = max(odd_dev, float(np.max(np.abs(tr_p.points[-1] + tr_m.points[-1]))))

    results = {
        "setup": setup.to_json_dict(),
        "samples": int(len(seeds)),
        "max_energy_uptick": max_uptick,
        "max_speed": max_speed,
        "oddness_deviation": odd_dev,
    }
    checks = {
        "inclusion_holds": True,  # eta_epsilon_batch raises otherwise
        "odd": odd_dev <= 1e-8,
        "speed_bounded": max_speed <= 1.0 + 1e-8,
        "energy_monotone": max_uptick <= 1e-10,
    }
    rows = [(float(s[0]), float(s[1]), float(t[0]), float(t[1]),
             float(f.value_of(t))) for s, t in zip(seeds, terminals)]
    _write_csv(out / "deformed.csv",
               ["seed_x1", "seed_x2", "out_x1", "out_x2", "out_value"], rows)
    return results, checks


def _run_stabilize(ns, out: Path):
    reports = {}

    gap = np.concatenate([[0.0], np.arange(0.5, 1.0 + 1e-12, 0.01)])[:, None]
    rep_gap = origin_component_stabilization(Cloud(gap), (0.3, 0.2, 0.1, 0.05))
    reports["gap_segment"] = rep_gap.to_json_dict()

    seg = np.arange(-1.0, 1.0 + 1e-12, 0.01)[:, None]
    rep_seg = origin_component_stabilization(Cloud(seg), (0.3, 0.2, 0.1, 0.05))
    reports["connected_segment"] = rep_seg.to_json_dict()

    model = clark_model(n=2)
    es = enumerate_critical_set(model, z_samples=ns.z_samples)
    cloud = Cloud(es.coords_array())
    rep_model = origin_component_stabilization(cloud, (0.02, 0.005, 2e-4, 1e-4))
    reports["model_critical_cloud"] = rep_model.to_json_dict()
    # the all-zero sign pattern duplicates the segment endpoints, so the
    # stable origin component is every point sitting exactly on the t-axis
    axis_count = int(np.sum(np.linalg.norm(cloud.coords[:, 1:], axis=1) == 0.0))

    rng = np.random.default_rng(ns.seed)
    violations = 0
    for _ in range(ns.clouds):
        dim = int(rng.integers(1, 4))
        m = int(rng.integers(5, 60))
        pts = np.concatenate([np.zeros((1, dim)), rng.normal(size=(m, dim))])
        sched = np.unique(rng.uniform(0.02, 1.0, size=int(rng.integers(2, 7))))[::-1]
        try:
            origin_component_stabilization(Cloud(pts), tuple(sched))
        except RuntimeError:
            violations += 1

    results = {"examples": reports, "random_clouds": ns.clouds,
               "nesting_violations": violations}
    checks = {
        "gap_segment_isolates_origin": rep_gap.sizes[-1] == 1 and rep_gap.stabilized,
        "connected_segment_is_whole": rep_seg.sizes[-1] == len(seg) and rep_seg.stabilized,
        "model_cloud_stabilizes_to_segment": (rep_model.stabilized
                                              and rep_model.sizes[-1] == axis_count),
        "no_nesting_violation": violations == 0,
    }
    return results, checks


def _run_minimax(ns, out: Path):
    from .minimax import Budget, cj_upper_bound
    model = clark_model(n=ns.n)
    budget = Budget(rng_seed=ns.seed)
    estimates = [cj_upper_bound(model, j, budget=budget) for j in range(1, ns.jmax + 1)]
    bounds = [e.upper_bound for e in estimates]
    rows = [(e.j, float(e.rho_star), float(e.upper_bound), e.budget.describe())
            for e in estimates]
    _write_csv(out / "minimax.csv", ["j", "rho_star", "upper_bound", "budget"], rows)
    results = {"n": ns.n, "estimates": [e.to_json_dict() for e in estimates]}
    checks = {
        "all_negative": all(b < 0 for b in bounds),
        "nondecreasing": all(b1 <= b2 + 1e-15 for b1, b2 in zip(bounds, bounds[1:])),
        "level_one_window": bounds[0] <= -8.0 / 243.0 + 1e-9 and bounds[0] >= -1.0 / 6.0 - 1e-6,
    }
    return results, checks


def _run_bvp(ns, out: Path):
    from .bvp import energy_scaling_exponent, nodal_family, reshoot_values
    from .spaces import H01Grid
    grid = H01Grid(ns.nodes)
    family = nodal_family(ns.p, ns.kmax, grid)
    rows = [(s.k, float(s.energy_norm_sq), float(s.j_value), float(s.nehari_residual))
            for s in family]
    _write_csv(out / "family.csv", ["k", "energy_norm_sq", "j_value", "nehari_residual"],
               rows)
    sol1 = family[0]
    _write_csv(out / "base_solution.csv", ["x", "u"],
               [(float(x), float(u)) for x, u in zip(sol1.abscissae, sol1.values_full)])

    ks = np.arange(1, ns.kmax + 1)
    slope = float(np.polyfit(np.log(ks), np.log([s.energy_norm_sq for s in family]), 1)[0])
    expected = energy_scaling_exponent(ns.p)

    re2 = reshoot_values(ns.p, 2, grid)
    reshoot_dev = float(np.max(np.abs(re2 - family[1].grid_values.coords))) \
        if ns.kmax >= 2 else 0.0

    ratio = (1.0 - ns.p) / (2.0 * (ns.p + 1.0))
    j_dev = max(abs(s.j_value + ratio * s.energy_norm_sq) / abs(s.j_value)
                for s in family)
    results = {
        "p": ns.p, "kmax": ns.kmax, "nodes": ns.nodes,
        "family": [s.to_json_dict() for s in family],
        "fitted_energy_slope": slope, "expected_energy_slope": expected,
        "reshoot_sup_deviation": reshoot_dev,
    }
    checks = {
        "nehari": all(s.nehari_residual < 1e-6 for s in family),
        "energy_slope": abs(slope - expected) <= 0.01,
        "j_identity": j_dev <= 1e-6,
        "reshoot_matches": reshoot_dev <= 1e-5,
    }
    return results, checks


def _run_psdiag(ns, out: Path):
    model = clark_model(n=ns.n)
    seq = []
    for k in range(1, ns.n + 1):
        coords = np.zeros(ns.n + 1)
        coords[0] = 1.0
        coords[k] = 9.0 * 3.0 ** (-2 * k)
        seq.append(Point(coords, model.space))
    report = ps_diagnostic(model, seq, 0.0, tol=ns.tol)
    results = {
        "n": ns.n,
        "target_level": report.target_level,
        "values": list(report.value_trace),
        "residuals": list(report.residual_trace),
        "clusters": [[float(c) for c in p.coords] for p in report.cluster_points],
        "has_convergent_subsequence": report.has_convergent_subsequence,
        "note": report.note,
    }
    checks = {
        "values_negative_to_zero": all(v < 0 for v in report.value_trace)
        and report.values_converge,
        "residuals_vanish": report.residuals_vanish,
        "clusters_found": report.has_convergent_subsequence,
    }
    return results, checks


RUNNERS = {
    "enumerate": _run_enumerate,
    "scan": _run_scan,
    "deform": _run_deform,
    "stabilize": _run_stabilize,
    "minimax": _run_minimax,
    "bvp": _run_bvp,
    "psdiag": _run_psdiag,
}


def main(argv=None) -> int:
    parser = _build_parser()
    ns = parser.parse_args(argv)
    schema = SCHEMAS[ns.experiment]

    if ns.config:
        file_values = _load_config(ns.config, schema, parser)
    else:
        file_values = {}
    # resolution order: schema default < config file < explicit flag
    for key, (_typ, default, _help) in schema.items():
        if getattr(ns, key) is None:
            setattr(ns, key, file_values.get(key, default))
    for key in ("seed", "threads", "out"):
        if key in file_values and f"--{key}" not in (argv or sys.argv[1:]):
            setattr(ns, key, file_values[key])

    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    status = "error"
    checks = {}
    note = ""
    try:
        results, checks = RUNNERS[ns.experiment](ns, out)
        ok = all(checks.values())
        status = "ok" if ok else "verification-failed"
        payload = {
            "experiment": ns.experiment,
            "params": {k: getattr(ns, k) for k in schema},
            "seed": ns.seed,
            "results": results,
            "checks": checks,
        }
        _write_json(out / "results.json", payload)
        if not ok:
            failed = sorted(k for k, v in checks.items() if not v)
            print(f"clarklab {ns.experiment}: checks failed: {', '.join(failed)}",
                  file=sys.stderr)
        return 0 if ok else 2
    except ClarkLabError as exc:
        status = "verification-failed"
        note = f"{type(exc).__name__}: {exc}"
        print(f"clarklab {ns.experiment}: {note}", file=sys.stderr)
        return 2
    finally:
        manifest = {
            "experiment": ns.experiment,
            "params": {k: getattr(ns, k) for k in schema},
            "seed": ns.seed,
            "threads": ns.threads,
            "status": status,
            "note": note,
            "checks": checks,
            "versions": {
                "package": __version__,
                "python": sys.version.split()[0],
                "numpy": np.__version__,
            },
            "wall_time_s": time.time() - started,
        }
        _write_json(out / "manifest.json", manifest)


if __name__ == "__main__":
    sys.exit(main())
