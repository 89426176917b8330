"""Command line interface: analyze, classify, simplex, portrait, verify.

Exit codes: 0 success, 1 analysis/diagnostic failure, 2 configuration error,
3 missing input artifact.  Every JSON artifact embeds the config hash and the
seed, and identical config + seed produce byte-identical output.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import SingularJacobianError, SType, find_all_fixed_points, verify_C1
from .classify import (
    ClassifyError,
    DegenerateDenominatorError,
    TieOnBoundaryError,
    classify_table1,
)
from .existence import ricker_condition, verify_existence
from .manifolds import (
    ManifoldError,
    conjugacy_decay_report,
    curve_from_json,
    curve_to_json,
    leaf_contraction_report,
    m2_expansion_report,
    pseudo_splitting,
    trace_stable_on_S,
    trace_unstable,
)
from .models import ConfigError, map_from_config
from .portrait import basin_raster, render_portrait
from .simplex import (
    NonConvergenceError,
    SimplexMesh,
    compute_carrying_simplex,
    estimate_tangent_cone,
    estimate_theta,
    invariance_residual,
    surface_distance,
    unordered_check,
)

EXIT_OK = 0
EXIT_ANALYSIS = 1
EXIT_CONFIG = 2
EXIT_MISSING = 3

_NUMERIC_DEFAULTS = {
    "mesh_resolution": 64,
    "mesh_tol": 1e-8,
    "mesh_max_iters": 5000,
    "existence_grid": 25,
    "basin_raster": 200,
    "basin_max_iter": 50000,
    "basin_tol": 1e-6,
    "fan_resolution": 33,
    "unit_tol": 1e-9,
    "leaf_radius_rel": 1e-3,
    "conjugacy_radius_rel": 1e-2,
    "rho": None,
    "sigma": None,
    "orbit_streaks": 8,
}


class RunConfig:
    """Validated run configuration: model document, numeric knobs, output
    paths and the sampling seed."""

    def __init__(self, doc: dict):
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "run config must be a JSON object")
        for key in doc:
            if key not in {"model", "numeric", "outputs", "seed"}:
                raise ConfigError(key, "unknown field")
        if "model" not in doc:
            raise ConfigError("model", "missing required field")
        self.model_doc = doc["model"]
        self.map = map_from_config(self.model_doc)
        numeric = dict(_NUMERIC_DEFAULTS)
        for key, val in (doc.get("numeric") or {}).items():
            if key not in _NUMERIC_DEFAULTS:
                raise ConfigError(f"numeric.{key}", "unknown field")
            numeric[key] = val
        for key in ("mesh_tol", "basin_tol", "unit_tol", "leaf_radius_rel", "conjugacy_radius_rel"):
            if not (isinstance(numeric[key], (int, float)) and numeric[key] > 0):
                raise ConfigError(f"numeric.{key}", "must be a positive number")
        if not (isinstance(numeric["mesh_resolution"], int) and numeric["mesh_resolution"] >= 8):
            raise ConfigError("numeric.mesh_resolution", "must be an integer >= 8")
        self.numeric = numeric
        self.outputs = doc.get("outputs") or {}
        if not isinstance(self.outputs, dict):
            raise ConfigError("outputs", "must be an object of path strings")
        seed = doc.get("seed", 0)
        if not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        self.seed = seed
        canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        self.config_hash = hashlib.sha256(canon.encode()).hexdigest()[:16]

    @classmethod
    def load(cls, path: str) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError("<config>", f"cannot read {path}: {exc}") from exc
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"<json:line {exc.lineno}, col {exc.colno}>", exc.msg) from exc
        return cls(doc)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    return obj


def _record_doc(rec) -> dict:
    return {
        "name": rec.name,
        "location": rec.location,
        "support": list(rec.support),
        "support_type": rec.support_type,
        "eigenvalues": [[z.real, z.imag] for z in rec.eigenvalues],
        "mu": [rec.mu.real, rec.mu.imag],
        "nu": rec.nu,
        "c1_holds": rec.c1_holds,
        "hyperbolic": rec.hyperbolic,
        "s_type": rec.s_type,
        "index": rec.index,
        "residual": rec.residual,
    }


def _write_json(path: str | None, doc: dict) -> str:
    text = json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"
    if path:
        Path(path).write_text(text)
    return text


def _boundary_sets(records):
    att = {
        r.name: r.location
        for r in records
        if r.support_type in ("axial", "planar") and r.s_type == SType.ATTRACTOR
    }
    rep = {
        r.name: r.location
        for r in records
        if r.support_type in ("axial", "planar") and r.s_type == SType.REPELLER
    }
    return att, rep


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_analyze(cfg: RunConfig, out: str | None, strict: bool) -> int:
    m = cfg.map
    report: dict = {
        "tool": f"csimplex analyze {__version__}",
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "model": cfg.model_doc,
        "warnings": [],
    }
    records = find_all_fixed_points(m)
    report["fixed_points"] = [_record_doc(r) for r in records]
    interior = [r for r in records if r.support_type == "interior"]
    if interior:
        try:
            rep_c1 = verify_C1(m, interior[0].location)
            report["c1"] = {
                "det": rep_c1.det,
                "inverse_min_entry": rep_c1.inverse_min_entry,
                "mu": [rep_c1.mu.real, rep_c1.mu.imag],
                "perron_vector": rep_c1.perron_vector,
                "passed": rep_c1.passed,
                "reason": rep_c1.reason,
            }
        except SingularJacobianError as exc:
            report["c1"] = {"passed": False, "reason": str(exc)}
        report["index"] = interior[0].index
    existence = verify_existence(m, grid=cfg.numeric["existence_grid"])
    report["existence"] = {
        "a1": {"passed": existence.a1.passed, "margin": existence.a1.margin},
        "a2": {"passed": existence.a2.passed, "margin": existence.a2.margin},
        "a3": {"passed": existence.a3.passed, "margin": existence.a3.margin},
        "passed": existence.passed,
        "grid_resolution": existence.grid_resolution,
    }
    if m.kind == "ricker":
        rc = ricker_condition(m.params)
        report["ricker_condition"] = {"passed": rc.passed, "margin": rc.margin}
        if not rc.passed:
            report["warnings"].append("Ricker closed-form condition fails")
    if m.n == 3 and m.params is not None:
        try:
            cls = classify_table1(m.params.A)
            report["classification"] = {
                "class_id": cls.class_id,
                "permutation": list(cls.permutation),
                "margins": cls.margins,
            }
        except ClassifyError as exc:
            report["warnings"].append(f"classification refused: {exc}")
    text = _write_json(out, report)
    if out is None:
        print(text, end="")
    if strict and not existence.passed:
        return EXIT_ANALYSIS
    return EXIT_OK


def cmd_classify(input_path: str, out: str | None, as_json: bool, strict: bool) -> int:
    path = Path(input_path)
    if not path.exists():
        print(f"input CSV not found: {input_path}", file=sys.stderr)
        return EXIT_MISSING
    rows = []
    errors = 0
    with path.open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not row[0].strip().lstrip("-").replace(".", "", 1).isdigit():
                continue  # header row
            try:
                vals = [float(c) for c in row[:9]]
                if len(vals) != 9:
                    raise ValueError("expected 9 columns a11..a33")
                A = np.array(vals).reshape(3, 3)
                if np.any(A <= 0):
                    raise ValueError("entries must be positive")
                res = classify_table1(A)
                rows.append(
                    {
                        "row": lineno,
                        "a": vals,
                        "class_id": res.class_id,
                        "permutation": "".join(str(p + 1) for p in res.permutation),
                        "margins": res.margins,
                        "error": "",
                    }
                )
            except (ValueError, DegenerateDenominatorError, TieOnBoundaryError) as exc:
                errors += 1
                rows.append({"row": lineno, "a": row[:9], "class_id": "", "permutation": "",
                             "margins": {}, "error": f"{type(exc).__name__}: {exc}"})
    if as_json:
        text = json.dumps(_jsonable({"rows": rows}), sort_keys=True, indent=2) + "\n"
        if out:
            Path(out).write_text(text)
        else:
            print(text, end="")
    else:
        lines = ["a11,a12,a13,a21,a22,a23,a31,a32,a33,class_id,permutation,min_margin,error"]
        for r in rows:
            margin = min(r["margins"].values()) if r["margins"] else ""
            a_cells = ",".join(str(v) for v in r["a"])
            lines.append(f'{a_cells},{r["class_id"]},{r["permutation"]},{margin},{r["error"]}')
        text = "\n".join(lines) + "\n"
        if out:
            Path(out).write_text(text)
        else:
            print(text, end="")
    if errors and strict:
        return EXIT_ANALYSIS
    return EXIT_OK


def cmd_simplex(cfg: RunConfig, out: str | None) -> int:
    m = cfg.map
    try:
        mesh = compute_carrying_simplex(
            m,
            resolution=cfg.numeric["mesh_resolution"],
            tol=cfg.numeric["mesh_tol"],
            max_iters=cfg.numeric["mesh_max_iters"],
        )
    except NonConvergenceError as exc:
        print(f"graph transform did not converge: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    doc = mesh.to_json()
    doc["config_hash"] = cfg.config_hash
    doc["seed"] = cfg.seed
    out = out or cfg.outputs.get("mesh") or "mesh.json"
    _write_json(out, doc)
    log_path = Path(out).with_suffix(Path(out).suffix + ".log")
    log_lines = [f"{i + 1} {r:.12e}" for i, r in enumerate(mesh.residual_history)]
    log_path.write_text("\n".join(log_lines) + "\n")
    print(f"wrote {out} ({mesh.sweeps} sweeps, residual {mesh.residual:.3e}) and {log_path}")
    return EXIT_OK


def _load_mesh(path: str) -> SimplexMesh:
    doc = json.loads(Path(path).read_text())
    return SimplexMesh.from_json(doc)


def cmd_portrait(
    cfg: RunConfig,
    mesh_path: str | None,
    out: str | None,
    stable_path: str | None,
    unstable_path: str | None,
    no_basins: bool,
) -> int:
    m = cfg.map
    mesh_path = mesh_path or cfg.outputs.get("mesh")
    if not mesh_path or not Path(mesh_path).exists():
        print(f"mesh file not found: {mesh_path}", file=sys.stderr)
        return EXIT_MISSING
    mesh = _load_mesh(mesh_path)
    records = find_all_fixed_points(m)
    att, rep = _boundary_sets(records)
    interior = [r for r in records if r.support_type == "interior"]
    curves = []
    try:
        if stable_path:
            curves.append(curve_from_json(json.loads(Path(stable_path).read_text())))
        if unstable_path:
            curves.append(curve_from_json(json.loads(Path(unstable_path).read_text())))
        if not curves and interior and interior[0].s_type == SType.SADDLE and len(att) == 2:
            q = interior[0].location
            unstable = trace_unstable(m, q, att)
            curves.append(unstable)
            if cfg.outputs.get("unstable"):
                doc = curve_to_json(unstable)
                doc.update(config_hash=cfg.config_hash, seed=cfg.seed)
                _write_json(cfg.outputs["unstable"], doc)
            if len(rep) == 2:
                stable = trace_stable_on_S(
                    m, mesh, q, rep, att,
                    resolution=cfg.numeric["fan_resolution"],
                    max_iter=cfg.numeric["basin_max_iter"],
                    basin_tol=cfg.numeric["basin_tol"],
                )
                curves.append(stable)
                if cfg.outputs.get("stable"):
                    doc = curve_to_json(stable)
                    doc.update(config_hash=cfg.config_hash, seed=cfg.seed)
                    _write_json(cfg.outputs["stable"], doc)
    except ManifoldError as exc:
        print(f"curve tracing failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    raster = None
    if not no_basins and len(att) >= 2:
        raster = basin_raster(
            m, mesh, att,
            resolution=cfg.numeric["basin_raster"],
            max_iter=cfg.numeric["basin_max_iter"],
            tol=cfg.numeric["basin_tol"],
        )
    rng = np.random.default_rng(cfg.seed)
    orbits = []
    w_scale = mesh.vertices.max(axis=0)
    for _ in range(int(cfg.numeric["orbit_streaks"])):
        x0 = rng.uniform(0.05, 1.0, 3) * w_scale
        orbits.append(m.orbit(x0, 40))
    att_edge = None
    if len(att) == 2:
        miss = [set(range(3)) - set(r.support) for r in records if r.name in att]
        shared = set.intersection(*miss) if miss else set()
        att_edge = bool(shared)
    meta = {"config_hash": cfg.config_hash, "seed": cfg.seed}
    if att_edge is not None:
        meta["attractors_share_edge"] = att_edge
    svg = render_portrait(records, curves, raster=raster, orbits=orbits, metadata=meta)
    out = out or cfg.outputs.get("svg") or "portrait.svg"
    Path(out).write_text(svg)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(cfg: RunConfig, out: str | None) -> int:
    m = cfg.map
    rng = np.random.default_rng(cfg.seed)
    checks: dict[str, dict] = {}
    report = {
        "tool": f"csimplex verify {__version__}",
        "config_hash": cfg.config_hash,
        "seed": cfg.seed,
        "checks": checks,
    }

    existence = verify_existence(m, grid=cfg.numeric["existence_grid"])
    checks["existence"] = {
        "passed": existence.passed,
        "margins": {
            "a1": existence.a1.margin,
            "a2": existence.a2.margin,
            "a3": existence.a3.margin,
        },
    }

    try:
        mesh = compute_carrying_simplex(
            m,
            resolution=cfg.numeric["mesh_resolution"],
            tol=cfg.numeric["mesh_tol"],
            max_iters=cfg.numeric["mesh_max_iters"],
        )
        checks["mesh_converged"] = {"passed": True, "sweeps": mesh.sweeps, "residual": mesh.residual}
    except NonConvergenceError as exc:
        mesh = exc.mesh
        checks["mesh_converged"] = {"passed": False, "residual": mesh.residual}

    records = find_all_fixed_points(m)
    caps = 1.0 / np.diag(m.params.A) if m.params is not None else mesh.vertices.max(axis=0)
    wn = float(np.linalg.norm(caps))
    violations = unordered_check(mesh, 1e-6 * wn)
    checks["h1_unordered"] = {"passed": not violations, "violations": len(violations)}
    inv_res = invariance_residual(m, mesh)
    checks["h4_invariance"] = {
        "passed": inv_res < 1e-4 * wn,
        "residual": inv_res,
        "bound": 1e-4 * wn,
    }
    inside = bool(np.all(mesh.vertices <= caps[None, :] * (1.0 + 1e-6)))
    checks["h5_localized"] = {"passed": inside}
    nonzero = [r for r in records if r.support]
    fp_dist = max(
        float(surface_distance(mesh, r.location[None])[0]) for r in nonzero
    )
    edge = mesh.max_edge_length()
    checks["fixed_points_on_surface"] = {
        "passed": fp_dist <= edge,
        "max_distance": fp_dist,
        "mesh_edge": edge,
    }

    interior = [r for r in records if r.support_type == "interior"]
    if interior and interior[0].c1_holds:
        q = interior[0].location
        split = pseudo_splitting(
            m, q, rho=cfg.numeric["rho"], sigma=cfg.numeric["sigma"]
        )
        qn = float(np.linalg.norm(q))
        leaf = leaf_contraction_report(
            m, q, split.v, split.rho, radius=cfg.numeric["leaf_radius_rel"] * qn, rng=rng
        )
        checks["leaf_contraction"] = {
            "passed": leaf.passed,
            "max_ratio": leaf.max_ratio,
            "rho": split.rho,
            "ratios_at_q": leaf.ratios_at_q,
            "mu": split.mu,
        }
        conj = conjugacy_decay_report(
            m, mesh, q, split.v, split.w_basis, split.rho,
            radius=cfg.numeric["conjugacy_radius_rel"] * qn, rng=rng,
        )
        checks["conjugacy_decay"] = {
            "passed": conj.pass_fraction >= 0.9,
            "pass_fraction": conj.pass_fraction,
            "n_samples": conj.n_samples,
            "rho_plus_slack": conj.rho + conj.slack,
        }
        m2 = m2_expansion_report(m, q, split.w_basis, split.sigma)
        checks["m2_expansion"] = {"passed": m2.found, "l": m2.l, "sigma": split.sigma}
        theta = estimate_theta(mesh, q, split.v, split.w_basis, 6 * edge)
        checks["theta_estimate"] = {"passed": bool(np.isfinite(theta)), "theta": theta}
        angles = []
        for radius in (8 * edge, 4 * edge, 2 * edge):
            angles.append(
                estimate_tangent_cone(mesh, q, radius, split.w_basis).angle_to_w
            )
        noise = 2.0 * edge / wn
        trend = angles[0] + noise >= angles[1] and angles[1] + noise >= angles[2]
        checks["tangent_cone_trend"] = {
            "passed": bool(trend),
            "angles": angles,
            "radii": [8 * edge, 4 * edge, 2 * edge],
            "noise_floor": noise,
        }

    all_passed = all(c.get("passed", False) for c in checks.values())
    report["passed"] = all_passed
    text = _write_json(out, report)
    if out is None:
        print(text, end="")
    else:
        print(f"wrote {out} (passed={all_passed})")
    return EXIT_OK if all_passed else EXIT_ANALYSIS


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="csimplex",
        description="carrying simplex analysis for competitive Kolmogorov maps",
    )
    parser.add_argument("--version", action="version", version=f"csimplex {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="run config JSON path")
            p.add_argument("--seed", type=int, default=None, help="override config seed")
            p.add_argument("--resolution", type=int, default=None, help="override mesh resolution")
        p.add_argument("--out", default=None, help="output path")

    p = sub.add_parser("analyze", help="fixed points, spectra, (C1), index, existence")
    add_common(p)
    p.add_argument("--strict", action="store_true", help="nonzero exit when existence fails")

    p = sub.add_parser("classify", help="classify interaction matrices from CSV")
    p.add_argument("--input", required=True, help="CSV with columns a11..a33")
    p.add_argument("--out", default=None)
    p.add_argument("--json", action="store_true", dest="as_json")
    p.add_argument("--strict", action="store_true", help="nonzero exit when any row errors")

    p = sub.add_parser("simplex", help="compute the carrying simplex mesh")
    add_common(p)

    p = sub.add_parser("portrait", help="render the SVG phase portrait")
    add_common(p)
    p.add_argument("--mesh", default=None, help="mesh JSON (from the simplex command)")
    p.add_argument("--stable", default=None, help="stable curve JSON")
    p.add_argument("--unstable", default=None, help="unstable curve JSON")
    p.add_argument("--no-basins", action="store_true")

    p = sub.add_parser("verify", help="run the invariant/diagnostic battery")
    add_common(p)
    p.add_argument("--strict", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "classify":
            return cmd_classify(args.input, args.out, args.as_json, args.strict)
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            print(f"config error: cannot read {args.config}: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            print(f"config error: line {exc.lineno}, col {exc.colno}: {exc.msg}", file=sys.stderr)
            return EXIT_CONFIG
        if args.seed is not None:
            doc["seed"] = args.seed
        if args.resolution is not None:
            doc.setdefault("numeric", {})["mesh_resolution"] = args.resolution
        cfg = RunConfig(doc)
        if args.command == "analyze":
            return cmd_analyze(cfg, args.out, args.strict)
        if args.command == "simplex":
            return cmd_simplex(cfg, args.out)
        if args.command == "portrait":
            return cmd_portrait(cfg, args.mesh, args.out, args.stable, args.unstable, args.no_basins)
        if args.command == "verify":
            return cmd_verify(cfg, args.out)
        parser.error(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
