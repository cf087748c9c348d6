"""Command-line front end.

Examples::

    symctl demo brockett-pair --out out/
    symctl reach --scenario scen.json --seed 0 --words 200 --out out/
    symctl classify --scenario demo:halfline --field drift
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import demos
from .control import Sampler, accessible_sample, equivariance_residual, replay_residual, \
    section_invariance_residual
from .flow import classify_derivation, integrate
from .orbits import InsufficientSamplesError, tangent_span_rank, verify_orbit_manifold
from .poly import Polynomial, express_in
from .scenario import SCHEMA, Scenario, ScenarioError, from_dict, load
from .symmetry import (NotInvariantError, commutation_rows, field_invariance_residual,
                       reduce_field)

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NOT_INVARIANT = 3
EXIT_INSUFFICIENT = 4

CHECK_THRESHOLD = 1e-6
REDUCE_T_GRID = (-1.0, -0.5, -0.25, 0.25, 0.5, 1.0)

log = logging.getLogger("symctl")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False, default=_default) + "\n"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _write(out: Path, name: str, text: str) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    p = out / name
    p.write_text(text, encoding="utf-8")
    return p


def _state_samples(sc: Scenario, k: int = 16) -> np.ndarray:
    if sc.witness_samples is not None:
        return sc.witness_samples
    rng = np.random.default_rng(sc.seed)
    n = sc.system.n
    scale = max(1.0, 1.5 * float(np.max(np.abs(sc.base_point))))
    pts = np.vstack([sc.base_point, rng.uniform(-scale, scale, size=(8 * k, n))])
    return np.array([p for p in pts if sc.system.state_model.contains(p)][:k])


# commands ---------------------------------------------------------------------

def cmd_check(sc: Scenario, out: Path) -> tuple[int, dict]:
    if sc.action is None:
        raise ScenarioError("action required")
    xs = _state_samples(sc)
    us = sc.system.control_model.sample(np.random.default_rng(sc.seed + 1), 8)
    gs = sc.action.elements()
    eq = equivariance_residual(sc.system, sc.action, gs, xs, us)
    sec_res = {}
    for s in sc.sections:
        try:
            sec_res[s.label] = section_invariance_residual(s, sc.action, xs, gs)
        except ValueError as exc:
            sec_res[s.label] = str(exc)
    field_res = {X.label: field_invariance_residual(X, sc.action, xs, gs) for X in sc.family}
    values = [eq] + list(field_res.values()) + [v for v in sec_res.values() if isinstance(v, float)]
    ok = all(v <= CHECK_THRESHOLD for v in values) and all(isinstance(v, float) for v in sec_res.values())
    report = {
        "command": "check",
        "scenario": sc.name,
        "threshold": CHECK_THRESHOLD,
        "equivariance_residual": eq,
        "section_residuals": sec_res,
        "field_residuals": field_res,
        "verdict": "pass" if ok else "fail",
    }
    _write(out, "report.json", _dump(report))
    print(f"check {sc.name}: {report['verdict']} (equivariance residual {eq:.3g})")
    return EXIT_OK, report


def _reduced_scenario(sc: Scenario) -> dict | None:
    """Quotient control system: phibar(s, u) and sigmabar(s), when both have polynomial forms."""
    inv = sc.invariant_map
    rho = inv.rho.body
    n, m = sc.system.n, sc.system.m
    dyn = sc.system.dynamics.body
    rho_xu = rho.embed(n + m, list(range(n)))
    padded = Polynomial.stack([dyn, Polynomial.zero(n + m, m)])
    target = rho_xu.directional(padded)
    phibar = express_in(target, rho_xu, 6, passthrough=list(range(n, n + m)))
    if phibar is None:
        return None
    sections = []
    for s in sc.sections:
        sbar = express_in(s.map.body, rho, 6)
        if sbar is None:
            return None
        sections.append({"label": s.label, "map": sbar.chop(1e-12).to_json()})
    data = {
        "schema": SCHEMA,
        "name": f"{sc.name}/reduced",
        "state_model": inv.image_model.model.to_json(),
        "control_model": sc.system.control_model.to_json(),
        "dynamics": phibar.chop(1e-12).to_json(),
        "sections": sections,
        "base_point": inv(sc.base_point).tolist(),
        "sampler": {k: v for k, v in sc.sampler.to_json().items() if k != "seed"},
        "integrator": sc.integrator.to_json(),
        "analysis": {"radius": sc.radius, "sv_cutoff": sc.sv_cutoff, "bracket_depth": sc.bracket_depth},
        "seed": sc.seed,
    }
    return data


def cmd_reduce(sc: Scenario, out: Path) -> tuple[int, dict]:
    if sc.action is None:
        raise ScenarioError("action required")
    if sc.invariant_map is None:
        raise ScenarioError("reduce needs an invariant_map (or a catalog action)")
    inv = sc.invariant_map
    W = _state_samples(sc)
    fields = {}
    commutation = {}
    try:
        for X in sc.family:
            Xbar = reduce_field(X, inv, W)
            fields[X.label] = {
                "reduced": Xbar.describe(),
                "numeric_only": Xbar.numeric_only,
                "polynomial": None if Xbar.closed_form is None else Xbar.closed_form.to_json(),
            }
            rows = commutation_rows(X, inv, sc.base_point, REDUCE_T_GRID, sc.integrator, Xbar)
            vals = [r for _, r, _ in rows if r is not None]
            commutation[X.label] = {
                "residual": max(vals, default=0.0),
                "rows": [{"t": t, "residual": r, "note": note} for t, r, note in rows],
            }
    except NotInvariantError as exc:
        report = {"command": "reduce", "scenario": sc.name, "error": "not-invariant",
                  "message": str(exc), "witnesses": exc.witnesses}
        _write(out, "report.json", _dump(report))
        print(f"reduce {sc.name}: not invariant: {exc}", file=sys.stderr)
        for w in exc.witnesses:
            print(f"  witness {w}", file=sys.stderr)
        return EXIT_NOT_INVARIANT, report
    reduced = _reduced_scenario(sc)
    report = {
        "command": "reduce",
        "scenario": sc.name,
        "quotient_model": inv.image_model.model.to_json(),
        "reduced_fields": fields,
        "commutation": commutation,
        "reduced_scenario": "reduced_scenario.json" if reduced else None,
    }
    if reduced:
        _write(out, "reduced_scenario.json", _dump(reduced))
    _write(out, "report.json", _dump(report))
    for label, f in fields.items():
        print(f"reduce {sc.name}: {label} -> {', '.join(f['reduced'])} "
              f"(commutation residual {commutation[label]['residual']:.3g})")
    return EXIT_OK, report


def _reach(sc: Scenario):
    if not sc.system.state_model.contains(sc.base_point):
        raise ScenarioError(f"base point {sc.base_point.tolist()} is outside the state model")
    return accessible_sample(sc.family, sc.base_point, sc.seeded_sampler, sc.integrator, verify=False)


def cmd_reach(sc: Scenario, out: Path) -> tuple[int, dict]:
    cloud = _reach(sc)
    replay = replay_residual(cloud, sc.family, sc.integrator)
    _write(out, "cloud.csv", cloud.to_csv())
    _write(out, "words.json", cloud.words_json() + "\n")
    report = {
        "command": "reach",
        "scenario": sc.name,
        "base_point": sc.base_point.tolist(),
        "sampler": sc.seeded_sampler.to_json(),
        "points": len(cloud),
        "dropped": cloud.dropped,
        "replay_residual": replay,
        "max_membership_residual": cloud.max_violation(),
    }
    _write(out, "report.json", _dump(report))
    print(f"reach {sc.name}: {len(cloud)} points, {cloud.dropped} dropped, replay residual {replay:.3g}")
    return EXIT_OK, report


def cmd_classify(sc: Scenario, out: Path, field: str | None = None, probes=None) -> tuple[int, dict]:
    label = field or sc.classify_field
    if label is None:
        raise ScenarioError("no field to classify (use --field)")
    if label not in sc.family.labels:
        raise ScenarioError(f"unknown field label {label!r}; known: {', '.join(sc.family.labels)}")
    probes = probes if probes is not None else (sc.probes or [sc.base_point.tolist()])
    X = sc.family[label]
    n = X.dim
    pts = [np.asarray(p, dtype=float).reshape(n) for p in probes]
    for p in pts:
        if not X.domain.contains(p):
            raise ScenarioError(f"probe {p.tolist()} is outside the domain of {label!r}")
    result = classify_derivation(X, pts, sc.integrator)
    fwd = integrate(X, pts[0], sc.integrator.max_time, sc.integrator)
    bwd = integrate(X, pts[0], -sc.integrator.max_time, sc.integrator)
    curve = bwd
    curve.ts = np.concatenate([bwd.ts, fwd.ts[1:]])
    curve.xs = np.vstack([bwd.xs, fwd.xs[1:]])
    _write(out, f"curve_{label}.csv", curve.to_csv())
    report = {"command": "classify", "scenario": sc.name, "field": label} | result.to_json()
    _write(out, "report.json", _dump(report))
    print(f"classify {sc.name}: {label} is {result.verdict}")
    return EXIT_OK, report


def cmd_orbit_dim(sc: Scenario, out: Path) -> tuple[int, dict]:
    cloud = _reach(sc)
    _write(out, "cloud.csv", cloud.to_csv())
    _write(out, "words.json", cloud.words_json() + "\n")
    try:
        dim = verify_orbit_manifold(cloud, sc.radius, sc.sv_cutoff, seed=sc.seed)
    except InsufficientSamplesError as exc:
        report = {"command": "orbit-dim", "scenario": sc.name, "error": "insufficient-samples",
                  "message": str(exc), "hint": "raise --words or --radius"}
        _write(out, "report.json", _dump(report))
        print(f"orbit-dim {sc.name}: {exc}; try a larger --words", file=sys.stderr)
        return EXIT_INSUFFICIENT, report
    depth = sc.bracket_depth if all(f.is_polynomial for f in sc.family) else 1
    rank = tangent_span_rank(sc.family, sc.base_point, depth)
    report = {
        "command": "orbit-dim",
        "scenario": sc.name,
        "base_point": sc.base_point.tolist(),
        "points": len(cloud),
        "dropped": cloud.dropped,
        "tangent_span_rank": rank,
        "bracket_depth": depth,
    } | dim.to_json()
    _write(out, "report.json", _dump(report))
    print(f"orbit-dim {sc.name}: global_dim {dim.global_dim}, tangent_span_rank {rank}")
    return EXIT_OK, report


# argument handling --------------------------------------------------------------

COMMANDS = {
    "check": cmd_check,
    "reduce": cmd_reduce,
    "reach": cmd_reach,
    "classify": cmd_classify,
    "orbit-dim": cmd_orbit_dim,
}


def _scenario_from_arg(arg: str) -> Scenario:
    if arg.startswith("demo:"):
        try:
            return from_dict(demos.demo_scenario(arg[5:]))
        except KeyError as exc:
            raise ScenarioError(str(exc.args[0])) from None
    return load(arg)


def _apply_overrides(sc: Scenario, args) -> Scenario:
    if getattr(args, "seed", None) is not None:
        sc.seed = int(args.seed)
    if getattr(args, "words", None) is not None:
        s = sc.sampler
        sc.sampler = Sampler(int(args.words), s.max_letters, s.time_scale, s.seed, s.durations)
    if getattr(args, "radius", None) is not None:
        sc.radius = float(args.radius)
    if getattr(args, "base", None) is not None:
        base = np.array([float(v) for v in args.base.split(",")])
        if base.shape != sc.base_point.shape:
            raise ScenarioError(f"--base needs {sc.base_point.size} coordinates")
        sc.base_point = base
    return sc


def _parse_probe(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad probe {text!r}; use comma-separated numbers") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="symctl", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True,
                           help="scenario JSON path, or demo:<name> for a built-in demo")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", default="out")
        p.add_argument("--words", type=int, default=None, help="number of random flow words")
        p.add_argument("--radius", type=float, default=None, help="local PCA radius")
        p.add_argument("--base", default=None, help="override base point, e.g. 0,0")

    for name in COMMANDS:
        p = sub.add_parser(name)
        common(p)
        if name == "classify":
            p.add_argument("--field", default=None)
            p.add_argument("--probe", action="append", type=_parse_probe, default=None)
    p = sub.add_parser("demo", help="run a built-in demo scenario")
    p.add_argument("name", nargs="?", choices=demos.NAMES)
    p.add_argument("--list", action="store_true")
    common(p, scenario=False)
    return ap


def run_command(name: str, sc: Scenario, out: Path, args=None) -> tuple[int, dict]:
    if name == "classify" and args is not None:
        return cmd_classify(sc, out, getattr(args, "field", None), getattr(args, "probe", None))
    return COMMANDS[name](sc, out)


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    out = Path(args.out)
    try:
        if args.command == "demo":
            if args.list or not args.name:
                for n in demos.NAMES:
                    print(f"{n}: {' '.join(demos.demo_commands(n))}")
                return EXIT_OK
            data = demos.demo_scenario(args.name)
            _write(out, "scenario.json", _dump(data))
            code = EXIT_OK
            for cmd in demos.demo_commands(args.name):
                sc = _apply_overrides(from_dict(data), args)
                c, _ = run_command(cmd, sc, out / cmd)
                code = max(code, c)
            return code
        sc = _apply_overrides(_scenario_from_arg(args.scenario), args)
        code, _ = run_command(args.command, sc, out, args)
        return code
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
