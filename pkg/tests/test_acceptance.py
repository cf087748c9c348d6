"""The ten acceptance criteria, one test each, at their stated tolerances."""
import math
import time

import numpy as np

from symctl import scenario
from symctl.cli import _reduced_scenario, main
from symctl.control import accessible_sample
from symctl.demos import NAMES, demo_scenario
from symctl.flow import (DERIVATION_ONLY, VECTOR_FIELD, EscapedError, FlowWord, classify_derivation,
                         flow_word_apply, integrate)
from symctl.orbits import tangent_span_rank, verify_orbit_manifold
from symctl.poly import Polynomial
from symctl.smooth import SmoothMap, VectorField, apply_derivation
from symctl.symmetry import NonFreeError, catalog_action, commutation_rows, horizontal_lift, reduce_field

from oracles import expm_taylor


def demo(name):
    return scenario.from_dict(demo_scenario(name))


def test_01_flow_oracle(criterion):
    cases = [np.array([[0.0, -1.0], [1.0, 0.0]]), np.array([[1.0]])]
    worst, slowest = 0.0, 0.0
    for A in cases:
        n = A.shape[0]
        comps = [{tuple(int(k == j) for k in range(n)): A[i, j] for j in range(n) if A[i, j]} for i in range(n)]
        X = VectorField.from_poly(Polynomial(n, comps))
        x0 = np.array([1.0, 0.5])[:n]
        for t in (-2.0, -1.0, -0.5, 0.5, 1.0, 2.0):
            start = time.perf_counter()
            got = integrate(X, x0, t).at(t)
            slowest = max(slowest, time.perf_counter() - start)
            want = expm_taylor(A * t) @ x0
            worst = max(worst, float(np.linalg.norm(got - want) / np.linalg.norm(want)))
    ok = worst <= 1e-7 and slowest < 0.1
    criterion(1, "flow oracle", ok, f"max rel err {worst:.2e} (<= 1e-7), slowest run {slowest * 1e3:.1f} ms (< 100)")
    assert ok


def _demo_fields():
    seen = []
    for name in NAMES:
        sc = demo(name)
        for X in sc.family:
            seen.append((name, X, sc.base_point))
    return seen


def test_02_semigroup_and_reversibility(criterion):
    pairs = [(0.3, 0.2), (0.3, -0.5), (-0.4, 0.25), (0.7, -0.7)]
    worst, checked, skipped = 0.0, 0, 0
    start = time.perf_counter()
    for name, X, base in _demo_fields():
        fam = {X.label: X}
        for x0 in (base, base + 0.5):
            if not X.domain.contains(x0):
                continue
            for s, t in pairs:
                try:
                    two, _ = flow_word_apply(FlowWord([(X.label, s), (X.label, t)]), x0, fam)
                    one, _ = flow_word_apply(FlowWord([(X.label, s + t)]), x0, fam)
                    back, _ = flow_word_apply(FlowWord([(X.label, t), (X.label, -t)]), x0, fam)
                except EscapedError:
                    skipped += 1  # word leaves the half-line; not a flow composition there
                    continue
                scale = max(1.0, float(np.linalg.norm(one)))
                worst = max(worst, float(np.linalg.norm(two - one)) / scale,
                            float(np.linalg.norm(back - x0)) / max(1.0, float(np.linalg.norm(x0))))
                checked += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-7 and elapsed < 1.0 and checked > 0
    criterion(2, "semigroup & reversibility", ok,
              f"{checked} compositions over all demo fields ({skipped} escaped, skipped), "
              f"max rel residual {worst:.2e} (<= 1e-7), {elapsed:.2f} s (< 1)")
    assert ok


def _random_poly(rng, nout):
    comps = []
    for _ in range(nout):
        terms = {}
        for _ in range(int(rng.integers(1, 5))):
            terms[(int(rng.integers(0, 4)), int(rng.integers(0, 4)))] = float(rng.integers(-5, 6))
        comps.append(terms)
    return Polynomial(2, comps)


def test_03_leibniz(criterion):
    rng = np.random.default_rng(2024)
    sym_worst, bb_worst = 0.0, 0.0
    for _ in range(50):
        Xp, f, g = _random_poly(rng, 2), _random_poly(rng, 1), _random_poly(rng, 1)
        x = rng.uniform(-1.5, 1.5, size=2)
        # symbolic: X(fg) - X(f) g - f X(g) as a polynomial, then at x
        r = (f * g).directional(Xp) - f.directional(Xp) * g - f * g.directional(Xp)
        sym_worst = max(sym_worst, float(np.max(np.abs(r(x)))) if not r.is_zero() else 0.0)
        # blackbox: every map wrapped opaquely, derivatives by central differences
        Xb = VectorField.from_fn(lambda z, Xp=Xp: Xp(z), 2)
        fb = SmoothMap.blackbox(lambda z, f=f: f(z), 2, 1)
        gb = SmoothMap.blackbox(lambda z, g=g: g(z), 2, 1)
        fgb = SmoothMap.blackbox(lambda z, f=f, g=g: f(z) * g(z), 2, 1)
        res = apply_derivation(Xb, fgb, x) - apply_derivation(Xb, fb, x) * g(x)[0] \
            - f(x)[0] * apply_derivation(Xb, gb, x)
        bb_worst = max(bb_worst, abs(res))
    ok = sym_worst == 0.0 and bb_worst <= 1e-6
    criterion(3, "Leibniz suite", ok,
              f"50 triples, symbolic residual {sym_worst:g} (== 0), blackbox {bb_worst:.2e} (<= 1e-6)")
    assert ok


_COMMUTE = {
    "z2-line": ["z2-line-scale"],
    "so2-plane": ["so2-radial", "so2-rotation-only", "circle-orbit"],
    "z2-plane": ["z2-plane-cone"],
}
_GRID = {
    1: [[-1.0], [-0.5], [0.25], [0.75], [1.5]],
    2: [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.5], [0.5, -1.5], [1.2, 0.8]],
}


def test_04_commuting_diagram(criterion):
    ts = np.linspace(-1.0, 1.0, 9)
    worst, count, gaps = 0.0, 0, 0
    start = time.perf_counter()
    for action_name, names in _COMMUTE.items():
        _, inv = catalog_action(action_name)
        for name in names:
            sc = demo(name)
            W = np.random.default_rng(0).uniform(-2, 2, size=(16, sc.system.n))
            for X in sc.family:
                Xbar = reduce_field(X, inv, W)
                for x0 in _GRID[sc.system.n]:
                    for _, r, _ in commutation_rows(X, inv, x0, ts, sc.integrator, Xbar):
                        if r is None:
                            gaps += 1
                            continue
                        worst = max(worst, r)
                        count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-6 and elapsed < 2.0 and gaps == 0
    criterion(4, "reduction commuting diagram", ok,
              f"3 actions, {count} (field, x0, t) rows, max residual {worst:.2e} (<= 1e-6), "
              f"{gaps} gaps, {elapsed:.2f} s (< 2)")
    assert ok


def test_05_closed_forms(criterion):
    sc = demo("z2-line-scale")
    red = reduce_field(sc.family["scale"], sc.invariant_map, np.array([[0.5], [1.0], [-2.0]]))
    q = red.closed_form
    scale_ok = (q is not None and set(q.components[0]) <= {(1,)}
                and abs(q.components[0].get((1,), 0.0) - 2.0) <= 1e-12)
    sc = demo("so2-rotation-only")
    red0 = reduce_field(sc.family["rotate"], sc.invariant_map, np.array([[1.0, 0.0], [0.3, -0.7]]))
    zero_ok = red0.closed_form is not None and all(abs(c) <= 1e-12 for c in red0.closed_form.components[0].values())
    ok = scale_ok and zero_ok
    criterion(5, "reduced closed forms", ok,
              f"z2-line-scale -> {red.describe()[0]}, so2-rotation-only -> {red0.describe()[0]}")
    assert ok


def test_06_horizontal_lift(criterion):
    sc = demo("so2-radial")
    action, inv = sc.action, sc.invariant_map
    rng = np.random.default_rng(6)
    r = rng.uniform(0.3, 2.0, 16)
    th = rng.uniform(-math.pi, math.pi, 16)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    sound, perp, equiv = 0.0, 0.0, 0.0
    W = rng.uniform(-2, 2, size=(16, 2))
    for X in sc.family:
        Xbar = reduce_field(X, inv, W)
        for x in pts:
            v = horizontal_lift(Xbar, inv, x)
            sound = max(sound, float(np.max(np.abs(inv.jacobian(x) @ v - Xbar(inv(x))))))
            perp = max(perp, abs(float(action.generator_vectors(x)[:, 0] @ v)))
            for g in action.elements():
                equiv = max(equiv, float(np.max(np.abs(horizontal_lift(Xbar, inv, g @ x) - g @ v))))
    try:
        horizontal_lift(reduce_field(sc.family["radial"], inv, W), inv, [0.0, 0.0])
        origin = False
    except NonFreeError:
        origin = True
    ok = sound <= 1e-10 and perp <= 1e-10 and equiv <= 1e-8 and origin
    criterion(6, "horizontal lift", ok,
              f"16 points x 8 rotations: |Drho.v - Xbar| {sound:.1e}, |v.gen| {perp:.1e}, "
              f"|lift(gx) - g lift(x)| {equiv:.1e}; origin raises: {origin}")
    assert ok


def test_07_classification_table(criterion):
    probes = [[0.0], [1.0]]
    table = []
    for domain, sc in (("[0,inf)", demo("halfline")), ("R", demo("fullline"))):
        for label, name in (("scale", "x d/dx"), ("drift", "d/dx"), ("drift-back", "-d/dx")):
            table.append((domain, name, classify_derivation(sc.family[label], probes, sc.integrator).verdict))
    expected = [
        ("[0,inf)", "x d/dx", VECTOR_FIELD), ("[0,inf)", "d/dx", DERIVATION_ONLY),
        ("[0,inf)", "-d/dx", DERIVATION_ONLY),
        ("R", "x d/dx", VECTOR_FIELD), ("R", "d/dx", VECTOR_FIELD), ("R", "-d/dx", VECTOR_FIELD),
    ]
    ok = table == expected
    criterion(7, "derivation classification table", ok,
              "; ".join(f"{d} {n} -> {v}" for d, n, v in table))
    assert ok


def test_08_orbit_witness(criterion):
    start = time.perf_counter()
    sc = demo("brockett-pair")
    cloud = accessible_sample(sc.family, sc.base_point, sc.seeded_sampler, sc.integrator)
    b_rep = verify_orbit_manifold(cloud, sc.radius, sc.sv_cutoff, sc.seed)
    b_rank = tangent_span_rank(sc.family, sc.base_point, 2)

    sc = demo("circle-orbit")
    cloud = accessible_sample(sc.family, sc.base_point, sc.seeded_sampler, sc.integrator)
    c_rep = verify_orbit_manifold(cloud, sc.radius, sc.sv_cutoff, sc.seed)
    c_locals = [d for _, d, _ in c_rep.per_point]

    reduced = _reduced_scenario(demo("z2-line-scale"))
    dims = {}
    for s0 in (1.0, 0.0):
        reduced["base_point"] = [s0]
        red = scenario.from_dict(reduced)
        cl = accessible_sample(red.family, red.base_point, red.seeded_sampler, red.integrator)
        dims[s0] = verify_orbit_manifold(cl, red.radius, red.sv_cutoff, red.seed).global_dim
    elapsed = time.perf_counter() - start
    ok = (b_rep.global_dim == 2 == b_rank and c_rep.global_dim == 1 and len(c_locals) == 32
          and set(c_locals) == {1} and dims == {1.0: 1, 0.0: 0} and elapsed < 10.0)
    criterion(8, "orbit theorem witness", ok,
              f"brockett dim {b_rep.global_dim} / rank {b_rank}; circle dim {c_rep.global_dim} "
              f"({len(c_locals)} locals, values {sorted(set(c_locals))}); reduced z2 dim "
              f"{dims[1.0]} at s=1, {dims[0.0]} at s=0; {elapsed:.2f} s (< 10)")
    assert ok


def test_09_replay(criterion):
    total, good, worst = 0, 0, 0.0
    for name in NAMES:
        sc = demo(name)
        if not sc.system.state_model.contains(sc.base_point):
            continue
        cloud = accessible_sample(sc.family, sc.base_point, sc.seeded_sampler, sc.integrator, verify=False)
        for word, x in zip(cloud.words, cloud.points):
            y, _ = flow_word_apply(word, cloud.base_point, sc.family, sc.integrator)
            err = float(np.max(np.abs(y - x)))
            worst = max(worst, err)
            good += err <= 1e-6
            total += 1
    ok = good == total and total > 0
    criterion(9, "replay oracle", ok, f"{good}/{total} points over all demos replay within 1e-6 (max {worst:.1e})")
    assert ok


def test_10_determinism(tmp_path, criterion):
    same = True
    for name in ("brockett-pair", "circle-orbit", "halfline"):
        runs = []
        for k in range(2):
            out = tmp_path / f"{name}-{k}"
            assert main(["reach", "--scenario", f"demo:{name}", "--seed", "0", "--out", str(out)]) == 0
            runs.append({f: (out / f).read_bytes() for f in ("cloud.csv", "words.json", "report.json")})
        same &= runs[0] == runs[1]
    criterion(10, "determinism", same, "repeated seed-0 reach runs byte-identical (cloud.csv, words.json, report.json)"
              if same else "outputs differ between runs")
    assert same
