import math

import numpy as np
import pytest

from symctl.poly import Polynomial
from symctl.smooth import DimensionError, SmoothMap, SubsetModel, VectorField
from symctl.symmetry import (CATALOG, DegreeBoundError, GroupAction, InvariantMap, NonFreeError,
                             NotInvariantError, QuotientModel, catalog_action,
                             commutation_rows, field_invariance_residual, horizontal_lift, reduce_field,
                             reduction_commutation_residual)

from oracles import expm_taylor, rotation

Z2L, INV_Z2L = catalog_action("z2-line")
SO2, INV_SO2 = catalog_action("so2-plane")
Z2P, INV_Z2P = catalog_action("z2-plane")

RNG = np.random.default_rng(11)
W1 = RNG.uniform(-2, 2, size=(12, 1))
W2 = RNG.uniform(-2, 2, size=(12, 2))


def vf(nvars, *comps, label="X"):
    return VectorField.from_poly(Polynomial(nvars, comps), label=label)


SCALE1 = vf(1, {(1,): 1.0})
RADIAL = vf(2, {(1, 0): 1.0}, {(0, 1): 1.0})
ROTGEN = vf(2, {(0, 1): -1.0}, {(1, 0): 1.0})
SPIRAL = vf(2, {(1, 0): 0.2, (0, 1): -1.0}, {(1, 0): 1.0, (0, 1): 0.2})


class TestGroupAction:
    def test_finite_closure(self):
        with pytest.raises(ValueError):
            GroupAction.finite([np.eye(2), rotation(math.pi / 2)])

    def test_finite_needs_identity(self):
        with pytest.raises(ValueError):
            GroupAction.finite([-np.eye(2)])

    def test_cyclic_four(self):
        g = GroupAction.finite([rotation(k * math.pi / 2) for k in range(4)])
        assert len(g.elements()) == 4

    def test_one_parameter_element_matches_oracle(self):
        A = np.array([[0.0, -1.0], [1.0, 0.0]])
        for t in (-2.0, 0.3, 1.0):
            assert np.allclose(SO2.element(t), expm_taylor(t * A), atol=1e-13)
        assert np.array_equal(SO2.element(0.0), np.eye(2))

    def test_default_samples(self):
        assert len(SO2.sample_params) == 8
        assert min(SO2.sample_params) == pytest.approx(-math.pi)
        assert max(SO2.sample_params) == pytest.approx(math.pi)

    def test_non_square_generator(self):
        with pytest.raises(DimensionError):
            GroupAction.one_parameter([[1.0, 0.0]])

    def test_stabilizer(self):
        assert SO2.stabilizer_nontrivial([0.0, 0.0])
        assert not SO2.stabilizer_nontrivial([1.0, 0.0])
        assert Z2L.stabilizer_nontrivial([0.0]) and not Z2L.stabilizer_nontrivial([0.5])

    def test_json(self):
        assert GroupAction.one_parameter(**SO2.to_json()).element(1.0) == pytest.approx(SO2.element(1.0))
        assert len(GroupAction.finite(Z2P.to_json()["matrices"]).elements()) == 2


class TestInvariance:
    def test_radial(self):
        assert field_invariance_residual(RADIAL, SO2, W2) <= 1e-12

    def test_constant_under_flip(self):
        X = vf(2, {(0, 0): 1.0}, {})
        assert field_invariance_residual(X, Z2P, [[0.0, 0.0]]) == 2.0

    def test_trivial_group(self):
        X = vf(2, {(0, 0): 1.0}, {(3, 1): 2.0})
        assert field_invariance_residual(X, SO2, W2, group_samples=[np.eye(2)]) == 0.0

    def test_rho_must_be_invariant(self):
        with pytest.raises(NotInvariantError):
            InvariantMap(SmoothMap.poly(Polynomial(1, [{(1,): 1.0}])), Z2L,
                         QuotientModel(SubsetModel.ambient(1)))


class TestReduce:
    def test_scale_on_line(self):
        red = reduce_field(SCALE1, INV_Z2L, W1)
        assert red.closed_form == Polynomial(1, [{(1,): 2.0}])
        assert red.describe() == ["2·s"]
        assert not red.numeric_only

    def test_rotation_reduces_to_zero(self):
        red = reduce_field(ROTGEN, INV_SO2, W2)
        assert red.closed_form.is_zero()
        assert red.describe() == ["0"]

    def test_radial(self):
        red = reduce_field(RADIAL, INV_SO2, W2)
        assert red.closed_form == Polynomial(1, [{(1,): 2.0}])

    def test_matches_pushforward_at_witnesses(self):
        red = reduce_field(SPIRAL, INV_Z2P, W2)
        for x in W2:
            assert np.allclose(red(INV_Z2P(x)), INV_Z2P.jacobian(x) @ SPIRAL(x), atol=1e-12)

    def test_not_invariant(self):
        X = vf(1, {(0,): 1.0})
        with pytest.raises(NotInvariantError) as info:
            reduce_field(X, INV_Z2L, W1)
        assert len(info.value.witnesses) > 0

    def test_degree_bound(self):
        X = vf(1, {(7,): 1.0})  # D rho . X = 2 x^8 = 2 s^4
        assert reduce_field(X, INV_Z2L, W1, degree_bound=4).closed_form == Polynomial(1, [{(4,): 2.0}])
        with pytest.raises(DegreeBoundError):
            reduce_field(X, INV_Z2L, W1, degree_bound=3, strict=True)
        red = reduce_field(X, INV_Z2L, W1, degree_bound=3)
        assert red.numeric_only and red.describe() == ["numeric-only"]
        assert red([2.0])[0] == pytest.approx(32.0, rel=1e-9)

    def test_blackbox_field_is_numeric(self):
        X = VectorField.from_fn(lambda x: np.array([x[0] * math.cosh(x[0])]), 1, label="c")
        red = reduce_field(X, INV_Z2L, W1)
        assert red.numeric_only
        x = 1.3
        assert red([x * x])[0] == pytest.approx(2 * x * x * math.cosh(x), rel=1e-8)


class TestCommutation:
    def test_scale_line(self):
        r = reduction_commutation_residual(SCALE1, INV_Z2L, [1.0], [-1.0, -0.5, 0.5, 1.0])
        assert r <= 1e-7

    def test_rotation_conserved(self):
        r = reduction_commutation_residual(ROTGEN, INV_SO2, [0.6, -0.3], [-1.0, -0.5, 0.5, 1.0])
        assert r <= 1e-9

    def test_zero_time_exact(self):
        rows = commutation_rows(SPIRAL, INV_Z2P, [1.0, 0.5], [0.0])
        assert rows == [(0.0, 0.0, "")]

    def test_cone(self):
        r = reduction_commutation_residual(SPIRAL, INV_Z2P, [1.0, 0.5], np.linspace(-1, 1, 9))
        assert r <= 1e-6

    def test_escape_reported(self):
        blow = vf(1, {(3,): 1.0})
        rows = commutation_rows(blow, INV_Z2L, [1.0], [0.25, 1.0])
        assert rows[0][1] is not None and rows[0][1] <= 1e-6
        assert rows[1][1] is None and "blow-up" in rows[1][2]


class TestLift:
    red_radial = reduce_field(RADIAL, INV_SO2, W2)

    def test_unit_points(self):
        assert np.allclose(horizontal_lift(self.red_radial, INV_SO2, [1.0, 0.0]), [1.0, 0.0], atol=1e-12)
        assert np.allclose(horizontal_lift(self.red_radial, INV_SO2, [0.0, 1.0]), [0.0, 1.0], atol=1e-12)

    def test_zero_reduced_field(self):
        red = reduce_field(ROTGEN, INV_SO2, W2)
        for x in W2[:5]:
            assert np.max(np.abs(horizontal_lift(red, INV_SO2, x))) <= 1e-12

    def test_soundness_and_invariance(self):
        for x in W2:
            v = horizontal_lift(self.red_radial, INV_SO2, x)
            assert np.max(np.abs(INV_SO2.jacobian(x) @ v - self.red_radial(INV_SO2(x)))) <= 1e-10
            assert abs(float(SO2.generator_vectors(x)[:, 0] @ v)) <= 1e-10
            for g in SO2.elements():
                assert np.max(np.abs(horizontal_lift(self.red_radial, INV_SO2, g @ x) - g @ v)) <= 1e-8

    def test_origin_not_free(self):
        with pytest.raises(NonFreeError):
            horizontal_lift(self.red_radial, INV_SO2, [0.0, 0.0])


class TestCatalog:
    def test_names(self):
        assert CATALOG == ("z2-line", "so2-plane", "z2-plane")
        with pytest.raises(KeyError):
            catalog_action("so3")

    def test_line_square(self):
        assert INV_Z2L([2.0]).tolist() == [4.0]
        assert INV_Z2L.image_model.contains([4.0])

    def test_cone_relation(self):
        s = INV_Z2P([1.0, 2.0])
        assert s.tolist() == [1.0, 2.0, 4.0]
        assert s[0] * s[2] - s[1] ** 2 == 0.0
        assert INV_Z2P.image_model.contains(s)
        assert not INV_Z2P.image_model.contains([1.0, 2.0, 3.0])

    def test_orbit_identification(self):
        assert INV_SO2([1.0, 0.0]).tolist() == INV_SO2([0.0, 1.0]).tolist() == [1.0]

    @pytest.mark.parametrize("name", CATALOG)
    def test_separation(self, name):
        action, inv = catalog_action(name)
        rng = np.random.default_rng(5)
        pts = rng.uniform(-2, 2, size=(40, action.dim))

        def orbit_distance(x, y):
            if action.kind == "finite":
                return min(np.max(np.abs(g @ x - y)) for g in action.elements())
            theta = math.atan2(y[1], y[0]) - math.atan2(x[1], x[0])
            return float(np.max(np.abs(rotation(theta) @ x - y)))

        for x in pts:
            g = action.elements()[-1] if action.kind == "finite" else rotation(rng.uniform(-3, 3))
            y = g @ x
            assert np.max(np.abs(inv(y) - inv(x))) <= 1e-9
            assert orbit_distance(x, y) <= 1e-6
        for x, y in zip(pts[:-1], pts[1:]):
            assert np.max(np.abs(inv(y) - inv(x))) > 1e-9
            assert orbit_distance(x, y) > 1e-6

    @pytest.mark.parametrize("X,inv", [(SCALE1, INV_Z2L), (RADIAL, INV_SO2), (ROTGEN, INV_SO2), (SPIRAL, INV_Z2P)])
    def test_pushforward_well_defined_on_orbits(self, X, inv):
        for x in np.random.default_rng(2).uniform(-2, 2, size=(10, X.dim)):
            base = inv.jacobian(x) @ X(x)
            for g in inv.action.elements():
                gx = g @ x
                assert np.max(np.abs(inv.jacobian(gx) @ X(gx) - base)) <= 1e-7

    def test_cone_tangency(self):
        for X in (SPIRAL, vf(2, {(1, 0): 0.5}, {(0, 1): -0.25})):
            red = reduce_field(X, INV_Z2P, W2)
            for x in np.random.default_rng(8).uniform(-2, 2, size=(20, 2)):
                s = INV_Z2P(x)
                grad = np.array([s[2], -2 * s[1], s[0]])
                assert abs(float(grad @ red(s))) <= 1e-7
