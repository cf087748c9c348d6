import numpy as np
import pytest

from symctl import _kernels_py, kernels
from symctl.poly import Polynomial

needs_compiled = pytest.mark.skipif(not kernels.compiled_available(), reason="compiled kernels not built")

P = Polynomial(2, [{(2, 1): 0.5, (0, 0): -1.0, (1, 0): 3.0}, {(0, 3): 2.0}, {}])
EMPTY = (np.zeros(0), np.zeros((0, 2), dtype=np.int64), np.zeros(0, dtype=np.int64), 0)
ROT = Polynomial(2, [{(0, 1): -1.0}, {(1, 0): 1.0}])


def data(p):
    return p.arrays() + (p.nout,)


def test_poly_eval_matches_direct(backend):
    out = np.zeros(3)
    kernels.poly_eval(*P.arrays(), np.array([2.0, -1.0]), out)
    assert out.tolist() == [0.5 * 4 * -1 - 1 + 6, -2.0, 0.0]


@pytest.mark.parametrize("method", [kernels.RK4, kernels.DOPRI45])
def test_rotation_stays_on_circle(backend, method):
    ts, xs, status, _ = kernels.integrate_poly(data(ROT), EMPTY, EMPTY, np.array([1.0, 0.0]), np.pi / 2,
                                               method, 1e-3, 1e-10, 1e-12, 1e-8, 1e12, 10**6)
    xs = np.asarray(xs).reshape(len(ts), 2)
    assert status == kernels.TIME_LIMIT
    assert ts[-1] == pytest.approx(np.pi / 2, abs=1e-15)
    assert np.allclose(xs[-1], [0.0, 1.0], atol=1e-9)


def test_escape_status(backend):
    left = Polynomial(1, [{(0,): -1.0}])
    ineq = Polynomial(1, [{(1,): 1.0}])
    ts, _, status, _ = kernels.integrate_poly(data(left), EMPTY[:1] + (np.zeros((0, 1), dtype=np.int64),) + EMPTY[2:],
                                              data(ineq), np.array([1.0]), 5.0, kernels.DOPRI45,
                                              1e-3, 1e-10, 1e-12, 1e-8, 1e12, 10**6)
    assert status == kernels.ESCAPED
    assert ts[-1] <= 1.0


def test_blow_up_status(backend):
    sq = Polynomial(1, [{(2,): 1.0}])
    empty1 = (np.zeros(0), np.zeros((0, 1), dtype=np.int64), np.zeros(0, dtype=np.int64), 0)
    ts, _, status, _ = kernels.integrate_poly(data(sq), empty1, empty1, np.array([1.0]), 2.0,
                                              kernels.DOPRI45, 1e-3, 1e-10, 1e-12, 1e-8, 1e12, 10**6)
    assert status == kernels.BLOW_UP
    assert ts[-1] == pytest.approx(1.0, abs=1e-6)


@needs_compiled
@pytest.mark.parametrize("method", [kernels.RK4, kernels.DOPRI45])
def test_backends_agree(method):
    from symctl import _kernels
    field = Polynomial(2, [{(0, 1): 1.0}, {(1, 0): -1.0, (0, 1): -0.1, (3, 0): -0.2}])
    args = (data(field), EMPTY, EMPTY, np.array([0.3, -0.7]), 3.0, method, 1e-2, 1e-10, 1e-12, 1e-8, 1e12, 10**6)
    a = _kernels.integrate_poly(*args)
    b = _kernels_py.integrate_poly(*args)
    assert a[2] == b[2]
    assert len(a[0]) == len(b[0])
    # step controllers see rounding-level differences in the error norm, so
    # trajectories agree to integration tolerance rather than bit for bit
    assert np.allclose(np.asarray(a[0]), np.asarray(b[0]), rtol=0, atol=1e-8)
    assert np.allclose(np.asarray(a[1]), np.asarray(b[1]), rtol=0, atol=1e-8)
    x = np.array([0.4, 1.1])
    assert np.allclose(_kernels.step_poly(data(field), x, 0.05, method),
                       _kernels_py.step_poly(data(field), x, 0.05, method), rtol=0, atol=1e-15)


@needs_compiled
def test_poly_eval_backends_agree():
    from symctl import _kernels
    rng = np.random.default_rng(3)
    for x in rng.uniform(-2, 2, size=(20, 2)):
        a, b = np.zeros(3), np.zeros(3)
        _kernels.poly_eval(*P.arrays(), x, a)
        _kernels_py.poly_eval(*P.arrays(), x, b)
        assert np.allclose(a, b, rtol=1e-15, atol=0)


def test_use_backend_rejects_unknown():
    with pytest.raises(ValueError):
        kernels.use_backend("gpu")
