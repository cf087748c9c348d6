"""Pure-Python/numpy kernels.

Reference implementation of the compiled kernels in ``_kernels.pyx``; also the
driver for fields that are not polynomial (blackbox evaluators).
"""
from __future__ import annotations

import numpy as np

TIME_LIMIT = 0
ESCAPED = 1
BLOW_UP = 2
NON_FINITE = 3
MAX_STEPS = 4

RK4 = 0
DOPRI45 = 1

# Dormand-Prince 5(4)
_A = (
    (),
    (1 / 5,),
    (3 / 40, 9 / 40),
    (44 / 45, -56 / 15, 32 / 9),
    (19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729),
    (9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656),
    (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84),
)
_B = (35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0)
_E = (71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)


def poly_eval(coef, exps, rows, x, out):
    """out[rows[t]] += coef[t] * prod_j x[j]**exps[t, j]; out is zeroed first."""
    out[:] = 0.0
    if coef.shape[0] == 0:
        return
    terms = coef * np.prod(np.power(x[None, :], exps), axis=1)
    np.add.at(out, rows, terms)


def _violation(eq, ineq, x) -> float:
    v = 0.0
    if eq is not None:
        r = eq(x)
        if r.size:
            v = max(v, float(np.max(np.abs(r))))
    if ineq is not None:
        r = ineq(x)
        if r.size:
            v = max(v, float(np.max(-r)))
    return v


def rk4_step(f, x, h):
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def dopri_step(f, x, h):
    """One Dormand-Prince step; returns (x_new, error_vector)."""
    ks = []
    for i in range(7):
        xi = x.copy()
        for j, a in enumerate(_A[i]):
            if a != 0.0:
                xi += h * a * ks[j]
        ks.append(f(xi))
    x_new = x.copy()
    err = np.zeros_like(x)
    for j in range(7):
        if _B[j] != 0.0:
            x_new += h * _B[j] * ks[j]
        if _E[j] != 0.0:
            err += h * _E[j] * ks[j]
    return x_new, err


def single_step(f, x, h, method):
    if method == RK4:
        return rk4_step(f, x, h)
    return dopri_step(f, x, h)[0]


def drive(f, eq, ineq, x0, t_target, method, h, rtol, atol, escape_tol, blowup, max_steps):
    """Integrate dx/dt = f(x) from t=0 toward t_target.

    Stops at the target, at the first accepted step whose endpoint violates
    the constraints by more than ``escape_tol`` (that step is not recorded),
    when ``max|x|`` exceeds ``blowup``, or on a non-finite state. Returns
    ``(ts, xs, status, h_last)``; ``h_last`` is the signed size of the last
    attempted step.
    """
    x = np.array(x0, dtype=np.float64)
    n = x.shape[0]
    ts = [0.0]
    xs = [x.copy()]
    T = float(t_target)
    if T == 0.0:
        return np.array(ts), np.array(xs).reshape(1, n), TIME_LIMIT, 0.0
    sign = 1.0 if T > 0 else -1.0
    t = 0.0
    if method == DOPRI45:
        f0 = f(x)
        fn = float(np.max(np.abs(f0))) if n else 0.0
        h = abs(T) if fn == 0.0 else min(abs(T), 0.01 * max(1.0, float(np.max(np.abs(x)))) / fn)
    else:
        h = abs(h)
    h_last = 0.0
    steps = 0
    while True:
        remaining = abs(T - t)
        if remaining <= 1e-15 * max(1.0, abs(T)):
            return np.array(ts), np.array(xs), TIME_LIMIT, h_last
        if steps >= max_steps:
            return np.array(ts), np.array(xs), MAX_STEPS, h_last
        steps += 1
        hs = min(h, remaining)
        last = hs == remaining
        if method == RK4:
            x_new = rk4_step(f, x, sign * hs)
        else:
            x_new, err = dopri_step(f, x, sign * hs)
            scale = atol + rtol * np.maximum(np.abs(x), np.abs(x_new))
            en = float(np.sqrt(np.mean((err / scale) ** 2))) if n else 0.0
            if not np.isfinite(en):
                h = hs * 0.2
                if h < 1e-14 * max(1.0, abs(t)):
                    return np.array(ts), np.array(xs), NON_FINITE, sign * hs
                continue
            fac = 5.0 if en == 0.0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            if en > 1.0:
                h = hs * min(1.0, fac)
                if h < 1e-14 * max(1.0, abs(t)):
                    return np.array(ts), np.array(xs), NON_FINITE, sign * hs
                continue
            h = hs * fac if not last else max(h, hs * fac)
        h_last = sign * hs
        if not np.all(np.isfinite(x_new)):
            return np.array(ts), np.array(xs), NON_FINITE, h_last
        if _violation(eq, ineq, x_new) > escape_tol:
            return np.array(ts), np.array(xs), ESCAPED, h_last
        t = T if last else t + sign * hs
        x = x_new
        ts.append(t)
        xs.append(x.copy())
        if n and float(np.max(np.abs(x))) > blowup:
            return np.array(ts), np.array(xs), BLOW_UP, h_last


def _poly_fn(coef, exps, rows, m):
    def f(x):
        out = np.zeros(m)
        poly_eval(coef, exps, rows, x, out)
        return out
    return f


def integrate_poly(field, eq, ineq, x0, t_target, method, h, rtol, atol,
                   escape_tol, blowup, max_steps):
    """``drive`` specialised to polynomial data.

    ``field``, ``eq`` and ``ineq`` are ``(coef, exps, rows, nout)`` tuples.
    """
    f = _poly_fn(*field)
    fe = _poly_fn(*eq) if eq[3] else None
    fi = _poly_fn(*ineq) if ineq[3] else None
    return drive(f, fe, fi, x0, t_target, method, h, rtol, atol, escape_tol, blowup, max_steps)


def step_poly(field, x, h, method):
    return single_step(_poly_fn(*field), np.asarray(x, dtype=np.float64), h, method)
