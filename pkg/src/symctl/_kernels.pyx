# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: polynomial evaluation and RK integration of polynomial fields.

Mirrors ``_kernels_py`` exactly in control flow; see that module for the
contract of each function.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, pow, isfinite
from libc.stdlib cimport malloc, free

cnp.import_array()

ctypedef cnp.int64_t i64

cdef enum:
    TIME_LIMIT = 0
    ESCAPED = 1
    BLOW_UP = 2
    NON_FINITE = 3
    MAX_STEPS = 4
    RK4 = 0

cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200, E6 = 22.0 / 525, E7 = -1.0 / 40


cdef struct Poly:
    double* coef
    i64* exps
    i64* rows
    i64 nterms
    i64 nvars
    i64 nout


cdef inline void peval(Poly* p, double* x, double* out) noexcept nogil:
    cdef i64 t, j, k, e
    cdef double term
    for j in range(p.nout):
        out[j] = 0.0
    for t in range(p.nterms):
        term = p.coef[t]
        for j in range(p.nvars):
            e = p.exps[t * p.nvars + j]
            for k in range(e):
                term *= x[j]
        out[p.rows[t]] += term


cdef Poly make_poly(double[::1] coef, i64[:, ::1] exps, i64[::1] rows, i64 nvars, i64 nout):
    cdef Poly p
    p.nterms = coef.shape[0]
    p.nvars = nvars
    p.nout = nout
    p.coef = &coef[0] if p.nterms else NULL
    p.exps = &exps[0, 0] if p.nterms and nvars else NULL
    p.rows = &rows[0] if p.nterms else NULL
    return p


def poly_eval(double[::1] coef, i64[:, ::1] exps, i64[::1] rows, double[::1] x, double[::1] out):
    cdef Poly p = make_poly(coef, exps, rows, x.shape[0], out.shape[0])
    if out.shape[0] == 0:
        return
    peval(&p, &x[0] if x.shape[0] else NULL, &out[0])


cdef double violation(Poly* eq, Poly* ineq, double* x, double* buf) noexcept nogil:
    cdef double v = 0.0
    cdef i64 i
    if eq.nout:
        peval(eq, x, buf)
        for i in range(eq.nout):
            if fabs(buf[i]) > v:
                v = fabs(buf[i])
    if ineq.nout:
        peval(ineq, x, buf)
        for i in range(ineq.nout):
            if -buf[i] > v:
                v = -buf[i]
    return v


cdef void rk4(Poly* f, double* x, double h, double* out, double* k, i64 n) noexcept nogil:
    # k holds 5 work vectors of length n
    cdef double* k1 = k
    cdef double* k2 = k + n
    cdef double* k3 = k + 2 * n
    cdef double* k4 = k + 3 * n
    cdef double* y = k + 4 * n
    cdef i64 i
    peval(f, x, k1)
    for i in range(n):
        y[i] = x[i] + 0.5 * h * k1[i]
    peval(f, y, k2)
    for i in range(n):
        y[i] = x[i] + 0.5 * h * k2[i]
    peval(f, y, k3)
    for i in range(n):
        y[i] = x[i] + h * k3[i]
    peval(f, y, k4)
    for i in range(n):
        out[i] = x[i] + (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i])


cdef void dopri(Poly* f, double* x, double h, double* out, double* err, double* k, i64 n) noexcept nogil:
    # k holds 8 work vectors of length n
    cdef double* k1 = k
    cdef double* k2 = k + n
    cdef double* k3 = k + 2 * n
    cdef double* k4 = k + 3 * n
    cdef double* k5 = k + 4 * n
    cdef double* k6 = k + 5 * n
    cdef double* k7 = k + 6 * n
    cdef double* y = k + 7 * n
    cdef i64 i
    peval(f, x, k1)
    for i in range(n):
        y[i] = x[i] + h * A21 * k1[i]
    peval(f, y, k2)
    for i in range(n):
        y[i] = x[i] + h * A31 * k1[i] + h * A32 * k2[i]
    peval(f, y, k3)
    for i in range(n):
        y[i] = x[i] + h * A41 * k1[i] + h * A42 * k2[i] + h * A43 * k3[i]
    peval(f, y, k4)
    for i in range(n):
        y[i] = x[i] + h * A51 * k1[i] + h * A52 * k2[i] + h * A53 * k3[i] + h * A54 * k4[i]
    peval(f, y, k5)
    for i in range(n):
        y[i] = (x[i] + h * A61 * k1[i] + h * A62 * k2[i] + h * A63 * k3[i]
                + h * A64 * k4[i] + h * A65 * k5[i])
    peval(f, y, k6)
    for i in range(n):
        y[i] = (x[i] + h * B1 * k1[i] + h * B3 * k3[i] + h * B4 * k4[i]
                + h * B5 * k5[i] + h * B6 * k6[i])
    peval(f, y, k7)
    for i in range(n):
        out[i] = (x[i] + h * B1 * k1[i] + h * B3 * k3[i] + h * B4 * k4[i]
                  + h * B5 * k5[i] + h * B6 * k6[i])
        err[i] = (h * E1 * k1[i] + h * E3 * k3[i] + h * E4 * k4[i]
                  + h * E5 * k5[i] + h * E6 * k6[i] + h * E7 * k7[i])


cdef class _Buffer:
    cdef public object ts
    cdef public object xs
    cdef public i64 size
    cdef i64 n

    def __init__(self, i64 n):
        self.n = n
        self.size = 0
        self.ts = np.empty(64)
        self.xs = np.empty((64, n))

    cdef void push(self, double t, double* x):
        cdef i64 cap = self.ts.shape[0]
        cdef double[::1] tv
        cdef double[:, ::1] xv
        cdef i64 i
        if self.size == cap:
            self.ts = np.concatenate([self.ts, np.empty(cap)])
            self.xs = np.concatenate([self.xs, np.empty((cap, self.n))])
        tv = self.ts
        xv = self.xs
        tv[self.size] = t
        for i in range(self.n):
            xv[self.size, i] = x[i]
        self.size += 1

    def result(self):
        return self.ts[:self.size].copy(), self.xs[:self.size].copy()


def integrate_poly(field, eq, ineq, x0, double t_target, int method, double h,
                   double rtol, double atol, double escape_tol, double blowup, i64 max_steps):
    cdef double[::1] fc = field[0], ec = eq[0], ic = ineq[0]
    cdef i64[:, ::1] fe = field[1], ee = eq[1], ie = ineq[1]
    cdef i64[::1] fr = field[2], er = eq[2], ir = ineq[2]
    cdef double[::1] xv = np.array(x0, dtype=np.float64)
    cdef i64 n = xv.shape[0]
    cdef Poly pf = make_poly(fc, fe, fr, n, field[3])
    cdef Poly pe = make_poly(ec, ee, er, n, eq[3])
    cdef Poly pi = make_poly(ic, ie, ir, n, ineq[3])
    cdef i64 nbuf = max(pe.nout, pi.nout, 1)
    cdef double* work = <double*> malloc(sizeof(double) * (11 * n + nbuf + 1))
    cdef double* x = work
    cdef double* xn = work + n
    cdef double* err = work + 2 * n
    cdef double* k = work + 3 * n
    cdef double* vbuf = work + 11 * n
    cdef _Buffer buf = _Buffer(n)
    cdef double T = t_target, t = 0.0, sign, hs, remaining, en, fac, s, mx, h_last = 0.0
    cdef i64 i, steps = 0
    cdef bint last
    cdef int status
    if work == NULL:
        raise MemoryError()
    try:
        for i in range(n):
            x[i] = xv[i]
        buf.push(0.0, x)
        if T == 0.0:
            return buf.result() + (TIME_LIMIT, 0.0)
        sign = 1.0 if T > 0 else -1.0
        if method == RK4:
            h = fabs(h)
        else:
            peval(&pf, x, k)
            mx = 0.0
            s = 0.0
            for i in range(n):
                if fabs(k[i]) > mx:
                    mx = fabs(k[i])
                if fabs(x[i]) > s:
                    s = fabs(x[i])
            if mx == 0.0:
                h = fabs(T)
            else:
                h = min(fabs(T), 0.01 * max(1.0, s) / mx)
        while True:
            remaining = fabs(T - t)
            if remaining <= 1e-15 * max(1.0, fabs(T)):
                status = TIME_LIMIT
                break
            if steps >= max_steps:
                status = MAX_STEPS
                break
            steps += 1
            hs = min(h, remaining)
            last = hs == remaining
            if method == RK4:
                rk4(&pf, x, sign * hs, xn, k, n)
            else:
                dopri(&pf, x, sign * hs, xn, err, k, n)
                en = 0.0
                for i in range(n):
                    s = atol + rtol * max(fabs(x[i]), fabs(xn[i]))
                    en += (err[i] / s) * (err[i] / s)
                if n:
                    en = sqrt(en / n)
                if not isfinite(en):
                    h = hs * 0.2
                    if h < 1e-14 * max(1.0, fabs(t)):
                        h_last = sign * hs
                        status = NON_FINITE
                        break
                    continue
                if en == 0.0:
                    fac = 5.0
                else:
                    fac = min(5.0, max(0.2, 0.9 * pow(en, -0.2)))
                if en > 1.0:
                    h = hs * min(1.0, fac)
                    if h < 1e-14 * max(1.0, fabs(t)):
                        h_last = sign * hs
                        status = NON_FINITE
                        break
                    continue
                if last:
                    h = max(h, hs * fac)
                else:
                    h = hs * fac
            h_last = sign * hs
            status = -1
            for i in range(n):
                if not isfinite(xn[i]):
                    status = NON_FINITE
            if status == NON_FINITE:
                break
            if violation(&pe, &pi, xn, vbuf) > escape_tol:
                status = ESCAPED
                break
            if last:
                t = T
            else:
                t = t + sign * hs
            mx = 0.0
            for i in range(n):
                x[i] = xn[i]
                if fabs(x[i]) > mx:
                    mx = fabs(x[i])
            buf.push(t, x)
            if n and mx > blowup:
                status = BLOW_UP
                break
        return buf.result() + (status, h_last)
    finally:
        free(work)


def step_poly(field, x0, double h, int method):
    cdef double[::1] fc = field[0]
    cdef i64[:, ::1] fe = field[1]
    cdef i64[::1] fr = field[2]
    cdef double[::1] xv = np.array(x0, dtype=np.float64)
    cdef i64 n = xv.shape[0]
    cdef Poly pf = make_poly(fc, fe, fr, n, field[3])
    out = np.empty(n)
    cdef double[::1] ov = out
    cdef double* work = <double*> malloc(sizeof(double) * (9 * n + 1))
    if work == NULL:
        raise MemoryError()
    try:
        if method == RK4:
            rk4(&pf, &xv[0], h, &ov[0], work, n)
        else:
            dopri(&pf, &xv[0], h, &ov[0], work + 8 * n, work, n)
    finally:
        free(work)
    return out
