"""Compiled optimizer core: non-unitarity / entropy costs and 2-D BFGS.

Mirrors _pure.py exactly (same algorithm, same constants); the entropy cost
calls LAPACK zheevd directly on preallocated buffers.
"""

import numpy as np

from libc.math cimport cos, sin, log2, isfinite, INFINITY

from scipy.linalg.cython_lapack cimport zheevd

cdef double ZERO_PROB = 1e-14
cdef double TIE_EPS = 1e-12
cdef double EV_FLOOR = 1e-18


cdef inline void _u_rows(double theta, double phi, double complex* u) noexcept:
    # u[0..3] = row-major 2x2 mixing unitary.
    cdef double ct = cos(theta)
    cdef double st = sin(theta)
    cdef double complex ep = cos(phi) + 1j * sin(phi)
    cdef double complex em = ep.conjugate()
    u[0] = ct * ep
    u[1] = st * em
    u[2] = -st * ep
    u[3] = ct * em


cdef class CostFunction:
    cdef double eval(self, double theta, double phi):
        return 0.0


cdef class NumuCost(CostFunction):
    cdef double complex o[2][2]
    cdef double complex t[2][2][2][2]

    def __init__(self, o_arr, t_arr):
        cdef int a, b, c, d
        o_arr = np.ascontiguousarray(o_arr, dtype=np.complex128)
        t_arr = np.ascontiguousarray(t_arr, dtype=np.complex128)
        for a in range(2):
            for b in range(2):
                self.o[a][b] = o_arr[a, b]
                for c in range(2):
                    for d in range(2):
                        self.t[a][b][c][d] = t_arr[a, b, c, d]

    cdef double eval(self, double theta, double phi):
        cdef double complex u[4]
        cdef double complex uj[2]
        cdef double p, tr4, total
        cdef int j, a, b, c, d
        _u_rows(theta, phi, u)
        total = 0.0
        for j in range(2):
            uj[0] = u[2 * j]
            uj[1] = u[2 * j + 1]
            p = 0.0
            for a in range(2):
                for b in range(2):
                    p += (uj[a].conjugate() * uj[b] * self.o[a][b]).real
            if p < ZERO_PROB:
                return INFINITY
            tr4 = 0.0
            for a in range(2):
                for b in range(2):
                    for c in range(2):
                        for d in range(2):
                            tr4 += (uj[a].conjugate() * uj[b]
                                    * uj[c].conjugate() * uj[d]
                                    * self.t[a][b][c][d]).real
            total += tr4 / p
        return 2.0 - total


cdef class Geo2Cost(CostFunction):
    cdef double complex o[2][2]
    cdef double complex[:, :, :, ::1] hl
    cdef double complex[:, :, :, ::1] hr
    cdef int mode, nl, nr
    cdef double complex[::1] gl
    cdef double complex[::1] gr
    cdef double[::1] wl
    cdef double[::1] wr
    cdef double complex[::1] zwork
    cdef double[::1] rwork
    cdef int[::1] iwork
    cdef int lzwork, lrwork, liwork

    def __init__(self, o_arr, hl, hr, int mode):
        cdef int a, b
        o_arr = np.ascontiguousarray(o_arr, dtype=np.complex128)
        for a in range(2):
            for b in range(2):
                self.o[a][b] = o_arr[a, b]
        self.hl = np.ascontiguousarray(hl, dtype=np.complex128)
        self.hr = np.ascontiguousarray(hr, dtype=np.complex128)
        self.mode = mode
        self.nl = self.hl.shape[2]
        self.nr = self.hr.shape[2]
        self.gl = np.empty(self.nl * self.nl, dtype=np.complex128)
        self.gr = np.empty(self.nr * self.nr, dtype=np.complex128)
        self.wl = np.empty(self.nl, dtype=np.float64)
        self.wr = np.empty(self.nr, dtype=np.float64)
        cdef int nmax = self.nl if self.nl > self.nr else self.nr
        # Workspace query for zheevd (jobz='N').
        cdef int info = 0, lwork = -1, lrwork = -1, liwork = -1, n = nmax
        cdef double complex zq
        cdef double rq
        cdef int iq
        cdef double complex adummy
        cdef double wdummy
        cdef char jobz = b'N'
        cdef char uplo = b'L'
        zheevd(&jobz, &uplo, &n, &adummy, &n, &wdummy, &zq, &lwork,
               &rq, &lrwork, &iq, &liwork, &info)
        self.lzwork = <int>zq.real
        self.lrwork = <int>rq
        self.liwork = iq
        self.zwork = np.empty(max(self.lzwork, 1), dtype=np.complex128)
        self.rwork = np.empty(max(self.lrwork, 1), dtype=np.float64)
        self.iwork = np.empty(max(self.liwork, 1), dtype=np.int32)

    cdef double _entropy(self, double complex[:, :, :, ::1] h,
                         double complex[::1] gbuf, double[::1] wbuf,
                         int n, double complex* uj, double p, bint right):
        cdef int k, l, i, info
        cdef Py_ssize_t m
        cdef double complex coeff
        cdef double complex* gp = &gbuf[0]
        cdef double ent, q
        cdef char jobz = b'N'
        cdef char uplo = b'L'
        cdef int nn = n
        for m in range(<Py_ssize_t>n * n):
            gp[m] = 0.0
        for k in range(2):
            for l in range(2):
                if right:
                    coeff = uj[k] * uj[l].conjugate()
                else:
                    coeff = uj[k].conjugate() * uj[l]
                _axpy_matrix(coeff, h, k, l, gp, n)
        info = 0
        zheevd(&jobz, &uplo, &nn, gp, &nn, &wbuf[0],
               &self.zwork[0], &self.lzwork, &self.rwork[0], &self.lrwork,
               &self.iwork[0], &self.liwork, &info)
        if info != 0:
            # Fall back to numpy on the rare convergence failure.
            g = np.asarray(gbuf[: n * n]).reshape(n, n)
            w = np.linalg.eigvalsh(g)
            for i in range(n):
                wbuf[i] = w[i]
        ent = 0.0
        for i in range(n):
            if wbuf[i] > EV_FLOOR:
                q = wbuf[i] / p
                ent -= q * log2(q)
        return ent

    cdef double eval(self, double theta, double phi):
        cdef double complex u[4]
        cdef double complex uj[2]
        cdef double p, total, s, parts
        cdef int j, a, b
        _u_rows(theta, phi, u)
        total = 0.0
        for j in range(2):
            uj[0] = u[2 * j]
            uj[1] = u[2 * j + 1]
            p = 0.0
            for a in range(2):
                for b in range(2):
                    p += (uj[a].conjugate() * uj[b] * self.o[a][b]).real
            if p < ZERO_PROB:
                continue
            s = 0.0
            parts = 0.0
            if self.mode == 0 or self.mode == 2:
                s += self._entropy(self.hl, self.gl, self.wl, self.nl, uj, p, 0)
                parts += 1.0
            if self.mode == 1 or self.mode == 2:
                s += self._entropy(self.hr, self.gr, self.wr, self.nr, uj, p, 1)
                parts += 1.0
            total += p * (s / parts)
        return total


cdef inline void _axpy_matrix(double complex coeff,
                              double complex[:, :, :, ::1] h,
                              int k, int l,
                              double complex* g, int n) noexcept nogil:
    cdef Py_ssize_t i
    cdef double complex* src = &h[k, l, 0, 0]
    for i in range(<Py_ssize_t>n * n):
        g[i] = g[i] + coeff * src[i]


cdef bint _central_grad(CostFunction f, double x0, double x1, double h,
                        double* g0, double* g1):
    cdef double fpp = f.eval(x0 + h, x1)
    cdef double fmm = f.eval(x0 - h, x1)
    cdef double gpp = f.eval(x0, x1 + h)
    cdef double gmm = f.eval(x0, x1 - h)
    if not (isfinite(fpp) and isfinite(fmm) and isfinite(gpp) and isfinite(gmm)):
        g0[0] = 0.0
        g1[0] = 0.0
        return 0
    g0[0] = (fpp - fmm) / (2.0 * h)
    g1[0] = (gpp - gmm) / (2.0 * h)
    return 1


def minimize_2d_c(CostFunction f, const double[:, ::1] seeds, int max_iters,
                  double grad_step, double tol):
    cdef double best_t = seeds[0, 0]
    cdef double best_p = seeds[0, 1]
    cdef double best_f = INFINITY
    cdef int n_conv = 0
    cdef int i, it, ls
    cdef bint converged, ok, accepted
    cdef double x0, x1, fx, g0, g1, d0, d1, gd, step, y0, y1, fy
    cdef double gy0, gy1, s0, s1, dg0, dg1, drop, sy, rho
    cdef double h00, h01, h11, a00, a01, a10, a11, b00, b01, b10, b11

    for i in range(seeds.shape[0]):
        x0 = seeds[i, 0]
        x1 = seeds[i, 1]
        fx = f.eval(x0, x1)
        converged = 0
        if isfinite(fx):
            ok = _central_grad(f, x0, x1, grad_step, &g0, &g1)
            h00 = 1.0
            h01 = 0.0
            h11 = 1.0
            for it in range(max_iters if ok else 0):
                d0 = -(h00 * g0 + h01 * g1)
                d1 = -(h01 * g0 + h11 * g1)
                gd = g0 * d0 + g1 * d1
                if gd > -1e-18:
                    d0 = -g0
                    d1 = -g1
                    gd = -(g0 * g0 + g1 * g1)
                if -gd < 1e-18:
                    converged = 1
                    break
                step = 1.0
                accepted = 0
                for ls in range(40):
                    y0 = x0 + step * d0
                    y1 = x1 + step * d1
                    fy = f.eval(y0, y1)
                    if isfinite(fy) and fy <= fx + 1e-4 * step * gd:
                        accepted = 1
                        break
                    step *= 0.5
                if not accepted:
                    converged = 1
                    break
                ok = _central_grad(f, y0, y1, grad_step, &gy0, &gy1)
                if not ok:
                    x0 = y0
                    x1 = y1
                    fx = fy
                    break
                s0 = y0 - x0
                s1 = y1 - x1
                dg0 = gy0 - g0
                dg1 = gy1 - g1
                drop = fx - fy
                x0 = y0
                x1 = y1
                fx = fy
                g0 = gy0
                g1 = gy1
                if drop <= tol:
                    converged = 1
                    break
                sy = s0 * dg0 + s1 * dg1
                if sy > 1e-12:
                    rho = 1.0 / sy
                    a00 = 1.0 - rho * s0 * dg0
                    a01 = -rho * s0 * dg1
                    a10 = -rho * s1 * dg0
                    a11 = 1.0 - rho * s1 * dg1
                    b00 = a00 * h00 + a01 * h01
                    b01 = a00 * h01 + a01 * h11
                    b10 = a10 * h00 + a11 * h01
                    b11 = a10 * h01 + a11 * h11
                    h00 = b00 * a00 + b01 * a01 + rho * s0 * s0
                    h01 = b00 * a10 + b01 * a11 + rho * s0 * s1
                    h11 = b10 * a10 + b11 * a11 + rho * s1 * s1
        if converged:
            n_conv += 1
        if fx < best_f - TIE_EPS:
            best_t = x0
            best_p = x1
            best_f = fx
    return best_t, best_p, best_f, n_conv


def numu_cost(double theta, double phi, o, t):
    cdef NumuCost f = NumuCost(o, t)
    return f.eval(theta, phi)


def geo2_cost_from_grams(double theta, double phi, o, hl, hr, int mode):
    cdef Geo2Cost f = Geo2Cost(o, hl, hr, mode)
    return f.eval(theta, phi)


def numu_select_raw(o, t, seeds, int max_iters, double grad_step, double tol):
    cdef NumuCost f = NumuCost(o, t)
    s = np.ascontiguousarray(seeds, dtype=np.float64)
    return minimize_2d_c(f, s, max_iters, grad_step, tol)


def geo2_select_raw(o, hl, hr, int mode, seeds, int max_iters,
                    double grad_step, double tol):
    cdef Geo2Cost f = Geo2Cost(o, hl, hr, mode)
    s = np.ascontiguousarray(seeds, dtype=np.float64)
    return minimize_2d_c(f, s, max_iters, grad_step, tol)
