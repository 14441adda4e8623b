# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled damped Newton kernel; same contract as ``_newton_py.newton_solve``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt, INFINITY
from scipy.linalg.cython_lapack cimport dpotrf, dpotrs
from scipy.linalg.cython_blas cimport dsymv

cnp.import_array()

DEF CONVERGED = 0
DEF MAXITER = 1
DEF NOT_SPD = 2


cdef inline double odd_pow(double x, double p) noexcept nogil:
    if x > 0:
        return pow(x, p)
    elif x < 0:
        return -pow(-x, p)
    return 0.0


cdef double residual(const double[::1, :] D, double a, double c, const double[::1] b,
                     double[::1] x, double q, double[::1] out) noexcept nogil:
    """out = a x^(q-1) + c D x - b; returns ||out||_2."""
    cdef int n = x.shape[0]
    cdef int one = 1
    cdef char uplo = b'L'
    cdef double zero = 0.0
    cdef double cc = c
    cdef int i
    cdef double s = 0.0
    # dsymv only reads D
    dsymv(&uplo, &n, &cc, <double *> &D[0, 0], &n, &x[0], &one, &zero, &out[0], &one)
    for i in range(n):
        out[i] += a * odd_pow(x[i], q - 1.0) - b[i]
        s += out[i] * out[i]
    return sqrt(s)


cdef void take_step(double[::1] v, double[::1] step, double[::1] w, double[::1] dw,
                    double t, double q, double[::1] out) noexcept nogil:
    cdef int i
    cdef int n = v.shape[0]
    if q < 2.0:
        for i in range(n):
            out[i] = odd_pow(w[i] + t * dw[i], 1.0 / (q - 1.0))
    else:
        for i in range(n):
            out[i] = v[i] + t * step[i]


def newton_solve(D, double a, double c, b, v0, double q, double tol=1e-8,
                 int maxiter=100, double delta=0.0):
    """Solve ``a |v|^(q-2) v + c D v = b`` by damped Newton with Cholesky solves.

    Returns ``(v, iterations, last_relative_update, status)``.
    """
    # inputs may be read-only (cached operator matrices)
    cdef const double[::1, :] Dm = np.asfortranarray(D, dtype=np.float64)
    cdef const double[::1] bm = np.ascontiguousarray(b, dtype=np.float64)
    v_arr = np.array(v0, dtype=np.float64, copy=True)
    cdef double[::1] v = v_arr
    cdef int n = v.shape[0]
    cdef double[::1, :] J = np.empty((n, n), dtype=np.float64, order="F")
    cdef double[::1] F = np.empty(n)
    cdef double[::1] Ft = np.empty(n)
    cdef double[::1] step = np.empty(n)
    cdef double[::1] trial = np.empty(n)
    # for q < 2 the step is taken in w = |v|^(q-2) v: w and dw = (dw/dv) dv
    cdef double[::1] w = np.empty(n)
    cdef double[::1] dw = np.empty(n)
    cdef double[::1] dwdv = np.empty(n)
    cdef int i, k, it, info, halvings
    cdef int one = 1
    cdef char uplo = b'L'
    cdef double fn, ft, t, scale, upd, rel = INFINITY, qm1 = q - 1.0
    cdef int status = MAXITER

    with nogil:
        fn = residual(Dm, a, c, bm, v, q, F)
        if fn == 0.0:
            status = CONVERGED
            it = 0
            rel = 0.0
        else:
            for it in range(1, maxiter + 1):
                for k in range(n):
                    for i in range(k, n):
                        J[i, k] = c * Dm[i, k]
                    if q < 2.0:
                        dwdv[k] = qm1 * pow(v[k] * v[k] + delta * delta, (q - 2.0) / 2.0)
                    else:
                        dwdv[k] = qm1 * pow(fabs(v[k]), q - 2.0)
                    J[k, k] += a * dwdv[k]
                dpotrf(&uplo, &n, &J[0, 0], &n, &info)
                if info != 0:
                    status = NOT_SPD
                    break
                for i in range(n):
                    step[i] = -F[i]
                dpotrs(&uplo, &n, &one, &J[0, 0], &n, &step[0], &n, &info)
                if q < 2.0:
                    for i in range(n):
                        w[i] = odd_pow(v[i], qm1)
                        dw[i] = dwdv[i] * step[i]
                t = 1.0
                take_step(v, step, w, dw, t, q, trial)
                ft = residual(Dm, a, c, bm, trial, q, Ft)
                halvings = 0
                while not (ft <= fn) and halvings < 30:
                    t *= 0.5
                    take_step(v, step, w, dw, t, q, trial)
                    ft = residual(Dm, a, c, bm, trial, q, Ft)
                    halvings += 1
                scale = 0.0
                upd = 0.0
                for i in range(n):
                    if fabs(v[i]) > scale:
                        scale = fabs(v[i])
                    if fabs(trial[i] - v[i]) > upd:
                        upd = fabs(trial[i] - v[i])
                if scale > 0:
                    rel = upd / scale
                elif upd == 0:
                    rel = 0.0
                else:
                    rel = INFINITY
                for i in range(n):
                    v[i] = trial[i]
                    F[i] = Ft[i]
                fn = ft
                if upd < tol * scale or fn == 0.0:
                    status = CONVERGED
                    break
    if status == MAXITER:
        it = maxiter
    return v_arr, it, rel, status
