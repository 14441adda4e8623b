"""Pure-Python damped Newton kernel (reference implementation and fallback)."""
from __future__ import annotations

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

CONVERGED = 0
MAXITER = 1
NOT_SPD = 2


def odd_power(v, p):
    """Sign-preserving power ``|v|^(p-1) v`` written as ``sign(v)|v|^p``."""
    return np.sign(v) * np.abs(v) ** p


def newton_solve(D, a, c, b, v0, q, tol=1e-8, maxiter=100, delta=0.0):
    """Solve ``a |v|^(q-2) v + c D v = b`` by damped Newton.

    ``D`` must be symmetric positive definite and ``a >= 0``, so the Jacobian
    ``diag(a (q-1) |v|^(q-2)) + c D`` is SPD and is factored by Cholesky. For
    ``q < 2`` the diagonal uses ``(v^2 + delta^2)^((q-2)/2)``, and the step is
    applied to ``w = |v|^(q-2) v`` (whose inverse map is smooth) rather than
    to ``v``; this keeps Newton from overshooting at nodes where the solution
    is nearly zero. The step is halved (at most 30 times) until the residual
    2-norm does not increase. Iteration stops when ``||dv||_inf < tol ||v||_inf``.

    Returns ``(v, iterations, last_relative_update, status)``.
    """
    D = np.asarray(D, dtype=float)
    b = np.asarray(b, dtype=float)
    v = np.array(v0, dtype=float)
    qm1 = q - 1.0

    def residual(x):
        return a * odd_power(x, qm1) + c * (D @ x) - b

    F = residual(v)
    fn = np.linalg.norm(F)
    rel = np.inf
    if fn == 0.0:
        return v, 0, 0.0, CONVERGED
    for it in range(1, maxiter + 1):
        if q < 2.0:
            dwdv = qm1 * (v * v + delta * delta) ** ((q - 2.0) / 2.0)
        else:
            dwdv = qm1 * np.abs(v) ** (q - 2.0)
        J = c * D
        J[np.diag_indices_from(J)] += a * dwdv
        try:
            factor = cho_factor(J, lower=True, check_finite=False)
        except LinAlgError:
            return v, it, rel, NOT_SPD
        step = -cho_solve(factor, F, check_finite=False)
        if q < 2.0:
            w, dw = odd_power(v, qm1), dwdv * step

            def trial_at(t):
                return odd_power(w + t * dw, 1.0 / qm1)
        else:

            def trial_at(t):
                return v + t * step

        t = 1.0
        trial = trial_at(t)
        Ft = residual(trial)
        ft = np.linalg.norm(Ft)
        halvings = 0
        while not ft <= fn and halvings < 30:
            t *= 0.5
            trial = trial_at(t)
            Ft = residual(trial)
            ft = np.linalg.norm(Ft)
            halvings += 1
        scale = np.max(np.abs(v))
        upd = np.max(np.abs(trial - v))
        rel = upd / scale if scale > 0 else (0.0 if upd == 0 else np.inf)
        v, F, fn = trial, Ft, ft
        if upd < tol * scale or fn == 0.0:
            return v, it, rel, CONVERGED
    return v, maxiter, rel, MAXITER
