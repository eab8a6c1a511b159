"""Storage-matrix search for the output strict passivity LMI.

For a loop ``(A, B, C, D)`` and index ``rho`` we look for ``P = P^T > 0`` with

    [[A^T P + P A + 2 rho C^T C,  P B - C^T + 2 rho C^T D],
     [B^T P - C + 2 rho D^T C,    2 rho D^T D - D^T - D ]]  <= 0,

which is ``d/dt (x^T P x) <= 2 w^T z - 2 rho |z|^2`` written as a quadratic
form in ``(x, w)``; the storage function is ``x^T P x / 2``.

The lower-right block is constant.  On its kernel the off-diagonal block has
to vanish, which is an affine constraint on ``P``; it is eliminated exactly
so that the remaining search runs over a reduced, affinely parametrised
``P(y)``.  The search itself minimises the largest eigenvalue of the reduced
block:

1. alternating projections between the affine image ``{(block(P), P)}`` and
   the cone ``{X <= -delta I} x {Y >= eps I}``, warm-started from a Lyapunov
   solution;
2. if that stalls, a log-barrier Newton method on
   ``min s  s.t.  block(P) <= s I,  P >= (eps - s) I,  tr P <= T``, which
   either reaches ``s < 0`` or proves ``s* > 0`` via the duality gap.

Every returned certificate is re-checked by a plain eigenvalue computation
in the original coordinates.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .certify import NotHurwitzError, PassivityCertificate
from .inverter import ClosedLoopBus

logger = logging.getLogger(__name__)

__all__ = ["LMIResult", "lmi_block", "verify_certificate", "lmi_feasibility"]

LMI_REL_TOL = 1e-8
P_REL_FLOOR = 1e-9


@dataclass
class LMIResult:
    status: str  # "feasible" | "infeasible" | "indeterminate"
    certificate: PassivityCertificate | None
    best_residual: float
    iterations: int
    method: str = ""


def lmi_block(clb: ClosedLoopBus, P, rho: float) -> np.ndarray:
    A, B, C, D = clb.A, clb.B, clb.C, clb.D
    P = np.asarray(P, dtype=float)
    X11 = A.T @ P + P @ A + 2 * rho * C.T @ C
    X12 = P @ B - C.T + 2 * rho * C.T @ D
    X22 = 2 * rho * D.T @ D - D.T - D
    M = np.block([[X11, X12], [X12.T, X22]])
    return 0.5 * (M + M.T)


def verify_certificate(clb: ClosedLoopBus, P, rho: float) -> tuple[bool, float, float]:
    """Independent check of a storage matrix.

    Returns ``(ok, lmi_max_eig, p_min_eig)`` with tolerances relative to the
    block Frobenius norm and to ``trace(P)/n``.
    """
    P = np.asarray(P, dtype=float)
    M = lmi_block(clb, P, rho)
    lmax = float(np.linalg.eigvalsh(M)[-1])
    n = P.shape[0]
    if n == 0:
        return lmax <= LMI_REL_TOL * max(np.linalg.norm(M), 1e-300), lmax, float("inf")
    sym_err = np.abs(P - P.T).max()
    pmin = float(np.linalg.eigvalsh(0.5 * (P + P.T))[0])
    floor = P_REL_FLOOR * abs(np.trace(P)) / n
    ok = (lmax <= LMI_REL_TOL * np.linalg.norm(M)
          and pmin > floor
          and sym_err <= 1e-10 * max(np.abs(P).max(), 1e-300))
    return bool(ok), lmax, pmin


def _sym_basis(n: int) -> np.ndarray:
    basis = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0 if i == j else np.sqrt(0.5)
            basis.append(E)
    return np.array(basis).reshape(-1, n, n)


class _Reduced:
    """Affine parametrisation ``P(y) = P0 + sum y_k E_k`` and reduced block."""

    def __init__(self, A, B, C, D, rho):
        n, m = B.shape
        self.n, self.m = n, m
        R22 = 2 * rho * D.T @ D - D.T - D
        R22 = 0.5 * (R22 + R22.T)
        ev, V = np.linalg.eigh(R22)
        rscale = max(np.abs(ev).max(initial=0.0), 1.0)
        self.r22_violation = float(ev.max(initial=-np.inf))
        self.infeasible = bool(ev.size and ev.max() > 1e-12 * rscale)
        kern = np.abs(ev) <= 1e-12 * rscale
        Nk = V[:, kern]
        U = V[:, ~kern]
        self.U = U
        basis = _sym_basis(n)
        K0 = -C.T + 2 * rho * C.T @ D  # off-diagonal block = P B + K0
        # equality (P B + K0) Nk = 0
        if Nk.shape[1]:
            Lmat = np.stack([(E @ B @ Nk).ravel() for E in basis], axis=1)
            rhs = -(K0 @ Nk).ravel()
            y0, *_ = np.linalg.lstsq(Lmat, rhs, rcond=None)
            res = np.linalg.norm(Lmat @ y0 - rhs)
            if res > 1e-9 * max(np.linalg.norm(rhs), 1.0):
                self.infeasible = True
            null = sla.null_space(Lmat, rcond=1e-12)
        else:
            y0 = np.zeros(len(basis))
            null = np.eye(len(basis))
        self.P0 = np.einsum("k,kij->ij", y0, basis)
        self.E = np.einsum("kl,kij->lij", null, basis)
        self.dim = self.E.shape[0]

        def block(P):
            X11 = A.T @ P + P @ A
            X12 = (P @ B) @ U
            return X11, X12

        c11 = 2 * rho * C.T @ C
        c12 = K0 @ U
        c22 = U.T @ R22 @ U
        X11, X12 = block(self.P0)
        self.M0 = np.block([[X11 + c11, X12 + c12], [(X12 + c12).T, c22]])
        Ms = []
        for Ek in self.E:
            X11, X12 = block(Ek)
            Ms.append(np.block([[X11, X12], [X12.T, np.zeros_like(c22)]]))
        self.Ms = np.array(Ms).reshape(self.dim, *self.M0.shape)

    def P(self, y):
        return self.P0 + np.einsum("k,kij->ij", y, self.E)

    def M(self, y):
        return self.M0 + np.einsum("k,kij->ij", y, self.Ms)


def _state_scaling(A, C) -> np.ndarray:
    """Diagonal scaling from a Lyapunov solution with ``Q = C^T C + I``."""
    n = A.shape[0]
    Q = C.T @ C
    Q = Q / max(np.abs(Q).max(), 1e-300) + np.eye(n)
    try:
        X = sla.solve_continuous_lyapunov(A.T, -Q)
        d = np.diag(X)
        if np.all(np.isfinite(d)) and np.all(d > 0):
            return 1.0 / np.sqrt(d)
    except (np.linalg.LinAlgError, ValueError):
        pass
    return np.ones(n)


def _warm_start(red: _Reduced, A, C) -> np.ndarray:
    """Least-squares fit of ``P(y)`` to a scaled Lyapunov solution."""
    n = red.n
    if red.dim == 0:
        return np.zeros(0)
    Q = C.T @ C + np.eye(n) * max(np.abs(C.T @ C).max(), 1.0)
    X = sla.solve_continuous_lyapunov(A.T, -Q)
    X = 0.5 * (X + X.T)
    # fit P0 + E y ~ alpha X over (y, alpha)
    cols = np.concatenate([red.E.reshape(red.dim, -1).T, -X.reshape(-1, 1)], axis=1)
    sol, *_ = np.linalg.lstsq(cols, -red.P0.ravel(), rcond=None)
    return sol[:-1]


def _chol_ok(S):
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        return None


def _alternating_projections(red: _Reduced, y, eps, delta, iters):
    d = red.dim
    if d == 0:
        return y, 0
    # least-squares map y -> (M(y), P(y))
    Amat = np.concatenate([red.Ms.reshape(d, -1).T, red.E.reshape(d, -1).T], axis=0)
    pinv = np.linalg.pinv(Amat)
    off = np.concatenate([red.M0.ravel(), red.P0.ravel()])
    for it in range(iters):
        X, Y = red.M(y), red.P(y)
        lx, Vx = np.linalg.eigh(X)
        ly, Vy = np.linalg.eigh(Y)
        if lx[-1] <= -delta and ly[0] >= eps:
            return y, it
        Xp = (Vx * np.minimum(lx, -delta)) @ Vx.T
        Yp = (Vy * np.maximum(ly, eps)) @ Vy.T
        target = np.concatenate([Xp.ravel(), Yp.ravel()]) - off
        y = pinv @ target
    return y, iters


def _barrier(red: _Reduced, y, eps, tmax, max_outer=40, mu=8.0):
    """Log-barrier phase-I on ``min s``.  Returns ``(status, y, s, lower, iters)``."""
    d = red.dim
    n = red.n
    k = red.M0.shape[0]

    def mats(x):
        yy, s = x[:-1], x[-1]
        S1 = s * np.eye(k) - red.M(yy)
        S2 = red.P(yy) + (s - eps) * np.eye(n)
        s3 = tmax - np.trace(red.P(yy))
        return S1, S2, s3

    # derivatives of S1, S2, s3 w.r.t. x = (y, s)
    dS1 = np.concatenate([-red.Ms, np.eye(k)[None]], axis=0)
    dS2 = np.concatenate([red.E, np.eye(n)[None]], axis=0)
    ds3 = np.concatenate([-np.trace(red.E, axis1=1, axis2=2), [0.0]])
    m_total = k + n + 1

    def phi(x, t):
        S1, S2, s3 = mats(x)
        L1, L2 = _chol_ok(S1), _chol_ok(S2)
        if L1 is None or L2 is None or s3 <= 0:
            return np.inf
        return (t * x[-1] - 2 * np.log(np.diag(L1)).sum() - 2 * np.log(np.diag(L2)).sum()
                - np.log(s3))

    def grad_hess(x, t):
        S1, S2, s3 = mats(x)
        g = np.zeros(d + 1)
        H = np.zeros((d + 1, d + 1))
        for S, dS in ((S1, dS1), (S2, dS2)):
            Linv = sla.solve_triangular(np.linalg.cholesky(S), np.eye(S.shape[0]), lower=True)
            T = Linv @ dS @ Linv.T
            g -= np.trace(T, axis1=1, axis2=2)
            H += np.einsum("aij,bij->ab", T, T)
        g += ds3 / s3
        H += np.outer(ds3, ds3) / s3 ** 2
        g[-1] += t
        return g, H

    S1, S2, _ = mats(np.concatenate([y, [0.0]]))
    s0 = max(np.linalg.eigvalsh(-S1)[-1], eps - np.linalg.eigvalsh(red.P(y))[0], 0.0)
    scale = max(np.linalg.norm(red.M(y)), 1e-300)
    x = np.concatenate([y, [s0 + 0.1 * scale + 1e-12]])
    if not np.isfinite(phi(x, 1.0)):
        return "indeterminate", y, np.inf, -np.inf, 0
    t = 1.0 / scale
    iters = 0
    lower = -np.inf
    for outer in range(max_outer):
        for _ in range(60):
            iters += 1
            g, H = grad_hess(x, t)
            try:
                dx = -np.linalg.solve(H + 1e-14 * np.trace(H) / (d + 1) * np.eye(d + 1), g)
            except np.linalg.LinAlgError:
                dx = -np.linalg.lstsq(H, g, rcond=None)[0]
            dec = -g @ dx
            f0 = phi(x, t)
            step = 1.0
            while step > 1e-12:
                xn = x + step * dx
                fn = phi(xn, t)
                if fn <= f0 - 0.25 * step * dec:
                    break
                step *= 0.5
            else:
                break
            x = xn
            if x[-1] < 0:
                return "feasible", x[:-1], x[-1], lower, iters
            if dec < 1e-10:
                break
        lower = x[-1] - m_total / t
        if lower > 0:
            return "infeasible", x[:-1], x[-1], lower, iters
        t *= mu
    return "indeterminate", x[:-1], x[-1], lower, iters


def lmi_feasibility(clb: ClosedLoopBus, rho: float, ap_iters: int = 300,
                    barrier_outer: int = 40, tmax_factor: float = 1e4) -> LMIResult:
    """Search for a storage matrix certifying OSP index ``rho``.

    ``status`` is ``"feasible"`` (certificate attached, independently
    verified), ``"infeasible"`` (proved for ``trace(P)`` within the search
    box) or ``"indeterminate"`` (budget exhausted).
    """
    if not clb.is_hurwitz():
        raise NotHurwitzError("lmi_feasibility: closed loop not Hurwitz")
    A, B, C, D = (np.asarray(M, dtype=float) for M in (clb.A, clb.B, clb.C, clb.D))
    n = A.shape[0]
    if n == 0:
        ok, lmax, _ = verify_certificate(clb, np.zeros((0, 0)), rho)
        status = "feasible" if ok else "infeasible"
        cert = PassivityCertificate(np.zeros((0, 0)), rho, lmax, float("inf")) if ok else None
        return LMIResult(status, cert, lmax, 0, "static")

    t = _state_scaling(A, C)
    Ti = 1.0 / t
    As = (A * t[None, :]) * Ti[:, None]
    Bs = B * Ti[:, None]
    Cs = C * t[None, :]
    red = _Reduced(As, Bs, Cs, D, rho)
    if red.infeasible:
        return LMIResult("infeasible", None, red.r22_violation, 0, "structure")

    def unscale(Ps):
        P = Ps * Ti[:, None] * Ti[None, :]
        return 0.5 * (P + P.T)

    def attempt(y, method, iters):
        P = unscale(red.P(y))
        ok, lmax, pmin = verify_certificate(clb, P, rho)
        if ok:
            return LMIResult("feasible", PassivityCertificate(P, rho, lmax, pmin), lmax,
                             iters, method)
        return None

    y = _warm_start(red, As, Cs)
    eps = P_REL_FLOOR * 10 * max(np.trace(red.P(y)) / n, 1e-12)
    scale = max(np.linalg.norm(red.M(y)), 1e-300)
    y, it_ap = _alternating_projections(red, y, eps, 1e-6 * scale, ap_iters)
    res = attempt(y, "projections", it_ap)
    if res:
        return res

    tmax = tmax_factor * max(np.trace(red.P(y)), n)
    status, y2, s, lower, it_b = _barrier(red, y, eps, tmax, max_outer=barrier_outer)
    iters = it_ap + it_b
    if status == "feasible":
        res = attempt(y2, "barrier", iters)
        if res:
            return res
        status = "indeterminate"
    best = float(np.linalg.eigvalsh(lmi_block(clb, unscale(red.P(y2)), rho))[-1])
    logger.debug("LMI %s at rho=%g (s=%g, lower=%g)", status, rho, s, lower)
    return LMIResult(status, None, best, iters, "barrier")
