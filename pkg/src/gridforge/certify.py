"""Certification of inverter state-feedback designs.

Checks the tuning constraints (eigenvalue margin, gain bound, frequency
response envelope) and output strict passivity (OSP) of the closed-loop map
``w -> z``.  OSP with index ``rho`` is decided two ways:

* in the frequency domain, ``G + G^H - 2 rho G^H G >= 0`` on a refined grid
  plus an exact test for imaginary-axis zeros of that Popov function;
* in the time domain, by searching for a storage matrix ``P`` for the
  dissipation LMI (see :mod:`gridforge.lmi`).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict

import numpy as np
import scipy.linalg as sla

from .inverter import ClosedLoopBus, ControllerGains

logger = logging.getLogger(__name__)

__all__ = [
    "NotHurwitzError",
    "NotPassiveError",
    "TuningSpec",
    "FrequencyGrid",
    "PassivityCertificate",
    "CertificationReport",
    "frequency_response",
    "osp_index_profile",
    "popov_axis_zeros",
    "check_hurwitz",
    "check_gain_bounds",
    "check_freq_bound",
    "freq_bound",
    "osp_freq_test",
    "osp_grid_margin",
    "max_osp_index",
    "certify_bus",
]


class NotHurwitzError(ValueError):
    """Closed loop has eigenvalues in the closed right half-plane."""


class NotPassiveError(ValueError):
    pass


@dataclass(frozen=True)
class TuningSpec:
    p_max: float = 125.0
    lambda_max: float = -5.0
    gamma: float = 1.5
    omega_c: float = 1e5
    rho_min: float = 0.0

    def __post_init__(self):
        if not self.p_max > 0:
            raise ValueError("p_max must be positive")
        if not self.lambda_max < 0:
            raise ValueError("lambda_max must be negative")
        if not (self.gamma > 0 and self.omega_c > 0):
            raise ValueError("gamma and omega_c must be positive")
        if self.rho_min < 0:
            raise ValueError("rho_min must be nonnegative")


@dataclass(frozen=True)
class FrequencyGrid:
    """Log-spaced sweep ``[w_min, w_max]`` plus DC, refined near extrema."""

    points: int = 400
    w_min: float = 1e-1
    w_max: float = 1e7
    refine: int = 6

    def omegas(self) -> np.ndarray:
        return np.concatenate([[0.0], np.logspace(np.log10(self.w_min),
                                                   np.log10(self.w_max), self.points)])


@dataclass
class PassivityCertificate:
    P: np.ndarray
    rho: float
    lmi_max_eig: float
    p_min_eig: float

    def to_dict(self) -> dict:
        return {
            "P": np.asarray(self.P, dtype=float).tolist(),
            "P_shape": list(np.asarray(self.P).shape),
            "rho": float(self.rho),
            "lmi_max_eig": float(self.lmi_max_eig),
            "p_min_eig": float(self.p_min_eig),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PassivityCertificate":
        P = np.array(d["P"], dtype=float).reshape(d["P_shape"])
        return cls(P, d["rho"], d["lmi_max_eig"], d["p_min_eig"])


@dataclass
class CertificationReport:
    hurwitz_ok: bool
    hurwitz_margin: float
    gains_ok: bool
    max_abs_gain: float
    freq_ok: bool = False
    worst_omega: float | None = None
    worst_gap: float | None = None
    osp_ok: bool = False
    osp_freq_ok: bool = False
    lmi_status: str = "skipped"
    certified_rho: float | None = None
    rho_min: float = 0.0
    inconsistent: bool = False
    certificate: PassivityCertificate | None = None
    grid: dict = field(default_factory=dict)

    @property
    def all_ok(self) -> bool:
        return self.hurwitz_ok and self.gains_ok and self.freq_ok and self.osp_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["certificate"] = self.certificate.to_dict() if self.certificate else None
        d["all_ok"] = self.all_ok
        return d


# ---------------------------------------------------------------------------
# frequency-domain primitives

def frequency_response(A, B, C, D, omegas) -> np.ndarray:
    """``G(jw) = C (jwI - A)^-1 B + D`` stacked over ``omegas``."""
    omegas = np.atleast_1d(np.asarray(omegas, dtype=float))
    A, B, C, D = (np.asarray(M, dtype=float) for M in (A, B, C, D))
    n = A.shape[0]
    if n == 0:
        return np.broadcast_to(D.astype(complex), (len(omegas),) + D.shape).copy()
    lhs = 1j * omegas[:, None, None] * np.eye(n) - A
    X = np.linalg.solve(lhs, np.broadcast_to(B.astype(complex), (len(omegas),) + B.shape))
    return C @ X + D


def _clb_response(clb: ClosedLoopBus, omegas):
    return frequency_response(clb.A, clb.B, clb.C, clb.D, omegas)


def osp_index_profile(clb: ClosedLoopBus, omegas) -> np.ndarray:
    """Largest ``rho`` for which the Popov matrix is PSD, per frequency.

    Equals the smallest eigenvalue of the Hermitian part of ``G(jw)^-1``;
    ``+inf`` where ``G`` is singular.
    """
    Gs = _clb_response(clb, omegas)
    out = np.full(len(Gs), np.inf)
    conds = np.linalg.cond(Gs)
    ok = np.isfinite(conds) & (conds < 1e12)
    if np.any(ok):
        Gi = np.linalg.inv(Gs[ok])
        Hm = 0.5 * (Gi + np.conj(np.swapaxes(Gi, -1, -2)))
        out[ok] = np.linalg.eigvalsh(Hm)[:, 0]
    return out


def _popov_min_eig(Gs, rho):
    GH = np.conj(np.swapaxes(Gs, -1, -2))
    Pi = Gs + GH - 2.0 * rho * GH @ Gs
    Pi = 0.5 * (Pi + np.conj(np.swapaxes(Pi, -1, -2)))
    lam = np.linalg.eigvalsh(Pi)[:, 0]
    gnorm = np.linalg.norm(Gs, ord=2, axis=(-2, -1))
    scale = 2.0 * gnorm + 2.0 * abs(rho) * gnorm ** 2 + 1e-300
    return lam, scale


def _local_extrema(values: np.ndarray, kind: str, limit: int) -> list[int]:
    v = values if kind == "min" else -values
    idx = [i for i in range(len(v))
           if (i == 0 or v[i] <= v[i - 1]) and (i == len(v) - 1 or v[i] <= v[i + 1])]
    idx.sort(key=lambda i: v[i])
    return idx[:limit]


def _refine(fun, omegas: np.ndarray, values: np.ndarray, kind: str, limit: int,
            points: int = 24, zooms: int = 4):
    """Polish local extrema of ``fun`` between neighbouring grid points.

    ``fun`` maps an array of frequencies to values.  Each extremum is
    bracketed by its grid neighbours and resampled on a finer log grid,
    zooming in ``zooms`` times.  Returns extra ``(omegas, values)`` samples.
    """
    sign = 1.0 if kind == "min" else -1.0
    pos = omegas[omegas > 0]
    extra_w, extra_v = [], []
    for i in _local_extrema(values, kind, limit):
        lo = omegas[max(i - 1, 0)]
        hi = omegas[min(i + 1, len(omegas) - 1)]
        lo = pos[0] * 1e-2 if lo <= 0 else lo
        for _ in range(zooms):
            if hi <= lo:
                break
            w = np.logspace(np.log10(lo), np.log10(hi), points)
            v = sign * np.asarray(fun(w))
            j = int(np.argmin(v))
            extra_w.append(w[j])
            extra_v.append(sign * v[j])
            lo, hi = w[max(j - 1, 0)], w[min(j + 1, points - 1)]
    return np.array(extra_w), np.array(extra_v)


def _profile_on_grid(clb: ClosedLoopBus, grid: FrequencyGrid):
    """Refined OSP-index profile: (omegas, values) sorted by frequency."""
    om = grid.omegas()
    vals = osp_index_profile(clb, om)
    if grid.refine:
        finite = np.where(np.isfinite(vals), vals, np.nanmax(vals[np.isfinite(vals)],
                                                             initial=0.0) + 1.0)
        ew, ev = _refine(lambda w: osp_index_profile(clb, w), om, finite, "min",
                         grid.refine)
        if len(ew):
            om = np.concatenate([om, ew])
            vals = np.concatenate([vals, ev])
    order = np.argsort(om)
    return om[order], vals[order]


def osp_grid_margin(clb: ClosedLoopBus, rho: float, grid: FrequencyGrid | None = None):
    """Distance of ``rho`` below the grid estimate of the OSP index.

    Positive when the frequency condition holds on the sampled grid with
    slack.  Returns ``(margin, omega_of_minimum)``.
    """
    grid = grid or FrequencyGrid()
    if clb.n_states == 0:
        return _static_osp_index(clb.D) - rho, 0.0
    om, vals = _profile_on_grid(clb, grid)
    k = int(np.argmin(vals))
    return float(vals[k] - rho), float(om[k])


def _static_osp_index(D) -> float:
    D = np.asarray(D, dtype=float)
    if np.linalg.cond(D) > 1e12:
        raise NotPassiveError("singular feedthrough: OSP index undefined for static map")
    Di = np.linalg.inv(D)
    return float(np.linalg.eigvalsh(0.5 * (Di + Di.T))[0])


# ---------------------------------------------------------------------------
# exact imaginary-axis test

def _popov_pencil(A, B, C, D, Q, S, R):
    """Pencil ``(M, E)`` whose finite eigenvalues are the zeros of
    ``Pi(s) = [G(-s)^T I] [[Q, S], [S^T, R]] [G(s); I]``."""
    n, m = B.shape
    M = np.block([
        [A, np.zeros((n, n)), B],
        [-C.T @ Q @ C, -A.T, -C.T @ (S + Q @ D)],
        [S.T @ C + D.T @ Q @ C, B.T, R + D.T @ S + S.T @ D + D.T @ Q @ D],
    ])
    E = np.zeros_like(M)
    E[: 2 * n, : 2 * n] = np.eye(2 * n)
    return M, E


def _inverse_realization(A, B, C):
    """Proper part of ``G^-1`` for ``G = C (sI-A)^-1 B`` with ``CB`` invertible.

    ``G^-1(s) = s F + D1 + C1 (sI - A1)^-1 B1`` with ``F = (CB)^-1``.
    """
    n, m = B.shape
    F = np.linalg.inv(C @ B)
    Pk = np.eye(n) - B @ F @ C
    N = sla.null_space(C)
    A1 = N.T @ Pk @ A @ N
    B1 = N.T @ Pk @ A @ B @ F
    C1 = -F @ C @ A @ N
    D1 = -F @ C @ A @ B @ F
    return F, A1, B1, C1, D1


def popov_axis_zeros(clb: ClosedLoopBus, rho: float) -> np.ndarray | None:
    """Nonnegative frequencies where the OSP Popov function is singular.

    Returns ``None`` when the test is structurally decided negative (the
    high-frequency behaviour already violates the inequality).
    """
    A, B, C, D = clb.A, clb.B, clb.C, clb.D
    n, m = B.shape
    if n == 0:
        return np.array([])
    scale = max(1.0, np.abs(np.linalg.eigvals(A)).max())
    if np.abs(D).max() > 0:
        R = D + D.T - 2 * rho * D.T @ D
        if np.linalg.eigvalsh(0.5 * (R + R.T))[0] < 0:
            return None
        sysm = (A, B, C, D, -2.0 * rho * np.eye(m), np.eye(m), np.zeros((m, m)))
        residual = lambda w: _popov_min_eig(_clb_response(clb, [w]), rho)[0][0]
    else:
        CB = C @ B
        cb_scale = np.abs(CB).max()
        if cb_scale == 0 or np.abs(CB - CB.T).max() > 1e-9 * cb_scale:
            return None
        if np.linalg.eigvalsh(0.5 * (CB + CB.T))[0] <= 1e-12 * cb_scale:
            return None
        F, A1, B1, C1, D1 = _inverse_realization(A, B, C)
        if A1.size and np.abs(np.linalg.eigvals(A1).real).min() < 1e-9 * scale:
            # transmission zero on the imaginary axis: G loses rank there
            return np.array([float(np.abs(np.linalg.eigvals(A1).imag).min())])
        if np.linalg.eigvalsh(0.5 * (D1 + D1.T))[0] - rho <= 0:
            return None
        sysm = (A1, B1, C1, D1, np.zeros((m, m)), np.eye(m), -2.0 * rho * np.eye(m))
        residual = lambda w: osp_index_profile(clb, [w])[0] - rho
    M, E = _popov_pencil(*sysm)
    alpha, beta = sla.eig(M, E, right=False, homogeneous_eigvals=True)
    finite = np.abs(beta) > 1e-10 * np.abs(alpha)
    lam = alpha[finite] / beta[finite]
    cand = lam[np.abs(lam.real) <= 1e-6 * (np.abs(lam) + scale * 1e-3)]
    zeros = []
    for w in np.unique(np.round(np.abs(cand.imag), 12)):
        r = residual(w)
        if abs(r) <= 1e-6 * (1.0 + abs(rho)) or r < 0:
            zeros.append(float(w))
    return np.array(zeros)


# ---------------------------------------------------------------------------
# constraint checks

def check_hurwitz(A, lambda_max: float) -> tuple[bool, float]:
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return True, float("inf")
    margin = float(lambda_max - np.linalg.eigvals(A).real.max())
    return margin >= 0, margin


def check_gain_bounds(gains: ControllerGains, p_max: float) -> tuple[bool, float]:
    m = gains.max_abs()
    return m <= p_max, m


def freq_bound(omega, gamma: float, omega_c: float):
    """Magnitude of the first-order envelope ``gamma * w_c / (jw + w_c)``."""
    return gamma * omega_c / np.sqrt(np.asarray(omega, dtype=float) ** 2 + omega_c ** 2)


def _require_hurwitz(clb: ClosedLoopBus, what: str):
    if not clb.is_hurwitz():
        raise NotHurwitzError(f"{what}: closed loop not Hurwitz, unbounded response")


def check_freq_bound(clb: ClosedLoopBus, gamma: float, omega_c: float,
                     grid: FrequencyGrid | None = None) -> tuple[bool, float, float]:
    """Largest singular value of ``G(jw)`` against the envelope.

    Returns ``(ok, worst_omega, worst_gap)`` where ``gap = sigma_max - bound``
    (negative gap means slack).
    """
    _require_hurwitz(clb, "check_freq_bound")
    grid = grid or FrequencyGrid()

    def gap(w):
        w = np.atleast_1d(w)
        s = np.linalg.norm(_clb_response(clb, w), ord=2, axis=(-2, -1))
        return s - freq_bound(w, gamma, omega_c)

    om = grid.omegas()
    g = gap(om)
    if grid.refine:
        ew, ev = _refine(gap, om, g, "max", grid.refine)
        if len(ew):
            om, g = np.concatenate([om, ew]), np.concatenate([g, ev])
    k = int(np.argmax(g))
    return bool(g[k] <= 0), float(om[k]), float(g[k])


def osp_freq_test(clb: ClosedLoopBus, rho: float, grid: FrequencyGrid | None = None) -> bool:
    """Frequency-domain OSP test with index ``rho``.

    True iff the Popov matrix is PSD on the refined grid and has no zeros on
    the imaginary axis, i.e. the inequality holds strictly at every finite
    frequency.
    """
    _require_hurwitz(clb, "osp_freq_test")
    grid = grid or FrequencyGrid()
    if clb.n_states == 0:
        return _static_osp_index(clb.D) >= rho - 1e-12
    om = grid.omegas()
    lam, scale = _popov_min_eig(_clb_response(clb, om), rho)
    if np.any(lam < -1e-12 * scale):
        return False
    if grid.refine:
        def rel(w):
            l, sc = _popov_min_eig(_clb_response(clb, w), rho)
            return l / sc
        _, ev = _refine(rel, om, lam / scale, "min", grid.refine)
        if len(ev) and np.any(ev < -1e-12):
            return False
    return _no_axis_zeros(clb, rho)


def _no_axis_zeros(clb: ClosedLoopBus, rho: float) -> bool:
    zeros = popov_axis_zeros(clb, rho)
    return zeros is not None and len(zeros) == 0


def max_osp_index(clb: ClosedLoopBus, tol: float = 1e-4,
                  grid: FrequencyGrid | None = None) -> float:
    """Largest OSP index, certified by :func:`osp_freq_test` to within ``tol``.

    The returned value always passes the exact test; the true index lies in
    ``[returned, returned + tol]``.
    """
    _require_hurwitz(clb, "max_osp_index")
    grid = grid or FrequencyGrid()
    if clb.n_states == 0:
        return _static_osp_index(clb.D)
    om, vals = _profile_on_grid(clb, grid)
    upper = float(vals.min())
    if not upper > 0:
        raise NotPassiveError(f"not passive (grid OSP index {upper:.4g})")
    if not np.isfinite(upper):
        raise NotPassiveError("OSP index profile undefined on the grid")
    # the refined grid already clears every rho below ``upper``; only the
    # exact axis-zero test is left at the first trial point
    trial = upper - 0.5 * tol
    if trial > 0 and _no_axis_zeros(clb, trial):
        return trial
    if not osp_freq_test(clb, 0.0, grid):
        raise NotPassiveError("not passive (Popov function indefinite at rho=0)")
    lo, hi = 0.0, max(trial, 0.0)
    while hi - lo > 0.5 * tol:
        mid = 0.5 * (lo + hi)
        if osp_freq_test(clb, mid, grid):
            lo = mid
        else:
            hi = mid
    return lo


def certify_bus(clb: ClosedLoopBus, gains: ControllerGains | None, spec: TuningSpec,
                grid: FrequencyGrid | None = None, lmi_options: dict | None = None
                ) -> CertificationReport:
    """Run every tuning and passivity check on one closed-loop inverter."""
    from .lmi import lmi_feasibility

    grid = grid or FrequencyGrid()
    h_ok, h_margin = check_hurwitz(clb.A, spec.lambda_max)
    if gains is not None:
        g_ok, g_max = check_gain_bounds(gains, spec.p_max)
    else:
        g_ok, g_max = True, 0.0
    report = CertificationReport(h_ok, h_margin, g_ok, g_max, rho_min=spec.rho_min,
                                 grid=asdict(grid))
    if not clb.is_hurwitz():
        logger.info("closed loop not Hurwitz; frequency and OSP checks skipped")
        return report
    report.freq_ok, report.worst_omega, report.worst_gap = check_freq_bound(
        clb, spec.gamma, spec.omega_c, grid)
    report.osp_freq_ok = osp_freq_test(clb, spec.rho_min, grid)
    try:
        report.certified_rho = max_osp_index(clb, 1e-4, grid)
    except NotPassiveError:
        report.certified_rho = None
    lmi = lmi_feasibility(clb, spec.rho_min, **(lmi_options or {}))
    report.lmi_status = lmi.status
    report.certificate = lmi.certificate
    lmi_ok = lmi.status == "feasible"
    report.osp_ok = report.osp_freq_ok and lmi_ok
    report.inconsistent = report.osp_freq_ok != lmi_ok
    if report.inconsistent:
        logger.warning("OSP frequency test (%s) and LMI (%s) disagree at rho=%g",
                       report.osp_freq_ok, lmi.status, spec.rho_min)
    return report
