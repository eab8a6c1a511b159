"""Derivative-free tuning of the inverter state-feedback gains.

Maximises the certified OSP index over the 16 entries of ``(K, M)`` subject
to the tuning constraints, folded into the objective as hinge penalties.
Each start runs a compass (coordinate pattern) search whose radius halves
whenever a full sweep brings no improvement.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .certify import (CertificationReport, FrequencyGrid, NotPassiveError, TuningSpec,
                      certify_bus, check_freq_bound, max_osp_index, osp_index_profile)
from .inverter import AugmentedPlant, ControllerGains, close_loop

logger = logging.getLogger(__name__)

__all__ = [
    "SynthesisConfig",
    "SynthesisResult",
    "SynthesisError",
    "candidate_terms",
    "evaluate_candidate",
    "stabilizing_seed",
    "synthesize_controller",
]

UNSTABLE_RHO = -1.0


class SynthesisError(RuntimeError):
    pass


@dataclass(frozen=True)
class SynthesisConfig:
    spec: TuningSpec = field(default_factory=TuningSpec)
    starts: int = 8
    budget_per_start: int = 2000
    seed: int = 0
    step_init: float = 16.0
    step_min: float = 0.01
    hurwitz_weight: float = 10.0
    gain_weight: float = 0.01
    freq_weight: float = 1.0
    search_tol: float = 1e-3
    perturbation: float = 5.0

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be >= 1")
        if self.budget_per_start < 100:
            raise ValueError("budget_per_start must be >= 100")
        if not self.step_min < self.step_init:
            raise ValueError("step_min must be smaller than step_init")


@dataclass
class SynthesisResult:
    gains: ControllerGains
    report: CertificationReport
    objective_history: list
    start_index: int
    feasible: bool
    objective: float

    def to_dict(self) -> dict:
        return {
            "K": self.gains.K.tolist(),
            "M": self.gains.M.tolist(),
            "feasible": self.feasible,
            "objective": self.objective,
            "start_index": self.start_index,
            "report": self.report.to_dict(),
        }


_SEARCH_GRID = FrequencyGrid(points=200, refine=3)


def candidate_terms(gains: ControllerGains, plant: AugmentedPlant, spec: TuningSpec,
                    cfg: SynthesisConfig | None = None,
                    grid: FrequencyGrid | None = None) -> dict:
    """Objective pieces for one candidate: ``rho`` and the three penalties."""
    cfg = cfg or SynthesisConfig(spec=spec)
    grid = grid or _SEARCH_GRID
    clb = close_loop(plant, gains)
    max_re = float(np.linalg.eigvals(clb.A).real.max())
    terms = {
        "max_re": max_re,
        "hurwitz_penalty": cfg.hurwitz_weight * max(0.0, max_re - spec.lambda_max),
        "gain_penalty": cfg.gain_weight * max(0.0, gains.max_abs() - spec.p_max),
        "freq_penalty": 0.0,
        "rho": UNSTABLE_RHO,
        "certified": False,
    }
    if max_re >= 0:
        return terms
    try:
        _, _, gap = check_freq_bound(clb, spec.gamma, spec.omega_c, grid)
    except np.linalg.LinAlgError:
        # pole numerically on the axis: score as unstable
        return terms
    terms["freq_penalty"] = cfg.freq_weight * max(0.0, gap)
    try:
        terms["rho"] = max_osp_index(clb, cfg.search_tol, grid)
        terms["certified"] = True
    except NotPassiveError:
        prof = osp_index_profile(clb, grid.omegas())
        terms["rho"] = float(np.clip(np.min(prof), UNSTABLE_RHO, 0.0)) - cfg.search_tol
    return terms


def _objective(t: dict) -> float:
    return t["rho"] - t["hurwitz_penalty"] - t["gain_penalty"] - t["freq_penalty"]


def _feasible(t: dict, spec: TuningSpec) -> bool:
    return (t["certified"] and t["hurwitz_penalty"] == 0 and t["gain_penalty"] == 0
            and t["freq_penalty"] == 0 and t["rho"] >= spec.rho_min)


def evaluate_candidate(gains: ControllerGains, plant: AugmentedPlant, spec: TuningSpec,
                       cfg: SynthesisConfig | None = None) -> float:
    """Certified OSP index minus weighted constraint violations."""
    return _objective(candidate_terms(gains, plant, spec, cfg))


def stabilizing_seed(plant: AugmentedPlant, p_max: float) -> ControllerGains:
    """LQR state feedback with ``M = 0``, fitted into the gain box.

    Weights penalise the integrator states so the seed already makes the
    closed loop Hurwitz.  The control weight is raised until the gains fit
    inside ``p_max``; if none fits, the cheapest one is clipped to the box
    (and may then fail to stabilise, which the search reports as
    infeasible).
    """
    Q = np.diag([1e-2, 1e-2, 1.0, 1.0, 1e4, 1e4])
    K = None
    for r in np.logspace(-6, 2, 33):
        try:
            X = sla.solve_continuous_are(plant.A, plant.B_u, Q, r * np.eye(2))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise SynthesisError(f"LQR seed failed: {exc}") from exc
        K = plant.B_u.T @ X / r
        if np.abs(K).max() <= p_max:
            break
    if not close_loop(plant, ControllerGains(K, np.zeros((2, 2)))).is_hurwitz():
        raise SynthesisError("LQR seed does not stabilise the plant")
    return ControllerGains(np.clip(K, -p_max, p_max), np.zeros((2, 2)))


def _pattern_search(f, x0, lo, hi, step_init, step_min, budget, rng):
    """Compass search with opportunistic acceptance and radius halving.

    ``f`` returns ``(objective, feasible)``.  Returns the incumbent, its
    value, the best strictly feasible point seen (or ``None``) with its
    value, and the best-so-far history (nondecreasing, one entry per
    evaluation).
    """
    x = np.clip(x0, lo, hi)
    fx, ok = f(x)
    best_ok = (x, fx) if ok else None
    history = [fx]
    step = step_init
    n = len(x)
    while step >= step_min and len(history) < budget:
        improved = False
        for i in rng.permutation(n):
            for sgn in (1.0, -1.0):
                if len(history) >= budget:
                    break
                y = x.copy()
                y[i] = np.clip(y[i] + sgn * step, lo[i], hi[i])
                if y[i] == x[i]:
                    continue
                fy, ok = f(y)
                if ok and (best_ok is None or fy > best_ok[1]):
                    best_ok = (y, fy)
                if fy > fx:
                    x, fx = y, fy
                    improved = True
                history.append(fx)
                if improved and sgn > 0:
                    break
        if not improved:
            step *= 0.5
    return x, fx, best_ok, history


def synthesize_controller(plant: AugmentedPlant, cfg: SynthesisConfig) -> SynthesisResult:
    """Multi-start pattern search; deterministic for a fixed ``cfg.seed``.

    Start 0 begins at the LQR seed, later starts at random perturbations of
    it (resampled until Hurwitz).  Each start contributes its best feasible
    point if it found one, else its incumbent.
    """
    spec = cfg.spec
    seed_gains = stabilizing_seed(plant, spec.p_max)
    x_seed = seed_gains.as_vector()
    lo = np.full(16, -spec.p_max)
    hi = np.full(16, spec.p_max)
    rng = np.random.default_rng(cfg.seed)

    def f(x):
        t = candidate_terms(ControllerGains.from_vector(x), plant, spec, cfg)
        return _objective(t), _feasible(t, spec)

    runs = []
    for k in range(cfg.starts):
        x0 = x_seed
        for _ in range(100 if k else 0):
            x0 = np.clip(x_seed + cfg.perturbation * rng.standard_normal(16), lo, hi)
            if close_loop(plant, ControllerGains.from_vector(x0)).is_hurwitz():
                break
        srng = np.random.default_rng([cfg.seed, k])
        x, fx, best_ok, hist = _pattern_search(f, x0, lo, hi, cfg.step_init, cfg.step_min,
                                               cfg.budget_per_start, srng)
        ok = best_ok is not None
        if ok:
            x, fx = best_ok
        logger.info("start %d: objective %.5f feasible=%s (%d evals)", k, fx, ok, len(hist))
        runs.append((ok, fx, k, x, hist))

    # feasible first, then objective, ties to the lowest start index
    ok, fx, k, x, hist = max(runs, key=lambda r: (r[0], r[1], -r[2]))
    gains = ControllerGains.from_vector(x)
    report = certify_bus(close_loop(plant, gains), gains, spec)
    feasible = bool(ok and report.all_ok)
    return SynthesisResult(gains, report, hist, k, feasible, float(fx))
