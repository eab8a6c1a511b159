"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from gridforge.certify import TuningSpec, certify_bus
from gridforge.dqframe import J, SyncFrame
from gridforge.inverter import (ClosedLoopBus, ControllerGains, InverterParams, VirtualImpedance,
                                assemble_plant, augment, close_loop, reference_gains)
from gridforge.network import Line, build_network
from gridforge.sim import InverterBus, LoadBus, LoadElement, LoadSwitch, PlugIn, Scenario

FRAME = SyncFrame()

# one summary line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []
V_REF = (380.9, 0.0)


def default_plant():
    return augment(assemble_plant(InverterParams(), FRAME), VirtualImpedance())


def reference_loop() -> ClosedLoopBus:
    return close_loop(default_plant(), reference_gains())


_CERT_CACHE: dict = {}


def certified_inverter(gains: ControllerGains | None = None, rho: float = 0.39) -> InverterBus:
    gains = gains or reference_gains()
    key = (tuple(gains.as_vector()), rho)
    if key not in _CERT_CACHE:
        clb = close_loop(default_plant(), gains)
        rep = certify_bus(clb, gains, TuningSpec(rho_min=rho))
        assert rep.osp_ok, "test controller failed certification"
        _CERT_CACHE[key] = InverterBus(clb, V_REF, rep.certificate)
    return _CERT_CACHE[key]


def case_study_network():
    return build_network(4, [Line.lumped(1, 2, 0.1, 0.6e-3), Line.lumped(2, 3, 0.1, 5e-3),
                             Line.lumped(3, 4, 0.1, 0.6e-3)])


def case_study_scenario(t_end: float = 5.0, dt: float = 1e-5) -> Scenario:
    inv = certified_inverter()
    b2 = LoadBus(3000, 500, switched=(LoadElement(4500, 500, False),))
    b3 = LoadBus(3000, 500, switched=(LoadElement(4500, 500, True),))
    events = [LoadSwitch(1.0, 2, 0, True), LoadSwitch(3.0, 3, 0, False)]
    events = [e for e in events if e.t <= t_end]
    return Scenario(case_study_network(), [inv, b2, b3, inv], events, t_end=t_end, dt=dt)


def plug_and_play_scenario(t_plug: float = 2.0, t_end: float = 4.0) -> Scenario:
    inv = certified_inverter()
    b2 = LoadBus(3000, 500, switched=(LoadElement(4500, 500, True),))
    b3 = LoadBus(3000, 500, switched=(LoadElement(4500, 500, True),))
    return Scenario(case_study_network(), [inv, b2, b3, inv], [PlugIn(t_plug, 4, inv)],
                    t_end=t_end)


def random_loop(rng: np.random.Generator, kind: int) -> ClosedLoopBus:
    """Random Hurwitz 6-state loop with two inputs and outputs.

    ``kind`` 0 perturbs the reference controller, 1 builds a port-Hamiltonian
    (hence passive) system, 2 draws an unstructured stable system.
    """
    plant = default_plant()
    while True:
        if kind == 0:
            g = reference_gains()
            K = g.K * (1 + 0.3 * rng.standard_normal((2, 6))) + 3 * rng.standard_normal((2, 6))
            M = g.M * (1 + 0.3 * rng.standard_normal((2, 2)))
            clb = close_loop(plant, ControllerGains(K, M))
        elif kind == 1:
            X = rng.standard_normal((6, 6))
            Q = X @ X.T + 0.5 * np.eye(6)
            S = rng.standard_normal((6, 6))
            Y = rng.standard_normal((6, 6))
            R = 0.3 * Y @ Y.T + 0.05 * np.eye(6)
            A = (S - S.T - R) @ Q
            B = rng.standard_normal((6, 2))
            clb = ClosedLoopBus(A, B, B.T @ Q, np.zeros((2, 2)))
        else:
            A = rng.standard_normal((6, 6))
            A -= (np.linalg.eigvals(A).real.max() + rng.uniform(0.1, 2.0)) * np.eye(6)
            clb = ClosedLoopBus(A, rng.standard_normal((6, 2)), rng.standard_normal((2, 6)),
                                np.zeros((2, 2)))
        if clb.is_hurwitz():
            return clb


def scalar_lag() -> ClosedLoopBus:
    return ClosedLoopBus(np.array([[-1.0]]), np.array([[1.0]]), np.array([[1.0]]),
                         np.zeros((1, 1)))


def rk4_integrate(f, x0, t_end, dt):
    x = np.array(x0, dtype=float)
    for k in range(int(round(t_end / dt))):
        t = k * dt
        k1 = f(t, x)
        k2 = f(t + dt / 2, x + dt / 2 * k1)
        k3 = f(t + dt / 2, x + dt / 2 * k2)
        k4 = f(t + dt, x + dt * k3)
        x = x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def subsection_rhs(line: Line, v_from, v_to):
    """Per-section scalar equations written directly, independent of the matrix form."""
    secs = line.sections
    n = len(secs)

    r = np.array([s.r for s in secs])[:, None]
    l = np.array([s.l for s in secs])[:, None]
    g = np.array([s.g for s in secs[:-1]])[:, None]
    c = np.array([s.c for s in secs[:-1]])[:, None]

    def f(t, x):
        I = x[:2 * n].reshape(n, 2)
        V = x[2 * n:].reshape(n - 1, 2)
        nodes = np.vstack([v_from(t), V, v_to(t)])
        # row-vector form of  l dI = -r I + w l J I + (v_left - v_right)
        dI = (-r * I + FRAME.omega_s * l * I @ J.T + nodes[:-1] - nodes[1:]) / l
        dV = (-g * V + FRAME.omega_s * c * V @ J.T + I[:-1] - I[1:]) / c
        return np.concatenate([dI.ravel(), dV.ravel()])

    return f


def random_network(rng, nb):
    lines = []
    for j in range(2, nb + 1):
        a = int(rng.integers(1, j))
        n = int(rng.integers(1, 4))
        lines.append(Line.uniform(a, j, n, rng.uniform(0.05, 0.5), rng.uniform(1e-4, 5e-3),
                                  rng.uniform(0, 1e-3), rng.uniform(1e-7, 1e-5)))
    return build_network(nb, lines)
