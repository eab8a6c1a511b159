"""Interconnected microgrid simulation in the common DQ frame.

Buses and lines are closed in negative feedback: every bus receives the
current flowing into it from the network (``w = -I``) and returns its
voltage.  Between events the composite model is linear time-invariant,
so a fixed-step RK4 step reduces to a constant affine map that is
precomputed once per event interval.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np
import scipy.linalg as sla

from .certify import PassivityCertificate
from .dqframe import I2, J, SyncFrame, instantaneous_power
from .inverter import ClosedLoopBus, isolated_equilibrium
from .network import (Line, LineStateSpace, NetworkModel, assemble_line_statespace,
                      build_network, line_energy)

logger = logging.getLogger(__name__)

__all__ = [
    "DivergenceError",
    "MissingCertificateError",
    "LoadElement",
    "LoadBus",
    "PassiveBus",
    "InverterBus",
    "LoadSwitch",
    "Broadcast",
    "PlugIn",
    "Scenario",
    "InterconnectedSystem",
    "Segment",
    "TimeSeries",
    "LyapunovTrace",
    "build_closed_system",
    "rk4_propagator",
    "step",
    "exact_step",
    "run_scenario",
    "lyapunov_trace",
    "power_trace",
    "DIVERGENCE_LIMIT",
]

DIVERGENCE_LIMIT = 1e9
RK4_GUARD = 2.5


class DivergenceError(RuntimeError):
    """State became non-finite or exceeded the divergence limit."""

    def __init__(self, t: float, where: str):
        super().__init__(f"divergence at t={t:.6g} s in {where}")
        self.t = t
        self.where = where


class MissingCertificateError(ValueError):
    pass


# ---------------------------------------------------------------------------
# bus dynamics


@dataclass(frozen=True)
class LoadElement:
    """Switchable constant-impedance load rated at ``p`` watts, ``q`` vars."""

    p: float
    q: float = 0.0
    on: bool = True

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("load ratings must be nonnegative")


def _element_branches(p: float, q: float, v_nom: float, omega: float, topology: str):
    """Shunt conductance and optional inductive branch ``(r, l)`` of one load.

    ``parallel`` realises R||L with ``g = p/v^2`` and ``l = v^2/(omega q)``;
    ``series`` realises one R-L branch with the same rated ``p + jq`` at
    ``v_nom``.
    """
    if topology == "parallel":
        g = p / v_nom**2
        return g, ((0.0, v_nom**2 / (omega * q)) if q > 0 else None)
    if q == 0:
        return p / v_nom**2, None
    s2 = p * p + q * q
    return 0.0, (v_nom**2 * p / s2, v_nom**2 * q / (omega * s2))


@dataclass(frozen=True)
class LoadBus:
    """Parallel R||L load behind a shunt capacitor.

    The static part (``p_rated``, ``q_rated``) is always connected; each
    entry of ``switched`` can be toggled by events.  Every inductive branch
    carries its own current state so the state dimension never changes.
    """

    p_rated: float
    q_rated: float = 0.0
    v_nom: float = 380.9
    c_shunt: float = 10e-6
    switched: tuple[LoadElement, ...] = ()
    topology: str = "series"

    def __post_init__(self):
        if self.c_shunt <= 0:
            raise ValueError("c_shunt must be positive")
        if self.p_rated < 0 or self.q_rated < 0:
            raise ValueError("load ratings must be nonnegative")
        if self.v_nom <= 0:
            raise ValueError("v_nom must be positive")
        if self.topology not in ("series", "parallel"):
            raise ValueError(f"unknown load topology {self.topology!r}")
        object.__setattr__(self, "switched", tuple(self.switched))

    def g_load(self) -> float:
        """Parallel-equivalent conductance of the static part."""
        return self.p_rated / self.v_nom**2

    def l_load(self, frame: SyncFrame) -> float | None:
        """Parallel-equivalent inductance of the static part."""
        return self.v_nom**2 / (frame.omega_s * self.q_rated) if self.q_rated > 0 else None

    def elements(self) -> list[LoadElement]:
        return [LoadElement(self.p_rated, self.q_rated, True), *self.switched]

    def branches(self, frame: SyncFrame) -> list[tuple[float, tuple[float, float] | None]]:
        return [_element_branches(e.p, e.q, self.v_nom, frame.omega_s, self.topology)
                for e in self.elements()]

    @property
    def n_states(self) -> int:
        return 2 + 2 * sum(e.q > 0 for e in self.elements())

    def default_status(self) -> tuple[bool, ...]:
        return tuple(e.on for e in self.switched)


@dataclass(frozen=True)
class PassiveBus:
    """Shunt capacitor (with optional conductance) and nothing else."""

    c_shunt: float = 10e-6
    g_shunt: float = 0.0

    def __post_init__(self):
        if self.c_shunt <= 0:
            raise ValueError("c_shunt must be positive")
        if self.g_shunt < 0:
            raise ValueError("g_shunt must be nonnegative")

    @property
    def n_states(self) -> int:
        return 2


@dataclass(frozen=True)
class InverterBus:
    """Closed-loop inverter with its voltage setpoint and optional certificate."""

    clb: ClosedLoopBus
    v_ref: tuple[float, float] = (380.9, 0.0)
    certificate: PassivityCertificate | None = None

    def __post_init__(self):
        if self.clb.B_ref is None:
            raise ValueError("inverter bus needs a setpoint input matrix")
        object.__setattr__(self, "v_ref", tuple(float(v) for v in self.v_ref))

    @property
    def n_states(self) -> int:
        return self.clb.n_states


BusDynamics = Union[InverterBus, LoadBus, PassiveBus]


def _bus_matrices(bus: BusDynamics, frame: SyncFrame, status=(), v_ref=None):
    """``(A, B, C, D, f, live)`` of one bus for its current switch state."""
    w = frame.omega_s
    if isinstance(bus, InverterBus):
        c = bus.clb
        ref = np.asarray(bus.v_ref if v_ref is None else v_ref, dtype=float)
        n = c.n_states
        return c.A, c.B, c.C, c.D, c.B_ref @ ref, np.ones(n, dtype=bool)
    if isinstance(bus, PassiveBus):
        cs = bus.c_shunt
        A = (-bus.g_shunt * I2 + w * cs * J) / cs
        return A, I2 / cs, I2.copy(), np.zeros((2, 2)), np.zeros(2), np.ones(2, dtype=bool)

    on = (True, *status)
    n = bus.n_states
    A = np.zeros((n, n))
    live = np.ones(n, dtype=bool)
    cs = bus.c_shunt
    g_on = 0.0
    A[:2, :2] = w * J
    row = 2
    for k, (g, br) in enumerate(bus.branches(frame)):
        if on[k]:
            g_on += g
        if br is None:
            continue
        r, l = br
        s = slice(row, row + 2)
        if on[k]:
            A[:2, s] = -I2 / cs
            A[s, :2] = I2 / l
            A[s, s] = -r / l * I2 + w * J
        else:
            live[s] = False
        row += 2
    A[:2, :2] -= g_on / cs * I2
    B = np.zeros((n, 2))
    B[:2] = I2 / cs
    C = np.zeros((2, n))
    C[:, :2] = I2
    return A, B, C, np.zeros((2, 2)), np.zeros(n), live


def _bus_storage(bus: BusDynamics, frame: SyncFrame, status, dx: np.ndarray,
                 cert: PassivityCertificate | None) -> np.ndarray:
    """Storage of one bus in deviation coordinates; ``dx`` is (T, n)."""
    if isinstance(bus, InverterBus):
        return 0.5 * np.einsum("ti,ij,tj->t", dx, cert.P, dx)
    if isinstance(bus, PassiveBus):
        return 0.5 * bus.c_shunt * np.sum(dx[:, :2] ** 2, axis=1)
    V = 0.5 * bus.c_shunt * np.sum(dx[:, :2] ** 2, axis=1)
    on = (True, *status)
    row = 2
    for k, (_, br) in enumerate(bus.branches(frame)):
        if br is None:
            continue
        if on[k]:
            V = V + 0.5 * br[1] * np.sum(dx[:, row:row + 2] ** 2, axis=1)
        row += 2
    return V


# ---------------------------------------------------------------------------
# events and scenario


@dataclass(frozen=True)
class LoadSwitch:
    t: float
    bus: int
    element: int
    on: bool


@dataclass(frozen=True)
class Broadcast:
    """New setpoints for one or more inverter buses."""

    t: float
    v_refs: Mapping[int, tuple[float, float]]


@dataclass(frozen=True)
class PlugIn:
    """Connect ``inverter`` as a new bus behind a connector line to ``bus``."""

    t: float
    bus: int
    inverter: InverterBus
    r: float = 0.01
    l: float = 1e-4


Event = Union[LoadSwitch, Broadcast, PlugIn]


@dataclass
class Scenario:
    """Network, per-bus dynamics (bus ``j`` is ``buses[j-1]``) and events."""

    network: NetworkModel
    buses: Sequence[BusDynamics]
    events: Sequence[Event] = ()
    t_end: float = 1.0
    dt: float = 1e-5
    stride: int = 100
    frame: SyncFrame = field(default_factory=SyncFrame)
    x0: np.ndarray | None = None

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        times = [e.t for e in self.events]
        if any(t < 0 for t in times):
            raise ValueError("event at negative time")
        if any(t > self.t_end for t in times):
            raise ValueError("event after t_end")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("events must be strictly ordered in time")


# ---------------------------------------------------------------------------
# composite system


@dataclass(frozen=True)
class InterconnectedSystem:
    """Frozen LTI snapshot ``dx/dt = A x + b`` of the closed microgrid."""

    network: NetworkModel
    line_ss: LineStateSpace
    buses: tuple[BusDynamics, ...]
    frame: SyncFrame
    status: tuple[tuple[bool, ...], ...]
    v_refs: tuple[tuple[float, float] | None, ...]
    A: np.ndarray
    b: np.ndarray
    offsets: tuple[int, ...]
    live: np.ndarray
    C_bus: np.ndarray
    D_bus: np.ndarray

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_line(self) -> int:
        return self.line_ss.n_states

    def bus_slice(self, j: int) -> slice:
        """State slice of bus ``j`` (1-based)."""
        return slice(self.offsets[j - 1], self.offsets[j])

    def block_name(self, k: int) -> str:
        if k < self.n_line:
            return "line network"
        j = int(np.searchsorted(self.offsets, k, side="right"))
        return f"bus {j}"

    def rhs(self, x: np.ndarray) -> np.ndarray:
        return self.A @ x + self.b

    def equilibrium(self) -> np.ndarray:
        """Steady state by a direct solve on the live states."""
        x = np.zeros(self.n_states)
        m = self.live
        x[m] = np.linalg.solve(self.A[np.ix_(m, m)], -self.b[m])
        return x

    def bus_outputs(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Bus voltages and injected currents, each (T, n_bus, 2)."""
        X = np.atleast_2d(X)
        I = X[:, :self.n_line] @ self.line_ss.C.T
        V = X[:, self.n_line:] @ self.C_bus.T - I @ self.D_bus.T
        nb = len(self.buses)
        return V.reshape(-1, nb, 2), I.reshape(-1, nb, 2)

    def check_step(self, dt: float) -> float:
        """``dt * max|lambda|``; warns when past the RK4 guard."""
        r = dt * float(np.abs(np.linalg.eigvals(self.A[np.ix_(self.live, self.live)])).max())
        if r >= RK4_GUARD:
            warnings.warn(f"dt*max|lambda| = {r:.3g} exceeds the RK4 guard {RK4_GUARD}",
                          RuntimeWarning, stacklevel=2)
        return r


def _assemble(network, buses, frame, status, v_refs) -> InterconnectedSystem:
    if network.bus_count != len(buses):
        raise ValueError(f"network has {network.bus_count} buses, {len(buses)} bus models given")
    ls = assemble_line_statespace(network, frame)
    parts = [_bus_matrices(b, frame, s, v) for b, s, v in zip(buses, status, v_refs)]
    Ab = sla.block_diag(*[p[0] for p in parts])
    Bb = sla.block_diag(*[p[1] for p in parts])
    Cb = sla.block_diag(*[p[2] for p in parts])
    Db = sla.block_diag(*[p[3] for p in parts])
    nl = ls.n_states
    n = nl + Ab.shape[0]
    A = np.zeros((n, n))
    A[:nl, :nl] = ls.A - ls.B @ Db @ ls.C
    A[:nl, nl:] = ls.B @ Cb
    A[nl:, :nl] = -Bb @ ls.C
    A[nl:, nl:] = Ab
    b = np.concatenate([np.zeros(nl)] + [p[4] for p in parts])
    live = np.concatenate([np.ones(nl, dtype=bool)] + [p[5] for p in parts])
    offsets = tuple(int(v) for v in nl + np.cumsum([0] + [p[0].shape[0] for p in parts]))
    return InterconnectedSystem(network, ls, tuple(buses), frame, tuple(status), tuple(v_refs),
                                A, b, offsets, live, Cb, Db)


def build_closed_system(scenario: Scenario) -> InterconnectedSystem:
    """Composite system at ``t = 0``; also validates event references."""
    buses = tuple(scenario.buses)
    nb = len(buses)
    extra = 0
    for ev in scenario.events:
        if isinstance(ev, LoadSwitch):
            if not 1 <= ev.bus <= nb or not isinstance(buses[ev.bus - 1], LoadBus):
                raise ValueError(f"load switch at t={ev.t} references non-load bus {ev.bus}")
            if not 0 <= ev.element < len(buses[ev.bus - 1].switched):
                raise ValueError(f"load switch at t={ev.t}: bus {ev.bus} has no element {ev.element}")
        elif isinstance(ev, Broadcast):
            for j in ev.v_refs:
                if not 1 <= j <= nb + extra or (j <= nb and not isinstance(buses[j - 1], InverterBus)):
                    raise ValueError(f"broadcast at t={ev.t} references non-inverter bus {j}")
        elif isinstance(ev, PlugIn):
            if not 1 <= ev.bus <= nb + extra:
                raise ValueError(f"plug-in at t={ev.t} references unknown bus {ev.bus}")
            extra += 1
    for j, bus in enumerate(buses, 1):
        if isinstance(bus, InverterBus):
            if not bus.clb.is_hurwitz():
                warnings.warn(f"bus {j}: inverter closed loop is not Hurwitz", RuntimeWarning,
                              stacklevel=2)
            elif bus.certificate is None:
                warnings.warn(f"bus {j}: inverter carries no passivity certificate",
                              RuntimeWarning, stacklevel=2)
    status = tuple(b.default_status() if isinstance(b, LoadBus) else () for b in buses)
    v_refs = tuple(b.v_ref if isinstance(b, InverterBus) else None for b in buses)
    return _assemble(scenario.network, buses, scenario.frame, status, v_refs)


def _apply_event(sys_: InterconnectedSystem, x: np.ndarray, ev: Event):
    buses, status, v_refs = list(sys_.buses), list(sys_.status), list(sys_.v_refs)
    if isinstance(ev, LoadSwitch):
        s = list(status[ev.bus - 1])
        s[ev.element] = ev.on
        status[ev.bus - 1] = tuple(s)
        new = _assemble(sys_.network, buses, sys_.frame, status, v_refs)
        x = x.copy()
        x[~new.live] = 0.0
        return new, x
    if isinstance(ev, Broadcast):
        for j, v in ev.v_refs.items():
            v_refs[j - 1] = tuple(float(a) for a in v)
        return _assemble(sys_.network, buses, sys_.frame, status, v_refs), x
    # plug-in: connector edges go after the old edges, its capacitors after the old ones
    net = sys_.network
    nb = net.bus_count + 1
    conn = Line.lumped(ev.bus, nb, ev.r, ev.l)
    new_net = build_network(nb, [*net.lines, conn])
    buses.append(ev.inverter)
    status.append(())
    v_refs.append(ev.inverter.v_ref)
    new = _assemble(new_net, buses, sys_.frame, status, v_refs)
    ne, nc = 2 * net.n_edges, 2 * net.n_caps
    ne2 = 2 * new_net.n_edges
    y = np.zeros(new.n_states)
    y[:ne] = x[:ne]
    y[ne2:ne2 + nc] = x[ne:ne + nc]
    y[new.n_line:new.offsets[-2]] = x[sys_.n_line:]
    clb = ev.inverter.clb
    y[new.offsets[-2]:] = isolated_equilibrium(clb, ev.inverter.v_ref)
    return new, y


# ---------------------------------------------------------------------------
# integration


def rk4_propagator(A: np.ndarray, b: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    """``(Phi, gamma)`` with one RK4 step of ``A x + b`` equal to ``Phi x + gamma``."""
    n = A.shape[0]
    hA = h * A
    I = np.eye(n)
    inner = I + hA @ (I + hA @ (I + hA / 4) / 3) / 2
    return I + hA @ inner, h * inner @ b


def step(system: InterconnectedSystem, state: np.ndarray, dt: float, t: float = 0.0) -> np.ndarray:
    """One classical RK4 step of the composite ODE."""
    _check_finite(system, state, t)
    f = system.rhs
    k1 = f(state)
    k2 = f(state + 0.5 * dt * k1)
    k3 = f(state + 0.5 * dt * k2)
    k4 = f(state + dt * k3)
    out = state + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    _check_finite(system, out, t + dt)
    return out


def exact_step(system: InterconnectedSystem, state: np.ndarray, dt: float) -> np.ndarray:
    """Exact propagation of the LTI interval via the augmented exponential."""
    n = system.n_states
    M = np.zeros((n + 1, n + 1))
    M[:n, :n] = system.A
    M[:n, n] = system.b
    E = sla.expm(dt * M)
    return E[:n, :n] @ state + E[:n, n]


def _check_finite(system: InterconnectedSystem, x: np.ndarray, t: float) -> None:
    bad = ~np.isfinite(x) | (np.abs(x) > DIVERGENCE_LIMIT)
    if bad.any():
        raise DivergenceError(t, system.block_name(int(np.argmax(bad))))


@dataclass
class Segment:
    """Records of one event interval, all sharing a single LTI system."""

    system: InterconnectedSystem
    t: np.ndarray
    X: np.ndarray

    def equilibrium(self) -> np.ndarray:
        return self.system.equilibrium()

    def derivative_norm(self) -> np.ndarray:
        return np.linalg.norm(self.X @ self.system.A.T + self.system.b, axis=1)


@dataclass
class TimeSeries:
    """Recorded trajectory.

    Rows are nondecreasing in time; an event time appears twice, once as
    the end of the old interval and once as the start of the new one.
    Buses that do not exist yet (before a plug-in) read as NaN.
    """

    segments: list[Segment]
    event_log: list[dict]
    dt: float

    @property
    def t(self) -> np.ndarray:
        return np.concatenate([s.t for s in self.segments])

    @property
    def n_bus(self) -> int:
        return max(len(s.system.buses) for s in self.segments)

    def segment_index(self) -> np.ndarray:
        return np.concatenate([np.full(len(s.t), k) for k, s in enumerate(self.segments)])

    def _bus_arrays(self):
        nb = self.n_bus
        Vs, Is = [], []
        for s in self.segments:
            V, I = s.system.bus_outputs(s.X)
            pad = nb - V.shape[1]
            if pad:
                fill = np.full((V.shape[0], pad, 2), np.nan)
                V = np.concatenate([V, fill], axis=1)
                I = np.concatenate([I, fill], axis=1)
            Vs.append(V)
            Is.append(I)
        return np.concatenate(Vs), np.concatenate(Is)

    @property
    def v(self) -> np.ndarray:
        """Bus voltages, shape (T, n_bus, 2)."""
        return self._bus_arrays()[0]

    @property
    def i(self) -> np.ndarray:
        """Bus current injections into the network, shape (T, n_bus, 2)."""
        return self._bus_arrays()[1]

    def derivative_norm(self) -> np.ndarray:
        return np.concatenate([s.derivative_norm() for s in self.segments])

    @property
    def final_state(self) -> np.ndarray:
        return self.segments[-1].X[-1]

    def write_csv(self, path) -> None:
        """Long-format export with header ``t,bus,vd,vq,id,iq,p,q``."""
        t = self.t
        V, I = self._bus_arrays()
        p, q = instantaneous_power(V, I)
        rows = []
        for j in range(V.shape[1]):
            ok = np.isfinite(V[:, j, 0])
            rows.append(np.column_stack([t[ok], np.full(ok.sum(), j + 1), V[ok, j, 0], V[ok, j, 1],
                                         I[ok, j, 0], I[ok, j, 1], p[ok, j], q[ok, j]]))
        data = np.concatenate(rows)
        data = data[np.lexsort((data[:, 1], data[:, 0]))]
        np.savetxt(path, data, delimiter=",", header="t,bus,vd,vq,id,iq,p,q", comments="",
                   fmt=["%.6f", "%d"] + ["%.10g"] * 6)

    def metadata(self, scenario_hash: str | None = None) -> dict:
        return {
            "scenario_hash": scenario_hash,
            "dt": self.dt,
            "t_end": float(self.segments[-1].t[-1]),
            "records": int(sum(len(s.t) for s in self.segments)),
            "n_bus": self.n_bus,
            "events": self.event_log,
        }


def _integrate(system, x, t0, t1, dt, stride):
    """Propagate over ``[t0, t1]``; returns record times, states and final state."""
    span = t1 - t0
    n_full = int(np.floor(span / dt + 1e-9))
    rem = span - n_full * dt
    if rem < 1e-9 * dt:
        rem = 0.0
    Phi, gam = rk4_propagator(system.A, system.b, dt)
    ts, xs = [t0], [x]
    for k in range(1, n_full + 1):
        x = Phi @ x + gam
        last = k == n_full and rem == 0.0
        if k % stride == 0 or last:
            t = t1 if last else t0 + k * dt
            _check_finite(system, x, t)
            ts.append(t)
            xs.append(x)
    if rem > 0.0:
        Phi_r, gam_r = rk4_propagator(system.A, system.b, rem)
        x = Phi_r @ x + gam_r
        _check_finite(system, x, t1)
        ts.append(t1)
        xs.append(x)
    return np.array(ts), np.array(xs), x


def _log_entry(ev: Event, system: InterconnectedSystem) -> dict:
    entry = {"t": ev.t, "kind": type(ev).__name__}
    if isinstance(ev, LoadSwitch):
        entry.update(bus=ev.bus, element=ev.element, on=ev.on)
    elif isinstance(ev, Broadcast):
        entry["v_refs"] = {str(k): list(v) for k, v in ev.v_refs.items()}
    else:
        entry.update(bus=ev.bus, new_bus=system.network.bus_count, r=ev.r, l=ev.l)
    return entry


def run_scenario(scenario: Scenario) -> TimeSeries:
    """Integrate through all events and record every ``stride`` steps.

    The initial state defaults to the equilibrium of the ``t = 0`` system.
    """
    system = build_closed_system(scenario)
    system.check_step(scenario.dt)
    x = system.equilibrium() if scenario.x0 is None else np.asarray(scenario.x0, dtype=float)
    if x.shape != (system.n_states,):
        raise ValueError(f"x0 has shape {x.shape}, expected ({system.n_states},)")
    segments, log = [], []
    t = 0.0
    for ev in scenario.events:
        if ev.t > t:
            ts, X, x = _integrate(system, x, t, ev.t, scenario.dt, scenario.stride)
            segments.append(Segment(system, ts, X))
        system, x = _apply_event(system, x, ev)
        system.check_step(scenario.dt)
        t = ev.t
        log.append(_log_entry(ev, system))
        logger.info("t=%.4f s: %s", ev.t, log[-1]["kind"])
    ts, X, x = _integrate(system, x, t, scenario.t_end, scenario.dt, scenario.stride)
    segments.append(Segment(system, ts, X))
    return TimeSeries(segments, log, scenario.dt)


# ---------------------------------------------------------------------------
# post-processing


def power_trace(ts: TimeSeries) -> tuple[np.ndarray, np.ndarray]:
    """Per-bus injected ``(p, q)``, each of shape (T, n_bus); loads read negative."""
    return instantaneous_power(ts.v, ts.i)


@dataclass
class LyapunovTrace:
    t: np.ndarray
    V: np.ndarray
    segment: np.ndarray
    monotone: bool
    worst_increase: float

    def to_dict(self) -> dict:
        return {"monotone": self.monotone, "worst_increase": self.worst_increase,
                "V_max": float(self.V.max())}


def _certificates_for(system, certificates):
    out = {}
    for j, bus in enumerate(system.buses, 1):
        if isinstance(bus, InverterBus):
            cert = certificates.get(j) if certificates is not None else None
            cert = cert or bus.certificate
            if cert is None:
                raise MissingCertificateError(f"bus {j} has no passivity certificate")
            out[j] = cert
    return out


def lyapunov_trace(ts: TimeSeries, certificates: Mapping[int, PassivityCertificate] | None = None,
                   rel_tol: float = 1e-6, atol: float = 1e-12) -> LyapunovTrace:
    """Composite storage along the run, in each interval's own deviation coordinates.

    ``V`` sums the line energy, ``x'P x / 2`` for every inverter and the
    RLC energy of load and passive buses.  The verdict requires ``V`` to be
    nonincreasing inside every interval up to ``rel_tol`` times its value
    at the start of that interval (plus ``atol`` joules, which only
    matters for intervals that start at rest).
    """
    Vs, seg_ids = [], []
    worst = 0.0
    ok = True
    for k, seg in enumerate(ts.segments):
        sys_ = seg.system
        certs = _certificates_for(sys_, certificates)
        dX = seg.X - seg.equilibrium()
        V = line_energy(sys_.network, dX[:, :sys_.n_line])
        V = np.asarray(V, dtype=float).reshape(-1)
        for j, bus in enumerate(sys_.buses, 1):
            V = V + _bus_storage(bus, sys_.frame, sys_.status[j - 1], dX[:, sys_.bus_slice(j)],
                                 certs.get(j))
        inc = np.diff(V)
        if inc.size:
            worst = max(worst, float(inc.max() / max(V[0], atol)))
            if inc.max() > rel_tol * V[0] + atol:
                ok = False
        Vs.append(V)
        seg_ids.append(np.full(len(V), k))
    return LyapunovTrace(ts.t, np.concatenate(Vs), np.concatenate(seg_ids), ok, worst)
