"""Line network graph, incidence matrices and line state-space model.

Each line is a chain of series RL subsections separated by shunt GC
capacitor nodes.  Nodes ``0..bus_count-1`` are buses; internal capacitor
nodes are appended in the order lines and sections are given.  Edge
directions follow ``from_bus -> to_bus``.

State layout of :class:`LineStateSpace` is ``[I_edges (2*E); V_caps (2*C)]``
with DQ pairs interleaved, input is stacked bus voltages and output is
stacked bus current injections (current leaving each bus into the lines).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dqframe import I2, J, SyncFrame

__all__ = [
    "LineSection",
    "Line",
    "NetworkModel",
    "LineStateSpace",
    "build_network",
    "assemble_line_statespace",
    "line_energy",
    "line_dissipation",
    "validate_network",
]


@dataclass(frozen=True)
class LineSection:
    """One RL subsection plus the GC shunt at its receiving end.

    ``g`` and ``c`` are ignored for the last section of a line, whose
    receiving end is the destination bus.
    """

    r: float
    l: float
    g: float = 0.0
    c: float | None = None


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    sections: tuple[LineSection, ...]

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))

    @classmethod
    def lumped(cls, from_bus: int, to_bus: int, r: float, l: float) -> "Line":
        return cls(from_bus, to_bus, (LineSection(r, l),))

    @classmethod
    def uniform(cls, from_bus: int, to_bus: int, n: int, r: float, l: float,
                g: float = 0.0, c: float = 0.0) -> "Line":
        """Split total ``r, l, g, c`` evenly over ``n`` sections."""
        if n == 1:
            return cls.lumped(from_bus, to_bus, r, l)
        secs = [LineSection(r / n, l / n, g / (n - 1), c / (n - 1)) for _ in range(n - 1)]
        secs.append(LineSection(r / n, l / n))
        return cls(from_bus, to_bus, tuple(secs))


@dataclass(frozen=True)
class NetworkModel:
    """Assembled line graph.  Bus ids in ``lines`` are 1-based."""

    bus_count: int
    lines: tuple[Line, ...]
    H: np.ndarray
    R: np.ndarray
    L: np.ndarray
    G: np.ndarray
    C: np.ndarray
    edge_owner: tuple[tuple[int, int], ...] = field(default=())

    @property
    def n_edges(self) -> int:
        return self.H.shape[1]

    @property
    def n_caps(self) -> int:
        return self.H.shape[0] - self.bus_count

    @property
    def H_B(self) -> np.ndarray:
        return self.H[: self.bus_count]

    @property
    def H_C(self) -> np.ndarray:
        return self.H[self.bus_count:]

    @property
    def n_states(self) -> int:
        return 2 * (self.n_edges + self.n_caps)


@dataclass(frozen=True)
class LineStateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    n_edges: int
    n_caps: int

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


def build_network(bus_count: int, lines: Sequence[Line], strict: bool = True) -> NetworkModel:
    """Build incidence and parameter matrices for ``lines``.

    With ``strict=False`` parameter checks are skipped so that
    :func:`validate_network` can report on broken inputs.
    """
    if bus_count < 1:
        raise ValueError("bus_count must be >= 1")
    lines = tuple(lines)
    for k, ln in enumerate(lines):
        if not (1 <= ln.from_bus <= bus_count and 1 <= ln.to_bus <= bus_count):
            raise ValueError(f"line {k}: bus id out of range 1..{bus_count}")
        if ln.from_bus == ln.to_bus:
            raise ValueError(f"line {k}: from_bus == to_bus == {ln.from_bus}")
        if not ln.sections:
            raise ValueError(f"line {k}: no sections")
        if strict:
            for s, sec in enumerate(ln.sections):
                if not sec.r > 0:
                    raise ValueError(f"line {k} section {s}: nonpositive resistance {sec.r}")
                if not sec.l > 0:
                    raise ValueError(f"line {k} section {s}: nonpositive inductance {sec.l}")
                if s < len(ln.sections) - 1:
                    if sec.c is None or not sec.c > 0:
                        raise ValueError(f"line {k} section {s}: nonpositive capacitance {sec.c}")
                    if sec.g < 0:
                        raise ValueError(f"line {k} section {s}: negative conductance {sec.g}")

    n_edges = sum(len(ln.sections) for ln in lines)
    n_caps = sum(len(ln.sections) - 1 for ln in lines)
    H = np.zeros((bus_count + n_caps, n_edges))
    R = np.zeros(n_edges)
    L = np.zeros(n_edges)
    G = np.zeros(n_caps)
    C = np.zeros(n_caps)
    owner = []
    e = 0
    cap = bus_count
    for k, ln in enumerate(lines):
        n = len(ln.sections)
        nodes = [ln.from_bus - 1] + list(range(cap, cap + n - 1)) + [ln.to_bus - 1]
        for s, sec in enumerate(ln.sections):
            H[nodes[s], e] = 1.0
            H[nodes[s + 1], e] = -1.0
            R[e] = sec.r
            L[e] = sec.l
            if s < n - 1:
                G[cap - bus_count + s] = sec.g
                C[cap - bus_count + s] = sec.c if sec.c is not None else 0.0
            owner.append((k, s))
            e += 1
        cap += n - 1
    return NetworkModel(bus_count, lines, H, np.diag(R), np.diag(L), np.diag(G),
                        np.diag(C), tuple(owner))


def assemble_line_statespace(net: NetworkModel, frame: SyncFrame) -> LineStateSpace:
    """Line dynamics in first-order form.

    Per edge ``L dI/dt = -R I + w L J I + (v_from - v_to)``; per capacitor
    node ``C dV/dt = -G V + w C J V + (I_in - I_out)``; bus injections are
    ``H_B I``.
    """
    l = np.diag(net.L)
    c = np.diag(net.C)
    if np.any(l <= 0):
        raise ValueError("singular inductance matrix")
    if np.any(c <= 0):
        raise ValueError("singular capacitance matrix")
    w = frame.omega_s
    ne, nc, nb = net.n_edges, net.n_caps, net.bus_count
    A_ii = np.kron(-net.R, I2) + w * np.kron(net.L, J)
    A_iv = np.kron(net.H_C.T, I2)
    A_vi = -np.kron(net.H_C, I2)
    A_vv = np.kron(-net.G, I2) + w * np.kron(net.C, J)
    E = np.concatenate([np.repeat(l, 2), np.repeat(c, 2)])
    A = np.block([[A_ii, A_iv], [A_vi, A_vv]]) / E[:, None]
    B = np.vstack([np.kron(net.H_B.T, I2), np.zeros((2 * nc, 2 * nb))]) / E[:, None]
    C = np.hstack([np.kron(net.H_B, I2), np.zeros((2 * nb, 2 * nc))])
    return LineStateSpace(A, B, C, ne, nc)


def _energy_weights(net: NetworkModel) -> np.ndarray:
    return np.concatenate([np.repeat(np.diag(net.L), 2), np.repeat(np.diag(net.C), 2)])


def line_energy(net: NetworkModel, state, state_eq=None) -> float | np.ndarray:
    """Magnetic plus electric energy of the deviation ``state - state_eq``.

    ``state`` may be a single vector or an array of shape ``(T, n_states)``.
    """
    x = np.asarray(state, dtype=float)
    if x.shape[-1] != net.n_states:
        raise ValueError(f"state has {x.shape[-1]} entries, expected {net.n_states}")
    if state_eq is not None:
        x = x - np.asarray(state_eq, dtype=float)
    out = 0.5 * np.sum(_energy_weights(net) * x * x, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def line_dissipation(net: NetworkModel, state, state_eq=None):
    """Ohmic loss ``dx^T diag(R x I2, G x I2) dx`` of the deviation."""
    x = np.asarray(state, dtype=float)
    if x.shape[-1] != net.n_states:
        raise ValueError(f"state has {x.shape[-1]} entries, expected {net.n_states}")
    if state_eq is not None:
        x = x - np.asarray(state_eq, dtype=float)
    w = np.concatenate([np.repeat(np.diag(net.R), 2), np.repeat(np.diag(net.G), 2)])
    out = np.sum(w * x * x, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def validate_network(net: NetworkModel) -> list[str]:
    """List violated structural invariants; empty when the model is sound."""
    issues = []
    H = np.asarray(net.H)
    if set(np.unique(H)) - {-1.0, 0.0, 1.0}:
        issues.append("incidence entries outside {-1, 0, 1}")
    for z in range(H.shape[1]):
        col = H[:, z]
        if col.sum() != 0:
            issues.append(f"edge {z}: incidence column sum != 0")
        elif np.count_nonzero(col == 1) != 1 or np.count_nonzero(col == -1) != 1:
            issues.append(f"edge {z}: incidence column must have one +1 and one -1")
    expected_edges = sum(len(ln.sections) for ln in net.lines)
    expected_caps = sum(len(ln.sections) - 1 for ln in net.lines)
    if H.shape != (net.bus_count + expected_caps, expected_edges):
        issues.append(f"incidence shape {H.shape} does not match line sections")
    for name, mat, strict in (("resistance", net.R, True), ("inductance", net.L, True),
                              ("conductance", net.G, False), ("capacitance", net.C, True)):
        mat = np.asarray(mat)
        if np.count_nonzero(mat - np.diag(np.diag(mat))):
            issues.append(f"{name} matrix not diagonal")
        d = np.diag(mat)
        bad = np.flatnonzero(d <= 0) if strict else np.flatnonzero(d < 0)
        for i in bad:
            issues.append(f"{'nonpositive' if strict else 'negative'} {name} at index {i}")
    # parameter ordering must follow line/section enumeration
    if not issues:
        ref = build_network(net.bus_count, net.lines, strict=False)
        if not np.array_equal(ref.H, H):
            issues.append("incidence ordering does not follow line/section enumeration")
        for name in ("R", "L", "G", "C"):
            if not np.array_equal(getattr(ref, name), getattr(net, name)):
                issues.append(f"{name} ordering does not follow line/section enumeration")
    return issues
