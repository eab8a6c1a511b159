"""LC-filtered grid-forming inverter with integral action and virtual impedance.

State ordering is ``[i_i (2); v (2); zeta (2)]``: inverter-side filter
current, filter capacitor voltage and the setpoint integrator.  The input
``w = -i`` is the negated current injected into the network, the output
``z = v`` is the bus voltage.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dqframe import I2, J, SyncFrame

__all__ = [
    "InverterParams",
    "VirtualImpedance",
    "FilterPlant",
    "AugmentedPlant",
    "ControllerGains",
    "ClosedLoopBus",
    "assemble_plant",
    "augment",
    "close_loop",
    "reference_gains",
    "isolated_equilibrium",
]


@dataclass(frozen=True)
class InverterParams:
    """Filter resistance, inductance, capacitor conductance and capacitance."""

    r_f: float = 0.1
    l_f: float = 8e-3
    g_f: float = 1.0 / 350.0
    c_f: float = 50e-6

    def __post_init__(self):
        for name in ("r_f", "l_f", "g_f", "c_f"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class VirtualImpedance:
    r_v: float = 0.5
    x_v: float = 1.0

    def __post_init__(self):
        if self.r_v < 0 or self.x_v < 0:
            raise ValueError("virtual impedance components must be nonnegative")

    @property
    def Z(self) -> np.ndarray:
        return self.r_v * I2 + self.x_v * J


@dataclass(frozen=True)
class FilterPlant:
    A: np.ndarray
    B_u: np.ndarray
    B_w: np.ndarray
    C: np.ndarray


@dataclass(frozen=True)
class AugmentedPlant:
    A: np.ndarray
    B_u: np.ndarray
    B_w: np.ndarray
    B_ref: np.ndarray
    C: np.ndarray
    D_u: np.ndarray
    D_w: np.ndarray
    Z: np.ndarray


@dataclass(frozen=True)
class ControllerGains:
    """State feedback ``u = -K x - M w``."""

    K: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        K = np.array(self.K, dtype=float)
        M = np.array(self.M, dtype=float)
        if K.shape != (2, 6) or M.shape != (2, 2):
            raise ValueError(f"expected K 2x6 and M 2x2, got {K.shape} and {M.shape}")
        if not (np.all(np.isfinite(K)) and np.all(np.isfinite(M))):
            raise ValueError("non-finite controller gains")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "M", M)

    @classmethod
    def zeros(cls) -> "ControllerGains":
        return cls(np.zeros((2, 6)), np.zeros((2, 2)))

    @classmethod
    def from_vector(cls, x) -> "ControllerGains":
        x = np.asarray(x, dtype=float)
        return cls(x[:12].reshape(2, 6), x[12:16].reshape(2, 2))

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.K.ravel(), self.M.ravel()])

    def max_abs(self) -> float:
        return float(max(np.abs(self.K).max(), np.abs(self.M).max()))


@dataclass(frozen=True)
class ClosedLoopBus:
    """Inverter bus under state feedback, input ``w`` and output ``v``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    B_ref: np.ndarray | None = None

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    def is_hurwitz(self) -> bool:
        return self.n_states == 0 or bool(np.linalg.eigvals(self.A).real.max() < 0)


def reference_gains() -> ControllerGains:
    """Reference controller for the default filter and tuning spec."""
    K = [[124.0, 1.54, 10.2, -0.94, 57.2, -16.8],
         [-1.09, 124.0, 1.20, 9.68, 16.7, 57.4]]
    M = [[111.0, -0.07], [0.06, 112.0]]
    return ControllerGains(np.array(K), np.array(M))


def assemble_plant(p: InverterParams, frame: SyncFrame) -> FilterPlant:
    R, L, G, C, w = p.r_f, p.l_f, p.g_f, p.c_f, frame.omega_s
    A = np.array([
        [-R / L, w, -1 / L, 0],
        [-w, -R / L, 0, -1 / L],
        [1 / C, 0, -G / C, w],
        [0, 1 / C, -w, -G / C],
    ])
    B_u = np.vstack([I2 / L, np.zeros((2, 2))])
    B_w = np.vstack([np.zeros((2, 2)), I2 / C])
    Cm = np.hstack([np.zeros((2, 2)), I2])
    return FilterPlant(A, B_u, B_w, Cm)


def augment(plant: FilterPlant, zv: VirtualImpedance) -> AugmentedPlant:
    """Append ``dzeta/dt = v - v_ref + Z i`` with ``i = -w``."""
    Z = zv.Z
    A = np.zeros((6, 6))
    A[:4, :4] = plant.A
    A[4:, 2:4] = I2
    B_u = np.vstack([plant.B_u, np.zeros((2, 2))])
    B_w = np.vstack([plant.B_w, -Z])
    B_ref = np.vstack([np.zeros((4, 2)), -I2])
    C = np.hstack([plant.C, np.zeros((2, 2))])
    return AugmentedPlant(A, B_u, B_w, B_ref, C, np.zeros((2, 2)), np.zeros((2, 2)), Z)


def close_loop(plant: AugmentedPlant, gains: ControllerGains) -> ClosedLoopBus:
    K, M = gains.K, gains.M
    if K.shape[1] != plant.A.shape[0]:
        raise ValueError(f"K has {K.shape[1]} columns, plant has {plant.A.shape[0]} states")
    return ClosedLoopBus(
        A=plant.A - plant.B_u @ K,
        B=plant.B_w - plant.B_u @ M,
        C=plant.C - plant.D_u @ K,
        D=plant.D_w - plant.D_u @ M,
        B_ref=plant.B_ref,
    )


def isolated_equilibrium(clb: ClosedLoopBus, v_ref, w=(0.0, 0.0)) -> np.ndarray:
    """Steady state for constant setpoint and input current ``w``."""
    rhs = clb.B @ np.asarray(w, dtype=float) + clb.B_ref @ np.asarray(v_ref, dtype=float)
    return np.linalg.solve(clb.A, -rhs)
