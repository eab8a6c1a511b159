"""Power-invariant Park/Clarke transform and DQ-frame helpers.

All network and controller models in this package live in a common
synchronous DQ frame rotating at a fixed ``omega_s``.  The abc side is only
used for converting inputs and outputs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "J",
    "I2",
    "DQPair",
    "SyncFrame",
    "park_matrix",
    "park_transform",
    "inverse_park",
    "instantaneous_power",
]

#: 90 degree rotation in the DQ plane.  J @ J == -I, J.T == -J.
J = np.array([[0.0, 1.0], [-1.0, 0.0]])
I2 = np.eye(2)


@dataclass(frozen=True)
class DQPair:
    """A voltage or current in the common DQ frame."""

    d: float
    q: float

    def __post_init__(self):
        if not (np.isfinite(self.d) and np.isfinite(self.q)):
            raise ValueError(f"non-finite DQ pair ({self.d}, {self.q})")

    @classmethod
    def from_array(cls, x) -> "DQPair":
        x = np.asarray(x, dtype=float).reshape(2)
        return cls(float(x[0]), float(x[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.d, self.q])

    def __abs__(self) -> float:
        return float(np.hypot(self.d, self.q))


@dataclass(frozen=True)
class SyncFrame:
    """Synchronous reference frame with constant angular frequency [rad/s]."""

    omega_s: float = 100.0 * np.pi

    def __post_init__(self):
        if not self.omega_s > 0:
            raise ValueError(f"omega_s must be positive, got {self.omega_s}")

    def angle(self, t: float) -> float:
        return self.omega_s * t


def park_matrix(theta: float) -> np.ndarray:
    """2x3 power-invariant transform ``T(theta)``.

    Rows are ``sqrt(2/3) * [cos(theta - k*2pi/3)]`` and the matching sines
    for ``k = 0, 1, 2``.  ``T @ T.T == I2``.
    """
    shifts = np.array([0.0, -2.0 * np.pi / 3.0, 2.0 * np.pi / 3.0])
    ang = theta + shifts
    return np.sqrt(2.0 / 3.0) * np.vstack([np.cos(ang), np.sin(ang)])


def park_transform(x_abc, frame: SyncFrame, t: float) -> DQPair:
    """Map a balanced three-phase sample to the DQ frame at time ``t``."""
    x_abc = np.asarray(x_abc, dtype=float).reshape(3)
    return DQPair.from_array(park_matrix(frame.angle(t)) @ x_abc)


def inverse_park(x_dq, frame: SyncFrame, t: float) -> np.ndarray:
    """Balanced abc signal whose DQ image at ``t`` is ``x_dq``.

    Uses the transpose, which is the right inverse of the power-invariant
    transform on the balanced (zero-sequence free) subspace.
    """
    if isinstance(x_dq, DQPair):
        x_dq = x_dq.as_array()
    x_dq = np.asarray(x_dq, dtype=float).reshape(2)
    return park_matrix(frame.angle(t)).T @ x_dq


def instantaneous_power(v, i) -> tuple[float, float]:
    """Active and reactive power of DQ voltage ``v`` and current ``i``.

    ``p = v.i`` (exact in the power-invariant frame) and
    ``q = v_q*i_d - v_d*i_q``, positive for inductive consumption.
    """
    v = v.as_array() if isinstance(v, DQPair) else np.asarray(v, dtype=float)
    i = i.as_array() if isinstance(i, DQPair) else np.asarray(i, dtype=float)
    p = v[..., 0] * i[..., 0] + v[..., 1] * i[..., 1]
    q = v[..., 1] * i[..., 0] - v[..., 0] * i[..., 1]
    if np.ndim(p) == 0:
        return float(p), float(q)
    return p, q
