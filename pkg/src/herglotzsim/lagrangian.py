"""Mechanical contact Lagrangians ``L = 1/2 g(v, v) - V(q, z)``."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import MetricField, metric_at

Array = np.ndarray

# relative agreement required between supplied and finite-difference derivatives
_DERIV_RTOL = 1e-6


@dataclass(frozen=True)
class State:
    """A point ``(t, q, v, z)`` of the extended phase space."""

    t: float
    q: Array
    v: Array
    z: float

    def __post_init__(self):
        q = np.array(self.q, dtype=float).reshape(-1)
        v = np.array(self.v, dtype=float).reshape(-1)
        t = float(self.t)
        z = float(self.z)
        if not (np.isfinite(t) and np.isfinite(z) and np.all(np.isfinite(q)) and np.all(np.isfinite(v))):
            raise ValueError("state has non-finite entries")
        q.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "z", z)

    def replace(self, **changes) -> "State":
        kw = dict(t=self.t, q=self.q, v=self.v, z=self.z)
        kw.update(changes)
        return State(**kw)

    def pack(self) -> Array:
        return np.concatenate([self.q, self.v, [self.z]])

    @classmethod
    def unpack(cls, t: float, y: Array, nq: int, n: int) -> "State":
        return cls(t, y[:nq], y[nq:nq + n], y[nq + n])


def _default_samples(nq: int) -> list:
    rng = np.random.default_rng(12345)
    return [(rng.uniform(-1.0, 1.0, nq), float(rng.uniform(-1.0, 1.0))) for _ in range(3)]


@dataclass(frozen=True)
class MechanicalSystem:
    """Metric plus a potential ``V(q, z)`` with user-supplied derivatives.

    ``potential_dq`` returns a covector over the configuration coordinates
    (length ``metric.nq``).  Both derivatives are cross-checked against
    central differences on ``check_points`` at construction; pass
    ``check_points=()`` to skip.
    """

    metric: MetricField
    potential: Callable[[Array, float], float]
    potential_dq: Callable[[Array, float], Array]
    potential_dz: Callable[[Array, float], float]
    check_points: Optional[Sequence] = None
    fd_step: float = 1e-6
    name: str = ""

    def __post_init__(self):
        points = _default_samples(self.metric.nq) if self.check_points is None else self.check_points
        for q, z in points:
            self._check_derivatives(np.asarray(q, dtype=float), float(z))

    @property
    def n(self) -> int:
        return self.metric.dim

    @property
    def nq(self) -> int:
        return self.metric.nq

    def _check_derivatives(self, q: Array, z: float) -> None:
        dq = np.asarray(self.potential_dq(q, z), dtype=float)
        if dq.shape != (self.nq,):
            raise ValueError(f"potential_dq must return shape ({self.nq},), got {dq.shape}")
        fd = np.empty(self.nq)
        for a in range(self.nq):
            h = self.fd_step * max(1.0, abs(q[a]))
            qp, qm = q.copy(), q.copy()
            qp[a] += h
            qm[a] -= h
            fd[a] = (self.potential(qp, z) - self.potential(qm, z)) / (qp[a] - qm[a])
        hz = self.fd_step * max(1.0, abs(z))
        fdz = (self.potential(q, z + hz) - self.potential(q, z - hz)) / (2 * hz)
        scale = max(1.0, float(np.max(np.abs(fd), initial=0.0)), abs(fdz))
        if np.max(np.abs(dq - fd), initial=0.0) > _DERIV_RTOL * scale:
            raise ValueError(f"potential_dq disagrees with finite differences at q={q!r}: {dq} vs {fd}")
        dz = float(self.potential_dz(q, z))
        if abs(dz - fdz) > _DERIV_RTOL * scale:
            raise ValueError(f"potential_dz disagrees with finite differences at q={q!r}: {dz} vs {fdz}")

    def dV_velocity_slots(self, q, z) -> Array:
        """``dV/dq`` lifted to a covector on the velocity space."""
        out = np.zeros(self.n)
        out[list(self.metric.config_index)] = self.potential_dq(np.asarray(q, dtype=float), z)
        return out


def kinetic_energy(sys: MechanicalSystem, state: State) -> float:
    g = metric_at(sys.metric, state.q)
    return 0.5 * float(state.v @ g @ state.v)


def potential_energy(sys: MechanicalSystem, state: State) -> float:
    return float(sys.potential(state.q, state.z))


def energy(sys: MechanicalSystem, state: State) -> float:
    """``E_L = Delta(L) - L = T + V`` for the mechanical form."""
    return kinetic_energy(sys, state) + potential_energy(sys, state)


def lagrangian(sys: MechanicalSystem, state: State) -> float:
    return kinetic_energy(sys, state) - potential_energy(sys, state)


def momentum(sys: MechanicalSystem, state: State) -> Array:
    return metric_at(sys.metric, state.q) @ state.v


def dissipation_rate(sys: MechanicalSystem, state: State) -> float:
    """Reeb derivative of the energy, which reduces to ``dV/dz``."""
    return float(sys.potential_dz(state.q, state.z))


def linear_dissipation_potential(base: Callable, base_dq: Callable, beta: float, nq: int):
    """Wrap ``V0(q)`` into ``V(q, z) = V0(q) + beta * z`` with matching derivatives.

    ``beta > 0`` damps every velocity component at rate ``beta``; the
    energy then evolves as ``E0 * exp(-beta t)``.
    """

    def V(q, z):
        return float(base(q)) + beta * z

    def dVdq(q, z):
        return np.asarray(base_dq(q), dtype=float).reshape(nq)

    def dVdz(q, z):
        return beta

    return V, dVdq, dVdz
