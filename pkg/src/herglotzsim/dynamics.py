"""Smooth-phase vector fields of the Herglotz equations.

For ``L = 1/2 g(v, v) - V(q, z)`` the equations read

    v' = -Gamma(v, v) - grad V - (dV/dz) v + g^-1 psi^T lam
    q' = v   (configuration slots only)
    z' = L

where ``lam`` is chosen so that ``d/dt (psi(q) v) = 0`` for the active rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve

from .constraints import ConstraintSet, active_matrix
from .errors import SingularConstraintMass
from .geometry import christoffel_at, metric_factor, project_velocity
from .lagrangian import MechanicalSystem, State

Array = np.ndarray

# smallest/largest singular value of the constraint Gram matrix below which it is singular
GRAM_RCOND = 1e-12


@dataclass(frozen=True)
class Rates:
    qdot: Array
    vdot: Array
    zdot: float
    lam: Array

    def pack(self) -> Array:
        return np.concatenate([self.qdot, self.vdot, [self.zdot]])


def _free_parts(sys: MechanicalSystem, state: State):
    q, v, z = state.q, state.v, state.z
    g, cho = metric_factor(sys.metric, q)
    gam = christoffel_at(sys.metric, q)
    dV = sys.dV_velocity_slots(q, z)
    Vz = float(sys.potential_dz(q, z))
    vdot = -np.einsum("ijk,j,k->i", gam, v, v) - cho_solve(cho, dV) - Vz * v
    T = 0.5 * float(v @ g @ v)
    zdot = T - float(sys.potential(q, z))
    return g, cho, vdot, zdot


def free_rhs(sys: MechanicalSystem, state: State) -> Rates:
    _, _, vdot, zdot = _free_parts(sys, state)
    return Rates(project_velocity(sys.metric, state.v), vdot, zdot, np.zeros(0))


def gram_matrix(psi: Array, cho) -> Array:
    """``C = psi g^-1 psi^T``."""
    return psi @ cho_solve(cho, psi.T)


def solve_gram(C: Array, rhs: Array) -> Array:
    """Solve ``C x = rhs``, raising when ``C`` is numerically singular."""
    if C.size == 0:
        return np.zeros(0)
    s = np.linalg.svd(C, compute_uv=False)
    if s[-1] < GRAM_RCOND * s[0] or s[0] == 0.0:
        raise SingularConstraintMass(f"constraint Gram matrix singular values {s}")
    return np.linalg.solve(C, rhs)


def constrained_rhs(sys: MechanicalSystem, cs: Optional[ConstraintSet], state: State,
                    mask=None, stabilization: float = 0.0) -> Rates:
    """Herglotz vector field with the active rows of ``cs`` enforced.

    ``mask`` overrides ``cs.region``.  With ``stabilization = k > 0`` the
    multiplier drives ``psi v`` to zero at rate ``k`` instead of holding it
    constant.  ``lam`` is ordered as the active rows.
    """
    g, cho, vdot, zdot = _free_parts(sys, state)
    qdot = project_velocity(sys.metric, state.v)
    if cs is None or cs.rows == 0:
        return Rates(qdot, vdot, zdot, np.zeros(0))
    psi, idx = active_matrix(cs, state.q, mask)
    if idx.size == 0:
        return Rates(qdot, vdot, zdot, np.zeros(0))
    psi_dot = cs.matrix_rate(state.q, qdot)[idx]
    C = gram_matrix(psi, cho)
    rhs = -psi_dot @ state.v - psi @ vdot
    if stabilization:
        rhs -= stabilization * (psi @ state.v)
    lam = solve_gram(C, rhs)
    vdot = vdot + cho_solve(cho, psi.T @ lam)
    return Rates(qdot, vdot, zdot, lam)
