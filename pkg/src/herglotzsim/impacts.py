"""Instantaneous velocity jumps and their kinetic-energy accounting."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .constraints import ConstraintSet, UnilateralConstraint, active_matrix
from .dynamics import GRAM_RCOND, gram_matrix
from .errors import DegenerateNormal, GrazingContact, SingularConstraintMass
from .geometry import lift_covector, metric_at, metric_factor
from .lagrangian import MechanicalSystem, State

Array = np.ndarray


class EventKind(str, enum.Enum):
    RESTITUTION = "restitution"
    ACTIVATION = "activation"
    RELEASE = "release"


@dataclass
class ImpulseAudit:
    """Pre/post velocities of a jump and the kinetic energies around it."""

    t_event: float
    kind: EventKind
    v_minus: Array
    v_plus: Array
    T_minus: float
    T_plus: float
    T_lost: float
    carnot_residual: float
    constraint_residual_post: float
    label: str = ""
    restitution: Optional[float] = None
    rows_before: Tuple[int, ...] = ()
    rows_after: Tuple[int, ...] = ()

    def to_dict(self) -> dict:
        return {
            "t": self.t_event,
            "kind": self.kind.value,
            "label": self.label,
            "v_minus": [float(x) for x in self.v_minus],
            "v_plus": [float(x) for x in self.v_plus],
            "T_minus": self.T_minus,
            "T_plus": self.T_plus,
            "T_lost": self.T_lost,
            "carnot_residual": self.carnot_residual,
            "constraint_residual_post": self.constraint_residual_post,
            "rows_before": list(self.rows_before),
            "rows_after": list(self.rows_after),
        }


def _T(g: Array, v: Array) -> float:
    return 0.5 * float(v @ g @ v)


def carnot_check(sys: MechanicalSystem, q, v_minus, v_plus, alpha: float) -> float:
    """``(T+ - T-) + (1 - alpha)/(1 + alpha) * T(v+ - v-)``; zero for restitution jumps."""
    g = metric_at(sys.metric, q)
    vm = np.asarray(v_minus, dtype=float)
    vp = np.asarray(v_plus, dtype=float)
    return (_T(g, vp) - _T(g, vm)) + (1.0 - alpha) / (1.0 + alpha) * _T(g, vp - vm)


def contact_normal(sys: MechanicalSystem, uc: UnilateralConstraint, q) -> Tuple[Array, Array]:
    """Return ``(dPsi, grad Psi)`` on the velocity space."""
    dpsi = lift_covector(sys.metric, uc.gap_dq(np.asarray(q, dtype=float)))
    _, cho = metric_factor(sys.metric, q)
    return dpsi, cho_solve(cho, dpsi)


def unilateral_projectors(sys: MechanicalSystem, uc: UnilateralConstraint, q) -> Tuple[Array, Array]:
    """Metric-orthogonal projectors ``(P, Q)`` onto the tangent space of the
    contact surface and its normal line.

    ``Q X = g(grad Psi, X) / g(grad Psi, grad Psi) * grad Psi``.
    """
    dpsi, n = contact_normal(sys, uc, q)
    nn = float(dpsi @ n)
    if not np.isfinite(nn) or nn <= 0.0 or float(np.linalg.norm(dpsi)) < 1e-12:
        raise DegenerateNormal(f"gap gradient vanishes at q={np.asarray(q)!r}")
    Q = np.outer(n, dpsi) / nn
    P = np.eye(sys.n) - Q
    return P, Q


def restitution_jump(sys: MechanicalSystem, uc: UnilateralConstraint, state: State,
                     graze_tol: float = 0.0) -> Tuple[State, ImpulseAudit]:
    """Newton impact ``v+ = (P - alpha Q) v-`` at a point of the contact surface."""
    P, Q = unilateral_projectors(sys, uc, state.q)
    dpsi, _ = contact_normal(sys, uc, state.q)
    approach = float(dpsi @ state.v)
    if abs(approach) < graze_tol:
        raise GrazingContact(f"normal velocity {approach:.3e} below grazing tolerance {graze_tol:.3e}")
    if approach > 0:
        raise ValueError(f"'{uc.label}' is separating (dPsi(v) = {approach:.3e}); no impact")
    alpha = uc.restitution
    v_plus = (P - alpha * Q) @ state.v
    g = metric_at(sys.metric, state.q)
    Tm, Tp, Tl = _T(g, state.v), _T(g, v_plus), _T(g, v_plus - state.v)
    audit = ImpulseAudit(
        t_event=state.t,
        kind=EventKind.RESTITUTION,
        v_minus=np.array(state.v),
        v_plus=v_plus,
        T_minus=Tm,
        T_plus=Tp,
        T_lost=Tl,
        carnot_residual=(Tp - Tm) + (1.0 - alpha) / (1.0 + alpha) * Tl,
        constraint_residual_post=abs(float(dpsi @ v_plus) + alpha * approach),
        label=uc.label,
        restitution=alpha,
    )
    return state.replace(v=v_plus), audit


def _gram_inverse_apply(C: Array, rhs: Array) -> Array:
    """``C^-1 rhs`` via Cholesky, falling back to a pseudo-inverse when ``C`` is
    singular (rows that are dependent at the limit point)."""
    try:
        s = np.linalg.svd(C, compute_uv=False)
        if s[-1] < GRAM_RCOND * s[0]:
            raise LinAlgError("ill-conditioned")
        return cho_solve(cho_factor(C), rhs)
    except LinAlgError:
        return np.linalg.pinv(C, rcond=GRAM_RCOND, hermitian=True) @ rhs


def activation_projector(sys: MechanicalSystem, q, psi_plus: Array) -> Array:
    """Momentum map ``Id - psi^T C^-1 psi g^-1`` for newly imposed constraints."""
    psi_plus = np.atleast_2d(np.asarray(psi_plus, dtype=float))
    n = sys.n
    if psi_plus.shape[0] == 0 or psi_plus.size == 0:
        return np.eye(n)
    _, cho = metric_factor(sys.metric, q)
    C = gram_matrix(psi_plus, cho)
    if not np.any(C):
        raise SingularConstraintMass("all constraint rows vanish")
    ginv_T = cho_solve(cho, np.eye(n))
    return np.eye(n) - psi_plus.T @ _gram_inverse_apply(C, psi_plus @ ginv_T)


def activation_jump(sys: MechanicalSystem, cs: Optional[ConstraintSet], state: State,
                    psi_plus: Optional[Array] = None, label: str = "") -> Tuple[State, ImpulseAudit]:
    """Project the momentum onto the annihilator of newly active constraints.

    ``psi_plus`` is the post-transition active matrix; when omitted it is
    taken from ``cs`` at ``state.q``.
    """
    if psi_plus is None:
        if cs is None:
            raise ValueError("need either cs or psi_plus")
        psi_plus, _ = active_matrix(cs, state.q)
    psi_plus = np.atleast_2d(np.asarray(psi_plus, dtype=float)).reshape(-1, sys.n)
    g, cho = metric_factor(sys.metric, state.q)
    Pm = activation_projector(sys, state.q, psi_plus)
    p_minus = g @ state.v
    p_plus = Pm @ p_minus
    v_plus = cho_solve(cho, p_plus)
    Tm, Tp, Tl = _T(g, state.v), _T(g, v_plus), _T(g, v_plus - state.v)
    resid = float(np.max(np.abs(psi_plus @ v_plus), initial=0.0))
    audit = ImpulseAudit(
        t_event=state.t,
        kind=EventKind.ACTIVATION,
        v_minus=np.array(state.v),
        v_plus=v_plus,
        T_minus=Tm,
        T_plus=Tp,
        T_lost=Tl,
        # a g-orthogonal projection is the alpha = 0 case of the Carnot identity
        carnot_residual=(Tp - Tm) + Tl,
        constraint_residual_post=resid,
        label=label,
    )
    return state.replace(v=v_plus), audit


def release_audit(sys: MechanicalSystem, state: State, label: str) -> ImpulseAudit:
    """Audit record for a constraint release (no velocity change)."""
    T = _T(metric_at(sys.metric, state.q), state.v)
    return ImpulseAudit(
        t_event=state.t, kind=EventKind.RELEASE, v_minus=np.array(state.v), v_plus=np.array(state.v),
        T_minus=T, T_plus=T, T_lost=0.0, carnot_residual=0.0, constraint_residual_post=0.0, label=label,
    )
