"""Velocity constraints: generalized (rank-varying) distributions and gaps.

A :class:`ConstraintSet` is stored extensionally: a matrix-valued function
``psi(q)`` with ``rows`` one-forms and a boolean ``region(q)`` selecting the
rows that are active at ``q``.  Ranks are counted on the annihilator side,
i.e. :func:`rank_at` returns the number of independent active constraints
(the corank of the distribution).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidTriple

Array = np.ndarray


@dataclass(frozen=True)
class ConstraintSet:
    """Linear constraints ``psi(q) @ v = 0`` on a subset of rows.

    Parameters
    ----------
    rows : int
        Number of constraint one-forms available on the chart.
    dim : int
        Velocity dimension ``n``.
    psi : callable
        ``q -> (rows, dim)`` matrix.
    region : callable, optional
        ``q -> bool[rows]``; defaults to every row active everywhere.
    dpsi : callable, optional
        ``(q, qdot) -> (rows, dim)``, the time derivative of ``psi`` along a
        curve with configuration velocity ``qdot``.  Finite differences are
        used when omitted.
    rank_tol : float
        Relative singular-value threshold for numerical rank.
    labels : sequence of str, optional
        Row names used in reports.
    """

    rows: int
    dim: int
    psi: Callable[[Array], Array]
    region: Optional[Callable[[Array], Array]] = None
    dpsi: Optional[Callable[[Array, Array], Array]] = None
    rank_tol: float = 1e-10
    labels: Optional[Sequence[str]] = None
    fd_step: float = 1e-6

    def __post_init__(self):
        if self.rank_tol <= 0:
            raise ValueError("rank_tol must be positive")
        labels = tuple(self.labels) if self.labels is not None else tuple(f"c{i}" for i in range(self.rows))
        if len(labels) != self.rows:
            raise ValueError("one label per row required")
        object.__setattr__(self, "labels", labels)

    def matrix(self, q) -> Array:
        m = np.asarray(self.psi(np.asarray(q, dtype=float)), dtype=float).reshape(self.rows, self.dim)
        return m

    def mask(self, q) -> Array:
        if self.region is None:
            return np.ones(self.rows, dtype=bool)
        return np.asarray(self.region(np.asarray(q, dtype=float)), dtype=bool).reshape(self.rows)

    def matrix_rate(self, q, qdot) -> Array:
        """``d/dt psi(q(t))`` given ``qdot``; analytic when ``dpsi`` was supplied."""
        q = np.asarray(q, dtype=float)
        qdot = np.asarray(qdot, dtype=float)
        if self.dpsi is not None:
            return np.asarray(self.dpsi(q, qdot), dtype=float).reshape(self.rows, self.dim)
        speed = float(np.linalg.norm(qdot))
        if speed == 0.0:
            return np.zeros((self.rows, self.dim))
        eps = self.fd_step * max(1.0, float(np.linalg.norm(q))) / speed
        return (self.matrix(q + eps * qdot) - self.matrix(q - eps * qdot)) / (2 * eps)


def empty_constraints(dim: int) -> ConstraintSet:
    return ConstraintSet(rows=0, dim=dim, psi=lambda q: np.zeros((0, dim)))


@dataclass(frozen=True)
class UnilateralConstraint:
    """One-sided holonomic constraint ``gap(q) >= 0`` with restitution ``alpha``.

    ``contact_rows`` are rows of the scenario's :class:`ConstraintSet` that
    hold the contact (and any rolling condition) while the body rests on the
    surface; they are switched on by the simulator after a capture.
    """

    gap: Callable[[Array], float]
    gap_dq: Callable[[Array], Array]
    restitution: float
    label: str = "gap"
    contact_rows: Tuple[int, ...] = ()

    def __post_init__(self):
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError(f"restitution must lie in [0, 1], got {self.restitution}")
        object.__setattr__(self, "contact_rows", tuple(int(i) for i in self.contact_rows))

    def check_gradient(self, q, fd_step: float = 1e-6, rtol: float = 1e-6) -> None:
        q = np.asarray(q, dtype=float)
        d = np.asarray(self.gap_dq(q), dtype=float)
        fd = np.empty_like(q)
        for a in range(q.size):
            h = fd_step * max(1.0, abs(q[a]))
            qp, qm = q.copy(), q.copy()
            qp[a] += h
            qm[a] -= h
            fd[a] = (self.gap(qp) - self.gap(qm)) / (qp[a] - qm[a])
        scale = max(1.0, float(np.max(np.abs(fd))))
        if np.max(np.abs(d - fd)) > rtol * scale:
            raise ValueError(f"gap_dq disagrees with finite differences at q={q!r}")


def active_matrix(cs: ConstraintSet, q, mask=None) -> Tuple[Array, Array]:
    """Rows of ``psi(q)`` active at ``q`` (or selected by ``mask``) and their indices."""
    m = cs.mask(q) if mask is None else np.asarray(mask, dtype=bool)
    idx = np.flatnonzero(m)
    if idx.size == 0:
        return np.zeros((0, cs.dim)), idx
    return cs.matrix(q)[idx], idx


def numerical_rank(a: Array, rank_tol: float = 1e-10) -> int:
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rank_tol * s[0]))


def rank_at(cs: ConstraintSet, q, mask=None) -> int:
    """Number of independent active constraints at ``q`` (corank of the distribution)."""
    a, _ = active_matrix(cs, q, mask)
    return numerical_rank(a, cs.rank_tol)


def distribution_rank(cs: ConstraintSet, q, mask=None) -> int:
    """Dimension of the allowed velocity subspace, ``n - rank_at``."""
    return cs.dim - rank_at(cs, q, mask)


class PointKind(enum.Enum):
    REGULAR = "regular"
    SINGULAR = "singular"


def classify_point(cs: ConstraintSet, q, probe_radius: float) -> PointKind:
    """Regular iff the rank is unchanged at ``2 * len(q)`` axis probes."""
    if probe_radius <= 0:
        raise ValueError("probe_radius must be positive")
    q = np.asarray(q, dtype=float)
    r0 = rank_at(cs, q)
    for a in range(q.size):
        for sgn in (1.0, -1.0):
            p = q.copy()
            p[a] += sgn * probe_radius
            if rank_at(cs, p) != r0:
                return PointKind.SINGULAR
    return PointKind.REGULAR


class TransitionCase(enum.Enum):
    NONE = "none"
    CASE1 = "case1"   # constraints appear after the singular point
    CASE2 = "case2"   # constraints are released
    CASE3 = "case3"   # rank dips at the singular point, constraints on both sides


@dataclass(frozen=True)
class Transition:
    case: TransitionCase
    jump: bool


def transition_case(corank_before: int, corank_at: int, corank_after: int) -> Transition:
    """Classify a crossing of the singular set from the constraint counts.

    ``corank_at`` is the constraint count on the singular point itself.  A
    crossing whose singular value matches one side but exceeds the other is
    read as a region that is closed on that side, and classified as if the
    singular value were the smaller neighbour.  A singular value above both
    neighbours cannot come from a differentiable codistribution.
    """
    b, a0, f = int(corank_before), int(corank_at), int(corank_after)
    if min(b, a0, f) < 0:
        raise InvalidTriple(f"negative corank in {(b, a0, f)}")
    if a0 > max(b, f):
        raise InvalidTriple(f"constraint count at the singular point exceeds both sides: {(b, a0, f)}")
    c0 = min(a0, b, f)
    if b == c0 == f:
        return Transition(TransitionCase.NONE, False)
    if b == c0 < f:
        return Transition(TransitionCase.CASE1, True)
    if b > c0 == f:
        return Transition(TransitionCase.CASE2, False)
    return Transition(TransitionCase.CASE3, True)
