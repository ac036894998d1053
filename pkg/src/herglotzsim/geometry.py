"""Riemannian metric fields on a single coordinate chart.

A :class:`MetricField` maps configuration coordinates ``q`` to an SPD
matrix acting on velocity vectors.  The velocity space may be larger than
the configuration space: entries of ``v`` that are not time derivatives of
any entry of ``q`` (quasi-velocities, e.g. body angular velocities) are
allowed, in which case ``config_index`` lists, for each entry of ``q``,
the velocity slot it drives.  The metric may only depend on ``q``, so
derivatives along quasi-velocity directions vanish.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import NonPositiveDefinite

Array = np.ndarray


@dataclass(frozen=True)
class MetricField:
    """Metric ``g_ij(q)`` together with the data needed to differentiate it.

    Parameters
    ----------
    dim : int
        Dimension ``n`` of the velocity space.
    eval : callable
        ``q -> (n, n)`` symmetric positive-definite matrix.
    analytic_christoffel : callable, optional
        ``q -> (n, n, n)`` array ``Gamma[i, j, k]``.  Used instead of finite
        differences when supplied.
    fd_step : float
        Relative step for central differences of the metric.
    config_index : sequence of int, optional
        Velocity slot of each configuration coordinate.  Defaults to
        ``range(dim)`` (no quasi-velocities).
    """

    dim: int
    eval: Callable[[Array], Array]
    analytic_christoffel: Optional[Callable[[Array], Array]] = None
    fd_step: float = 1e-5
    config_index: Optional[Sequence[int]] = None

    def __post_init__(self):
        if self.dim <= 0:
            raise ValueError("dim must be positive")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")
        idx = tuple(range(self.dim)) if self.config_index is None else tuple(int(i) for i in self.config_index)
        if len(set(idx)) != len(idx) or any(i < 0 or i >= self.dim for i in idx):
            raise ValueError(f"invalid config_index {idx!r} for dim {self.dim}")
        object.__setattr__(self, "config_index", idx)

    @property
    def nq(self) -> int:
        return len(self.config_index)

    @classmethod
    def constant(cls, matrix, config_index=None) -> "MetricField":
        """Metric that does not depend on ``q``; its Christoffel symbols are zero."""
        g = np.array(matrix, dtype=float)
        g.setflags(write=False)
        n = g.shape[0]
        zeros = np.zeros((n, n, n))
        return cls(dim=n, eval=lambda q: g, analytic_christoffel=lambda q: zeros,
                   config_index=config_index)

    @classmethod
    def diagonal(cls, entries, config_index=None) -> "MetricField":
        return cls.constant(np.diag(np.asarray(entries, dtype=float)), config_index)


def _check_q(m: MetricField, q) -> Array:
    q = np.asarray(q, dtype=float)
    if q.shape != (m.nq,):
        raise ValueError(f"expected q of shape ({m.nq},), got {q.shape}")
    if not np.all(np.isfinite(q)):
        raise ValueError(f"non-finite configuration {q!r}")
    return q


def metric_at(m: MetricField, q) -> Array:
    """Evaluate ``g(q)``; raises :class:`NonPositiveDefinite` if Cholesky fails."""
    q = _check_q(m, q)
    g = np.asarray(m.eval(q), dtype=float)
    if g.shape != (m.dim, m.dim):
        raise ValueError(f"metric returned shape {g.shape}, expected {(m.dim, m.dim)}")
    if not np.array_equal(g, g.T):
        raise ValueError(f"metric is not symmetric at q={q!r}")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise NonPositiveDefinite(q) from None
    return g


def metric_factor(m: MetricField, q):
    """Return ``(g, cho)`` where ``cho`` is a scipy Cholesky factorization of ``g``."""
    g = metric_at(m, q)
    return g, cho_factor(g)


def gradient(m: MetricField, dV, q) -> Array:
    """Raise an index: solve ``g(q) x = dV`` through the Cholesky factor."""
    _, cho = metric_factor(m, q)
    dV = np.asarray(dV, dtype=float)
    if dV.shape != (m.dim,):
        raise ValueError(f"covector must have length {m.dim}")
    return cho_solve(cho, dV)


def metric_derivatives(m: MetricField, q) -> Array:
    """Central-difference ``dg[l, i, j] = d g_ij / d x^l`` in velocity-slot indexing.

    Slots without a configuration coordinate have zero derivative.
    """
    q = _check_q(m, q)
    n = m.dim
    dg = np.zeros((n, n, n))
    for a, slot in enumerate(m.config_index):
        h = m.fd_step * max(1.0, abs(q[a]))
        qp = q.copy()
        qm = q.copy()
        qp[a] += h
        qm[a] -= h
        dg[slot] = (metric_at(m, qp) - metric_at(m, qm)) / (qp[a] - qm[a])
    return dg


def christoffel_at(m: MetricField, q) -> Array:
    """Christoffel symbols ``Gamma[i, j, k]`` of the Levi-Civita connection.

    ``Gamma^i_jk = 1/2 g^il (d_j g_lk + d_k g_lj - d_l g_jk)``, symmetrized
    in ``(j, k)`` so the lower-index symmetry holds exactly.
    """
    if m.analytic_christoffel is not None:
        gam = np.asarray(m.analytic_christoffel(_check_q(m, q)), dtype=float)
    else:
        _, cho = metric_factor(m, q)
        dg = metric_derivatives(m, q)
        # lowered[l, j, k] = d_j g_lk + d_k g_lj - d_l g_jk
        lowered = np.einsum("jlk->ljk", dg) + np.einsum("klj->ljk", dg) - dg
        n = m.dim
        gam = 0.5 * cho_solve(cho, lowered.reshape(n, n * n)).reshape(n, n, n)
    return 0.5 * (gam + np.swapaxes(gam, 1, 2))


def inner(g: Array, u, w) -> float:
    return float(np.asarray(u) @ g @ np.asarray(w))


def lift_covector(m: MetricField, dq) -> Array:
    """Embed a covector over ``q`` into the velocity space (zeros on quasi slots)."""
    out = np.zeros(m.dim)
    out[list(m.config_index)] = np.asarray(dq, dtype=float)
    return out


def project_velocity(m: MetricField, v) -> Array:
    """Time derivative of ``q`` given the velocity vector ``v``."""
    return np.asarray(v, dtype=float)[list(m.config_index)]
