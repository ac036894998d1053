"""Small systems shared by several test modules."""

import numpy as np
from scipy.linalg import null_space

from herglotzsim.constraints import UnilateralConstraint
from herglotzsim.geometry import MetricField
from herglotzsim.impacts import activation_jump, activation_projector, restitution_jump, unilateral_projectors
from herglotzsim.lagrangian import MechanicalSystem, State


def polar_metric(analytic: bool = False, fd_step: float = 1e-5) -> MetricField:
    def g(q):
        return np.diag([1.0, q[0] ** 2])

    def gamma(q):
        r = q[0]
        out = np.zeros((2, 2, 2))
        out[0, 1, 1] = -r
        out[1, 0, 1] = out[1, 1, 0] = 1.0 / r
        return out

    return MetricField(dim=2, eval=g, analytic_christoffel=gamma if analytic else None, fd_step=fd_step)


def free_system(metric: MetricField, beta: float = 0.0) -> MechanicalSystem:
    nq = metric.nq
    return MechanicalSystem(
        metric=metric,
        potential=lambda q, z: beta * z,
        potential_dq=lambda q, z: np.zeros(nq),
        potential_dz=lambda q, z: beta,
        check_points=[(np.full(nq, 1.3), 0.2)],
    )


def random_spd(rng, n: int, cond: float = 50.0) -> np.ndarray:
    a = rng.normal(size=(n, n))
    q, _ = np.linalg.qr(a)
    ev = np.exp(rng.uniform(0.0, np.log(cond), size=n))
    g = (q * ev) @ q.T
    return 0.5 * (g + g.T)


def const_system(g):
    n = g.shape[0]
    return MechanicalSystem(MetricField.constant(g), lambda q, z: 0.0, lambda q, z: np.zeros(n),
                            lambda q, z: 0.0, check_points=())


def random_instance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    k = int(rng.integers(1, n))
    g = random_spd(rng, n)
    normal = rng.normal(size=n)
    psi = rng.normal(size=(k, n))
    return rng, n, g, normal, psi


def projector_suite(seed):
    """Every projector identity on one random instance; returns the worst residual."""
    rng, n, g, normal, psi = random_instance(seed)
    sys = const_system(g)
    alpha = float(rng.uniform(0, 1))
    uc = UnilateralConstraint(gap=lambda q: float(normal @ q), gap_dq=lambda q: normal, restitution=alpha)
    q = np.zeros(n)
    P, Q = unilateral_projectors(sys, uc, q)
    u, w = rng.normal(size=n), rng.normal(size=n)
    s = max(1.0, float(np.abs(P).max()), float(np.abs(Q).max()))
    res = [
        np.abs(P @ P - P).max() / s,
        np.abs(Q @ Q - Q).max() / s,
        np.abs(P @ Q).max() / s,
        np.abs(Q @ P).max() / s,
        np.abs(P + Q - np.eye(n)).max(),
        abs(float((P @ u) @ g @ (Q @ w))) / (np.linalg.norm(g) * np.linalg.norm(u) * np.linalg.norm(w) * s * s),
    ]
    # restitution: Carnot and energy monotonicity
    vm = rng.normal(size=n)
    if normal @ vm > 0:
        vm = -vm
    post, audit = restitution_jump(sys, uc, State(0.0, q, vm, 0.0))
    Tm = audit.T_minus
    res.append(abs(audit.carnot_residual) / max(Tm, 1e-300))
    res.append(max(0.0, audit.T_plus - audit.T_minus) / Tm)
    # activation map: idempotent, admissible, dissipative, equals the least-squares oracle
    Pm = activation_projector(sys, q, psi)
    res.append(np.abs(Pm @ Pm - Pm).max() / max(1.0, np.abs(Pm).max()))
    post, audit = activation_jump(sys, None, State(0.0, q, vm, 0.0), psi)
    vs = np.linalg.norm(vm)
    res.append(np.abs(psi @ post.v).max() / (np.linalg.norm(psi) * vs))
    res.append(max(0.0, audit.T_plus - audit.T_minus) / Tm)
    N = null_space(psi)
    v_ls = N @ np.linalg.solve(N.T @ g @ N, N.T @ g @ vm)
    res.append(np.abs(post.v - v_ls).max() / vs)
    twice, _ = activation_jump(sys, None, post, psi)
    res.append(np.abs(twice.v - post.v).max() / vs)
    return max(float(r) for r in res)
