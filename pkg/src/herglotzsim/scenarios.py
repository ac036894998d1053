"""Built-in models with closed-form reference solutions.

``sphere``
    Ball on a plane that is frictionless for ``x < 0`` and perfectly rough
    for ``x > 0``, with damping linear in the velocities.  State
    ``q = (x, y)``, ``v = (xdot, ydot, wx, wy, wz)``; the angular velocities
    are quasi-velocities with no configuration coordinate.

``cylinder``
    Eccentric cylinder dropped onto a platform of mass ``M`` held by a
    spring, with a velocity-proportional driving force.  State
    ``q = (x, y, phi, h)``.  In contact the cylinder rolls; the normal and
    tangential multipliers must stay positive or the corresponding rows are
    released.

Reference helpers come in two flavours: ``*_oracle`` functions evaluate the
exact closed forms of the model as built, and ``*_display`` functions
evaluate reference closed forms literally (with switches for known sign
slips) so they can be compared against the numerics.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .constraints import ConstraintSet, UnilateralConstraint
from .dynamics import constrained_rhs
from .geometry import MetricField
from .impacts import EventKind, restitution_jump
from .lagrangian import MechanicalSystem, State, energy
from .simulator import (Guard, IntegratorOptions, ReleaseGuard, Scenario, energy_ledger, simulate)

Array = np.ndarray


# --------------------------------------------------------------------------
# parameters
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SphereParams:
    r: float = 1.0
    k2: float = 0.4
    beta: float = 0.1
    x0: float = -1.0
    y0: float = 0.0
    xdot0: float = 1.0
    ydot0: float = 0.0
    wx0: float = 0.0
    wy0: float = 0.3
    wz0: float = 1.0
    z0: float = 0.0

    def __post_init__(self):
        for name in ("r", "k2", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for f in dataclasses.fields(self):
            if not np.isfinite(getattr(self, f.name)):
                raise ValueError(f"{f.name} must be finite")

    @property
    def omega0(self) -> Array:
        return np.array([self.wx0, self.wy0, self.wz0])


@dataclass(frozen=True)
class CylinderParams:
    """Cylinder, platform and initial aerial state.

    ``gap0`` is the initial clearance between the cylinder's lowest point and
    the platform; ``h0 = None`` starts the platform at its static equilibrium
    ``-M g / k``.
    """

    m: float = 1.0
    M: float = 4.0
    I: float = 0.3
    r: float = 0.5
    gamma: float = 0.2
    k: float = 60.0
    g: float = 9.81
    beta: float = 0.1
    alpha: float = 0.5
    x0: float = 0.0
    gap0: float = 0.3
    phi0: float = 0.4
    h0: Optional[float] = None
    xdot0: float = 0.5
    ydot0: float = 0.0
    phidot0: float = 1.0
    hdot0: float = 0.0
    z0: float = 0.0

    def __post_init__(self):
        for name in ("m", "M", "I", "r", "k"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.gamma < 0 or self.g < 0 or self.beta < 0:
            raise ValueError("gamma, g and beta must be non-negative")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.gap0 < 0:
            raise ValueError("gap0 must be non-negative")
        phi = np.linspace(0.0, 2.0 * np.pi, 721)
        if np.min(cylinder_gamma_fn(self, phi)) <= 0.0:
            raise ValueError("I(M+m) - m M gamma^2 sin^2(phi) must stay positive")

    @property
    def h_eq(self) -> float:
        return -self.M * self.g / self.k

    def initial_q(self) -> Array:
        h = self.h_eq if self.h0 is None else self.h0
        y = h + self.gamma * np.cos(self.phi0) + self.r + self.gap0
        return np.array([self.x0, y, self.phi0, h])


def cylinder_gamma_fn(p: CylinderParams, phi) -> Array:
    """``I(M+m) - m M gamma^2 sin^2(phi)``."""
    return p.I * (p.M + p.m) - p.m * p.M * p.gamma ** 2 * np.sin(phi) ** 2


# --------------------------------------------------------------------------
# builders
# --------------------------------------------------------------------------

def _sphere_psi(r: float) -> Array:
    a = np.array([[1.0, 0.0, 0.0, -r, 0.0], [0.0, 1.0, r, 0.0, 0.0]])
    a.setflags(write=False)
    return a


def sphere_system(p: SphereParams) -> MechanicalSystem:
    beta = p.beta
    metric = MetricField.diagonal([1.0, 1.0, p.k2, p.k2, p.k2], config_index=(0, 1))
    return MechanicalSystem(
        metric=metric,
        potential=lambda q, z: beta * z,
        potential_dq=lambda q, z: np.zeros(2),
        potential_dz=lambda q, z: beta,
        name="sphere",
    )


def build_sphere(p: SphereParams = SphereParams()) -> Scenario:
    sys = sphere_system(p)
    psi = _sphere_psi(p.r)
    zero = np.zeros_like(psi)
    cs = ConstraintSet(
        rows=2, dim=5,
        psi=lambda q: psi,
        dpsi=lambda q, qd: zero,
        region=lambda q: np.full(2, q[0] > 0.0),
        labels=("roll_x", "roll_y"),
    )
    initial = State(0.0, [p.x0, p.y0], [p.xdot0, p.ydot0, p.wx0, p.wy0, p.wz0], p.z0)
    return Scenario(
        name="sphere", sys=sys, cs=cs, initial=initial,
        guards=(Guard(lambda q: float(q[0]), "rough_edge"),), params=p,
    )


def cylinder_system(p: CylinderParams) -> MechanicalSystem:
    m, M, k, g, beta = p.m, p.M, p.k, p.g, p.beta

    def V(q, z):
        return 0.5 * k * q[3] ** 2 + m * g * q[1] + M * g * q[3] - beta * z

    def dVdq(q, z):
        return np.array([0.0, m * g, 0.0, k * q[3] + M * g])

    return MechanicalSystem(
        metric=MetricField.diagonal([m, m, p.I, M]),
        potential=V, potential_dq=dVdq, potential_dz=lambda q, z: -beta,
        name="cylinder",
    )


def cylinder_gap(p: CylinderParams, q) -> float:
    return float(q[1] - q[3] - p.gamma * np.cos(q[2]) - p.r)


def cylinder_psi(p: CylinderParams, phi: float) -> Array:
    return np.array([
        [1.0, 0.0, -(p.r + p.gamma * np.cos(phi)), 0.0],
        [0.0, 1.0, p.gamma * np.sin(phi), -1.0],
    ])


def build_cylinder(p: CylinderParams = CylinderParams(), contact_tol: float = 1e-9) -> Scenario:
    sys = cylinder_system(p)
    gam = p.gamma

    def dpsi(q, qd):
        s, c = np.sin(q[2]), np.cos(q[2])
        return np.array([[0.0, 0.0, gam * s * qd[2], 0.0], [0.0, 0.0, gam * c * qd[2], 0.0]])

    cs = ConstraintSet(
        rows=2, dim=4,
        psi=lambda q: cylinder_psi(p, q[2]),
        dpsi=dpsi,
        region=lambda q: np.full(2, cylinder_gap(p, q) <= contact_tol),
        labels=("roll", "normal"),
    )
    ground = UnilateralConstraint(
        gap=lambda q: cylinder_gap(p, q),
        gap_dq=lambda q: np.array([0.0, 1.0, gam * np.sin(q[2]), -1.0]),
        restitution=p.alpha,
        label="platform",
        contact_rows=(0, 1),
    )
    initial = State(0.0, p.initial_q(), [p.xdot0, p.ydot0, p.phidot0, p.hdot0], p.z0)
    return Scenario(
        name="cylinder", sys=sys, cs=cs, initial=initial, unilaterals=(ground,),
        release_guards=(
            ReleaseGuard(row=1, drop=(0, 1), label="liftoff"),
            ReleaseGuard(row=0, drop=(0,), label="slip"),
        ),
        params=p,
    )


# --------------------------------------------------------------------------
# sphere references
# --------------------------------------------------------------------------

def _decay(rate: float, tau):
    """``(1 - exp(-rate tau)) / rate`` with the ``rate -> 0`` limit."""
    if rate == 0.0:
        return tau
    return -np.expm1(-rate * tau) / rate


def sphere_oracle_smooth(p: SphereParams, state0: State, t: float, spin_rate: Optional[float] = None) -> State:
    """Exact free-phase state at ``t`` (valid while ``x < 0``).

    ``spin_rate`` is the decay rate of the angular velocities; the model's
    own value is ``beta``.
    """
    b = p.beta
    c = b if spin_rate is None else spin_rate
    tau = t - state0.t
    v0 = state0.v
    q = state0.q + v0[:2] * _decay(b, tau)
    lin = np.exp(-b * tau) * v0[:2]
    ang = np.exp(-c * tau) * v0[2:]
    T_lin = 0.5 * float(v0[:2] @ v0[:2])
    T_rot = 0.5 * p.k2 * float(v0[2:] @ v0[2:])
    # z' = T - b z with T = T_lin e^{-2 b tau} + T_rot e^{-2 c tau}
    rot = T_rot * tau if 2.0 * c == b else T_rot * (-np.expm1((b - 2.0 * c) * tau)) / (2.0 * c - b)
    z = np.exp(-b * tau) * (state0.z + T_lin * _decay(b, tau) + rot)
    return State(t, q, np.concatenate([lin, ang]), z)


def sphere_event_time(p: SphereParams, state0: State) -> float:
    """First time the free phase reaches ``x = 0``; ``inf`` if it never does."""
    x0, xd0 = state0.q[0], state0.v[0]
    if x0 >= 0.0:
        return state0.t
    arg = p.beta * x0 / xd0 if xd0 != 0.0 else -np.inf
    if xd0 <= 0.0 or arg <= -1.0:
        return np.inf
    return state0.t - np.log1p(arg) / p.beta


def sphere_jump_display(p: SphereParams, v_minus) -> Array:
    """Post-activation velocities from the reference five-line jump block."""
    r, k2 = p.r, p.k2
    xd, yd, wx, wy, wz = np.asarray(v_minus, dtype=float)
    d = r * r + k2
    return np.array([
        (r * r * xd + r * k2 * wy) / d,
        (r * r * yd - r * k2 * wx) / d,
        (-r * yd + k2 * wx) / d,
        (r * xd + k2 * wy) / d,
        wz,
    ])


def sphere_multipliers_display(p: SphereParams, v_plus, tau, spin_rate: Optional[float] = None) -> Array:
    """Reference rolling-phase multipliers, written in post-jump variables.

    With ``spin_rate == beta`` both vanish identically.
    """
    b = p.beta
    c = b if spin_rate is None else spin_rate
    r = p.r
    wx, wy = float(v_plus[2]), float(v_plus[3])
    tau = np.asarray(tau, dtype=float)
    if c == b:
        ratio = np.zeros_like(tau)
    else:
        num = np.expm1(-b * tau) - np.expm1(-c * tau)
        den = r * r * np.expm1(-c * tau) + np.expm1(-b * tau)
        # tau -> 0 limit of num/den
        lim = (c - b) / (b + r * r * c)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio = np.where(np.abs(tau) > 1e-12, num / np.where(den == 0, 1.0, den), lim)
    return np.stack([b * r * wy * ratio, -b * r * wx * ratio], axis=-1)


def sphere_oracle_rolling(p: SphereParams, state_plus: State, t_bar: float, t: float,
                          spin_rate: Optional[float] = None) -> Tuple[State, Array]:
    """Reference rolling-phase closed forms evaluated from the post-jump state.

    Returns the state at ``t`` and the multipliers ``(lam1, lam2)``.  With
    the model's spin rate ``beta`` these are the exact solution and the
    multipliers vanish.
    """
    b = p.beta
    c = b if spin_rate is None else spin_rate
    r = p.r
    tau = t - t_bar
    v = state_plus.v
    lam = sphere_multipliers_display(p, v, tau, spin_rate)
    l1, l2 = float(lam[0]), float(lam[1])
    E = np.exp(-c * tau)
    ramp = (b * tau + np.expm1(-b * tau)) / (b * b)
    x = state_plus.q[0] + l1 * ramp + v[0] * _decay(b, tau)
    y = state_plus.q[1] + l2 * ramp + v[1] * _decay(b, tau)
    xd = l1 * _decay(b, tau) + v[0] * np.exp(-b * tau)
    yd = l2 * _decay(b, tau) + v[1] * np.exp(-b * tau)
    wx = l2 * r * (1.0 - E) / b + E * v[2]
    wy = -l1 * r * (1.0 - E) / b + E * v[3]
    wz = E * v[4]
    T_lin = 0.5 * float(v[:2] @ v[:2])
    T_rot = 0.5 * p.k2 * float(v[2:] @ v[2:])
    rot = T_rot * tau if 2.0 * c == b else T_rot * (-np.expm1((b - 2.0 * c) * tau)) / (2.0 * c - b)
    z = np.exp(-b * tau) * (state_plus.z + T_lin * _decay(b, tau) + rot)
    return State(t, [x, y], [xd, yd, wx, wy, wz], z), np.array([l1, l2])


# --------------------------------------------------------------------------
# cylinder references
# --------------------------------------------------------------------------

def _cyl_normal_mass(p: CylinderParams, phi: float, plane_sign: float) -> float:
    return 1.0 / p.m + plane_sign / p.M + (p.gamma * np.sin(phi)) ** 2 / p.I


def cylinder_projector_display(p: CylinderParams, phi: float, plane_sign: float = 1.0) -> Array:
    """Reference normal projector as a 4x4 matrix in ``(x, y, phi, h)`` order.

    ``plane_sign = -1`` reproduces the alternative denominator ``1/m - 1/M + ...``;
    the consistent value is ``+1``.
    """
    s = p.gamma * np.sin(phi)
    row = np.array([0.0, 1.0, s, -1.0])
    col = np.array([0.0, 1.0 / p.m, s / p.I, -1.0 / p.M])
    return np.outer(col, row) / _cyl_normal_mass(p, phi, plane_sign)


def cylinder_jump_display(p: CylinderParams, phi: float, v_minus, alpha: Optional[float] = None,
                          plane_sign: float = 1.0) -> Array:
    """Reference touchdown velocity block ``(xdot, ydot, phidot, hdot)``."""
    a = p.alpha if alpha is None else alpha
    xd, yd, pd, hd = np.asarray(v_minus, dtype=float)
    s = p.gamma * np.sin(phi)
    j = (1.0 + a) * (yd - hd + s * pd) / _cyl_normal_mass(p, phi, plane_sign)
    return np.array([xd, yd - j / p.m, pd - j * s / p.I, hd + j / p.M])


def cylinder_tl_display(p: CylinderParams, phi: float, v_minus, alpha: Optional[float] = None,
                        plane_sign: float = 1.0) -> float:
    """Reference closed form of the kinetic energy of the velocity jump."""
    a = p.alpha if alpha is None else alpha
    xd, yd, pd, hd = np.asarray(v_minus, dtype=float)
    s = p.gamma * np.sin(phi)
    j = (yd - hd + s * pd) / _cyl_normal_mass(p, phi, plane_sign)
    return 0.5 * (1.0 + a) ** 2 * j * j * _cyl_normal_mass(p, phi, 1.0)


def cylinder_activation_display(p: CylinderParams, phi: float, v_minus) -> Array:
    """Reference momentum block for imposing both rolling rows; returns velocities."""
    m, M, I, r, g = p.m, p.M, p.I, p.r, p.gamma
    xd, yd, pd, hd = np.asarray(v_minus, dtype=float)
    px, py, pp, ph = m * xd, m * yd, I * pd, M * hd
    s, c = np.sin(phi), np.cos(phi)
    D = (2 * (m + M) * (I + m * r * r) + g * g * m * (m + 2 * M)
         + g * m * (g * m * np.cos(2 * phi) + 4 * r * (m + M) * c))
    roll = g * s * (m * ph - M * py) + (m + M) * (g * px * c + px * r + pp)
    A = I + m * r * r + g * m * c * (g * c + 2 * r)
    pxp = 2 * m * (g * c + r) * roll / D
    pyp = m / ((m + M) * A + g * g * m * M * s * s) * (
        (ph + py) * A - g * M * s * (g * px * c + px * r + pp) + g * g * M * py * s * s)
    ppp = 2 * I * roll / D
    php = M / D * (2 * (ph + py) * (I + m * r * r)
                   + g * m * (4 * r * (ph + py) * c + 2 * s * (g * px * c + px * r + pp) + g * py * np.cos(2 * phi))
                   + g * g * m * (2 * ph + py))
    return np.array([pxp / m, pyp / m, ppp / I, php / M])


def cylinder_multipliers_display(p: CylinderParams, h: float, phi: float, hdot: float, phidot: float) -> Array:
    """Reference stance multipliers ``(mu1, mu2)``, evaluated literally."""
    m, M, I, r, gam, k, b = p.m, p.M, p.I, p.r, p.gamma, p.k, p.beta
    s, c = np.sin(phi), np.cos(phi)
    G = cylinder_gamma_fn(p, phi)
    ups = m * I * G / (m * m * M * gam * s * (r + gam * c) + G * (I + m * (r + gam * c) ** 2))
    mu1 = (-ups * (2 * b * phidot * (gam * c + r) + gam * s * phidot ** 2)
           + ups * m * M * gam ** 2 * s / G * (-2 * b * s * phidot + k * h / (gam * M) + c * phidot ** 2))
    mu2 = -(m * M * I / G) * (-2 * b * gam * s * phidot - k * h / M - gam * c * phidot ** 2
                              + (r + gam * c) * mu1 / I)
    return np.array([mu1, mu2])


def cylinder_stance_state(p: CylinderParams, phi: float, h: float, phidot: float, hdot: float,
                          x_offset: float = 0.0, z: float = 0.0, t: float = 0.0) -> State:
    """Rolling-contact state built from the reduced coordinates ``(phi, h)``."""
    s, c = np.sin(phi), np.cos(phi)
    q = [p.gamma * s + p.r * phi + x_offset, h + p.r + p.gamma * c, phi, h]
    v = [(p.r + p.gamma * c) * phidot, hdot - p.gamma * s * phidot, phidot, hdot]
    return State(t, q, v, z)


def cylinder_stance_oracle(p: CylinderParams, phi: float, h: float, phidot: float, hdot: float) -> Array:
    """Reduced-coordinate solve for ``(phi'', h'', mu1, mu2)`` in rolling contact.

    Newton-Euler balance with the driving force ``beta * momentum`` and the
    contact forces ``mu1`` (horizontal) and ``mu2`` (vertical, on the
    cylinder; reaction ``-mu2`` on the platform), with ``x`` and ``y``
    eliminated through the rolling constraints.
    """
    m, M, I, r, gam, k, g, b = p.m, p.M, p.I, p.r, p.gamma, p.k, p.g, p.beta
    s, c = np.sin(phi), np.cos(phi)
    a = r + gam * c
    xd = a * phidot
    yd = hdot - gam * s * phidot
    # x'' = a phi'' - gam s phidot^2,  y'' = h'' - gam s phi'' - gam c phidot^2
    A = np.array([
        [m * a, 0.0, -1.0, 0.0],
        [-m * gam * s, m, 0.0, -1.0],
        [I, 0.0, a, -gam * s],
        [0.0, M, 0.0, 1.0],
    ])
    rhs = np.array([
        m * b * xd + m * gam * s * phidot ** 2,
        m * b * yd - m * g + m * gam * c * phidot ** 2,
        I * b * phidot,
        M * b * hdot - k * h - M * g,
    ])
    return np.linalg.solve(A, rhs)


def cylinder_stance_residuals(p: CylinderParams, state: State, vdot: Array, lam: Array) -> Array:
    """Residuals of the mass-proportional stance equations

    ``m(x'' - b x') = mu1``, ``m(y'' - b y') + m g = mu2``,
    ``I(phi'' - b phi') = -(r + gam cos phi) mu1 + gam sin phi mu2``,
    ``M(h'' - b h') + k h + M g = -mu2``.
    """
    m, M, I, r, gam, k, g, b = p.m, p.M, p.I, p.r, p.gamma, p.k, p.g, p.beta
    _, _, phi, h = state.q
    v = state.v
    mu1, mu2 = lam
    return np.array([
        m * (vdot[0] - b * v[0]) - mu1,
        m * (vdot[1] - b * v[1]) + m * g - mu2,
        I * (vdot[2] - b * v[2]) + (r + gam * np.cos(phi)) * mu1 - gam * np.sin(phi) * mu2,
        M * (vdot[3] - b * v[3]) + k * h + M * g + mu2,
    ])


# --------------------------------------------------------------------------
# oracle-comparison suites
# --------------------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    residual: float
    tol: float
    status: str  # "PASS", "FAIL" or "SKIPPED"
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status != "FAIL"


def _check(name: str, residual: float, tol: float, note: str = "") -> CheckResult:
    ok = bool(np.isfinite(residual) and residual <= tol)
    return CheckResult(name, float(residual), tol, "PASS" if ok else "FAIL", note)


def _skip(name: str, tol: float, note: str) -> CheckResult:
    return CheckResult(name, float("nan"), tol, "SKIPPED", note)


def sup_relative(numeric: Array, reference: Array, floor: float = 1e-12) -> float:
    """Largest componentwise error relative to the component's sup norm.

    Each column of ``numeric - reference`` is scaled by ``max |reference|``
    over the samples, so components passing through zero are not penalised;
    components that vanish identically are compared absolutely.
    """
    numeric = np.atleast_2d(numeric)
    reference = np.atleast_2d(reference)
    scale = np.maximum(np.max(np.abs(reference), axis=0), floor)
    return float(np.max(np.abs(numeric - reference) / scale))


def _tol(tol_override, default: float) -> float:
    return default if tol_override is None else tol_override


def sphere_rolling_residual(p: SphereParams, v) -> Array:
    v = np.atleast_2d(v)
    return np.stack([v[:, 0] - p.r * v[:, 3], v[:, 1] + p.r * v[:, 2]], axis=-1)


def verify_sphere(p: SphereParams = SphereParams(), t_end: float = 3.0,
                  opts: Optional[IntegratorOptions] = None, tol: Optional[float] = None,
                  n_check: int = 200) -> List[CheckResult]:
    """Simulate the sphere and compare every phase with its closed form."""
    scn = build_sphere(p)
    traj = simulate(scn, (0.0, t_end), opts)
    out = []
    s0 = scn.initial
    t_bar = sphere_event_time(p, s0)
    free = traj.segments[0]
    tt = np.linspace(free.t0, free.t1, n_check)
    num = np.array([free.state_at(t).pack() for t in tt])
    ref = np.array([sphere_oracle_smooth(p, s0, t).pack() for t in tt])
    out.append(_check("free_phase", sup_relative(num, ref), _tol(tol, 1e-6)))
    if not np.isfinite(t_bar) or t_bar > t_end:
        note = "t_span ends before the rough edge is reached"
        for name, d in (("event_time", 1e-8), ("jump", 1e-10), ("rolling_phase", 1e-6),
                        ("multipliers", 1e-6), ("rolling_residual", 1e-9)):
            out.append(_skip(name, _tol(tol, d), note))
        return out
    acts = [e for e in traj.events if e.kind is EventKind.ACTIVATION]
    out.append(_check("event_count", abs(len(traj.events) - 1), 0 if tol is None else tol,
                      f"{len(acts)} activation event(s)"))
    ev = traj.events[0]
    out.append(_check("event_time", abs(ev.t_event - t_bar), _tol(tol, 1e-8)))
    out.append(_check("jump", float(np.max(np.abs(ev.v_plus - sphere_jump_display(p, ev.v_minus)))),
                      _tol(tol, 1e-10)))
    plus = traj.segments[-1].state_at(ev.t_event)
    roll = [sg for sg in traj.segments if sg.t0 >= ev.t_event]
    num, ref, lam_num, lam_ref, res = [], [], [], [], []
    for sg in roll:
        for t in np.linspace(sg.t0, sg.t1, n_check):
            st = sg.state_at(t)
            o, lam = sphere_oracle_rolling(p, plus, ev.t_event, t)
            num.append(st.pack())
            ref.append(o.pack())
            lam_num.append(constrained_rhs(scn.sys, scn.cs, st).lam)
            lam_ref.append(lam)
        res.append(np.max(np.abs(sphere_rolling_residual(p, sg.y[:, 2:7]))))
        res.append(np.max(np.abs(sphere_rolling_residual(p, np.array(num)[:, 2:7]))))
    out.append(_check("rolling_phase", sup_relative(np.array(num), np.array(ref)), _tol(tol, 1e-6)))
    lam_scale = p.beta * float(np.linalg.norm(plus.v))
    lam_err = float(np.max(np.abs(np.array(lam_num) - np.array(lam_ref)))) / lam_scale
    out.append(_check("multipliers", lam_err, _tol(tol, 1e-6), "relative to beta*|v+|"))
    out.append(_check("rolling_residual", float(max(res)), _tol(tol, 1e-9)))
    return out


def random_precontact_velocity(p: CylinderParams, phi: float, rng: np.random.Generator) -> Array:
    """Velocity with a strictly approaching normal component."""
    while True:
        v = rng.uniform(-2.0, 2.0, size=4)
        if v[1] - v[3] + p.gamma * np.sin(phi) * v[2] < -0.05:
            return v


def verify_cylinder(p: CylinderParams = CylinderParams(), t_end: float = 2.0,
                    opts: Optional[IntegratorOptions] = None, tol: Optional[float] = None,
                    seed: int = 7, n_samples: int = 50) -> List[CheckResult]:
    """Closed-form checks of the cylinder's jumps, energy law and multipliers."""
    rng = np.random.default_rng(seed)
    out = []
    carnot, tl, jump = 0.0, 0.0, 0.0
    for alpha in (0.0, 0.25, 0.5, 1.0):
        pa = dataclasses.replace(p, alpha=alpha)
        scn = build_cylinder(pa)
        uc = scn.unilaterals[0]
        for _ in range(n_samples):
            phi = rng.uniform(-np.pi, np.pi)
            q = np.array([0.0, 0.0, phi, 0.0])
            q[1] = q[3] + pa.gamma * np.cos(phi) + pa.r
            vm = random_precontact_velocity(pa, phi, rng)
            post, audit = restitution_jump(scn.sys, uc, State(0.0, q, vm, 0.0))
            carnot = max(carnot, abs(audit.carnot_residual))
            tl = max(tl, abs(audit.T_lost - cylinder_tl_display(pa, phi, vm)))
            jump = max(jump, float(np.max(np.abs(post.v - cylinder_jump_display(pa, phi, vm)))))
    out.append(_check("carnot", carnot, _tol(tol, 1e-10)))
    out.append(_check("T_lost_display", tl, _tol(tol, 1e-8)))
    out.append(_check("jump_display", jump, _tol(tol, 1e-10)))

    # aerial energy law E(t) = e^{beta t} E0 on a drop that does not land
    high = dataclasses.replace(p, gap0=max(p.gap0, 10.0), ydot0=1.0)
    scn = build_cylinder(high)
    traj = simulate(scn, (0.0, 1.0), opts)
    seg = traj.segments[0]
    tt = np.linspace(0.0, 1.0, n_samples)
    E = np.array([energy(scn.sys, seg.state_at(t)) for t in tt])
    E0 = energy(scn.sys, scn.initial)
    out.append(_check("aerial_energy_law", float(np.max(np.abs(E - E0 * np.exp(p.beta * tt)) / np.abs(E0 * np.exp(p.beta * tt)))),
                      _tol(tol, 1e-6)))

    ind, disp, eom = 0.0, 0.0, 0.0
    scn = build_cylinder(p)
    mask = np.ones(2, dtype=bool)
    pg = dataclasses.replace(p, gamma=max(p.gamma, 0.1))
    scn_g = build_cylinder(pg)
    for _ in range(n_samples):
        phi, h = rng.uniform(-np.pi, np.pi), rng.uniform(-1.5, 0.5)
        phidot, hdot = rng.uniform(-3, 3), rng.uniform(-2, 2)
        st = cylinder_stance_state(p, phi, h, phidot, hdot)
        rates = constrained_rhs(scn.sys, scn.cs, st, mask=mask)
        ref = cylinder_stance_oracle(p, phi, h, phidot, hdot)
        ind = max(ind, float(np.max(np.abs(rates.lam - ref[2:]) / np.maximum(np.abs(ref[2:]), 1e-12))))
        eom = max(eom, float(np.max(np.abs(cylinder_stance_residuals(p, st, rates.vdot, rates.lam)))))
        gam = rng.uniform(0.1, 0.5)
        pgg = dataclasses.replace(pg, gamma=gam)
        scn_g = build_cylinder(pgg)
        stg = cylinder_stance_state(pgg, phi, h, phidot, hdot)
        lam = constrained_rhs(scn_g.sys, scn_g.cs, stg, mask=mask).lam
        shown = cylinder_multipliers_display(pgg, h, phi, hdot, phidot)
        disp = max(disp, float(np.max(np.abs(lam - shown) / np.maximum(np.abs(shown), 1e-12))))
    out.append(_check("multipliers_independent", ind, _tol(tol, 1e-6)))
    out.append(_check("stance_equations", eom, _tol(tol, 1e-8)))
    out.append(_check("multipliers_display", disp, _tol(tol, 1e-6), "reference closed forms"))

    traj = simulate(build_cylinder(p), (0.0, t_end), opts)
    led = energy_ledger(traj, build_cylinder(p))
    jumps = [abs(e.dE_measured - e.dE_predicted) for e in led.events]
    out.append(_check("run_event_energy", max(jumps, default=0.0), _tol(tol, 1e-8),
                      f"{len(led.events)} event(s)"))
    out.append(_check("run_segment_energy", max((s.max_rel_deviation for s in led.segments), default=0.0),
                      _tol(tol, 1e-6)))
    return out


@dataclass(frozen=True)
class ScenarioEntry:
    params: type
    build: Callable
    verify: Callable


SCENARIOS: Dict[str, ScenarioEntry] = {
    "sphere": ScenarioEntry(SphereParams, build_sphere, verify_sphere),
    "cylinder": ScenarioEntry(CylinderParams, build_cylinder, verify_cylinder),
}


def make_params(name: str, overrides: Optional[dict] = None):
    """Instantiate a scenario's parameter class, rejecting unknown keys."""
    if name not in SCENARIOS:
        raise KeyError(name)
    cls = SCENARIOS[name].params
    overrides = dict(overrides or {})
    known = {f.name for f in dataclasses.fields(cls)}
    for key in overrides:
        if key not in known:
            raise KeyError(key)
    return cls(**overrides)
