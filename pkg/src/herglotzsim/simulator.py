"""Event-driven integration of piecewise-smooth Herglotz dynamics.

Smooth phases are integrated with scipy's DOP853 stepper; after every
accepted step the event functions are checked at the step end and at a
few interior dense-output points, and the earliest crossing is localized
by bisection on the dense output.  Three event families exist:

* gap functions of unilateral constraints crossing zero from above
  (impacts, followed by capture into persistent contact when the
  rebound is below ``graze_tol``),
* guard functions marking the singular set of a rank-varying
  distribution (constraints appear or disappear),
* multipliers of release-guarded rows reaching zero from above.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import DOP853, OdeSolution, cumulative_simpson

from .constraints import (ConstraintSet, UnilateralConstraint, empty_constraints, numerical_rank,
                          transition_case)
from .dynamics import constrained_rhs
from .errors import InconsistentInitialState, InvalidTriple, StepSizeUnderflow, ZenoDetected
from .impacts import (EventKind, ImpulseAudit, activation_jump, contact_normal, release_audit,
                      restitution_jump)
from .lagrangian import MechanicalSystem, State, energy

logger = logging.getLogger(__name__)

Array = np.ndarray


@dataclass(frozen=True)
class Guard:
    """Scalar function of ``q`` whose zero set is part of the singular set."""

    fn: Callable[[Array], float]
    label: str


@dataclass(frozen=True)
class ReleaseGuard:
    """Keep ``row`` active only while its multiplier is positive.

    When the multiplier reaches zero the rows in ``drop`` are released.  If
    ``drop`` covers all contact rows of a unilateral constraint, that
    contact ends.
    """

    row: int
    drop: Tuple[int, ...]
    label: str


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_step: float = 0.05
    event_tol: float = 1e-10
    graze_tol: float = 1e-7
    max_events_per_window: int = 1000
    zeno_window: float = 1.0
    fd_step: float = 1e-6
    stabilization: float = 0.0
    drift_tol: float = 1e-8
    interior_checks: int = 4

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "event_tol", "graze_tol", "zeno_window",
                     "fd_step", "drift_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_events_per_window <= 0:
            raise ValueError("max_events_per_window must be positive")
        if self.stabilization < 0:
            raise ValueError("stabilization must be non-negative")


@dataclass(frozen=True)
class Scenario:
    name: str
    sys: MechanicalSystem
    initial: State
    cs: Optional[ConstraintSet] = None
    unilaterals: Tuple[UnilateralConstraint, ...] = ()
    guards: Tuple[Guard, ...] = ()
    release_guards: Tuple[ReleaseGuard, ...] = ()
    params: object = None

    def __post_init__(self):
        if self.cs is None:
            object.__setattr__(self, "cs", empty_constraints(self.sys.n))
        object.__setattr__(self, "unilaterals", tuple(self.unilaterals))
        object.__setattr__(self, "guards", tuple(self.guards))
        object.__setattr__(self, "release_guards", tuple(self.release_guards))

    @property
    def contact_rows(self) -> frozenset:
        return frozenset(r for uc in self.unilaterals for r in uc.contact_rows)

    def guard_mask(self, q) -> Array:
        """Region mask restricted to rows driven by the guards (not by contact)."""
        m = self.cs.mask(q).copy()
        for r in self.contact_rows:
            m[r] = False
        return m


class StopReason(str, enum.Enum):
    REACHED_END = "reached_end"
    UNILATERAL = "unilateral"
    GUARD = "guard"
    RELEASE = "release"


# tie-break priority between simultaneous events
_PRIORITY = {StopReason.UNILATERAL: 0, StopReason.GUARD: 1, StopReason.RELEASE: 2}


@dataclass
class Segment:
    """One smooth phase: samples at accepted steps plus a dense interpolant."""

    index: int
    rows: Tuple[int, ...]
    t: Array
    y: Array
    lam: Array
    dense: Optional[OdeSolution]
    nq: int
    n: int

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def t1(self) -> float:
        return float(self.t[-1])

    def state_at(self, t: float) -> State:
        if self.dense is None or self.t0 == self.t1:
            y = self.y[0]
        else:
            y = self.dense(float(t))
        return State.unpack(float(t), y, self.nq, self.n)

    def states(self) -> List[State]:
        return [State.unpack(float(t), y, self.nq, self.n) for t, y in zip(self.t, self.y)]


@dataclass
class SegmentEvent:
    reason: StopReason
    index: int
    t: float
    bracket: Tuple[float, float]


@dataclass
class HybridTrajectory:
    scenario: str
    segments: List[Segment] = field(default_factory=list)
    events: List[ImpulseAudit] = field(default_factory=list)
    energy_series: List[Array] = field(default_factory=list)
    error: Optional[str] = None

    @property
    def t_end(self) -> float:
        return self.segments[-1].t1 if self.segments else float("nan")

    def segment_at(self, t: float) -> Segment:
        """Segment containing ``t``; at a shared boundary the later one wins."""
        for seg in reversed(self.segments):
            if seg.t0 <= t <= seg.t1:
                return seg
        raise ValueError(f"t={t} outside the simulated span")

    def state_at(self, t: float) -> State:
        return self.segment_at(t).state_at(t)

    def final_state(self) -> State:
        seg = self.segments[-1]
        return State.unpack(seg.t1, seg.y[-1], seg.nq, seg.n)


def _rows_of(mask: Array) -> Tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(mask))


class _Problem:
    """Right-hand side and event functions for one smooth phase."""

    def __init__(self, scn: Scenario, mask: Array, opts: IntegratorOptions, contact: frozenset):
        self.scn = scn
        self.mask = mask
        self.opts = opts
        self.nq = scn.sys.nq
        self.n = scn.sys.n
        self.rows = _rows_of(mask)
        self.uni = [j for j, uc in enumerate(scn.unilaterals) if j not in contact]
        self.rel = [k for k, rg in enumerate(scn.release_guards) if mask[rg.row]]

    def state(self, t, y) -> State:
        return State.unpack(t, y, self.nq, self.n)

    def rates(self, t, y):
        return constrained_rhs(self.scn.sys, self.scn.cs, self.state(t, y), mask=self.mask,
                               stabilization=self.opts.stabilization)

    def fun(self, t, y):
        return self.rates(t, y).pack()

    def multiplier(self, t, y, row: int) -> float:
        return float(self.rates(t, y).lam[self.rows.index(row)])

    def values(self, t, y) -> dict:
        """Event-function values keyed by ``(reason, index)``."""
        q = y[:self.nq]
        out = {}
        for j in self.uni:
            out[(StopReason.UNILATERAL, j)] = float(self.scn.unilaterals[j].gap(q))
        for i, gd in enumerate(self.scn.guards):
            out[(StopReason.GUARD, i)] = float(gd.fn(q))
        if self.rel:
            lam = self.rates(t, y).lam
            for k in self.rel:
                out[(StopReason.RELEASE, k)] = float(lam[self.rows.index(self.scn.release_guards[k].row)])
        return out


def _crossed(reason: StopReason, before: float, after: float, guard_sign: float) -> bool:
    if reason is StopReason.GUARD:
        return np.sign(after) != guard_sign
    return before > 0.0 and after <= 0.0


def _localize(reason, f, t_lo, t_hi, before, guard_sign, tol) -> Tuple[float, float]:
    """Bisection on ``f`` (dense-output evaluation) down to width ``tol``."""
    while t_hi - t_lo > tol:
        mid = 0.5 * (t_lo + t_hi)
        if mid <= t_lo or mid >= t_hi:
            break
        if _crossed(reason, before, f(mid), guard_sign):
            t_hi = mid
        else:
            t_lo = mid
    return t_lo, t_hi


def integrate_segment(scn: Scenario, state0: State, t_end: float, opts: IntegratorOptions,
                      mask=None, contact: frozenset = frozenset(), guard_signs=None,
                      index: int = 0) -> Tuple[Segment, Optional[SegmentEvent]]:
    """Integrate one smooth phase from ``state0`` until ``t_end`` or the first event.

    Returns the segment and the terminating event (``None`` when ``t_end``
    was reached).  ``guard_signs`` gives the side of each guard the phase
    starts on; by default it is read from ``state0``.
    """
    if mask is None:
        mask = scn.guard_mask(state0.q)
    mask = np.asarray(mask, dtype=bool)
    prob = _Problem(scn, mask, opts, contact)
    if guard_signs is None:
        guard_signs = [float(np.sign(gd.fn(state0.q))) for gd in scn.guards]

    y0 = state0.pack()
    t0 = state0.t

    def lam_of(t, y):
        return prob.rates(t, y).lam if prob.rows else np.zeros(0)

    ts, ys, lams = [t0], [y0], [lam_of(t0, y0)]
    interps = []
    if t_end <= t0:
        seg = Segment(index, prob.rows, np.array(ts), np.array(ys), np.array(lams), None, prob.nq, prob.n)
        return seg, None

    solver = DOP853(prob.fun, t0, y0, t_bound=t_end, rtol=opts.rel_tol, atol=opts.abs_tol,
                    max_step=opts.max_step)
    prev_vals = prob.values(t0, y0)
    stop: Optional[SegmentEvent] = None
    while solver.status == "running":
        t_old = solver.t
        msg = solver.step()
        if solver.status == "failed":
            raise StepSizeUnderflow(f"integration failed at t={t_old:.12g}: {msg}")
        t_new = solver.t
        dense = solver.dense_output()

        # scan step end and interior points for the first sub-interval with a crossing
        k = max(1, opts.interior_checks)
        grid = [t_old + (t_new - t_old) * i / k for i in range(1, k)] + [t_new]
        lo, lo_vals = t_old, prev_vals
        found = []
        for tc in grid:
            yc = solver.y if tc == t_new else dense(tc)
            vals = prob.values(tc, yc)
            for key, after in vals.items():
                reason, idx = key
                gs = guard_signs[idx] if reason is StopReason.GUARD else 0.0
                if _crossed(reason, lo_vals[key], after, gs):
                    found.append(key)
            if found:
                break
            lo, lo_vals = tc, vals
        if found:
            candidates = []
            for reason, idx in found:
                gs = guard_signs[idx] if reason is StopReason.GUARD else 0.0
                if reason is StopReason.UNILATERAL:
                    f = lambda t, j=idx: float(scn.unilaterals[j].gap(dense(t)[:prob.nq]))
                elif reason is StopReason.GUARD:
                    f = lambda t, i=idx: float(scn.guards[i].fn(dense(t)[:prob.nq]))
                else:
                    f = lambda t, kk=idx: prob.multiplier(t, dense(t), scn.release_guards[kk].row)
                a, b = _localize(reason, f, lo, tc, lo_vals[(reason, idx)], gs, opts.event_tol)
                candidates.append((b, reason, idx, a))
            t_first = min(c[0] for c in candidates)
            tied = [c for c in candidates if c[0] - t_first <= opts.event_tol]
            tied.sort(key=lambda c: (_PRIORITY[c[1]], c[2]))
            b, reason, idx, a = tied[0]
            # impacts are applied on the pre-contact side so a quick rebound is
            # still seen as a downcrossing; guards and releases on the post side
            t_ev = a if reason is StopReason.UNILATERAL else b
            y_ev = dense(t_ev)
            interps.append(dense)
            ts.append(t_ev)
            ys.append(y_ev)
            lams.append(lam_of(t_ev, y_ev))
            stop = SegmentEvent(reason, idx, t_ev, (a, b))
            break
        interps.append(dense)
        ts.append(t_new)
        ys.append(np.array(solver.y))
        lams.append(lam_of(t_new, solver.y))
        prev_vals = prob.values(t_new, solver.y)

    dense_sol = OdeSolution(np.array(ts), interps) if len(ts) > 1 else None
    seg = Segment(index, prob.rows, np.array(ts), np.array(ys), np.array(lams), dense_sol, prob.nq, prob.n)
    return seg, stop


def _check_initial(scn: Scenario, mask: Array, opts: IntegratorOptions) -> None:
    s = scn.initial
    for uc in scn.unilaterals:
        if uc.gap(s.q) < -opts.event_tol * max(1.0, float(np.linalg.norm(s.q))):
            raise InconsistentInitialState(f"initial state violates '{uc.label}' (gap {uc.gap(s.q):.3e})")
    if mask.any():
        psi = scn.cs.matrix(s.q)[mask]
        res = float(np.max(np.abs(psi @ s.v)))
        if res > opts.drift_tol * max(1.0, float(np.linalg.norm(s.v))):
            raise InconsistentInitialState(f"initial velocity violates active constraints (residual {res:.3e})")


class _Run:
    """Mutable bookkeeping for one call of :func:`simulate`."""

    def __init__(self, scn: Scenario, opts: IntegratorOptions):
        self.scn = scn
        self.opts = opts
        self.traj = HybridTrajectory(scn.name)
        self.event_times: List[float] = []
        s = scn.initial
        self.contact = set()
        mask = scn.guard_mask(s.q)
        for j, uc in enumerate(scn.unilaterals):
            if uc.contact_rows and abs(uc.gap(s.q)) <= opts.event_tol * max(1.0, float(np.linalg.norm(s.q))):
                rows = list(uc.contact_rows)
                if np.max(np.abs(scn.cs.matrix(s.q)[rows] @ s.v)) <= opts.drift_tol * max(1.0, float(np.linalg.norm(s.v))):
                    self.contact.add(j)
                    mask[rows] = True
        self.mask = mask
        _check_initial(scn, mask, opts)

    # -- bookkeeping -------------------------------------------------------
    def record(self, audit: ImpulseAudit, before: Array, after: Array) -> None:
        audit.rows_before = _rows_of(before)
        audit.rows_after = _rows_of(after)
        self.traj.events.append(audit)
        self.event_times.append(audit.t_event)
        w = self.opts.zeno_window
        recent = sum(1 for t in self.event_times if t > audit.t_event - w)
        if recent > self.opts.max_events_per_window:
            raise ZenoDetected(
                f"{recent} events within {w} time units before t={audit.t_event:.12g}", self.traj)

    def _multipliers(self, state: State, mask: Array) -> dict:
        lam = constrained_rhs(self.scn.sys, self.scn.cs, state, mask=mask).lam
        rows = _rows_of(mask)
        return {r: float(l) for r, l in zip(rows, lam)}

    # -- event handlers ----------------------------------------------------
    def capture(self, j: int, state: State) -> State:
        """Try to enter persistent contact with unilateral ``j`` after an impact."""
        scn, uc = self.scn, self.scn.unilaterals[j]
        rows = set(uc.contact_rows)
        if not rows:
            return state
        for _ in range(len(scn.release_guards) + 1):
            trial = self.mask.copy()
            trial[sorted(rows)] = True
            psi_plus = scn.cs.matrix(state.q)[trial]
            post, audit = activation_jump(scn.sys, None, state, psi_plus, label=f"{uc.label} contact")
            lam = self._multipliers(post, trial)
            failing = [rg for rg in scn.release_guards if rg.row in rows and lam[rg.row] <= 0.0]
            if not failing:
                self.record(audit, self.mask, trial)
                self.mask = trial
                self.contact.add(j)
                return post
            rg = failing[0]
            rows -= set(rg.drop)
            if not rows or not (rows & set(uc.contact_rows)) or set(uc.contact_rows) <= set(rg.drop):
                logger.debug("capture of %s rejected by %s at t=%.12g", uc.label, rg.label, state.t)
                return state
        return state

    def on_unilateral(self, j: int, state: State) -> State:
        scn, uc = self.scn, self.scn.unilaterals[j]
        dpsi, _ = contact_normal(scn.sys, uc, state.q)
        approach = float(dpsi @ state.v)
        if approach < -self.opts.graze_tol:
            state, audit = restitution_jump(scn.sys, uc, state)
            self.record(audit, self.mask, self.mask)
            approach = float(dpsi @ state.v)
        if approach <= self.opts.graze_tol:
            state = self.capture(j, state)
        return state

    def post_side_probe(self, seg: Segment, ev: SegmentEvent) -> Array:
        """Configuration slightly past the guard surface along the trajectory."""
        gd = self.scn.guards[ev.index]
        before_sign = np.sign(gd.fn(seg.state_at(ev.bracket[0]).q))
        dt = self.opts.event_tol
        q = seg.state_at(ev.t).q
        for _ in range(60):
            qp = seg.dense(ev.t + dt)[:seg.nq] if seg.dense is not None else q
            s = np.sign(gd.fn(qp))
            if s != 0 and s != before_sign:
                return qp
            dt *= 2.0
        return q

    def on_guard(self, seg: Segment, ev: SegmentEvent, state: State, guard_signs: list) -> State:
        scn = self.scn
        q_probe = self.post_side_probe(seg, ev)
        new_mask = scn.guard_mask(q_probe)
        for j in self.contact:
            new_mask[list(scn.unilaterals[j].contact_rows)] = True
        tol = scn.cs.rank_tol
        rank = lambda q, m: numerical_rank(scn.cs.matrix(q)[m], tol) if m.any() else 0
        at_mask = scn.guard_mask(state.q)
        for j in self.contact:
            at_mask[list(scn.unilaterals[j].contact_rows)] = True
        triple = (rank(state.q, self.mask), rank(state.q, at_mask), rank(q_probe, new_mask))
        try:
            tr = transition_case(*triple)
            logger.debug("guard %s at t=%.12g: coranks %s -> %s", scn.guards[ev.index].label, ev.t, triple, tr.case)
        except InvalidTriple:
            logger.warning("guard %s at t=%.12g: inconsistent coranks %s", scn.guards[ev.index].label, ev.t, triple)
        guard_signs[ev.index] = float(np.sign(scn.guards[ev.index].fn(q_probe)))
        added = new_mask & ~self.mask
        removed = self.mask & ~new_mask
        label = scn.guards[ev.index].label
        if added.any():
            psi_plus = scn.cs.matrix(q_probe)[new_mask]
            state, audit = activation_jump(scn.sys, None, state, psi_plus, label=label)
            self.record(audit, self.mask, new_mask)
        elif removed.any():
            self.record(release_audit(scn.sys, state, label), self.mask, new_mask)
        self.mask = new_mask
        return state

    def on_release(self, k: int, state: State) -> State:
        scn = self.scn
        rg = scn.release_guards[k]
        new_mask = self.mask.copy()
        new_mask[list(rg.drop)] = False
        for j in list(self.contact):
            if not any(new_mask[r] for r in scn.unilaterals[j].contact_rows):
                self.contact.discard(j)
        self.record(release_audit(scn.sys, state, rg.label), self.mask, new_mask)
        self.mask = new_mask
        return state

    def chained(self, state: State) -> Optional[Tuple[StopReason, int]]:
        """Events already triggered at the start of a phase."""
        scn, opts = self.scn, self.opts
        rows = _rows_of(self.mask)
        if rows:
            lam = self._multipliers(state, self.mask)
            for k, rg in enumerate(scn.release_guards):
                if self.mask[rg.row] and lam[rg.row] <= 0.0:
                    return StopReason.RELEASE, k
        for j, uc in enumerate(scn.unilaterals):
            if j in self.contact:
                continue
            if uc.gap(state.q) <= opts.event_tol * max(1.0, float(np.linalg.norm(state.q))):
                dpsi, _ = contact_normal(scn.sys, uc, state.q)
                if float(dpsi @ state.v) < -opts.graze_tol:
                    return StopReason.UNILATERAL, j
        return None


def simulate(scn: Scenario, t_span: Sequence[float], opts: Optional[IntegratorOptions] = None) -> HybridTrajectory:
    """Alternate smooth phases and jumps from ``scn.initial`` over ``t_span``."""
    opts = opts or IntegratorOptions()
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    if abs(scn.initial.t - t0) > 0:
        scn_state = scn.initial.replace(t=t0)
    else:
        scn_state = scn.initial
    run = _Run(scn, opts)
    state = scn_state
    guard_signs = [float(np.sign(gd.fn(state.q))) for gd in scn.guards]
    for i, s in enumerate(guard_signs):
        if s == 0.0:
            # start on the surface: take the side the region mask describes
            guard_signs[i] = 1.0 if run.mask.any() else -1.0
    traj = run.traj
    while True:
        chained = run.chained(state)
        if chained is not None:
            reason, idx = chained
            if reason is StopReason.RELEASE:
                state = run.on_release(idx, state)
            else:
                state = run.on_unilateral(idx, state)
            continue
        seg, ev = integrate_segment(scn, state, t1, opts, mask=run.mask, contact=frozenset(run.contact),
                                    guard_signs=guard_signs, index=len(traj.segments))
        traj.segments.append(seg)
        traj.energy_series.append(np.array([energy(scn.sys, s) for s in seg.states()]))
        if ev is None:
            break
        state = seg.state_at(ev.t)
        if ev.reason is StopReason.UNILATERAL:
            state = run.on_unilateral(ev.index, state)
        elif ev.reason is StopReason.GUARD:
            state = run.on_guard(seg, ev, state, guard_signs)
        else:
            state = run.on_release(ev.index, state)
        if state.t >= t1:
            break
    return traj


@dataclass
class SegmentLedger:
    index: int
    t0: float
    t1: float
    max_rel_deviation: float


@dataclass
class EventLedger:
    t: float
    kind: str
    label: str
    dE_measured: float
    dE_predicted: float


@dataclass
class EnergyLedger:
    segments: List[SegmentLedger]
    events: List[EventLedger]

    def to_dict(self) -> dict:
        return {
            "segments": [vars(s) for s in self.segments],
            "events": [vars(e) for e in self.events],
        }


def energy_ledger(traj: HybridTrajectory, scn: Scenario, points_per_segment: int = 400) -> EnergyLedger:
    """Compare each phase against ``E(t0) exp(-int dV/dz)`` and each jump
    against the Carnot prediction."""
    sys = scn.sys
    segs = []
    for seg in traj.segments:
        if seg.t1 <= seg.t0:
            segs.append(SegmentLedger(seg.index, seg.t0, seg.t1, 0.0))
            continue
        tt = np.linspace(seg.t0, seg.t1, max(points_per_segment, 3))
        states = [seg.state_at(t) for t in tt]
        E = np.array([energy(sys, s) for s in states])
        rate = np.array([float(sys.potential_dz(s.q, s.z)) for s in states])
        integral = cumulative_simpson(rate, x=tt, initial=0.0)
        pred = E[0] * np.exp(-integral)
        scale = max(float(np.max(np.abs(pred))), 1e-300)
        segs.append(SegmentLedger(seg.index, seg.t0, seg.t1, float(np.max(np.abs(E - pred)) / scale)))
    evs = []
    for a in traj.events:
        seg = traj.segment_at(a.t_event)
        st = seg.state_at(a.t_event).replace(v=a.v_minus)
        E_minus = energy(sys, st)
        E_plus = energy(sys, st.replace(v=a.v_plus))
        if a.kind is EventKind.RESTITUTION:
            alpha = a.restitution
            pred = -(1 - alpha) / (1 + alpha) * a.T_lost
        elif a.kind is EventKind.ACTIVATION:
            pred = -a.T_lost
        else:
            pred = 0.0
        evs.append(EventLedger(a.t_event, a.kind.value, a.label, E_plus - E_minus, pred))
    return EnergyLedger(segs, evs)
