"""Dynamical coupling of two processes sharing one obstacle field.

Both processes evolve step-locked; when a particle of one process passes a
particle of the other between consecutive times, a pairing update runs.
Paired particles ("dumbbells") certify that the two processes shadow each
other; unpaired particles are defects. All position comparisons use unwrapped
coordinates, so on a ring the coupling lives on the covering line with
periodically repeated obstacles.

Starting pairing is empty: pairs only ever form through passing events.
"""
from __future__ import annotations

from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    ConfigurationError,
    CouplingError,
    InvariantViolationError,
    ObstacleField,
    ParticleConfig,
    Ring,
)
from .dynamics import SimState, _step_scalar


@dataclass
class CoupledState:
    """Two step-locked processes, the pairing between them, and the clock.

    pairing maps first-process particle indices to second-process indices and
    is a partial bijection; inverse is maintained alongside.
    """

    x: SimState
    xbar: SimState
    z: ObstacleField
    pairing: dict = field(default_factory=dict)
    time: int = 0

    def __post_init__(self):
        vals = list(self.pairing.values())
        if len(set(vals)) != len(vals):
            raise ConfigurationError("pairing must be one-to-one")

    @classmethod
    def initial(cls, x: ParticleConfig, xbar: ParticleConfig, z: ObstacleField) -> "CoupledState":
        if x.domain != xbar.domain:
            raise ConfigurationError("both processes must share one domain")
        return cls(SimState.initial(x), SimState.initial(xbar), z)

    @property
    def inverse(self) -> dict:
        return {j: i for i, j in self.pairing.items()}

    @property
    def pair_count(self) -> int:
        return len(self.pairing)

    def defects_x(self) -> tuple:
        return tuple(i for i in range(self.x.count) if i not in self.pairing)

    def defects_xbar(self) -> tuple:
        paired = set(self.pairing.values())
        return tuple(j for j in range(self.xbar.count) if j not in paired)

    def copy(self) -> "CoupledState":
        return CoupledState(self.x.copy(), self.xbar.copy(), self.z, dict(self.pairing), self.time)


@dataclass
class OvertakeEvent:
    """One mover passing a contiguous block of opposite-process particles.

    paired_anchor is the least overtaken index that was paired to a particle
    other than the mover when the event was processed (None if none were);
    repair_target is the index the pairing rules select for (re)pairing: the
    largest overtaken index below the anchor that is free or held by the mover
    itself, over the whole block when there is no anchor. Both are filled in
    by apply_pairing, since they depend on the live pairing.
    """

    side: str
    mover: int
    overtaken: tuple
    paired_anchor: Optional[int] = None
    repair_target: Optional[int] = None

    def __post_init__(self):
        if self.side not in ("x", "xbar"):
            raise ConfigurationError(f"unknown side {self.side!r}")
        if not self.overtaken:
            raise ConfigurationError("event must overtake at least one particle")
        lo, hi = self.overtaken[0], self.overtaken[-1]
        if self.overtaken != tuple(range(lo, hi + 1)):
            raise InvariantViolationError(f"overtaken set {self.overtaken} is not contiguous")


def _ext_pos(arr, m, period):
    """Position of the m-th entry of arr extended periodically (m may leave [0, n))."""
    if period is None:
        return arr[m]
    n = len(arr)
    k, j = divmod(m, n)
    return arr[j] + k * period


def _ext_bisect_right(arr, val, period):
    """bisect_right against arr extended by all period shifts; index may leave [0, n)."""
    if period is None:
        return bisect_right(arr, val)
    # pick the shift that puts val inside one period window starting at arr[0]
    k = (val - arr[0]) // period
    return int(k) * len(arr) + bisect_right(arr, val - k * period)


def _side_events(side, mover_prev, mover_next, other_prev, other_next, period):
    events = []
    n = len(other_prev)
    for i in range(len(mover_prev)):
        if mover_next[i] <= mover_prev[i]:
            continue
        lo = _ext_bisect_right(other_prev, mover_prev[i], period)
        hi = _ext_bisect_right(other_next, mover_next[i], period) - 1
        if lo <= hi:
            if hi - lo + 1 > n:
                raise InvariantViolationError(
                    f"mover {i} swept more than one full lap of the other process"
                )
            events.append(OvertakeEvent(side, i, tuple(range(lo, hi + 1))))
    return events


def detect_overtakes(prev: CoupledState, next_state: CoupledState) -> list:
    """All passing events between consecutive states, first-process side first.

    On a ring a mover may pass a periodic copy of an opposite-process
    particle, so overtaken indices are extended: index % count names the
    particle, index // count the lap shift of the copy passed. Asserts the
    structural facts the pairing rules rely on: per side, no copy is overtaken
    by two movers; a mover overtaken the same step must coincide with its
    overtaker exactly.
    """
    if prev.x.count != next_state.x.count or prev.xbar.count != next_state.xbar.count:
        raise ConfigurationError("mismatched states")
    if next_state.time != prev.time + 1:
        raise ConfigurationError(f"states are {next_state.time - prev.time} steps apart, expected 1")
    period = prev.z.domain.length if isinstance(prev.z.domain, Ring) else None
    x_prev = prev.x.unwrapped()
    x_next = next_state.x.unwrapped()
    b_prev = prev.xbar.unwrapped()
    b_next = next_state.xbar.unwrapped()
    ev_x = _side_events("x", x_prev, x_next, b_prev, b_next, period)
    ev_b = _side_events("xbar", b_prev, b_next, x_prev, x_next, period)

    for evs in (ev_x, ev_b):
        for a, b in zip(evs, evs[1:]):
            if a.overtaken[-1] >= b.overtaken[0]:
                raise InvariantViolationError(
                    f"t={next_state.time}: movers {a.mover},{b.mover} overtake a shared particle"
                )
    movers_x = {ev.mover: ev for ev in ev_x}
    movers_b = {ev.mover: ev for ev in ev_b}
    n_b = len(b_prev)
    n_x = len(x_prev)
    for ev in ev_x:
        for m in ev.overtaken:
            hit = movers_b.get(m % n_b)
            if hit is not None and _ext_pos(b_next, m, period) != x_next[ev.mover]:
                raise InvariantViolationError(
                    f"t={next_state.time}: mover {ev.mover} overtook counter-mover {m % n_b} without coincidence"
                )
    for ev in ev_b:
        for m in ev.overtaken:
            hit = movers_x.get(m % n_x)
            if hit is not None and _ext_pos(x_next, m, period) != b_next[ev.mover]:
                raise InvariantViolationError(
                    f"t={next_state.time}: mover {ev.mover} overtook counter-mover {m % n_x} without coincidence"
                )
    return ev_x + ev_b


def apply_pairing(state: CoupledState, events: list) -> CoupledState:
    """Run the pairing rules over the events, in order, against the live pairing.

    For a mover that is already paired: if a repair target exists, the mover
    abandons its partner (which becomes a defect) and pairs with the target.
    A mover that sweeps past its own partner does not anchor on it, so it
    re-pairs with the last particle it passed, dropping the old partner behind
    the new span; with nothing else swept this re-pairs the same two particles.
    For an unpaired mover: if some overtaken particle was paired and the mover
    strictly passed the least such one, the mover takes over that pairing and
    the former partner becomes a defect; otherwise the mover pairs with the
    repair target if one exists. Takeovers move defects rightward, never left.
    """
    fwd = dict(state.pairing)
    inv = {j: i for i, j in fwd.items()}
    u_x = state.x.unwrapped()
    u_b = state.xbar.unwrapped()
    period = state.z.domain.length if isinstance(state.z.domain, Ring) else None

    for ev in events:
        if ev.side == "x":
            mine, theirs = fwd, inv
            u_mover, u_other = u_x, u_b
        else:
            mine, theirs = inv, fwd
            u_mover, u_other = u_b, u_x
        i = ev.mover
        n = len(u_other)
        paired = [m for m in ev.overtaken if theirs.get(m % n, i) != i]
        anchor = min(paired) if paired else None
        free = [
            m
            for m in ev.overtaken
            if (anchor is None or m < anchor) and theirs.get(m % n, i) == i
        ]
        target = max(free) if free else None
        ev.paired_anchor = anchor
        ev.repair_target = target

        if i in mine:
            if target is not None:
                old = mine.pop(i)
                del theirs[old]
                if target % n in theirs:
                    raise InvariantViolationError(
                        f"repair target {target} is already paired; overtaken={ev.overtaken}"
                    )
                mine[i] = target % n
                theirs[target % n] = i
        elif anchor is not None and u_mover[i] > _ext_pos(u_other, anchor, period):
            former = theirs.pop(anchor % n)
            del mine[former]
            mine[i] = anchor % n
            theirs[anchor % n] = i
        elif target is not None:
            if target % n in theirs:
                raise InvariantViolationError(
                    f"repair target {target} is already paired; overtaken={ev.overtaken}"
                )
            mine[i] = target % n
            theirs[target % n] = i

    for i, j in fwd.items():
        if inv.get(j) != i:
            raise InvariantViolationError("pairing maps fell out of sync")
    return CoupledState(state.x, state.xbar, state.z, fwd, state.time)


def _arc_defects(defect_reps, lo, width, length):
    """Count defects strictly inside the arc (lo, lo + width) on a ring."""
    hi = lo + width
    if hi <= length:
        return bisect_left(defect_reps, hi) - bisect_right(defect_reps, lo)
    return (
        len(defect_reps)
        - bisect_right(defect_reps, lo)
        + bisect_left(defect_reps, hi - length)
    )


def is_proper(state: CoupledState) -> list:
    """Violations of the pair-integrity conditions; empty list means proper.

    A pair is proper when its span (the short way around on a ring) does not
    exceed the segment velocity at its trailing end, and no obstacle and no
    defect of either side lies strictly inside the open span. Additionally no
    two pairs may cross: strictly reversed order on the two sides.
    """
    out = []
    if not state.pairing:
        return out
    z = state.z
    ring = isinstance(z.domain, Ring)
    u_x = state.x.unwrapped()
    u_b = state.xbar.unwrapped()
    items = sorted(state.pairing.items())

    if ring:
        length = z.domain.length
        defect_reps = sorted(
            [u_x[i] % length for i in state.defects_x()]
            + [u_b[j] % length for j in state.defects_xbar()]
        )
        spans = []
        for i, j in items:
            a = u_x[i] % length
            b = u_b[j] % length
            ahead = (b - a) % length
            if 2 * ahead <= length:
                spans.append((i, j, a, ahead))
            else:
                spans.append((i, j, b, length - ahead))
        for i, j, lo, width in spans:
            vseg = z.segment_velocity(lo)
            if width > vseg:
                out.append(f"pair ({i},{j}): span {width} exceeds local speed {vseg}")
            if width > 0:
                if z.count:
                    d_obs, _ = z.next_ahead(lo)
                    if d_obs < width:
                        out.append(f"pair ({i},{j}): obstacle strictly inside span")
                inside = _arc_defects(defect_reps, lo, width, length)
                if inside > 0:
                    out.append(f"pair ({i},{j}): {inside} defect(s) strictly inside span")

        by_x = sorted((u_x[i] % length, u_b[j] % length, i, j) for i, j in items)
        window = 2 * z.top_speed
        count = len(by_x)
        for a_idx in range(count):
            ax, ab, i, j = by_x[a_idx]
            for step in range(1, count):
                bx, bb, k, l = by_x[(a_idx + step) % count]
                dx = (bx - ax) % length
                if dx > window:
                    break
                if dx > 0:
                    db = (bb - ab) % length
                    if db != 0 and 2 * db > length:
                        out.append(f"pairs ({i},{j}) and ({k},{l}) cross")
        return out

    defect_u = sorted(
        [u_x[i] for i in state.defects_x()] + [u_b[j] for j in state.defects_xbar()]
    )
    for i, j in items:
        a, b = u_x[i], u_b[j]
        lo, hi = (a, b) if a <= b else (b, a)
        width = hi - lo
        vseg = z.segment_velocity(lo)
        if width > vseg:
            out.append(f"pair ({i},{j}): span {width} exceeds local speed {vseg}")
        if width > 0:
            if z.count:
                d_obs, _ = z.next_ahead(lo)
                if d_obs < width:
                    out.append(f"pair ({i},{j}): obstacle strictly inside span")
            inside = bisect_left(defect_u, hi) - bisect_right(defect_u, lo)
            if inside > 0:
                out.append(f"pair ({i},{j}): {inside} defect(s) strictly inside span")

    by_x = sorted(items, key=lambda ij: (u_x[ij[0]], ij[0]))
    window = 2 * z.top_speed
    for a_idx in range(len(by_x)):
        i, j = by_x[a_idx]
        for b_idx in range(a_idx + 1, len(by_x)):
            k, l = by_x[b_idx]
            if u_x[k] - u_x[i] > window:
                break
            if u_x[i] < u_x[k] and u_b[j] > u_b[l]:
                out.append(f"pairs ({i},{j}) and ({k},{l}) cross")
    return out


@dataclass
class CouplingDiagnostics:
    """Per-step series and the closing verdict of a coupled run.

    rows: (t, defects_x, defects_xbar, pairs, v_gap_abs, proper_flag) where
    v_gap_abs is |displacement difference of particle 0| up to time t.
    """

    rows: list
    verdict: str
    initial_defects: int
    final_defects: int
    final_state: CoupledState

    @property
    def nearly_successful(self) -> bool:
        return self.verdict == "nearly successful"


def run_coupled(
    x: ParticleConfig,
    xbar: ParticleConfig,
    z: ObstacleField,
    steps: int,
    threshold: float = 0.1,
    check_every: int = 1,
) -> CouplingDiagnostics:
    """Evolve both processes step-locked with pairing updates and proper checks.

    Requires a ring and equal particle counts (equal densities). A proper-pair
    violation aborts with a state dump. The verdict is "nearly successful"
    when the final defect count is below threshold times the initial one.
    """
    if not isinstance(x.domain, Ring):
        raise ConfigurationError("coupled runs require a ring domain")
    if x.domain != xbar.domain or z.domain != x.domain:
        raise ConfigurationError("both processes and the field must share one ring")
    if x.count != xbar.count:
        raise ConfigurationError(
            f"equal particle counts required, got {x.count} and {xbar.count}"
        )
    if x.count == 0:
        raise ConfigurationError("coupled runs need at least one particle per side")
    state = CoupledState.initial(x, xbar, z)
    n_diff = state.x.count - state.xbar.count
    initial_defects = state.x.count + state.xbar.count
    start_x = state.x.unwrapped()[0]
    start_b = state.xbar.unwrapped()[0]
    rows = []

    for t in range(1, steps + 1):
        prev = state.copy()
        _step_scalar(state.x, z)
        _step_scalar(state.xbar, z)
        state.time = t
        events = detect_overtakes(prev, state)
        state = apply_pairing(state, events)

        d_x = state.x.count - state.pair_count
        d_b = state.xbar.count - state.pair_count
        if d_x - d_b != n_diff:
            raise InvariantViolationError(f"defect count difference changed at t={t}")
        v_gap_abs = abs((state.x.unwrapped()[0] - start_x) - (state.xbar.unwrapped()[0] - start_b))
        proper_violations = is_proper(state) if t % check_every == 0 else []
        if proper_violations:
            raise CouplingError(
                f"pairing lost integrity at t={t}",
                dump={
                    "time": t,
                    "violations": proper_violations,
                    "x": [str(p) for p in state.x.unwrapped()],
                    "xbar": [str(p) for p in state.xbar.unwrapped()],
                    "pairing": dict(state.pairing),
                },
            )
        rows.append((t, d_x, d_b, state.pair_count, v_gap_abs, 1))

    final_defects = rows[-1][1] + rows[-1][2] if rows else initial_defects
    verdict = (
        "nearly successful"
        if final_defects < threshold * initial_defects
        else "defects persist"
    )
    return CouplingDiagnostics(rows, verdict, initial_defects, final_defects, state)
