"""Deterministic evolution between reductions.

Envelope schedules move square modulus between terms in closed form (exact
norm conservation, no accumulated integration error); ``step`` advances a
state by dt and reports the probability currents the reduction engine
consumes. Pulse formation after a hit and conscious-pulse drift with a ready
shadow live here too.

Currents are finite differences of square moduli over the step, so the
per-term entries always telescope to the envelope's total transfer and the
per-site entries of a proportionally growing pulse split a term's current as
|F(u)|^2 du.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import (
    IndexOutOfRange,
    PhantomTransfer,
    Rule2Violation,
    Rule4Violation,
    ScheduleStateMismatch,
    SimulationError,
    StepTooLarge,
)
from .state import (
    BrainGrid,
    FormationProgress,
    Pulse,
    PulseFactor,
    PulseKind,
    SingleState,
    SystemState,
    Term,
    make_gaussian_pulse,
    delta_pulse,
)

__all__ = [
    "RampKind",
    "Transfer",
    "EnvelopeSchedule",
    "CurrentReport",
    "FormationKind",
    "FormationPolicy",
    "Rule4Pair",
    "rule4_pairs",
    "step",
    "form_pulse",
    "drift_pulse",
    "relative_intensity",
]

# A ready shadow site turns phantom when its incoming current stays below
# this for one full step after having been fed at least once.
PHANTOM_CURRENT_FLOOR = 1e-12

COEFF_MATCH_TOL = 1e-9

MIN_RAMP_STEPS = 100


class RampKind(enum.Enum):
    TRIG = "trig"
    LINEAR = "linear"
    HOLD = "hold"


@dataclass(frozen=True)
class Transfer:
    """Square modulus flows from term ``src`` to terms ``dsts`` (equal split)."""

    src: int
    dsts: Tuple[int, ...]


@dataclass(frozen=True)
class Rule4Pair:
    """A configured transfer between two ready factors of one observer."""

    src: int
    dst: int
    observer_id: str


@dataclass(frozen=True)
class EnvelopeSchedule:
    """Closed-form envelope evolution over [t_start, t_end].

    TrigRamp: source coefficient a0*cos(theta(t)), each destination
    a0*sin(theta(t))/sqrt(m), theta ramping 0 -> asin(sqrt(fraction)).
    LinearRamp: transferred square modulus grows linearly to
    fraction*|a0|^2. Hold: nothing moves.

    Source amplitudes are captured at construction from ``state0``;
    destinations must start at exactly zero coefficient and hold ready-kind
    factors. A schedule never touches phantom terms.
    """

    kind: RampKind
    t_start: float
    t_end: float
    transfers: Tuple[Transfer, ...] = ()
    source_amplitudes: Tuple[complex, ...] = ()
    fraction: float = 1.0

    @classmethod
    def hold(cls) -> "EnvelopeSchedule":
        return cls(kind=RampKind.HOLD, t_start=0.0, t_end=0.0)

    @classmethod
    def trig(cls, state0, transfers, t_start, t_end, fraction=1.0) -> "EnvelopeSchedule":
        return cls._ramp(RampKind.TRIG, state0, transfers, t_start, t_end, fraction)

    @classmethod
    def linear(cls, state0, transfers, t_start, t_end, fraction=1.0) -> "EnvelopeSchedule":
        return cls._ramp(RampKind.LINEAR, state0, transfers, t_start, t_end, fraction)

    @classmethod
    def _ramp(cls, kind, state0: SystemState, transfers, t_start, t_end, fraction):
        if not t_end > t_start:
            raise SimulationError(f"ramp needs t_end > t_start, got [{t_start}, {t_end}]")
        if not 0.0 < fraction <= 1.0:
            raise SimulationError(f"transfer fraction must be in (0, 1], got {fraction}")
        transfers = tuple(
            Transfer(src=tr[0], dsts=tuple(tr[1]) if isinstance(tr[1], (tuple, list)) else (tr[1],))
            if not isinstance(tr, Transfer)
            else tr
            for tr in transfers
        )
        seen = set()
        amps = []
        for tr in transfers:
            for idx in (tr.src, *tr.dsts):
                if not 0 <= idx < len(state0.terms):
                    raise IndexOutOfRange(f"schedule references term {idx}")
                if idx in seen:
                    raise SimulationError(f"term {idx} appears twice in one schedule")
                seen.add(idx)
            if state0.terms[tr.src].phantom or any(state0.terms[d].phantom for d in tr.dsts):
                raise PhantomTransfer(f"transfer {tr.src} -> {tr.dsts} touches a phantom term")
            for d in tr.dsts:
                dterm = state0.terms[d]
                if dterm.coefficient != 0:
                    raise ScheduleStateMismatch(
                        f"destination term {d} must start at zero coefficient"
                    )
                if not dterm.brain.is_ready:
                    raise Rule2Violation(
                        f"destination term {d} must hold a ready factor, not "
                        f"{type(dterm.brain).__name__}"
                    )
            amps.append(complex(state0.terms[tr.src].coefficient))
        return cls(
            kind=kind,
            t_start=float(t_start),
            t_end=float(t_end),
            transfers=transfers,
            source_amplitudes=tuple(amps),
            fraction=float(fraction),
        )

    def progress(self, t: float) -> float:
        """Ramp progress clamped to [0, 1]."""
        if self.kind is RampKind.HOLD or t <= self.t_start:
            return 0.0
        if t >= self.t_end:
            return 1.0
        return (t - self.t_start) / (self.t_end - self.t_start)

    def envelope_factors(self, t: float) -> Tuple[float, float]:
        """(source multiplier, total destination multiplier) at time t."""
        lam = self.progress(t)
        if self.kind is RampKind.TRIG:
            theta = math.asin(math.sqrt(self.fraction)) * lam
            return math.cos(theta), math.sin(theta)
        if self.kind is RampKind.LINEAR:
            moved = self.fraction * lam
            return math.sqrt(1.0 - moved), math.sqrt(moved)
        return 1.0, 0.0

    def predicted_coefficients(self, t: float) -> Dict[int, complex]:
        """Scheduled terms' coefficients at time t."""
        out: Dict[int, complex] = {}
        src_f, dst_f = self.envelope_factors(t)
        for tr, a0 in zip(self.transfers, self.source_amplitudes):
            out[tr.src] = a0 * src_f
            split = dst_f / math.sqrt(len(tr.dsts))
            for d in tr.dsts:
                out[d] = a0 * split
        return out

    def active_in(self, t0: float, t1: float) -> bool:
        if self.kind is RampKind.HOLD or not self.transfers:
            return False
        return t0 < self.t_end and t1 > self.t_start


@dataclass(frozen=True)
class CurrentReport:
    """Probability currents produced by one step.

    per_term[n] is d|c_n|^2/dt as a finite difference over the step.
    per_site maps the index of each non-phantom ready term to that term's
    per-site current array (finite differences of unit-basis site masses);
    each array sums to the term's per_term entry. total_positive is the
    rule-1 numerator, the sum of positive per-term currents.
    """

    per_term: np.ndarray
    per_site: Dict[int, np.ndarray]
    total_positive: float
    dt: float

    def __post_init__(self):
        pt = np.asarray(self.per_term, dtype=float)
        pt.setflags(write=False)
        object.__setattr__(self, "per_term", pt)
        for arr in self.per_site.values():
            arr.setflags(write=False)


class FormationKind(enum.Enum):
    INSTANTANEOUS = "instant"
    STAGED = "staged"


@dataclass(frozen=True)
class FormationPolicy:
    """How a conscious pulse forms after a reduction.

    Instantaneous swaps the site state for the target Gaussian in one move.
    Staged starts from the bare site and widens with time constant tau,
    spreading at most neighbor_radius sites past the occupied set per step;
    the profile keeps unit norm at every stage.
    """

    kind: FormationKind
    target_sigma: float
    tau: float = 0.0
    neighbor_radius: int = 1

    @classmethod
    def instantaneous(cls, target_sigma: float) -> "FormationPolicy":
        return cls(kind=FormationKind.INSTANTANEOUS, target_sigma=target_sigma)

    @classmethod
    def staged(cls, target_sigma: float, tau: float, neighbor_radius: int = 1) -> "FormationPolicy":
        if not tau > 0:
            raise SimulationError(f"staged formation needs tau > 0, got {tau}")
        if neighbor_radius < 1:
            raise SimulationError(f"neighbor_radius must be >= 1, got {neighbor_radius}")
        return cls(
            kind=FormationKind.STAGED,
            target_sigma=target_sigma,
            tau=tau,
            neighbor_radius=neighbor_radius,
        )


def rule4_pairs(state: SystemState, schedule: EnvelopeSchedule) -> list:
    """Configured transfers that rule 4 forbids.

    A transfer is forbidden when source and destination both hold ready
    factors belonging to the same observer; a trailing edge may never feed
    its own leading edge.
    """
    pairs = []
    for tr in schedule.transfers:
        src = state.terms[tr.src].brain
        if not src.is_ready:
            continue
        for d in tr.dsts:
            dst = state.terms[d].brain
            if dst.is_ready and dst.observer_id == src.observer_id:
                pairs.append(Rule4Pair(src=tr.src, dst=d, observer_id=src.observer_id))
    return pairs


def _site_masses(state: SystemState) -> Dict[int, np.ndarray]:
    """Unit-basis square modulus per site for each non-phantom ready term."""
    out = {}
    for n, term in enumerate(state.terms):
        if term.phantom or not term.brain.is_ready:
            continue
        amps = term.brain.site_amplitudes(state.grid)
        out[n] = np.abs(term.coefficient) ** 2 * np.abs(amps) ** 2
    return out


def _advance_formation(pulse: Pulse, dt: float) -> Pulse:
    prog = pulse.forming
    du = pulse.grid.spacing
    decay = math.exp(-dt / prog.tau)
    stage = 1.0 - (1.0 - pulse.formation_stage) * decay
    sigma_eff = prog.target_sigma * stage + 2.0 * du * (1.0 - stage)

    occupied = np.abs(pulse.weights) > 0
    grown = occupied.copy()
    for shift in range(1, prog.neighbor_radius + 1):
        grown[shift:] |= occupied[:-shift]
        grown[:-shift] |= occupied[shift:]

    u = pulse.grid.sites
    center = pulse.grid.coord(pulse.center_index)
    w = np.exp(-((u - center) ** 2) / (2.0 * sigma_eff**2))
    w[np.abs(u - center) > 6.0 * sigma_eff] = 0.0
    w[~grown] = 0.0
    w = w / math.sqrt(float(np.sum(w**2)) * du)
    return Pulse(
        kind=pulse.kind,
        grid=pulse.grid,
        weights=w,
        center_index=pulse.center_index,
        formation_stage=stage,
        forming=prog,
    )


def step(
    state: SystemState,
    schedule: EnvelopeSchedule,
    dt: float,
    guard: bool = True,
) -> Tuple[SystemState, CurrentReport]:
    """Advance the state by dt under a schedule; report currents.

    Raises PhantomTransfer if the schedule touches a phantom term,
    Rule4Violation when the guard is on and the schedule routes current
    between ready factors of one observer, StepTooLarge when dt exceeds
    1/100 of an active ramp window, and ScheduleStateMismatch when the
    state's coefficients do not match the schedule's prediction at the
    current time (e.g. after a reduction zeroed a scheduled term).
    """
    if not dt > 0:
        raise SimulationError(f"dt must be positive, got {dt}")
    t0, t1 = state.time, state.time + dt
    if schedule.active_in(t0, t1):
        if dt > (schedule.t_end - schedule.t_start) / MIN_RAMP_STEPS:
            raise StepTooLarge(
                f"dt {dt} exceeds 1/{MIN_RAMP_STEPS} of the ramp window "
                f"{schedule.t_end - schedule.t_start}"
            )
    for tr in schedule.transfers:
        if state.terms[tr.src].phantom or any(state.terms[d].phantom for d in tr.dsts):
            raise PhantomTransfer(f"transfer {tr.src} -> {tr.dsts} touches a phantom term")
        for d in tr.dsts:
            if not state.terms[d].brain.is_ready:
                raise Rule2Violation(f"scheduled destination term {d} is not a ready factor")
    if guard:
        pairs = rule4_pairs(state, schedule)
        if pairs:
            raise Rule4Violation(pairs)

    predicted_now = schedule.predicted_coefficients(t0)
    for idx, expect in predicted_now.items():
        have = state.terms[idx].coefficient
        if abs(have - expect) > COEFF_MATCH_TOL * max(1.0, abs(expect)):
            raise ScheduleStateMismatch(
                f"term {idx} coefficient {have} does not match schedule value {expect} at t={t0}"
            )

    masses_before = _site_masses(state)
    sq_before = np.array([t.square_modulus() for t in state.terms])

    predicted_next = schedule.predicted_coefficients(t1)
    advanced_pulses: Dict[int, Pulse] = {}
    new_terms = []
    for n, term in enumerate(state.terms):
        coeff = predicted_next.get(n, term.coefficient)
        brain = term.brain
        if (
            not term.phantom
            and isinstance(brain, PulseFactor)
            and brain.pulse.forming is not None
        ):
            key = id(brain.pulse)
            if key not in advanced_pulses:
                advanced_pulses[key] = _advance_formation(brain.pulse, dt)
            brain = PulseFactor(pulse=advanced_pulses[key], observer_id=brain.observer_id)
        if term.phantom:
            new_terms.append(term)
        else:
            new_terms.append(
                Term(
                    apparatus_label=term.apparatus_label,
                    coefficient=coeff,
                    brain=brain,
                    phantom=False,
                )
            )
    new_state = state.with_terms(new_terms, time=t1)

    masses_after = _site_masses(new_state)
    sq_after = np.array([t.square_modulus() for t in new_state.terms])
    per_term = (sq_after - sq_before) / dt
    per_site = {}
    for n in masses_after:
        before = masses_before.get(n, np.zeros(state.grid.n_points))
        per_site[n] = (masses_after[n] - before) / dt
    total_positive = float(np.sum(per_term[per_term > 0.0]))
    report = CurrentReport(
        per_term=per_term, per_site=per_site, total_positive=total_positive, dt=dt
    )
    return new_state, report


def form_pulse(state: SystemState, chosen: int, policy: FormationPolicy) -> SystemState:
    """Convert the post-reduction conscious site state into a conscious pulse.

    Requires every term with nonzero coefficient to share one conscious
    SingleState at ``chosen`` (the state reduce() returns); raises
    NotPostReduction otherwise. The new pulse factor is shared across the
    surviving apparatus labels and keeps unit norm at every stage.
    """
    from .errors import NotPostReduction

    if not 0 <= chosen < state.grid.n_points:
        raise IndexOutOfRange(f"chosen site {chosen} outside grid")
    survivors = [n for n, t in enumerate(state.terms) if t.coefficient != 0]
    if not survivors:
        raise NotPostReduction("no surviving terms to form a pulse from")
    for n in survivors:
        b = state.terms[n].brain
        ok = (
            isinstance(b, SingleState)
            and b.kind is PulseKind.CONSCIOUS
            and b.index == chosen
        )
        if not ok:
            raise NotPostReduction(
                f"term {n} does not hold a conscious site state at {chosen}"
            )
    observer = state.terms[survivors[0]].brain.observer_id
    if policy.kind is FormationKind.INSTANTANEOUS:
        pulse = make_gaussian_pulse(
            state.grid, state.grid.coord(chosen), policy.target_sigma, PulseKind.CONSCIOUS
        )
    else:
        seed = delta_pulse(state.grid, chosen, PulseKind.CONSCIOUS)
        pulse = Pulse(
            kind=PulseKind.CONSCIOUS,
            grid=state.grid,
            weights=seed.weights,
            center_index=chosen,
            formation_stage=0.0,
            forming=FormationProgress(
                target_sigma=policy.target_sigma,
                tau=policy.tau,
                neighbor_radius=policy.neighbor_radius,
                t_sc=state.time,
            ),
        )
    factor = PulseFactor(pulse=pulse, observer_id=observer)
    new_terms = []
    for n, term in enumerate(state.terms):
        if n in survivors:
            new_terms.append(
                Term(
                    apparatus_label=term.apparatus_label,
                    coefficient=term.coefficient,
                    brain=factor,
                    phantom=term.phantom,
                )
            )
        else:
            new_terms.append(term)
    return state.with_terms(new_terms)


def _resample_shifted(weights: np.ndarray, grid: BrainGrid, shift: float) -> np.ndarray:
    u = grid.sites
    re = np.interp(u - shift, u, weights.real, left=0.0, right=0.0)
    im = np.interp(u - shift, u, weights.imag, left=0.0, right=0.0)
    return re + 1j * im


def drift_pulse(
    state: SystemState,
    velocity: float,
    dt: float,
    shadow_ready: bool = False,
    shed_rate: float = 0.0,
) -> SystemState:
    """Move the conscious pulse by velocity*dt; optionally feed a ready shadow.

    The conscious profile is resampled on the grid by linear interpolation
    and renormalized. With ``shadow_ready`` the conscious term sheds square
    modulus dM = |a|^2 (1 - exp(-shed_rate |v| dt / du)) into the unique
    ready-pulse term, distributed over non-phantom shadow sites proportional
    to the conscious profile; shadow sites never feed each other (rule 4).
    A shadow site that has been fed and then receives less than 1e-12
    current for a full step is flagged phantom and frozen.

    velocity = 0 returns the state unchanged.
    """
    if not dt > 0:
        raise SimulationError(f"dt must be positive, got {dt}")
    if velocity == 0.0:
        return state

    cons_idx = [
        n
        for n, t in enumerate(state.terms)
        if isinstance(t.brain, PulseFactor) and t.brain.pulse.kind is PulseKind.CONSCIOUS
    ]
    if len(cons_idx) != 1:
        raise SimulationError(f"drift needs exactly one conscious pulse term, found {len(cons_idx)}")
    ci = cons_idx[0]
    cons_term = state.terms[ci]
    if cons_term.brain.pulse.forming is not None:
        raise SimulationError("drift requires a fully formed conscious pulse")

    grid = state.grid
    du = grid.spacing
    shifted = _resample_shifted(cons_term.brain.pulse.weights, grid, velocity * dt)
    nrm = math.sqrt(float(np.sum(np.abs(shifted) ** 2)) * du)
    if nrm == 0.0:
        raise SimulationError("conscious pulse drifted entirely off the grid")
    shifted = shifted / nrm
    new_cons_pulse = Pulse(
        kind=PulseKind.CONSCIOUS,
        grid=grid,
        weights=shifted,
        center_index=int(np.argmax(np.abs(shifted))),
    )

    new_terms = list(state.terms)
    new_coeff = cons_term.coefficient

    if shadow_ready and shed_rate > 0.0:
        shadow_idx = [
            n
            for n, t in enumerate(state.terms)
            if n != ci
            and not t.phantom
            and isinstance(t.brain, PulseFactor)
            and t.brain.pulse.kind is PulseKind.READY
        ]
        if len(shadow_idx) != 1:
            raise SimulationError(
                f"shadow drift needs exactly one ready-pulse term, found {len(shadow_idx)}"
            )
        si = shadow_idx[0]
        shadow_term = state.terms[si]
        shadow_pulse = shadow_term.brain.pulse

        phantom = (
            shadow_pulse.phantom_sites
            if shadow_pulse.phantom_sites is not None
            else np.zeros(grid.n_points, dtype=bool)
        )
        fed = (
            shadow_pulse.fed_sites
            if shadow_pulse.fed_sites is not None
            else np.zeros(grid.n_points, dtype=bool)
        )

        decay = math.exp(-shed_rate * abs(velocity) * dt / du)
        a_sq = abs(cons_term.coefficient) ** 2
        shed = a_sq * (1.0 - decay)

        share = np.abs(new_cons_pulse.site_amplitudes()) ** 2
        share[phantom] = 0.0
        share_total = float(share.sum())
        incoming = np.zeros(grid.n_points)
        shadow_masses = (
            np.abs(shadow_term.coefficient) ** 2
            * np.abs(shadow_pulse.site_amplitudes()) ** 2
        )
        if share_total > 0.0:
            share = share / share_total
            incoming = shed * share / dt
            shadow_masses = shadow_masses + shed * share
            new_coeff = cons_term.coefficient * math.sqrt(decay)

        newly_phantom = fed & ~phantom & (incoming < PHANTOM_CURRENT_FLOOR)
        fed = fed | (incoming >= PHANTOM_CURRENT_FLOOR)
        phantom = phantom | newly_phantom

        total_mass = float(shadow_masses.sum())
        if total_mass > 0.0:
            amps = np.sqrt(shadow_masses / total_mass)
            new_shadow_pulse = Pulse(
                kind=PulseKind.READY,
                grid=grid,
                weights=amps / math.sqrt(du),
                center_index=int(np.argmax(amps)),
                phantom_sites=phantom,
                fed_sites=fed,
            )
            shadow_coeff = math.sqrt(total_mass)
        else:
            new_shadow_pulse = Pulse(
                kind=PulseKind.READY,
                grid=grid,
                weights=shadow_pulse.weights,
                center_index=shadow_pulse.center_index,
                phantom_sites=phantom,
                fed_sites=fed,
            )
            shadow_coeff = shadow_term.coefficient
        new_terms[si] = Term(
            apparatus_label=shadow_term.apparatus_label,
            coefficient=shadow_coeff,
            brain=PulseFactor(pulse=new_shadow_pulse, observer_id=shadow_term.brain.observer_id),
            phantom=shadow_term.phantom,
        )

    new_terms[ci] = Term(
        apparatus_label=cons_term.apparatus_label,
        coefficient=new_coeff,
        brain=PulseFactor(pulse=new_cons_pulse, observer_id=cons_term.brain.observer_id),
        phantom=cons_term.phantom,
    )
    return state.with_terms(new_terms, time=state.time + dt)


def relative_intensity(pulse: Pulse, lo: int, hi: int) -> float:
    """Fraction of the pulse's intensity in sites [lo, hi] inclusive.

    Intensity element is |F(u)|^2 du; the full range gives 1 within 1e-9.
    Raises IndexOutOfRange for an empty or out-of-grid range.
    """
    if lo > hi:
        raise IndexOutOfRange(f"empty site range [{lo}, {hi}]")
    if lo < 0 or hi >= pulse.grid.n_points:
        raise IndexOutOfRange(
            f"site range [{lo}, {hi}] outside grid of {pulse.grid.n_points} sites"
        )
    w = pulse.weights[lo : hi + 1]
    return float(np.sum(np.abs(w) ** 2) * pulse.grid.spacing)
