"""Scenario construction and trajectory drivers.

Each runner builds the initial superposition and envelope schedule for one
measurement story, evolves it, applies the rule-1 stochastic choice, and
returns a result whose summary is a pure function of (config, seed).

Two drivers share the same probability law. ``simulate_trajectory`` steps a
single trial at full fidelity (reduce, form_pulse, turn-off and disengage
phases all exercised on real states). ``run_batch`` exploits the fact that
the pre-hit flow is deterministic: it steps the backbone once, then places
every trial's hit by drawing one uniform against the cumulative hit budget
C(t) = (transferred square modulus)/s and a second against the per-site
positive-current distribution of the hit step. Budget placement makes the
unconditional probability of a hit in step i exactly p_i = J+ dt / s, so a
completed transfer is a certain hit and the total equals the closed form.

A residual budget below 1e-12 at the end of a completed transfer counts as
certain (float telescoping can leave ~1e-15 behind).
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import analysis
from .config import ScenarioConfig
from .dynamics import (
    EnvelopeSchedule,
    FormationPolicy,
    drift_pulse,
    form_pulse,
    rule4_pairs,
    step,
)
from .errors import (
    HitRateTooHigh,
    InvariantBreach,
    Rule4Violation,
    SimulationError,
)
from .reduction import (
    MAX_STEP_HIT_PROBABILITY,
    ReductionEvent,
    RngStream,
    hit_probability,
    reduce,
)
from .state import (
    BrainGrid,
    DisengagedX,
    PulseFactor,
    PulseKind,
    SingleState,
    SystemState,
    Term,
    make_gaussian_pulse,
    total_square_modulus,
)

__all__ = [
    "ScenarioResult",
    "TrajectoryLog",
    "Backbone",
    "build_initial",
    "build_backbone",
    "simulate_trajectory",
    "run_batch",
    "run_interaction",
    "run_unresolvable_observation",
    "run_turn_off",
    "run_disengage",
    "run_pulse_drift",
    "run_fade_in",
    "run_scenario",
]

BUDGET_RESIDUAL_TOL = 1e-12
CONSERVATION_TOL = 1e-9
NORM_TOL = 1e-9
PHANTOM_FREEZE_TOL = 1e-12


@dataclass
class TrajectoryLog:
    """Per-step record of one trajectory."""

    times: np.ndarray
    sq_terms: np.ndarray
    currents: np.ndarray
    total_sq: np.ndarray
    budget: np.ndarray
    labels: Tuple[int, ...]

    def rows(self):
        for i in range(len(self.times)):
            yield (self.times[i], *self.sq_terms[i], *self.currents[i], self.total_sq[i], self.budget[i])

    def header(self) -> List[str]:
        cols = ["t"]
        cols += [f"sq_modulus_term{n}_label{l}" for n, l in enumerate(self.labels)]
        cols += [f"current_term{n}" for n in range(len(self.labels))]
        cols += ["total_square_modulus", "cumulative_hit_budget"]
        return cols


@dataclass
class ScenarioResult:
    """What a runner hands back: config echo, events, summary, logs."""

    name: str
    config: ScenarioConfig
    summary: Dict
    events: List[ReductionEvent] = field(default_factory=list)
    trajectory: Optional[TrajectoryLog] = None


# ---------------------------------------------------------------------------
# initial states
# ---------------------------------------------------------------------------


def _grid_of(cfg: ScenarioConfig) -> BrainGrid:
    g = cfg.data["grid"]
    return BrainGrid(n_points=g["n_points"], spacing=g["spacing"], origin=g["origin"])


def _formation_policy(cfg: ScenarioConfig) -> FormationPolicy:
    f = cfg.data["formation"]
    if f["mode"] == "staged":
        return FormationPolicy.staged(
            target_sigma=f["target_sigma"], tau=f["tau"], neighbor_radius=f["neighbor_radius"]
        )
    return FormationPolicy.instantaneous(target_sigma=f["target_sigma"])


def build_initial(cfg: ScenarioConfig) -> Tuple[SystemState, Optional[EnvelopeSchedule]]:
    """Initial superposition and schedule for a scenario config."""
    grid = _grid_of(cfg)
    name = cfg.name
    env = cfg.data.get("envelope") or {}
    t0 = env.get("t_start", 0.0)

    if name in ("interaction", "fade_in"):
        p = cfg.data["pulses"]
        a = cfg.data["source"]["amplitude"]
        conscious = make_gaussian_pulse(
            grid, p["conscious_center"], p["conscious_sigma"], PulseKind.CONSCIOUS
        )
        ready = make_gaussian_pulse(grid, p["ready_center"], p["ready_sigma"], PulseKind.READY)
        terms = (
            Term(apparatus_label=1, coefficient=complex(a), brain=PulseFactor(conscious)),
            Term(apparatus_label=2, coefficient=0j, brain=PulseFactor(ready)),
        )
        state = SystemState(terms=terms, s=a * a, time=t0, grid=grid)
        schedule = _ramp_from(cfg, state, [(0, (1,))])
        return state, schedule

    if name in ("unresolvable_observation", "turn_off", "disengage"):
        p = cfg.data["pulses"]
        a1 = cfg.data["source"]["amplitude1"]
        a2 = cfg.data["source"]["amplitude2"]
        arrangement = cfg.data["variant"]["arrangement"]
        if arrangement == "single_state":
            x_profile = np.zeros(grid.n_points)
            mid = grid.nearest_index(0.5 * (p["center1"] + p["center2"]))
            x_profile[mid] = 1.0 / math.sqrt(grid.spacing)
            x_factor = DisengagedX(grid=grid, weights=x_profile)
            ready1 = SingleState(kind=PulseKind.READY, index=grid.nearest_index(p["center1"]))
            ready2 = SingleState(kind=PulseKind.READY, index=grid.nearest_index(p["center2"]))
            brains = (ready1, ready2)
        else:
            flat = np.full(grid.n_points, 1.0 / math.sqrt(grid.n_points * grid.spacing))
            x_factor = DisengagedX(grid=grid, weights=flat)
            brains = (
                PulseFactor(make_gaussian_pulse(grid, p["center1"], p["sigma1"], PulseKind.READY)),
                PulseFactor(make_gaussian_pulse(grid, p["center2"], p["sigma2"], PulseKind.READY)),
            )
        terms = (
            Term(apparatus_label=1, coefficient=complex(a1), brain=x_factor),
            Term(apparatus_label=2, coefficient=complex(a2), brain=x_factor),
            Term(apparatus_label=1, coefficient=0j, brain=brains[0]),
            Term(apparatus_label=2, coefficient=0j, brain=brains[1]),
        )
        state = SystemState(terms=terms, s=a1 * a1 + a2 * a2, time=t0, grid=grid)
        schedule = _ramp_from(cfg, state, [(0, (2,)), (1, (3,))])
        return state, schedule

    if name == "pulse_drift":
        p = cfg.data["pulses"]
        conscious = make_gaussian_pulse(grid, p["center"], p["sigma"], PulseKind.CONSCIOUS)
        shadow_seed = conscious.with_kind(PulseKind.READY)
        terms = (
            Term(apparatus_label=1, coefficient=1.0 + 0j, brain=PulseFactor(conscious)),
            Term(apparatus_label=2, coefficient=0j, brain=PulseFactor(shadow_seed)),
        )
        state = SystemState(terms=terms, s=1.0, time=0.0, grid=grid)
        return state, None

    raise SimulationError(f"no initial-state builder for scenario {name!r}")


def _ramp_from(cfg: ScenarioConfig, state: SystemState, transfers) -> EnvelopeSchedule:
    env = cfg.data["envelope"]
    maker = EnvelopeSchedule.trig if env["kind"] == "trig" else EnvelopeSchedule.linear
    return maker(
        state,
        transfers,
        t_start=env["t_start"],
        t_end=env["t_end"],
        fraction=env["fraction"],
    )


# ---------------------------------------------------------------------------
# backbone: the deterministic pre-hit pass
# ---------------------------------------------------------------------------


@dataclass
class Backbone:
    """Stepped pre-hit flow shared by all trials of one config."""

    state0: SystemState
    schedule: EnvelopeSchedule
    final_state: SystemState
    times: np.ndarray
    coeffs: np.ndarray
    sq_terms: np.ndarray
    total_sq: np.ndarray
    step_mass: np.ndarray
    cum_budget: np.ndarray
    site_mass: np.ndarray
    ready_ids: Tuple[int, ...]
    ready_amps: np.ndarray
    dst_factor: np.ndarray
    audits: Dict[str, float]

    @property
    def complete(self) -> bool:
        return 1.0 - float(self.cum_budget[-1]) <= BUDGET_RESIDUAL_TOL


def _scenario_step_counts(cfg: ScenarioConfig) -> Tuple[int, int]:
    env = cfg.data["envelope"]
    dt = cfg.dt
    ramp_steps = int(round((env["t_end"] - env["t_start"]) / dt))
    return ramp_steps, cfg.data["scenario"]["tail_steps"]


def build_backbone(cfg: ScenarioConfig) -> Backbone:
    """Step the deterministic flow once, recording currents and budget."""
    state0, schedule = build_initial(cfg)
    if schedule is None:
        raise SimulationError(f"scenario {cfg.name!r} has no ramp backbone")
    ramp_steps, tail_steps = _scenario_step_counts(cfg)
    n_steps = ramp_steps + tail_steps
    n_terms = len(state0.terms)
    grid = state0.grid

    ready_ids = tuple(
        n for n, t in enumerate(state0.terms) if t.brain.is_ready and not t.phantom
    )
    ready_amps = np.vstack([
        np.abs(state0.terms[n].brain.site_amplitudes(grid)) for n in ready_ids
    ])

    times = np.empty(n_steps + 1)
    coeffs = np.empty((n_steps + 1, n_terms), dtype=np.complex128)
    sq_terms = np.empty((n_steps + 1, n_terms))
    total = np.empty(n_steps + 1)
    step_mass = np.empty(n_steps)
    site_mass = np.empty((n_steps, len(ready_ids), grid.n_points))
    dst_factor = np.empty(n_steps + 1)

    state = state0
    times[0] = state.time
    coeffs[0] = [t.coefficient for t in state.terms]
    sq_terms[0] = [t.square_modulus() for t in state.terms]
    total[0] = total_square_modulus(state)
    dst_factor[0] = schedule.envelope_factors(state.time)[1]

    max_norm_err = 0.0
    max_step_p = 0.0
    s = state.s
    dt = cfg.dt
    for i in range(n_steps):
        state, report = step(state, schedule, dt, guard=cfg.guard)
        p = hit_probability(report, s, dt)
        if p >= MAX_STEP_HIT_PROBABILITY:
            raise HitRateTooHigh(
                f"per-step hit probability {p:.4f} >= {MAX_STEP_HIT_PROBABILITY}; reduce dt"
            )
        step_mass[i] = p
        for r, n in enumerate(ready_ids):
            site_mass[i, r] = np.clip(report.per_site[n], 0.0, None) * dt / s
        times[i + 1] = state.time
        coeffs[i + 1] = [t.coefficient for t in state.terms]
        sq_terms[i + 1] = [t.square_modulus() for t in state.terms]
        total[i + 1] = total_square_modulus(state)
        dst_factor[i + 1] = schedule.envelope_factors(state.time)[1]
        for t in state.terms:
            if isinstance(t.brain, PulseFactor):
                max_norm_err = max(max_norm_err, abs(t.brain.norm_sq() - 1.0))
        max_step_p = max(max_step_p, p)

    elapsed = times[-1] - times[0]
    cons_drift = float(np.max(np.abs(total - total[0])))
    if cons_drift > CONSERVATION_TOL * max(1.0, elapsed):
        raise InvariantBreach(
            "norm-conservation", f"total square modulus drifted by {cons_drift:.3e}"
        )
    if max_norm_err > NORM_TOL:
        raise InvariantBreach("pulse-normalization", f"pulse norm error {max_norm_err:.3e}")

    return Backbone(
        state0=state0,
        schedule=schedule,
        final_state=state,
        times=times,
        coeffs=coeffs,
        sq_terms=sq_terms,
        total_sq=total,
        step_mass=step_mass,
        cum_budget=np.cumsum(step_mass),
        site_mass=site_mass,
        ready_ids=ready_ids,
        ready_amps=ready_amps,
        dst_factor=dst_factor,
        audits={
            "max_conservation_drift": cons_drift,
            "max_pulse_norm_error": max_norm_err,
            "max_step_hit_probability": max_step_p,
        },
    )


# ---------------------------------------------------------------------------
# batch trials
# ---------------------------------------------------------------------------


@dataclass
class EventBatch:
    """Vectorized reduction events for one batch run."""

    hit: np.ndarray
    step_index: np.ndarray
    t_sc: np.ndarray
    term_hit: np.ndarray
    u_sc: np.ndarray
    pre_norm: np.ndarray
    survivor_coeffs: np.ndarray
    ramp_progress: np.ndarray
    draws: np.ndarray
    labels: Tuple[int, ...]

    @property
    def n_hits(self) -> int:
        return int(self.hit.sum())

    def multiplicity(self) -> np.ndarray:
        return (np.abs(self.survivor_coeffs[self.hit]) > 0).sum(axis=1)

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (
            self.hit,
            self.step_index,
            self.t_sc,
            self.term_hit,
            self.u_sc,
            self.survivor_coeffs,
            self.draws,
        ):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def run_batch(cfg: ScenarioConfig, backbone: Optional[Backbone] = None) -> Tuple[Backbone, EventBatch]:
    """Place every trial's hit against the backbone's budget and currents."""
    bb = backbone if backbone is not None else build_backbone(cfg)
    n_trials = cfg.trials
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.seed)))
    draws = rng.random((n_trials, 3))

    C = bb.cum_budget
    total_budget = float(C[-1])
    u1 = draws[:, 0]
    step_idx = np.searchsorted(C, u1, side="right")
    hit = step_idx < len(C)
    if bb.complete and not hit.all():
        last_active = int(np.flatnonzero(bb.step_mass > 0)[-1])
        step_idx = np.where(hit, step_idx, last_active)
        hit = np.ones_like(hit)

    n = n_trials
    u_sc = np.zeros(n, dtype=np.int64)
    term_hit = np.full(n, -1, dtype=np.int64)
    biased = cfg.data["debug"]["bias_site_selection"]

    hit_ids = np.flatnonzero(hit)
    order = np.argsort(step_idx[hit_ids], kind="stable")
    hit_ids = hit_ids[order]
    bounds = np.searchsorted(step_idx[hit_ids], np.arange(len(C) + 1))
    n_ready, n_sites = bb.site_mass.shape[1], bb.site_mass.shape[2]
    for i in np.unique(step_idx[hit_ids]):
        grp = hit_ids[bounds[i] : bounds[i + 1]]
        weights = bb.site_mass[i].ravel()
        if biased:
            weights = weights**2
        tot = weights.sum()
        if tot <= 0.0:
            raise InvariantBreach("site-selection", f"no positive site current at step {i}")
        cdf = np.cumsum(weights)
        flat = np.searchsorted(cdf, draws[grp, 1] * tot, side="right")
        flat = np.minimum(flat, weights.size - 1)
        rows, sites = np.divmod(flat, n_sites)
        u_sc[grp] = sites
        term_hit[grp] = np.asarray(bb.ready_ids)[rows]

    t_sc = np.where(hit, bb.times[np.minimum(step_idx + 1, len(bb.times) - 1)], np.nan)
    pre_norm = np.where(hit, bb.total_sq[np.minimum(step_idx + 1, len(bb.times) - 1)], np.nan)

    # survivor coefficients: a_i(t_sc) * w_i(u_sc) for each ready term
    coeff_rows = bb.coeffs[np.minimum(step_idx + 1, len(bb.times) - 1)][:, list(bb.ready_ids)]
    amp_at_site = bb.ready_amps[:, u_sc].T
    survivors = coeff_rows * amp_at_site
    survivors[~hit] = 0.0

    dst_final = bb.dst_factor[-1]
    progress = np.where(
        hit, bb.dst_factor[np.minimum(step_idx + 1, len(bb.times) - 1)] / dst_final, np.nan
    )

    batch = EventBatch(
        hit=hit,
        step_index=step_idx,
        t_sc=t_sc,
        term_hit=term_hit,
        u_sc=u_sc,
        pre_norm=pre_norm,
        survivor_coeffs=survivors,
        ramp_progress=progress,
        draws=draws,
        labels=tuple(bb.state0.terms[nn].apparatus_label for nn in bb.ready_ids),
    )
    post_sq = np.abs(survivors[hit]) ** 2
    if np.any(post_sq.sum(axis=1) > pre_norm[hit] + 1e-12):
        raise InvariantBreach("reduction-bound", "post square modulus exceeded pre-hit norm")
    return bb, batch


# ---------------------------------------------------------------------------
# single full-fidelity trajectory
# ---------------------------------------------------------------------------


@dataclass
class TrajectoryOutcome:
    state: SystemState
    log: TrajectoryLog
    event: Optional[ReductionEvent]
    extras: Dict


def _select_site(state, report, u2: float, biased: bool = False):
    from .reduction import _site_selection_weights

    term_ids, weights = _site_selection_weights(state, report)
    if biased:
        weights = weights**2
    flat = weights.ravel()
    tot = float(flat.sum())
    if tot <= 0.0:
        return None
    cdf = np.cumsum(flat)
    k = int(np.searchsorted(cdf, u2 * tot, side="right"))
    k = min(k, flat.size - 1)
    row, site = divmod(k, state.grid.n_points)
    return term_ids[row], int(site)


def simulate_trajectory(cfg: ScenarioConfig, trial: int = 0) -> TrajectoryOutcome:
    """Step one trial end to end, with reduction and formation on real states.

    The hit step is placed by drawing one uniform against the running budget
    (identical law to the batch driver); a second uniform picks the site.
    Scenario phases (formation, turn-off, disengage) run on the stepped
    states themselves.
    """
    if cfg.name == "pulse_drift":
        raise SimulationError("pulse_drift uses run_pulse_drift, not the ramp driver")
    state, schedule = build_initial(cfg)
    policy = _formation_policy(cfg)
    rng = RngStream(cfg.seed, trial)
    u1 = rng.uniform()
    dt = cfg.dt
    s = state.s
    grid = state.grid

    ramp_steps, tail_steps = _scenario_step_counts(cfg)
    n_steps = ramp_steps + tail_steps
    extra_steps = 0
    t_off = cfg.get("turn_off.t_off")
    t_dis = cfg.get("disengage.t_dis")
    if cfg.name == "turn_off":
        extra_steps = int(round((t_off - cfg.data["envelope"]["t_end"]) / dt)) + 10
    elif cfg.name == "disengage":
        extra_steps = (
            int(round((t_dis - cfg.data["envelope"]["t_end"]) / dt))
            + cfg.data["disengage"]["hold_steps"]
        )
    elif cfg.name == "fade_in":
        extra_steps = cfg.data["formation"]["settle_steps"]
    n_steps += extra_steps

    hold = EnvelopeSchedule.hold()
    active = schedule
    budget = 0.0
    event: Optional[ReductionEvent] = None
    extras: Dict = {
        "occupied_counts": [],
        "formation_stages": [],
        "formation_norm_err": 0.0,
        "turned_off": False,
        "disengaged": False,
    }

    times = [state.time]
    sq_rows = [[t.square_modulus() for t in state.terms]]
    cur_rows = [[0.0] * len(state.terms)]
    tot_rows = [total_square_modulus(state)]
    budget_rows = [0.0]

    for i in range(n_steps):
        state, report = step(state, active, dt, guard=cfg.guard)
        if event is None:
            p = hit_probability(report, s, dt)
            if p >= MAX_STEP_HIT_PROBABILITY:
                raise HitRateTooHigh(f"per-step hit probability {p:.4f}; reduce dt")
            new_budget = budget + p
            forced = 1.0 - new_budget <= BUDGET_RESIDUAL_TOL and p > 0.0
            if (budget <= u1 < new_budget) or (forced and u1 >= new_budget):
                u2 = rng.uniform()
                progress = (
                    active.envelope_factors(state.time)[1] / schedule.envelope_factors(1e30)[1]
                )
                choice = _select_site(state, report, u2, cfg.data["debug"]["bias_site_selection"])
                if choice is None:
                    raise InvariantBreach("site-selection", "hit fired with no positive site current")
                term_idx, site = choice
                pre = total_square_modulus(state)
                state = reduce(state, term_idx, site)
                post = {
                    t.apparatus_label: t.coefficient
                    for t in state.terms
                    if t.coefficient != 0
                }
                event = ReductionEvent(
                    t_sc=state.time,
                    term_hit=term_idx,
                    u_sc=site,
                    pre_norm=pre,
                    post_coefficients=post,
                    rng_draws=(u1, u2),
                    ramp_progress=progress,
                )
                if total_square_modulus(state) > pre + 1e-12:
                    raise InvariantBreach("reduction-bound", "post norm exceeded pre norm")
                state = form_pulse(state, site, policy)
                active = hold
                for t in state.terms:
                    if isinstance(t.brain, PulseFactor) and t.coefficient != 0:
                        pl = t.brain.pulse
                        if pl.kind is PulseKind.CONSCIOUS:
                            extras["occupied_counts"].append(int(np.count_nonzero(pl.weights)))
                            extras["formation_stages"].append(pl.formation_stage)
                        break
            budget = new_budget
        else:
            # post-hit phases
            if cfg.name == "turn_off" and not extras["turned_off"] and state.time >= t_off:
                state = _zero_label(state, label=1)
                extras["turned_off"] = True
                extras["post_off_coefficients"] = {
                    t.apparatus_label: t.coefficient for t in state.terms if t.coefficient != 0
                }
            if cfg.name == "disengage" and not extras["disengaged"] and state.time >= t_dis:
                before = tuple(t.coefficient for t in state.terms)
                state = _swap_disengaged(state)
                after = tuple(t.coefficient for t in state.terms)
                extras["disengaged"] = True
                extras["swap_identical"] = before == after
            for t in state.terms:
                if isinstance(t.brain, PulseFactor) and t.coefficient != 0:
                    pl = t.brain.pulse
                    extras["formation_norm_err"] = max(
                        extras["formation_norm_err"], abs(pl.norm_sq() - 1.0)
                    )
                    if pl.kind is PulseKind.CONSCIOUS:
                        extras["occupied_counts"].append(int(np.count_nonzero(pl.weights)))
                        extras["formation_stages"].append(pl.formation_stage)
                    break

        times.append(state.time)
        sq_rows.append([t.square_modulus() for t in state.terms])
        cur_rows.append(list(report.per_term))
        tot_rows.append(total_square_modulus(state))
        budget_rows.append(budget)

    if cfg.name == "turn_off" and event is not None:
        labels = {}
        for lbl, c in event.post_coefficients.items():
            labels[lbl] = abs(c) ** 2
        w1, w2 = labels.get(1, 0.0), labels.get(2, 0.0)
        u3 = rng.uniform()
        extras["spot_remains"] = bool(u3 < (w2 / (w1 + w2))) if (w1 + w2) > 0 else False
        extras["spot_draw"] = u3

    log = TrajectoryLog(
        times=np.array(times),
        sq_terms=np.array(sq_rows),
        currents=np.array(cur_rows),
        total_sq=np.array(tot_rows),
        budget=np.array(budget_rows),
        labels=tuple(t.apparatus_label for t in state.terms),
    )
    return TrajectoryOutcome(state=state, log=log, event=event, extras=extras)


def _zero_label(state: SystemState, label: int) -> SystemState:
    terms = [
        Term(t.apparatus_label, 0j, t.brain, t.phantom)
        if t.apparatus_label == label
        else t
        for t in state.terms
    ]
    return state.with_terms(terms)


def _swap_disengaged(state: SystemState) -> SystemState:
    """Replace the shared conscious pulse factor with a disengaged one."""
    terms = []
    for t in state.terms:
        if (
            t.coefficient != 0
            and isinstance(t.brain, PulseFactor)
            and t.brain.pulse.kind is PulseKind.CONSCIOUS
        ):
            x = DisengagedX(
                grid=t.brain.pulse.grid,
                weights=t.brain.pulse.weights,
                observer_id=t.brain.observer_id,
            )
            terms.append(Term(t.apparatus_label, t.coefficient, x, t.phantom))
        else:
            terms.append(t)
    return state.with_terms(terms)


# ---------------------------------------------------------------------------
# scenario runners
# ---------------------------------------------------------------------------


def run_interaction(cfg: ScenarioConfig) -> ScenarioResult:
    """Conscious source pulse feeding one ready pulse; rule-1 hit statistics.

    Closed form: P(hit) = |a_2(end)|^2 / s. The summary carries the
    probability report, the hit-site histogram against |F_2|^2 du, and the
    backbone audits.
    """
    bb, batch = run_batch(cfg)
    ready = bb.ready_ids[0]
    a2_final_sq = float(np.abs(bb.coeffs[-1, ready]) ** 2)
    closed = analysis.closed_form_p_hit(a2_final_sq, bb.state0.s)
    report = analysis.compare(batch.hit, closed)
    # 100 is enough for a valid pooled chi-square; acceptance-grade runs
    # assert >= 10_000 events on top of this.
    hist = analysis.hit_histogram(
        batch.u_sc[batch.hit],
        expected_profile=bb.ready_amps[0] ** 2,
        n_sites=bb.state0.grid.n_points,
        min_events=100,
    )
    summary = {
        "scenario": cfg.name,
        "n_trials": cfg.trials,
        "closed_form_p_hit": closed,
        "empirical_p_hit": report.empirical,
        "z_score": report.z_score,
        "probability_pass": report.passed,
        "chi2": hist.chi2,
        "chi2_dof": hist.dof,
        "chi2_p_value": hist.p_value,
        "chi2_events": hist.n_events,
        "events_digest": batch.digest(),
        **bb.audits,
    }
    return ScenarioResult(name=cfg.name, config=cfg, summary=summary, events=_sample_events(batch))


def run_unresolvable_observation(cfg: ScenarioConfig) -> ScenarioResult:
    """Two sources, overlapping or disjoint ready profiles, one observer.

    Every complete run reduces; survivors are all labels with weight at the
    chosen site. The summary reports multiplicity statistics, provenance
    error, and the final-vs-initial probability identity via quadrature over
    the observed sites (coefficients rescaled to envelope-final values by
    the recorded ramp progress).
    """
    bb, batch = run_batch(cfg)
    mult = batch.multiplicity()
    counts = {int(k): int(v) for k, v in zip(*np.unique(mult, return_counts=True))}

    prov_err = _provenance_error(bb, batch)
    identity = _final_identity(bb, batch)

    expected = np.zeros(bb.state0.grid.n_points)
    a_fin = bb.coeffs[-1, list(bb.ready_ids)]
    for r in range(len(bb.ready_ids)):
        expected += np.abs(a_fin[r]) ** 2 * bb.ready_amps[r] ** 2
    identity_target = float(expected.sum() / bb.state0.s)
    identity_tol = _identity_tolerance(expected / bb.state0.s, cfg.trials)
    hist = analysis.hit_histogram(
        batch.u_sc[batch.hit],
        expected_profile=expected,
        n_sites=bb.state0.grid.n_points,
        min_events=100,
    )

    summary = {
        "scenario": cfg.name,
        "arrangement": cfg.data["variant"]["arrangement"],
        "n_trials": cfg.trials,
        "all_trials_reduced": bool(batch.hit.all()),
        "multiplicity_counts": counts,
        "max_provenance_error": prov_err,
        "final_identity_estimate": identity,
        "final_identity_target": identity_target,
        "final_identity_tolerance": identity_tol,
        "final_identity_pass": bool(abs(identity - identity_target) <= identity_tol),
        "chi2_p_value": hist.p_value,
        "chi2_events": hist.n_events,
        "events_digest": batch.digest(),
        **bb.audits,
    }
    return ScenarioResult(name=cfg.name, config=cfg, summary=summary, events=_sample_events(batch))


def run_turn_off(cfg: ScenarioConfig) -> ScenarioResult:
    """Observation followed by switching the first source off.

    Per trial the spot survives with Born weight |c_2|^2 / (|c_1|^2+|c_2|^2)
    at the chosen site; aggregated this reproduces P_2 = |a_2|^2 / s for
    overlapping and disjoint profiles alike.
    """
    bb, batch = run_batch(cfg)
    w = np.abs(batch.survivor_coeffs[batch.hit]) ** 2
    label2_col = batch.labels.index(2)
    denom = w.sum(axis=1)
    born = np.where(denom > 0, w[:, label2_col] / np.where(denom > 0, denom, 1.0), 0.0)
    spot = batch.draws[batch.hit, 2] < born

    a2_sq = float(np.abs(bb.coeffs[-1, bb.ready_ids[label2_col]]) ** 2)
    closed = analysis.closed_form_p2_after_off(a2_sq, bb.state0.s)
    report = analysis.compare(spot, closed)
    summary = {
        "scenario": cfg.name,
        "arrangement": cfg.data["variant"]["arrangement"],
        "n_trials": cfg.trials,
        "closed_form_p2": closed,
        "empirical_p2": report.empirical,
        "std_error": report.std_error,
        "z_score": report.z_score,
        "probability_pass": report.passed,
        "all_trials_reduced": bool(batch.hit.all()),
        "events_digest": batch.digest(),
        **bb.audits,
    }
    return ScenarioResult(name=cfg.name, config=cfg, summary=summary, events=_sample_events(batch))


def run_disengage(cfg: ScenarioConfig) -> ScenarioResult:
    """Observation, then the observer looks away at t_dis.

    The conscious pulse factor is swapped for a disengaged one; coefficients
    must be untouched to the last bit and nothing stochastic may happen
    afterwards.
    """
    out = simulate_trajectory(cfg, trial=0)
    post = out.log
    t_dis = cfg.data["disengage"]["t_dis"]
    after = post.times >= t_dis
    currents_after = post.currents[after]
    sq_after = post.sq_terms[after]
    constant = bool(np.all(sq_after == sq_after[0])) if len(sq_after) else True
    labels = {}
    if out.event is not None:
        labels = {k: abs(v) ** 2 for k, v in out.event.post_coefficients.items()}
    total_post = sum(labels.values())
    p2_eq7 = labels.get(2, 0.0) / out.state.s
    summary = {
        "scenario": cfg.name,
        "hit": out.event is not None,
        "swap_identical": out.extras.get("swap_identical", False),
        "currents_zero_after_dis": bool(np.all(currents_after == 0.0)),
        "square_moduli_constant_after_dis": constant,
        "p2_from_eq7_coefficients": p2_eq7,
        "post_norm": total_post,
        "final_factor_disengaged": any(
            isinstance(t.brain, DisengagedX) for t in out.state.terms if t.coefficient != 0
        ),
    }
    return ScenarioResult(
        name=cfg.name,
        config=cfg,
        summary=summary,
        events=[out.event] if out.event else [],
        trajectory=post,
    )


def run_pulse_drift(cfg: ScenarioConfig) -> ScenarioResult:
    """Conscious pulse drifting across the grid, shedding into a ready shadow.

    Trailing shadow sites freeze into phantoms; their amplitudes must stay
    constant to the last bit modulo renormalization rounding (audited at
    1e-12). With the guard off and an injected ready-to-ready transfer the
    violation is surfaced after the run and the run aborted.
    """
    state, _ = build_initial(cfg)
    dr = cfg.data["drift"]
    dt = cfg.dt
    n_steps = int(round(dr["duration"] / dt))
    grid = state.grid

    injected = None
    if cfg.data["debug"]["intra_ready_transfer"]:
        extra1 = Term(
            apparatus_label=3,
            coefficient=0j,
            brain=SingleState(kind=PulseKind.READY, index=1),
        )
        extra2 = Term(
            apparatus_label=4,
            coefficient=0j,
            brain=SingleState(kind=PulseKind.READY, index=2),
        )
        state = state.with_terms(tuple(state.terms) + (extra1, extra2))
        n_extra = len(state.terms)
        injected = EnvelopeSchedule.trig(
            state,
            [(n_extra - 2, (n_extra - 1,))],
            t_start=0.0,
            t_end=max(dr["duration"], 100 * dt),
        )

    tamper_step = n_steps * 3 // 5 if cfg.data["debug"]["tamper_phantom"] else -1
    frozen_amps: Dict[int, float] = {}
    max_phantom_drift = 0.0
    total0 = total_square_modulus(state)
    max_cons = 0.0
    shadow_idx = 1

    times = [state.time]
    sq_rows = [[t.square_modulus() for t in state.terms]]
    cur_rows = [[0.0] * len(state.terms)]
    tot_rows = [total0]

    for i in range(n_steps):
        if injected is not None:
            state, _report = step(state, injected, dt, guard=cfg.guard)
            state = state.with_terms(state.terms, time=state.time - dt)
        state = drift_pulse(
            state,
            velocity=dr["velocity"],
            dt=dt,
            shadow_ready=dr["shadow"],
            shed_rate=dr["shed_rate"],
        )
        shadow = state.terms[shadow_idx]
        pulse = shadow.brain.pulse
        if i == tamper_step and pulse.phantom_sites is not None and pulse.phantom_sites.any():
            masked = np.where(pulse.phantom_sites, np.abs(pulse.weights), -1.0)
            site = int(np.argmax(masked))
            w = pulse.weights.copy()
            w[site] *= 1.0 + 1e-6
            from .state import Pulse

            tampered = Pulse(
                kind=pulse.kind,
                grid=grid,
                weights=w,
                center_index=int(np.argmax(np.abs(w))),
                phantom_sites=pulse.phantom_sites,
                fed_sites=pulse.fed_sites,
            )
            terms = list(state.terms)
            terms[shadow_idx] = Term(
                shadow.apparatus_label,
                shadow.coefficient,
                PulseFactor(tampered, shadow.brain.observer_id),
                shadow.phantom,
            )
            state = state.with_terms(terms)
            shadow = state.terms[shadow_idx]
            pulse = shadow.brain.pulse
        if pulse.phantom_sites is not None:
            amps = np.abs(shadow.coefficient) * np.abs(pulse.site_amplitudes())
            for site in np.flatnonzero(pulse.phantom_sites):
                site = int(site)
                if site in frozen_amps:
                    max_phantom_drift = max(
                        max_phantom_drift, abs(amps[site] - frozen_amps[site])
                    )
                else:
                    frozen_amps[site] = float(amps[site])
        max_cons = max(max_cons, abs(total_square_modulus(state) - total0))
        sq_now = [t.square_modulus() for t in state.terms]
        cur_rows.append([(b - a) / dt for a, b in zip(sq_rows[-1], sq_now)])
        sq_rows.append(sq_now)
        times.append(state.time)
        tot_rows.append(total_square_modulus(state))

    if injected is not None:
        pairs = rule4_pairs(state, injected)
        if pairs:
            raise Rule4Violation(pairs)

    if max_phantom_drift >= PHANTOM_FREEZE_TOL:
        raise InvariantBreach(
            "phantom-freeze", f"phantom amplitude moved by {max_phantom_drift:.3e}"
        )
    elapsed = n_steps * dt
    if max_cons > CONSERVATION_TOL * max(1.0, elapsed):
        raise InvariantBreach("norm-conservation", f"drift run leaked {max_cons:.3e}")

    shadow = state.terms[shadow_idx]
    summary = {
        "scenario": cfg.name,
        "steps": n_steps,
        "traverse_sites": dr["velocity"] * dr["duration"] / grid.spacing,
        "phantom_trail_count": int(
            shadow.brain.pulse.phantom_sites.sum()
            if shadow.brain.pulse.phantom_sites is not None
            else 0
        ),
        "max_phantom_drift": max_phantom_drift,
        "max_conservation_drift": max_cons,
        "rule4_violations": 0,
        "conscious_square_modulus": state.terms[0].square_modulus(),
        "shadow_square_modulus": shadow.square_modulus(),
    }
    log = TrajectoryLog(
        times=np.array(times),
        sq_terms=np.array(sq_rows),
        currents=np.array(cur_rows),
        total_sq=np.array(tot_rows),
        budget=np.zeros(len(times)),
        labels=tuple(t.apparatus_label for t in state.terms),
    )
    return ScenarioResult(name=cfg.name, config=cfg, summary=summary, trajectory=log)


def run_fade_in(cfg: ScenarioConfig) -> ScenarioResult:
    """Interaction with staged formation: watch the pulse widen.

    Right after t_sc exactly one site is occupied; the occupied set grows by
    at most neighbor_radius sites per step; the profile keeps unit norm; and
    long after tau the width fits the target within 2 percent.
    """
    out = simulate_trajectory(cfg, trial=0)
    occ = np.array(out.extras["occupied_counts"], dtype=int)
    stages = np.array(out.extras["formation_stages"])
    radius = cfg.data["formation"]["neighbor_radius"]
    grid = _grid_of(cfg)

    final_pulse = None
    for t in out.state.terms:
        if t.coefficient != 0 and isinstance(t.brain, PulseFactor):
            final_pulse = t.brain.pulse
            break
    sigma_fit = float("nan")
    if final_pulse is not None:
        w2 = np.abs(final_pulse.weights) ** 2 * grid.spacing
        mu = float(np.sum(grid.sites * w2))
        var = float(np.sum((grid.sites - mu) ** 2 * w2))
        sigma_fit = math.sqrt(2.0 * var)

    growth = np.diff(occ) if len(occ) > 1 else np.array([0])
    summary = {
        "scenario": cfg.name,
        "hit": out.event is not None,
        "initial_occupied": int(occ[0]) if len(occ) else 0,
        "final_occupied": int(occ[-1]) if len(occ) else 0,
        "max_growth_per_step": int(growth.max()) if len(growth) else 0,
        "growth_bound": 2 * radius,
        "monotone_growth": bool(np.all(growth >= 0)),
        "final_stage": float(stages[-1]) if len(stages) else 0.0,
        "sigma_fit": sigma_fit,
        "target_sigma": cfg.data["formation"]["target_sigma"],
        "width_rel_err": abs(sigma_fit - cfg.data["formation"]["target_sigma"])
        / cfg.data["formation"]["target_sigma"],
        "max_formation_norm_err": out.extras["formation_norm_err"],
    }
    return ScenarioResult(
        name=cfg.name,
        config=cfg,
        summary=summary,
        events=[out.event] if out.event else [],
        trajectory=out.log,
    )


_RUNNERS = {
    "interaction": run_interaction,
    "unresolvable_observation": run_unresolvable_observation,
    "turn_off": run_turn_off,
    "disengage": run_disengage,
    "pulse_drift": run_pulse_drift,
    "fade_in": run_fade_in,
}


def run_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    """Dispatch a config to its runner."""
    return _RUNNERS[cfg.name](cfg)


# ---------------------------------------------------------------------------
# helpers shared by runners
# ---------------------------------------------------------------------------


def _provenance_error(bb: Backbone, batch: EventBatch) -> float:
    """Max |stored - recomputed| over surviving coefficients."""
    if batch.n_hits == 0:
        return 0.0
    idx = np.flatnonzero(batch.hit)
    rows = bb.coeffs[np.minimum(batch.step_index[idx] + 1, len(bb.times) - 1)][:, list(bb.ready_ids)]
    recomputed = rows * bb.ready_amps[:, batch.u_sc[idx]].T
    return float(np.max(np.abs(recomputed - batch.survivor_coeffs[idx])))


def _identity_tolerance(rho: np.ndarray, n_trials: int) -> float:
    """Bound on the quadrature estimator's error from never-observed sites.

    A site with per-trial hit probability rho_u is missed by all trials with
    probability (1 - rho_u)^N; the estimator then lacks its mass rho_u. The
    bound is the expected missing mass plus three standard deviations of it.
    """
    miss = (1.0 - np.clip(rho, 0.0, 1.0)) ** n_trials
    bias = float(np.sum(rho * miss))
    var = float(np.sum(rho**2 * miss))
    return bias + 3.0 * math.sqrt(var) + 1e-9


def _final_identity(bb: Backbone, batch: EventBatch) -> float:
    """(1/s) * quadrature of the final-state square modulus over observed sites.

    Each observed site contributes sum_i |c_i|^2 rescaled from ramp progress
    at t_sc to the envelope-final coefficients; summed over distinct sites
    this is the outcome integral of the reduced state's square modulus.
    """
    if batch.n_hits == 0:
        return 0.0
    idx = np.flatnonzero(batch.hit)
    m = (np.abs(batch.survivor_coeffs[idx]) ** 2).sum(axis=1) / batch.ramp_progress[idx] ** 2
    sites = batch.u_sc[idx]
    first = np.unique(sites, return_index=True)[1]
    return float(m[first].sum() / bb.state0.s)


def _sample_events(batch: EventBatch, cap: int = 32) -> List[ReductionEvent]:
    """Materialize the first few events for logs and spot checks."""
    out = []
    idx = np.flatnonzero(batch.hit)[:cap]
    for i in idx:
        coeffs = {}
        for col, lbl in enumerate(batch.labels):
            c = batch.survivor_coeffs[i, col]
            if c != 0:
                coeffs[int(lbl)] = complex(c)
        out.append(
            ReductionEvent(
                t_sc=float(batch.t_sc[i]),
                term_hit=int(batch.term_hit[i]),
                u_sc=int(batch.u_sc[i]),
                pre_norm=float(batch.pre_norm[i]),
                post_coefficients=coeffs,
                rng_draws=(float(batch.draws[i, 0]), float(batch.draws[i, 1])),
                ramp_progress=float(batch.ramp_progress[i]),
            )
        )
    return out
