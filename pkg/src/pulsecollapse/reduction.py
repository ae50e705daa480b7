"""Stochastic reduction engine.

Rule 1 sets the chance of a stochastic choice: positive probability current
divided by the fixed normalizer s. Over one step that is
``p = clamp(total_positive * dt / s, 0, 1)``; over a whole trajectory the
*unconditional* probability that the choice lands in step i is p_i, so the
total equals the square modulus delivered to ready components divided by s
and a completed transfer is a certain hit. Trajectory drivers realize that
law by conditioning each step on the unconsumed budget (see
``scenarios``); ``sample_hit`` is the per-step primitive.

``reduce`` applies rule 3: the chosen site keeps every apparatus label whose
ready factor has weight there (coefficient a_i(t_sc) * F_i(u_sc) * sqrt(du)
on the unit site basis, not renormalized) and every other component drops to
exactly zero. The brain factor collapses to one conscious site state shared
by the survivors.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from .dynamics import CurrentReport, EnvelopeSchedule, rule4_pairs
from .errors import (
    HitRateTooHigh,
    NonpositiveS,
    ZeroWeightSite,
)
from .state import (
    PulseKind,
    SingleState,
    SystemState,
    Term,
)

__all__ = [
    "MAX_STEP_HIT_PROBABILITY",
    "RngStream",
    "ReductionEvent",
    "Hit",
    "hit_probability",
    "sample_hit",
    "reduce",
    "guard_rule4",
]

# Per-step resolution bound: raw J+ dt / s must stay below this.
MAX_STEP_HIT_PROBABILITY = 0.05


class RngStream:
    """Counted uniform stream for one trajectory.

    Derived from (seed, trial) through numpy's SeedSequence spawn-key
    mechanism, so distinct trials get statistically independent streams and
    identical (seed, trial) pairs replay bit-exactly. ``counter`` records
    how many uniforms have been drawn.
    """

    def __init__(self, seed: int, trial: int = 0):
        self.seed = int(seed)
        self.trial = int(trial)
        self.counter = 0
        key = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.trial,))
        self._gen = np.random.Generator(np.random.PCG64(key))

    def uniform(self) -> float:
        self.counter += 1
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        self.counter += n
        return self._gen.random(n)


@dataclass(frozen=True)
class ReductionEvent:
    """Record of one stochastic reduction.

    post_coefficients maps surviving apparatus labels to their coefficients;
    rng_draws holds the two uniforms consumed (hit test, site selection) so
    a run can be replayed bit-exactly. ramp_progress stores the envelope
    progress at t_sc for closed-form rescaling in analysis.
    """

    t_sc: float
    term_hit: int
    u_sc: int
    pre_norm: float
    post_coefficients: Dict[int, complex]
    rng_draws: Tuple[float, float]
    ramp_progress: float = 1.0


@dataclass(frozen=True)
class Hit:
    """Outcome of a per-step hit test: which term, which site, which draws."""

    term_index: int
    site_index: int
    draws: Tuple[float, float]


def hit_probability(report: CurrentReport, s: float, dt: float) -> float:
    """Rule-1 step probability, clamp((sum of positive J_n) * dt / s, 0, 1)."""
    if not s > 0.0:
        raise NonpositiveS(f"s must be positive, got {s}")
    return min(max(report.total_positive * dt / s, 0.0), 1.0)


def _site_selection_weights(state: SystemState, report: CurrentReport):
    """Positive per-site currents of non-phantom ready terms, flattened."""
    term_ids = []
    rows = []
    for n, arr in sorted(report.per_site.items()):
        term = state.terms[n]
        if term.phantom or not term.brain.is_ready:
            continue
        pos = np.clip(arr, 0.0, None)
        term_ids.append(n)
        rows.append(pos)
    if not rows:
        return [], np.zeros((0, state.grid.n_points))
    return term_ids, np.vstack(rows)


def sample_hit(
    state: SystemState,
    report: CurrentReport,
    dt: float,
    rng: RngStream,
    probability: Optional[float] = None,
) -> Optional[Hit]:
    """Per-step stochastic choice.

    Draws one uniform against the hit probability; on a hit draws a second
    and picks a site among ready-pulse (or ready site-state) sites with
    probability proportional to positive per-site current. Phantom terms and
    conscious factors are never targets. ``probability`` lets a trajectory
    driver substitute the budget-conditioned value; the raw per-step
    probability must stay below 0.05 either way or HitRateTooHigh is raised.
    """
    raw = hit_probability(report, state.s, dt)
    if raw >= MAX_STEP_HIT_PROBABILITY:
        raise HitRateTooHigh(
            f"per-step hit probability {raw:.4f} >= {MAX_STEP_HIT_PROBABILITY}; reduce dt"
        )
    p = raw if probability is None else min(max(probability, 0.0), 1.0)
    u1 = rng.uniform()
    if u1 >= p:
        return None
    term_ids, weights = _site_selection_weights(state, report)
    total = float(weights.sum())
    if total <= 0.0:
        return None
    u2 = rng.uniform()
    flat = weights.ravel()
    cdf = np.cumsum(flat)
    k = int(np.searchsorted(cdf, u2 * total, side="right"))
    k = min(k, flat.size - 1)
    row, site = divmod(k, state.grid.n_points)
    return Hit(term_index=term_ids[row], site_index=int(site), draws=(u1, u2))


def reduce(state: SystemState, term_hit: int, u_sc: int) -> SystemState:
    """Rule-3 reduction at site u_sc.

    Every apparatus label whose ready factor has nonzero weight at u_sc
    survives with coefficient a_i(t_sc) * w_i(u_sc), where w_i is the
    unit-basis site amplitude (F_i(u_sc) * sqrt(du) for pulses, 1 for a site
    state at u_sc). Survivors share one conscious SingleState at u_sc; every
    other coefficient is set to exactly zero. Nothing is renormalized.
    """
    if not 0 <= term_hit < len(state.terms):
        raise ZeroWeightSite(f"term_hit {term_hit} outside the term list")
    hit_term = state.terms[term_hit]
    if not hit_term.brain.is_ready:
        raise ZeroWeightSite(f"term {term_hit} does not hold a ready factor")
    hit_amp = hit_term.brain.site_amplitudes(state.grid)[u_sc]
    if hit_amp == 0:
        raise ZeroWeightSite(f"term {term_hit} has zero weight at site {u_sc}")

    observer = hit_term.brain.observer_id
    collapsed = SingleState(kind=PulseKind.CONSCIOUS, index=u_sc, observer_id=observer)
    new_terms = []
    for term in state.terms:
        amp = 0j
        if not term.phantom and term.brain.is_ready and term.brain.observer_id == observer:
            amp = complex(term.brain.site_amplitudes(state.grid)[u_sc])
        if amp != 0:
            new_terms.append(
                Term(
                    apparatus_label=term.apparatus_label,
                    coefficient=term.coefficient * amp,
                    brain=collapsed,
                    phantom=False,
                )
            )
        else:
            new_terms.append(
                Term(
                    apparatus_label=term.apparatus_label,
                    coefficient=0j,
                    brain=term.brain,
                    phantom=term.phantom,
                )
            )
    return state.with_terms(new_terms)


def guard_rule4(schedule: EnvelopeSchedule, state: SystemState) -> list:
    """Transfers forbidden by rule 4 (ready -> ready, same observer).

    Empty list when the schedule is legal. The returned pairs name source
    term, destination term, and observer.
    """
    return rule4_pairs(state, schedule)
