"""Dynamics tests: envelopes, currents, stepping, formation, drift, intensity.

Closed-form anchors:
  - trig envelope with fraction f at progress 1 moves exactly f of the
    source square modulus (sin^2(asin(sqrt(f))) = f);
  - total square modulus is conserved by every schedule step to 1e-9 per
    unit time (the transfers are rotations);
  - a pulse centered on the midpoint between two sites splits its
    intensity exactly in half.
"""

import numpy as np
import pytest

from pulsecollapse.dynamics import (
    EnvelopeSchedule,
    FormationPolicy,
    drift_pulse,
    form_pulse,
    relative_intensity,
    rule4_pairs,
    step,
)
from pulsecollapse.errors import (
    IndexOutOfRange,
    NotPostReduction,
    Rule2Violation,
    Rule4Violation,
    ScheduleStateMismatch,
    StepTooLarge,
)
from pulsecollapse.state import (
    BrainGrid,
    PulseFactor,
    PulseKind,
    SingleState,
    SystemState,
    Term,
    make_gaussian_pulse,
    total_square_modulus,
)

GRID = BrainGrid(n_points=256, spacing=0.1, origin=0.0)


def two_term_state(a=1.0, conscious_center=8.0, ready_center=17.0, sigma=0.8):
    conscious = make_gaussian_pulse(GRID, conscious_center, sigma, PulseKind.CONSCIOUS)
    ready = make_gaussian_pulse(GRID, ready_center, sigma, PulseKind.READY)
    return SystemState(
        terms=(
            Term(apparatus_label=1, coefficient=complex(a), brain=PulseFactor(conscious)),
            Term(apparatus_label=2, coefficient=0j, brain=PulseFactor(ready)),
        ),
        s=a * a,
        time=0.0,
        grid=GRID,
    )


# ─── envelope algebra ────────────────────────────────────────────────


class TestEnvelope:
    def test_trig_full_ramp_endpoints(self):
        """src goes 1 -> 0, dst goes 0 -> 1."""
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        assert sch.envelope_factors(0.0) == (1.0, 0.0)
        src, dst = sch.envelope_factors(1.0)
        assert src == pytest.approx(0.0, abs=1e-15)
        assert dst == pytest.approx(1.0, abs=1e-15)

    def test_trig_halted_fraction_exact(self):
        """fraction f leaves |dst|^2 = f exactly at the end of the window."""
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0, fraction=0.3)
        src, dst = sch.envelope_factors(1.0)
        assert dst * dst == pytest.approx(0.3, abs=1e-15)
        assert src * src + dst * dst == pytest.approx(1.0, abs=1e-15)

    def test_trig_conserves_at_all_times(self):
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0, fraction=0.7)
        for t in np.linspace(0, 1, 37):
            src, dst = sch.envelope_factors(t)
            assert src * src + dst * dst == pytest.approx(1.0, abs=1e-12)

    def test_linear_moves_square_modulus_linearly(self):
        """|dst(t)|^2 = f * progress for the linear ramp."""
        state = two_term_state()
        sch = EnvelopeSchedule.linear(state, [(0, (1,))], t_start=0.0, t_end=2.0, fraction=0.5)
        _, dst = sch.envelope_factors(1.0)
        assert dst * dst == pytest.approx(0.25, abs=1e-15)

    def test_progress_clamped(self):
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        assert sch.progress(-5.0) == 0.0
        assert sch.progress(5.0) == 1.0

    def test_predicted_coefficients_track_envelope(self):
        state = two_term_state(a=0.9)
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        pred = sch.predicted_coefficients(0.5)
        src, dst = sch.envelope_factors(0.5)
        assert pred[0] == pytest.approx(0.9 * src, abs=1e-15)
        assert pred[1] == pytest.approx(0.9 * dst, abs=1e-15)

    def test_destination_must_start_at_zero(self):
        state = two_term_state()
        bad = state.with_terms(
            (
                state.terms[0],
                Term(apparatus_label=2, coefficient=0.1 + 0j, brain=state.terms[1].brain),
            )
        )
        with pytest.raises(ScheduleStateMismatch):
            EnvelopeSchedule.trig(bad, [(0, (1,))], t_start=0.0, t_end=1.0)

    def test_destination_must_be_ready(self):
        conscious = make_gaussian_pulse(GRID, 8.0, 0.8, PulseKind.CONSCIOUS)
        other = make_gaussian_pulse(GRID, 17.0, 0.8, PulseKind.CONSCIOUS)
        state = SystemState(
            terms=(
                Term(apparatus_label=1, coefficient=1 + 0j, brain=PulseFactor(conscious)),
                Term(apparatus_label=2, coefficient=0j, brain=PulseFactor(other)),
            ),
            s=1.0,
            time=0.0,
            grid=GRID,
        )
        with pytest.raises(Rule2Violation):
            EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)


# ─── stepping and currents ───────────────────────────────────────────


class TestStep:
    def test_coefficients_follow_schedule(self):
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        dt = 0.005
        for _ in range(60):
            state, _ = step(state, sch, dt)
        pred = sch.predicted_coefficients(state.time)
        assert state.terms[0].coefficient == pred[0]
        assert state.terms[1].coefficient == pred[1]

    def test_conservation_over_full_ramp(self):
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        t0 = total_square_modulus(state)
        for _ in range(200):
            state, _ = step(state, sch, 0.005)
        assert abs(total_square_modulus(state) - t0) < 1e-9

    def test_current_report_matches_square_modulus_change(self):
        """per-term J * dt equals the change of that term's square modulus."""
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        dt = 0.005
        before = [t.square_modulus() for t in state.terms]
        state, report = step(state, sch, dt)
        after = [t.square_modulus() for t in state.terms]
        for n in range(2):
            assert report.per_term[n] * dt == pytest.approx(after[n] - before[n], abs=1e-15)

    def test_total_positive_counts_only_inflow(self):
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        state, report = step(state, sch, 0.005)
        # source drains (negative), ready destination gains
        assert report.per_term[0] < 0
        assert report.per_term[1] > 0
        assert report.total_positive == pytest.approx(report.per_term[1], abs=1e-15)

    def test_per_site_current_sums_to_per_term(self):
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        state, report = step(state, sch, 0.005)
        assert np.sum(report.per_site[1]) == pytest.approx(report.per_term[1], abs=1e-12)

    def test_step_too_large_rejected(self):
        state = two_term_state()
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        with pytest.raises(StepTooLarge):
            step(state, sch, 0.05)

    def test_hold_is_inert(self):
        state = two_term_state()
        hold = EnvelopeSchedule.hold()
        state2, report = step(state, hold, 0.005)
        assert state2.terms[0].coefficient == state.terms[0].coefficient
        assert report.total_positive == 0.0

    def test_guard_rejects_ready_to_ready_same_observer(self):
        """Transfer between two ready factors of one observer is blocked."""
        r1 = SingleState(kind=PulseKind.READY, index=10)
        r2 = SingleState(kind=PulseKind.READY, index=20)
        state = SystemState(
            terms=(
                Term(apparatus_label=1, coefficient=1 + 0j, brain=r1),
                Term(apparatus_label=2, coefficient=0j, brain=r2),
            ),
            s=1.0,
            time=0.0,
            grid=GRID,
        )
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        with pytest.raises(Rule4Violation) as err:
            step(state, sch, 0.005)
        assert "observer" in str(err.value)
        assert rule4_pairs(state, sch)

    def test_guard_off_executes_without_raising(self):
        r1 = SingleState(kind=PulseKind.READY, index=10)
        r2 = SingleState(kind=PulseKind.READY, index=20)
        state = SystemState(
            terms=(
                Term(apparatus_label=1, coefficient=1 + 0j, brain=r1),
                Term(apparatus_label=2, coefficient=0j, brain=r2),
            ),
            s=1.0,
            time=0.0,
            grid=GRID,
        )
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        state2, _ = step(state, sch, 0.005, guard=False)
        assert state2.time == pytest.approx(0.005)

    def test_different_observers_not_rule4(self):
        """The same transfer across distinct observers is allowed."""
        r1 = SingleState(kind=PulseKind.READY, index=10, observer_id="alice")
        r2 = SingleState(kind=PulseKind.READY, index=20, observer_id="bob")
        state = SystemState(
            terms=(
                Term(apparatus_label=1, coefficient=1 + 0j, brain=r1),
                Term(apparatus_label=2, coefficient=0j, brain=r2),
            ),
            s=1.0,
            time=0.0,
            grid=GRID,
        )
        sch = EnvelopeSchedule.trig(state, [(0, (1,))], t_start=0.0, t_end=1.0)
        assert rule4_pairs(state, sch) == []
        step(state, sch, 0.005)


# ─── pulse formation ─────────────────────────────────────────────────


class TestFormation:
    def _post_reduction_state(self):
        """One surviving term holding a conscious single state at site 120."""
        chosen = SingleState(kind=PulseKind.CONSCIOUS, index=120)
        return SystemState(
            terms=(Term(apparatus_label=2, coefficient=0.5 + 0j, brain=chosen),),
            s=1.0,
            time=1.0,
            grid=GRID,
        )

    def test_instantaneous_formation_is_full_width(self):
        state = self._post_reduction_state()
        policy = FormationPolicy.instantaneous(target_sigma=0.8)
        formed = form_pulse(state, 120, policy)
        pulse = formed.terms[0].brain.pulse
        assert pulse.kind is PulseKind.CONSCIOUS
        assert pulse.norm_sq() == pytest.approx(1.0, abs=1e-12)
        assert pulse.formation_stage == 1.0
        assert formed.terms[0].coefficient == 0.5 + 0j

    def test_staged_formation_starts_at_one_site(self):
        state = self._post_reduction_state()
        policy = FormationPolicy.staged(target_sigma=0.8, tau=0.05, neighbor_radius=2)
        formed = form_pulse(state, 120, policy)
        pulse = formed.terms[0].brain.pulse
        assert np.count_nonzero(pulse.weights) == 1
        assert pulse.norm_sq() == pytest.approx(1.0, abs=1e-12)
        assert pulse.formation_stage == 0.0

    def test_staged_growth_bounded_and_norm_kept(self):
        """Occupied set grows by at most neighbor_radius per side per step."""
        state = self._post_reduction_state()
        policy = FormationPolicy.staged(target_sigma=0.8, tau=0.05, neighbor_radius=2)
        state = form_pulse(state, 120, policy)
        hold = EnvelopeSchedule.hold()
        occupied = [1]
        for _ in range(200):
            state, _ = step(state, hold, 0.005)
            pulse = state.terms[0].brain.pulse
            occupied.append(int(np.count_nonzero(pulse.weights)))
            assert pulse.norm_sq() == pytest.approx(1.0, abs=1e-9)
        growth = np.diff(occupied)
        assert growth.max() <= 2 * 2
        assert np.all(growth >= 0)
        assert state.terms[0].brain.pulse.formation_stage > 0.999999

    def test_not_post_reduction_rejected(self):
        state = two_term_state()
        policy = FormationPolicy.instantaneous(target_sigma=0.8)
        with pytest.raises(NotPostReduction):
            form_pulse(state, 120, policy)


# ─── drift and the phantom trail ─────────────────────────────────────


class TestDrift:
    def _drift_state(self):
        conscious = make_gaussian_pulse(GRID, 6.0, 0.8, PulseKind.CONSCIOUS)
        shadow = conscious.with_kind(PulseKind.READY)
        return SystemState(
            terms=(
                Term(apparatus_label=1, coefficient=1 + 0j, brain=PulseFactor(conscious)),
                Term(apparatus_label=2, coefficient=0j, brain=PulseFactor(shadow)),
            ),
            s=1.0,
            time=0.0,
            grid=GRID,
        )

    def test_zero_velocity_is_identity(self):
        state = self._drift_state()
        out = drift_pulse(state, velocity=0.0, dt=0.01)
        assert out is state

    def test_drift_moves_center(self):
        state = self._drift_state()
        for _ in range(100):
            state = drift_pulse(state, velocity=1.0, dt=0.01)
        pulse = state.terms[0].brain.pulse
        moved = GRID.coord(pulse.center_index)
        assert moved == pytest.approx(7.0, abs=2 * GRID.spacing)

    def test_drift_conserves_total(self):
        state = self._drift_state()
        t0 = total_square_modulus(state)
        for _ in range(300):
            state = drift_pulse(state, velocity=1.0, dt=0.01, shadow_ready=True, shed_rate=0.05)
        assert abs(total_square_modulus(state) - t0) < 1e-9

    def test_shedding_feeds_shadow(self):
        state = self._drift_state()
        for _ in range(300):
            state = drift_pulse(state, velocity=1.0, dt=0.01, shadow_ready=True, shed_rate=0.05)
        assert state.terms[1].square_modulus() > 0.01
        assert state.terms[0].square_modulus() < 1.0

    def test_phantom_amplitudes_freeze(self):
        """Once a trail site stops receiving current its amplitude is locked."""
        state = self._drift_state()
        frozen = {}
        worst = 0.0
        for _ in range(900):
            state = drift_pulse(state, velocity=1.0, dt=0.01, shadow_ready=True, shed_rate=0.05)
            shadow = state.terms[1]
            pulse = shadow.brain.pulse
            if pulse.phantom_sites is None:
                continue
            amps = np.abs(shadow.coefficient) * np.abs(pulse.site_amplitudes())
            for site in np.flatnonzero(pulse.phantom_sites):
                site = int(site)
                if site in frozen:
                    worst = max(worst, abs(amps[site] - frozen[site]))
                else:
                    frozen[site] = float(amps[site])
        assert frozen, "drift never produced a phantom trail"
        assert worst < 1e-12


# ─── relative intensity ──────────────────────────────────────────────


class TestRelativeIntensity:
    def test_full_range_is_one(self):
        p = make_gaussian_pulse(GRID, 12.0, 0.8)
        assert relative_intensity(p, 0, GRID.n_points - 1) == pytest.approx(1.0, abs=1e-9)

    def test_mid_bond_center_splits_exactly_in_half(self):
        """Center midway between sites k and k+1: each half holds 0.5."""
        k = 120
        center = 0.5 * (GRID.coord(k) + GRID.coord(k + 1))
        p = make_gaussian_pulse(GRID, center, 0.8)
        left = relative_intensity(p, 0, k)
        right = relative_intensity(p, k + 1, GRID.n_points - 1)
        assert left == pytest.approx(0.5, abs=1e-3)
        assert right == pytest.approx(0.5, abs=1e-3)
        assert left + right == pytest.approx(1.0, abs=1e-9)

    def test_sub_range_is_monotone_in_width(self):
        p = make_gaussian_pulse(GRID, 12.0, 0.8)
        c = p.center_index
        narrow = relative_intensity(p, c - 4, c + 4)
        wide = relative_intensity(p, c - 12, c + 12)
        assert 0 < narrow < wide <= 1.0 + 1e-12

    def test_bad_ranges_rejected(self):
        p = make_gaussian_pulse(GRID, 12.0, 0.8)
        with pytest.raises(IndexOutOfRange):
            relative_intensity(p, 10, 5)
        with pytest.raises(IndexOutOfRange):
            relative_intensity(p, 0, GRID.n_points)
