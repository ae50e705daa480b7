"""Closed-form probabilities and Monte Carlo agreement checks.

The rule-1 law makes hit totals exact: over a transfer that moves square
modulus m into ready states, P(hit) = m / s. Empirical rates are compared
against that closed form with a binomial z-score; site histograms are
compared against the expected square-modulus profile with a chi-square
test, pooling thin bins.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import stats

from .errors import NonpositiveS, TooFewEvents, TooFewTrials

__all__ = [
    "ProbabilityReport",
    "HistogramCheck",
    "closed_form_p_hit",
    "closed_form_p2_after_off",
    "compare",
    "hit_histogram",
]

Z_BOUND = 3.0
MIN_EXPECTED_PER_BIN = 5.0


def closed_form_p_hit(transferred_sq: float, s: float) -> float:
    """P(hit) = (transferred square modulus) / s."""
    if not s > 0.0:
        raise NonpositiveS(f"s must be positive, got {s}")
    if transferred_sq < -1e-12 or transferred_sq > s * (1.0 + 1e-9):
        raise ValueError(f"transferred square modulus {transferred_sq} outside [0, s]")
    return min(max(transferred_sq / s, 0.0), 1.0)


def closed_form_p2_after_off(a2_sq: float, s: float) -> float:
    """P(spot remains after source 1 is switched off) = |a_2|^2 / s."""
    return closed_form_p_hit(a2_sq, s)


@dataclass(frozen=True)
class ProbabilityReport:
    """Binomial agreement between an empirical rate and a closed form."""

    closed_form: float
    empirical: float
    n_trials: int
    std_error: float
    z_score: float
    passed: bool


def compare(outcomes, closed_form: float, min_trials: int = 1000) -> ProbabilityReport:
    """Three-sigma binomial check of a Monte Carlo rate.

    ``outcomes`` is a boolean array of per-trial successes. A degenerate
    closed form (0 or 1) has zero variance; the empirical rate must then
    match exactly.
    """
    outcomes = np.asarray(outcomes, dtype=bool)
    n = outcomes.size
    if n < min_trials:
        raise TooFewTrials(f"{n} trials < required {min_trials}")
    if not 0.0 <= closed_form <= 1.0:
        raise ValueError(f"closed form {closed_form} outside [0, 1]")
    empirical = float(outcomes.mean())
    se = float(np.sqrt(closed_form * (1.0 - closed_form) / n))
    if se == 0.0:
        exact = empirical == closed_form
        return ProbabilityReport(
            closed_form=closed_form,
            empirical=empirical,
            n_trials=n,
            std_error=0.0,
            z_score=0.0 if exact else float("inf"),
            passed=exact,
        )
    z = (empirical - closed_form) / se
    return ProbabilityReport(
        closed_form=closed_form,
        empirical=empirical,
        n_trials=n,
        std_error=se,
        z_score=float(z),
        passed=bool(abs(z) <= Z_BOUND),
    )


@dataclass(frozen=True)
class HistogramCheck:
    """Chi-square comparison of hit sites against an expected profile."""

    chi2: float
    dof: int
    p_value: float
    n_events: int
    n_bins: int
    counts: Tuple[float, ...]
    expected: Tuple[float, ...]


def hit_histogram(
    sites,
    expected_profile,
    n_sites: int,
    min_events: int = 10_000,
) -> HistogramCheck:
    """Chi-square test of observed hit sites against a square-modulus profile.

    Bins with expected count below 5 are pooled into one bin; if the pool is
    still thin it is merged into the smallest retained bin. A profile with a
    single support site leaves one bin and zero degrees of freedom, reported
    as p = 1.0 when the observed counts sit exactly on it.
    """
    sites = np.asarray(sites, dtype=np.int64)
    n_events = sites.size
    if n_events < min_events:
        raise TooFewEvents(f"{n_events} reduction events < required {min_events}")
    profile = np.asarray(expected_profile, dtype=float)
    if profile.shape != (n_sites,):
        raise ValueError("expected profile length must match the site count")
    total_mass = profile.sum()
    if not total_mass > 0.0:
        raise ValueError("expected profile has no mass")

    counts = np.bincount(sites, minlength=n_sites).astype(float)
    expected = profile / total_mass * n_events

    keep = expected >= MIN_EXPECTED_PER_BIN
    kept_counts = counts[keep]
    kept_expected = expected[keep]
    pool_count = counts[~keep].sum()
    pool_expected = expected[~keep].sum()
    if pool_expected > 0.0:
        if pool_expected >= MIN_EXPECTED_PER_BIN or kept_expected.size == 0:
            kept_counts = np.append(kept_counts, pool_count)
            kept_expected = np.append(kept_expected, pool_expected)
        else:
            j = int(np.argmin(kept_expected))
            kept_counts[j] += pool_count
            kept_expected[j] += pool_expected
    elif pool_count > 0.0:
        # observed mass on zero-expectation sites: certain failure
        return HistogramCheck(
            chi2=float("inf"),
            dof=max(kept_expected.size - 1, 1),
            p_value=0.0,
            n_events=n_events,
            n_bins=kept_expected.size,
            counts=tuple(kept_counts),
            expected=tuple(kept_expected),
        )

    n_bins = kept_expected.size
    dof = n_bins - 1
    if dof == 0:
        exact = float(kept_counts[0]) == float(n_events)
        return HistogramCheck(
            chi2=0.0 if exact else float("inf"),
            dof=0,
            p_value=1.0 if exact else 0.0,
            n_events=n_events,
            n_bins=1,
            counts=tuple(kept_counts),
            expected=tuple(kept_expected),
        )
    chi2 = float(np.sum((kept_counts - kept_expected) ** 2 / kept_expected))
    p = float(stats.chi2.sf(chi2, dof))
    return HistogramCheck(
        chi2=chi2,
        dof=dof,
        p_value=p,
        n_events=n_events,
        n_bins=n_bins,
        counts=tuple(kept_counts),
        expected=tuple(kept_expected),
    )
