"""Exception types raised by the simulator.

Every failure mode that callers are expected to handle has a named class so
CLI exit codes and tests can dispatch on type rather than message text.
"""

from __future__ import annotations


class SimulationError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SimulationError):
    """Malformed, unknown, or out-of-range configuration input."""


class GridTooCoarse(SimulationError):
    """Pulse width is not resolvable on the grid (sigma < 2 * spacing)."""


class CenterOutOfRange(SimulationError):
    """Pulse center outside the grid or closer than 4 sigma to an edge."""


class GridMismatch(SimulationError):
    """Two objects built on different grids were combined."""


class PhantomTransfer(SimulationError):
    """A schedule routes current into or out of a phantom term."""


class Rule4Violation(SimulationError):
    """Current routed between two ready factors of the same observer."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__(
            "transfer between ready factors of the same observer: "
            + ", ".join(f"term {v.src} -> term {v.dst} (observer {v.observer_id!r})" for v in self.violations)
        )


class Rule2Violation(SimulationError):
    """A schedule would feed amplitude into a conscious factor from zero."""


class NotPostReduction(SimulationError):
    """Pulse formation requested on a state that is not freshly reduced."""


class ZeroWeightSite(SimulationError):
    """Reduction site has zero amplitude in the hit term."""


class NonpositiveS(SimulationError):
    """Rule-1 normalizer s must be positive."""


class IndexOutOfRange(SimulationError):
    """Site index range outside the grid or empty."""


class StepTooLarge(SimulationError):
    """dt exceeds 1/100 of an active ramp window."""


class HitRateTooHigh(SimulationError):
    """Per-step raw hit probability reached 0.05; dt is too coarse."""


class ScheduleStateMismatch(SimulationError):
    """State coefficients do not match the schedule's predicted values."""


class TooFewTrials(SimulationError):
    """Comparison requested with fewer than the minimum trial count."""


class TooFewEvents(SimulationError):
    """Histogram requested with fewer than the minimum event count."""


class InvariantBreach(SimulationError):
    """A named runtime invariant failed an audit."""

    def __init__(self, name: str, detail: str = ""):
        self.invariant = name
        super().__init__(f"invariant breached: {name}" + (f" ({detail})" if detail else ""))
