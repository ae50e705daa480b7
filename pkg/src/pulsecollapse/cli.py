"""Command-line entry point.

Subcommands: ``run`` (one trajectory, full artifact set), ``montecarlo``
(batch trials with closed-form comparisons), ``verify`` (invariant suite
over bundled or given configs).

Every flag can also come from an environment variable with the
``PULSECOLLAPSE_`` prefix (PULSECOLLAPSE_CONFIG, PULSECOLLAPSE_SEED,
PULSECOLLAPSE_TRIALS, PULSECOLLAPSE_OUT, PULSECOLLAPSE_GUARD,
PULSECOLLAPSE_FORMATION). Flags win over environment, environment over the
config file.

Exit codes: 0 success, 1 configuration error, 2 invariant breach (the
violated invariant is named on stderr), 3 statistical failure.

All output files are deterministic functions of (config, seed); the wall
clock appears only in manifest.json.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
from dataclasses import dataclass, asdict
from datetime import datetime, timezone
from importlib import resources
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .config import ScenarioConfig, load_config
from .errors import ConfigError, InvariantBreach, Rule4Violation, SimulationError
from .scenarios import (
    TrajectoryLog,
    run_batch,
    run_pulse_drift,
    run_scenario,
    simulate_trajectory,
)

ENV_PREFIX = "PULSECOLLAPSE_"
BATCH_SCENARIOS = ("interaction", "unresolvable_observation", "turn_off")

BUNDLED_CONFIGS = (
    "interaction.yaml",
    "interaction_halted.yaml",
    "observation_overlap.yaml",
    "observation_disjoint.yaml",
    "observation_single.yaml",
    "turn_off_overlap.yaml",
    "turn_off_disjoint.yaml",
    "disengage.yaml",
    "pulse_drift.yaml",
    "fade_in.yaml",
)


@dataclass
class RunManifest:
    """Echo of everything that determined a run, written next to its outputs."""

    command: str
    config_path: str
    scenario: str
    seed: int
    n_trials: int
    out_dir: str
    guard: bool
    formation_mode: Optional[str]
    emit_trajectory: bool
    emit_events: bool
    emit_summary: bool
    package_version: str
    created_utc: str


# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def _plain(value):
    """Recursively convert numpy scalars, arrays, and complex to JSON types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, complex) or isinstance(value, np.complexfloating):
        return [float(value.real), float(value.imag)]
    if isinstance(value, (np.floating, float)):
        return float(value)
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    return value


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_plain(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_trajectory_csv(path: str, log: TrajectoryLog) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(log.header()) + "\n")
        for row in log.rows():
            fh.write(",".join("%.17g" % v for v in row) + "\n")


def _event_record(event) -> Dict:
    return {
        "t_sc": event.t_sc,
        "term_hit": event.term_hit,
        "u_sc": event.u_sc,
        "pre_norm": event.pre_norm,
        "post_coefficients": {
            str(k): [v.real, v.imag] for k, v in sorted(event.post_coefficients.items())
        },
        "rng_draws": list(event.rng_draws),
        "ramp_progress": event.ramp_progress,
    }


def _prepare_out(out_dir: str, force: bool) -> None:
    if os.path.isdir(out_dir) and os.listdir(out_dir) and not force:
        raise ConfigError(
            f"output directory {out_dir!r} is not empty; pass --force to overwrite"
        )
    os.makedirs(out_dir, exist_ok=True)


def _manifest(args, cfg: ScenarioConfig, command: str) -> RunManifest:
    return RunManifest(
        command=command,
        config_path=args.config,
        scenario=cfg.name,
        seed=cfg.seed,
        n_trials=cfg.trials,
        out_dir=args.out,
        guard=cfg.guard,
        formation_mode=cfg.get("formation.mode"),
        emit_trajectory=not args.no_trajectory,
        emit_events=not args.no_events,
        emit_summary=not args.no_summary,
        package_version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(),
    )


# ---------------------------------------------------------------------------
# config resolution (flags > environment > file)
# ---------------------------------------------------------------------------


def _env(name: str) -> Optional[str]:
    return os.environ.get(ENV_PREFIX + name)


def _resolve_config(args) -> ScenarioConfig:
    path = args.config or _env("CONFIG")
    if not path:
        raise ConfigError("no config given; pass --config or set PULSECOLLAPSE_CONFIG")
    args.config = path
    cfg = load_config(path)

    seed = args.seed if args.seed is not None else _env("SEED")
    trials = args.trials if args.trials is not None else _env("TRIALS")
    guard = args.guard if args.guard is not None else _env("GUARD")
    formation = args.formation if args.formation is not None else _env("FORMATION")
    try:
        seed = int(seed) if seed is not None else None
        trials = int(trials) if trials is not None else None
    except ValueError as exc:
        raise ConfigError(f"override must be an integer: {exc}")
    if guard is not None and guard not in ("on", "off"):
        raise ConfigError(f"guard must be on or off, got {guard!r}")
    return cfg.with_overrides(
        seed=seed, trials=trials, guard=guard, formation_mode=formation
    )


def _resolve_out(args) -> None:
    args.out = args.out or _env("OUT") or "out"


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    cfg = _resolve_config(args)
    _resolve_out(args)
    _prepare_out(args.out, args.force)
    manifest = _manifest(args, cfg, "run")

    if cfg.name == "pulse_drift":
        result = run_pulse_drift(cfg)
        log, events, summary = result.trajectory, [], result.summary
    elif cfg.name in ("disengage", "fade_in"):
        result = run_scenario(cfg)
        log, events, summary = result.trajectory, result.events, result.summary
    else:
        out = simulate_trajectory(cfg, trial=0)
        log = out.log
        events = [out.event] if out.event else []
        summary = {
            "scenario": cfg.name,
            "seed": cfg.seed,
            "hit": out.event is not None,
            "budget_consumed": float(out.log.budget[-1]),
        }
        if out.event is not None:
            ev = out.event
            summary.update(
                {
                    "t_sc": ev.t_sc,
                    "u_sc": ev.u_sc,
                    "term_hit": ev.term_hit,
                    "multiplicity": len(ev.post_coefficients),
                    "pre_norm": ev.pre_norm,
                    "post_norm": sum(abs(c) ** 2 for c in ev.post_coefficients.values()),
                }
            )
        summary.update({k: v for k, v in out.extras.items() if np.isscalar(v)})

    if manifest.emit_trajectory and log is not None:
        _write_trajectory_csv(os.path.join(args.out, "trajectory.csv"), log)
    if manifest.emit_events:
        _write_json(
            os.path.join(args.out, "events.json"), [_event_record(e) for e in events]
        )
    if manifest.emit_summary:
        _write_json(os.path.join(args.out, "summary.json"), summary)
    _write_json(os.path.join(args.out, "manifest.json"), asdict(manifest))
    print(f"run complete: scenario={cfg.name} seed={cfg.seed} out={args.out}")
    return 0


def _montecarlo_passes(summary: Dict) -> List[str]:
    """Names of failed comparisons in a batch summary."""
    failures = []
    if summary.get("probability_pass") is False:
        failures.append(
            f"probability z={summary.get('z_score', float('nan')):.3f} "
            f"(closed form {summary.get('closed_form_p_hit', summary.get('closed_form_p2'))})"
        )
    p = summary.get("chi2_p_value")
    if p is not None and not p > 0.01:
        failures.append(f"site histogram chi2 p={p:.5f} <= 0.01")
    if summary.get("final_identity_pass") is False:
        failures.append(
            f"final identity {summary['final_identity_estimate']:.6f} vs "
            f"{summary['final_identity_target']:.6f}"
        )
    if summary.get("all_trials_reduced") is False:
        failures.append("incomplete reduction on a completed transfer")
    return failures


def cmd_montecarlo(args) -> int:
    cfg = _resolve_config(args)
    _resolve_out(args)
    if cfg.trials < 1000:
        raise ConfigError(f"montecarlo needs at least 1000 trials, got {cfg.trials}")
    if cfg.name not in BATCH_SCENARIOS:
        raise ConfigError(
            f"scenario {cfg.name!r} has no Monte Carlo batch; "
            f"supported: {', '.join(BATCH_SCENARIOS)}"
        )
    _prepare_out(args.out, args.force)
    manifest = _manifest(args, cfg, "montecarlo")

    result = run_scenario(cfg)
    failures = _montecarlo_passes(result.summary)
    report = {
        "scenario": cfg.name,
        "seed": cfg.seed,
        "n_trials": cfg.trials,
        "summary": result.summary,
        "failures": failures,
        "passed": not failures,
    }
    _write_json(os.path.join(args.out, "report.json"), report)
    _write_json(os.path.join(args.out, "manifest.json"), asdict(manifest))
    for line in failures:
        print(f"FAIL {line}", file=sys.stderr)
    print(
        f"montecarlo {'pass' if not failures else 'FAIL'}: "
        f"scenario={cfg.name} trials={cfg.trials} out={args.out}"
    )
    return 0 if not failures else 3


def _debug_variant(cfg: ScenarioConfig, **debug_flags) -> ScenarioConfig:
    data = copy.deepcopy(cfg.data)
    data["debug"].update(debug_flags)
    return ScenarioConfig(name=cfg.name, data=data, raw=cfg.raw)


def _verify_one(cfg: ScenarioConfig, checks: List[Dict], label: str) -> None:
    """Append invariant check records for one config."""

    def record(invariant: str, passed: bool, detail: str) -> None:
        checks.append(
            {"invariant": invariant, "config": label, "passed": bool(passed), "detail": detail}
        )

    if cfg.name in BATCH_SCENARIOS:
        small = cfg.with_overrides(trials=2000)
        bb, batch = run_batch(small)
        record(
            "normalization",
            bb.audits["max_pulse_norm_error"] <= 1e-9,
            f"max pulse norm error {bb.audits['max_pulse_norm_error']:.3e}",
        )
        elapsed = bb.times[-1] - bb.times[0]
        record(
            "conservation",
            bb.audits["max_conservation_drift"] <= 1e-9 * max(1.0, elapsed),
            f"max drift {bb.audits['max_conservation_drift']:.3e} over {elapsed:.3g} time",
        )
        _, batch2 = run_batch(small, backbone=bb)
        record(
            "determinism",
            batch.digest() == batch2.digest(),
            f"event digest {batch.digest()[:16]}",
        )
        out = None
        for trial in range(10):
            out = simulate_trajectory(small, trial=trial)
            if out.event is not None:
                break
        if out.event is None:
            record("reduction-zeroing", True, "no hit in 10 trials (partial transfer)")
        else:
            post = sum(abs(c) ** 2 for c in out.event.post_coefficients.values())
            labels = set(out.event.post_coefficients)
            ok = bool(labels) and post <= out.event.pre_norm + 1e-12
            if cfg.name != "turn_off":
                # the final state still carries the survivors; turn_off may
                # have zeroed them again at t_off
                final = {t.apparatus_label for t in out.state.terms if t.coefficient != 0}
                ok = ok and final == labels
            record(
                "reduction-zeroing",
                ok,
                f"{len(labels)} surviving label(s), post norm {post:.6f}",
            )
    elif cfg.name == "pulse_drift":
        result = run_pulse_drift(cfg)
        record(
            "phantom-freeze",
            result.summary["max_phantom_drift"] < 1e-12,
            f"max drift {result.summary['max_phantom_drift']:.3e} over "
            f"{result.summary['phantom_trail_count']} trail sites",
        )
        record(
            "conservation",
            result.summary["max_conservation_drift"]
            <= 1e-9 * max(1.0, cfg.data["drift"]["duration"]),
            f"max drift {result.summary['max_conservation_drift']:.3e}",
        )
        guard_cfg = _debug_variant(cfg, intra_ready_transfer=True)
        try:
            run_pulse_drift(guard_cfg)
            record("rule4-guard", False, "injected ready transfer was not rejected")
        except Rule4Violation as exc:
            record("rule4-guard", True, f"guard rejected: {exc}")
    else:
        result = run_scenario(cfg)
        if cfg.name == "fade_in":
            record(
                "normalization",
                result.summary["max_formation_norm_err"] <= 1e-9,
                f"max staged-formation norm error "
                f"{result.summary['max_formation_norm_err']:.3e}",
            )
            record(
                "formation-growth",
                result.summary["max_growth_per_step"] <= result.summary["growth_bound"]
                and result.summary["monotone_growth"],
                f"max growth {result.summary['max_growth_per_step']} sites/step",
            )
        if cfg.name == "disengage":
            record(
                "coefficient-freeze",
                result.summary["swap_identical"]
                and result.summary["currents_zero_after_dis"]
                and result.summary["square_moduli_constant_after_dis"],
                "disengage left coefficients bit-identical and currents zero",
            )


def cmd_verify(args) -> int:
    _resolve_out(args)
    _prepare_out(args.out, args.force)
    checks: List[Dict] = []

    if args.config or _env("CONFIG"):
        cfgs = [(_resolve_config(args), os.path.basename(args.config))]
    else:
        args.config = "<bundled>"
        cfgs = []
        for name in BUNDLED_CONFIGS:
            ref = resources.files("pulsecollapse").joinpath("configs", name)
            with resources.as_file(ref) as path:
                cfgs.append((load_config(str(path)), name))

    for cfg, label in cfgs:
        _verify_one(cfg, checks, label.removesuffix(".yaml"))

    failed = [c for c in checks if not c["passed"]]
    report = {
        "checks": checks,
        "n_checks": len(checks),
        "n_failed": len(failed),
        "passed": not failed,
    }
    _write_json(os.path.join(args.out, "report.json"), report)
    for c in checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['invariant']:<20} {c['config']:<40} {c['detail']}")
    if failed:
        names = ", ".join(sorted({c["invariant"] for c in failed}))
        print(f"verify FAILED: {names}", file=sys.stderr)
        return 2
    print(f"verify passed: {len(checks)} checks")
    return 0


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pulsecollapse",
        description="Stochastic reduction simulator: run trajectories, "
        "verify closed-form probabilities by Monte Carlo, audit invariants.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required: bool) -> None:
        p.add_argument("--config", required=False, help="scenario config file (YAML)")
        p.add_argument("--seed", type=int, default=None, help="override scenario.seed")
        p.add_argument("--trials", type=int, default=None, help="override scenario.trials")
        p.add_argument("--out", default=None, help="output directory (default: out)")
        p.add_argument(
            "--guard",
            choices=("on", "off"),
            default=None,
            help="ready-to-ready transfer guard",
        )
        p.add_argument(
            "--formation",
            choices=("instant", "staged"),
            default=None,
            help="override formation.mode",
        )
        p.add_argument("--force", action="store_true", help="write into a non-empty directory")
        p.add_argument("--no-trajectory", action="store_true", help="skip trajectory.csv")
        p.add_argument("--no-events", action="store_true", help="skip events.json")
        p.add_argument("--no-summary", action="store_true", help="skip summary.json")

    p_run = sub.add_parser("run", help="one trajectory with full artifacts")
    common(p_run, config_required=True)
    p_run.set_defaults(func=cmd_run)

    p_mc = sub.add_parser("montecarlo", help="batch trials against closed forms")
    common(p_mc, config_required=True)
    p_mc.set_defaults(func=cmd_montecarlo)

    p_v = sub.add_parser("verify", help="invariant suite over bundled configs")
    common(p_v, config_required=False)
    p_v.set_defaults(func=cmd_verify)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except InvariantBreach as exc:
        print(str(exc), file=sys.stderr)
        return 2
    except SimulationError as exc:
        print(f"invariant breach: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
