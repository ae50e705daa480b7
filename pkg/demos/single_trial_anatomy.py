"""Anatomy of one trial: budget, draws, the chosen site, and what survives.

Walks a single seeded trajectory of the overlap observation and prints the
exact arithmetic behind the reduction: the cumulative hit budget the first
uniform is compared against, the site-selection draw, and the surviving
coefficients next to their closed-form reconstruction a_i(t_sc) F_i(u_sc).
"""

from importlib import resources

import numpy as np

from pulsecollapse import load_config
from pulsecollapse.scenarios import build_backbone, simulate_trajectory


def main():
    ref = resources.files("pulsecollapse").joinpath("configs", "observation_overlap.yaml")
    with resources.as_file(ref) as path:
        cfg = load_config(str(path))

    bb = build_backbone(cfg)
    out = simulate_trajectory(cfg, trial=0)
    ev = out.event
    if ev is None:
        print("trial 0 did not reduce (partial ramp); try another trial index")
        return

    u1, u2 = ev.rng_draws
    print(f"seed {cfg.seed}, trial 0")
    print(f"first uniform u1 = {u1:.12f}")
    print(f"budget crosses u1 at t_sc = {ev.t_sc:.6f} "
          f"(final budget {bb.cum_budget[-1]:.6f})")
    print(f"site draw u2 = {u2:.12f} -> site u_sc = {ev.u_sc} "
          f"(coordinate {bb.state0.grid.coord(ev.u_sc):.3f})")
    print(f"norm just before the hit: {ev.pre_norm:.12f}")
    print()

    step = int(np.searchsorted(bb.times, ev.t_sc))
    step = min(step, len(bb.times) - 1)
    print("survivors (label: stored, reconstructed):")
    for col, label in enumerate(bb.ready_ids):
        apparatus_label = [1, 2][col]
        stored = ev.post_coefficients.get(apparatus_label)
        if stored is None:
            continue
        a = bb.coeffs[step, label]
        f = bb.ready_amps[col, ev.u_sc]
        print(f"  {apparatus_label}: {stored:.12f}   {a * f:.12f}")
    print()
    print(f"terms still alive in the final state: "
          f"{[t.apparatus_label for t in out.state.terms if t.coefficient != 0]}")


if __name__ == "__main__":
    main()
