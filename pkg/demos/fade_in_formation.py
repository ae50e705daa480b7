"""Staged formation: a reduction picks one site, then the pulse fades in.

With formation mode "staged" the chosen conscious state starts as a single
occupied grid site and widens by at most neighbor_radius sites per step
toward the configured Gaussian, keeping unit norm throughout. The printout
samples the occupied-site count on a log-ish schedule.
"""

from importlib import resources

from pulsecollapse import load_config
from pulsecollapse.scenarios import run_fade_in, simulate_trajectory


def main():
    ref = resources.files("pulsecollapse").joinpath("configs", "fade_in.yaml")
    with resources.as_file(ref) as path:
        cfg = load_config(str(path))

    out = simulate_trajectory(cfg, trial=0)
    occ = out.extras["occupied_counts"]
    stages = out.extras["formation_stages"]
    picks = sorted({0, 1, 2, 4, 8, 16, 32, 64, len(occ) - 1} & set(range(len(occ))))
    print("step  occupied  stage")
    for i in picks:
        print(f"{i:4d}  {occ[i]:8d}  {stages[i]:.4f}")

    s = run_fade_in(cfg).summary
    print()
    print(f"growth per step <= {s['growth_bound']} sites: max observed {s['max_growth_per_step']}")
    print(f"fitted width {s['sigma_fit']:.4f} vs target {s['target_sigma']:.4f} "
          f"({100 * s['width_rel_err']:.2f}% off)")
    print(f"worst norm error during formation: {s['max_formation_norm_err']:.3e}")


if __name__ == "__main__":
    main()
