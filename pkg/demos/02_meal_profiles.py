"""Randomized three-meal intake profiles and MPC meal scenarios.

Each day gets breakfast/lunch/dinner Gaussian pulses with jittered
timing, amplitude and width; the dose search later samples bundles of
such profiles as future-meal scenarios.
"""

import numpy as np

import ppidose as pp

rng = np.random.default_rng(0)
pulses, profile = pp.sample_profile(5, rng)

print("pulses of day 0:")
for pulse in pulses[:3]:
    print(f"  amplitude={pulse.amplitude:.2f}  peak at hour "
          f"{24 * pulse.center:.2f}  width {24 * pulse.spread * 60:.0f} min")

daily_sums = profile.reshape(5, 24).sum(axis=1)
print(f"\nhourly profile: {profile.shape[0]} samples, "
      f"max={profile.max():.2f}, per-day intake sums {np.round(daily_sums, 2)}")

scenarios = pp.sample_scenarios(5, 3, np.random.default_rng(1))
print(f"\n5 sampled 3-day scenarios, shape {scenarios.shape}; "
      f"per-scenario means {np.round(scenarios.mean(axis=1), 3)}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, (top, bottom) = plt.subplots(2, 1, figsize=(11, 5), sharex=False)
    top.plot(np.arange(profile.shape[0]) / 24.0, profile, lw=1)
    top.set_ylabel("meal intensity")
    top.set_xlabel("day")
    top.set_title("one sampled 5-day intake profile")
    for scen in scenarios:
        bottom.plot(np.arange(scen.shape[0]) / 24.0, scen, lw=0.8, alpha=0.7)
    bottom.set_ylabel("meal intensity")
    bottom.set_xlabel("day")
    bottom.set_title("five 3-day scenarios for the dose search")
    fig.tight_layout()
    fig.savefig("demo02_meal_profiles.png", dpi=120)
    print("saved demo02_meal_profiles.png")
except ImportError:
    print("(matplotlib not available; skipping the plot)")
