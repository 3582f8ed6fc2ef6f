"""Anatomy of one chance-constrained dose-search step.

Uses a transparent stand-in predictor (symptom risk rises when the
planned dose drops below a known requirement) so every candidate's
usage, worst-case violation and score can be eyeballed.  Shows the
enumeration over the 27 three-day action sequences, the quantile
tightening, and the tie-breaking toward parsimony.
"""

import numpy as np

from ppidose.mpc import HistoryWindow, MpcConfig, normal_quantile, solve

config = MpcConfig(t_days=3, j_scenarios=3, lam=8.0, theta=5.0)
print(f"confidence p={config.p} -> quantile beta={config.beta:.4f} "
      f"(check: {normal_quantile(config.p):.4f})")

DOSE_NEED = 0.22  # below this the (fake) patient starts to flare


def stub_predictor(hist_s, hist_m, hist_d, future_meals, future_doses, rng):
    steps = future_meals.shape[0]
    daily = future_doses[::24]
    mu = np.empty((steps, 2))
    for day, dose in enumerate(daily):
        flare = 12.0 * max(0.0, DOSE_NEED - dose)
        mu[day * 24:(day + 1) * 24, 0] = 3.0 + flare       # reflux
        mu[day * 24:(day + 1) * 24, 1] = 2.0 + 0.3 * dose  # digestion
    sigma = np.full((steps, 2), 0.25)
    return mu, sigma


def quiet_scenarios(j, horizon_days, rng):
    return np.tile(np.zeros(horizon_days * 24), (j, 1))


history = HistoryWindow(symptoms=np.full((72, 2), 3.0),
                        meals=np.zeros(72),
                        doses=np.tile(np.r_[0.3, np.zeros(23)], 3))

decision = solve(history, stub_predictor, quiet_scenarios, config,
                 np.random.default_rng(0))

names = {0: "dec", 1: "keep", 2: "inc"}
print(f"\ncurrent dose 0.30, patient needs >= {DOSE_NEED}; scored "
      f"{len(decision.plans)} candidates:")
print("actions          doses                 usage   worst_viol  score")
for plan in sorted(decision.plans, key=lambda p: p.score)[:8]:
    acts = "-".join(names[a] for a in plan.actions)
    doses = " ".join(f"{d:.3f}" for d in plan.doses)
    print(f"{acts:15s}  {doses:20s}  {plan.usage:.3f}   {plan.worst_violation:8.3f}"
          f"  {plan.score:.3f}")

chosen = "-".join(names[a] for a in decision.plan.actions)
print(f"\nchosen plan: {chosen}; next-day dose {decision.u_apply[0]:.3f} "
      f"(applied as a morning bolus, rest of the plan is discarded)")
print(f"scenario-mean feasibility of the mean forecast: "
      f"{decision.mean_feasible_frac:.2f}")
