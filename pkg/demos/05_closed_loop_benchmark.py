"""Scaled-down closed-loop benchmark: adaptive dosing vs the fixed regimen.

Runs the whole pipeline (foundation training, per-patient fine-tuning,
baseline calibration, both closed-loop arms) at a reduced scale so it
completes in a few minutes.  For the full desk-scale experiment use the
CLI or the acceptance test suite.
"""

import time

import numpy as np

from ppidose.config import AppConfig, BnnConfig, HarnessConfig
from ppidose.mpc import MpcConfig
from ppidose.harness import run_pipeline

config = AppConfig(
    bnn=BnnConfig(hidden_size=48, t_hist=48, t_fut=48, max_epochs=150,
                  patience=30, batch_size=16),
    mpc=MpcConfig(t_days=2, j_scenarios=3, mc_passes=15),
    harness=HarnessConfig(foundation_patients=5, foundation_days=30,
                          test_patients=3, finetune_days=20,
                          open_loop_days=20, closed_loop_days=20,
                          warmup_days=2),
)

t0 = time.time()
result = run_pipeline(seed=2024, config=config)
print(f"pipeline finished in {time.time() - t0:.0f}s")

print(f"\ncalibrated fixed regimen: {result.calibration.dose:.2f}/day "
      f"(per-patient requirements {result.calibration.requirements})")

print("\nper-patient open-loop forecast quality:")
for pid, ol in result.open_loop.items():
    print(f"  patient {pid}: RMSE reflux={ol.rmse[0]:.3f} "
          f"digestion={ol.rmse[1]:.3f}  (noise floors "
          f"{ol.noise_floor[0]:.3f}/{ol.noise_floor[1]:.3f})")

print("\nclosed-loop arms:")
print("patient  arm    usage   sat_reflux  sat_digestion")
for res in result.results:
    print(f"{res.patient_id:7d}  {res.arm:5s}  {res.usage:5.2f}   "
          f"{res.satisfaction[0]:.3f}       {res.satisfaction[1]:.3f}")

summary = result.summary
print(f"\nmean usage reduction: {100 * summary.mean_usage_reduction:.1f}%")
print(f"worst per-patient satisfaction (adaptive arm): "
      f"{100 * summary.min_satisfaction:.1f}%")
if summary.paper_target_met:
    print("(>= 65% reduction at >= 95% satisfaction)")
