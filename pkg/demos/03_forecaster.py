"""Train a small symptom forecaster and inspect its MC-dropout uncertainty.

Runs a scaled-down version of the foundation-training stage (fewer
patients, shorter windows) so it finishes in under a minute, then draws
stochastic forward passes on one held-out window to show the predictive
mean and spread.
"""

import numpy as np

from ppidose.config import AppConfig, BnnConfig, HarnessConfig
from ppidose.forecast import predict_mc
from ppidose.forecast.model import denormalize_scores
from ppidose.harness import generate_foundation_dataset, train_foundation

config = AppConfig(
    bnn=BnnConfig(hidden_size=32, t_hist=48, t_fut=48, max_epochs=120,
                  patience=25, batch_size=16),
    harness=HarnessConfig(foundation_patients=4, foundation_days=30),
)

episodes, windows = generate_foundation_dataset(4, 30, seed=1, config=config)
print(f"dataset: {len(windows)} windows from {len(episodes)} patients")

weights, history = train_foundation(windows, config, seed=1)
print(f"trained {len(history.val_loss)} epochs; "
      f"best validation MSE {min(history.val_loss):.5f} "
      f"(~{9 * np.sqrt(min(history.val_loss)):.2f} score units)")

# forecast the last window of the last patient
hist, inputs, target = windows.hist[-1], windows.inputs[-1], windows.targets[-1]
dist = predict_mc(weights, hist, inputs, m=200, rng=np.random.default_rng(5))
true = denormalize_scores(target)

print("\nforecast vs truth (digestion channel, every 6 h):")
print(" h | mean +- sd   | true")
for h in range(0, 48, 6):
    print(f"{h:3d} | {dist.mu[h, 1]:4.1f} +- {dist.sigma[h, 1]:4.2f} | {true[h, 1]:4.0f}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(11, 3.5), sharey=True)
    hours = np.arange(48)
    for ch, (ax, name) in enumerate(zip(axes, ("reflux", "digestion"))):
        ax.fill_between(hours, dist.mu[:, ch] - 2 * dist.sigma[:, ch],
                        dist.mu[:, ch] + 2 * dist.sigma[:, ch],
                        alpha=0.3, color="gray", label="mean +- 2 sd")
        ax.plot(hours, dist.mu[:, ch], "b-", lw=1.2, label="predicted mean")
        ax.step(hours, true[:, ch], "r--", lw=1, label="true report")
        ax.set_title(name)
        ax.set_xlabel("hours ahead")
    axes[0].set_ylabel("score")
    axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig("demo03_forecaster.png", dpi=120)
    print("\nsaved demo03_forecaster.png")
except ImportError:
    print("\n(matplotlib not available; skipping the plot)")
