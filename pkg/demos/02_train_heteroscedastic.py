#!/usr/bin/env python3
"""Training the evidential network on data with input-dependent noise.

The generator is y ~ N(x, (0.1 + |x|)^2) on x in [-1, 1]: the further from
zero, the noisier the target. A calibrated model should (a) recover the
noise profile in its aleatoric uncertainty, (b) cover ~95% of observations
with its 95% intervals, and (c) grow its epistemic uncertainty once we ask
about inputs far outside the training range.
"""

import numpy as np
from scipy import stats

from gustuq import TrainConfig, train_evidential
from gustuq.metrics import picp, pit_values, pitd, prediction_interval

rng = np.random.default_rng(42)
x = rng.uniform(-1, 1, 5000)
true_sd = 0.1 + np.abs(x)
y = x + true_sd * rng.standard_normal(5000)

print("training a single 128-unit layer for 200 epochs ...")
model, log = train_evidential(
    x[:4000], y[:4000], x[4000:], y[4000:],
    hidden_sizes=[128],
    config=TrainConfig(learning_rate=3e-3, batch_size=128, max_epochs=200,
                       patience=200, evidential_coef=0.01, seed=7),
)
print(f"finished {len(log)} epochs; best validation MAE "
      f"{min(e.val_mae for e in log):.3f} (noise floor is about 0.479)")

eval_rng = np.random.default_rng(7)
x_eval = eval_rng.uniform(-1, 1, 2000)
y_eval = x_eval + (0.1 + np.abs(x_eval)) * eval_rng.standard_normal(2000)
dec = model.predict(x_eval)

print("\n=== did it recover the noise profile? ===")
r = np.corrcoef(dec.aleatoric_sd, 0.1 + np.abs(x_eval))[0, 1]
print(f"corr(predicted aleatoric sd, true sd) = {r:.3f}")

print("\n=== is the total uncertainty calibrated? ===")
lo, hi = prediction_interval(dec.mean, dec.total_sd, 0.95)
print(f"PICP at the 95% level: {picp(lo, hi, y_eval):.3f}")
pit = pit_values(dec.mean, dec.total_sd, y_eval)
print(f"PIT uniformity: KS p-value {stats.kstest(pit, 'uniform').pvalue:.3f}")
print(f"PITD skill score (10 bins): {pitd(pit, 10).skill:.3f}")

print("\n=== what happens far from the training data? ===")
for v in (0.0, 1.0, 2.0, 3.0, 4.0):
    d = model.predict(np.array([v]))
    print(f"x={v:3.1f}: aleatoric sd={d.aleatoric_sd[0]:8.3f}   "
          f"epistemic sd={d.epistemic_sd[0]:8.3f}")
print("epistemic uncertainty climbs with distance from the training range,")
print("while the aleatoric part stays tied to the (extrapolated) noise model.")
