"""
Finding the margin with a gain sweep
====================================

The generator gain is swept from high to low with a saturating amplifier and
a little receiver noise. Above the margin the loop runs at full power; below
it only noise remains, so the measured efficiency drops sharply at the
predicted gain.
"""

# %%
import numpy as np

from retrowpt import gain_sweep, marginal_gain_db, subblock
from retrowpt.channels import embed_singular_values

S, part = embed_singular_values([0.6, 0.8], seed=5)
t = subblock(S, part.rx_active, part.tx_active)
grid = np.arange(12.0, -0.01, -0.25)
res = gain_sweep(
    t, 1.0, grid, noise_power=1e-6, saturation=1.0, measurement_floor=1e-4,
    steps_per_point=2000, discard=1000, max_workers=4,
)
print(f"predicted margin {marginal_gain_db(t):.3f} dB, detected {res.transition_gain_db} dB")

# %%
for p in res.points[::4]:
    print(f"{p.gain_db:6.2f} dB  eff {p.eff_mean:.4f}  {p.label}")

# %%
# Far above the margin the soft limiter flattens the drive towards equal
# element amplitudes, which pulls it off the optimal beam.
try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots()
    ax.plot([p.gain_db for p in res.points], [p.eff_mean for p in res.points], ".-")
    ax.axvline(res.predicted_gain_db, ls="--", c="k")
    ax.set_xlabel("gain (dB)")
    ax.set_ylabel("mean efficiency")
    fig.savefig("gain_sweep.png", dpi=120)
except ImportError:
    pass
