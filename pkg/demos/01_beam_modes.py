"""
Beam modes of a synthetic channel
=================================

A lossless reciprocal channel is built with chosen transmission singular
values. The efficiency of any generator drive is a weighted average of the
mode efficiencies, so the dominant mode is the best possible drive.
"""

# %%
import numpy as np

from retrowpt import beam_modes, decompose_input, efficiency, subblock, weighted_efficiency
from retrowpt.channels import embed_singular_values

S, part = embed_singular_values([0.3, 0.6, 0.8], seed=7)
t = subblock(S, part.rx_active, part.tx_active)
modes = beam_modes(t)
print("mode efficiencies:", np.round(modes.eigenvalues, 6))
print("optimal drive a_max:", np.round(modes.a_max, 4))

# %%
# A random drive splits its power over the modes; the Rayleigh quotient
# and the weighted average agree.
rng = np.random.default_rng(1)
v = rng.standard_normal(3) + 1j * rng.standard_normal(3)
w = decompose_input(modes, v)
print("mode power shares:", np.round(np.abs(w) ** 2 / np.vdot(v, v).real, 4))
print(f"efficiency {efficiency(t, v):.6f} = weighted {weighted_efficiency(w, modes.eigenvalues):.6f}")

# %%
# No drive beats the dominant mode.
trials = rng.standard_normal((3, 20000)) + 1j * rng.standard_normal((3, 20000))
best = max(efficiency(t, trials[:, j]) for j in range(trials.shape[1]))
print(f"best of 20000 random drives {best:.6f} <= xi_max {modes.xi_max:.6f}")
