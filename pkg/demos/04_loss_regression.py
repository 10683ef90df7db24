"""
Loss regression over the measured cases
=======================================

Each measured case gives a marginal gain and an efficiency. If the loop
loss is the same for every case, ``20 log10(eta) = L_dB - G_dB`` so the
points fall on a line of slope -1.
"""

# %%
import numpy as np

from retrowpt.experiment import fit_regression, fixed_slope_fit, load_table2, recompute_table, regression_points

cases = load_table2()
pts = regression_points(cases)
free = fit_regression(pts)
fixed = fixed_slope_fit(pts)
print(f"free fit:  slope {free.slope:.4f}, L {free.intercept_db:.3f} dB, R^2 {free.r_squared:.4f}")
print(f"slope -1:  L {fixed.intercept_db:.3f} dB, R^2 {fixed.r_squared:.4f}")

# %%
rows = recompute_table(cases)
worst = max(rows, key=lambda r: abs(r["est_loss_db_calc"] - r["est_loss_db"]))
print(f"largest loss recomputation gap: case {worst['case']}, "
      f"{worst['est_loss_db_calc']:.3f} vs {worst['est_loss_db']}")
print("loss spread (dB):", np.round(np.percentile([c.est_loss_db for c in cases], [0, 50, 100]), 2))
