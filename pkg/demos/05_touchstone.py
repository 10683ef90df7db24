"""
Touchstone interchange
======================

A synthetic 12-port is written as ``.s12p`` in three value formats and read
back; the optimal-beam analysis is unchanged by the trip through text.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np

from retrowpt import beam_modes, subblock
from retrowpt.channels import random_lossless_reciprocal
from retrowpt.touchstone import from_scattering_matrix, read_touchstone_file, to_scattering_matrix, write_touchstone_file

S = random_lossless_reciprocal(12, seed=3)
ref = beam_modes(subblock(S, [1, 2], [7, 8])).xi_max

with tempfile.TemporaryDirectory() as tmp:
    for fmt in ("RI", "MA", "DB"):
        path = write_touchstone_file(from_scattering_matrix(S, fmt), Path(tmp) / f"board_{fmt}.s12p")
        back = to_scattering_matrix(read_touchstone_file(path), 2.4e9, 1e6)
        err = np.max(np.abs(back.s - S.s))
        xi = beam_modes(subblock(back, [1, 2], [7, 8])).xi_max
        print(f"{fmt}: {path.stat().st_size} bytes, max |dS| {err:.1e}, xi_max {xi:.12f} (ref {ref:.12f})")
