"""S-parameter analysis of both-sides retrodirective wireless power transfer.

Submodules: :mod:`network` (S-matrix types), :mod:`touchstone` (.sNp I/O),
:mod:`eigenbeam` (efficiency and beam modes), :mod:`channels` (synthetic
channels), :mod:`loop` (feedback-loop dynamics), :mod:`experiment`
(measurement processing) and :mod:`cli`.
"""
__version__ = "0.1.0"

from .network import (
    PortPartition,
    ScatteringMatrix,
    fraunhofer_distance,
    is_lossless,
    is_reciprocal,
    subblock,
)
from .eigenbeam import (
    BeamModeSet,
    beam_modes,
    decompose_input,
    efficiency,
    hermitian_eigendecompose,
    max_efficiency,
    weighted_efficiency,
)
from .channels import embed_singular_values, random_lossless_reciprocal
from .loop import (
    LoopConfig,
    LoopState,
    classify_stability,
    dominant_projection,
    gain_sweep,
    marginal_gain,
    marginal_gain_db,
    simulate,
    step,
    zero_input_response,
)
from .touchstone import parse_touchstone, to_scattering_matrix, write_touchstone
