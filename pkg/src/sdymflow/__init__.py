"""Self-dual Yang-Mills fields from twistor transition matrices.

The pipeline: ADHM data -> patching matrix on the spectral circle ->
Riemann-Hilbert (Birkhoff) splitting -> self-dual SU(2) connection.
On top of that sit the non-local symmetry flows and the moduli-flow
classifier.
"""

from sdymflow.adhm import (
    ADHMData,
    OneInstantonParams,
    PatchingField,
    one_instanton_data,
    patching_matrix,
)
from sdymflow.deform import ADHMFamily, classify_flow, tangent_generator
from sdymflow.gauge import (
    GridSpec,
    action_integral,
    effective_scale,
    reconstruct_connection,
    sd_residual,
)
from sdymflow.geometry import INF_POINT, AnnulusSpec, R4Point
from sdymflow.rhsplit import LoopMatrix, j_function, split_line
from sdymflow.symmetry import TwistorPoly, g_flow_exp, integrate_flow

__version__ = "0.1.0"

__all__ = [
    "ADHMData",
    "ADHMFamily",
    "AnnulusSpec",
    "GridSpec",
    "INF_POINT",
    "LoopMatrix",
    "OneInstantonParams",
    "PatchingField",
    "R4Point",
    "TwistorPoly",
    "action_integral",
    "classify_flow",
    "effective_scale",
    "g_flow_exp",
    "integrate_flow",
    "j_function",
    "one_instanton_data",
    "patching_matrix",
    "reconstruct_connection",
    "sd_residual",
    "split_line",
    "tangent_generator",
]
