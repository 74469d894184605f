"""Natural image matting through inter-pixel information flows.

The toolkit estimates alpha mattes from an image/trimap pair by combining
four complementary pixel-to-pixel affinities into one sparse linear system,
regularizes mattes produced by other tools, and recovers the unmixed layer
colors needed for compositing.
"""

from .colors import composite, estimate_colors, snap_alpha
from .core import (BACKGROUND, EmptyRegionError, FOREGROUND, MattingError,
                   Params, SolverError, UNKNOWN)
from .flows import (KtoUFlow, build_cm_flow, build_intra_u_flow,
                    build_ktou_flow, build_local_flow)
from .solver import (PipelineResult, SolveReport, assemble_flow_laplacian,
                     matting_energy, regularize_matte, run_pipeline,
                     run_regularization, solve_e1, solve_e2)
from .trimming import (TransparencyDecision, classify_transparency, edge_trim,
                       patch_trim)

__version__ = "0.1.0"

__all__ = [
    "BACKGROUND", "FOREGROUND", "UNKNOWN",
    "MattingError", "EmptyRegionError", "SolverError",
    "Params",
    "KtoUFlow", "build_cm_flow", "build_ktou_flow", "build_intra_u_flow",
    "build_local_flow",
    "TransparencyDecision", "classify_transparency", "edge_trim", "patch_trim",
    "PipelineResult", "SolveReport", "assemble_flow_laplacian",
    "matting_energy", "regularize_matte", "run_pipeline",
    "run_regularization", "solve_e1", "solve_e2",
    "composite", "estimate_colors", "snap_alpha",
    "__version__",
]
