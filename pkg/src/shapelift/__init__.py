"""Certifiably optimal 3D deformable-shape and pose recovery from 2D
landmarks.

Pipeline: normalize -> eliminate_translation -> solve_centered (SOS
relaxation + rounding + certificate) -> denormalize; shape_sharp wraps
the certifiable solve in a graduated non-convexity loop for outlier
robustness.
"""

from .model import (DeformableModel, Observation, Pose, Reconstruction,
                    coeff_error, geodesic_rotation_error, shape_error)
from .preprocess import (CenteredProblem, DegenerateWeightsError,
                         denormalize, eliminate_translation, normalize,
                         recover_translation)
from .poly import (PolyProgram, SparsePoly, bound_constraints,
                   build_objective, build_program,
                   check_archimedean_identity, objective_support,
                   objective_value, so3_constraints)
from .relax import (BasisSpec, InfeasibleStructureError, SdpProblem,
                    assemble_sdp, build_basis, dump_sdp, support_union)
from .sdp import SdpSettings, SdpSolution, solve
from .certify import (Certificate, CertifySettings,
                      ExtractionDegenerateError, ProjectionDegenerateError,
                      certify, extract_candidate, project_coeffs,
                      project_rotation, solve_centered)
from .robust import (GncSettings, GncState, gnc_objective, gnc_surrogate,
                     residuals, shape_sharp, weight_update)
from .bench import (GroundTruth, SchemaError, SynthConfig, TrialRecord,
                    generate, load_model, load_observation, load_result,
                    reconstruct, run_trials, save_model, save_observation,
                    save_result)

__version__ = "0.1.0"
