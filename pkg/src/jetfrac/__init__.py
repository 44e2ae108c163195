"""jetfrac: Griffith-type free-discontinuity energies on discrete jet fields.

The package evaluates a nonlinear second-gradient brittle energy, its
relaxation, and the small-strain Griffith energy on fields represented by
per-cell affine jets with declared jump facets; extracts piecewise-rigid
structure (coarea partition, rotation fitting, rescaled displacements) with
quantitative certificates; builds recovery families for the limsup bound; and
minimizes both energies over declared crack families at desk scale.
"""

from .energy import (
    DENSITIES,
    EnergyModel,
    EnergyReport,
    ModelError,
    QuadraticForm,
    QuarticWell,
    SquaredDistanceWell,
    expansion_remainder,
    hessian_quadratic_form,
    linear_energy,
    make_density,
    nonlinear_energy,
    relaxed_energy,
)
from .fields import (
    BoundaryDatum,
    DisplacementJet,
    FieldSpecError,
    FieldValidationError,
    Grid,
    JetField,
    PiecewiseSpec,
    SmoothPiece,
    ToleranceConfig,
    curvature_tolerance,
    sample_displacement,
    sample_field,
    second_gradient,
    surface_measure,
    validate_field,
    zero_boundary,
)
from .linearize import (
    LinearizeError,
    RecoveryFamily,
    build_recovery,
    fjm_identity_check,
    limsup_check,
    rotation_symmetry_bound,
)
from .minimize import (
    CrackFamily,
    MinimizationResult,
    MinimizeError,
    SolverOptions,
    minima_convergence_sweep,
    minimize_over_cracks,
    select_best,
    solve_crack_family,
    solve_fixed_crack_linear,
    solve_fixed_crack_nonlinear,
)
from .presets import single_label
from .rigidity import (
    BoundConstants,
    CaccioppoliPartition,
    RigidityCertificate,
    RigidityError,
    certify_rigidity,
    certify_sweep,
    coarea_partition,
    compare_limit_strains,
    fit_rotations,
    partition_from_labels,
    piecewise_rotate,
    rescale_displacement,
)
from .rotations import nearest_rotation, rotation_2d, so_distance2
from .scenario import Scenario, ScenarioError, parse_scenario, parse_scenario_text

__version__ = "0.1.0"

__all__ = [
    "BoundConstants",
    "BoundaryDatum",
    "CaccioppoliPartition",
    "CrackFamily",
    "DENSITIES",
    "DisplacementJet",
    "EnergyModel",
    "EnergyReport",
    "FieldSpecError",
    "FieldValidationError",
    "Grid",
    "JetField",
    "LinearizeError",
    "MinimizationResult",
    "MinimizeError",
    "ModelError",
    "PiecewiseSpec",
    "QuadraticForm",
    "QuarticWell",
    "RecoveryFamily",
    "RigidityCertificate",
    "RigidityError",
    "Scenario",
    "ScenarioError",
    "SmoothPiece",
    "SolverOptions",
    "SquaredDistanceWell",
    "ToleranceConfig",
    "build_recovery",
    "certify_rigidity",
    "certify_sweep",
    "coarea_partition",
    "compare_limit_strains",
    "curvature_tolerance",
    "expansion_remainder",
    "fit_rotations",
    "fjm_identity_check",
    "hessian_quadratic_form",
    "limsup_check",
    "linear_energy",
    "make_density",
    "minima_convergence_sweep",
    "minimize_over_cracks",
    "nearest_rotation",
    "nonlinear_energy",
    "parse_scenario",
    "parse_scenario_text",
    "partition_from_labels",
    "piecewise_rotate",
    "relaxed_energy",
    "rescale_displacement",
    "rotation_2d",
    "rotation_symmetry_bound",
    "sample_displacement",
    "sample_field",
    "second_gradient",
    "select_best",
    "single_label",
    "so_distance2",
    "solve_crack_family",
    "solve_fixed_crack_linear",
    "solve_fixed_crack_nonlinear",
    "surface_measure",
    "validate_field",
    "zero_boundary",
]
