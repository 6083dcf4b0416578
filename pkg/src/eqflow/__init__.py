"""Equivariant flows for symmetric function approximation.

Permutation-group machinery, equivariant control families, discretized
flow maps with gradients, a training harness for invariant regression,
and property checkers for the symmetry/approximation structure.
"""

from .estimator import FlowRegressor
from .flows import (
    FlowBlowUpError,
    FlowResult,
    Schedule,
    euler_step,
    flow_vjp,
    integrate,
    inverse_integrate,
    refinement_study,
    rk4_step,
)
from .layers import (
    ACTIVATIONS,
    CATALOG,
    ControlLayer,
    circular_convolution,
    coor_representative,
    declared_group_spec,
    evaluate,
    layer_vjp,
    make_layer,
    random_layer,
)
from .models import Model, TrainConfig, build_model, forward, loss, train
from .perm_groups import (
    PermGroup,
    Permutation,
    Transversal,
    compose,
    generate_group,
    identity,
    in_cross_section,
    inverse,
    is_g_distinct,
    is_general_position,
    locate_cross_section,
    parse_group_spec,
    partition_check,
    product_permutation_group,
    right_transversal,
    symmetric_group,
    translation_group_1d,
    translation_group_nd,
)
from .reports import VerificationReport
from .targets import TargetFunction, build_target, group_average, register_targets
from .wells import (
    ScalarFunction,
    SymmetricWellCandidate,
    check_1d_well,
    check_symmetric_invariant_well,
    sym_well_coordwise,
    sym_well_sum,
    well_bump,
)

__version__ = "0.1.0"

__all__ = [
    "ACTIVATIONS",
    "CATALOG",
    "ControlLayer",
    "FlowBlowUpError",
    "FlowRegressor",
    "FlowResult",
    "Model",
    "PermGroup",
    "Permutation",
    "ScalarFunction",
    "Schedule",
    "SymmetricWellCandidate",
    "TargetFunction",
    "TrainConfig",
    "Transversal",
    "VerificationReport",
    "build_model",
    "build_target",
    "check_1d_well",
    "check_symmetric_invariant_well",
    "circular_convolution",
    "compose",
    "coor_representative",
    "declared_group_spec",
    "euler_step",
    "evaluate",
    "flow_vjp",
    "forward",
    "generate_group",
    "group_average",
    "identity",
    "in_cross_section",
    "integrate",
    "inverse",
    "inverse_integrate",
    "is_g_distinct",
    "is_general_position",
    "layer_vjp",
    "locate_cross_section",
    "loss",
    "make_layer",
    "parse_group_spec",
    "partition_check",
    "product_permutation_group",
    "random_layer",
    "refinement_study",
    "register_targets",
    "right_transversal",
    "rk4_step",
    "sym_well_coordwise",
    "sym_well_sum",
    "symmetric_group",
    "train",
    "translation_group_1d",
    "translation_group_nd",
    "well_bump",
]
