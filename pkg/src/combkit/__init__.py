"""Finite-dimensional toolkit for sequential quantum networks.

Labeled tensor algebra, network Choi operators (combs) with their
normalization chain, measuring networks (testers) with the generalized Born
pairing, finite-group covariance and twirling, and covariant network
estimation at desk scale.
"""

from .core import (
    DEFAULT_TOL,
    LabeledOperator,
    NotPSDError,
    SpaceLabel,
    SpaceMismatchError,
    apply_kraus,
    canonical,
    compress_to_support,
    identity,
    max_entangled,
    merge_spaces,
    ops_allclose,
    partial_trace,
    partial_transpose,
    permute_spaces,
    pinv_sqrt,
    psd_sqrt,
    split_space,
    tensor,
    trace_norm,
)
from .comb import (
    ChannelNetwork,
    Comb,
    NetworkChannel,
    as_comb,
    choi_of_channel,
    comb_from_network,
    link_product,
    stinespring,
    validate_deterministic,
    validate_probabilistic,
)
from .tester import (
    POVM,
    Instrument,
    Tester,
    born,
    born_distribution,
    decompose_tester,
    dilate_instrument,
    operational_distance,
    prepare_and_measure_tester,
    tester_from_network,
    validate_tester,
)
from .covariant import (
    CovariantStructure,
    FiniteGroup,
    GroupAction,
    Representation,
    builtin_group,
    check_covariant_comb,
    check_covariant_supermap,
    check_covariant_tester,
    covariant_structure,
    covariant_tester_from_seed,
    cyclic_group,
    dihedral_group,
    klein_group,
    left_action,
    symmetric_group_3,
    twirl_comb,
    twirl_tester,
)
from .estimation import (
    CombFamily,
    CostFunction,
    average_cost,
    character_fidelity_cost,
    delta_error_cost,
    family_from_base,
    frame_alignment_compare,
    n_copy_family,
    optimal_parallel_estimation,
    optimize_covariant_tester,
    parallel_reduction_check,
    worst_case_cost,
)

__version__ = "0.1.0"
