"""Privacy-aware Berrut coded computing over the reals.

Rational-interpolation coded shares with Gaussian privacy masks, a
multi-input secret-sharing simulator, approximate distributed matrix
multiplication, and a mutual-information leakage auditor.
"""

from .codec import (
    DecodingResult,
    MaskSpec,
    Share,
    basis_weights,
    berrut_evaluate,
    decode,
    encode_plain,
    encode_private,
    sample_masks,
    share_from_json,
    share_to_json,
    weight_matrix,
)
from .grid import (
    InterpolationGrid,
    build_grid,
    chebyshev_first_kind,
    chebyshev_second_kind,
    shifted_first_kind,
)
from .matmul import (
    BlockPlan,
    RowPacking,
    assemble_blocks,
    blocked_product,
    coded_product_shares,
    decode_product,
    distributed_product,
    encode_matrix_rows,
    encode_packed,
    plan_blocks,
    worker_multiply,
)
from .privacy import (
    CollusionScenario,
    LeakageReport,
    calibrate_floor,
    interpolation_matrices,
    leakage_bound,
    leakage_curve,
    regularize_covariance,
    rowwise_leakage,
    sampled_worst_case,
    uniform_entropy_bits,
)
from .protocol import (
    AggregateSpec,
    NodeInput,
    RunReport,
    StragglerModel,
    aggregate_rme,
    exact_reference,
    generate_inputs,
    generate_matrix,
    rme,
    run_bss,
    run_bss_dp,
    run_pbss,
)

__version__ = "0.1.0"
