"""Memory-saving Loewner-framework model reduction.

Frequency-response data are partitioned into left/right point sets, the
Loewner pencil is represented implicitly through an HSS approximation of
its Cauchy kernel, and a reduced descriptor model is obtained from a
matrix-free partial SVD. A dense path serves as reference.
"""

from .data import (
    DatasetError,
    FrequencyDataset,
    SyntheticSystem,
    generate_synthetic,
    load_dataset,
    load_system,
    sample_system,
    save_dataset,
    save_system,
)
from .dense import DENSE_LIMIT, DenseLimitError, DensePencil, build_dense, build_dense_hadamard, full_svd_reduce
from .hss import ClusterTree, HssCauchy, build_hss_cauchy, hss_apply, hss_apply_adjoint, hss_rank
from .model import IllConditionedError, ReducedModel, eval_tf, freqresp, h2_error, load_model, save_model
from .operator import LoewnerOperator, inexactness_bound, op_apply, op_apply_adjoint, order_heuristic
from .partition import PartitionedData, PartitionKind, partition, realify
from .pipeline import FitResult, fit
from .svd import SvdResult, partial_svd, reduce

__version__ = "0.1.0"
