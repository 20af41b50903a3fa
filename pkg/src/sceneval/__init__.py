"""sceneval: split construction and scene/object-wise evaluation metrics for
conditional scene generation, computed over precomputed feature embeddings."""

__version__ = "0.1.0"

from .errors import NumericalError, SceneEvalError, ValidationError
from .store import (
    ClassTable,
    Conditioning,
    EmbeddingRecord,
    EmbeddingSet,
    ObjectInstance,
    concat_sets,
    conditioning_index,
    filter_set,
    load_class_table,
    load_conditionings,
    load_embedding_set,
    make_embedding_set,
    save_class_table,
    save_conditionings,
    save_embedding_set,
)
from .manifold import (
    DEFAULT_K,
    Manifold,
    MembershipResult,
    compute_radii,
    consistency,
    membership,
    precision,
    recall,
)
from .frechet import (
    GaussianStats,
    fid,
    fid_from_stats,
    fit_gaussian,
    jacobi_eigh,
    sqrtm_product_trace,
)
from .diversity import (
    PairwiseDistanceTable,
    ds_from_embeddings,
    ds_from_table,
    load_distance_table,
)
from .labelmetrics import (
    mean_f1,
    object_accuracy,
    per_class_report,
    top_k_classes,
)
from .splits import (
    ClassHistogram,
    SplitAssignment,
    class_histogram,
    long_tail_fraction,
    partition,
    subsample_matched,
    validate_assignment,
)
from .catmerge import (
    ConfusionMatrix,
    MergeProposal,
    RuleConfig,
    apply_merge_map_conditionings,
    apply_merge_map_records,
    one_nn_confusion,
    propose_merges,
)
from .report import MetricReport, MetricValue, aggregate, run_panel
