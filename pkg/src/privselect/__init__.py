"""Pick the perturbed release of a tabular dataset with the highest fuzzy index."""

__version__ = "0.1.0"

from .dataset import (  # noqa: E402
    Dataset,
    SplitPlan,
    load_csv,
    make_blobs,
    minmax_to_unit,
    stratified_folds,
    write_csv,
    zscore_normalize,
)
from .fis import FISModel, default_model, fuzzy_index, load_fis_config  # noqa: E402
from .orchestrator import (  # noqa: E402
    EvaluationReport,
    PerturbationSelector,
    PoolConfig,
    evaluate_pool,
    release_loop,
    select_best,
)
from .perturbation import (  # noqa: E402
    PerturbedInstance,
    additive_noise,
    geometric_perturb,
    laplace_perturb,
    random_orthogonal,
    rotation_perturb,
)

__all__ = [
    "Dataset",
    "EvaluationReport",
    "FISModel",
    "PerturbationSelector",
    "PerturbedInstance",
    "PoolConfig",
    "SplitPlan",
    "additive_noise",
    "default_model",
    "evaluate_pool",
    "fuzzy_index",
    "geometric_perturb",
    "laplace_perturb",
    "load_csv",
    "load_fis_config",
    "make_blobs",
    "minmax_to_unit",
    "random_orthogonal",
    "release_loop",
    "rotation_perturb",
    "select_best",
    "stratified_folds",
    "write_csv",
    "zscore_normalize",
]
