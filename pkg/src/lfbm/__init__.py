"""Latent factor blockmodel for binary relational data.

Couples per-object latent feature factors with hard cluster assignments
and a cluster-interaction block matrix under a Bernoulli-logistic
likelihood, fitted by a minorize-maximize trainer with guaranteed
monotone ascent. Includes a planted-block synthetic generator, link
prediction and clustering metrics, file formats and a CLI.
"""

from .core import (
    DataError,
    EvalReport,
    FitTrace,
    HyperParams,
    LatentState,
    NumericError,
    RelationData,
    SideInfo,
    validate,
)
from .model import (
    FactorSelector,
    MinorizerContext,
    block_kron,
    curvature,
    exact_hessian,
    get_block,
    gradient,
    log_posterior,
    logit,
    minorizer_context,
    minorizer_value,
    pair_logits,
    stable_logit_terms,
    with_block,
)
from .optim import (
    AblationMode,
    SingularCurvatureError,
    SweepSchedule,
    armijo_eta,
    fit,
    init_state,
    mm_step,
    predict,
    reassign_clusters,
)
from .synth import BlockSpec, Split, generate, split, three_cluster_spec
from .metrics import auc, factor_labels, holdout_report, nmi, reconstruct, roc
from .io import (
    load_checkpoint,
    parse_edge_list,
    read_labels,
    read_pairs,
    read_scores,
    read_side_info,
    save_checkpoint,
    write_edge_list,
    write_labels,
    write_scores,
)

__version__ = "0.1.0"

__all__ = [
    "AblationMode",
    "BlockSpec",
    "DataError",
    "EvalReport",
    "FactorSelector",
    "FitTrace",
    "HyperParams",
    "LatentState",
    "MinorizerContext",
    "NumericError",
    "RelationData",
    "SideInfo",
    "SingularCurvatureError",
    "Split",
    "SweepSchedule",
    "armijo_eta",
    "auc",
    "block_kron",
    "curvature",
    "exact_hessian",
    "factor_labels",
    "fit",
    "generate",
    "get_block",
    "gradient",
    "holdout_report",
    "init_state",
    "load_checkpoint",
    "log_posterior",
    "logit",
    "minorizer_context",
    "minorizer_value",
    "mm_step",
    "nmi",
    "pair_logits",
    "parse_edge_list",
    "predict",
    "read_labels",
    "read_pairs",
    "read_scores",
    "read_side_info",
    "reassign_clusters",
    "reconstruct",
    "roc",
    "save_checkpoint",
    "split",
    "stable_logit_terms",
    "three_cluster_spec",
    "validate",
    "with_block",
    "write_edge_list",
    "write_labels",
    "write_scores",
]
