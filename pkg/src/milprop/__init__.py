"""milprop: transfer group-level labels to the instances composing the groups.

Train a logistic scorer from group scores alone by combining an RBF-weighted
smoothness penalty over instance predictions with a group-mean fidelity
penalty, then score, classify and attribute at the instance level.
"""
from .data import (
    Dataset,
    DataError,
    Group,
    Instance,
    build_dataset,
    eval_true_labels,
    filter_groups,
    load_dataset,
    load_groups,
    load_instances,
    stats,
    validate,
    write_groups,
    write_instances,
)
from .inference import (
    AttributionReport,
    InstancePrediction,
    MetricsReport,
    NeutralBand,
    attribute,
    auc,
    calibrate_band,
    classify,
    classify_group,
    evaluate_groups,
    evaluate_instances,
    group_score,
    predict_instances,
    score_instances,
    score_vector,
)
from .objective import (
    Batch,
    Theta,
    gradient,
    group_term,
    lambda_from_alpha,
    make_batch,
    manifold_term,
    objective,
    predict_score,
    predict_scores,
)
from .similarity import (
    SimilarityConfig,
    SimilarityGraph,
    build_graph,
    similarity,
)
from .synth import SynthConfig, generate, oracle_gradient, oracle_objective
from .training import (
    Hyperparams,
    Model,
    TrainSummary,
    epoch_minibatches,
    load_model,
    save_model,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AttributionReport",
    "Batch",
    "DataError",
    "Dataset",
    "Group",
    "Hyperparams",
    "Instance",
    "InstancePrediction",
    "MetricsReport",
    "Model",
    "NeutralBand",
    "SimilarityConfig",
    "SimilarityGraph",
    "SynthConfig",
    "Theta",
    "TrainSummary",
    "attribute",
    "auc",
    "build_dataset",
    "build_graph",
    "calibrate_band",
    "classify",
    "classify_group",
    "epoch_minibatches",
    "eval_true_labels",
    "evaluate_groups",
    "evaluate_instances",
    "filter_groups",
    "generate",
    "gradient",
    "group_score",
    "group_term",
    "lambda_from_alpha",
    "load_dataset",
    "load_groups",
    "load_instances",
    "load_model",
    "make_batch",
    "manifold_term",
    "objective",
    "oracle_gradient",
    "oracle_objective",
    "predict_instances",
    "predict_score",
    "predict_scores",
    "save_model",
    "score_instances",
    "score_vector",
    "similarity",
    "stats",
    "train",
    "validate",
    "write_groups",
    "write_instances",
]
