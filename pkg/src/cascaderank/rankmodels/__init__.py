from .base import (
    MODEL_KINDS,
    RankModel,
    argsort_ranking,
    rank_candidates,
    standardizer,
    tie_ranks,
)
from .boosting import (
    BoostEnsemble,
    pairwise_hinge_gradient,
    pairwise_hinge_loss,
    train_gbdt,
    train_gbrt,
)
from .conv import CNNModel, CNNNet, train_cnn
from .dataset import RankingDataset, build_dataset, concat_datasets, neutral_segment
from .linear import (
    DEFAULT_RULE_WEIGHTS,
    LinearRankModel,
    RuleModel,
    make_rule_model,
    ranksvm_objective,
    train_ranksvm,
)
from .neural import (
    DNNModel,
    MLP,
    RankNetModel,
    ce_loss_and_grad,
    classifier_score,
    pair_loss_and_grad,
    softmax,
    train_dnn,
    train_ranknet,
)
from .serialize import (
    MODEL_FORMAT,
    STACK_FORMAT,
    load_model,
    model_digest,
    model_from_dict,
    model_to_dict,
    save_model,
)
from .tree import RegressionTree, fit_tree

__all__ = [
    "MODEL_KINDS",
    "MODEL_FORMAT",
    "STACK_FORMAT",
    "RankModel",
    "RegressionTree",
    "BoostEnsemble",
    "LinearRankModel",
    "RuleModel",
    "RankNetModel",
    "DNNModel",
    "CNNModel",
    "CNNNet",
    "MLP",
    "DEFAULT_RULE_WEIGHTS",
    "RankingDataset",
    "build_dataset",
    "concat_datasets",
    "neutral_segment",
    "fit_tree",
    "train_gbdt",
    "train_gbrt",
    "train_ranksvm",
    "train_ranknet",
    "train_dnn",
    "train_cnn",
    "make_rule_model",
    "classifier_score",
    "softmax",
    "ce_loss_and_grad",
    "pair_loss_and_grad",
    "pairwise_hinge_loss",
    "pairwise_hinge_gradient",
    "ranksvm_objective",
    "argsort_ranking",
    "rank_candidates",
    "tie_ranks",
    "standardizer",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
    "model_digest",
]
