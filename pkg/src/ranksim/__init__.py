"""Rank similarity filters: rank-order codebooks for transforms and classification."""

from .classifiers import (
    RankSimilarityClassifier,
    RankSimilarityProbabilisticClassifier,
    RSCModel,
    RSPCModel,
    predict,
    predict_proba,
    rsc_fit,
    rsc_predict,
    rspc_fit,
    set_labels,
)
from .confusion import (
    Feature1D,
    build_confusion_map,
    confusion,
    consecutive_map,
    discriminability,
    kl_divergence,
    membership_probability,
    wasserstein_1d,
)
from .filters import FilterBank, TrainConfig, assign, auto_n_filters, fit, initialize_filters, spread_filters
from .ranking import apply_distribution, l1_normalize, numeric_rank
from .transform import RankSimilarityTransform, TransformOutput, raw_similarity, transform

__version__ = "0.1.0"
