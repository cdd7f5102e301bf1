"""descrank: rank and aggregate zero-shot label descriptions.

Precomputed sentence embeddings plus label-description sets become per-set
categorical predictions; treating each description set as one annotator, an
annotator-competence model then ranks the sets without gold labels and
aggregates their columns into a single output, alongside classical baselines.
"""

__version__ = "0.1.0"

from .core import (
    MISSING,
    DescriptionSet,
    EmbeddingSet,
    GoldLabels,
    LabelSpace,
    PredictionMatrix,
    ValidationResult,
    Violation,
    validate_matrix,
)
from .mace import (
    EmConfig,
    MaceModel,
    cell_likelihood,
    decode,
    fit_em,
    log_marginal_likelihood,
    rank_by_theta,
)
from .metrics import (
    AnnotatorRow,
    KappaResult,
    RankingReport,
    SpearmanResult,
    cohen_kappa,
    kappa_scores,
    macro_f1,
    majority_vote,
    ranking_report,
    spearman_rho,
)
from .pipeline import ExperimentConfig, run_pipeline
from .simulate import SyntheticBundle, sample
from .zeroshot import (
    PatternGrid,
    PredictionResult,
    SimilarityRow,
    cosine,
    embedding_key,
    expand_patterns,
    predict_matrix,
    softmax_predict,
)

__all__ = [
    "__version__",
    "MISSING",
    "LabelSpace",
    "PredictionMatrix",
    "GoldLabels",
    "DescriptionSet",
    "EmbeddingSet",
    "Violation",
    "ValidationResult",
    "validate_matrix",
    "SimilarityRow",
    "PatternGrid",
    "PredictionResult",
    "cosine",
    "softmax_predict",
    "predict_matrix",
    "expand_patterns",
    "embedding_key",
    "EmConfig",
    "MaceModel",
    "cell_likelihood",
    "log_marginal_likelihood",
    "fit_em",
    "decode",
    "rank_by_theta",
    "KappaResult",
    "SpearmanResult",
    "AnnotatorRow",
    "RankingReport",
    "majority_vote",
    "cohen_kappa",
    "kappa_scores",
    "macro_f1",
    "spearman_rho",
    "ranking_report",
    "SyntheticBundle",
    "sample",
    "ExperimentConfig",
    "run_pipeline",
]
