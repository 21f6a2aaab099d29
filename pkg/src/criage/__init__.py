"""Adversarial graph edits for knowledge-graph link prediction.

Train embedding models, estimate how single-fact additions/removals change a
target prediction after retraining, search for the most damaging edit, and
run the fidelity / attack / rule-extraction / error-detection experiments.
"""

from .errors import (
    CriageError,
    DataError,
    DivergenceError,
    EditError,
    NumericalError,
    SingularHessianError,
)
from .kg import Edit, KnowledgeGraph, Triple, add_fact, load_dataset, remove_fact, save_dataset
from .models import (
    DISTMULT,
    TRANSE,
    EmbeddingModel,
    encode,
    load_checkpoint,
    save_checkpoint,
    score,
)
from .train import RankingMetrics, TrainConfig, evaluate_ranking, loss, train

__version__ = "0.1.0"
