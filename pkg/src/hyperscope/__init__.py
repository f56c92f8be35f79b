"""hyperscope: interactive temporal-hypergraph exploration engine.

Laplacian-regularized link prediction over weighted incidence matrices,
analyst relevance feedback with warm-start fine-tuning and change previews,
matrix seriation, partition hierarchies, a six-level semantic-zoom viewport
service, and a replayable seed-stamped provenance log.
"""

__version__ = "0.1.0"

from ._accel import backend
from .config import EngineConfig
from .engine import DataBundle, Engine, ReplayIncompatibility
from .feedback import (
    Assertion,
    ChangeMatrix,
    FeedbackSet,
    FeedbackTransaction,
    apply_feedback,
    change_matrix,
    fine_tune,
    resolve,
)
from .hierarchy import PartitionTree, flat_tree, mutate, project, set_collapse
from .hypergraph import (
    IncidenceMatrix,
    LaplacianMatrix,
    TemporalHypergraph,
    TimeIndex,
    build_incidence,
    degrees,
    neighborhood,
    normalized_laplacian,
)
from .ingest import (
    CorpusIndex,
    Ontology,
    RawDocument,
    build_temporal_hypergraphs,
    extract_keywords,
    parse_corpus,
)
from .predictor import (
    EvalReport,
    FineTuneConfig,
    ModelParams,
    PredictionMatrix,
    SupervisionMask,
    TrainConfig,
    compute_loss,
    evaluate,
    gradients,
    load_snapshot,
    save_snapshot,
    split_supervision,
    train,
)
from .provenance import ProvenanceEvent, ProvenanceLog
from .reorder import (
    Dendrogram,
    DistanceMetric,
    Ordering,
    compute_ordering,
    hierarchical_cluster,
    pairwise_distances,
)

__all__ = [name for name in dir() if not name.startswith("_")]
