"""Joint prediction of entity state changes and step-dependency graphs for procedural text."""

from .errors import (
    ConfigError,
    DimensionMismatch,
    InconsistentTransition,
    InvalidMatrix,
    NormalizationError,
    ParseError,
    ProcdepError,
    ProcessMismatch,
    TooLarge,
    ValidationError,
)
from .model import (
    KIND_ORDER,
    ChangeKind,
    DependencyEdge,
    DependencyGraph,
    Entity,
    ExistenceState,
    ProcessRecord,
    StateChange,
    StateChangeMatrix,
    Violation,
    allowed_changes,
    apply_change,
    mentions,
    next_mention,
    normalize,
    validate_graph,
    validate_matrix,
)
from .graphs import DeriveMode, NextMentionTable, derive_graph, incremental_targets
from .providers import (
    ConstantEdgeScorer,
    EdgeCandidate,
    EdgeScoreTable,
    FileLogitProvider,
    LexicalLogitProvider,
    LogitsRecord,
    TopicPriorTable,
    lexical_logits,
    prior_logprob,
    table_edge_score,
)
from .corpus import (
    CorpusFile,
    export_dot,
    format_cell,
    load_corpus,
    load_edge_table,
    load_grid_tsv,
    load_logits,
    load_prior_table,
    parse_cell,
    write_corpus,
    write_logits,
)
from .decoding import (
    BeamEntry,
    DecodeResult,
    DecoderConfig,
    connectivity_score,
    decode,
    edge_prior_score,
    exhaustive_decode,
    purpose_score,
    score_matrix,
    state_change_score,
    step_candidates,
    step_score,
)
from .evaluation import (
    EvalReport,
    QuestionSet,
    TaskCounts,
    dependency_metrics,
    f1,
    statechange_metrics,
    statechange_questions,
)

__version__ = "0.1.0"
