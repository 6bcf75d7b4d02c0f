"""adaptmt: a machine-translation engine that learns online from post-edits.

The package bundles a toy neural MT model (with its own reverse-mode
autodiff), deterministic text preprocessing, the update-on-confirm
adaptation loop, an HTTP translation server, BLEU/TER quality metrics,
post-editing effort logs and a simulated post-editing harness.
"""

from .adaptation import AdaptiveSession, ModelConfig, TrainingPair, UpdateReport, load_config
from .errors import (
    AdaptMtError,
    CheckpointError,
    ConfigError,
    LogFormatError,
    NumericError,
    SimulationError,
)
from .metrics import TerAlignment, bleu, corpus_ter, hbleu, hter, sentence_bleu, ter
from .model import DecodeOptions, NmtModel
from .pelog import (
    EffortReport,
    LogEvent,
    SegmentEffort,
    compute_effort,
    parse_log,
    parse_log_file,
    write_log,
    write_log_file,
)
from .server import CredentialStore, ModelRegistry, TranslationService, serve
from .simulator import (
    ComparisonReport,
    SimulationRun,
    SyntheticCorpus,
    build_project,
    compare_runs,
    make_corpus,
    run_simulation,
)
from .textpipe import BpeSegmenter, Vocabulary, WordTokenizer

__version__ = "0.1.0"

__all__ = [
    "AdaptMtError",
    "AdaptiveSession",
    "BpeSegmenter",
    "CheckpointError",
    "ComparisonReport",
    "ConfigError",
    "CredentialStore",
    "DecodeOptions",
    "EffortReport",
    "LogEvent",
    "LogFormatError",
    "ModelConfig",
    "ModelRegistry",
    "NmtModel",
    "NumericError",
    "SegmentEffort",
    "SimulationError",
    "SimulationRun",
    "SyntheticCorpus",
    "TerAlignment",
    "TrainingPair",
    "TranslationService",
    "UpdateReport",
    "Vocabulary",
    "WordTokenizer",
    "bleu",
    "build_project",
    "compare_runs",
    "compute_effort",
    "corpus_ter",
    "hbleu",
    "hter",
    "load_config",
    "make_corpus",
    "parse_log",
    "parse_log_file",
    "run_simulation",
    "sentence_bleu",
    "serve",
    "ter",
    "write_log",
    "write_log_file",
]
