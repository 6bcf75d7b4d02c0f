"""Online adaptation around a translation model.

An :class:`AdaptiveSession` owns one model plus its text pipeline and
applies the update-on-confirm loop: each confirmed (source, post-edit)
pair triggers ``ol_iterations`` gradient steps at the configured learning
rate, synchronously, so the very next translation already reflects the
correction. Updates are atomic: a numeric failure rolls the parameters
back to the pre-update snapshot.

Projects are described by a small ``key: value`` config file (see
:func:`load_config`) pointing at a checkpoint and an optional BPE model.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import ConfigError, NumericError
from .model import DecodeOptions, NmtModel
from .textpipe import BpeSegmenter, WordTokenizer

CONFIG_VERSION = "1"

_REQUIRED_KEYS = ("project_id", "src_lang", "tgt_lang", "checkpoint_path")
_OPTIONAL_DEFAULTS = {
    "tokenizer": "basic",
    "bpe_model_path": "",
    "learning_rate": "0.05",
    "ol_iterations": "1",
    "beam_size": "1",
    "max_length": "50",
    "checkpoint_every": "10",
}


@dataclass
class ModelConfig:
    """Per-project translation and online-learning options."""

    project_id: str
    src_lang: str
    tgt_lang: str
    checkpoint_path: str
    bpe_model_path: str | None = None
    tokenizer: str = "basic"
    learning_rate: float = 0.05
    ol_iterations: int = 1
    beam_size: int = 1
    max_length: int = 50
    checkpoint_every: int = 10

    def validate(self) -> "ModelConfig":
        for name in ("project_id", "src_lang", "tgt_lang", "checkpoint_path"):
            if not getattr(self, name):
                raise ConfigError(f"missing required key: {name}")
        if self.tokenizer != "basic":
            raise ConfigError(f"unknown tokenizer scheme {self.tokenizer!r}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.ol_iterations < 1:
            raise ConfigError(f"ol_iterations must be >= 1, got {self.ol_iterations}")
        if self.beam_size < 1:
            raise ConfigError(f"beam_size must be >= 1, got {self.beam_size}")
        if self.max_length < 1:
            raise ConfigError(f"max_length must be >= 1, got {self.max_length}")
        if self.checkpoint_every < 0:
            raise ConfigError(f"checkpoint_every must be >= 0, got {self.checkpoint_every}")
        return self

    def decode_options(self) -> DecodeOptions:
        return DecodeOptions(beam_size=self.beam_size, max_length=self.max_length)


def load_config(path) -> ModelConfig:
    """Parse and validate a project config file.

    The format is one ``key: value`` pair per line, ``#`` comments and
    blank lines allowed, and a mandatory ``version: 1`` first entry.
    Relative paths are resolved against the config file's directory.
    """
    path = Path(path)
    entries: dict[str, str] = {}
    order: list[str] = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key: value', got {raw!r}")
        key = key.strip()
        if key in entries:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        entries[key] = value.strip()
        order.append(key)

    if not order:
        raise ConfigError(f"{path}: empty config file")
    if order[0] != "version":
        raise ConfigError(f"{path}: first entry must be 'version: {CONFIG_VERSION}'")
    if entries.pop("version") != CONFIG_VERSION:
        raise ConfigError(f"{path}: unsupported config version")

    for key in _REQUIRED_KEYS:
        if key not in entries or not entries[key]:
            raise ConfigError(f"{path}: missing required key: {key}")
    unknown = set(entries) - set(_REQUIRED_KEYS) - set(_OPTIONAL_DEFAULTS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys: {', '.join(sorted(unknown))}")

    merged = dict(_OPTIONAL_DEFAULTS)
    merged.update(entries)

    def _resolve(p: str) -> str:
        return str((path.parent / p).resolve()) if p else ""

    try:
        config = ModelConfig(
            project_id=merged["project_id"],
            src_lang=merged["src_lang"],
            tgt_lang=merged["tgt_lang"],
            checkpoint_path=_resolve(merged["checkpoint_path"]),
            bpe_model_path=_resolve(merged["bpe_model_path"]) or None,
            tokenizer=merged["tokenizer"],
            learning_rate=float(merged["learning_rate"]),
            ol_iterations=int(merged["ol_iterations"]),
            beam_size=int(merged["beam_size"]),
            max_length=int(merged["max_length"]),
            checkpoint_every=int(merged["checkpoint_every"]),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: bad value: {exc}") from exc
    return config.validate()


def serialize_config(config: ModelConfig) -> str:
    config.validate()
    lines = [
        f"version: {CONFIG_VERSION}",
        f"project_id: {config.project_id}",
        f"src_lang: {config.src_lang}",
        f"tgt_lang: {config.tgt_lang}",
        f"checkpoint_path: {config.checkpoint_path}",
        f"tokenizer: {config.tokenizer}",
        f"learning_rate: {config.learning_rate}",
        f"ol_iterations: {config.ol_iterations}",
        f"beam_size: {config.beam_size}",
        f"max_length: {config.max_length}",
        f"checkpoint_every: {config.checkpoint_every}",
    ]
    if config.bpe_model_path:
        lines.insert(5, f"bpe_model_path: {config.bpe_model_path}")
    return "\n".join(lines) + "\n"


def save_config(config: ModelConfig, path) -> None:
    Path(path).write_text(serialize_config(config), encoding="utf-8")


@dataclass(frozen=True)
class TrainingPair:
    """The unit of online adaptation: a source segment and its post-edit."""

    source: str
    post_edit: str
    segment_id: str
    timestamp: float = field(default_factory=time.time)


@dataclass(frozen=True)
class UpdateReport:
    segment_id: str
    pre_loss: float
    post_loss: float
    steps: int
    elapsed_seconds: float


class AdaptiveSession:
    """One project's live model with its update-on-confirm loop.

    ``translate_segment`` is read-only; ``confirm_and_update`` mutates the
    model and must not run concurrently with translations. The serving
    layer enforces that with a per-project reader-writer discipline; the
    session itself only guards against re-entrant updates.
    """

    def __init__(
        self,
        model: NmtModel,
        config: ModelConfig,
        tokenizer: WordTokenizer | None = None,
        bpe: BpeSegmenter | None = None,
    ):
        config.validate()
        self.model = model
        self.config = config
        self.tokenizer = tokenizer or WordTokenizer()
        self.bpe = bpe
        self.updates_applied = 0
        self.update_log: list[tuple[TrainingPair, float, float]] = []
        self.last_update_time: float | None = None
        self._hypotheses: dict[str, tuple[str, str]] = {}
        self._hyp_counter = 0
        self._hyp_lock = threading.Lock()  # translations may run concurrently
        self._update_guard = threading.Lock()

    # -- construction -------------------------------------------------------

    @classmethod
    def restore(cls, checkpoint_path, config: ModelConfig) -> "AdaptiveSession":
        """Load a session from a checkpoint; counters start at zero."""
        model = NmtModel.load_checkpoint(checkpoint_path)
        bpe = BpeSegmenter.load(config.bpe_model_path) if config.bpe_model_path else None
        return cls(model, config, bpe=bpe)

    @classmethod
    def from_config(cls, config: ModelConfig) -> "AdaptiveSession":
        return cls.restore(config.checkpoint_path, config)

    def checkpoint(self, path=None) -> str:
        """Persist the current parameters; returns the written path."""
        path = str(path) if path is not None else self.config.checkpoint_path
        self.model.save_checkpoint(path)
        return path

    # -- text pipeline ------------------------------------------------------

    def _to_source_ids(self, text: str) -> list[int]:
        tokens = self.tokenizer.tokenize(text)
        if not tokens:
            raise ValueError("untranslatable segment")
        if self.bpe is not None:
            tokens = self.bpe.split_tokens(tokens)
        return self.model.src_vocab.encode(tokens)

    def _to_target_ids(self, text: str) -> list[int]:
        tokens = self.tokenizer.tokenize(text)
        if not tokens:
            raise ValueError("empty post-edit after tokenization")
        if self.bpe is not None:
            tokens = self.bpe.split_tokens(tokens)
        return self.model.tgt_vocab.encode(tokens)

    def _ids_to_text(self, ids: list[int]) -> str:
        pieces = self.model.tgt_vocab.decode(ids)
        tokens = BpeSegmenter.join_pieces(pieces) if self.bpe is not None else pieces
        if not tokens:
            return ""
        return self.tokenizer.detokenize(tokens)

    # -- operations ---------------------------------------------------------

    def translate_segment(self, source: str) -> tuple[str, str]:
        """Translate one segment; returns (text, hypothesis_id).

        The hypothesis is recorded so effort tooling can later compute
        hTER against the confirmed post-edit.
        """
        src_ids = self._to_source_ids(source)
        out_ids = self.model.decode(src_ids, self.config.decode_options())
        text = self._ids_to_text(out_ids)
        with self._hyp_lock:
            self._hyp_counter += 1
            hypothesis_id = f"h{self._hyp_counter}"
            self._hypotheses[hypothesis_id] = (source, text)
        return text, hypothesis_id

    def hypothesis(self, hypothesis_id: str) -> tuple[str, str]:
        return self._hypotheses[hypothesis_id]

    def confirm_and_update(self, pair: TrainingPair) -> UpdateReport:
        """Apply the confirmed post-edit as a training pair, synchronously.

        Runs ``ol_iterations`` gradient steps at the configured learning
        rate. On a numeric failure the parameters are rolled back and the
        counter is not incremented.
        """
        if not self._update_guard.acquire(blocking=False):
            raise RuntimeError("session is mid-update")
        try:
            src_ids = self._to_source_ids(pair.source)
            tgt_ids = self._to_target_ids(pair.post_edit)
            snapshot = {name: p.data.copy() for name, p in self.model.params_.items()}
            started = time.perf_counter()
            try:
                pre_loss = None
                for _ in range(self.config.ol_iterations):
                    loss, grads = self.model.loss_and_grad(src_ids, tgt_ids)
                    if pre_loss is None:
                        pre_loss = loss
                    self.model.sgd_step(grads, self.config.learning_rate)
                post_loss = self.model.loss(src_ids, tgt_ids)
            except NumericError:
                for name, p in self.model.params_.items():
                    p.data[...] = snapshot[name]
                raise
            elapsed = time.perf_counter() - started
            self.updates_applied += 1
            self.update_log.append((pair, pre_loss, post_loss))
            self.last_update_time = time.time()
        finally:
            self._update_guard.release()
        if self.config.checkpoint_every and self.updates_applied % self.config.checkpoint_every == 0:
            self.checkpoint()
        return UpdateReport(
            segment_id=pair.segment_id,
            pre_loss=pre_loss,
            post_loss=post_loss,
            steps=self.config.ol_iterations,
            elapsed_seconds=elapsed,
        )

    def pair_loss(self, pair: TrainingPair) -> float:
        """Current loss of a pair without updating anything."""
        return self.model.loss(self._to_source_ids(pair.source), self._to_target_ids(pair.post_edit))

    def export_update_log(self) -> str:
        """Line-delimited update history: segment_id, timestamp, pre/post loss."""
        lines = []
        for pair, pre, post in self.update_log:
            stamp = datetime.fromtimestamp(pair.timestamp, tz=timezone.utc).isoformat()
            lines.append(f"{pair.segment_id}\t{stamp}\t{pre:.6f}\t{post:.6f}")
        return "\n".join(lines) + ("\n" if lines else "")
