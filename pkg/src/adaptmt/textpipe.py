"""Deterministic text pre/post-processing: tokenization, BPE subwords, vocabulary.

All classes follow the scikit-learn transformer protocol (``fit`` /
``transform`` / ``inverse_transform``) over collections of sentences or
token sequences, so they compose with pipelines and ``get_params``.
Single-sequence convenience methods (``tokenize``, ``split_tokens``,
``encode`` ...) are provided for the translation path, which works one
segment at a time.
"""

from __future__ import annotations

import re
import warnings
from collections import Counter

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .validation import check_text, check_token_sequence, check_token_sequences

# Reserved vocabulary entries. Indices are part of the file format.
PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>")

# Joiner appended to every non-final subword piece.
BPE_JOINER = "@@"

# End-of-token sentinel used during merge learning, never in output pieces.
_EOW = "</w>"

_DETACHED = '.,;:!?"()'
_TOKEN_RE = re.compile(r'[.,;:!?"()]|[^\s.,;:!?"()]+')
_NO_SPACE_BEFORE = frozenset(".,;:!?)")
_NO_SPACE_AFTER = frozenset("(")


class WordTokenizer(BaseEstimator, TransformerMixin):
    """Whitespace tokenizer that detaches punctuation into separate tokens.

    Stateless and deterministic: ``fit`` is a no-op. ``detokenize`` is the
    inverse up to whitespace normalization (single spaces, no space before
    closing punctuation, none after an opening parenthesis; straight
    quotes are paired by alternation).
    """

    def fit(self, X=None, y=None):
        return self

    def tokenize(self, text: str) -> list[str]:
        check_text(text)
        return _TOKEN_RE.findall(text)

    def detokenize(self, tokens: list[str]) -> str:
        tokens = check_token_sequence(tokens)
        parts: list[str] = []
        glue_next = True  # no leading space
        quote_open = False
        for tok in tokens:
            if tok == '"':
                if quote_open:
                    parts.append(tok)  # closing quote hugs the left
                else:
                    if not glue_next:
                        parts.append(" ")
                    parts.append(tok)
                quote_open = not quote_open
                glue_next = quote_open
                continue
            if tok in _NO_SPACE_BEFORE or glue_next:
                parts.append(tok)
            else:
                parts.append(" ")
                parts.append(tok)
            glue_next = tok in _NO_SPACE_AFTER
        return "".join(parts)

    def transform(self, X) -> list[list[str]]:
        return [self.tokenize(check_text(t, name=f"X[{i}]")) for i, t in enumerate(X)]

    def inverse_transform(self, X) -> list[str]:
        return [self.detokenize(seq) for seq in check_token_sequences(X)]


class BpeSegmenter(BaseEstimator, TransformerMixin):
    """Byte-pair-encoding subword segmentation learned from a token corpus.

    ``fit`` greedily learns ``num_merges`` merges over within-token
    character pairs, counting against an end-of-token sentinel; ties are
    broken by lexicographic order of the pair so training is reproducible.
    ``transform`` applies the merges in learning order and marks every
    non-final piece with the ``@@`` joiner; ``inverse_transform`` undoes it.
    """

    def __init__(self, num_merges: int = 200):
        self.num_merges = num_merges

    # -- training ---------------------------------------------------------

    def fit(self, X, y=None):
        if self.num_merges < 0:
            raise ValueError("num_merges must be >= 0")
        sequences = check_token_sequences(X)
        words = Counter(tok for seq in sequences for tok in seq)
        if not words:
            raise ValueError("empty training corpus")

        vocab = {tuple(word) + (_EOW,): freq for word, freq in words.items()}
        merges: list[tuple[str, str]] = []
        for _ in range(self.num_merges):
            pairs: Counter = Counter()
            for syms, freq in vocab.items():
                for a, b in zip(syms, syms[1:]):
                    pairs[(a, b)] += freq
            if not pairs:
                break
            best_count = max(pairs.values())
            best = min(p for p, c in pairs.items() if c == best_count)
            merges.append(best)
            vocab = {_merge_word(syms, best): freq for syms, freq in vocab.items()}

        self.merges_ = merges
        self.alphabet_ = sorted({ch for word in words for ch in word})
        self._cache: dict[str, list[str]] = {}
        return self

    # -- application ------------------------------------------------------

    def split_token(self, token: str) -> list[str]:
        """Segment one token into subword pieces."""
        self._check_fitted()
        if token == "":
            raise ValueError("cannot segment an empty token")
        cached = self._cache.get(token)
        if cached is not None:
            return list(cached)
        syms = tuple(token) + (_EOW,)
        for pair in self.merges_:
            if len(syms) == 1:
                break
            syms = _merge_word(syms, pair)
        pieces = [s[: -len(_EOW)] if s.endswith(_EOW) else s for s in syms]
        pieces = [p for p in pieces if p]
        pieces = [p + BPE_JOINER for p in pieces[:-1]] + pieces[-1:]
        self._cache[token] = list(pieces)
        return pieces

    def split_tokens(self, tokens: list[str]) -> list[str]:
        tokens = check_token_sequence(tokens)
        out: list[str] = []
        for tok in tokens:
            out.extend(self.split_token(tok))
        return out

    @staticmethod
    def join_pieces(pieces: list[str]) -> list[str]:
        """Concatenate subword pieces back into full tokens.

        A joiner dangling at the end of the sequence (truncated output) is
        kept literally in the final token and flagged with a warning.
        """
        pieces = check_token_sequence(pieces, name="pieces")
        tokens: list[str] = []
        buffer = ""
        for piece in pieces:
            if piece.endswith(BPE_JOINER):
                buffer += piece[: -len(BPE_JOINER)]
            else:
                tokens.append(buffer + piece)
                buffer = ""
        if buffer:
            warnings.warn("dangling subword joiner at end of sequence", stacklevel=2)
            tokens.append(buffer + BPE_JOINER)
        return tokens

    def transform(self, X) -> list[list[str]]:
        return [self.split_tokens(seq) for seq in check_token_sequences(X)]

    def inverse_transform(self, X) -> list[list[str]]:
        return [self.join_pieces(seq) for seq in check_token_sequences(X)]

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        self._check_fitted()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"#bpe v1 {len(self.merges_)}\n")
            for left, right in self.merges_:
                fh.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path) -> "BpeSegmenter":
        with open(path, encoding="utf-8") as fh:
            header = fh.readline().rstrip("\n")
            fields = header.split()
            if len(fields) != 3 or fields[0] != "#bpe" or fields[1] != "v1":
                raise ValueError(f"not a BPE model file: bad header {header!r}")
            count = int(fields[2])
            merges = []
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                left, sep, right = line.partition(" ")
                if not sep or not left or not right:
                    raise ValueError(f"malformed merge line {line!r}")
                merges.append((left, right))
        if len(merges) != count:
            raise ValueError(f"merge count mismatch: header says {count}, found {len(merges)}")
        model = cls(num_merges=count)
        model.merges_ = merges
        # The file format carries merges only; recover the chars that take
        # part in them (the full training alphabet is not persisted).
        chars: set[str] = set()
        for pair in merges:
            for sym in pair:
                if sym.endswith(_EOW):
                    sym = sym[: -len(_EOW)]
                chars.update(sym)
        model.alphabet_ = sorted(chars)
        model._cache = {}
        return model

    def _check_fitted(self):
        if not hasattr(self, "merges_"):
            raise NotFittedError("BpeSegmenter is not fitted; call fit() or load()")


def _merge_word(syms: tuple[str, ...], pair: tuple[str, str]) -> tuple[str, ...]:
    out = []
    i = 0
    while i < len(syms):
        if i < len(syms) - 1 and syms[i] == pair[0] and syms[i + 1] == pair[1]:
            out.append(syms[i] + syms[i + 1])
            i += 2
        else:
            out.append(syms[i])
            i += 1
    return tuple(out)


class Vocabulary(BaseEstimator, TransformerMixin):
    """Bijective token-to-id map with fixed reserved entries.

    Indices 0..3 are always ``<pad>``, ``<unk>``, ``<bos>``, ``<eos>``.
    Unknown tokens encode to the ``<unk>`` id.
    """

    def fit(self, X, y=None):
        sequences = check_token_sequences(X)
        seen = sorted({tok for seq in sequences for tok in seq} - set(RESERVED_TOKENS))
        self.token_of_ = list(RESERVED_TOKENS) + seen
        self.id_of_ = {tok: i for i, tok in enumerate(self.token_of_)}
        return self

    @classmethod
    def from_bpe(cls, bpe: BpeSegmenter) -> "Vocabulary":
        """Build the closed vocabulary of every piece the BPE model can emit.

        Includes plain and joiner-suffixed forms of all alphabet characters
        and merge products, so any token over the training alphabet encodes
        without falling back to ``<unk>``. This is what lets online updates
        teach the model genuinely new words.
        """
        bpe._check_fitted()
        symbols = set(bpe.alphabet_)
        for left, right in bpe.merges_:
            merged = left + right
            if merged.endswith(_EOW):
                merged = merged[: -len(_EOW)]
            if merged:
                symbols.add(merged)
        pieces = sorted(symbols | {s + BPE_JOINER for s in symbols})
        vocab = cls()
        vocab.token_of_ = list(RESERVED_TOKENS) + pieces
        vocab.id_of_ = {tok: i for i, tok in enumerate(vocab.token_of_)}
        return vocab

    def __len__(self) -> int:
        self._check_fitted()
        return len(self.token_of_)

    def encode(self, tokens: list[str]) -> list[int]:
        self._check_fitted()
        return [self.id_of_.get(tok, UNK) for tok in check_token_sequence(tokens)]

    def decode(self, ids: list[int]) -> list[str]:
        self._check_fitted()
        size = len(self.token_of_)
        out = []
        for i in ids:
            if not 0 <= i < size:
                raise ValueError(f"invalid token id {i} (vocab size {size})")
            out.append(self.token_of_[i])
        return out

    def transform(self, X) -> list[list[int]]:
        return [self.encode(seq) for seq in check_token_sequences(X)]

    def inverse_transform(self, X) -> list[list[str]]:
        return [self.decode(list(seq)) for seq in X]

    # -- persistence ------------------------------------------------------

    def save(self, path) -> None:
        self._check_fitted()
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.token_of_:
                fh.write(tok + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            tokens = [line.rstrip("\n") for line in fh]
        while tokens and tokens[-1] == "":
            tokens.pop()
        return cls.from_tokens(tokens)

    @classmethod
    def from_tokens(cls, tokens: list[str]) -> "Vocabulary":
        if tuple(tokens[:4]) != RESERVED_TOKENS:
            raise ValueError(f"vocabulary must start with reserved tokens {RESERVED_TOKENS}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary contains duplicate tokens")
        vocab = cls()
        vocab.token_of_ = list(tokens)
        vocab.id_of_ = {tok: i for i, tok in enumerate(tokens)}
        return vocab

    def _check_fitted(self):
        if not hasattr(self, "token_of_"):
            raise NotFittedError("Vocabulary is not fitted; call fit() or load()")
