"""Input validation helpers used by the estimator-style classes.

These are deliberately small: they normalize the kinds of inputs the
package accepts (strings, token sequences, id sequences) and raise
uniform, descriptive errors close to the call site.
"""

from __future__ import annotations

from typing import Iterable, Sequence


def check_text(text: object, name: str = "text") -> str:
    if not isinstance(text, str):
        raise TypeError(f"{name} must be a string, got {type(text).__name__}")
    return text


def check_token_sequence(tokens: object, name: str = "tokens") -> list[str]:
    """Validate a single sequence of string tokens and return it as a list."""
    if isinstance(tokens, str):
        raise TypeError(f"{name} must be a sequence of tokens, not a bare string")
    if not isinstance(tokens, Iterable):
        raise TypeError(f"{name} must be an iterable of strings")
    out = list(tokens)
    for tok in out:
        if not isinstance(tok, str):
            raise TypeError(f"{name} must contain only strings, got {type(tok).__name__}")
        if tok == "":
            raise ValueError(f"{name} must not contain empty tokens")
    return out


def check_token_sequences(X: object, name: str = "X") -> list[list[str]]:
    """Validate a collection of token sequences (the transformer input shape)."""
    if isinstance(X, str):
        raise TypeError(f"{name} must be a collection of token sequences, not a string")
    if not isinstance(X, Iterable):
        raise TypeError(f"{name} must be an iterable of token sequences")
    return [check_token_sequence(seq, name=f"{name}[{i}]") for i, seq in enumerate(X)]


def check_id_sequence(ids: Sequence[int], vocab_size: int, name: str = "ids") -> list[int]:
    """Validate a sequence of token ids against a vocabulary size."""
    out = []
    for value in ids:
        i = int(value)
        if i != value or not 0 <= i < vocab_size:
            raise ValueError(f"invalid token id {value!r} in {name} (vocab size {vocab_size})")
        out.append(i)
    return out


def check_positive(value: float, name: str) -> float:
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")
    return value
