"""Translation quality metrics: BLEU, TER and their post-edit variants.

BLEU follows the standard corpus formulation (clipped n-gram precisions up
to order 4, geometric mean, brevity penalty, 0-100 scale) with no
smoothing; orders for which the corpus has no n-grams at all are skipped
so that the identity ``bleu(x, x) == 100`` holds on very short corpora.
TER is edit distance (insert/delete/substitute, unit cost) plus greedy
block shifts, each costing 1, normalized by reference length.

hTER / hBLEU are the same computations with the human post-edit in the
reference role.

All functions are pure and operate on token sequences; callers decide the
tokenization and casing convention.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

MAX_NGRAM_ORDER = 4

#: Shifted blocks are bounded to keep the greedy search cheap.
MAX_SHIFT_BLOCK = 10


@dataclass(frozen=True)
class NGramProfile:
    """Per-order n-gram counts of one token sequence."""

    counts: tuple[Counter, ...]
    length: int

    @classmethod
    def from_tokens(cls, tokens: list[str], max_order: int = MAX_NGRAM_ORDER) -> "NGramProfile":
        tokens = list(tokens)
        counts = tuple(
            Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))
            for n in range(1, max_order + 1)
        )
        return cls(counts=counts, length=len(tokens))


@dataclass(frozen=True)
class TerAlignment:
    """Edit decomposition of one hypothesis against one reference."""

    insertions: int
    deletions: int
    substitutions: int
    shifts: int
    reference_length: int

    @property
    def num_edits(self) -> int:
        return self.insertions + self.deletions + self.substitutions + self.shifts

    @property
    def score(self) -> float:
        return self.num_edits / self.reference_length


def bleu(hypotheses: list[list[str]], references: list[list[str]]) -> float:
    """Corpus BLEU on the 0-100 scale."""
    if len(hypotheses) != len(references):
        raise ValueError(
            f"hypothesis/reference count mismatch: {len(hypotheses)} != {len(references)}"
        )
    if not references:
        raise ValueError("references must be non-empty")
    correct = [0] * MAX_NGRAM_ORDER
    total = [0] * MAX_NGRAM_ORDER
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        if not ref:
            raise ValueError("references must be non-empty")
        hyp_len += len(hyp)
        ref_len += len(ref)
        hp = NGramProfile.from_tokens(hyp)
        rp = NGramProfile.from_tokens(ref)
        for n in range(MAX_NGRAM_ORDER):
            total[n] += max(0, len(hyp) - n)
            correct[n] += sum(min(c, rp.counts[n][g]) for g, c in hp.counts[n].items())

    log_precisions = []
    for n in range(MAX_NGRAM_ORDER):
        if total[n] == 0:
            continue  # corpus too short for this order
        if correct[n] == 0:
            return 0.0
        log_precisions.append(math.log(correct[n] / total[n]))
    if not log_precisions or hyp_len == 0:
        return 0.0
    brevity = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * brevity * math.exp(sum(log_precisions) / len(log_precisions))


def sentence_bleu(hypothesis: list[str], reference: list[str]) -> float:
    """Diagnostic sentence BLEU with add-one smoothing for orders >= 2.

    Not comparable with corpus :func:`bleu`; intended for per-segment
    inspection only.
    """
    if not reference:
        raise ValueError("reference must be non-empty")
    hp = NGramProfile.from_tokens(hypothesis)
    rp = NGramProfile.from_tokens(reference)
    log_precisions = []
    for n in range(MAX_NGRAM_ORDER):
        total = max(0, len(hypothesis) - n)
        correct = sum(min(c, rp.counts[n][g]) for g, c in hp.counts[n].items())
        if n > 0:
            total += 1
            correct += 1
        if total == 0 or correct == 0:
            return 0.0
        log_precisions.append(math.log(correct / total))
    brevity = 1.0 if len(hypothesis) >= len(reference) else math.exp(1.0 - len(reference) / max(1, len(hypothesis)))
    return 100.0 * brevity * math.exp(sum(log_precisions) / MAX_NGRAM_ORDER)


def _edit_counts(hyp: list[str], ref: list[str]) -> tuple[int, int, int]:
    """Minimum-cost (insertions, deletions, substitutions) turning hyp into ref.

    Ties in the backtrace prefer substitution, then insertion, then
    deletion, so the decomposition is deterministic.
    """
    m, n = len(hyp), len(ref)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        dist[i][0] = i
    for j in range(1, n + 1):
        dist[0][j] = j
    for i in range(1, m + 1):
        row = dist[i]
        prev = dist[i - 1]
        hi = hyp[i - 1]
        for j in range(1, n + 1):
            sub = prev[j - 1] + (hi != ref[j - 1])
            row[j] = min(sub, row[j - 1] + 1, prev[j] + 1)
    ins = dels = subs = 0
    i, j = m, n
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            subs += hyp[i - 1] != ref[j - 1]
            i, j = i - 1, j - 1
        elif j > 0 and dist[i][j] == dist[i][j - 1] + 1:
            ins += 1
            j -= 1
        else:
            dels += 1
            i -= 1
    return ins, dels, subs


def edit_distance(hyp: list[str], ref: list[str]) -> int:
    ins, dels, subs = _edit_counts(hyp, ref)
    return ins + dels + subs


def _occurs_in(block: list[str], ref: list[str]) -> bool:
    size = len(block)
    return any(ref[k : k + size] == block for k in range(len(ref) - size + 1))


def ter(hypothesis: list[str], reference: list[str]) -> TerAlignment:
    """TER with greedy block shifts.

    Repeatedly applies the shift (of a block of up to ``MAX_SHIFT_BLOCK``
    tokens that exactly matches some reference subsequence) that most
    reduces the remaining edit distance; a shift is accepted only if it
    strictly reduces the total cost. Ties prefer the smallest block, then
    the leftmost origin, then the leftmost destination.
    """
    reference = list(reference)
    if not reference:
        raise ValueError("empty reference")
    current = list(hypothesis)
    shifts = 0
    best_dist = edit_distance(current, reference)
    while best_dist > 0:
        best = None  # (new_dist, block_len, origin, destination, sequence)
        for length in range(1, min(MAX_SHIFT_BLOCK, len(current)) + 1):
            for origin in range(len(current) - length + 1):
                block = current[origin : origin + length]
                if not _occurs_in(block, reference):
                    continue
                rest = current[:origin] + current[origin + length :]
                for dest in range(len(rest) + 1):
                    if dest == origin:
                        continue
                    candidate = rest[:dest] + block + rest[dest:]
                    d = edit_distance(candidate, reference)
                    key = (d, length, origin, dest)
                    if best is None or key < best[:4]:
                        best = (d, length, origin, dest, candidate)
        if best is None or best[0] + 1 >= best_dist:
            break
        shifts += 1
        best_dist = best[0]
        current = best[4]
    ins, dels, subs = _edit_counts(current, reference)
    return TerAlignment(
        insertions=ins,
        deletions=dels,
        substitutions=subs,
        shifts=shifts,
        reference_length=len(reference),
    )


def hter(mt_output: list[str], post_edit: list[str]) -> float:
    """TER of the raw MT output against its post-edit: lower = less editing."""
    return ter(mt_output, post_edit).score


def hbleu(mt_outputs: list[list[str]], post_edits: list[list[str]]) -> float:
    """Corpus BLEU with the post-edits in the reference role."""
    return bleu(mt_outputs, post_edits)


def corpus_ter(hypotheses: list[list[str]], references: list[list[str]]) -> float:
    """Corpus-level TER: total edits over total reference length."""
    if len(hypotheses) != len(references):
        raise ValueError(
            f"hypothesis/reference count mismatch: {len(hypotheses)} != {len(references)}"
        )
    if not references:
        raise ValueError("references must be non-empty")
    edits = 0
    ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        alignment = ter(hyp, ref)
        edits += alignment.num_edits
        ref_len += alignment.reference_length
    return edits / ref_len
