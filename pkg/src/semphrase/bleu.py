"""Sentence-level and corpus-level BLEU.

Sentence BLEU labels every N-best candidate before training; corpus BLEU is
the evaluation metric for reranking runs.  Both compare tokens
case-insensitively and score n-grams up to order 4.

Sentence scores are smoothed (add-one on numerator and denominator for
orders >= 2) so that any candidate with at least one matching unigram gets a
positive score, while an exact match still scores 1.0 and a candidate with no
unigram overlap scores 0.0.  Corpus BLEU is the standard unsmoothed
aggregate.  The smoothing scheme is identified by ``SMOOTHING_TAG`` and is
recorded in every model file so scores stay comparable across checkpoints.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

MAX_ORDER = 4

# Identifier of the sentence-level smoothing scheme, stored in model headers.
SMOOTHING_TAG = "add-one-orders-2-plus"


@dataclass(frozen=True)
class BleuStats:
    """Clipped n-gram match counts and totals for one (reference, candidate) pair."""

    matches: tuple[int, ...]  # clipped matches for n = 1..MAX_ORDER
    totals: tuple[int, ...]  # candidate n-gram counts for n = 1..MAX_ORDER
    candidate_len: int
    reference_len: int

    def __post_init__(self):
        for m, t in zip(self.matches, self.totals):
            if m < 0 or m > t:
                raise ValueError(f"invalid n-gram statistics: matches={self.matches} totals={self.totals}")


def _fold(tokens) -> list[str]:
    return [t.lower() for t in tokens]


def _ngram_counts(tokens: list[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(reference, candidate) -> BleuStats:
    """Collect clipped match statistics for one sentence pair."""
    ref = _fold(reference)
    cand = _fold(candidate)
    if not ref:
        raise ValueError("reference must be non-empty")
    matches = []
    totals = []
    for n in range(1, MAX_ORDER + 1):
        cand_ngrams = _ngram_counts(cand, n)
        ref_ngrams = _ngram_counts(ref, n)
        clipped = sum(min(count, ref_ngrams[g]) for g, count in cand_ngrams.items())
        matches.append(clipped)
        totals.append(max(len(cand) - n + 1, 0))
    return BleuStats(tuple(matches), tuple(totals), len(cand), len(ref))


def _brevity_penalty(candidate_len: int, reference_len: int) -> float:
    if candidate_len == 0:
        return 0.0
    if candidate_len >= reference_len:
        return 1.0
    return math.exp(1.0 - reference_len / candidate_len)


def sentence_bleu(reference, candidate) -> float:
    """Smoothed sentence-level BLEU in [0, 1].

    Candidates shorter than MAX_ORDER tokens are scored with n-gram orders up
    to their own length, so a 2-token candidate is judged on unigrams and
    bigrams only.
    """
    stats = bleu_stats(reference, candidate)
    if stats.candidate_len == 0 or stats.matches[0] == 0:
        return 0.0
    top_order = min(MAX_ORDER, stats.candidate_len)
    log_precision = 0.0
    for n in range(1, top_order + 1):
        m, t = stats.matches[n - 1], stats.totals[n - 1]
        if n == 1:
            log_precision += math.log(m / t)
        else:
            log_precision += math.log((m + 1.0) / (t + 1.0))
    geo_mean = math.exp(log_precision / top_order)
    return _brevity_penalty(stats.candidate_len, stats.reference_len) * geo_mean


def corpus_bleu_from_stats(stats_list) -> float:
    """Standard corpus BLEU from pre-computed per-sentence statistics."""
    stats_list = list(stats_list)
    if not stats_list:
        raise ValueError("corpus BLEU needs at least one sentence pair")
    matches = [0] * MAX_ORDER
    totals = [0] * MAX_ORDER
    cand_len = 0
    ref_len = 0
    for s in stats_list:
        for i in range(MAX_ORDER):
            matches[i] += s.matches[i]
            totals[i] += s.totals[i]
        cand_len += s.candidate_len
        ref_len += s.reference_len
    if any(t == 0 for t in totals) or any(m == 0 for m in matches):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matches, totals))
    geo_mean = math.exp(log_precision / MAX_ORDER)
    return _brevity_penalty(cand_len, ref_len) * geo_mean


def corpus_bleu(pairs) -> float:
    """Corpus BLEU over (reference, candidate) token-sequence pairs."""
    return corpus_bleu_from_stats(bleu_stats(ref, cand) for ref, cand in pairs)
