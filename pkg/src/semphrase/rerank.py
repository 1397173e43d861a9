"""N-best list reranking with the learned phrase-similarity feature.

Each candidate's score is the baseline log-linear score plus the feature
weight times the similarity feature (the sum of phrase-pair similarities over
the candidate's derivation).  The highest-scoring candidate wins, ties going
to the lowest candidate index.  Alongside the reranked corpus BLEU the result
reports the baseline selection (similarity feature switched off) and the
oracle best/worst selections, which bound what any reranker could achieve on
the same lists.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import bleu, objective
from .corpus import NBestEntry, Vocabulary
from .model import ModelParams


@dataclass(frozen=True)
class Selection:
    sample_id: int
    index: int
    total: float
    feature: float


@dataclass(eq=False)
class RerankResult:
    selections: list[Selection]
    reranked_bleu: float
    baseline_bleu: float
    oracle_best_bleu: float
    oracle_worst_bleu: float


def similarity_feature(entry: NBestEntry, params: ModelParams, vocab: Vocabulary) -> float:
    """Sum of phrase-pair similarities over the candidate's derivation."""
    if not entry.derivation:
        raise ValueError("candidate has no derivation")
    return objective.candidate_feature(entry, params, vocab)


def _sentence_bleus(sample) -> list[float]:
    return [
        e.sbleu if e.sbleu is not None else bleu.sentence_bleu(sample.reference, e.tokens)
        for e in sample.candidates
    ]


def rerank(samples, params: ModelParams, lam, vocab: Vocabulary) -> RerankResult:
    """Select the argmax candidate per sample and score the selections."""
    samples = list(samples)
    if not samples:
        raise ValueError("nothing to rerank")
    lam = np.asarray(lam, dtype=np.float64)
    sims = objective.pair_similarities(samples, params, vocab)

    selections = []
    chosen_pairs = []
    baseline_pairs = []
    best_pairs = []
    worst_pairs = []
    for sample in samples:
        bases = np.empty(len(sample.candidates))
        feats = np.empty(len(sample.candidates))
        for i, entry in enumerate(sample.candidates):
            if entry.features.size != lam.size - 1:
                raise ValueError(
                    f"candidate has {entry.features.size} baseline features, "
                    f"weights expect {lam.size - 1}"
                )
            bases[i] = float(lam[:-1] @ entry.features)
            feats[i] = objective.candidate_feature(entry, params, vocab, sims)
        totals = bases + lam[-1] * feats
        idx = int(np.argmax(totals))  # first maximum wins ties
        selections.append(Selection(sample.sample_id, idx, float(totals[idx]), float(feats[idx])))
        chosen_pairs.append((sample.reference, sample.candidates[idx].tokens))

        base_idx = int(np.argmax(bases))
        baseline_pairs.append((sample.reference, sample.candidates[base_idx].tokens))

        sbleus = _sentence_bleus(sample)
        oracle_best = int(np.argmax(sbleus))
        oracle_worst = int(np.argmin(sbleus))
        best_pairs.append((sample.reference, sample.candidates[oracle_best].tokens))
        worst_pairs.append((sample.reference, sample.candidates[oracle_worst].tokens))

    return RerankResult(
        selections=selections,
        reranked_bleu=bleu.corpus_bleu(chosen_pairs),
        baseline_bleu=bleu.corpus_bleu(baseline_pairs),
        oracle_best_bleu=bleu.corpus_bleu(best_pairs),
        oracle_worst_bleu=bleu.corpus_bleu(worst_pairs),
    )
