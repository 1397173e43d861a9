"""Shared builders for random toy corpora."""

import numpy as np
import pytest

from semphrase import bleu, corpus


def _random_phrase(rng, tokens, max_len=2):
    length = int(rng.integers(1, max_len + 1))
    return tuple(tokens[int(rng.integers(0, len(tokens)))] for _ in range(length))


def make_random_corpus(
    rng,
    n_samples=3,
    max_candidates=4,
    n_tokens=8,
    max_pairs=3,
    max_phrase_len=2,
    n_features=2,
):
    """Random N-best corpus with consistent derivations and cached sentence BLEU."""
    tokens = [f"t{i}" for i in range(n_tokens)]
    samples = []
    for sid in range(n_samples):
        n_pairs = int(rng.integers(1, max_pairs + 1))
        src_phrases = [_random_phrase(rng, tokens, max_phrase_len) for _ in range(n_pairs)]
        source = tuple(t for p in src_phrases for t in p)
        reference = _random_phrase(rng, tokens, max_phrase_len * max_pairs + 2)
        candidates = []
        n_cand = int(rng.integers(1, max_candidates + 1))
        for _ in range(n_cand):
            derivation = [
                corpus.PhrasePair(src, _random_phrase(rng, tokens, max_phrase_len))
                for src in src_phrases
            ]
            cand_tokens = tuple(t for p in derivation for t in p.target)
            feats = rng.normal(0.0, 1.0, size=n_features)
            entry = corpus.NBestEntry(cand_tokens, feats, derivation)
            entry.sbleu = bleu.sentence_bleu(reference, cand_tokens)
            candidates.append(entry)
        samples.append(corpus.TrainingSample(sid, source, reference, candidates))
    return corpus.dedupe_candidates(samples)


def random_lambda(rng, n_features=2):
    lam = rng.normal(0.0, 1.0, size=n_features + 1)
    lam[-1] = rng.uniform(0.2, 1.5)
    return lam


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
