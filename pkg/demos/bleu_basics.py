"""Sentence- and corpus-level BLEU behavior in small, checkable cases.

Run from the repository root:

    python demos/bleu_basics.py
"""

import math

from semphrase import bleu

ref = "the cat sat on the mat".split()

# Sentence scores are smoothed (add-one on orders >= 2): an exact match is
# still 1.0, zero unigram overlap is still 0.0, and anything in between gets
# a positive, informative score even when some n-gram order has no matches.
cases = [
    ref,
    "the cat sat on the rug".split(),
    "a cat sat down".split(),
    "completely unrelated words here".split(),
]
print("sentence BLEU against:", " ".join(ref))
for cand in cases:
    print(f"  {' '.join(cand):<32} -> {bleu.sentence_bleu(ref, cand):.4f}")

# Short candidates are scored with n-gram orders up to their own length,
# so a 2-token candidate is judged on unigrams and bigrams only.
print(f"\n  {'on the':<32} -> {bleu.sentence_bleu(ref, ['on', 'the']):.4f}"
      f"   (brevity penalty exp(1 - 6/2) = {math.exp(1 - 6 / 2):.4f})")

# Corpus BLEU is the standard unsmoothed aggregate: statistics are summed
# over the corpus before the geometric mean and the brevity penalty.
pairs = [
    (ref, "the cat sat on the rug".split()),
    ("it is raining".split(), "it is raining".split()),
    ("he reads a book".split(), "he reads the book".split()),
]
print(f"\ncorpus BLEU over {len(pairs)} pairs: {bleu.corpus_bleu(pairs):.4f}")

# Replacing any candidate with its reference never lowers corpus BLEU.
promoted = [(r, r) for r, _ in pairs]
print(f"after promoting every candidate to its reference: {bleu.corpus_bleu(promoted):.4f}")
