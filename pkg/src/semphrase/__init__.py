"""Bilingual phrase embeddings trained for expected BLEU, plus N-best reranking.

The package learns a shared semantic space for source and target phrases: a
phrase is a bag-of-words vector projected through a small neural network, and
a phrase pair's translation score is the similarity of the two projections.
The projection weights are trained so that the expected sentence BLEU of
N-best translation lists goes up, and the resulting score is used as one more
feature when reranking such lists.

Modules: ``corpus`` (data model and file formats), ``bleu`` (sentence and
corpus BLEU), ``model`` (encoding, projection, similarity, persistence),
``objective`` (expected-BLEU loss and analytic gradient), ``trainer``
(L-BFGS training and weight tuning), ``rerank`` (candidate selection),
``synth`` (synthetic corpora), ``cli`` (command-line entry points).
"""

from . import bleu, corpus, model, objective, rerank, synth, trainer

__version__ = "0.1.0"

__all__ = ["bleu", "corpus", "model", "objective", "rerank", "synth", "trainer", "__version__"]
