"""topflop: engagement-based top/flop datasets, classifiers, and explanations.

Subpackages and modules
-----------------------
corpus      ingest/validate/normalize comment and review corpora
dataset     position-bias removal and labeled dataset construction
textstats   tokenization, readability, sentiment, corpus analytics
embeddings  subword skip-gram embeddings (compiled kernel + numpy fallback)
models      length/profile logistic regression, CNN, bidirectional GRU
explain     LRP, sensitivity analysis, integrated gradients, word deletion
evaluation  accuracy metrics, repeated-run protocol, paired t-test, reports
cli         batch command-line pipeline
"""

__version__ = "0.1.0"
