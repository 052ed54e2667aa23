"""Corpus engineering and evaluation toolkit for legal-domain BERT pre-training.

Stages: corpus stats, MinHash-LSH dedup, sub-domain balancing, WordPiece
training, vocabulary transfer, hybrid MLM masking, cloze scoring and BIO
segmentation metrics.
"""

__version__ = "0.1.0"

SCHEMA_VERSION = 1
