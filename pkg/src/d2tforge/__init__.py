"""Desk-scale toolkit for localized data-to-text generation.

Subpackages cover the full pipeline: schema definitions and validation,
synthetic example generation, a toy template NLG fixture, corpus quality
scoring and filtering, contrastive data selection, accuracy-error data
generation, subword tokenization, structured-data table encoding, an
attention-based RNN decoder trained from scratch, entity span annotation
with placeholder copying, evaluation metrics, and a version-pinned
pipeline CLI.
"""

__version__ = "0.1.0"
