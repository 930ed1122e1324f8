"""Emotion-cause pair extraction for conversations."""

import json

from ._core import (
    DEFAULT_THRESHOLD,
    EMOTIONS,
    AlignmentError,
    Error,
    FormatError,
    ParseError,
    ShapeError,
    ValidationError,
    align_span,
    build_context,
    build_target,
    canonical_corpus,
    causality_matrix,
    confusion,
    extract_pairs,
    feature_hash,
    hash_embed,
    make_question,
    render_table,
    score_json,
    softmax,
    validate_corpus,
)

__version__ = "0.1.0"


def score(corpus_json, predictions_json):
    """Score report as a dict."""
    return json.loads(score_json(corpus_json, predictions_json))


__all__ = [
    "DEFAULT_THRESHOLD",
    "EMOTIONS",
    "AlignmentError",
    "Error",
    "FormatError",
    "ParseError",
    "ShapeError",
    "ValidationError",
    "align_span",
    "build_context",
    "build_target",
    "canonical_corpus",
    "causality_matrix",
    "confusion",
    "extract_pairs",
    "feature_hash",
    "hash_embed",
    "make_question",
    "render_table",
    "score",
    "score_json",
    "softmax",
    "validate_corpus",
]
