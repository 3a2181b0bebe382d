"""Span segmentation for external fine-tuning pipelines.

Load an n-gram dictionary, segment sentences into word spans by greedy
longest match, and project word spans onto subword positions.
"""

from ._spanft import (
    AlignmentError,
    ClosedHandleError,
    Dictionary,
    EmptySentenceError,
    ParseError,
    SpanftError,
    ValidationError,
    VersionError,
    load_dictionary,
    normalize,
    project,
)

__all__ = [
    "AlignmentError",
    "ClosedHandleError",
    "Dictionary",
    "EmptySentenceError",
    "ParseError",
    "SpanftError",
    "ValidationError",
    "VersionError",
    "load_dictionary",
    "normalize",
    "project",
]
