"""
Utilities package for the sign segmenter.
Contains configuration, error categories and exit-code handling.
"""

from .error_utils import (
    SegmenterError,
    ErrorHandler,
    ErrorCategory,
    categorize_error,
    exit_code_for,
    error_context
);
from .config import Config, learning_rate_at;

__all__ = [
    'SegmenterError',
    'ErrorHandler',
    'ErrorCategory',
    'categorize_error',
    'exit_code_for',
    'error_context',
    'Config',
    'learning_rate_at'
];
