#!/usr/bin/env python3
"""
Error Handling Utilities
Exception hierarchy, error categories and exit-code mapping for the segmenter pipeline
"""

import logging;
from typing import Dict, Optional;
from enum import Enum;

logger = logging.getLogger( __name__ );

class ErrorCategory( Enum ):
    """Categories of errors, each mapped to a process exit code."""
    USAGE = "usage"
    IO = "io"
    TRAINING = "training"
    DECODE = "decode"
    UNKNOWN = "unknown"

EXIT_CODES = {
    ErrorCategory.USAGE: 2,
    ErrorCategory.IO: 3,
    ErrorCategory.TRAINING: 4,
    ErrorCategory.DECODE: 5,
    ErrorCategory.UNKNOWN: 1
};

class SegmenterError( Exception ):
    """Base class for every error raised by the segmenter."""
    category = ErrorCategory.USAGE;

# Configuration and validation
class ConfigError( SegmenterError ):
    pass;

class DimensionError( SegmenterError ):
    """Keypoint matrix has the wrong shape."""
    pass;

class NonFiniteError( SegmenterError ):
    """NaN or infinite value where a finite coordinate is required."""
    pass;

class SimplexError( SegmenterError ):
    """Vector is not a probability distribution."""
    pass;

# Preprocessing
class EmptyClipError( SegmenterError ):
    pass;

class EmptyListError( SegmenterError ):
    pass;

class AdjacentDuplicateLabelError( SegmenterError ):
    pass;

class HandCountMismatchError( SegmenterError ):
    pass;

class InsufficientSamplesError( SegmenterError ):
    pass;

class OutOfRangeError( SegmenterError ):
    pass;

# Predictor
class DimensionMismatchError( SegmenterError ):
    pass;

class EmptyClassError( SegmenterError ):
    category = ErrorCategory.TRAINING;

class DivergenceError( SegmenterError ):
    """Training loss became NaN or infinite."""
    category = ErrorCategory.TRAINING;

class ModelIOError( SegmenterError ):
    category = ErrorCategory.IO;

class VersionError( SegmenterError ):
    category = ErrorCategory.IO;

class CorruptModelError( SegmenterError ):
    """Model file failed its checksum or could not be parsed."""
    category = ErrorCategory.IO;

# Decoding
class StreamTooShortError( SegmenterError ):
    category = ErrorCategory.DECODE;

# Evaluation
class EmptySetError( SegmenterError ):
    pass;

class NoAcceptError( SegmenterError ):
    pass;

class MissingGroundTruthError( SegmenterError ):
    pass;

# Synthetic data
class SeparationFailureError( SegmenterError ):
    pass;

class InsufficientHeldOutError( SegmenterError ):
    pass;

# Dataset files
class ManifestError( SegmenterError ):
    """Manifest could not be parsed; carries the offending line number."""

    def __init__( self, message: str, line_number: Optional[int] = None ):
        self.line_number = line_number;
        if line_number is not None:
            message = f"line {line_number}: {message}";
        super().__init__( message );

class DatasetIOError( SegmenterError ):
    category = ErrorCategory.IO;

def categorize_error( exception: BaseException ) -> ErrorCategory:
    """Categorize an exception for exit-code selection."""
    if isinstance( exception, SegmenterError ):
        return exception.category;
    if isinstance( exception, OSError ):
        return ErrorCategory.IO;
    if isinstance( exception, ( ValueError, TypeError ) ):
        return ErrorCategory.USAGE;
    return ErrorCategory.UNKNOWN;

def exit_code_for( exception: BaseException ) -> int:
    return EXIT_CODES[ categorize_error( exception ) ];

class ErrorHandler:
    """Centralized error handling with logging and per-category counts."""

    def __init__( self, service_name: str = "unknown" ):
        self.service_name = service_name;
        self.error_counts = {};

    def handle_error( self, exception: BaseException, context: str = "" ) -> ErrorCategory:
        """Handle an error and return its category."""
        category = categorize_error( exception );

        if category not in self.error_counts:
            self.error_counts[ category ] = 0;
        self.error_counts[ category ] += 1;

        context_msg = f" in {context}" if context else "";
        logger.error(
            f"{self.service_name} error{context_msg}: "
            f"{type( exception ).__name__}: {exception} "
            f"(category: {category.value}, exit code {EXIT_CODES[ category ]})"
        );

        return category;

    def get_error_summary( self ) -> Dict[ str, int ]:
        """Get summary of error counts by category."""
        return { cat.value: count for cat, count in self.error_counts.items() };

class error_context:
    """Context manager that routes errors in a block through an ErrorHandler."""

    def __init__( self, handler: ErrorHandler, context: str = "", reraise: bool = True ):
        self.handler = handler;
        self.context = context;
        self.reraise = reraise;
        self.category = None;
        self.exit_code = 0;

    def __enter__( self ):
        return self;

    def __exit__( self, exc_type, exc_val, exc_tb ):
        if exc_type is not None and issubclass( exc_type, Exception ):
            self.category = self.handler.handle_error( exc_val, self.context );
            self.exit_code = EXIT_CODES[ self.category ];
            if not self.reraise:
                return True;  # Suppress exception
        return False;
