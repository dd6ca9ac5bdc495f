#!/usr/bin/env python3
"""
SVD Keypoint Features
Per-frame singular-value descriptors of hand pose and hand motion

Layout per frame, in hand order:
    [ pose SVs hand 1 (3), motion SVs hand 1 (3), pose SVs hand 2 (3), motion SVs hand 2 (3) ]
Pose SVs come from the centroid-centered 21x3 keypoint matrix; motion SVs from the raw
frame-to-frame displacement matrix. One-handed data is zero-padded to the full width.
"""

import logging;
from dataclasses import dataclass;
from typing import Optional, Sequence;
import numpy as np;

from .sign_data import KeypointFrame, _frozen_array;
from utils.error_utils import NonFiniteError, HandCountMismatchError, OutOfRangeError, DimensionError;

logger = logging.getLogger( __name__ );

FEATURE_DIM = 12;
VALUES_PER_HAND = 6;

@dataclass( frozen=True )
class FeatureVector:
    """Singular-value descriptor of one frame."""
    values: np.ndarray;
    frame_index: int;

@dataclass( frozen=True )
class FeatureWindow:
    """window_size consecutive feature rows starting at start_frame."""
    matrix: np.ndarray;
    start_frame: int;

    @property
    def window_size( self ) -> int:
        return int( self.matrix.shape[0] );

def singular_values( m: np.ndarray ) -> np.ndarray:
    """
    Singular values of a keypoint matrix, descending.

    Args:
        m: Real matrix (21x3 for one hand); stacks of matrices are accepted too

    Returns:
        Nonnegative singular values sorted descending (length 3 for a 21x3 matrix)
    """
    m = np.asarray( m, dtype=np.float64 );
    if not np.all( np.isfinite( m ) ):
        raise NonFiniteError( "singular_values: matrix entries must be finite" );
    # LAPACK returns them nonnegative and sorted descending
    return np.linalg.svd( m, compute_uv=False );

def _pose( keypoints: np.ndarray ) -> np.ndarray:
    return singular_values( keypoints - keypoints.mean( axis=-2, keepdims=True ) );

def _layout( pose: np.ndarray, motion: np.ndarray ) -> np.ndarray:
    """Interleave (T, hands, 3) pose and motion blocks into zero-padded (T, 12) rows."""
    blocks = np.concatenate( [ pose, motion ], axis=-1 );
    rows = blocks.reshape( blocks.shape[0], -1 );
    if rows.shape[1] < FEATURE_DIM:
        rows = np.pad( rows, ( ( 0, 0 ), ( 0, FEATURE_DIM - rows.shape[1] ) ) );
    return rows;

def frame_features( cur: KeypointFrame, prev: Optional[KeypointFrame] = None ) -> FeatureVector:
    """
    Feature vector of one frame.

    Args:
        cur: Frame to describe
        prev: Preceding frame; motion blocks are zero when absent

    Raises:
        HandCountMismatchError: cur and prev have different hand counts
    """
    current = np.asarray( cur.hands, dtype=np.float64 )[ np.newaxis ];
    pose = _pose( current );
    if prev is None:
        motion = np.zeros_like( pose );
    else:
        previous = np.asarray( prev.hands, dtype=np.float64 )[ np.newaxis ];
        if previous.shape != current.shape:
            raise HandCountMismatchError(
                f"frame {cur.timestamp_index} has {current.shape[1]} hands, previous frame has {previous.shape[1]}"
            );
        motion = singular_values( current - previous );
    return FeatureVector( values=_frozen_array( _layout( pose, motion )[ 0 ] ), frame_index=cur.timestamp_index );

def clip_features( keypoints: np.ndarray ) -> np.ndarray:
    """
    Feature matrix for a whole frame sequence.

    Row t equals frame_features( frame t, frame t-1 ); row 0 has zero motion blocks.

    Args:
        keypoints: Array of shape (T, hands, 21, 3)

    Returns:
        Array of shape (T, 12)
    """
    keypoints = np.asarray( keypoints, dtype=np.float64 );
    if keypoints.ndim != 4:
        raise DimensionError( f"clip_features: expected (frames, hands, 21, 3), got {keypoints.shape}" );
    if keypoints.shape[0] == 0:
        return np.zeros( ( 0, FEATURE_DIM ) );
    pose = _pose( keypoints );
    motion = np.zeros_like( pose );
    if keypoints.shape[0] > 1:
        motion[ 1: ] = singular_values( keypoints[ 1: ] - keypoints[ :-1 ] );
    return _layout( pose, motion );

def extract_window( stream_features, start: int, window_size: int ) -> FeatureWindow:
    """
    Rows [start, start + window_size) of a feature sequence.

    Args:
        stream_features: (T, D) array or sequence of FeatureVector
        start: First row
        window_size: Number of rows

    Raises:
        OutOfRangeError: the window does not fit inside the sequence
    """
    if isinstance( stream_features, np.ndarray ):
        matrix = stream_features;
    else:
        matrix = np.array( [ fv.values for fv in stream_features ], dtype=np.float64 );
    length = int( matrix.shape[0] );
    if start < 0 or window_size < 1 or start + window_size > length:
        raise OutOfRangeError( f"window [{start}, {start + window_size}) does not fit a sequence of {length} frames" );
    return FeatureWindow( matrix=_frozen_array( matrix[ start:start + window_size ] ), start_frame=int( start ) );

def window_stack( features: np.ndarray, starts: Sequence[int], window_size: int ) -> np.ndarray:
    """Stack of windows (len(starts), window_size, D) taken from one feature matrix."""
    features = np.asarray( features, dtype=np.float64 );
    index = np.asarray( starts, dtype=np.int64 )[ :, np.newaxis ] + np.arange( window_size )[ np.newaxis, : ];
    return features[ index ];
