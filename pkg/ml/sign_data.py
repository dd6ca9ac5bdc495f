#!/usr/bin/env python3
"""
Sign Data Types
Keypoint frames, isolated sign clips, continuous streams, probability vectors and decode events
"""

import logging;
from dataclasses import dataclass, field;
from enum import Enum;
from typing import Iterator, List, Optional, Sequence, Tuple, Union;
import numpy as np;

from utils.error_utils import DimensionError, NonFiniteError, SimplexError, HandCountMismatchError, EmptyClipError;

logger = logging.getLogger( __name__ );

KEYPOINTS_PER_HAND = 21;
COORDINATES = 3;
SIMPLEX_TOLERANCE = 1e-6;

Segment = Tuple[int, int, int];  # (label, start_frame, end_frame), end inclusive

def _frozen_array( values, dtype=np.float64 ) -> np.ndarray:
    array = np.array( values, dtype=dtype, copy=True );
    array.setflags( write=False );
    return array;

def _check_hands( hands: np.ndarray, where: str = "frame" ):
    if hands.ndim != 3 or hands.shape[0] not in ( 1, 2 ) or hands.shape[1:] != ( KEYPOINTS_PER_HAND, COORDINATES ):
        raise DimensionError(
            f"{where}: expected 1 or 2 hand matrices of shape {KEYPOINTS_PER_HAND}x{COORDINATES}, got {hands.shape}"
        );
    if not np.all( np.isfinite( hands ) ):
        raise NonFiniteError( f"{where}: keypoint coordinates must be finite" );

@dataclass( frozen=True )
class KeypointFrame:
    """Hand landmarks for one video frame: array of shape (hands, 21, 3)."""
    hands: np.ndarray;
    timestamp_index: int = 0;

    @property
    def hand_count( self ) -> int:
        return int( self.hands.shape[0] ) if self.hands.ndim == 3 else 0;

    @classmethod
    def from_hands( cls, hands: Sequence, timestamp_index: int = 0 ) -> "KeypointFrame":
        return cls( hands=_frozen_array( hands ), timestamp_index=int( timestamp_index ) );

def validate_frame( frame: KeypointFrame ) -> KeypointFrame:
    """
    Check a frame's invariants and return it unchanged.

    Raises:
        DimensionError: a hand matrix is not 21x3, or the hand count is not 1 or 2
        NonFiniteError: a coordinate is NaN or infinite
    """
    hands = np.asarray( frame.hands );
    if frame.timestamp_index < 0:
        raise DimensionError( f"timestamp_index must be non-negative, got {frame.timestamp_index}" );
    _check_hands( hands, f"frame {frame.timestamp_index}" );
    return frame;

def _check_sequence( keypoints: np.ndarray, where: str ):
    if keypoints.ndim != 4:
        raise DimensionError( f"{where}: expected keypoints of shape (frames, hands, 21, 3), got {keypoints.shape}" );
    if keypoints.shape[1] not in ( 1, 2 ) or keypoints.shape[2:] != ( KEYPOINTS_PER_HAND, COORDINATES ):
        raise DimensionError( f"{where}: bad keypoint shape {keypoints.shape}" );
    if not np.all( np.isfinite( keypoints ) ):
        raise NonFiniteError( f"{where}: keypoint coordinates must be finite" );

class _FrameSequence:
    """Shared frame access for clips and streams stored as one (T, hands, 21, 3) array."""
    keypoints: np.ndarray;

    def __len__( self ) -> int:
        return int( self.keypoints.shape[0] );

    @property
    def hand_count( self ) -> int:
        return int( self.keypoints.shape[1] );

    def frame( self, index: int ) -> KeypointFrame:
        return KeypointFrame( hands=self.keypoints[ index ], timestamp_index=int( index ) );

    @property
    def frames( self ) -> Iterator[KeypointFrame]:
        for index in range( len( self ) ):
            yield self.frame( index );

@dataclass( frozen=True, eq=False )
class SignClip( _FrameSequence ):
    """One isolated sign: a labeled, nonempty frame sequence."""
    keypoints: np.ndarray;
    label: int;
    source_id: str = "";

    def __post_init__( self ):
        keypoints = np.asarray( self.keypoints, dtype=np.float64 );
        if keypoints.ndim == 4 and keypoints.shape[0] == 0:
            raise EmptyClipError( f"clip {self.source_id!r} has no frames" );
        _check_sequence( keypoints, f"clip {self.source_id!r}" );
        if int( self.label ) < 0:
            raise DimensionError( f"clip {self.source_id!r}: label must be non-negative, got {self.label}" );
        object.__setattr__( self, 'keypoints', _frozen_array( keypoints ) );
        object.__setattr__( self, 'label', int( self.label ) );

    @classmethod
    def from_frames( cls, frames: Sequence[KeypointFrame], label: int, source_id: str = "" ) -> "SignClip":
        if not frames:
            raise EmptyClipError( f"clip {source_id!r} has no frames" );
        counts = { frame.hand_count for frame in frames };
        if len( counts ) != 1:
            raise HandCountMismatchError( f"clip {source_id!r} mixes hand counts {sorted( counts )}" );
        return cls( keypoints=np.stack( [ np.asarray( f.hands ) for f in frames ] ), label=label, source_id=source_id );

@dataclass( frozen=True, eq=False )
class ContinuousStream( _FrameSequence ):
    """Concatenated signs with hidden boundaries; ground truth is for evaluation only."""
    keypoints: np.ndarray;
    ground_truth: Optional[Tuple[Segment, ...]] = None;
    stream_id: str = "";

    def __post_init__( self ):
        keypoints = np.asarray( self.keypoints, dtype=np.float64 );
        _check_sequence( keypoints, f"stream {self.stream_id!r}" );
        object.__setattr__( self, 'keypoints', _frozen_array( keypoints ) );
        if self.ground_truth is not None:
            segments = tuple( ( int( a ), int( b ), int( c ) ) for a, b, c in self.ground_truth );
            _check_segments( segments, keypoints.shape[0], self.stream_id );
            object.__setattr__( self, 'ground_truth', segments );

    @property
    def labels( self ) -> List[int]:
        return [ label for label, _, _ in ( self.ground_truth or () ) ];

def _check_segments( segments: Tuple[Segment, ...], length: int, stream_id: str ):
    previous_end = -1;
    previous_label = None;
    for label, start, end in segments:
        if start <= previous_end or end < start or end >= length or start < 0:
            raise DimensionError( f"stream {stream_id!r}: segment ({label}, {start}, {end}) overlaps, is unordered or out of range" );
        if label == previous_label:
            raise DimensionError( f"stream {stream_id!r}: consecutive segments share label {label}" );
        previous_end = end;
        previous_label = label;

@dataclass( frozen=True, eq=False )
class ProbVector:
    """Softmax output over sign classes; an element of the probability simplex."""
    probs: np.ndarray;

    def __len__( self ) -> int:
        return int( self.probs.shape[0] );

    @property
    def argmax( self ) -> int:
        # np.argmax returns the first maximum: ties go to the lowest class index
        return int( np.argmax( self.probs ) );

    @property
    def max_prob( self ) -> float:
        return float( self.probs[ self.argmax ] );

def validate_prob( raw: Sequence[float] ) -> ProbVector:
    """
    Wrap a raw vector as a ProbVector after checking the simplex invariants.

    Raises:
        SimplexError: empty vector, non-finite or negative entry, entry above 1,
            or a sum differing from 1 by more than 1e-6
    """
    probs = np.asarray( raw, dtype=np.float64 ).reshape( -1 );
    if probs.size == 0:
        raise SimplexError( "probability vector is empty" );
    if not np.all( np.isfinite( probs ) ):
        raise SimplexError( "probability vector has non-finite entries" );
    if np.any( probs < 0.0 ) or np.any( probs > 1.0 ):
        raise SimplexError( f"probability entries must lie in [0, 1], got min {probs.min():.6g} max {probs.max():.6g}" );
    total = float( probs.sum() );
    if abs( total - 1.0 ) > SIMPLEX_TOLERANCE:
        raise SimplexError( f"probabilities sum to {total:.9f}, not 1" );
    return ProbVector( probs=_frozen_array( probs ) );

class BlankReason( Enum ):
    BELOW_THRESHOLD = "below_threshold"
    DUPLICATE_SUPPRESSED = "duplicate_suppressed"

@dataclass( frozen=True )
class Accept:
    class_id: int;
    confidence: float;

@dataclass( frozen=True )
class Blank:
    reason: BlankReason;

Decision = Union[Accept, Blank];

@dataclass( frozen=True )
class DecodeEvent:
    """Decoder outcome for one window position."""
    window_start: int;
    decision: Decision;
    max_prob: float;
    argmax_class: int;

    @property
    def accepted( self ) -> bool:
        return isinstance( self.decision, Accept );

    @property
    def tag( self ) -> str:
        """Short decision tag used in probability dumps."""
        if isinstance( self.decision, Accept ):
            return "accept";
        if self.decision.reason is BlankReason.BELOW_THRESHOLD:
            return "blank_below";
        return "blank_duplicate";
