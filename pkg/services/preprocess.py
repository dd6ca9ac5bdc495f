#!/usr/bin/env python3
"""
Clip Preprocessing
Frame-count equalization, continuous-stream construction, stratified dataset splitting
and the isolated plus boundary windows a classifier trains on
"""

import math;
import logging;
from dataclasses import dataclass;
from typing import Dict, List, Sequence, Tuple;
import numpy as np;

from ml.sign_data import SignClip, ContinuousStream;
from ml.features import FEATURE_DIM, clip_features, window_stack;
from ml.predictor import LabeledWindows;
from utils.config import Config;
from utils.error_utils import (
    EmptyClipError, EmptyListError, AdjacentDuplicateLabelError, HandCountMismatchError,
    InsufficientSamplesError, ConfigError
);

logger = logging.getLogger( __name__ );

# Guards floor() against products such as 100 * 0.19999999999999996
_FLOOR_EPSILON = 1e-9;

@dataclass( frozen=True )
class SplitSpec:
    """Stratified split: train_fraction of each class for training, the rest for test."""
    train_fraction: float = 0.8;
    val_fraction_of_train: float = 0.1;
    seed: int = 7;

    def __post_init__( self ):
        if not ( 0.0 < self.train_fraction < 1.0 ) or not ( 0.0 < self.val_fraction_of_train < 1.0 ):
            raise ConfigError( "split fractions must lie in (0, 1)" );

def resample_clip( clip: SignClip, target_len: int ) -> SignClip:
    """
    Equalize a clip to target_len frames.

    Output frame i samples source position i*(L-1)/(T-1), interpolating coordinates
    linearly between the two bracketing source frames. Endpoints are preserved and
    integral positions copy the source frame exactly.
    """
    if len( clip ) == 0:
        raise EmptyClipError( f"clip {clip.source_id!r} has no frames" );
    if target_len < 2:
        raise ConfigError( f"target_len must be >= 2, got {target_len}" );

    source = clip.keypoints;
    length = len( clip );
    if length == target_len:
        return clip;

    positions = np.arange( target_len ) * ( length - 1 ) / ( target_len - 1 );
    lower = np.floor( positions ).astype( np.int64 );
    upper = np.minimum( lower + 1, length - 1 );
    frac = ( positions - lower )[ :, np.newaxis, np.newaxis, np.newaxis ];

    blended = source[ lower ] * ( 1.0 - frac ) + source[ upper ] * frac;
    resampled = np.where( frac == 0.0, source[ lower ], blended );
    return SignClip( keypoints=resampled, label=clip.label, source_id=clip.source_id );

def concat_clips( clips: Sequence[SignClip], stream_id: str = "" ) -> ContinuousStream:
    """
    Concatenate isolated clips, without resampling, into one continuous stream.

    Ground truth records (label, start, end) for every clip in order, end inclusive.
    """
    if not clips:
        raise EmptyListError( "concat_clips needs at least one clip" );

    hand_counts = { clip.hand_count for clip in clips };
    if len( hand_counts ) != 1:
        raise HandCountMismatchError( f"clips mix hand counts {sorted( hand_counts )}" );

    segments = [];
    start = 0;
    for index, clip in enumerate( clips ):
        if index > 0 and clip.label == clips[ index - 1 ].label:
            raise AdjacentDuplicateLabelError(
                f"clips {index - 1} and {index} share label {clip.label}"
            );
        end = start + len( clip ) - 1;
        segments.append( ( clip.label, start, end ) );
        start = end + 1;

    keypoints = np.concatenate( [ clip.keypoints for clip in clips ], axis=0 );
    return ContinuousStream( keypoints=keypoints, ground_truth=tuple( segments ), stream_id=stream_id );

def split_counts( n: int, spec: SplitSpec ) -> Tuple[int, int, int]:
    """Per-class (train, validation, test) sizes for a class with n clips."""
    n_test = max( 1, math.floor( n * ( 1.0 - spec.train_fraction ) + _FLOOR_EPSILON ) );
    pool = n - n_test;
    n_val = max( 1, math.floor( pool * spec.val_fraction_of_train + _FLOOR_EPSILON ) ) if pool >= 2 else 0;
    return pool - n_val, n_val, n_test;

def split_dataset( clips: Sequence[SignClip], spec: SplitSpec ) -> Tuple[List[SignClip], List[SignClip], List[SignClip]]:
    """
    Stratified, seeded train / validation / test partition.

    Each class is shuffled with its own generator derived from (seed, label), so the
    result does not depend on the order classes appear in. Within each subset clips
    keep their input order.

    Raises:
        InsufficientSamplesError: a class has fewer than 2 clips
    """
    by_class: Dict[int, List[int]] = {};
    for index, clip in enumerate( clips ):
        by_class.setdefault( clip.label, [] ).append( index );

    assignment = {};
    for label in sorted( by_class ):
        members = by_class[ label ];
        if len( members ) < 2:
            raise InsufficientSamplesError( f"class {label} has {len( members )} clip(s); at least 2 are required" );
        n_train, n_val, n_test = split_counts( len( members ), spec );
        order = np.random.default_rng( [ spec.seed, label ] ).permutation( len( members ) );
        shuffled = [ members[ i ] for i in order ];
        for index in shuffled[ :n_test ]:
            assignment[ index ] = 'test';
        for index in shuffled[ n_test:n_test + n_val ]:
            assignment[ index ] = 'val';
        for index in shuffled[ n_test + n_val: ]:
            assignment[ index ] = 'train';

    train = [ clips[ i ] for i in range( len( clips ) ) if assignment[ i ] == 'train' ];
    val = [ clips[ i ] for i in range( len( clips ) ) if assignment[ i ] == 'val' ];
    test = [ clips[ i ] for i in range( len( clips ) ) if assignment[ i ] == 'test' ];

    logger.info( f"Split {len( clips )} clips into {len( train )} train / {len( val )} validation / {len( test )} test" );
    return train, val, test;

def clips_to_windows( clips: Sequence[SignClip], window_size: int ) -> LabeledWindows:
    """Equalize every clip to window_size frames and stack their feature matrices."""
    if not clips:
        return LabeledWindows( windows=np.zeros( ( 0, window_size, FEATURE_DIM ) ), labels=np.zeros( 0, dtype=np.int64 ) );
    windows = np.stack( [ clip_features( resample_clip( clip, window_size ).keypoints ) for clip in clips ] );
    return LabeledWindows( windows=windows, labels=np.array( [ clip.label for clip in clips ], dtype=np.int64 ) );

def interleave_clips( clips: Sequence[SignClip], rng: np.random.Generator ) -> List[SignClip]:
    """
    Every clip once, in seeded rounds that visit each class with clips left in random
    order, with no two neighbors sharing a label. Clips of a single class left over at
    the end are dropped.
    """
    queues: Dict[int, List[SignClip]] = {};
    for clip in clips:
        queues.setdefault( clip.label, [] ).append( clip );
    for label in sorted( queues ):
        members = queues[ label ];
        queues[ label ] = [ members[ i ] for i in rng.permutation( len( members ) ) ];

    order: List[SignClip] = [];
    while True:
        labels = [ label for label in sorted( queues ) if queues[ label ] ];
        if not labels:
            break;
        labels = [ labels[ i ] for i in rng.permutation( len( labels ) ) ];
        if order and labels[ 0 ] == order[ -1 ].label:
            if len( labels ) == 1:
                logger.debug( f"Dropping {len( queues[ labels[ 0 ] ] )} leftover clip(s) of class {labels[ 0 ]}" );
                break;
            labels = labels[ 1: ] + labels[ :1 ];
        for label in labels:
            order.append( queues[ label ].pop() );
    return order;

def window_targets( segments: Sequence[Tuple[int, int, int]], starts: Sequence[int], window_size: int,
                    num_classes: int, pure_coverage: float, pure_margin: float ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Dominant labels (N,) and soft targets (N, K) for windows [s, s + W - 1] over a stream.

    A class scores the share of its segment the window covers, overlap / min(W, segment
    length), taking its best segment. A window whose top score reaches pure_coverage and
    leads the runner-up by pure_margin gets a one-hot target; any other window gets the
    scores renormalized over the classes it touches.
    """
    seg_labels = np.array( [ label for label, _, _ in segments ], dtype=np.int64 );
    seg_starts = np.array( [ start for _, start, _ in segments ], dtype=np.int64 );
    seg_ends = np.array( [ end for _, _, end in segments ], dtype=np.int64 );
    starts = np.asarray( starts, dtype=np.int64 )[ :, np.newaxis ];

    overlap = np.minimum( starts + window_size - 1, seg_ends ) - np.maximum( starts, seg_starts ) + 1;
    coverage = np.clip( overlap, 0, None ) / np.minimum( window_size, seg_ends - seg_starts + 1 );
    scores = np.zeros( ( starts.shape[0], num_classes ) );
    for column, label in enumerate( seg_labels ):
        scores[ :, label ] = np.maximum( scores[ :, label ], coverage[ :, column ] );

    ranked = np.sort( scores, axis=1 );
    best = ranked[ :, -1 ];
    second = ranked[ :, -2 ] if num_classes > 1 else np.zeros_like( best );
    pure = ( best >= pure_coverage ) & ( best - second >= pure_margin );
    dominant = scores.argmax( axis=1 );

    targets = scores / scores.sum( axis=1, keepdims=True );
    targets[ pure ] = np.eye( num_classes )[ dominant[ pure ] ];
    return dominant, targets;

def boundary_windows( clips: Sequence[SignClip], config: Config, num_classes: int, salt: int = 0 ) -> LabeledWindows:
    """
    Windows cut every stream_window_stride frames from stream_passes seeded
    concatenations of the clips, labelled by window_targets.

    Args:
        clips: Clips of one split (never the test split)
        config: Window size, passes, stride, purity rule and seed
        num_classes: Class count K of the target rows
        salt: Separates the streams of different splits drawn with the same seed
    """
    W = config.window_size;
    windows, labels, targets = [], [], [];
    for pass_index in range( config.stream_passes if clips else 0 ):
        rng = np.random.default_rng( [ config.seed, 3, salt, pass_index ] );
        order = interleave_clips( clips, rng );
        stream = concat_clips( order, f"boundary{salt}_{pass_index}" );
        if len( stream ) < W:
            continue;
        starts = np.arange( 0, len( stream ) - W + 1, config.stream_window_stride );
        dominant, soft = window_targets( stream.ground_truth, starts, W, num_classes,
                                         config.pure_coverage, config.pure_margin );
        windows.append( window_stack( clip_features( stream.keypoints ), starts, W ) );
        labels.append( dominant );
        targets.append( soft );

    if not windows:
        return LabeledWindows( windows=np.zeros( ( 0, W, FEATURE_DIM ) ), labels=np.zeros( 0, dtype=np.int64 ),
                               targets=np.zeros( ( 0, num_classes ) ) );
    result = LabeledWindows( windows=np.concatenate( windows ), labels=np.concatenate( labels ),
                             targets=np.concatenate( targets ) );
    logger.info( f"Cut {len( result )} boundary windows ({int( result.pure.sum() )} pure) from {len( clips )} clips" );
    return result;

def training_windows( clips: Sequence[SignClip], config: Config, num_classes: int, salt: int = 0 ) -> LabeledWindows:
    """Resampled isolated clips followed by their boundary windows."""
    isolated = clips_to_windows( clips, config.window_size );
    boundary = boundary_windows( clips, config, num_classes, salt );
    if len( boundary ) == 0:
        return isolated;
    return LabeledWindows.concat( [ isolated, boundary ], num_classes );
