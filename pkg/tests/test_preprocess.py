#!/usr/bin/env python3
"""
Tests for clip resampling, stream concatenation, stratified splitting and training windows
"""

import os;
import sys;
import logging;
import numpy as np;

# Add the project root to Python path for imports
sys.path.insert( 0, os.path.dirname( os.path.dirname( os.path.abspath( __file__ ) ) ) );

from ml.sign_data import SignClip;
from services.preprocess import (
    SplitSpec, resample_clip, concat_clips, split_counts, split_dataset, clips_to_windows,
    interleave_clips, window_targets, boundary_windows, training_windows
);
from utils.config import Config;
from utils.error_utils import (
    EmptyListError, AdjacentDuplicateLabelError, HandCountMismatchError, InsufficientSamplesError, ConfigError
);

def _random_clip( rng, length: int, label: int, hands: int = 1, source_id: str = "" ) -> SignClip:
    return SignClip( keypoints=rng.normal( size=( length, hands, 21, 3 ) ), label=label, source_id=source_id );

def _raises( exception_type, fn, *args, **kwargs ) -> bool:
    try:
        fn( *args, **kwargs );
    except exception_type:
        return True;
    return False;

def test_resample_selects_every_other_frame():
    """99 frames down to 50 keeps frames 0, 2, 4, ..., 98 exactly."""
    clip = _random_clip( np.random.default_rng( 3 ), 99, 0 );
    resampled = resample_clip( clip, 50 );
    assert len( resampled ) == 50;
    assert np.array_equal( resampled.keypoints, clip.keypoints[ ::2 ] );

def test_resample_linear_ramp():
    """Linear motion is reproduced to 1e-9 and endpoints are kept."""
    rng = np.random.default_rng( 4 );
    start = rng.normal( size=( 1, 2, 21, 3 ) );
    velocity = rng.normal( size=( 1, 2, 21, 3 ) );
    for length, target in ( ( 37, 50 ), ( 80, 50 ), ( 2, 50 ), ( 50, 13 ) ):
        t = np.arange( length, dtype=np.float64 )[ :, None, None, None ];
        clip = SignClip( keypoints=start + velocity * t, label=1 );
        resampled = resample_clip( clip, target );
        positions = np.arange( target ) * ( length - 1 ) / ( target - 1 );
        expected = start + velocity * positions[ :, None, None, None ];
        assert np.max( np.abs( resampled.keypoints - expected ) ) <= 1e-9;
        assert np.array_equal( resampled.keypoints[ 0 ], clip.keypoints[ 0 ] );
        assert np.array_equal( resampled.keypoints[ -1 ], clip.keypoints[ -1 ] );

def test_resample_idempotent_at_target():
    clip = _random_clip( np.random.default_rng( 5 ), 50, 2 );
    once = resample_clip( clip, 50 );
    assert np.array_equal( once.keypoints, clip.keypoints );
    assert np.array_equal( resample_clip( once, 50 ).keypoints, once.keypoints );
    assert once.label == clip.label;
    assert _raises( ConfigError, resample_clip, clip, 1 );

def test_concat_clips():
    """Ground truth covers every clip with inclusive ends."""
    rng = np.random.default_rng( 6 );
    clips = [ _random_clip( rng, n, label ) for n, label in ( ( 40, 0 ), ( 60, 1 ), ( 55, 2 ) ) ];
    stream = concat_clips( clips, "s" );
    assert len( stream ) == 155;
    assert stream.ground_truth == ( ( 0, 0, 39 ), ( 1, 40, 99 ), ( 2, 100, 154 ) );
    assert np.array_equal( stream.keypoints[ 40:100 ], clips[ 1 ].keypoints );

    single = concat_clips( clips[ :1 ] );
    assert single.ground_truth == ( ( 0, 0, 39 ), );

    assert _raises( EmptyListError, concat_clips, [] );
    assert _raises( AdjacentDuplicateLabelError, concat_clips, [ clips[ 0 ], clips[ 0 ] ] );
    assert _raises( HandCountMismatchError, concat_clips, [ clips[ 0 ], _random_clip( rng, 10, 5, hands=2 ) ] );

def test_split_counts():
    spec = SplitSpec();
    assert split_counts( 100, spec ) == ( 72, 8, 20 );
    assert split_counts( 7, spec ) == ( 5, 1, 1 );
    assert split_counts( 30, spec ) == ( 22, 2, 6 );
    assert split_counts( 2, spec ) == ( 1, 0, 1 );

def test_split_dataset_partition():
    """Disjoint, stratified, deterministic and independent of class order."""
    rng = np.random.default_rng( 8 );
    clips = [ _random_clip( rng, 3, label, source_id=f"{label}_{i}" ) for label in range( 4 ) for i in range( 10 ) ];
    train, val, test = split_dataset( clips, SplitSpec( seed=11 ) );

    ids = lambda subset: [ c.source_id for c in subset ];
    assert len( set( ids( train ) ) | set( ids( val ) ) | set( ids( test ) ) ) == len( clips );
    assert not ( set( ids( train ) ) & set( ids( test ) ) ) and not ( set( ids( val ) ) & set( ids( test ) ) );
    for label in range( 4 ):
        assert sum( 1 for c in test if c.label == label ) == 2;
        assert sum( 1 for c in val if c.label == label ) == 1;

    again = split_dataset( clips, SplitSpec( seed=11 ) );
    assert [ ids( s ) for s in again ] == [ ids( train ), ids( val ), ids( test ) ];

    reordered = clips[ 30: ] + clips[ 10:30 ] + clips[ :10 ];
    moved = split_dataset( reordered, SplitSpec( seed=11 ) );
    assert [ set( ids( s ) ) for s in moved ] == [ set( ids( train ) ), set( ids( val ) ), set( ids( test ) ) ];

    order = { source_id: i for i, source_id in enumerate( ids( clips ) ) };
    assert ids( train ) == sorted( ids( train ), key=order.get );

def test_split_needs_two_per_class():
    rng = np.random.default_rng( 9 );
    clips = [ _random_clip( rng, 3, 0 ), _random_clip( rng, 3, 0 ), _random_clip( rng, 3, 1 ) ];
    assert _raises( InsufficientSamplesError, split_dataset, clips, SplitSpec() );

def test_clips_to_windows():
    rng = np.random.default_rng( 10 );
    clips = [ _random_clip( rng, n, i % 2, hands=2 ) for i, n in enumerate( ( 30, 64, 50 ) ) ];
    data = clips_to_windows( clips, 50 );
    assert data.windows.shape == ( 3, 50, 12 );
    assert list( data.labels ) == [ 0, 1, 0 ];
    assert len( clips_to_windows( [], 50 ) ) == 0;

def test_interleave_clips():
    """Every clip of a balanced set appears once, with no two neighbors sharing a label."""
    rng = np.random.default_rng( 11 );
    clips = [ _random_clip( rng, 5, label, source_id=f"{label}_{i}" ) for label in range( 4 ) for i in range( 5 ) ];
    order = interleave_clips( clips, np.random.default_rng( [ 7, 0 ] ) );
    assert sorted( c.source_id for c in order ) == sorted( c.source_id for c in clips );
    assert all( a.label != b.label for a, b in zip( order, order[ 1: ] ) );

    again = interleave_clips( clips, np.random.default_rng( [ 7, 0 ] ) );
    assert [ c.source_id for c in again ] == [ c.source_id for c in order ];
    other = interleave_clips( clips, np.random.default_rng( [ 7, 1 ] ) );
    assert [ c.source_id for c in other ] != [ c.source_id for c in order ];

    lopsided = [ _random_clip( rng, 5, 0 ) for _ in range( 4 ) ] + [ _random_clip( rng, 5, 1 ) ];
    placed = interleave_clips( lopsided, np.random.default_rng( 3 ) );
    assert 2 <= len( placed ) <= 3 and all( a.label != b.label for a, b in zip( placed, placed[ 1: ] ) );
    assert interleave_clips( [], np.random.default_rng( 3 ) ) == [];

def test_window_targets():
    """One-hot inside a sign, or when a short sign fills its window; coverage-weighted across a boundary."""
    segments = [ ( 0, 0, 29 ), ( 1, 30, 59 ), ( 2, 60, 119 ) ];
    labels, targets = window_targets( segments, [ 0, 20, 25, 40, 50, 100 ], 20, 3, 0.9, 0.3 );
    np.testing.assert_allclose( targets, [
        [ 1.0, 0.0, 0.0 ],
        [ 0.5, 0.5, 0.0 ],
        [ 0.25, 0.75, 0.0 ],
        [ 0.0, 1.0, 0.0 ],
        [ 0.0, 0.5, 0.5 ],
        [ 0.0, 0.0, 1.0 ]
    ], atol=1e-12 );
    assert list( labels ) == [ 0, 0, 1, 1, 1, 2 ];

    short = [ ( 0, 0, 29 ), ( 1, 30, 39 ), ( 2, 40, 69 ) ];
    labels, targets = window_targets( short, [ 25 ], 20, 3, 0.9, 0.3 );
    assert list( labels ) == [ 1 ] and list( targets[ 0 ] ) == [ 0.0, 1.0, 0.0 ];
    _, strict = window_targets( short, [ 25 ], 20, 3, 0.9, 0.8 );
    np.testing.assert_allclose( strict[ 0 ], [ 0.25 / 1.5, 1.0 / 1.5, 0.25 / 1.5 ], atol=1e-12 );

def test_boundary_windows():
    rng = np.random.default_rng( 12 );
    clips = [ _random_clip( rng, int( rng.integers( 20, 31 ) ), label, hands=2 ) for label in range( 3 ) for _ in range( 4 ) ];
    config = Config( window_size=10, stream_passes=2, stream_window_stride=3, seed=5 );
    data = boundary_windows( clips, config, 3 );

    total = sum( len( c ) for c in clips );
    assert len( data ) == 2 * ( ( total - 10 ) // 3 + 1 );
    assert data.windows.shape[ 1: ] == ( 10, 12 ) and data.targets.shape == ( len( data ), 3 );
    np.testing.assert_allclose( data.targets.sum( axis=1 ), 1.0, atol=1e-12 );
    assert np.array_equal( data.labels, data.targets.argmax( axis=1 ) );
    assert 0 < int( data.pure.sum() ) < len( data );

    again = boundary_windows( clips, config, 3 );
    assert np.array_equal( again.windows, data.windows ) and np.array_equal( again.targets, data.targets );
    salted = boundary_windows( clips, config, 3, salt=1 );
    assert not np.array_equal( salted.labels, data.labels );

    none = boundary_windows( clips, config.replace( stream_passes=0 ), 3 );
    assert len( none ) == 0 and none.targets.shape == ( 0, 3 );
    assert len( boundary_windows( [], config, 3 ) ) == 0;

def test_training_windows():
    """Isolated windows first with one-hot targets, boundary windows after."""
    rng = np.random.default_rng( 13 );
    clips = [ _random_clip( rng, int( rng.integers( 20, 31 ) ), label, hands=2 ) for label in range( 3 ) for _ in range( 3 ) ];
    config = Config( window_size=10, stream_passes=1, stream_window_stride=4 );
    data = training_windows( clips, config, 3 );
    isolated = clips_to_windows( clips, 10 );
    assert len( data ) == len( isolated ) + len( boundary_windows( clips, config, 3 ) );
    assert np.array_equal( data.windows[ :9 ], isolated.windows );
    assert np.array_equal( data.targets[ :9 ], np.eye( 3 )[ isolated.labels ] );

    plain = training_windows( clips, config.replace( stream_passes=0 ), 3 );
    assert plain.targets is None and len( plain ) == 9;


TESTS = [
    test_resample_selects_every_other_frame,
    test_resample_linear_ramp,
    test_resample_idempotent_at_target,
    test_concat_clips,
    test_split_counts,
    test_split_dataset_partition,
    test_split_needs_two_per_class,
    test_clips_to_windows,
    test_interleave_clips,
    test_window_targets,
    test_boundary_windows,
    test_training_windows
];

def main():
    """Run all preprocessing tests."""
    print( "🧪 Preprocessing tests" );
    print( "=" * 50 );
    logging.basicConfig( level=logging.WARNING );

    passed = 0;
    for test in TESTS:
        try:
            test();
            print( f"✅ {test.__name__}" );
            passed += 1;
        except Exception as e:
            print( f"❌ {test.__name__}: {type( e ).__name__}: {e}" );

    print( f"\n📊 Test Results: {passed}/{len( TESTS )} tests passed" );
    return passed == len( TESTS );

if __name__ == "__main__":
    success = main();
    sys.exit( 0 if success else 1 );
