#!/usr/bin/env python3
"""
Tests for the synthetic keypoint generator and the continuous test suite
"""

import os;
import sys;
import logging;
import itertools;
import numpy as np;

# Add the project root to Python path for imports
sys.path.insert( 0, os.path.dirname( os.path.dirname( os.path.abspath( __file__ ) ) ) );

from ml.features import clip_features;
from ml.predictor import ModelKind, train;
from services.preprocess import SplitSpec, split_dataset, clips_to_windows, concat_clips;
from services.synth_generator import (
    SynthSpec, generate, build_prototypes, prototype_keypoints, build_continuous_suite, rest_poses, rest_weight
);
from services.evaluation import isolated_accuracy;
from utils.config import Config;
from utils.error_utils import ConfigError, SeparationFailureError, InsufficientHeldOutError;

def _raises( exception_type, fn, *args, **kwargs ) -> bool:
    try:
        fn( *args, **kwargs );
    except exception_type:
        return True;
    return False;

SMALL = SynthSpec( num_classes=4, samples_per_class=3, length_range=( 20, 30 ), window_size=20 );

def test_generation_is_deterministic():
    first, second = generate( SMALL ), generate( SMALL );
    assert [ c.source_id for c in first ] == [ c.source_id for c in second ];
    assert all( np.array_equal( a.keypoints, b.keypoints ) for a, b in zip( first, second ) );

    other = generate( SynthSpec( num_classes=4, samples_per_class=3, length_range=( 20, 30 ), window_size=20, seed=8 ) );
    assert not np.array_equal( first[ 0 ].keypoints, other[ 0 ].keypoints );

def test_clip_shapes_and_lengths():
    clips = generate( SMALL );
    assert len( clips ) == 12;
    assert [ c.label for c in clips ] == [ label for label in range( 4 ) for _ in range( 3 ) ];
    assert clips[ 4 ].source_id == "class001_sample001";
    for clip in clips:
        assert 20 <= len( clip ) <= 30 and clip.hand_count == 2;
        assert np.all( np.isfinite( clip.keypoints ) );

    one_hand = generate( SynthSpec( num_classes=2, samples_per_class=1, hands=1, length_range=( 5, 5 ), window_size=10 ) );
    assert one_hand[ 0 ].hand_count == 1 and len( one_hand[ 0 ] ) == 5;

def test_noise_free_pose_equals_extents():
    """Without noise, jitter, translation or deformation, every frame's pose values are the class extents."""
    spec = SynthSpec( num_classes=3, samples_per_class=2, noise_sigma=0.0, rotation_jitter_deg=0.0,
                      translation_sigma=0.0, deformation=0.0, length_range=( 10, 15 ), window_size=20, rest_fraction=0.0 );
    prototypes = build_prototypes( spec );
    for clip in generate( spec ):
        features = clip_features( clip.keypoints );
        for hand in range( 2 ):
            extents = prototypes[ clip.label ][ hand ].extents;
            assert np.max( np.abs( features[ :, 6 * hand:6 * hand + 3 ] - extents ) ) <= 1e-9;

def test_clips_start_and_end_at_rest():
    """Noise-free clips begin and end on the shared rest pose, so joins between classes do not jump."""
    spec = SynthSpec( num_classes=4, samples_per_class=2, noise_sigma=0.0, rotation_jitter_deg=0.0,
                      translation_sigma=0.0, length_range=( 20, 30 ), window_size=20 );
    rest = rest_poses( spec );
    clips = generate( spec );
    for clip in clips:
        assert np.allclose( clip.keypoints[ 0 ], rest, atol=1e-12 ) and np.allclose( clip.keypoints[ -1 ], rest, atol=1e-12 );
        middle = clip.keypoints[ len( clip ) // 2 ];
        assert np.linalg.norm( middle - rest ) > 0.1;

    stream = concat_clips( [ clips[ 0 ], clips[ 2 ], clips[ 4 ], clips[ 6 ] ] );
    joins = [ start for _, start, _ in stream.ground_truth[ 1: ] ];
    jumps = [ np.linalg.norm( stream.keypoints[ j ] - stream.keypoints[ j - 1 ] ) for j in joins ];
    assert max( jumps ) < 1e-9;

    abrupt = generate( SynthSpec( num_classes=4, samples_per_class=2, noise_sigma=0.0, rotation_jitter_deg=0.0,
                                  translation_sigma=0.0, length_range=( 20, 30 ), window_size=20, rest_fraction=0.0 ) );
    abrupt_stream = concat_clips( [ abrupt[ 0 ], abrupt[ 2 ], abrupt[ 4 ], abrupt[ 6 ] ] );
    abrupt_jumps = [ np.linalg.norm( abrupt_stream.keypoints[ s ] - abrupt_stream.keypoints[ s - 1 ] )
                     for _, s, _ in abrupt_stream.ground_truth[ 1: ] ];
    assert min( abrupt_jumps ) > 0.1;

    np.testing.assert_allclose( rest_weight( np.array( [ 0.0, 0.075, 0.15, 0.5, 0.85, 1.0 ] ), 0.15 ),
                                [ 0.0, 0.5, 1.0, 1.0, 1.0, 0.0 ], atol=1e-12 );
    assert _raises( ConfigError, SynthSpec, rest_fraction=0.5 );


def test_prototypes_are_separated():
    spec = SynthSpec( num_classes=8, samples_per_class=1 );
    signatures = [
        clip_features( prototype_keypoints( hands, np.linspace( 0.0, 1.0, 55 ), rest_poses( spec ), spec.rest_fraction ) ).mean( axis=0 )
        for hands in build_prototypes( spec )
    ];
    for a, b in itertools.combinations( signatures, 2 ):
        assert np.linalg.norm( a - b ) >= 5 * spec.noise_sigma;

def test_separation_failure_and_validation():
    spec = SynthSpec( num_classes=3, samples_per_class=1, noise_sigma=100.0, max_retries=0 );
    assert _raises( SeparationFailureError, generate, spec );
    assert _raises( ConfigError, SynthSpec, num_classes=1 );
    assert _raises( ConfigError, SynthSpec, length_range=( 40, 30 ) );
    assert _raises( ConfigError, SynthSpec, hands=3 );

def test_continuous_suite():
    """Every stream covers each class once, in a seeded order, cycling through held-out clips."""
    clips = generate( SMALL );
    streams = build_continuous_suite( clips, 5, seed=13 );
    assert [ s.stream_id for s in streams ] == [ f"stream{i:03d}" for i in range( 5 ) ];
    for stream in streams:
        assert sorted( stream.labels ) == [ 0, 1, 2, 3 ];
        assert stream.ground_truth[ 0 ][ 1 ] == 0 and stream.ground_truth[ -1 ][ 2 ] == len( stream ) - 1;

    by_id = { clip.source_id: clip for clip in clips };
    fourth = streams[ 4 ];
    label, start, end = fourth.ground_truth[ 0 ];
    expected = by_id[ f"class{label:03d}_sample{4 % 3:03d}" ];
    assert np.array_equal( fourth.keypoints[ start:end + 1 ], expected.keypoints );

    again = build_continuous_suite( clips, 5, seed=13 );
    assert [ s.labels for s in again ] == [ s.labels for s in streams ];

    assert _raises( InsufficientHeldOutError, build_continuous_suite, clips, 0, 13 );
    assert _raises( InsufficientHeldOutError, build_continuous_suite, [ c for c in clips if c.label != 2 ], 2, 13, 4 );

def test_centroid_separates_synthetic_classes():
    """The generated classes are easy for the nearest-centroid baseline."""
    spec = SynthSpec( num_classes=10, samples_per_class=20 );
    clips = generate( spec );
    train_clips, val_clips, test_clips = split_dataset( clips, SplitSpec( seed=spec.seed ) );
    config = Config();
    model, _ = train(
        clips_to_windows( train_clips, config.window_size ), clips_to_windows( val_clips, config.window_size ),
        config, kind=ModelKind.CENTROID
    );
    accuracy = isolated_accuracy( model, clips_to_windows( test_clips, config.window_size ) );
    assert accuracy.mean >= 0.95, f"centroid accuracy {accuracy.mean}";

TESTS = [
    test_generation_is_deterministic,
    test_clip_shapes_and_lengths,
    test_noise_free_pose_equals_extents,
    test_clips_start_and_end_at_rest,
    test_prototypes_are_separated,
    test_separation_failure_and_validation,
    test_continuous_suite,
    test_centroid_separates_synthetic_classes
];

def main():
    """Run all synthetic generator tests."""
    print( "🧪 Synthetic generator tests" );
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
