#!/usr/bin/env python3
"""
Tests for the keypoint data types, probability vectors, configuration and error categories
"""

import os;
import sys;
import logging;
import numpy as np;

# Add the project root to Python path for imports
sys.path.insert( 0, os.path.dirname( os.path.dirname( os.path.abspath( __file__ ) ) ) );

from ml.sign_data import (
    KeypointFrame, SignClip, ContinuousStream, ProbVector, Accept, Blank, BlankReason, DecodeEvent,
    validate_frame, validate_prob
);
from utils.config import Config, learning_rate_at;
from utils.error_utils import (
    DimensionError, NonFiniteError, SimplexError, EmptyClipError, ConfigError, DivergenceError,
    CorruptModelError, StreamTooShortError, ManifestError, ErrorCategory, exit_code_for, ErrorHandler, error_context
);

def _raises( exception_type, fn, *args, **kwargs ) -> bool:
    try:
        fn( *args, **kwargs );
    except exception_type:
        return True;
    return False;

def test_validate_frame():
    """Frames need 1 or 2 finite 21x3 hands."""
    rng = np.random.default_rng( 1 );
    frame = KeypointFrame.from_hands( rng.normal( size=( 2, 21, 3 ) ), 4 );
    assert validate_frame( frame ) is frame;
    assert frame.hand_count == 2;

    assert _raises( DimensionError, validate_frame, KeypointFrame.from_hands( np.zeros( ( 1, 20, 3 ) ) ) );
    assert _raises( DimensionError, validate_frame, KeypointFrame.from_hands( np.zeros( ( 3, 21, 3 ) ) ) );
    bad = np.zeros( ( 1, 21, 3 ) );
    bad[ 0, 5, 1 ] = np.nan;
    assert _raises( NonFiniteError, validate_frame, KeypointFrame.from_hands( bad ) );
    bad[ 0, 5, 1 ] = np.inf;
    assert _raises( NonFiniteError, validate_frame, KeypointFrame.from_hands( bad ) );

def test_clip_and_stream_invariants():
    """Clips are nonempty and read-only; stream segments are ordered and distinct."""
    keypoints = np.zeros( ( 6, 1, 21, 3 ) );
    clip = SignClip( keypoints=keypoints, label=3, source_id="a" );
    assert len( clip ) == 6 and clip.hand_count == 1;
    assert not clip.keypoints.flags.writeable;
    assert len( list( clip.frames ) ) == 6;
    assert clip.frame( 2 ).timestamp_index == 2;
    assert _raises( EmptyClipError, SignClip, np.zeros( ( 0, 1, 21, 3 ) ), 0 );

    stream = ContinuousStream( keypoints=np.zeros( ( 10, 1, 21, 3 ) ), ground_truth=( ( 1, 0, 4 ), ( 2, 5, 9 ) ) );
    assert stream.labels == [ 1, 2 ];
    assert _raises( DimensionError, ContinuousStream, np.zeros( ( 10, 1, 21, 3 ) ), ( ( 1, 0, 5 ), ( 2, 5, 9 ) ) );
    assert _raises( DimensionError, ContinuousStream, np.zeros( ( 10, 1, 21, 3 ) ), ( ( 1, 0, 4 ), ( 1, 5, 9 ) ) );
    assert _raises( DimensionError, ContinuousStream, np.zeros( ( 10, 1, 21, 3 ) ), ( ( 1, 0, 10 ), ) );

def test_validate_prob():
    """Simplex checks and argmax tie-breaking."""
    p = validate_prob( [ 0.2, 0.5, 0.3 ] );
    assert p.argmax == 1 and abs( p.max_prob - 0.5 ) < 1e-15;
    assert validate_prob( [ 0.5, 0.5 ] ).argmax == 0;

    assert _raises( SimplexError, validate_prob, [] );
    assert _raises( SimplexError, validate_prob, [ 0.5, 0.6 ] );
    assert _raises( SimplexError, validate_prob, [ 1.2, -0.2 ] );
    assert _raises( SimplexError, validate_prob, [ np.nan, 1.0 ] );
    assert validate_prob( [ 0.5, 0.5 + 5e-7 ] ).argmax == 1;

def test_simplex_at_most_one_above_threshold():
    """Over 10^5 random distributions, never two entries above 0.51."""
    rng = np.random.default_rng( 7 );
    violations = 0;
    for k, alpha in ( ( 2, 1.0 ), ( 3, 0.3 ), ( 5, 0.1 ), ( 20, 0.05 ) ):
        probs = rng.dirichlet( np.full( k, alpha ), size=25000 );
        violations += int( np.sum( ( probs > 0.51 ).sum( axis=1 ) > 1 ) );
    assert violations == 0;

def test_decode_event_tags():
    accept = DecodeEvent( 0, Accept( 3, 0.9 ), 0.9, 3 );
    below = DecodeEvent( 1, Blank( BlankReason.BELOW_THRESHOLD ), 0.3, 1 );
    duplicate = DecodeEvent( 2, Blank( BlankReason.DUPLICATE_SUPPRESSED ), 0.8, 3 );
    assert accept.accepted and not below.accepted;
    assert [ e.tag for e in ( accept, below, duplicate ) ] == [ "accept", "blank_below", "blank_duplicate" ];

def test_config_defaults_and_validation():
    """Default constants and the threshold invariant."""
    config = Config();
    assert config.window_size == 50 and config.stride == 1 and config.threshold == 0.51;
    assert config.num_singular_values == 12 and config.keypoints_per_hand == 21;
    assert config.learning_rate == 0.005 and config.batch_size == 50 and config.max_epochs == 200;
    assert config.weight_decay == 1e-4 and config.momentum_beta1 == 0.92 and config.train_fraction == 0.8;

    assert _raises( ConfigError, Config, threshold=0.49 );
    assert _raises( ConfigError, Config, threshold=0.5 );
    assert _raises( ConfigError, config.replace, threshold=1.0 );
    assert config.replace( threshold=None, window_size=20 ).window_size == 20;
    assert Config.from_dict( config.to_dict() ) == config;

    assert config.stream_passes == 2 and config.stream_window_stride == 8;
    assert config.pure_coverage == 0.9 and config.pure_margin == 0.3 and config.early_stop_min_delta == 1e-4;
    assert _raises( ConfigError, Config, stream_passes=-1 );
    assert _raises( ConfigError, Config, stream_window_stride=0 );
    assert _raises( ConfigError, Config, pure_coverage=0.0 );
    assert _raises( ConfigError, Config, pure_margin=1.5 );

def test_config_from_env():
    """SEGMENTER_* variables override defaults."""
    os.environ[ 'SEGMENTER_THRESHOLD' ] = '0.6';
    os.environ[ 'SEGMENTER_WINDOW_SIZE' ] = '30';
    os.environ[ 'SEGMENTER_STREAM_PASSES' ] = '0';
    try:
        config = Config.from_env( env_file=os.devnull );
        assert config.threshold == 0.6 and config.window_size == 30 and config.stream_passes == 0;
        os.environ[ 'SEGMENTER_WINDOW_SIZE' ] = 'thirty';
        assert _raises( ConfigError, Config.from_env, os.devnull );
    finally:
        del os.environ[ 'SEGMENTER_THRESHOLD' ];
        del os.environ[ 'SEGMENTER_WINDOW_SIZE' ];
        del os.environ[ 'SEGMENTER_STREAM_PASSES' ];

def test_learning_rate_schedule():
    """Step decay equals 0.005 / 10^floor(e/10) at every epoch."""
    config = Config();
    for epoch in range( config.max_epochs ):
        assert learning_rate_at( epoch, config ) == 0.005 / 10 ** ( epoch // 10 );

def test_error_categories():
    """Exit codes follow the error category."""
    assert exit_code_for( ConfigError( "x" ) ) == 2;
    assert exit_code_for( ManifestError( "bad", 7 ) ) == 2;
    assert str( ManifestError( "bad", 7 ) ).startswith( "line 7:" );
    assert exit_code_for( CorruptModelError( "x" ) ) == 3;
    assert exit_code_for( FileNotFoundError( "x" ) ) == 3;
    assert exit_code_for( DivergenceError( "x" ) ) == 4;
    assert exit_code_for( StreamTooShortError( "x" ) ) == 5;
    assert exit_code_for( RuntimeError( "x" ) ) == 1;

    handler = ErrorHandler( "test" );
    with error_context( handler, "block", reraise=False ) as context:
        raise StreamTooShortError( "short" );
    assert context.category is ErrorCategory.DECODE and context.exit_code == 5;
    assert handler.get_error_summary() == { 'decode': 1 };

TESTS = [
    test_validate_frame,
    test_clip_and_stream_invariants,
    test_validate_prob,
    test_simplex_at_most_one_above_threshold,
    test_decode_event_tags,
    test_config_defaults_and_validation,
    test_config_from_env,
    test_learning_rate_schedule,
    test_error_categories
];

def main():
    """Run all core model tests."""
    print( "🧪 Core model tests" );
    print( "=" * 50 );
    logging.basicConfig( level=logging.WARNING );  # Reduce log noise during testing

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
