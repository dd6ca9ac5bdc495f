#!/usr/bin/env python3
"""
Sign Segmenter
Command-line pipeline: generate synthetic keypoint data, train a window classifier,
segment continuous streams into sign words and evaluate the transcripts.

Exit codes:
    0  success
    1  unexpected error
    2  usage or configuration error (bad flags, threshold <= 0.5, malformed manifest)
    3  file I/O error (unreadable dataset, corrupt or unsupported model file)
    4  training error (divergence, class without training clips)
    5  decode error (stream shorter than one window)
"""

import os;
import sys;
import json;
import logging;
import argparse;
from dataclasses import replace;
from pathlib import Path;
from typing import List, Optional, Sequence;
import numpy as np;

# Add current directory to Python path for imports
sys.path.insert( 0, os.path.dirname( os.path.abspath( __file__ ) ) );

from ml.features import clip_features;
from ml.predictor import ModelKind, train, get_model_info;
from services.preprocess import SplitSpec, split_dataset, clips_to_windows, training_windows;
from services.model_store import save_model, load_model;
from services.stream_decoder import decode_stream_with_dump, decode_replay, ProbDump;
from services.evaluation import (
    isolated_accuracy, build_stream_report, aggregate_recall, confusion_pairs, render_report_text,
    write_report_text, write_report_csv, threshold_sweep
);
from services.synth_generator import SynthSpec, generate, build_continuous_suite;
from services import dataset_store;
from utils.config import Config;
from utils.error_utils import ErrorHandler, error_context, ConfigError, InsufficientHeldOutError;

EXIT_OK = 0;

def setup_logging( log_file: str = None, verbose: bool = False ) -> logging.Logger:
    """Configure logging for console and optional file output."""
    log_format = '%(asctime)s - %(levelname)s - %(name)s - %(message)s';
    handlers = [ logging.StreamHandler() ];

    if log_file:
        log_dir = os.path.dirname( log_file );
        if log_dir:
            os.makedirs( log_dir, exist_ok=True );
        handlers.append( logging.FileHandler( log_file ) );

    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=log_format,
        handlers=handlers,
        force=True  # Override any existing configuration
    );

    return logging.getLogger( __name__ );

def parse_length_range( text: str ) -> tuple:
    """'30:80' -> (30, 80)"""
    try:
        low, high = ( int( part ) for part in text.split( ':' ) );
    except ValueError:
        raise argparse.ArgumentTypeError( f"expected MIN:MAX, got {text!r}" );
    return low, high;

def build_config( args: argparse.Namespace, base: Optional[Config] = None ) -> Config:
    """Environment (and .env) settings, then command-line overrides."""
    config = base if base is not None else Config.from_env( getattr( args, 'env_file', None ) );
    return config.replace(
        threshold=getattr( args, 'threshold', None ),
        window_size=getattr( args, 'window', None ),
        stride=getattr( args, 'stride', None ),
        seed=getattr( args, 'seed', None ),
        max_epochs=getattr( args, 'epochs', None ),
        hidden_dim=getattr( args, 'hidden', None ),
        learning_rate=getattr( args, 'lr', None ),
        batch_size=getattr( args, 'batch_size', None ),
        early_stop_patience=getattr( args, 'patience', None ),
        stream_passes=getattr( args, 'stream_passes', None ),
        accuracy_seeds=tuple( args.seeds ) if getattr( args, 'seeds', None ) else None
    );

def _split( clips, config: Config ):
    return split_dataset( clips, SplitSpec( config.train_fraction, config.val_fraction_of_train, config.seed ) );

def _format_words( words: Sequence[int], manifest: Optional[dataset_store.DatasetManifest] = None ) -> str:
    if not words:
        return "(no words)";
    if manifest is not None:
        return " ".join( f"{manifest.class_name( w )}[{w}]" for w in words );
    return " ".join( str( w ) for w in words );

def cmd_synth( args: argparse.Namespace ) -> int:
    """Generate a synthetic dataset (manifest + one keypoint file per clip)."""
    spec = SynthSpec(
        num_classes=args.classes,
        samples_per_class=args.per_class,
        length_range=args.len,
        noise_sigma=args.noise,
        rotation_jitter_deg=args.jitter,
        hands=args.hands,
        seed=args.seed if args.seed is not None else Config().seed
    );
    clips = generate( spec );
    manifest_path = dataset_store.save_dataset( clips, args.out, spec.num_classes );
    print( f"✅ Wrote {len( clips )} clips over {spec.num_classes} classes; manifest {manifest_path}" );
    return EXIT_OK;

def cmd_train( args: argparse.Namespace ) -> int:
    """Split, equalize clip lengths, train and save the model plus its report."""
    logger = logging.getLogger( __name__ );
    config = build_config( args );
    manifest, clips = dataset_store.load_dataset( args.data );
    train_clips, val_clips, test_clips = _split( clips, config );

    train_set = training_windows( train_clips, config, manifest.num_classes, salt=0 );
    val_set = training_windows( val_clips, config, manifest.num_classes, salt=1 );
    test_set = clips_to_windows( test_clips, config.window_size );
    kind = ModelKind.CENTROID if args.kind == 'centroid' else ModelKind.RECURRENT;

    logger.info( f"Training {kind.name.lower()} model on {len( train_clips )} clips, {len( train_set )} windows ({manifest.num_classes} classes)" );
    model, report = train( train_set, val_set, config, kind=kind, num_classes=manifest.num_classes );
    models = [ model ];
    # An untouched default list means the training seed alone
    seeds = config.accuracy_seeds if config.accuracy_seeds != Config.accuracy_seeds else ( config.seed, );
    for seed in seeds:
        if seed == config.seed or kind is ModelKind.CENTROID:
            continue;
        # Extra seeds only feed the accuracy spread; the saved model keeps config.seed
        logger.info( f"Training accuracy-spread model with seed {seed}" );
        extra, _ = train( train_set, val_set, config.replace( seed=seed ), kind=kind, num_classes=manifest.num_classes );
        models.append( extra );
    test = isolated_accuracy( models, test_set );
    report = replace( report, test_accuracy=test.per_model[ 0 ] );

    save_model( model, args.model_out );
    report_path = Path( f"{args.model_out}.report.json" );
    summary = report.to_dict();
    summary[ 'test_accuracy_over_seeds' ] = { 'mean': test.mean, 'std': test.std, 'per_model': list( test.per_model ) };
    report_path.write_text( json.dumps( summary, indent=2, sort_keys=True ) + "\n" );

    print( f"{'Model':<28}{'Train':>10}{'Validation':>12}{'Test':>10}" );
    print( f"{kind.name.lower():<28}{100 * report.train_accuracy:>10.2f}{100 * report.val_accuracy:>12.2f}{100 * report.test_accuracy:>10.2f}" );
    if len( models ) > 1:
        print( f"Test accuracy over {len( models )} seeds: {test} %" );
    print( f"✅ Saved model to {args.model_out} and report to {report_path}" );
    return EXIT_OK;

def _load_streams( args: argparse.Namespace, config: Config ):
    """Streams from --stream files, or a suite built from the dataset's held-out clips."""
    if args.stream:
        return [ dataset_store.read_stream( path ) for path in args.stream ], None;
    if not args.data:
        raise ConfigError( "give --stream FILE or --data DIR" );
    manifest, clips = dataset_store.load_dataset( args.data );
    _, _, test_clips = _split( clips, config );
    streams = build_continuous_suite( test_clips, args.streams, args.suite_seed, manifest.num_classes );
    return streams, manifest;

def _dump_path( base: str, stream_id: str, many: bool ) -> Path:
    base = Path( base );
    return base.with_name( f"{base.stem}_{stream_id}{base.suffix or '.csv'}" ) if many else base;

def cmd_segment( args: argparse.Namespace ) -> int:
    """Decode streams into word sequences."""
    logger = logging.getLogger( __name__ );
    model = load_model( args.model );
    config = build_config( args, base=model.config );
    if config.window_size != model.config.window_size:
        logger.warning( f"Decoding with window {config.window_size}; model was trained on {model.config.window_size}" );

    streams, manifest = _load_streams( args, config );
    for stream in streams:
        transcript, dump = decode_stream_with_dump( stream, model, config );
        print( f"{stream.stream_id}: {_format_words( transcript.words, manifest )}" );
        if args.dump_probs:
            dataset_store.write_prob_dump( dump, _dump_path( args.dump_probs, stream.stream_id, len( streams ) > 1 ) );
        if args.save_streams:
            dataset_store.write_stream( stream, Path( args.save_streams ) / f"{stream.stream_id}.jsonl" );
    return EXIT_OK;

def _replay( args: argparse.Namespace, config: Config ) -> int:
    dump = dataset_store.read_prob_dump( args.replay_dump );
    ground_truth = dataset_store.read_ground_truth( args.ground_truth );
    transcript = decode_replay( dump, config );
    replayed = ProbDump( window_starts=dump.window_starts, probs=dump.probs, events=transcript.events );
    stream_id = Path( args.replay_dump ).stem;
    reports = [ build_stream_report( stream_id, ground_truth, transcript, replayed, config ) ];
    _emit_reports( args, reports );
    if args.sweep:
        print( threshold_sweep( replayed, ground_truth, args.sweep, config ).to_string( index=False ) );
    return EXIT_OK;

def _emit_reports( args: argparse.Namespace, reports, accuracy=None ) -> None:
    print( render_report_text( reports, accuracy ), end='' );
    if args.out_dir:
        out_dir = Path( args.out_dir );
        out_dir.mkdir( parents=True, exist_ok=True );
        write_report_text( reports, out_dir / "report.txt", accuracy );
        write_report_csv( reports, out_dir / "report.csv" );

def cmd_eval( args: argparse.Namespace ) -> int:
    """Build the continuous suite from held-out clips, decode it and write reports."""
    if args.replay_dump:
        if not args.ground_truth:
            raise ConfigError( "--replay-dump needs --ground-truth" );
        return _replay( args, build_config( args ) );
    if not args.model or not args.data:
        raise ConfigError( "eval needs --model and --data, or --replay-dump and --ground-truth" );
    if args.streams < 1:
        raise InsufficientHeldOutError( "the continuous suite is empty (--streams must be >= 1)" );

    model = load_model( args.model );
    config = build_config( args, base=model.config );
    manifest, clips = dataset_store.load_dataset( args.data );
    _, _, test_clips = _split( clips, config );
    accuracy = isolated_accuracy( model, clips_to_windows( test_clips, model.config.window_size ) );
    streams = build_continuous_suite( test_clips, args.streams, args.suite_seed, manifest.num_classes );

    reports = [];
    for stream in streams:
        transcript, dump = decode_stream_with_dump( stream, model, config );
        reports.append( build_stream_report( stream.stream_id, stream.ground_truth, transcript, dump, config ) );
        if args.out_dir and args.dump_probs:
            dataset_store.write_prob_dump( dump, Path( args.out_dir ) / f"{stream.stream_id}_probs.csv" );
            dataset_store.write_ground_truth( stream.ground_truth, Path( args.out_dir ) / f"{stream.stream_id}_truth.csv" );

    _emit_reports( args, reports, accuracy );
    exact = sum( 1 for r in reports if r.exact_match );
    print( f"Exact-match streams: {exact}/{len( reports )}, aggregate word recall {aggregate_recall( reports ):.4f}" );
    for correct, wrong, count in confusion_pairs( reports )[ :5 ]:
        print( f"  confused {correct + 1} -> {wrong + 1}: {count}x" );
    return EXIT_OK;

def cmd_inspect( args: argparse.Namespace ) -> int:
    """Describe a model, a dataset or a keypoint file."""
    shown = False;
    if args.model:
        print( json.dumps( get_model_info( load_model( args.model ) ), indent=2 ) );
        shown = True;
    if args.data:
        manifest = dataset_store.read_manifest( Path( args.data ) / dataset_store.MANIFEST_NAME );
        lengths = [ entry.length for entry in manifest.clips ];
        print( f"{len( manifest.clips )} clips, {manifest.num_classes} classes, {manifest.hands_per_frame} hand(s) per frame" );
        if lengths:
            print( f"clip lengths {min( lengths )}..{max( lengths )} (mean {np.mean( lengths ):.1f})" );
        shown = True;
    if args.keypoints:
        keypoints = dataset_store.read_keypoints( args.keypoints );
        print( f"{keypoints.shape[ 0 ]} frames, {keypoints.shape[ 1 ]} hand(s)" );
        if args.features_out:
            dataset_store.write_features( clip_features( keypoints ), args.features_out );
            print( f"✅ Wrote features to {args.features_out}" );
        shown = True;
    if not shown:
        raise ConfigError( "inspect needs --model, --data or --keypoints" );
    return EXIT_OK;

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description='Continuous sign language segmentation from hand keypoints',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Exit codes: 0 ok, 1 unexpected, 2 usage/config, 3 I/O, 4 training, 5 decode

Examples:
  python sign_segmenter.py synth --classes 20 --per-class 30 --len 30:80 --seed 7 --out data/
  python sign_segmenter.py train --data data/ --model-out model.sgsg
  python sign_segmenter.py segment --model model.sgsg --data data/ --streams 3 --dump-probs probs.csv
  python sign_segmenter.py eval --model model.sgsg --data data/ --streams 10 --out-dir reports/
  python sign_segmenter.py eval --replay-dump probs.csv --ground-truth truth.csv
        """
    );
    parser.add_argument( '--log-file', type=str, help='Also log to this file' );
    parser.add_argument( '--verbose', action='store_true', help='Debug logging (one line per window)' );
    parser.add_argument( '--env-file', type=str, help='.env file with SEGMENTER_* settings' );
    sub = parser.add_subparsers( dest='command', required=True );

    synth = sub.add_parser( 'synth', help='Generate a synthetic keypoint dataset' );
    synth.add_argument( '--classes', type=int, default=20, help='Number of sign classes (default: 20)' );
    synth.add_argument( '--per-class', type=int, default=30, help='Clips per class (default: 30)' );
    synth.add_argument( '--len', type=parse_length_range, default=( 30, 80 ), help='Clip length range MIN:MAX (default: 30:80)' );
    synth.add_argument( '--noise', type=float, default=0.01, help='Gaussian keypoint noise sigma (default: 0.01)' );
    synth.add_argument( '--jitter', type=float, default=5.0, help='Max rotation jitter in degrees (default: 5)' );
    synth.add_argument( '--hands', type=int, choices=[ 1, 2 ], default=2, help='Hands per frame (default: 2)' );
    synth.add_argument( '--seed', type=int, help='Random seed (default: 7)' );
    synth.add_argument( '--out', type=str, required=True, help='Output dataset directory' );
    synth.set_defaults( handler=cmd_synth );

    trainer = sub.add_parser( 'train', help='Train a window classifier' );
    trainer.add_argument( '--data', type=str, required=True, help='Dataset directory (with manifest.txt)' );
    trainer.add_argument( '--model-out', type=str, required=True, help='Model file to write' );
    trainer.add_argument( '--kind', choices=[ 'recurrent', 'centroid' ], default='recurrent', help='Classifier (default: recurrent)' );
    trainer.add_argument( '--epochs', type=int, help='Maximum epochs (default: 200)' );
    trainer.add_argument( '--hidden', type=int, help='Hidden units (default: 64)' );
    trainer.add_argument( '--lr', type=float, help='Initial learning rate (default: 0.005)' );
    trainer.add_argument( '--batch-size', type=int, help='Batch size (default: 50)' );
    trainer.add_argument( '--patience', type=int, help='Early-stopping patience in epochs (default: 10)' );
    trainer.add_argument( '--window', type=int, help='Frames per window (default: 50)' );
    trainer.add_argument( '--seed', type=int, help='Seed for split, initialization and shuffling (default: 7)' );
    trainer.add_argument( '--seeds', type=int, nargs='+', help='Training seeds for the test accuracy mean and spread' );
    trainer.add_argument( '--stream-passes', type=int, help='Concatenations of the training clips cut into boundary windows; 0 trains on isolated clips only (default: 2)' );
    trainer.set_defaults( handler=cmd_train );

    segment = sub.add_parser( 'segment', help='Decode continuous streams into words' );
    segment.add_argument( '--model', type=str, required=True, help='Model file' );
    segment.add_argument( '--stream', type=str, nargs='+', help='Stream keypoint file(s)' );
    segment.add_argument( '--data', type=str, help='Dataset directory to build streams from held-out clips' );
    segment.add_argument( '--streams', type=int, default=1, help='Streams to build from --data (default: 1)' );
    segment.add_argument( '--suite-seed', type=int, default=7, help='Shuffle seed for built streams (default: 7)' );
    segment.add_argument( '--threshold', type=float, help='Acceptance threshold, > 0.5 (default: 0.51)' );
    segment.add_argument( '--window', type=int, help='Frames per window (default: the model\'s)' );
    segment.add_argument( '--stride', type=int, help='Window stride (default: 1)' );
    segment.add_argument( '--dump-probs', type=str, help='Write the per-window probability CSV here' );
    segment.add_argument( '--save-streams', type=str, help='Directory to save the decoded streams and their ground truth' );
    segment.set_defaults( handler=cmd_segment );

    evaluate = sub.add_parser( 'eval', help='Evaluate on a continuous suite or replay a probability dump' );
    evaluate.add_argument( '--model', type=str, help='Model file' );
    evaluate.add_argument( '--data', type=str, help='Dataset directory' );
    evaluate.add_argument( '--streams', type=int, default=10, help='Continuous streams to build (default: 10)' );
    evaluate.add_argument( '--suite-seed', type=int, default=7, help='Shuffle seed for the suite (default: 7)' );
    evaluate.add_argument( '--threshold', type=float, help='Acceptance threshold, > 0.5 (default: 0.51)' );
    evaluate.add_argument( '--window', type=int, help='Frames per window (default: the model\'s)' );
    evaluate.add_argument( '--stride', type=int, help='Window stride (default: 1)' );
    evaluate.add_argument( '--out-dir', type=str, help='Write report.txt, report.csv and report_false.csv here' );
    evaluate.add_argument( '--dump-probs', action='store_true', help='Also write per-stream probability dumps to --out-dir' );
    evaluate.add_argument( '--replay-dump', type=str, help='Probability dump to re-decode instead of running a model' );
    evaluate.add_argument( '--ground-truth', type=str, help='Ground-truth CSV for --replay-dump' );
    evaluate.add_argument( '--sweep', type=float, nargs='+', help='Thresholds to sweep over a replayed dump' );
    evaluate.set_defaults( handler=cmd_eval );

    inspect = sub.add_parser( 'inspect', help='Describe a model, dataset or keypoint file' );
    inspect.add_argument( '--model', type=str, help='Model file' );
    inspect.add_argument( '--data', type=str, help='Dataset directory' );
    inspect.add_argument( '--keypoints', type=str, help='Keypoint file (clip or stream)' );
    inspect.add_argument( '--features-out', type=str, help='Write per-frame features of --keypoints as CSV' );
    inspect.set_defaults( handler=cmd_inspect );

    return parser;

def main( argv: Optional[List[str]] = None ) -> int:
    """Parse arguments, run one command and return its exit code."""
    parser = build_parser();
    try:
        args = parser.parse_args( argv );
    except SystemExit as e:
        return int( e.code or 0 );

    logger = setup_logging( args.log_file, args.verbose );
    handler = ErrorHandler( "SignSegmenter" );
    with error_context( handler, f"command {args.command}", reraise=False ) as context:
        code = args.handler( args );
    if context.category is not None:
        print( f"❌ {args.command} failed (exit code {context.exit_code})", file=sys.stderr );
        return context.exit_code;
    logger.debug( f"{args.command} finished with exit code {code}" );
    return code;

if __name__ == "__main__":
    sys.exit( main() );
