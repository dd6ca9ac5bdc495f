#!/usr/bin/env python3
"""
Dataset Store
On-disk formats for datasets, streams and decoder output

    manifest.txt        key=value lines: format_version, num_classes, hands_per_frame,
                        feature_layout, class.<i>=<name>, clip=<path>|<label>|<length>
    *.jsonl             one keypoint frame per line: {"frame": i, "hands": [[63 values], ...]}
                        coordinates written with 9 fractional digits
    probability dump    CSV: window_start, decision, argmax, max_prob, p0 .. p{K-1}
    ground truth        CSV: label, start, end (0-based, end inclusive)
    features            CSV: frame_index, f0 .. f11
"""

import json;
import logging;
from dataclasses import dataclass;
from pathlib import Path;
from typing import List, Optional, Sequence, Tuple, Union;
import numpy as np;

try:
    import pandas as pd;
    PANDAS_AVAILABLE = True;
except ImportError:
    print( "Pandas is not installed. Please install it using 'pip install pandas'." );
    PANDAS_AVAILABLE = False;

from ml.sign_data import (
    SignClip, ContinuousStream, Segment, Accept, Blank, BlankReason, DecodeEvent, KEYPOINTS_PER_HAND, COORDINATES
);
from services.stream_decoder import ProbDump;
from utils.error_utils import ManifestError, DatasetIOError, SegmenterError;

logger = logging.getLogger( __name__ );

MANIFEST_NAME = "manifest.txt";
MANIFEST_VERSION = 1;
PROB_DUMP_VERSION = 1;
FEATURE_LAYOUT = "pose_sv3,motion_sv3 per hand";
VALUES_PER_HAND_ROW = KEYPOINTS_PER_HAND * COORDINATES;

PathLike = Union[str, Path];

@dataclass( frozen=True )
class ClipEntry:
    path: str;
    label: int;
    length: int;

@dataclass( frozen=True )
class DatasetManifest:
    """Index of a keypoint dataset: classes and one entry per clip file."""
    num_classes: int;
    hands_per_frame: int;
    class_names: Tuple[str, ...];
    clips: Tuple[ClipEntry, ...] = ();
    format_version: int = MANIFEST_VERSION;
    feature_layout: str = FEATURE_LAYOUT;

    def class_name( self, label: int ) -> str:
        return self.class_names[ label ] if 0 <= label < len( self.class_names ) else str( label );

def format_manifest( manifest: DatasetManifest ) -> str:
    lines = [
        "# sign segmenter dataset manifest",
        f"format_version={manifest.format_version}",
        f"num_classes={manifest.num_classes}",
        f"hands_per_frame={manifest.hands_per_frame}",
        f"feature_layout={manifest.feature_layout}"
    ];
    lines += [ f"class.{i}={name}" for i, name in enumerate( manifest.class_names ) ];
    lines += [ f"clip={entry.path}|{entry.label}|{entry.length}" for entry in manifest.clips ];
    return "\n".join( lines ) + "\n";

def _int_value( value: str, key: str, line_number: int ) -> int:
    try:
        return int( value );
    except ValueError:
        raise ManifestError( f"{key} must be an integer, got {value!r}", line_number );

def parse_manifest( text: str ) -> DatasetManifest:
    """
    Parse manifest text.

    Raises:
        ManifestError: malformed line, unknown key, bad value or inconsistent class table
            (the message carries the offending line number)
    """
    header = {};
    names = {};
    clips = [];
    for line_number, raw in enumerate( text.splitlines(), start=1 ):
        line = raw.strip();
        if not line or line.startswith( '#' ):
            continue;
        if '=' not in line:
            raise ManifestError( f"expected key=value, got {line!r}", line_number );
        key, value = ( part.strip() for part in line.split( '=', 1 ) );

        if key in ( 'format_version', 'num_classes', 'hands_per_frame' ):
            header[ key ] = _int_value( value, key, line_number );
        elif key == 'feature_layout':
            header[ key ] = value;
        elif key.startswith( 'class.' ):
            names[ _int_value( key[ len( 'class.' ): ], 'class index', line_number ) ] = value;
        elif key == 'clip':
            parts = value.split( '|' );
            if len( parts ) != 3 or not parts[ 0 ]:
                raise ManifestError( f"clip entries are path|label|length, got {value!r}", line_number );
            label = _int_value( parts[ 1 ], 'clip label', line_number );
            length = _int_value( parts[ 2 ], 'clip length', line_number );
            if 'num_classes' in header and not 0 <= label < header[ 'num_classes' ]:
                raise ManifestError( f"clip label {label} outside [0, {header[ 'num_classes' ]})", line_number );
            if length < 1:
                raise ManifestError( f"clip length must be positive, got {length}", line_number );
            clips.append( ClipEntry( path=parts[ 0 ], label=label, length=length ) );
        else:
            raise ManifestError( f"unknown key {key!r}", line_number );

    for key in ( 'format_version', 'num_classes', 'hands_per_frame' ):
        if key not in header:
            raise ManifestError( f"missing {key}" );
    if header[ 'format_version' ] != MANIFEST_VERSION:
        raise ManifestError( f"unsupported manifest format_version {header[ 'format_version' ]}" );
    if header[ 'hands_per_frame' ] not in ( 1, 2 ):
        raise ManifestError( f"hands_per_frame must be 1 or 2, got {header[ 'hands_per_frame' ]}" );
    num_classes = header[ 'num_classes' ];
    if num_classes < 2:
        raise ManifestError( f"num_classes must be >= 2, got {num_classes}" );
    if any( not 0 <= entry.label < num_classes for entry in clips ):
        raise ManifestError( f"a clip label lies outside [0, {num_classes})" );
    class_names = tuple( names.get( i, f"sign_{i:03d}" ) for i in range( num_classes ) );

    return DatasetManifest(
        num_classes=num_classes,
        hands_per_frame=header[ 'hands_per_frame' ],
        class_names=class_names,
        clips=tuple( clips ),
        format_version=header[ 'format_version' ],
        feature_layout=header.get( 'feature_layout', FEATURE_LAYOUT )
    );

def read_manifest( path: PathLike ) -> DatasetManifest:
    try:
        text = Path( path ).read_text();
    except OSError as e:
        raise DatasetIOError( f"cannot read manifest {path}: {e}" );
    return parse_manifest( text );

def format_frame( index: int, hands: np.ndarray ) -> str:
    """One JSONL record with coordinates at 9 fractional digits."""
    rows = [ "[" + ", ".join( format( float( v ), '.9f' ) for v in hand.reshape( -1 ) ) + "]" for hand in hands ];
    return f'{{"frame": {int( index )}, "hands": [{", ".join( rows )}]}}';

def write_keypoints( keypoints: np.ndarray, path: PathLike ) -> None:
    """Write a (T, hands, 21, 3) keypoint array, one frame per line."""
    path = Path( path );
    try:
        path.parent.mkdir( parents=True, exist_ok=True );
        with open( path, 'w' ) as f:
            for index, hands in enumerate( np.asarray( keypoints ) ):
                f.write( format_frame( index, hands ) + "\n" );
    except OSError as e:
        raise DatasetIOError( f"cannot write keypoints to {path}: {e}" );

def read_keypoints( path: PathLike ) -> np.ndarray:
    """
    Read a keypoint file written by write_keypoints.

    Raises:
        DatasetIOError: unreadable file, malformed record, out-of-order frame index
            or a hand that is not 63 values
    """
    path = Path( path );
    frames = [];
    try:
        with open( path ) as f:
            for line_number, line in enumerate( f, start=1 ):
                if not line.strip():
                    continue;
                try:
                    record = json.loads( line );
                    hands = np.asarray( record[ 'hands' ], dtype=np.float64 );
                    index = int( record[ 'frame' ] );
                except ( ValueError, KeyError, TypeError ) as e:
                    raise DatasetIOError( f"{path}:{line_number}: malformed frame record ({e})" );
                if index != len( frames ):
                    raise DatasetIOError( f"{path}:{line_number}: expected frame {len( frames )}, got {index}" );
                if hands.ndim != 2 or hands.shape[ 1 ] != VALUES_PER_HAND_ROW:
                    raise DatasetIOError( f"{path}:{line_number}: each hand needs {VALUES_PER_HAND_ROW} values" );
                frames.append( hands.reshape( -1, KEYPOINTS_PER_HAND, COORDINATES ) );
    except OSError as e:
        raise DatasetIOError( f"cannot read keypoints from {path}: {e}" );
    if not frames:
        raise DatasetIOError( f"{path}: no frames" );
    if len( { frame.shape for frame in frames } ) != 1:
        raise DatasetIOError( f"{path}: hand count changes between frames" );
    return np.stack( frames );

def save_dataset( clips: Sequence[SignClip], out_dir: PathLike, num_classes: int,
                  class_names: Optional[Sequence[str]] = None ) -> Path:
    """
    Write every clip to <out_dir>/clips/<source_id>.jsonl plus the manifest.

    Returns:
        Path of the manifest
    """
    out_dir = Path( out_dir );
    if not clips:
        raise DatasetIOError( "no clips to save" );
    names = tuple( class_names ) if class_names else tuple( f"sign_{i:03d}" for i in range( num_classes ) );
    entries = [];
    for index, clip in enumerate( clips ):
        relative = f"clips/{clip.source_id or f'clip{index:05d}'}.jsonl";
        write_keypoints( clip.keypoints, out_dir / relative );
        entries.append( ClipEntry( path=relative, label=clip.label, length=len( clip ) ) );

    manifest = DatasetManifest(
        num_classes=num_classes, hands_per_frame=clips[ 0 ].hand_count, class_names=names, clips=tuple( entries )
    );
    manifest_path = out_dir / MANIFEST_NAME;
    try:
        manifest_path.write_text( format_manifest( manifest ) );
    except OSError as e:
        raise DatasetIOError( f"cannot write manifest {manifest_path}: {e}" );
    logger.info( f"Wrote {len( entries )} clips and manifest to {out_dir}" );
    return manifest_path;

def load_dataset( data_dir: PathLike ) -> Tuple[DatasetManifest, List[SignClip]]:
    """
    Read a dataset directory.

    Raises:
        ManifestError: malformed manifest
        DatasetIOError: missing or malformed clip file, or a length that disagrees with the manifest
    """
    data_dir = Path( data_dir );
    manifest = read_manifest( data_dir / MANIFEST_NAME );
    clips = [];
    for entry in manifest.clips:
        keypoints = read_keypoints( data_dir / entry.path );
        if keypoints.shape[ 0 ] != entry.length:
            raise DatasetIOError( f"{entry.path}: manifest says {entry.length} frames, file has {keypoints.shape[ 0 ]}" );
        if keypoints.shape[ 1 ] != manifest.hands_per_frame:
            raise DatasetIOError( f"{entry.path}: expected {manifest.hands_per_frame} hands per frame" );
        try:
            clips.append( SignClip( keypoints=keypoints, label=entry.label, source_id=Path( entry.path ).stem ) );
        except SegmenterError as e:
            raise DatasetIOError( f"{entry.path}: {e}" );
    logger.info( f"Loaded {len( clips )} clips over {manifest.num_classes} classes from {data_dir}" );
    return manifest, clips;

def _commented_csv( frame: "pd.DataFrame", path: Path, comment: str, float_format: str ) -> None:
    try:
        path.parent.mkdir( parents=True, exist_ok=True );
        with open( path, 'w', newline='' ) as f:
            f.write( f"# {comment}\n" );
            frame.to_csv( f, index=False, float_format=float_format );
    except OSError as e:
        raise DatasetIOError( f"cannot write {path}: {e}" );

def _read_csv( path: PathLike, required: Sequence[str] ) -> "pd.DataFrame":
    try:
        frame = pd.read_csv( path, comment='#' );
    except OSError as e:
        raise DatasetIOError( f"cannot read {path}: {e}" );
    except ( ValueError, pd.errors.ParserError ) as e:
        raise DatasetIOError( f"{path}: malformed CSV ({e})" );
    missing = [ column for column in required if column not in frame.columns ];
    if missing:
        raise DatasetIOError( f"{path}: missing columns {missing}" );
    return frame;

def write_prob_dump( dump: ProbDump, path: PathLike ) -> Path:
    """Write window_start, decision, argmax, max_prob and p0..p{K-1} with 6 fractional digits."""
    path = Path( path );
    columns = { 'window_start': dump.window_starts.astype( np.int64 ) };
    columns[ 'decision' ] = [ event.tag for event in dump.events ];
    columns[ 'argmax' ] = dump.probs.argmax( axis=1 ).astype( np.int64 );
    columns[ 'max_prob' ] = dump.probs.max( axis=1 );
    for k in range( dump.num_classes ):
        columns[ f"p{k}" ] = dump.probs[ :, k ];
    _commented_csv( pd.DataFrame( columns ), path, f"prob_dump_version={PROB_DUMP_VERSION}", "%.6f" );
    logger.info( f"Wrote probability dump for {len( dump )} windows to {path}" );
    return path;

def _event_from_row( start: int, tag: str, argmax: int, max_prob: float ) -> DecodeEvent:
    if tag == 'accept':
        decision = Accept( class_id=argmax, confidence=max_prob );
    elif tag == 'blank_below':
        decision = Blank( BlankReason.BELOW_THRESHOLD );
    elif tag == 'blank_duplicate':
        decision = Blank( BlankReason.DUPLICATE_SUPPRESSED );
    else:
        raise DatasetIOError( f"unknown decision tag {tag!r}" );
    return DecodeEvent( window_start=start, decision=decision, max_prob=max_prob, argmax_class=argmax );

def read_prob_dump( path: PathLike ) -> ProbDump:
    """
    Read a probability dump. Rows are renormalized to sum to 1, undoing the
    6-digit rounding of the file.
    """
    frame = _read_csv( path, [ 'window_start', 'decision', 'argmax', 'max_prob' ] );
    prob_columns = [ c for c in frame.columns if c.startswith( 'p' ) and c[ 1: ].isdigit() ];
    prob_columns.sort( key=lambda c: int( c[ 1: ] ) );
    if len( prob_columns ) < 2 or prob_columns != [ f"p{k}" for k in range( len( prob_columns ) ) ]:
        raise DatasetIOError( f"{path}: probability columns must be p0..pK-1 with K >= 2" );
    probs = frame[ prob_columns ].to_numpy( dtype=np.float64 );
    totals = probs.sum( axis=1, keepdims=True );
    if not np.all( np.isfinite( probs ) ) or np.any( probs < 0 ) or np.any( totals <= 0 ):
        raise DatasetIOError( f"{path}: probabilities must be finite and non-negative" );
    probs = probs / totals;

    starts = frame[ 'window_start' ].to_numpy( dtype=np.int64 );
    events = tuple(
        _event_from_row( int( s ), str( tag ), int( a ), float( m ) )
        for s, tag, a, m in zip( starts, frame[ 'decision' ], frame[ 'argmax' ], frame[ 'max_prob' ] )
    );
    return ProbDump( window_starts=starts, probs=probs, events=events );

def write_ground_truth( segments: Sequence[Segment], path: PathLike ) -> Path:
    path = Path( path );
    frame = pd.DataFrame( list( segments ), columns=[ 'label', 'start', 'end' ] );
    _commented_csv( frame, path, "ground_truth_version=1", "%.6f" );
    return path;

def read_ground_truth( path: PathLike ) -> Tuple[Segment, ...]:
    frame = _read_csv( path, [ 'label', 'start', 'end' ] );
    return tuple( ( int( r.label ), int( r.start ), int( r.end ) ) for r in frame.itertuples( index=False ) );

def write_stream( stream: ContinuousStream, path: PathLike ) -> Path:
    """Write the stream's frames, and its ground truth as <stem>.truth.csv when present."""
    path = Path( path );
    write_keypoints( stream.keypoints, path );
    if stream.ground_truth is not None:
        write_ground_truth( stream.ground_truth, ground_truth_path( path ) );
    return path;

def ground_truth_path( stream_path: PathLike ) -> Path:
    stream_path = Path( stream_path );
    return stream_path.with_name( f"{stream_path.stem}.truth.csv" );

def read_stream( path: PathLike, truth_path: Optional[PathLike] = None ) -> ContinuousStream:
    """Read a stream file; ground truth is picked up from truth_path or the sibling <stem>.truth.csv."""
    path = Path( path );
    keypoints = read_keypoints( path );
    truth_file = Path( truth_path ) if truth_path else ground_truth_path( path );
    ground_truth = read_ground_truth( truth_file ) if truth_file.exists() else None;
    try:
        return ContinuousStream( keypoints=keypoints, ground_truth=ground_truth, stream_id=path.stem );
    except SegmenterError as e:
        raise DatasetIOError( f"{path}: {e}" );

def write_features( features: np.ndarray, path: PathLike ) -> Path:
    """Per-frame feature CSV: frame_index, f0 .. f{D-1} with 9 fractional digits."""
    path = Path( path );
    frame = pd.DataFrame( features, columns=[ f"f{i}" for i in range( features.shape[ 1 ] ) ] );
    frame.insert( 0, 'frame_index', np.arange( features.shape[ 0 ], dtype=np.int64 ) );
    _commented_csv( frame, path, "features_version=1", "%.9f" );
    return path;
