#!/usr/bin/env python3
"""
Evaluation Service
Isolated accuracy, per-stream confidence, false-recognition tables and word-sequence metrics
"""

import logging;
from collections import Counter;
from dataclasses import dataclass;
from pathlib import Path;
from typing import Iterable, List, Optional, Sequence, Tuple, Union;
import numpy as np;

try:
    import pandas as pd;
    PANDAS_AVAILABLE = True;
except ImportError:
    print( "Pandas is not installed. Please install it using 'pip install pandas'." );
    PANDAS_AVAILABLE = False;

try:
    from sklearn.metrics import accuracy_score;
    SKLEARN_AVAILABLE = True;
except ImportError:
    print( "Scikit-learn is not installed. Please install it using 'pip install scikit-learn'." );
    SKLEARN_AVAILABLE = False;

try:
    from editdistance import eval as levenshtein;
    EDITDISTANCE_AVAILABLE = True;
except ImportError:
    print( "editdistance is not installed. Please install it using 'pip install editdistance'." );
    EDITDISTANCE_AVAILABLE = False;

from ml.sign_data import ContinuousStream, DecodeEvent, Accept, Segment;
from ml.predictor import LabeledWindows;
from services.stream_decoder import Transcript, ProbDump, WindowClassifier, decode_probabilities;
from utils.config import Config;
from utils.error_utils import EmptySetError, NoAcceptError, MissingGroundTruthError, ConfigError;

logger = logging.getLogger( __name__ );

REPORT_SCHEMA_VERSION = 1;
SEED_VARIANCE_NOTE = "accuracy spread is the population standard deviation across training seeds";

@dataclass( frozen=True )
class AccuracySummary:
    """Isolated-sign accuracy: mean and spread across models trained with different seeds."""
    mean: float;
    std: float;
    per_model: Tuple[float, ...];
    num_windows: int;

    def __str__( self ) -> str:
        return f"{100.0 * self.mean:.2f}±{100.0 * self.std:.2f}";

@dataclass( frozen=True )
class FalseRecognition:
    """A ground-truth sign whose best window ranked another class first (0-based ids)."""
    stream_id: str;
    correct_class: int;
    correct_prob: float;
    false_class: int;
    false_prob: float;
    window_start: int;

    def display_row( self ) -> Tuple[int, float, int, float]:
        """1-based (correct class, its prob, false class, its prob)."""
        return ( self.correct_class + 1, round( self.correct_prob, 2 ), self.false_class + 1, round( self.false_prob, 2 ) );

@dataclass( frozen=True )
class SequenceMetrics:
    exact_match: bool;
    word_recall: float;
    edit_distance: int;

@dataclass( frozen=True )
class StreamReport:
    """Decoding outcome for one continuous stream."""
    stream_id: str;
    avg_max_softmax: Optional[float];
    recognized: Tuple[int, ...];
    expected: Tuple[int, ...];
    false_recognitions: Tuple[FalseRecognition, ...] = ();
    exact_match: bool = False;
    word_recall: float = 0.0;
    edit_distance: int = 0;

def isolated_accuracy( models: Union[WindowClassifier, Sequence[WindowClassifier]], test_set: LabeledWindows ) -> AccuracySummary:
    """
    Fraction of test windows whose argmax equals the label, per model, with mean and
    population standard deviation across the models (one model per training seed).

    Raises:
        EmptySetError: the test set is empty
    """
    if len( test_set ) == 0:
        raise EmptySetError( "isolated_accuracy needs a nonempty test set" );
    if hasattr( models, 'predict_proba' ):
        models = [ models ];
    if not models:
        raise EmptySetError( "isolated_accuracy needs at least one model" );
    if len( models ) == 1:
        logger.warning( "Accuracy spread over a single seed is 0 by construction" );

    scores = [];
    for model in models:
        predictions = np.asarray( model.predict_proba( test_set.windows ) ).argmax( axis=1 );
        scores.append( float( accuracy_score( test_set.labels, predictions ) ) );
    return AccuracySummary(
        mean=float( np.mean( scores ) ),
        std=float( np.std( scores ) ),
        per_model=tuple( scores ),
        num_windows=len( test_set )
    );

def avg_max_softmax( events: Sequence[DecodeEvent] ) -> float:
    """
    Mean confidence over Accept events only.

    Raises:
        NoAcceptError: no event was accepted
    """
    confidences = [ e.decision.confidence for e in events if isinstance( e.decision, Accept ) ];
    if not confidences:
        raise NoAcceptError( "no accepted window to average" );
    return float( np.mean( confidences ) );

def _candidate_windows( starts: np.ndarray, window_size: int, start: int, end: int ) -> np.ndarray:
    """Indices of windows fully inside [start, end]; failing that, those overlapping it most."""
    inside = np.flatnonzero( ( starts >= start ) & ( starts + window_size - 1 <= end ) );
    if inside.size:
        return inside;
    overlap = np.minimum( starts + window_size - 1, end ) - np.maximum( starts, start ) + 1;
    if overlap.size == 0 or overlap.max() <= 0:
        return np.array( [], dtype=np.int64 );
    return np.flatnonzero( overlap == overlap.max() );

def _accepted_segment( label: int, start: int, end: int, events: Sequence[DecodeEvent], window_size: int ) -> bool:
    """True when an Accept of `label` came from a window overlapping frames [start, end]."""
    return any(
        isinstance( e.decision, Accept ) and e.decision.class_id == label
        and e.window_start <= end and e.window_start + window_size - 1 >= start
        for e in events
    );

def false_recognitions( ground_truth: Optional[Sequence[Segment]], transcript: Transcript, prob_dump: ProbDump,
                        window_size: int, stream_id: str = "" ) -> List[FalseRecognition]:
    """
    Rows for ground-truth segments with no overlapping Accept of their own class and
    whose highest-scoring window put another class on top. An Accept of the right class
    elsewhere in the stream does not count for the segment.

    Raises:
        MissingGroundTruthError: ground_truth is None
    """
    if ground_truth is None:
        raise MissingGroundTruthError( f"stream {stream_id!r} has no ground truth" );
    accepts = [ e for e in transcript.events if isinstance( e.decision, Accept ) ];
    starts = np.asarray( prob_dump.window_starts, dtype=np.int64 );
    probs = np.asarray( prob_dump.probs, dtype=np.float64 );

    rows = [];
    for label, start, end in ground_truth:
        if _accepted_segment( label, start, end, accepts, window_size ):
            continue;
        candidates = _candidate_windows( starts, window_size, start, end );
        if candidates.size == 0:
            continue;
        best = candidates[ int( np.argmax( probs[ candidates ].max( axis=1 ) ) ) ];
        top = int( np.argmax( probs[ best ] ) );
        if top == label:
            continue;
        rows.append( FalseRecognition(
            stream_id=stream_id,
            correct_class=int( label ),
            correct_prob=float( probs[ best, label ] ),
            false_class=top,
            false_prob=float( probs[ best, top ] ),
            window_start=int( starts[ best ] )
        ) );
    return rows;

def false_recognition_report( stream: ContinuousStream, transcript: Transcript, prob_dump: ProbDump,
                              cfg: Optional[Config] = None ) -> List[FalseRecognition]:
    """False-recognition rows for a decoded stream (see false_recognitions)."""
    cfg = cfg or Config();
    return false_recognitions( stream.ground_truth, transcript, prob_dump, cfg.window_size, stream.stream_id );

def _alignment_matches( expected: Sequence[int], recognized: Sequence[int] ) -> Tuple[int, int]:
    """Edit distance and the most matched words among minimum-distance alignments."""
    n, m = len( expected ), len( recognized );
    # cost[i][j] = ( distance, -matches )
    cost = [ [ ( 0, 0 ) ] * ( m + 1 ) for _ in range( n + 1 ) ];
    for i in range( 1, n + 1 ):
        cost[ i ][ 0 ] = ( i, 0 );
    for j in range( 1, m + 1 ):
        cost[ 0 ][ j ] = ( j, 0 );
    for i in range( 1, n + 1 ):
        for j in range( 1, m + 1 ):
            d, neg = cost[ i - 1 ][ j - 1 ];
            diagonal = ( d, neg - 1 ) if expected[ i - 1 ] == recognized[ j - 1 ] else ( d + 1, neg );
            deletion = ( cost[ i - 1 ][ j ][ 0 ] + 1, cost[ i - 1 ][ j ][ 1 ] );
            insertion = ( cost[ i ][ j - 1 ][ 0 ] + 1, cost[ i ][ j - 1 ][ 1 ] );
            cost[ i ][ j ] = min( diagonal, deletion, insertion );
    distance, neg_matches = cost[ n ][ m ];
    return distance, -neg_matches;

def sequence_metrics( expected: Sequence[int], recognized: Sequence[int] ) -> SequenceMetrics:
    """
    Word-level comparison of a transcript with its reference.

    Returns:
        exact_match, word_recall (matched / expected words under an optimal alignment;
        1.0 for an empty reference) and Levenshtein distance
    """
    expected, recognized = list( expected ), list( recognized );
    distance = int( levenshtein( expected, recognized ) );
    _, matches = _alignment_matches( expected, recognized );
    recall = matches / len( expected ) if expected else 1.0;
    return SequenceMetrics( exact_match=expected == recognized, word_recall=float( recall ), edit_distance=distance );

def build_stream_report( stream_id: str, ground_truth: Optional[Sequence[Segment]], transcript: Transcript,
                         prob_dump: ProbDump, cfg: Config ) -> StreamReport:
    """Assemble the per-stream report from a decode run."""
    if ground_truth is None:
        raise MissingGroundTruthError( f"stream {stream_id!r} has no ground truth" );
    expected = [ label for label, _, _ in ground_truth ];
    metrics = sequence_metrics( expected, transcript.words );
    try:
        average = avg_max_softmax( transcript.events );
    except NoAcceptError:
        logger.warning( f"Stream {stream_id!r}: no window was accepted" );
        average = None;
    rows = false_recognitions( ground_truth, transcript, prob_dump, cfg.window_size, stream_id );
    return StreamReport(
        stream_id=stream_id,
        avg_max_softmax=average,
        recognized=tuple( transcript.words ),
        expected=tuple( expected ),
        false_recognitions=tuple( rows ),
        exact_match=metrics.exact_match,
        word_recall=metrics.word_recall,
        edit_distance=metrics.edit_distance
    );

def aggregate_recall( reports: Sequence[StreamReport] ) -> float:
    """Word recall pooled over all expected words of all streams."""
    total = sum( len( r.expected ) for r in reports );
    if total == 0:
        raise EmptySetError( "no expected words to score" );
    return float( sum( r.word_recall * len( r.expected ) for r in reports ) / total );

def confusion_pairs( reports: Sequence[StreamReport] ) -> List[Tuple[int, int, int]]:
    """(correct class, false class, count) over every false recognition, most frequent first."""
    counts = Counter( ( row.correct_class, row.false_class ) for r in reports for row in r.false_recognitions );
    return sorted( ( ( c, f, n ) for ( c, f ), n in counts.items() ), key=lambda item: ( -item[ 2 ], item[ 0 ], item[ 1 ] ) );

def threshold_sweep( prob_dump: ProbDump, ground_truth: Sequence[Segment], thresholds: Sequence[float],
                     cfg: Optional[Config] = None ) -> "pd.DataFrame":
    """
    Re-decode one probability dump at several thresholds.

    Returns:
        DataFrame with threshold, words, accepted, exact_match, word_recall, edit_distance
        and false_recognitions columns, one row per threshold
    """
    cfg = cfg or Config();
    expected = [ label for label, _, _ in ground_truth ];
    records = [];
    for threshold in thresholds:
        sweep_cfg = cfg.replace( threshold=float( threshold ) );
        transcript = decode_probabilities( prob_dump.probs, sweep_cfg, prob_dump.window_starts.tolist() );
        metrics = sequence_metrics( expected, transcript.words );
        rows = false_recognitions( ground_truth, transcript, prob_dump, sweep_cfg.window_size );
        records.append( {
            'threshold': float( threshold ),
            'words': len( transcript.words ),
            'accepted': sum( 1 for e in transcript.events if e.accepted ),
            'exact_match': metrics.exact_match,
            'word_recall': metrics.word_recall,
            'edit_distance': metrics.edit_distance,
            'false_recognitions': len( rows )
        } );
    return pd.DataFrame.from_records( records );

def _check_replay_rows( num_classes: int, accepted_maxima: Sequence[float],
                        false_rows: Iterable[Tuple[int, float, int, float]] ) -> None:
    for top in accepted_maxima:
        if not 0.0 <= top <= 1.0:
            raise ConfigError( f"accepted maximum {top} is not a probability" );
    for label, correct_prob, false_class, false_prob in false_rows:
        where = f"false row for class {label}";
        if not 0 <= int( false_class ) < num_classes or int( false_class ) == int( label ):
            raise ConfigError( f"{where}: false class {false_class} must be another class in [0, {num_classes})" );
        if min( correct_prob, false_prob ) < 0.0 or correct_prob + false_prob > 1.0 + 1e-9:
            raise ConfigError( f"{where}: probabilities {correct_prob} + {false_prob} exceed 1" );
        # The two named classes already hold all the mass when K = 2
        if num_classes == 2 and abs( correct_prob + false_prob - 1.0 ) > 1e-9:
            raise ConfigError( f"{where}: with 2 classes the probabilities must sum to 1" );

def replay_table_rows( num_classes: int, accepted_maxima: Sequence[float],
                       false_rows: Sequence[Tuple[int, float, int, float]],
                       window_size: int = 50, stream_id: str = "replay" ) -> Tuple[ProbDump, Tuple[Segment, ...]]:
    """
    Build a probability dump and ground truth from reported per-sign numbers.

    Sign i of the stream has label i and owns one window starting at i * window_size.
    Signs listed in false_rows as (label, correct_prob, false_class, false_prob), 0-based,
    put those two probabilities on their window; every other sign takes the next value of
    accepted_maxima on its own class. Remaining mass is spread evenly over the other classes.

    Raises:
        ConfigError: the rows do not describe a valid stream
    """
    false_by_label = { int( row[ 0 ] ): row for row in false_rows };
    if len( false_by_label ) != len( false_rows ):
        raise ConfigError( "false rows repeat a correct class" );
    num_signs = len( accepted_maxima ) + len( false_by_label );
    if num_signs > num_classes or any( label < 0 or label >= num_signs for label in false_by_label ):
        raise ConfigError( f"{num_signs} signs cannot be laid out over {num_classes} classes" );
    _check_replay_rows( num_classes, accepted_maxima, false_by_label.values() );

    probs = np.zeros( ( num_signs, num_classes ) );
    maxima = iter( accepted_maxima );
    for label in range( num_signs ):
        if label in false_by_label:
            _, correct_prob, false_class, false_prob = false_by_label[ label ];
            probs[ label ] = max( 1.0 - correct_prob - false_prob, 0.0 ) / max( num_classes - 2, 1 );
            probs[ label, label ] = correct_prob;
            probs[ label, int( false_class ) ] = false_prob;
        else:
            top = float( next( maxima ) );
            probs[ label ] = ( 1.0 - top ) / ( num_classes - 1 );
            probs[ label, label ] = top;

    starts = np.arange( num_signs, dtype=np.int64 ) * window_size;
    segments = tuple( ( label, int( starts[ label ] ), int( starts[ label ] + window_size - 1 ) ) for label in range( num_signs ) );
    cfg = Config( window_size=window_size );
    transcript = decode_probabilities( probs, cfg, starts.tolist() );
    logger.debug( f"Replay {stream_id!r}: {num_signs} signs, {len( transcript.words )} accepted" );
    return ProbDump( window_starts=starts, probs=probs, events=transcript.events ), segments;

def _stream_frame( reports: Sequence[StreamReport] ) -> "pd.DataFrame":
    records = [];
    for report in sorted( reports, key=lambda r: r.stream_id ):
        records.append( {
            'stream_id': report.stream_id,
            'avg_max_softmax': report.avg_max_softmax,
            'exact_match': report.exact_match,
            'word_recall': report.word_recall,
            'edit_distance': report.edit_distance,
            'recognized': len( report.recognized ),
            'expected': len( report.expected ),
            'false_recognitions': len( report.false_recognitions )
        } );
    return pd.DataFrame.from_records( records, columns=[
        'stream_id', 'avg_max_softmax', 'exact_match', 'word_recall', 'edit_distance',
        'recognized', 'expected', 'false_recognitions'
    ] );

def false_recognition_frame( reports: Sequence[StreamReport] ) -> "pd.DataFrame":
    """All false recognitions with 1-based class indices for display."""
    records = [];
    for report in sorted( reports, key=lambda r: r.stream_id ):
        for row in report.false_recognitions:
            records.append( {
                'stream_id': row.stream_id,
                'correct_class': row.correct_class + 1,
                'correct_prob': row.correct_prob,
                'false_class': row.false_class + 1,
                'false_prob': row.false_prob,
                'window_start': row.window_start
            } );
    return pd.DataFrame.from_records( records, columns=[
        'stream_id', 'correct_class', 'correct_prob', 'false_class', 'false_prob', 'window_start'
    ] );

def write_report_csv( reports: Sequence[StreamReport], path: Union[str, Path] ) -> Tuple[Path, Path]:
    """
    Write the per-stream CSV at path and the false-recognition CSV next to it
    (<stem>_false.csv). Both start with a schema comment line.
    """
    path = Path( path );
    false_path = path.with_name( f"{path.stem}_false{path.suffix or '.csv'}" );
    for target, frame in ( ( path, _stream_frame( reports ) ), ( false_path, false_recognition_frame( reports ) ) ):
        with open( target, 'w', newline='' ) as f:
            f.write( f"# report_schema_version={REPORT_SCHEMA_VERSION}\n" );
            frame.to_csv( f, index=False, float_format="%.6f" );
    logger.info( f"Wrote report CSVs {path} and {false_path}" );
    return path, false_path;

def render_report_text( reports: Sequence[StreamReport], accuracy: Optional[AccuracySummary] = None ) -> str:
    """Aligned text tables: per-stream summary, then every false recognition (1-based)."""
    lines = [ f"# sign segmenter report (schema {REPORT_SCHEMA_VERSION})" ];
    if accuracy is not None:
        lines.append( f"Isolated test accuracy: {accuracy} % over {len( accuracy.per_model )} seed(s)" );

    lines.append( "" );
    lines.append( f"{'stream':<16}{'avg max softmax':>16}{'exact':>8}{'recall':>9}{'edits':>7}{'words':>7}{'false':>7}" );
    for report in sorted( reports, key=lambda r: r.stream_id ):
        average = f"{report.avg_max_softmax:.2f}" if report.avg_max_softmax is not None else "-";
        lines.append(
            f"{report.stream_id:<16}{average:>16}{'yes' if report.exact_match else 'no':>8}"
            f"{report.word_recall:>9.3f}{report.edit_distance:>7d}{len( report.recognized ):>7d}"
            f"{len( report.false_recognitions ):>7d}"
        );

    rows = [ row for r in sorted( reports, key=lambda r: r.stream_id ) for row in r.false_recognitions ];
    lines.append( "" );
    lines.append( f"False recognitions: {len( rows )}" );
    if rows:
        lines.append( f"{'stream':<16}{'correct class':>14}{'softmax':>9}{'false class':>13}{'softmax':>9}" );
        for row in rows:
            correct, correct_prob, wrong, wrong_prob = row.display_row();
            lines.append( f"{row.stream_id:<16}{correct:>14d}{correct_prob:>9.2f}{wrong:>13d}{wrong_prob:>9.2f}" );

    lines.append( "" );
    lines.append( f"# {SEED_VARIANCE_NOTE}" );
    return "\n".join( lines ) + "\n";

def write_report_text( reports: Sequence[StreamReport], path: Union[str, Path],
                       accuracy: Optional[AccuracySummary] = None ) -> Path:
    path = Path( path );
    path.write_text( render_report_text( reports, accuracy ) );
    logger.info( f"Wrote text report {path}" );
    return path;
