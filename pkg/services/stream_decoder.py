#!/usr/bin/env python3
"""
Stream Decoder
Sliding-window segmentation of a continuous keypoint stream into a word sequence

Each window position is classified independently. A window is accepted only when its
top probability is strictly above the threshold and its class differs from the most
recently accepted one; everything else is a Blank that never reaches the transcript.
"""

import logging;
from collections import deque;
from dataclasses import dataclass;
from typing import Iterable, List, Optional, Protocol, Sequence, Tuple;
import numpy as np;

from ml.sign_data import (
    ContinuousStream, KeypointFrame, ProbVector, Accept, Blank, BlankReason, Decision, DecodeEvent, validate_prob
);
from ml.features import clip_features, frame_features, window_stack;
from utils.config import Config;
from utils.error_utils import StreamTooShortError, SimplexError, ConfigError, DimensionMismatchError;

logger = logging.getLogger( __name__ );

# Windows per predict_proba call
INFERENCE_BATCH = 256;
# Events a StreamingSegmenter retains
STREAM_EVENT_HISTORY = 4096;
# Rounding tolerance of a 6-digit probability dump after renormalization
REPLAY_SLACK = 1e-5;

class WindowClassifier( Protocol ):
    """Anything that maps a (B, W, D) window stack to (B, K) probabilities."""

    def predict_proba( self, windows: np.ndarray ) -> np.ndarray: ...

@dataclass( frozen=True )
class DecoderState:
    """Decoder memory: the most recently accepted class and every event so far."""
    last_accepted: Optional[int] = None;
    events: Tuple[DecodeEvent, ...] = ();

@dataclass( frozen=True )
class Transcript:
    """Recognized words (blanks removed) and the full event list."""
    words: Tuple[int, ...];
    events: Tuple[DecodeEvent, ...];

    @classmethod
    def from_events( cls, events: Sequence[DecodeEvent] ) -> "Transcript":
        return cls( words=tuple( collapse_blanks( events ) ), events=tuple( events ) );

    @property
    def confidences( self ) -> List[float]:
        return [ e.decision.confidence for e in self.events if isinstance( e.decision, Accept ) ];

@dataclass( frozen=True, eq=False )
class ProbDump:
    """Per-window probabilities of one decode run, aligned with its events."""
    window_starts: np.ndarray;
    probs: np.ndarray;
    events: Tuple[DecodeEvent, ...] = ();

    def __len__( self ) -> int:
        return int( self.window_starts.shape[0] );

    @property
    def num_classes( self ) -> int:
        return int( self.probs.shape[1] );

def decide_window( p: ProbVector, last_accepted: Optional[int], threshold: float ) -> Decision:
    """
    Threshold and duplicate-suppression rule for one window.

    Args:
        p: Window probabilities
        last_accepted: Class of the most recent Accept, or None
        threshold: Acceptance threshold, must exceed 0.5

    Returns:
        Accept( argmax, max ) when max > threshold and argmax != last_accepted, otherwise a Blank
    """
    if not threshold > 0.5:
        raise ConfigError( f"threshold must exceed 0.5, got {threshold}" );
    above = int( np.count_nonzero( p.probs > threshold ) );
    if above > 1:
        raise SimplexError( f"{above} classes exceed threshold {threshold}; probabilities are not a distribution" );

    c, m = p.argmax, p.max_prob;
    if not m > threshold:
        return Blank( BlankReason.BELOW_THRESHOLD );
    if last_accepted is not None and c == last_accepted:
        return Blank( BlankReason.DUPLICATE_SUPPRESSED );
    return Accept( class_id=c, confidence=m );

def decode_incremental( state: DecoderState, next_window_prob: ProbVector, cfg: Config,
                        window_start: Optional[int] = None ) -> Tuple[DecoderState, DecodeEvent]:
    """
    One pure decoder step.

    Args:
        state: Current decoder state (not modified)
        next_window_prob: Probabilities of the next window
        cfg: Supplies threshold and stride
        window_start: First frame of the window; defaults to len(events) * stride

    Returns:
        ( new state, event for this window )
    """
    if window_start is None:
        window_start = len( state.events ) * cfg.stride;
    event = _window_event( next_window_prob, state.last_accepted, cfg, window_start );
    return DecoderState( last_accepted=_last_accepted( event, state.last_accepted ), events=state.events + ( event, ) ), event;

def _window_event( p: ProbVector, last_accepted: Optional[int], cfg: Config, window_start: int ) -> DecodeEvent:
    return DecodeEvent(
        window_start=int( window_start ),
        decision=decide_window( p, last_accepted, cfg.threshold ),
        max_prob=p.max_prob,
        argmax_class=p.argmax
    );

def _last_accepted( event: DecodeEvent, previous: Optional[int] ) -> Optional[int]:
    return event.decision.class_id if isinstance( event.decision, Accept ) else previous;

def collapse_blanks( events: Iterable[DecodeEvent] ) -> List[int]:
    """Accepted classes in event order."""
    return [ e.decision.class_id for e in events if isinstance( e.decision, Accept ) ];

def window_starts( length: int, cfg: Config ) -> range:
    """Start frames of every full window: floor((T - W) / stride) + 1 of them for T >= W."""
    if length < cfg.window_size:
        return range( 0 );
    return range( 0, length - cfg.window_size + 1, cfg.stride );

def decode_probabilities( probs: np.ndarray, cfg: Config, starts: Optional[Sequence[int]] = None ) -> Transcript:
    """
    Fold of decode_incremental over a sequence of window probabilities, collecting the
    events in one list instead of rebuilding the state tuple per window.

    Args:
        probs: Array (N, K), one row per window
        cfg: Decoder settings
        starts: Window start frames (default 0, stride, 2*stride, ...)
    """
    probs = np.asarray( probs, dtype=np.float64 );
    if starts is None:
        starts = [ i * cfg.stride for i in range( probs.shape[0] ) ];
    events = [];
    last_accepted = None;
    for start, row in zip( starts, probs ):
        event = _window_event( validate_prob( row ), last_accepted, cfg, start );
        last_accepted = _last_accepted( event, last_accepted );
        events.append( event );
    return Transcript.from_events( events );

def _outcome( event: DecodeEvent ) -> Tuple[str, Optional[int]]:
    return event.tag, event.decision.class_id if event.accepted else None;

def _recorded_decision( record: DecodeEvent, p: ProbVector, last_accepted: Optional[int],
                        threshold: float, slack: float ) -> Optional[Decision]:
    """The recorded decision if the probabilities support it within `slack`, else None."""
    decision = record.decision;
    top = p.max_prob;
    if isinstance( decision, Accept ):
        c = decision.class_id;
        if c != last_accepted and p.probs[ c ] > threshold - slack and p.probs[ c ] >= top - slack:
            return Accept( class_id=c, confidence=max( float( p.probs[ c ] ), record.max_prob ) );
        return None;
    if decision.reason is BlankReason.BELOW_THRESHOLD:
        return decision if top <= threshold + slack else None;
    if last_accepted is not None and p.probs[ last_accepted ] >= top - slack and p.probs[ last_accepted ] > threshold - slack:
        return decision;
    return None;

def decode_replay( dump: ProbDump, cfg: Config, slack: float = REPLAY_SLACK ) -> Transcript:
    """
    Re-decode a probability dump read back from disk.

    The file keeps 6 fractional digits, so a window within `slack` of the threshold or of
    a tie can decide differently from the original run. Such a window keeps the decision
    recorded in the dump whenever its probabilities support it within `slack`; every
    other window is decided afresh. A dump without recorded events decodes like
    decode_probabilities.
    """
    probs = np.asarray( dump.probs, dtype=np.float64 );
    records = dump.events if len( dump.events ) == len( dump ) else None;
    events = [];
    last_accepted = None;
    for index, ( start, row ) in enumerate( zip( dump.window_starts.tolist(), probs ) ):
        p = validate_prob( row );
        event = _window_event( p, last_accepted, cfg, start );
        if records is not None and _outcome( records[ index ] ) != _outcome( event ):
            kept = _recorded_decision( records[ index ], p, last_accepted, cfg.threshold, slack );
            if kept is not None:
                logger.debug( f"window {start}: kept recorded {records[ index ].tag} over {event.tag}" );
                top_class = kept.class_id if isinstance( kept, Accept ) else p.argmax;
                top_prob = kept.confidence if isinstance( kept, Accept ) else p.max_prob;
                event = DecodeEvent( window_start=int( start ), decision=kept, max_prob=top_prob, argmax_class=top_class );
        last_accepted = _last_accepted( event, last_accepted );
        events.append( event );
    return Transcript.from_events( events );

def stream_probabilities( stream: ContinuousStream, model: WindowClassifier, cfg: Config ) -> Tuple[np.ndarray, np.ndarray]:
    """
    Window start frames and class probabilities for every full window of a stream.

    Raises:
        StreamTooShortError: the stream is shorter than one window
    """
    if len( stream ) < cfg.window_size:
        raise StreamTooShortError(
            f"stream {stream.stream_id!r} has {len( stream )} frames, a window needs {cfg.window_size}"
        );
    features = clip_features( stream.keypoints );
    starts = np.asarray( window_starts( len( stream ), cfg ), dtype=np.int64 );
    chunks = [];
    for offset in range( 0, len( starts ), INFERENCE_BATCH ):
        batch = window_stack( features, starts[ offset:offset + INFERENCE_BATCH ], cfg.window_size );
        chunks.append( np.asarray( model.predict_proba( batch ), dtype=np.float64 ) );
    return starts, np.concatenate( chunks, axis=0 );

def decode_stream_with_dump( stream: ContinuousStream, model: WindowClassifier, cfg: Config ) -> Tuple[Transcript, ProbDump]:
    """decode_stream plus the per-window probability dump."""
    starts, probs = stream_probabilities( stream, model, cfg );
    transcript = decode_probabilities( probs, cfg, starts.tolist() );
    for event in transcript.events:
        logger.debug( f"window {event.window_start}: {event.tag} class {event.argmax_class} p={event.max_prob:.4f}" );
    logger.info( f"Decoded stream {stream.stream_id!r}: {len( starts )} windows, {len( transcript.words )} words" );
    return transcript, ProbDump( window_starts=starts, probs=probs, events=transcript.events );

def decode_stream( stream: ContinuousStream, model: WindowClassifier, cfg: Config ) -> Transcript:
    """
    Slide a window of cfg.window_size frames with cfg.stride across the stream and decode.

    Raises:
        StreamTooShortError: the stream is shorter than one window
    """
    transcript, _ = decode_stream_with_dump( stream, model, cfg );
    return transcript;

class StreamingSegmenter:
    """
    Frame-at-a-time front end: keeps the last window of feature rows and decodes
    whenever a full window ends on a stride position.

    Memory stays bounded on unbounded input: only the last `history` events are
    kept (None keeps all of them); the word list keeps every accepted class.
    """

    def __init__( self, model: WindowClassifier, cfg: Config, history: Optional[int] = STREAM_EVENT_HISTORY ):
        if history is not None and history < 1:
            raise ConfigError( f"event history must be at least 1, got {history}" );
        self.model = model;
        self.cfg = cfg;
        self.logger = logging.getLogger( self.__class__.__name__ );
        self.rows = deque( maxlen=cfg.window_size );
        self.previous: Optional[KeypointFrame] = None;
        self.frames_seen = 0;
        self.windows_decoded = 0;
        self.last_accepted: Optional[int] = None;
        self.words: List[int] = [];
        self.events = deque( maxlen=history );

    def push( self, frame: KeypointFrame ) -> Optional[DecodeEvent]:
        """Add the next frame; returns the event of the window completed by it, if any."""
        if self.previous is not None and self.previous.hand_count != frame.hand_count:
            raise DimensionMismatchError( "hand count changed mid-stream" );
        features = frame_features( frame, self.previous );
        self.rows.append( np.asarray( features.values ) );
        self.previous = frame;
        self.frames_seen += 1;

        start = self.frames_seen - self.cfg.window_size;
        if start < 0 or start % self.cfg.stride:
            return None;
        window = np.stack( list( self.rows ) )[ np.newaxis ];
        probs = validate_prob( self.model.predict_proba( window )[ 0 ] );
        event = _window_event( probs, self.last_accepted, self.cfg, start );
        self.last_accepted = _last_accepted( event, self.last_accepted );
        self.events.append( event );
        self.windows_decoded += 1;
        if event.accepted:
            self.words.append( event.argmax_class );
            self.logger.info( f"Accepted class {event.argmax_class} at window {start} (p={event.max_prob:.4f})" );
        return event;

    def push_all( self, frames: Iterable[KeypointFrame] ) -> List[DecodeEvent]:
        return [ event for event in ( self.push( frame ) for frame in frames ) if event is not None ];

    @property
    def transcript( self ) -> Transcript:
        """Every recognized word; events are the retained tail only."""
        return Transcript( words=tuple( self.words ), events=tuple( self.events ) );
