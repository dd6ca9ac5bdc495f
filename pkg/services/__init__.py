"""
Services package for the sign segmenter.
Contains preprocessing, decoding, evaluation, synthetic data and file-format services.
"""

from .preprocess import (
    SplitSpec, resample_clip, concat_clips, split_dataset, clips_to_windows,
    interleave_clips, window_targets, boundary_windows, training_windows
);
from .stream_decoder import (
    DecoderState, Transcript, ProbDump, StreamingSegmenter,
    decide_window, decode_stream, decode_incremental, decode_probabilities, decode_replay, collapse_blanks
);
from .model_store import save_model, load_model;
from .evaluation import (
    FalseRecognition, StreamReport, AccuracySummary,
    isolated_accuracy, avg_max_softmax, false_recognition_report, sequence_metrics
);
from .synth_generator import SynthSpec, generate, build_continuous_suite;

__all__ = [
    'SplitSpec', 'resample_clip', 'concat_clips', 'split_dataset', 'clips_to_windows',
    'interleave_clips', 'window_targets', 'boundary_windows', 'training_windows',
    'DecoderState', 'Transcript', 'ProbDump', 'StreamingSegmenter',
    'decide_window', 'decode_stream', 'decode_incremental', 'decode_probabilities', 'decode_replay', 'collapse_blanks',
    'save_model', 'load_model',
    'FalseRecognition', 'StreamReport', 'AccuracySummary',
    'isolated_accuracy', 'avg_max_softmax', 'false_recognition_report', 'sequence_metrics',
    'SynthSpec', 'generate', 'build_continuous_suite'
];
