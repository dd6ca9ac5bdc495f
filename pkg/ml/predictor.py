#!/usr/bin/env python3
"""
Sign Window Predictor
Many-to-one gated recurrent classifier (PyTorch) and a nearest-centroid baseline mapping
a window of SVD features to class probabilities
"""

import math;
import logging;
from dataclasses import dataclass, field;
from enum import Enum;
from typing import Dict, List, Optional, Tuple, Union;
import numpy as np;

try:
    import torch;
    import torch.nn as nn;
    import torch.nn.functional as F;
    import torch.optim as optim;
    from torch.utils.data import Dataset, DataLoader;
    TORCH_AVAILABLE = True;
except ImportError:
    print( "PyTorch is not installed. Please install it using 'pip install torch'." );
    TORCH_AVAILABLE = False;

try:
    from sklearn.preprocessing import StandardScaler;
    SKLEARN_AVAILABLE = True;
except ImportError:
    print( "Scikit-learn is not installed. Please install it using 'pip install scikit-learn'." );
    SKLEARN_AVAILABLE = False;

from .sign_data import ProbVector, validate_prob;
from .features import FeatureWindow;
from utils.config import Config, learning_rate_at;
from utils.error_utils import DimensionMismatchError, EmptyClassError, DivergenceError, ConfigError;

logger = logging.getLogger( __name__ );

FORMAT_VERSION = 1;
GATES = ( 'update', 'reset', 'candidate' );

class ModelKind( Enum ):
    CENTROID = 0
    RECURRENT = 1

def recurrent_parameter_names() -> List[str]:
    """Trainable parameter names in serialization order."""
    names = [];
    for gate in GATES:
        names += [ f"input_{gate}", f"hidden_{gate}", f"bias_{gate}" ];
    return names + [ 'readout_weight', 'readout_bias' ];

NORMALIZATION_NAMES = ( 'feature_mean', 'feature_scale' );

@dataclass( frozen=True, eq=False )
class CentroidParams:
    """Per-class mean feature vectors and the softmax temperature."""
    centroids: np.ndarray;
    temperature: float;

    @property
    def input_dim( self ) -> int:
        return int( self.centroids.shape[1] );

    def arrays( self ) -> Dict[str, np.ndarray]:
        return { 'centroids': self.centroids, 'temperature': np.array( [ self.temperature ] ) };

@dataclass( frozen=True, eq=False )
class RecurrentParams:
    """Weights of a single-layer gated recurrent cell plus readout and input normalization."""
    tensors: Dict[str, np.ndarray];

    @property
    def input_dim( self ) -> int:
        return int( self.tensors[ 'input_update' ].shape[0] );

    @property
    def hidden_dim( self ) -> int:
        return int( self.tensors[ 'hidden_update' ].shape[0] );

    def arrays( self ) -> Dict[str, np.ndarray]:
        return dict( self.tensors );

    @classmethod
    def zeros( cls, input_dim: int, hidden_dim: int, num_classes: int ) -> "RecurrentParams":
        """All-zero cell and readout with identity normalization."""
        tensors = {};
        for gate in GATES:
            tensors[ f"input_{gate}" ] = np.zeros( ( input_dim, hidden_dim ) );
            tensors[ f"hidden_{gate}" ] = np.zeros( ( hidden_dim, hidden_dim ) );
            tensors[ f"bias_{gate}" ] = np.zeros( hidden_dim );
        tensors[ 'readout_weight' ] = np.zeros( ( hidden_dim, num_classes ) );
        tensors[ 'readout_bias' ] = np.zeros( num_classes );
        tensors[ 'feature_mean' ] = np.zeros( input_dim );
        tensors[ 'feature_scale' ] = np.ones( input_dim );
        return cls( tensors=tensors );

    @classmethod
    def initialize( cls, input_dim: int, hidden_dim: int, num_classes: int, seed: int ) -> "RecurrentParams":
        """Weights uniform in [-1/sqrt(H), 1/sqrt(H)] from a seeded generator; biases zero."""
        generator = torch.Generator().manual_seed( int( seed ) );
        bound = 1.0 / math.sqrt( hidden_dim );
        params = cls.zeros( input_dim, hidden_dim, num_classes );
        tensors = dict( params.tensors );
        for name in recurrent_parameter_names():
            if name.startswith( 'bias' ) or name == 'readout_bias':
                continue;
            shape = tensors[ name ].shape;
            values = torch.rand( shape, generator=generator, dtype=torch.float64 ) * ( 2.0 * bound ) - bound;
            tensors[ name ] = values.numpy();
        return cls( tensors=tensors );

@dataclass( frozen=True, eq=False )
class PredictorModel:
    """Trained window classifier: parameters, class count and the config it was trained with."""
    kind: Union[CentroidParams, RecurrentParams];
    num_classes: int;
    config: Config = field( default_factory=Config );
    format_version: int = FORMAT_VERSION;

    def __post_init__( self ):
        if self.num_classes < 2:
            raise ConfigError( f"a predictor needs at least 2 classes, got {self.num_classes}" );
        arrays = self.kind.arrays();
        for name, values in arrays.items():
            if not np.all( np.isfinite( values ) ):
                raise DivergenceError( f"model parameter {name} has non-finite values" );
        if isinstance( self.kind, CentroidParams ):
            if self.kind.centroids.shape[0] != self.num_classes:
                raise DimensionMismatchError( "centroid count does not match num_classes" );
            if not self.kind.temperature > 0:
                raise ConfigError( "centroid temperature must be positive" );
        else:
            D, H = self.kind.input_dim, self.kind.hidden_dim;
            expected = _recurrent_shapes( D, H, self.num_classes );
            for name, shape in expected.items():
                if name not in arrays or arrays[ name ].shape != shape:
                    raise DimensionMismatchError( f"parameter {name} should have shape {shape}" );

    @property
    def model_kind( self ) -> ModelKind:
        return ModelKind.CENTROID if isinstance( self.kind, CentroidParams ) else ModelKind.RECURRENT;

    @property
    def input_dim( self ) -> int:
        return self.kind.input_dim;

    def predict_proba( self, windows: np.ndarray ) -> np.ndarray:
        """
        Class probabilities for a stack of windows.

        Args:
            windows: Array (B, window_rows, D)

        Returns:
            Array (B, K); every row lies on the probability simplex
        """
        windows = np.asarray( windows, dtype=np.float64 );
        if windows.ndim != 3 or windows.shape[2] != self.input_dim:
            raise DimensionMismatchError( f"expected windows of shape (B, rows, {self.input_dim}), got {windows.shape}" );
        if windows.shape[0] == 0:
            return np.zeros( ( 0, self.num_classes ) );
        if isinstance( self.kind, CentroidParams ):
            return _centroid_proba( self.kind, windows );
        network = GatedRecurrentClassifier.from_params( self.kind );
        network.eval();
        with torch.no_grad():
            logits = network( torch.tensor( windows ) );
            return torch.softmax( logits, dim=1 ).numpy();

def _recurrent_shapes( D: int, H: int, K: int ) -> Dict[str, Tuple[int, ...]]:
    shapes = {};
    for gate in GATES:
        shapes[ f"input_{gate}" ] = ( D, H );
        shapes[ f"hidden_{gate}" ] = ( H, H );
        shapes[ f"bias_{gate}" ] = ( H, );
    shapes[ 'readout_weight' ] = ( H, K );
    shapes[ 'readout_bias' ] = ( K, );
    shapes[ 'feature_mean' ] = ( D, );
    shapes[ 'feature_scale' ] = ( D, );
    return shapes;

def _softmax( logits: np.ndarray ) -> np.ndarray:
    shifted = logits - logits.max( axis=1, keepdims=True );
    exp = np.exp( shifted );
    return exp / exp.sum( axis=1, keepdims=True );

def _centroid_proba( params: CentroidParams, windows: np.ndarray ) -> np.ndarray:
    pooled = windows.mean( axis=1 );
    distances = np.linalg.norm( pooled[ :, np.newaxis, : ] - params.centroids[ np.newaxis, :, : ], axis=2 );
    return _softmax( -distances / params.temperature );

def predict( model: PredictorModel, w: FeatureWindow ) -> ProbVector:
    """
    Class probabilities for one feature window.

    Raises:
        DimensionMismatchError: the window's row count or feature width does not match the model
    """
    matrix = np.asarray( w.matrix, dtype=np.float64 );
    if matrix.ndim != 2 or matrix.shape[1] != model.input_dim:
        raise DimensionMismatchError( f"window has shape {matrix.shape}, model expects width {model.input_dim}" );
    if matrix.shape[0] != model.config.window_size:
        raise DimensionMismatchError( f"window has {matrix.shape[0]} rows, model expects {model.config.window_size}" );
    return validate_prob( model.predict_proba( matrix[ np.newaxis ] )[ 0 ] );

class GatedRecurrentClassifier( nn.Module if TORCH_AVAILABLE else object ):
    """
    Single-layer gated recurrent cell read out from its final hidden state.

    z = sigmoid( x Wz + h Uz + bz ), r = sigmoid( x Wr + h Ur + br )
    n = tanh( x Wn + ( r * h ) Un + bn ), h' = ( 1 - z ) * n + z * h
    logits = h_T Wo + bo
    """

    def __init__( self, params: RecurrentParams ):
        super( GatedRecurrentClassifier, self ).__init__();
        tensors = params.tensors;
        self.input_dim = params.input_dim;
        self.hidden_dim = params.hidden_dim;
        for name in recurrent_parameter_names():
            setattr( self, name, nn.Parameter( torch.tensor( tensors[ name ], dtype=torch.float64 ) ) );
        for name in NORMALIZATION_NAMES:
            self.register_buffer( name, torch.tensor( tensors[ name ], dtype=torch.float64 ) );

    @classmethod
    def from_params( cls, params: RecurrentParams ) -> "GatedRecurrentClassifier":
        return cls( params );

    def to_params( self ) -> RecurrentParams:
        tensors = { name: getattr( self, name ).detach().cpu().numpy().copy()
                    for name in list( recurrent_parameter_names() ) + list( NORMALIZATION_NAMES ) };
        return RecurrentParams( tensors=tensors );

    def forward( self, x: torch.Tensor ) -> torch.Tensor:
        x = ( x - self.feature_mean ) / self.feature_scale;
        H = self.hidden_dim;
        # Input projections of every step for all three gates: (B, T, 3H)
        projected = ( x @ torch.cat( [ self.input_update, self.input_reset, self.input_candidate ], dim=1 )
                      + torch.cat( [ self.bias_update, self.bias_reset, self.bias_candidate ] ) );
        hidden_gates = torch.cat( [ self.hidden_update, self.hidden_reset ], dim=1 );
        h = x.new_zeros( ( x.shape[0], H ) );
        for t in range( x.shape[1] ):
            step = projected[ :, t, : ];
            gates = torch.sigmoid( step[ :, :2 * H ] + h @ hidden_gates );
            z, r = gates[ :, :H ], gates[ :, H: ];
            n = torch.tanh( step[ :, 2 * H: ] + ( r * h ) @ self.hidden_candidate );
            h = ( 1.0 - z ) * n + z * h;
        return h @ self.readout_weight + self.readout_bias;

@dataclass( frozen=True )
class LabeledWindows:
    """
    Feature windows (N, rows, D) with their class labels (N,).

    Windows cut across sign boundaries carry soft targets (N, K); a window without
    targets, or whose target row is one-hot, is pure and counts toward accuracy.
    """
    windows: np.ndarray;
    labels: np.ndarray;
    targets: Optional[np.ndarray] = None;

    def __post_init__( self ):
        windows = np.asarray( self.windows, dtype=np.float64 );
        labels = np.asarray( self.labels, dtype=np.int64 );
        if windows.ndim != 3 or labels.shape != ( windows.shape[0], ):
            raise DimensionMismatchError( f"windows {windows.shape} and labels {labels.shape} do not line up" );
        object.__setattr__( self, 'windows', windows );
        object.__setattr__( self, 'labels', labels );
        if self.targets is not None:
            targets = np.asarray( self.targets, dtype=np.float64 );
            if targets.ndim != 2 or targets.shape[0] != labels.shape[0]:
                raise DimensionMismatchError( f"targets {targets.shape} do not line up with {labels.shape[0]} windows" );
            if targets.size and ( np.any( targets < 0 ) or np.max( np.abs( targets.sum( axis=1 ) - 1.0 ) ) > 1e-9 ):
                raise ConfigError( "every target row must be a probability distribution" );
            object.__setattr__( self, 'targets', targets );

    def __len__( self ) -> int:
        return int( self.labels.shape[0] );

    @property
    def pure( self ) -> np.ndarray:
        """Boolean mask of windows with a single-class target."""
        if self.targets is None:
            return np.ones( len( self ), dtype=bool );
        return self.targets.max( axis=1, initial=0.0 ) >= 1.0 - 1e-12;

    def soft_targets( self, num_classes: int ) -> np.ndarray:
        """Target distributions (N, K); one-hot labels when no soft targets were given."""
        if self.targets is None:
            return np.eye( num_classes )[ self.labels ];
        if self.targets.shape[1] != num_classes:
            raise DimensionMismatchError( f"targets cover {self.targets.shape[1]} classes, expected {num_classes}" );
        return self.targets;

    def pure_subset( self ) -> "LabeledWindows":
        mask = self.pure;
        return LabeledWindows( windows=self.windows[ mask ], labels=self.labels[ mask ] );

    @classmethod
    def concat( cls, parts: List["LabeledWindows"], num_classes: int ) -> "LabeledWindows":
        """Stack several sets; soft targets are kept when any part carries them."""
        parts = [ part for part in parts if len( part ) ];
        if not parts:
            raise ConfigError( "concat needs at least one non-empty set" );
        windows = np.concatenate( [ part.windows for part in parts ], axis=0 );
        labels = np.concatenate( [ part.labels for part in parts ] );
        if all( part.targets is None for part in parts ):
            return cls( windows=windows, labels=labels );
        targets = np.concatenate( [ part.soft_targets( num_classes ) for part in parts ], axis=0 );
        return cls( windows=windows, labels=labels, targets=targets );

@dataclass( frozen=True )
class EpochRecord:
    epoch: int;
    learning_rate: float;
    train_loss: float;
    train_accuracy: float;
    val_loss: float;
    val_accuracy: float;

@dataclass( frozen=True )
class TrainReport:
    """Per-epoch history and the accuracies of the returned model."""
    history: Tuple[EpochRecord, ...];
    stopped_epoch: int;
    best_epoch: int;
    train_accuracy: float;
    val_accuracy: float;
    seed: int;
    test_accuracy: Optional[float] = None;

    def to_dict( self ) -> Dict:
        return {
            'history': [ vars( record ) for record in self.history ],
            'stopped_epoch': self.stopped_epoch,
            'best_epoch': self.best_epoch,
            'train_accuracy': self.train_accuracy,
            'val_accuracy': self.val_accuracy,
            'test_accuracy': self.test_accuracy,
            'seed': self.seed
        };

class WindowDataset( Dataset if TORCH_AVAILABLE else object ):
    """PyTorch Dataset over feature windows and their target distributions."""

    def __init__( self, data: LabeledWindows, num_classes: int ):
        self.windows = torch.tensor( data.windows );
        self.targets = torch.tensor( data.soft_targets( num_classes ) );

    def __len__( self ) -> int:
        return len( self.targets );

    def __getitem__( self, idx: int ):
        return self.windows[ idx ], self.targets[ idx ];

class ModelTrainer:
    """Trains the recurrent classifier: AdamW, step-decay schedule, early stopping on validation loss."""

    EVAL_CHUNK = 2048;

    def __init__( self, network: "GatedRecurrentClassifier", config: Config ):
        if not TORCH_AVAILABLE:
            raise ImportError( "PyTorch is required but not installed" );
        self.network = network;
        self.config = config;
        self.num_classes = int( network.readout_bias.shape[0] );
        self.logger = logging.getLogger( self.__class__.__name__ );
        # Weight decay is decoupled from the adaptive step; beta1 plays the momentum role
        self.optimizer = optim.AdamW(
            self.network.parameters(),
            lr=config.learning_rate,
            betas=( config.momentum_beta1, config.adam_beta2 ),
            eps=config.adam_eps,
            weight_decay=config.weight_decay
        );
        self.generator = torch.Generator().manual_seed( int( config.seed ) );
        self.history: List[EpochRecord] = [];
        self.best_val_loss = float( 'inf' );
        self.best_state = None;
        self.best_epoch = 0;

    def set_learning_rate( self, epoch: int ) -> float:
        rate = learning_rate_at( epoch, self.config );
        for group in self.optimizer.param_groups:
            group[ 'lr' ] = rate;
        return rate;

    def train_epoch( self, loader: "DataLoader" ) -> float:
        """Train for one epoch; returns the mean batch loss."""
        self.network.train();
        total_loss = 0.0;
        num_batches = 0;

        for windows, targets in loader:
            self.optimizer.zero_grad();
            loss = F.cross_entropy( self.network( windows ), targets );
            if not torch.isfinite( loss ):
                raise DivergenceError( f"training loss became {loss.item()}" );
            loss.backward();
            self.optimizer.step();
            total_loss += loss.item();
            num_batches += 1;

        return total_loss / max( num_batches, 1 );

    def evaluate( self, data: LabeledWindows ) -> Tuple[float, float]:
        """Cross-entropy against the target distributions, and accuracy over the pure windows."""
        if len( data ) == 0:
            return float( 'nan' ), float( 'nan' );
        self.network.eval();
        with torch.no_grad():
            logits = torch.cat( [
                self.network( torch.tensor( data.windows[ offset:offset + self.EVAL_CHUNK ] ) )
                for offset in range( 0, len( data ), self.EVAL_CHUNK )
            ] );
            loss = F.cross_entropy( logits, torch.tensor( data.soft_targets( self.num_classes ) ) ).item();
            pure = torch.tensor( data.pure );
            correct = ( logits.argmax( dim=1 ) == torch.tensor( data.labels ) )[ pure ];
            accuracy = correct.double().mean().item() if correct.numel() else float( 'nan' );
        return loss, accuracy;

    def train( self, train_set: LabeledWindows, val_set: LabeledWindows ) -> TrainReport:
        """
        Train until max_epochs or until validation loss fails to improve by more than
        early_stop_min_delta for
        early_stop_patience epochs, then restore the best-validation parameters.
        """
        cfg = self.config;
        monitor = val_set;
        if len( val_set ) == 0:
            self.logger.warning( "Empty validation set - early stopping monitors training loss" );
            monitor = train_set;

        loader = DataLoader(
            WindowDataset( train_set, self.num_classes ), batch_size=cfg.batch_size, shuffle=True, generator=self.generator
        );
        self.logger.info( f"Starting training for up to {cfg.max_epochs} epochs on {len( train_set )} windows" );

        patience_counter = 0;
        stopped_epoch = 0;
        for epoch in range( cfg.max_epochs ):
            rate = self.set_learning_rate( epoch );
            train_loss = self.train_epoch( loader );
            _, train_accuracy = self.evaluate( train_set );
            val_loss, val_accuracy = self.evaluate( monitor );
            if not math.isfinite( val_loss ):
                raise DivergenceError( f"validation loss became {val_loss} at epoch {epoch + 1}" );

            self.history.append( EpochRecord( epoch + 1, rate, train_loss, train_accuracy, val_loss, val_accuracy ) );
            stopped_epoch = epoch + 1;

            if val_loss < self.best_val_loss - cfg.early_stop_min_delta:
                self.best_val_loss = val_loss;
                self.best_state = { k: v.detach().clone() for k, v in self.network.state_dict().items() };
                self.best_epoch = epoch + 1;
                patience_counter = 0;
                self.logger.info( f"Epoch {epoch+1}/{cfg.max_epochs}: lr {rate:.2e}, Train Loss: {train_loss:.4f}, "
                                  f"Train Acc: {train_accuracy:.4f}, Val Loss: {val_loss:.4f}, Val Acc: {val_accuracy:.4f} (Best)" );
            else:
                patience_counter += 1;
                self.logger.info( f"Epoch {epoch+1}/{cfg.max_epochs}: lr {rate:.2e}, Train Loss: {train_loss:.4f}, "
                                  f"Train Acc: {train_accuracy:.4f}, Val Loss: {val_loss:.4f}, Val Acc: {val_accuracy:.4f}" );

            if patience_counter >= cfg.early_stop_patience:
                self.logger.info( f"Early stopping after {epoch+1} epochs (best epoch {self.best_epoch})" );
                break;

        if self.best_state is not None:
            self.network.load_state_dict( self.best_state );

        _, final_train = self.evaluate( train_set );
        _, final_val = self.evaluate( val_set );
        return TrainReport(
            history=tuple( self.history ),
            stopped_epoch=stopped_epoch,
            best_epoch=self.best_epoch,
            train_accuracy=final_train,
            val_accuracy=final_val,
            seed=cfg.seed
        );

def _check_classes( train_set: LabeledWindows, num_classes: int ):
    present = set( np.unique( train_set.labels ).tolist() );
    missing = [ k for k in range( num_classes ) if k not in present ];
    if missing:
        raise EmptyClassError( f"classes {missing} have no training windows" );
    if train_set.labels.min() < 0 or train_set.labels.max() >= num_classes:
        raise EmptyClassError( f"labels must lie in [0, {num_classes})" );

def _fit_centroids( train_set: LabeledWindows, num_classes: int ) -> np.ndarray:
    pooled = train_set.windows.mean( axis=1 );
    centroids = np.zeros( ( num_classes, pooled.shape[1] ) );
    for label in range( num_classes ):
        rows = pooled[ train_set.labels == label ];
        # Canonical row order makes the mean independent of sample order
        rows = rows[ np.lexsort( rows.T[ ::-1 ] ) ];
        centroids[ label ] = rows.mean( axis=0 );
    return centroids;

def _fit_temperature( centroids: np.ndarray, data: LabeledWindows, num_classes: int ) -> float:
    """
    Line search over a log grid for the temperature with the lowest cross-entropy against
    the target distributions, preferring the smaller temperature on ties.

    Windows in the search set that straddle two signs are scored against their mixed targets.
    """
    diffs = centroids[ :, np.newaxis, : ] - centroids[ np.newaxis, :, : ];
    pairwise = np.linalg.norm( diffs, axis=2 )[ np.triu_indices( len( centroids ), k=1 ) ];
    scale = float( np.median( pairwise ) ) if pairwise.size and np.median( pairwise ) > 0 else 1.0;
    targets = data.soft_targets( num_classes );

    best = None;
    for temperature in scale * np.logspace( -3, 1, 41 ):
        probs = _centroid_proba( CentroidParams( centroids=centroids, temperature=float( temperature ) ), data.windows );
        per_window = -np.sum( targets * np.log( np.clip( probs, 1e-300, 1.0 ) ), axis=1 );
        # Sorted so the mean does not depend on window order
        loss = float( np.mean( np.sort( per_window ) ) );
        key = ( loss, float( temperature ) );
        if best is None or key < best[ 0 ]:
            best = ( key, float( temperature ) );
    return best[ 1 ];

def train( train_set: LabeledWindows, val_set: LabeledWindows, cfg: Config,
           kind: ModelKind = ModelKind.RECURRENT, num_classes: Optional[int] = None ) -> Tuple[PredictorModel, TrainReport]:
    """
    Train a window classifier.

    Args:
        train_set: Resampled training clips as feature windows with labels, optionally
            followed by boundary windows with soft targets
        val_set: Validation windows (early stopping / temperature search)
        cfg: Hyper-parameters
        kind: Recurrent network or centroid baseline
        num_classes: Class count K (defaults to max label + 1)

    Raises:
        EmptyClassError: a class in [0, K) has no training window
        DivergenceError: the loss became non-finite
    """
    if len( train_set ) == 0:
        raise EmptyClassError( "training set is empty" );
    K = int( num_classes if num_classes is not None else train_set.labels.max() + 1 );
    _check_classes( train_set.pure_subset(), K );

    if kind is ModelKind.CENTROID:
        centroids = _fit_centroids( train_set.pure_subset(), K );
        search_set = val_set if len( val_set ) else train_set;
        temperature = _fit_temperature( centroids, search_set, K );
        model = PredictorModel( kind=CentroidParams( centroids=centroids, temperature=temperature ), num_classes=K, config=cfg );
        train_accuracy = _accuracy( model, train_set );
        val_accuracy = _accuracy( model, val_set ) if len( val_set ) else float( 'nan' );
        logger.info( f"Centroid model fit: temperature {temperature:.6g}, train accuracy {train_accuracy:.4f}" );
        report = TrainReport( history=(), stopped_epoch=0, best_epoch=0, train_accuracy=train_accuracy,
                              val_accuracy=val_accuracy, seed=cfg.seed );
        return model, report;

    if not TORCH_AVAILABLE or not SKLEARN_AVAILABLE:
        raise ImportError( "PyTorch and scikit-learn are required for the recurrent predictor" );

    D = train_set.windows.shape[2];
    scaler = StandardScaler().fit( train_set.windows.reshape( -1, D ) );
    params = RecurrentParams.initialize( D, cfg.hidden_dim, K, cfg.seed );
    tensors = dict( params.tensors );
    tensors[ 'feature_mean' ] = np.asarray( scaler.mean_, dtype=np.float64 );
    tensors[ 'feature_scale' ] = np.asarray( scaler.scale_, dtype=np.float64 );

    torch.manual_seed( int( cfg.seed ) );
    network = GatedRecurrentClassifier( RecurrentParams( tensors=tensors ) );
    trainer = ModelTrainer( network, cfg );
    report = trainer.train( train_set, val_set );
    model = PredictorModel( kind=network.to_params(), num_classes=K, config=cfg );
    return model, report;

def _accuracy( model: PredictorModel, data: LabeledWindows ) -> float:
    pure = data.pure_subset();
    if len( pure ) == 0:
        return float( 'nan' );
    return float( np.mean( model.predict_proba( pure.windows ).argmax( axis=1 ) == pure.labels ) );

def loss_gradients( model: PredictorModel, window: np.ndarray, label: int ) -> Dict[str, np.ndarray]:
    """Autograd gradients of the cross-entropy loss of one window for every trainable parameter."""
    if not isinstance( model.kind, RecurrentParams ):
        raise ConfigError( "gradients are only defined for the recurrent predictor" );
    network = GatedRecurrentClassifier( model.kind );
    x = torch.tensor( np.asarray( window, dtype=np.float64 )[ np.newaxis ] );
    loss = F.cross_entropy( network( x ), torch.tensor( [ int( label ) ] ) );
    loss.backward();
    return { name: getattr( network, name ).grad.numpy().copy() for name in recurrent_parameter_names() };

def _loss_value( params: RecurrentParams, window: np.ndarray, label: int ) -> float:
    network = GatedRecurrentClassifier( params );
    with torch.no_grad():
        logits = network( torch.tensor( window[ np.newaxis ] ) );
        return F.cross_entropy( logits, torch.tensor( [ int( label ) ] ) ).item();

def gradient_errors( model: PredictorModel, window: np.ndarray, label: int, step: float = 1e-5 ) -> Dict[str, float]:
    """
    Max relative error per parameter between autograd and central finite differences.

    Relative error is |a - n| / max(|a| + |n|, 1e-5).
    """
    window = np.asarray( window, dtype=np.float64 );
    analytic = loss_gradients( model, window, label );
    errors = {};
    for name in recurrent_parameter_names():
        base = model.kind.tensors[ name ];
        worst = 0.0;
        for index in np.ndindex( base.shape ):
            tensors = dict( model.kind.tensors );
            plus = base.copy();
            plus[ index ] += step;
            tensors[ name ] = plus;
            loss_plus = _loss_value( RecurrentParams( tensors=tensors ), window, label );
            minus = base.copy();
            minus[ index ] -= step;
            tensors[ name ] = minus;
            loss_minus = _loss_value( RecurrentParams( tensors=tensors ), window, label );
            numeric = ( loss_plus - loss_minus ) / ( 2.0 * step );
            a = float( analytic[ name ][ index ] );
            worst = max( worst, abs( a - numeric ) / max( abs( a ) + abs( numeric ), 1e-5 ) );
        errors[ name ] = worst;
    return errors;

def gradient_check( model: PredictorModel, window: np.ndarray, label: int, step: float = 1e-5 ) -> float:
    """Max relative error over all trainable parameters (small models only)."""
    if isinstance( model.kind, RecurrentParams ) and model.kind.hidden_dim > 8:
        logger.warning( f"gradient_check on hidden_dim {model.kind.hidden_dim}: expect a slow run" );
    return max( gradient_errors( model, window, label, step ).values() );

def get_model_info( model: PredictorModel ) -> Dict[str, object]:
    """Summary of a predictor for `inspect`."""
    info = {
        'kind': model.model_kind.name.lower(),
        'num_classes': model.num_classes,
        'input_dim': model.input_dim,
        'format_version': model.format_version,
        'window_size': model.config.window_size,
        'threshold': model.config.threshold
    };
    if isinstance( model.kind, CentroidParams ):
        info[ 'temperature' ] = model.kind.temperature;
    else:
        info[ 'architecture' ] = 'single-layer gated recurrent cell (many-to-one) + linear readout + softmax';
        info[ 'hidden_dim' ] = model.kind.hidden_dim;
        info[ 'total_parameters' ] = int( sum( model.kind.tensors[ n ].size for n in recurrent_parameter_names() ) );
    return info;
