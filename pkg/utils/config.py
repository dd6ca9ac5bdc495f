#!/usr/bin/env python3
"""
Segmenter Configuration
Model constants, training schedule and decoder settings with env overrides
"""

import os;
import logging;
from dataclasses import dataclass, asdict, fields, replace as dataclass_replace;
from typing import Any, Dict, Optional, Tuple;

try:
    from dotenv import load_dotenv;
    DOTENV_AVAILABLE = True;
except ImportError:
    print( "python-dotenv is not installed. Please install it using 'pip install python-dotenv'." );
    DOTENV_AVAILABLE = False;

from .error_utils import ConfigError;

logger = logging.getLogger( __name__ );

ENV_PREFIX = "SEGMENTER_";

@dataclass( frozen=True )
class Config:
    """Model, training and decoder settings. Defaults are the reference values."""
    window_size: int = 50;
    stride: int = 1;
    threshold: float = 0.51;
    num_singular_values: int = 12;
    keypoints_per_hand: int = 21;
    learning_rate: float = 0.005;
    lr_decay_every: int = 10;
    lr_decay_factor: float = 10.0;
    batch_size: int = 50;
    max_epochs: int = 200;
    weight_decay: float = 1e-4;
    momentum_beta1: float = 0.92;
    train_fraction: float = 0.8;
    seed: int = 7;
    # Implementation choices
    hidden_dim: int = 64;
    early_stop_patience: int = 10;
    val_fraction_of_train: float = 0.1;
    adam_beta2: float = 0.999;
    adam_eps: float = 1e-8;
    accuracy_seeds: Tuple[int, ...] = ( 7, );
    early_stop_min_delta: float = 1e-4;
    # Boundary-aware training windows cut from concatenated training clips
    stream_passes: int = 2;
    stream_window_stride: int = 8;
    pure_coverage: float = 0.9;
    pure_margin: float = 0.3;

    def __post_init__( self ):
        if self.window_size < 1:
            raise ConfigError( f"window_size must be >= 1, got {self.window_size}" );
        if self.stride < 1:
            raise ConfigError( f"stride must be >= 1, got {self.stride}" );
        # Above 0.5 at most one class of a probability vector can pass
        if not ( 0.5 < self.threshold < 1.0 ):
            raise ConfigError( f"threshold must lie in (0.5, 1), got {self.threshold}" );
        if not ( 0.0 < self.train_fraction < 1.0 ):
            raise ConfigError( f"train_fraction must lie in (0, 1), got {self.train_fraction}" );
        if not ( 0.0 < self.val_fraction_of_train < 1.0 ):
            raise ConfigError( f"val_fraction_of_train must lie in (0, 1), got {self.val_fraction_of_train}" );
        if self.num_singular_values < 1 or self.keypoints_per_hand < 1:
            raise ConfigError( "num_singular_values and keypoints_per_hand must be positive" );
        if self.learning_rate <= 0 or self.lr_decay_factor <= 0 or self.lr_decay_every < 1:
            raise ConfigError( "learning-rate schedule values must be positive" );
        if self.batch_size < 1 or self.max_epochs < 1 or self.hidden_dim < 1:
            raise ConfigError( "batch_size, max_epochs and hidden_dim must be positive" );
        if self.early_stop_patience < 1:
            raise ConfigError( "early_stop_patience must be positive" );
        if self.weight_decay < 0:
            raise ConfigError( "weight_decay must be non-negative" );
        if not self.accuracy_seeds:
            raise ConfigError( "accuracy_seeds must list at least one seed" );
        if self.early_stop_min_delta < 0:
            raise ConfigError( "early_stop_min_delta must be non-negative" );
        if self.stream_passes < 0 or self.stream_window_stride < 1:
            raise ConfigError( "stream_passes must be >= 0 and stream_window_stride >= 1" );
        if not ( 0.0 < self.pure_coverage <= 1.0 ) or not ( 0.0 <= self.pure_margin <= 1.0 ):
            raise ConfigError( "pure_coverage must lie in (0, 1] and pure_margin in [0, 1]" );

    def replace( self, **overrides ) -> "Config":
        """Return a validated copy with the given fields replaced (None values ignored)."""
        changes = { key: value for key, value in overrides.items() if value is not None };
        return dataclass_replace( self, **changes );

    def to_dict( self ) -> Dict[str, Any]:
        data = asdict( self );
        data[ 'accuracy_seeds' ] = list( self.accuracy_seeds );
        return data;

    @classmethod
    def from_dict( cls, data: Dict[str, Any] ) -> "Config":
        known = { f.name for f in fields( cls ) };
        values = { key: value for key, value in data.items() if key in known };
        if 'accuracy_seeds' in values:
            values[ 'accuracy_seeds' ] = tuple( values[ 'accuracy_seeds' ] );
        try:
            return cls( **values );
        except TypeError as e:
            raise ConfigError( f"Invalid configuration snapshot: {e}" );

    @classmethod
    def from_env( cls, env_file: Optional[str] = None ) -> "Config":
        """
        Build a Config from SEGMENTER_* environment variables.

        Args:
            env_file: Optional .env file loaded first (values already set in the
                environment win)
        """
        if DOTENV_AVAILABLE:
            load_dotenv( env_file ) if env_file else load_dotenv();

        values = {};
        for f in fields( cls ):
            raw = os.getenv( ENV_PREFIX + f.name.upper() );
            if raw is None:
                continue;
            try:
                if f.name == 'accuracy_seeds':
                    values[ f.name ] = tuple( int( s ) for s in raw.split( ',' ) if s.strip() );
                elif isinstance( f.default, int ):
                    values[ f.name ] = int( raw );
                else:
                    values[ f.name ] = float( raw );
            except ValueError:
                raise ConfigError( f"Environment variable {ENV_PREFIX + f.name.upper()} has invalid value {raw!r}" );
            logger.debug( f"Config override from environment: {f.name}={values[ f.name ]}" );

        return cls( **values );

def learning_rate_at( epoch: int, config: Config ) -> float:
    """Step-decay schedule: the base rate divided by the decay factor every lr_decay_every epochs."""
    return config.learning_rate / ( config.lr_decay_factor ** ( epoch // config.lr_decay_every ) );
