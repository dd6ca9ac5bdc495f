#!/usr/bin/env python3
"""
Synthetic Sign Generator
Seeded keypoint datasets with class-specific hand shapes for end-to-end pipeline runs

Each class owns one prototype per hand: an orthonormal 21x3 shape basis U, sorted
extents s, an orientation R and a slow drift. At normalized time tau in [0, 1]

    X(tau) = U diag( s * (1 + d1 tau + d2 tau^2) ) R + 1 (v1 tau + v2 tau^2)^T

so the centered pose singular values are s * (1 + d1 tau + d2 tau^2) and classes are
told apart by their extents, not by raw coordinates.

Like a signer lowering the hands between signs, every clip eases in from and out to a
class-independent rest pose over its first and last rest_fraction of normalized time
(smoothstep weights), so concatenated clips meet without a pose jump.
"""

import logging;
from dataclasses import dataclass;
from typing import List, Optional, Sequence, Tuple;
import numpy as np;

from ml.sign_data import SignClip, ContinuousStream, KEYPOINTS_PER_HAND, COORDINATES;
from ml.features import clip_features;
from services.preprocess import concat_clips;
from utils.error_utils import ConfigError, SeparationFailureError, InsufficientHeldOutError;

logger = logging.getLogger( __name__ );

EXTENT_RANGE = ( 0.2, 1.5 );
SPEED_RANGE = ( 0.02, 0.2 );
HAND_OFFSET = np.array( [ 0.6, 0.0, 0.0 ] );
SEPARATION_FACTOR = 5.0;

@dataclass( frozen=True )
class SynthSpec:
    """Shape of a synthetic dataset; identical specs generate bit-identical clips."""
    num_classes: int = 20;
    samples_per_class: int = 30;
    length_range: Tuple[int, int] = ( 30, 80 );
    noise_sigma: float = 0.01;
    rotation_jitter_deg: float = 5.0;
    hands: int = 2;
    seed: int = 7;
    translation_sigma: float = 0.05;
    deformation: float = 0.05;
    max_retries: int = 50;
    window_size: int = 50;
    rest_fraction: float = 0.15;

    def __post_init__( self ):
        low, high = self.length_range;
        if self.num_classes < 2:
            raise ConfigError( f"num_classes must be >= 2, got {self.num_classes}" );
        if self.samples_per_class < 1:
            raise ConfigError( "samples_per_class must be positive" );
        if low < 2 or high < low:
            raise ConfigError( f"length_range must satisfy 2 <= min <= max, got {self.length_range}" );
        if self.noise_sigma < 0 or self.rotation_jitter_deg < 0 or self.translation_sigma < 0:
            raise ConfigError( "noise, rotation jitter and translation must be non-negative" );
        if self.hands not in ( 1, 2 ):
            raise ConfigError( f"hands must be 1 or 2, got {self.hands}" );
        if not ( 0.0 <= self.deformation < 0.5 ):
            raise ConfigError( "deformation must lie in [0, 0.5)" );
        if not ( 0.0 <= self.rest_fraction < 0.5 ):
            raise ConfigError( f"rest_fraction must lie in [0, 0.5), got {self.rest_fraction}" );

@dataclass( frozen=True, eq=False )
class HandPrototype:
    basis: np.ndarray;
    extents: np.ndarray;
    rotation: np.ndarray;
    growth: np.ndarray;
    drift: np.ndarray;
    offset: np.ndarray;

    def at( self, tau: np.ndarray ) -> np.ndarray:
        """Keypoints (len(tau), 21, 3) at normalized times tau."""
        tau = np.asarray( tau, dtype=np.float64 )[ :, np.newaxis ];
        scale = self.extents * ( 1.0 + self.growth[ 0 ] * tau + self.growth[ 1 ] * tau ** 2 );
        shape = np.einsum( 'kc,tc,cd->tkd', self.basis, scale, self.rotation );
        shift = self.drift[ 0 ] * tau + self.drift[ 1 ] * tau ** 2 + self.offset;
        return shape + shift[ :, np.newaxis, : ];

def random_rotation( rng: np.random.Generator ) -> np.ndarray:
    """Uniformly random proper rotation (QR of a Gaussian matrix, sign-fixed)."""
    q, r = np.linalg.qr( rng.standard_normal( ( COORDINATES, COORDINATES ) ) );
    q = q * np.sign( np.diag( r ) );
    if np.linalg.det( q ) < 0:
        q[ :, 0 ] = -q[ :, 0 ];
    return q;

def axis_angle_rotation( axis: np.ndarray, angle: float ) -> np.ndarray:
    """Rodrigues rotation matrix about a unit axis."""
    axis = axis / np.linalg.norm( axis );
    k = np.array( [ [ 0.0, -axis[ 2 ], axis[ 1 ] ], [ axis[ 2 ], 0.0, -axis[ 0 ] ], [ -axis[ 1 ], axis[ 0 ], 0.0 ] ] );
    return np.eye( 3 ) + np.sin( angle ) * k + ( 1.0 - np.cos( angle ) ) * ( k @ k );

def _hand_prototype( rng: np.random.Generator, spec: SynthSpec, hand: int ) -> HandPrototype:
    raw = rng.standard_normal( ( KEYPOINTS_PER_HAND, COORDINATES ) );
    # Zero-mean columns keep the basis orthonormal after centering
    basis, _ = np.linalg.qr( raw - raw.mean( axis=0 ) );
    extents = np.sort( rng.uniform( *EXTENT_RANGE, size=COORDINATES ) )[ ::-1 ];
    growth = rng.uniform( -spec.deformation, spec.deformation, size=( 2, COORDINATES ) );
    direction = rng.standard_normal( ( 2, COORDINATES ) );
    direction /= np.linalg.norm( direction, axis=1, keepdims=True );
    drift = direction * rng.uniform( *SPEED_RANGE, size=( 2, 1 ) );
    return HandPrototype(
        basis=basis, extents=extents, rotation=random_rotation( rng ), growth=growth,
        drift=drift, offset=HAND_OFFSET * hand
    );

def rest_poses( spec: SynthSpec ) -> np.ndarray:
    """Shared rest pose per hand, (hands, 21, 3); depends on the seed only."""
    poses = [];
    for hand in range( spec.hands ):
        rng = np.random.default_rng( [ spec.seed, 2, hand ] );
        raw = rng.standard_normal( ( KEYPOINTS_PER_HAND, COORDINATES ) );
        basis, _ = np.linalg.qr( raw - raw.mean( axis=0 ) );
        extents = np.full( COORDINATES, EXTENT_RANGE[ 0 ] );
        poses.append( basis @ np.diag( extents ) @ random_rotation( rng ) + HAND_OFFSET * hand );
    return np.stack( poses );

def rest_weight( tau: np.ndarray, rest_fraction: float ) -> np.ndarray:
    """Weight of the class pose at normalized times tau: 0 at both ends, 1 in the middle."""
    tau = np.asarray( tau, dtype=np.float64 );
    if rest_fraction <= 0.0:
        return np.ones_like( tau );
    x = np.clip( np.minimum( tau, 1.0 - tau ) / rest_fraction, 0.0, 1.0 );
    return x * x * ( 3.0 - 2.0 * x );

def prototype_keypoints( hands: Sequence[HandPrototype], tau: np.ndarray,
                         rest: Optional[np.ndarray] = None, rest_fraction: float = 0.0 ) -> np.ndarray:
    keypoints = np.stack( [ hand.at( tau ) for hand in hands ], axis=1 );
    if rest is None or rest_fraction <= 0.0:
        return keypoints;
    weight = rest_weight( tau, rest_fraction )[ :, np.newaxis, np.newaxis, np.newaxis ];
    return weight * keypoints + ( 1.0 - weight ) * rest[ np.newaxis ];

def _mean_feature( hands: Sequence[HandPrototype], spec: SynthSpec, rest: np.ndarray ) -> np.ndarray:
    reference_len = ( spec.length_range[ 0 ] + spec.length_range[ 1 ] ) // 2;
    tau = np.linspace( 0.0, 1.0, reference_len );
    return clip_features( prototype_keypoints( hands, tau, rest, spec.rest_fraction ) ).mean( axis=0 );

def build_prototypes( spec: SynthSpec ) -> List[List[HandPrototype]]:
    """
    One prototype per class, each regenerated until its mean feature vector lies at
    least max(5 * noise_sigma, 1e-6) from every earlier class.

    Raises:
        SeparationFailureError: a class could not be separated within max_retries attempts
    """
    margin = max( SEPARATION_FACTOR * spec.noise_sigma, 1e-6 );
    rest = rest_poses( spec );
    prototypes, signatures = [], [];
    for class_id in range( spec.num_classes ):
        for attempt in range( spec.max_retries + 1 ):
            rng = np.random.default_rng( [ spec.seed, 0, class_id, attempt ] );
            hands = [ _hand_prototype( rng, spec, hand ) for hand in range( spec.hands ) ];
            signature = _mean_feature( hands, spec, rest );
            if all( np.linalg.norm( signature - other ) >= margin for other in signatures ):
                break;
            logger.debug( f"Class {class_id}: prototype attempt {attempt} too close to an earlier class" );
        else:
            raise SeparationFailureError(
                f"class {class_id} stayed within {margin:.3g} of another class after {spec.max_retries} retries"
            );
        prototypes.append( hands );
        signatures.append( signature );
    return prototypes;

def _sample( hands: Sequence[HandPrototype], rng: np.random.Generator, spec: SynthSpec,
             rest: np.ndarray ) -> np.ndarray:
    low, high = spec.length_range;
    length = int( rng.integers( low, high + 1 ) );
    keypoints = prototype_keypoints( hands, np.arange( length ) / ( length - 1 ), rest, spec.rest_fraction );

    axis = rng.standard_normal( COORDINATES );
    angle = np.deg2rad( rng.uniform( -spec.rotation_jitter_deg, spec.rotation_jitter_deg ) );
    shift = rng.normal( 0.0, spec.translation_sigma, size=COORDINATES );
    noise = rng.normal( 0.0, spec.noise_sigma, size=keypoints.shape );

    if angle != 0.0:
        keypoints = keypoints @ axis_angle_rotation( axis, angle ).T;
    return keypoints + shift + noise;

def generate( spec: SynthSpec ) -> List[SignClip]:
    """
    Generate samples_per_class clips for every class, class by class.

    Raises:
        SeparationFailureError: prototypes could not be separated
    """
    if spec.length_range[ 0 ] < spec.window_size / 2:
        logger.warning(
            f"Minimum clip length {spec.length_range[ 0 ]} is below half the window ({spec.window_size}); "
            f"short signs may never fill a window on their own"
        );
    prototypes = build_prototypes( spec );
    rest = rest_poses( spec );
    clips = [];
    for class_id, hands in enumerate( prototypes ):
        rng = np.random.default_rng( [ spec.seed, 1, class_id ] );
        for sample in range( spec.samples_per_class ):
            clips.append( SignClip(
                keypoints=_sample( hands, rng, spec, rest ),
                label=class_id,
                source_id=f"class{class_id:03d}_sample{sample:03d}"
            ) );
    logger.info( f"Generated {len( clips )} clips over {spec.num_classes} classes (seed {spec.seed})" );
    return clips;

def build_continuous_suite( clips: Sequence[SignClip], streams_n: int, seed: int,
                            num_classes: Optional[int] = None ) -> List[ContinuousStream]:
    """
    Continuous test streams, each holding one held-out clip of every class in a
    seeded shuffled order. Stream s uses clip s mod n_c of class c.

    Args:
        clips: Held-out clips (never seen in training)
        streams_n: Number of streams
        seed: Shuffle seed
        num_classes: Classes every stream must cover (default: max label + 1)

    Raises:
        InsufficientHeldOutError: a class has no held-out clip, or streams_n < 1
    """
    if streams_n < 1:
        raise InsufficientHeldOutError( "streams_n must be at least 1" );
    if not clips:
        raise InsufficientHeldOutError( "no held-out clips" );
    num_classes = num_classes if num_classes is not None else max( clip.label for clip in clips ) + 1;

    by_class = { label: [] for label in range( num_classes ) };
    for clip in clips:
        if clip.label in by_class:
            by_class[ clip.label ].append( clip );
    missing = [ label for label, members in by_class.items() if not members ];
    if missing:
        raise InsufficientHeldOutError( f"classes {missing} have no held-out clip" );

    streams = [];
    for index in range( streams_n ):
        order = np.random.default_rng( [ seed, index ] ).permutation( num_classes );
        chosen = [ by_class[ int( label ) ][ index % len( by_class[ int( label ) ] ) ] for label in order ];
        streams.append( concat_clips( chosen, stream_id=f"stream{index:03d}" ) );
    logger.info( f"Built {streams_n} continuous streams of {num_classes} signs each" );
    return streams;
