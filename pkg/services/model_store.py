#!/usr/bin/env python3
"""
Model Store
Binary persistence for trained predictors

File layout (all integers little-endian):
    magic            4 bytes  b"SGSG"
    format_version   uint32
    config_length    uint32, followed by that many bytes of UTF-8 JSON (sorted keys)
    kind             uint8    0 = centroid, 1 = recurrent
    num_classes      uint32
    block_count      uint32
    blocks           name_length uint16, name, ndim uint8, shape uint32 * ndim, float64 data
    checksum         uint32   CRC-32 of every preceding byte
"""

import io;
import json;
import struct;
import zlib;
import logging;
from pathlib import Path;
from typing import Dict, Union;
import numpy as np;

from ml.predictor import (
    PredictorModel, CentroidParams, RecurrentParams, ModelKind, FORMAT_VERSION,
    recurrent_parameter_names, NORMALIZATION_NAMES
);
from utils.config import Config;
from utils.error_utils import ModelIOError, VersionError, CorruptModelError, SegmenterError;

logger = logging.getLogger( __name__ );

MAGIC = b"SGSG";
_CHECKSUM_SIZE = 4;

def _blocks_for( model: PredictorModel ) -> Dict[str, np.ndarray]:
    if isinstance( model.kind, CentroidParams ):
        return { 'centroids': model.kind.centroids, 'temperature': np.array( [ model.kind.temperature ] ) };
    names = list( recurrent_parameter_names() ) + list( NORMALIZATION_NAMES );
    return { name: model.kind.tensors[ name ] for name in names };

def encode_model( model: PredictorModel ) -> bytes:
    """Serialize a predictor to bytes, checksum included."""
    buffer = io.BytesIO();
    buffer.write( MAGIC );
    buffer.write( struct.pack( "<I", int( model.format_version ) ) );
    config_bytes = json.dumps( model.config.to_dict(), sort_keys=True ).encode( 'utf-8' );
    buffer.write( struct.pack( "<I", len( config_bytes ) ) );
    buffer.write( config_bytes );
    buffer.write( struct.pack( "<BI", model.model_kind.value, int( model.num_classes ) ) );

    blocks = _blocks_for( model );
    buffer.write( struct.pack( "<I", len( blocks ) ) );
    for name, values in blocks.items():
        values = np.ascontiguousarray( values, dtype='<f8' );
        encoded_name = name.encode( 'utf-8' );
        buffer.write( struct.pack( "<H", len( encoded_name ) ) );
        buffer.write( encoded_name );
        buffer.write( struct.pack( "<B", values.ndim ) );
        buffer.write( struct.pack( f"<{values.ndim}I", *values.shape ) );
        buffer.write( values.tobytes() );

    payload = buffer.getvalue();
    return payload + struct.pack( "<I", zlib.crc32( payload ) & 0xFFFFFFFF );

class _Reader:
    """Bounds-checked cursor over a model payload."""

    def __init__( self, data: bytes ):
        self.data = data;
        self.offset = 0;

    def take( self, size: int ) -> bytes:
        if size < 0 or self.offset + size > len( self.data ):
            raise CorruptModelError( f"model file truncated at byte {self.offset}" );
        chunk = self.data[ self.offset:self.offset + size ];
        self.offset += size;
        return chunk;

    def unpack( self, fmt: str ):
        return struct.unpack( fmt, self.take( struct.calcsize( fmt ) ) );

def decode_model( data: bytes ) -> PredictorModel:
    """
    Parse bytes produced by encode_model.

    Raises:
        CorruptModelError: bad magic, checksum mismatch, truncation or malformed blocks
        VersionError: unsupported format_version
    """
    if len( data ) < len( MAGIC ) + 4 + _CHECKSUM_SIZE or data[ :len( MAGIC ) ] != MAGIC:
        raise CorruptModelError( "not a sign segmenter model file (bad magic)" );
    version = struct.unpack( "<I", data[ 4:8 ] )[ 0 ];
    if version != FORMAT_VERSION:
        raise VersionError( f"model format_version {version} is not supported (expected {FORMAT_VERSION})" );

    payload, stored = data[ :-_CHECKSUM_SIZE ], struct.unpack( "<I", data[ -_CHECKSUM_SIZE: ] )[ 0 ];
    if zlib.crc32( payload ) & 0xFFFFFFFF != stored:
        raise CorruptModelError( "model file checksum mismatch" );

    reader = _Reader( payload );
    reader.take( 8 );
    ( config_length, ) = reader.unpack( "<I" );
    try:
        config = Config.from_dict( json.loads( reader.take( config_length ).decode( 'utf-8' ) ) );
    except ( ValueError, SegmenterError ) as e:
        raise CorruptModelError( f"model config snapshot is unreadable: {e}" );
    kind_tag, num_classes = reader.unpack( "<BI" );
    ( block_count, ) = reader.unpack( "<I" );

    blocks = {};
    for _ in range( block_count ):
        ( name_length, ) = reader.unpack( "<H" );
        name = reader.take( name_length ).decode( 'utf-8', errors='replace' );
        ( ndim, ) = reader.unpack( "<B" );
        shape = reader.unpack( f"<{ndim}I" ) if ndim else ();
        count = int( np.prod( shape ) ) if ndim else 1;
        blocks[ name ] = np.frombuffer( reader.take( 8 * count ), dtype='<f8' ).astype( np.float64 ).reshape( shape );
    if reader.offset != len( payload ):
        raise CorruptModelError( "trailing bytes after the last parameter block" );

    try:
        kind = ModelKind( kind_tag );
    except ValueError:
        raise CorruptModelError( f"unknown model kind tag {kind_tag}" );

    try:
        if kind is ModelKind.CENTROID:
            params = CentroidParams( centroids=blocks[ 'centroids' ], temperature=float( blocks[ 'temperature' ][ 0 ] ) );
        else:
            params = RecurrentParams( tensors={ name: blocks[ name ]
                                                for name in list( recurrent_parameter_names() ) + list( NORMALIZATION_NAMES ) } );
        return PredictorModel( kind=params, num_classes=int( num_classes ), config=config, format_version=version );
    except KeyError as e:
        raise CorruptModelError( f"model file is missing parameter block {e}" );
    except SegmenterError as e:
        raise CorruptModelError( f"model parameters are inconsistent: {e}" );

def save_model( model: PredictorModel, path: Union[str, Path] ) -> None:
    """
    Write a predictor to disk.

    Raises:
        ModelIOError: the file cannot be written
    """
    path = Path( path );
    try:
        path.write_bytes( encode_model( model ) );
    except OSError as e:
        raise ModelIOError( f"cannot write model to {path}: {e}" );
    logger.info( f"Saved {model.model_kind.name.lower()} model ({model.num_classes} classes) to {path}" );

def load_model( path: Union[str, Path] ) -> PredictorModel:
    """
    Read a predictor written by save_model.

    Raises:
        ModelIOError: the file cannot be read
        VersionError: unsupported format_version
        CorruptModelError: checksum mismatch or malformed content
    """
    path = Path( path );
    try:
        data = path.read_bytes();
    except OSError as e:
        raise ModelIOError( f"cannot read model from {path}: {e}" );
    model = decode_model( data );
    logger.debug( f"Loaded {model.model_kind.name.lower()} model from {path}" );
    return model;
