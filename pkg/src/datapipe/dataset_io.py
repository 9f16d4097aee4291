"""
Binary dataset container.

Layout (little-endian, no padding): a fixed header, then sequence-major frame records
    [t_s f64][lat f64][lon f64][accuracy f32][fpp H*W*3 u8][gmp H*W*3 u8]
so the record count is always a whole number of sequences.
"""
import dataclasses
import logging
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from ..errors import (
    BadMagicError,
    DatasetFormatError,
    RecordCountMismatchError,
    TruncatedDatasetError,
    UnsupportedVersionError,
)
from ..geo import GeoBounds, GeoCoordinate
from .records import DATASET_MAGIC, DATASET_VERSION, DatasetHeader, FrameRecord, SampleSequence

logger = logging.getLogger(__name__)

HEADER_DTYPE = np.dtype([
    ('magic', 'S8'),
    ('version', '<u4'),
    ('bounds', '<f8', (4,)),
    ('fpp_w', '<u4'),
    ('fpp_h', '<u4'),
    ('gmp_w', '<u4'),
    ('gmp_h', '<u4'),
    ('record_count', '<u8'),
    ('frame_interval_s', '<f4'),
    ('seq_len', '<u4'),
])


def record_dtype(fpp_size: Tuple[int, int], gmp_size: Tuple[int, int]) -> np.dtype:
    fpp_w, fpp_h = fpp_size
    gmp_w, gmp_h = gmp_size
    return np.dtype([
        ('t_s', '<f8'),
        ('lat', '<f8'),
        ('lon', '<f8'),
        ('accuracy', '<f4'),
        ('fpp', 'u1', (int(fpp_h), int(fpp_w), 3)),
        ('gmp', 'u1', (int(gmp_h), int(gmp_w), 3)),
    ])


def _encode_header(header: DatasetHeader) -> bytes:
    raw = np.zeros(1, dtype=HEADER_DTYPE)
    raw['magic'] = header.magic
    raw['version'] = header.version
    raw['bounds'] = header.bounds.to_list()
    raw['fpp_w'], raw['fpp_h'] = header.fpp_size
    raw['gmp_w'], raw['gmp_h'] = header.gmp_size
    raw['record_count'] = header.record_count
    raw['frame_interval_s'] = header.frame_interval_s
    raw['seq_len'] = header.seq_len
    return raw.tobytes()


def _decode_header(data: bytes) -> DatasetHeader:
    if len(data) < HEADER_DTYPE.itemsize:
        raise TruncatedDatasetError(HEADER_DTYPE.itemsize, len(data), what='header')
    raw = np.frombuffer(data, dtype=HEADER_DTYPE, count=1)[0]
    magic = bytes(raw['magic']).ljust(8, b'\x00')
    if magic != DATASET_MAGIC:
        raise BadMagicError(magic, DATASET_MAGIC)
    if int(raw['version']) != DATASET_VERSION:
        raise UnsupportedVersionError(int(raw['version']), DATASET_VERSION)
    lat_min, lat_max, lon_min, lon_max = (float(v) for v in raw['bounds'])
    return DatasetHeader(
        bounds=GeoBounds(lat_min, lat_max, lon_min, lon_max),
        fpp_size=(int(raw['fpp_w']), int(raw['fpp_h'])),
        gmp_size=(int(raw['gmp_w']), int(raw['gmp_h'])),
        frame_interval_s=float(raw['frame_interval_s']),
        seq_len=int(raw['seq_len']),
        record_count=int(raw['record_count']),
        version=int(raw['version']),
        magic=magic,
    )


def write_dataset(path: Path, header: DatasetHeader, sequences: Sequence[SampleSequence]) -> DatasetHeader:
    """Serialize sequences; the header's record_count is set from the sequences.

    Returns:
        The header actually written
    """
    fpp_w, fpp_h = header.fpp_size
    gmp_w, gmp_h = header.gmp_size
    for i, seq in enumerate(sequences):
        if len(seq) != header.seq_len:
            raise ValueError(f"Sequence {i} has {len(seq)} frames, header expects {header.seq_len}")
        if seq.fpp_stack().shape[1:] != (fpp_h, fpp_w, 3) or seq.gmp_targets.shape[1:] != (gmp_h, gmp_w, 3):
            raise ValueError(f"Sequence {i} image shapes do not match the header")

    header = dataclasses.replace(header, record_count=len(sequences) * header.seq_len)
    body = np.zeros(header.record_count, dtype=record_dtype(header.fpp_size, header.gmp_size))
    if sequences:
        frames = [frame for seq in sequences for frame in seq.frames]
        body['t_s'] = [f.t_s for f in frames]
        body['lat'] = [f.coord.lat_deg for f in frames]
        body['lon'] = [f.coord.lon_deg for f in frames]
        body['accuracy'] = [f.rtk_accuracy_m for f in frames]
        body['fpp'] = np.stack([f.fpp for f in frames])
        body['gmp'] = np.concatenate([seq.gmp_targets for seq in sequences])

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(_encode_header(header))
        f.write(body.tobytes())
    logger.info(f"Wrote {len(sequences)} sequences ({header.record_count} records) to {path}")
    return header


def read_header(path: Path) -> DatasetHeader:
    with open(path, 'rb') as f:
        return _decode_header(f.read(HEADER_DTYPE.itemsize))


def read_dataset(path: Path) -> Tuple[DatasetHeader, List[SampleSequence]]:
    """Decode a dataset file written by write_dataset."""
    data = Path(path).read_bytes()
    header = _decode_header(data)
    dtype = record_dtype(header.fpp_size, header.gmp_size)
    body_bytes = len(data) - HEADER_DTYPE.itemsize

    expected = HEADER_DTYPE.itemsize + header.record_count * dtype.itemsize
    if len(data) < expected or body_bytes % dtype.itemsize:
        raise TruncatedDatasetError(expected, len(data))
    body_count = body_bytes // dtype.itemsize
    if body_count != header.record_count:
        raise RecordCountMismatchError(header.record_count, body_count)
    if header.record_count % header.seq_len:
        raise DatasetFormatError(
            f"Record count {header.record_count} is not a multiple of seq_len {header.seq_len}"
        )

    body = np.frombuffer(data, dtype=dtype, count=body_count, offset=HEADER_DTYPE.itemsize)
    sequences = []
    for start in range(0, body_count, header.seq_len):
        chunk = body[start:start + header.seq_len]
        frames = [
            FrameRecord(float(r['t_s']), np.array(r['fpp']), GeoCoordinate(float(r['lat']), float(r['lon'])),
                        float(r['accuracy']))
            for r in chunk
        ]
        sequences.append(SampleSequence.from_frames(frames, np.array(chunk['gmp']), header.bounds))
    logger.info(f"Read {len(sequences)} sequences from {path}")
    return header, sequences
