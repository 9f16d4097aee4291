"""
Dataset pipeline: frame extraction, accuracy filtering, sequences, splits and the binary container.
"""
from .dataset_io import HEADER_DTYPE, read_dataset, read_header, record_dtype, write_dataset
from .pipeline import build_sequences, export_metadata_csv, extract_frames, filter_accuracy, resample_sequences
from .records import DATASET_MAGIC, DATASET_VERSION, DatasetHeader, FrameRecord, SampleSequence
from .splitting import grid_cell, stratified_split
from .tensors import SequenceTensorDataset

__all__ = [
    'DATASET_MAGIC', 'DATASET_VERSION', 'DatasetHeader', 'FrameRecord', 'HEADER_DTYPE',
    'SampleSequence', 'SequenceTensorDataset', 'build_sequences', 'export_metadata_csv',
    'extract_frames', 'filter_accuracy', 'grid_cell', 'read_dataset', 'read_header',
    'record_dtype', 'resample_sequences', 'stratified_split', 'write_dataset',
]
