'''
Dataset files: `<stem>.json` header plus `<stem>.bin` payload.

The payload is a packed little-endian array of fixed-size records (see
`record_dtype`): the snapshot as interleaved float32 real/imag pairs, the
noise variance, the noise seed and the truth padded to p_max paths.
Labels are not stored; they are recomputed from the float64 truth on load.
'''
import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from channel.errors import DatasetFormatError
from channel.generator import DatasetSpec, GeneratedSample, SnapshotGenerator
from channel.state import ChannelSnapshot, PathSet
from network.labels import LabelTensor, encode_labels

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
LABEL_LAYOUT = "eta[i, j, 3 * c + k], k = (mu, dtau, dalpha); cell-major then slot-major"

# Default split sizes, each drawn with seed + offset.
DEFAULT_SPLITS = {
    'train': 400_000,
    'validation': 1_000,
    'test': 4_000,
}

PathLike = Union[str, Path]


@dataclass(frozen=True, eq=False)
class DatasetRecord:
    snapshot: ChannelSnapshot
    labels: LabelTensor
    noise_seed: int

    @property
    def truth(self) -> PathSet:
        return self.snapshot.truth


def record_dtype(n_freq: int, n_time: int, p_max: int) -> np.dtype:
    return np.dtype([
        ('data', '<f4', (n_freq, n_time, 2)),
        ('sigma2', '<f8'),
        ('noise_seed', '<u8'),
        ('n_paths', '<u4'),
        ('gamma', '<f8', (p_max, 2)),
        ('tau', '<f8', (p_max,)),
        ('alpha', '<f8', (p_max,)),
    ])


def _layout(dtype: np.dtype) -> list:
    return [[name, dtype[name].base.str, list(dtype[name].shape)] for name in dtype.names]


def _paths(stem: PathLike) -> Tuple[Path, Path]:
    stem = Path(stem)
    return stem.with_suffix('.json'), stem.with_suffix('.bin')


def build_header(spec: DatasetSpec, count: int, rejections: int = 0) -> dict:
    dtype = record_dtype(spec.grid.n_freq, spec.grid.n_time, spec.p_max)
    return {
        'format_version': FORMAT_VERSION,
        'n_freq': spec.grid.n_freq,
        'n_time': spec.grid.n_time,
        'p_max': spec.p_max,
        'count': count,
        'byteorder': 'little',
        'record_bytes': dtype.itemsize,
        'record_layout': _layout(dtype),
        'label_layout': LABEL_LAYOUT,
        'rejections': rejections,
        'spec': spec.to_dict(),
    }


def make_record(sample: GeneratedSample, spec: DatasetSpec) -> DatasetRecord:
    labels = encode_labels(sample.snapshot.truth, spec.cell_grid, spec.p_max)
    return DatasetRecord(snapshot=sample.snapshot, labels=labels, noise_seed=sample.noise_seed)


def _pack(records: Sequence[DatasetRecord], spec: DatasetSpec) -> np.ndarray:
    dtype = record_dtype(spec.grid.n_freq, spec.grid.n_time, spec.p_max)
    packed = np.zeros(len(records), dtype=dtype)
    for k, record in enumerate(records):
        data = np.asarray(record.snapshot.data, dtype=np.complex64)
        truth = record.truth
        P = truth.count
        packed['data'][k, ..., 0] = data.real
        packed['data'][k, ..., 1] = data.imag
        packed['sigma2'][k] = record.snapshot.sigma2
        packed['noise_seed'][k] = record.noise_seed
        packed['n_paths'][k] = P
        packed['gamma'][k, :P, 0] = truth.gammas.real
        packed['gamma'][k, :P, 1] = truth.gammas.imag
        packed['tau'][k, :P] = truth.taus
        packed['alpha'][k, :P] = truth.alphas
    return packed


def _unpack(row: np.void, spec: DatasetSpec) -> DatasetRecord:
    P = int(row['n_paths'])
    data = np.empty(spec.grid.shape, dtype=np.complex64)
    data.real = row['data'][..., 0]
    data.imag = row['data'][..., 1]
    gammas = row['gamma'][:P, 0] + 1j * row['gamma'][:P, 1]
    truth = PathSet(gammas, np.array(row['tau'][:P]), np.array(row['alpha'][:P]))
    snapshot = ChannelSnapshot(data=data, grid=spec.grid, sigma2=float(row['sigma2']), truth=truth)
    labels = encode_labels(truth, spec.cell_grid, spec.p_max)
    return DatasetRecord(snapshot=snapshot, labels=labels, noise_seed=int(row['noise_seed']))


def write_dataset(stem: PathLike, spec: DatasetSpec, records: Sequence[DatasetRecord], rejections: int = 0) -> dict:
    header_path, payload_path = _paths(stem)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    header = build_header(spec, len(records), rejections)
    _pack(records, spec).tofile(payload_path)
    header_path.write_text(json.dumps(header, indent=2))
    logger.info("Wrote %d records to %s", len(records), payload_path)
    return header


def _header_field(header: dict, key: str):
    if key not in header:
        raise DatasetFormatError("missing from header", field=key)
    return header[key]


def read_header(stem: PathLike) -> dict:
    header_path, payload_path = _paths(stem)
    if not header_path.exists():
        raise DatasetFormatError(f"missing header file {header_path}", field='header')
    try:
        header = json.loads(header_path.read_text())
    except json.JSONDecodeError as error:
        raise DatasetFormatError(f"malformed JSON in {header_path}: {error}", field='header') from error
    if not isinstance(header, dict):
        raise DatasetFormatError(f"expected a JSON object, got {type(header).__name__}", field='header')

    version = header.get('format_version')
    if version != FORMAT_VERSION:
        raise DatasetFormatError(
            f"unsupported version {version}, expected {FORMAT_VERSION}", field='format_version'
        )
    try:
        spec = DatasetSpec.from_dict(_header_field(header, 'spec'))
    except (KeyError, TypeError, ValueError, AttributeError) as error:
        raise DatasetFormatError(f"invalid dataset spec ({error!r})", field='spec') from error
    for key, expected in (('n_freq', spec.grid.n_freq), ('n_time', spec.grid.n_time), ('p_max', spec.p_max)):
        if header.get(key) != expected:
            raise DatasetFormatError(f"header says {header.get(key)}, expected {expected}", field=key)

    dtype = record_dtype(spec.grid.n_freq, spec.grid.n_time, spec.p_max)
    if header.get('record_layout') != _layout(dtype):
        raise DatasetFormatError("record layout does not match this reader", field='record_layout')

    count = _header_field(header, 'count')
    if not isinstance(count, int) or isinstance(count, bool) or count < 0:
        raise DatasetFormatError(f"expected a non-negative integer, got {count!r}", field='count')
    stored = payload_path.stat().st_size if payload_path.exists() else 0
    if stored != count * dtype.itemsize:
        raise DatasetFormatError(
            f"payload holds {stored} bytes, header declares {count} records "
            f"of {dtype.itemsize} bytes",
            field='count',
        )
    return header


def dataset_hash(stem: PathLike) -> str:
    header_path, _ = _paths(stem)
    return hashlib.sha256(header_path.read_bytes()).hexdigest()


class DatasetReader:
    '''
    Random access to a dataset file without loading the payload.

    Behaves as a sequence of DatasetRecord, so it can back a training
    loader directly.
    '''
    def __init__(self, stem: PathLike):
        self.stem = Path(stem)
        self.header = read_header(stem)
        self.spec = DatasetSpec.from_dict(self.header['spec'])
        self._dtype = record_dtype(self.spec.grid.n_freq, self.spec.grid.n_time, self.spec.p_max)
        self._rows = None
        if self.header['count'] > 0:
            _, payload_path = _paths(stem)
            self._rows = np.memmap(payload_path, dtype=self._dtype, mode='r')

    def __len__(self) -> int:
        return self.header['count']

    def __getitem__(self, index: int) -> DatasetRecord:
        if not -len(self) <= index < len(self):
            raise IndexError(f"record {index} out of range for {len(self)} records")
        return _unpack(self._rows[index], self.spec)

    def __iter__(self) -> Iterator[DatasetRecord]:
        for index in range(len(self)):
            yield self[index]


def read_dataset(stem: PathLike) -> Tuple[DatasetSpec, List[DatasetRecord]]:
    reader = DatasetReader(stem)
    return reader.spec, list(reader)


def _generate_chunk(spec: DatasetSpec, start: int, stop: int) -> Tuple[np.ndarray, int]:
    generator = SnapshotGenerator(spec)
    records = [make_record(generator.generate(index), spec) for index in range(start, stop)]
    return _pack(records, spec), generator.rejections


def generate_records(spec: DatasetSpec) -> List[DatasetRecord]:
    generator = SnapshotGenerator(spec)
    return [make_record(generator.generate(index), spec) for index in range(spec.count)]


def generate_dataset(stem: PathLike, spec: DatasetSpec, workers: int = 1, chunk_size: int = 1000) -> dict:
    '''
    Generate spec.count records and write them to `<stem>.json/.bin`.

    Chunks are generated independently (each record depends only on
    (seed, index)) and written in order, so the files do not depend on
    the number of workers.
    '''
    header_path, payload_path = _paths(stem)
    header_path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [(start, min(start + chunk_size, spec.count)) for start in range(0, spec.count, chunk_size)]

    rejections = 0
    with open(payload_path, 'wb') as payload, tqdm(total=spec.count, desc=f"gen {Path(stem).name}", unit='rec') as bar:
        if workers > 1 and chunks:
            starts, stops = zip(*chunks)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = pool.map(_generate_chunk, [spec] * len(chunks), starts, stops)
                for (start, stop), (packed, rejected) in zip(chunks, results):
                    packed.tofile(payload)
                    rejections += rejected
                    bar.update(stop - start)
        else:
            for start, stop in chunks:
                packed, rejected = _generate_chunk(spec, start, stop)
                packed.tofile(payload)
                rejections += rejected
                bar.update(stop - start)

    header = build_header(spec, spec.count, rejections)
    header_path.write_text(json.dumps(header, indent=2))
    if rejections:
        logger.info("Rejected %d path draws while generating %s", rejections, stem)
    return header
