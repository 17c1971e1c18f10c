"""
    Dataset container and the on-disk format shared by datasets and checkpoints:
    <stem>.f64 holds the arrays back to back as little-endian float64,
    <stem>.json holds the schema version, array names/shapes and metadata.
"""
import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from torch.utils.data import Dataset as TorchDataset

from ebipla.errors import DimensionError, NonFiniteError, SchemaError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


def _stem(path):
    path = Path(path)
    return path.with_suffix('') if path.suffix in ('.f64', '.json') else path


def write_container(path, arrays, header):
    '''arrays: ordered mapping name -> ndarray; header: JSON-serialisable dict'''
    stem = _stem(path)
    stem.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    with open(stem.with_suffix('.f64'), 'wb') as fh:
        for name, array in arrays.items():
            array = np.ascontiguousarray(array, dtype='<f8')
            entries.append({'name': name, 'shape': list(array.shape)})
            fh.write(array.tobytes())
    document = dict(header)
    document['schema_version'] = SCHEMA_VERSION
    document['arrays'] = entries
    with open(stem.with_suffix('.json'), 'w') as fh:
        json.dump(document, fh, indent=2, sort_keys=True)
        fh.write('\n')
    return stem


def read_container(path, kind=None):
    '''Returns (arrays dict, header dict); malformed, truncated or mismatched files raise SchemaError'''
    stem = _stem(path)
    try:
        with open(stem.with_suffix('.json')) as fh:
            header = json.load(fh)
    except json.JSONDecodeError as exc:
        raise SchemaError(f'{stem}.json is not valid JSON: {exc}') from exc
    if header.get('schema_version') != SCHEMA_VERSION:
        raise SchemaError(f'{stem}.json: schema_version {header.get("schema_version")!r}, expected {SCHEMA_VERSION}')
    if kind is not None and header.get('kind') != kind:
        raise SchemaError(f'{stem}.json: kind {header.get("kind")!r}, expected {kind!r}')
    entries = header.get('arrays')
    if not isinstance(entries, list):
        raise SchemaError(f'{stem}.json: missing array table')

    raw = np.fromfile(stem.with_suffix('.f64'), dtype='<f8')
    expected = sum(int(np.prod(e['shape'], dtype=np.int64)) for e in entries)
    if raw.size != expected:
        raise SchemaError(f'{stem}.f64 holds {raw.size} values, header describes {expected} (truncated file?)')
    arrays, offset = {}, 0
    for entry in entries:
        count = int(np.prod(entry['shape'], dtype=np.int64))
        arrays[entry['name']] = raw[offset:offset + count].astype(np.float64).reshape(entry['shape'])
        offset += count
    return arrays, header


class Dataset(TorchDataset):
    '''Observations y (M x d_y), optional ground-truth latents and provenance metadata'''

    def __init__(self, y, latents=None, metadata=None):
        y = np.asarray(y, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if y.ndim != 2 or y.shape[0] < 1:
            raise DimensionError('M', '>= 1 rows of a 2-D array', y.shape, 'Dataset')
        if not np.all(np.isfinite(y)):
            raise NonFiniteError('dataset has non-finite observations')
        if latents is not None:
            latents = np.asarray(latents, dtype=np.float64)
            if latents.shape[0] != y.shape[0]:
                raise DimensionError('M', y.shape[0], latents.shape[0], 'Dataset latents')
        self.y = y
        self.latents = latents
        self.metadata = dict(metadata or {})

    @property
    def M(self):
        return self.y.shape[0]

    @property
    def d_y(self):
        return self.y.shape[1]

    def __len__(self):
        return self.M

    def __getitem__(self, item):
        return self.y[item]

    def subset(self, indices):
        latents = None if self.latents is None else self.latents[indices]
        return Dataset(self.y[indices], latents, self.metadata)


def save_dataset(dataset, path):
    arrays = {'y': dataset.y}
    if dataset.latents is not None:
        arrays['latents'] = dataset.latents
    stem = write_container(path, arrays, {'kind': 'dataset', 'metadata': dataset.metadata})
    logger.info('dataset with %d points written to %s.f64', dataset.M, stem)
    return stem


def load_dataset(path):
    arrays, header = read_container(path, kind='dataset')
    if 'y' not in arrays:
        raise SchemaError(f'{_stem(path)}: dataset file has no y array')
    return Dataset(arrays['y'], arrays.get('latents'), header.get('metadata'))


def export_csv(dataset, path):
    frame = pd.DataFrame(dataset.y, columns=[f'y{i}' for i in range(dataset.d_y)])
    if dataset.latents is not None:
        for i in range(dataset.latents.shape[1]):
            frame[f'latent{i}'] = dataset.latents[:, i]
    frame.to_csv(path, index=False, float_format='%.17g')
    return path
