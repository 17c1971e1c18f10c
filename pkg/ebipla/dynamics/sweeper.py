"""
    Data-parallel sweeps over particle rows.

    Rows are cut into fixed chunks of chunk_rows, independent of the thread
    count, and reductions combine per-chunk results sequentially in chunk
    order. Results are therefore bitwise identical for any number of threads.
"""
import logging
from multiprocessing.pool import ThreadPool

import numpy as np

from ebipla.errors import EmptyBatchError

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_ROWS = 4096


class ParticleSweeper:
    def __init__(self, threads=1, chunk_rows=DEFAULT_CHUNK_ROWS):
        if threads < 1:
            raise ValueError('threads must be >= 1')
        if chunk_rows < 1:
            raise ValueError('chunk_rows must be >= 1')
        self.threads = int(threads)
        self.chunk_rows = int(chunk_rows)
        self._pool = None

    def chunks(self, n_rows):
        return [slice(start, min(start + self.chunk_rows, n_rows)) for start in range(0, n_rows, self.chunk_rows)]

    def _map(self, fn, slices):
        if self.threads == 1 or len(slices) == 1:
            return [fn(sl) for sl in slices]
        if self._pool is None:
            self._pool = ThreadPool(processes=self.threads)
        # map keeps the input order
        return self._pool.map(fn, slices)

    def apply(self, fn, rows):
        '''fn(chunk_of_rows) -> per-row results; concatenated in row order'''
        n_rows = rows.shape[0]
        if n_rows == 0:
            return np.asarray(fn(rows))
        parts = self._map(lambda sl: np.asarray(fn(rows[sl]), dtype=np.float64), self.chunks(n_rows))
        return np.concatenate(parts, axis=0)

    def mean(self, fn, n_rows):
        '''fn(slice) -> mean over that slice; returns the row-weighted mean over all rows'''
        if n_rows < 1:
            raise EmptyBatchError('cannot average over zero rows')
        slices = self.chunks(n_rows)
        parts = self._map(lambda sl: np.asarray(fn(sl), dtype=np.float64), slices)
        total = np.zeros_like(parts[0])
        for sl, part in zip(slices, parts):
            total = total + part * (sl.stop - sl.start)
        return total / n_rows

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def __repr__(self):
        return f'ParticleSweeper(threads={self.threads}, chunk_rows={self.chunk_rows})'
