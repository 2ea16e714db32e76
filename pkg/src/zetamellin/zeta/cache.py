"""File-backed cache of Hardy-function samples on a dyadic grid.

On-disk layout (little-endian): the 8-byte magic ``b"ZCACHE1\\0"`` followed by
17-byte records ``(uint64 key, float64 z, uint8 method)`` sorted by key,
where ``key = round(t * 1024)``.
"""

from __future__ import annotations

import enum
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from filelock import FileLock

from ..errors import CacheError, DomainError
from ..parallel import chunked_map
from .evaluate import z_hardy, z_method

logger = logging.getLogger(__name__)

MAGIC = b"ZCACHE1\0"
QUANTUM = 1024  # grid step 1/1024
RECORD = np.dtype([("key", "<u8"), ("z", "<f8"), ("method", "u1")])


class Method(enum.IntEnum):
    RIEMANN_SIEGEL = 0
    EULER_MACLAURIN = 1


@dataclass(frozen=True)
class CriticalSample:
    t: float
    z: float
    method: Method


def quantize(t) -> np.ndarray:
    """Cache keys for abscissae ``t >= 0``."""
    tt = np.asarray(t, dtype=float)
    if np.any(tt < 0):
        raise DomainError("cache keys need t >= 0")
    return np.round(tt * QUANTUM).astype(np.uint64)


class SampleCache:
    """Sorted key -> (Z, method) store persisted to a single binary file.

    Reads never lock; :meth:`flush` takes an exclusive file lock, merges with
    whatever is on disk, and replaces the file atomically.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self.keys = np.zeros(0, dtype=np.uint64)
        self.z = np.zeros(0)
        self.method = np.zeros(0, dtype=np.uint8)
        self.hits = 0
        self.misses = 0
        self._dirty = False
        if self.path is not None and self.path.exists():
            self.keys, self.z, self.method = self._read(self.path)

    def __len__(self) -> int:
        return len(self.keys)

    @staticmethod
    def _read(path: Path):
        try:
            raw = path.read_bytes()
        except OSError as exc:
            raise CacheError(f"cannot read sample cache {path}: {exc}") from exc
        if raw[:8] != MAGIC:
            raise CacheError(f"{path}: bad magic {raw[:8]!r}, expected {MAGIC!r}")
        body = raw[8:]
        if len(body) % RECORD.itemsize:
            raise CacheError(f"{path}: truncated record stream ({len(body)} bytes)")
        rec = np.frombuffer(body, dtype=RECORD)
        if len(rec) > 1 and np.any(np.diff(rec["key"].astype(np.int64)) <= 0):
            raise CacheError(f"{path}: keys are not strictly increasing")
        return rec["key"].copy(), rec["z"].copy(), rec["method"].copy()

    def to_bytes(self) -> bytes:
        rec = np.empty(len(self.keys), dtype=RECORD)
        rec["key"], rec["z"], rec["method"] = self.keys, self.z, self.method
        return MAGIC + rec.tobytes()

    def lookup(self, keys: np.ndarray):
        """Return ``(found_mask, z, method)`` for the requested keys."""
        keys = np.asarray(keys, dtype=np.uint64)
        z = np.full(len(keys), np.nan)
        method = np.zeros(len(keys), dtype=np.uint8)
        if not len(self.keys):
            return np.zeros(len(keys), bool), z, method
        idx = np.minimum(np.searchsorted(self.keys, keys), len(self.keys) - 1)
        found = self.keys[idx] == keys
        z[found] = self.z[idx[found]]
        method[found] = self.method[idx[found]]
        return found, z, method

    def insert(self, keys, z, method) -> None:
        keys = np.asarray(keys, dtype=np.uint64)
        if keys.size == 0:
            return
        allk = np.concatenate([self.keys, keys])
        allz = np.concatenate([self.z, np.asarray(z, dtype=float)])
        allm = np.concatenate([self.method, np.asarray(method, dtype=np.uint8)])
        # stable sort keeps existing entries first; duplicates resolve to the old value
        order = np.argsort(allk, kind="stable")
        allk, allz, allm = allk[order], allz[order], allm[order]
        keep = np.ones(len(allk), bool)
        keep[1:] = allk[1:] != allk[:-1]
        self.keys, self.z, self.method = allk[keep], allz[keep], allm[keep]
        self._dirty = True

    def flush(self) -> None:
        """Write the cache to disk (no-op when nothing changed or no path is set)."""
        if self.path is None or not self._dirty:
            return
        self.path.parent.mkdir(parents=True, exist_ok=True)
        lock = FileLock(str(self.path) + ".lock")
        with lock:
            if self.path.exists():
                k, z, m = self._read(self.path)
                mine = (self.keys, self.z, self.method)
                self.keys, self.z, self.method = k, z, m
                self.insert(*mine)
            fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=self.path.name, suffix=".tmp")
            try:
                with os.fdopen(fd, "wb") as fh:
                    fh.write(self.to_bytes())
                    fh.flush()
                    os.fsync(fh.fileno())
                os.replace(tmp, self.path)
            except OSError as exc:
                Path(tmp).unlink(missing_ok=True)
                raise CacheError(f"cannot write sample cache {self.path}: {exc}") from exc
        self._dirty = False

    def coverage(self) -> tuple[float, float] | None:
        if not len(self.keys):
            return None
        return float(self.keys[0]) / QUANTUM, float(self.keys[-1]) / QUANTUM


@dataclass
class LineSamples:
    """Samples on a quantised grid, stored column-wise."""

    t: np.ndarray
    z: np.ndarray
    method: np.ndarray

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self):
        for t, z, m in zip(self.t, self.z, self.method):
            yield CriticalSample(float(t), float(z), Method(int(m)))


def grid_keys(t0: float, t1: float, step: float) -> np.ndarray:
    if not t0 < t1:
        raise DomainError(f"sample_line needs t0 < t1, got [{t0}, {t1}]")
    if step <= 0:
        raise DomainError(f"sample_line needs step > 0, got {step}")
    n = int(np.floor((t1 - t0) / step + 1e-9))
    keys = quantize(t0 + step * np.arange(n + 1))
    if len(keys) > 1 and np.any(np.diff(keys.astype(np.int64)) <= 0):
        raise DomainError(f"step {step} is finer than the cache quantum 1/{QUANTUM}")
    return keys


def _eval_keys(keys: np.ndarray) -> np.ndarray:
    t = keys.astype(float) / QUANTUM
    return z_hardy(t)


def sample_line(t0: float, t1: float, step: float, cache: SampleCache,
                workers: int = 1) -> LineSamples:
    """Z on the grid t0, t0+step, ..., <= t1, served from ``cache`` where present.

    Missing samples are computed, inserted and flushed to disk.
    """
    keys = grid_keys(t0, t1, step)
    found, z, method = cache.lookup(keys)
    cache.hits += int(found.sum())
    miss = ~found
    if np.any(miss):
        cache.misses += int(miss.sum())
        mk = keys[miss]
        mz = chunked_map(_eval_keys, mk, workers=workers)
        mm = z_method(mk.astype(float) / QUANTUM)
        cache.insert(mk, mz, mm)
        cache.flush()
        z[miss], method[miss] = mz, mm
        logger.info("sample_line: computed %d new samples on [%g, %g]", int(miss.sum()), t0, t1)
    return LineSamples(keys.astype(float) / QUANTUM, z, method)
