"""Run records and seed derivation shared by the simulators and the harness."""
from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np


def _tag_int(tag) -> int:
    if isinstance(tag, (int, np.integer)):
        return int(tag)
    return zlib.crc32(str(tag).encode())


def derive_seed(root: int, *tags) -> np.random.SeedSequence:
    """Independent child seed for a (root, replica, stream, ...) tuple.

    Tags may be ints or strings; strings are hashed with crc32 so the mapping
    is stable across processes and Python versions.
    """
    return np.random.SeedSequence(int(root), spawn_key=tuple(_tag_int(t) for t in tags))


def stream_seed(root: int, *tags) -> int:
    """64-bit integer form of ``derive_seed`` (SeedSequence hash mixing)."""
    return int(derive_seed(root, *tags).generate_state(1, np.uint64)[0])


def derive_rng(root: int, *tags) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root, *tags))


@dataclass
class RunRecord:
    model: str
    seed: int
    replica: int
    times: np.ndarray
    snapshots: np.ndarray
    sites: np.ndarray
    event_count: int = 0
    candidate_count: int = 0
    speciation_time: float | None = None
    extinction_time: float | None = None
    wall_clock: float = 0.0
    config_hash: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def terminal(self) -> np.ndarray:
        return self.snapshots[-1]

    def frequencies(self) -> np.ndarray:
        """Snapshots normalized to frequencies (zero rows stay zero)."""
        s = np.asarray(self.snapshots, dtype=float)
        tot = s.sum(axis=1, keepdims=True)
        return np.divide(s, tot, out=np.zeros_like(s), where=tot > 0)

    def at(self, t: float) -> np.ndarray:
        """Last snapshot taken at or before time t."""
        i = int(np.searchsorted(self.times, t, side="right")) - 1
        if i < 0:
            raise ValueError(f"no snapshot at or before t={t}")
        return self.snapshots[i]
