"""Detecting a split of the population into separated modes."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

CRITERION_VERSION = "bimodal-v1"


@dataclass(frozen=True)
class SpeciationCriterion:
    window: int = 3
    min_separation: int = 4
    mode_mass: float = 0.15
    mass_radius: int = 2
    valley_ratio: float = 0.5
    version: str = CRITERION_VERSION

    def to_dict(self):
        return asdict(self)


def smooth(freq, window: int = 3) -> np.ndarray:
    """Centred moving average; the window shrinks at the lattice ends."""
    f = np.asarray(freq, dtype=float)
    h = window // 2
    c = np.concatenate([[0.0], np.cumsum(f)])
    i = np.arange(f.size)
    lo = np.maximum(i - h, 0)
    hi = np.minimum(i + h + 1, f.size)
    return (c[hi] - c[lo]) / (hi - lo)


def find_modes(freq, crit: SpeciationCriterion = SpeciationCriterion()):
    """Indices of local maxima of the smoothed profile holding enough mass nearby."""
    f = np.asarray(freq, dtype=float)
    tot = f.sum()
    if tot <= 0:
        return [], f
    f = f / tot
    s = smooth(f, crit.window)
    n = s.size
    peaks = []
    i = 0
    while i < n:
        j = i
        while j + 1 < n and s[j + 1] == s[i]:
            j += 1
        left = s[i - 1] if i > 0 else -np.inf
        right = s[j + 1] if j + 1 < n else -np.inf
        if s[i] > left and s[i] > right:
            k = (i + j) // 2
            lo, hi = max(k - crit.mass_radius, 0), min(k + crit.mass_radius + 1, n)
            if f[lo:hi].sum() >= crit.mode_mass:
                peaks.append(k)
        i = j + 1
    return peaks, s


def is_speciated(freq, crit: SpeciationCriterion = SpeciationCriterion()) -> bool:
    peaks, s = find_modes(freq, crit)
    for a in range(len(peaks)):
        for b in range(a + 1, len(peaks)):
            i, j = peaks[a], peaks[b]
            if j - i < crit.min_separation:
                continue
            valley = s[i:j + 1].min()
            if valley <= crit.valley_ratio * min(s[i], s[j]):
                return True
    return False


def speciation_time(times, snapshots, crit: SpeciationCriterion = SpeciationCriterion()):
    """First snapshot time at which the criterion fires, or None."""
    for t, row in zip(times, snapshots):
        if is_speciated(row, crit):
            return float(t)
    return None
