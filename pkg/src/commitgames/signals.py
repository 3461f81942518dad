"""Deterministic, counter-based randomization signals.

Every draw is a pure function of (seed, trial, level/index), so trials can be
replayed bit-for-bit and evaluated in parallel without shared RNG state. The
depth-indexed variables are generated in fixed-size blocks so a call stack can
keep extending lazily without re-reading earlier levels.
"""

from __future__ import annotations

import numpy as np

_KEY_SALT = 0x9E3779B97F4A7C15  # fixed salt so key = (seed, salt) fills both words
_U_BLOCK = 256

# stream tags keep the per-purpose substreams disjoint in the counter space
_STREAM_C = 0
_STREAM_LEVELS = 1
_STREAM_SCRATCH = 2


def _block(seed: int, trial: int, block_index: int, stream: int, size: int) -> np.ndarray:
    bg = np.random.Philox(
        counter=[stream, block_index, trial & 0xFFFFFFFFFFFFFFFF, 0],
        key=[seed & 0xFFFFFFFFFFFFFFFF, _KEY_SALT],
    )
    return np.random.Generator(bg).random(size)


class RandomizationSignal:
    """Seeded source for the base-game correlation value and the per-depth
    uniforms consumed by recursive program evaluation."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._u_cache: dict[tuple[int, int], np.ndarray] = {}

    def draw_c(self, trial: int) -> float:
        """Correlation value in [0, 1) shared by all players in a trial."""
        return float(_block(self.seed, trial, 0, _STREAM_C, 1)[0])

    def u_level(self, trial: int, level: int) -> float:
        """Depth-indexed uniform U_level in [0, 1), level >= 1.

        Generated in blocks keyed by (trial, block); the value never depends
        on how many levels were previously read.
        """
        if level < 1:
            raise ValueError(f"level must be >= 1, got {level}")
        block_index, offset = divmod(level - 1, _U_BLOCK)
        key = (trial, block_index)
        arr = self._u_cache.get(key)
        if arr is None:
            if len(self._u_cache) > 128:
                self._u_cache.clear()
            arr = _block(self.seed, trial, block_index, _STREAM_LEVELS, _U_BLOCK)
            self._u_cache[key] = arr
        return float(arr[offset])

    def scratch_uniforms(self, trial: int, n: int) -> np.ndarray:
        """Auxiliary uniforms (e.g. for sampling type profiles in Monte Carlo
        harnesses); a separate stream so they never collide with c or U_L."""
        return _block(self.seed, trial, 0, _STREAM_SCRATCH, n)


class PresetSignal:
    """Signal stub with explicit U sequences, for exercising specific branches.

    `u_values[k]` is used for level k+1; levels past the end fall back to a
    real counter-based signal so traces still terminate.
    """

    def __init__(self, u_values, c: float = 0.5, seed: int = 0):
        self._u = [float(v) for v in u_values]
        self._c = float(c)
        self._fallback = RandomizationSignal(seed)

    def draw_c(self, trial: int) -> float:
        return self._c

    def u_level(self, trial: int, level: int) -> float:
        if level < 1:
            raise ValueError(f"level must be >= 1, got {level}")
        if level <= len(self._u):
            return self._u[level - 1]
        return self._fallback.u_level(trial, level)

    def scratch_uniforms(self, trial: int, n: int) -> np.ndarray:
        return self._fallback.scratch_uniforms(trial, n)
