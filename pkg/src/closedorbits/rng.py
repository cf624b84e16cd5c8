"""Portable SplitMix64 stream.

The generator is counter based, so the k-th output only depends on the seed
and k; it is vectorised with numpy's wrapping uint64 arithmetic.
"""
import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    """SplitMix64 with the reference state update ``state += 0x9E3779B97F4A7C15``."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.counter = 0

    def next_uint64(self, n: int) -> np.ndarray:
        k = np.arange(self.counter + 1, self.counter + n + 1, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + k * _GAMMA)

    def uniform(self, size=None, low=0.0, high=1.0):
        shape = () if size is None else np.atleast_1d(size)
        n = int(np.prod(shape)) if size is not None else 1
        u = (self.next_uint64(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        u = low + (high - low) * u
        return u.reshape(tuple(shape)) if size is not None else float(u[0])

    def points(self, n: int, lows, highs):
        """``n`` points uniformly distributed in the box ``[lows, highs)``."""
        lows = np.asarray(lows, dtype=float)
        highs = np.asarray(highs, dtype=float)
        return self.uniform((n, lows.size), 0.0, 1.0) * (highs - lows) + lows

    def normal(self, size):
        """Standard normals by Box-Muller on two uniform draws."""
        shape = tuple(np.atleast_1d(size))
        n = int(np.prod(shape))
        u1 = self.uniform(n)
        u2 = self.uniform(n)
        r = np.sqrt(-2.0 * np.log1p(-u1))
        return (r * np.cos(2 * np.pi * u2)).reshape(shape)
