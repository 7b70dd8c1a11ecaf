"""Counter-based random numbers for reproducible parallel Monte Carlo.

Each random number is a pure function of a key made of integer counters
(seed, shot, layer, location, purpose). There is no generator state to
carry around, so any subset of shots can be simulated in any order or in
any worker process and still produce identical draws. Two runs that share
a seed but differ in error rates see the same uniforms at every site, which
is what makes paired finite differences low-variance.

The following illustrates example usage:

>>> from fluxqec.core import rng
>>> stream = rng.CounterStream(seed=7)
>>> a = stream.uniform(shot=[0, 1, 2], layer=3, location=5, purpose=1)
>>> b = stream.uniform(shot=[2, 1, 0], layer=3, location=5, purpose=1)
>>> bool((a == b[::-1]).all())
True
>>> bool(((0 <= a) & (a < 1)).all())
True
"""

import typing

import numpy as np


_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / float(1 << 53)


def splitmix64(values) -> np.ndarray:
    """Apply the SplitMix64 finalizer elementwise to uint64 values.

    Arithmetic wraps modulo 2**64.
    """
    z = np.asarray(values, dtype=np.uint64)
    with np.errstate(over='ignore'):
        z = z + _GOLDEN
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


class CounterStream:
    """Stateless random stream keyed by a master seed.

    :param seed:  Non-negative master seed (up to 64 bits).

    ~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-~-

    PURPOSE:  Give every random decision of a simulation its own address
              so results do not depend on evaluation order.
    """

    def __init__(self, seed: int):
        if seed < 0:
            raise ValueError('Seed must be non-negative, got %s' % seed)
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._base = splitmix64(np.uint64(self.seed))

    def bits(self, shot, layer, location, purpose) -> np.ndarray:
        """Return 64 random bits per broadcast element of the counters.
        """
        shot, layer, location, purpose = np.broadcast_arrays(
            *[np.asarray(c, dtype=np.uint64)
              for c in (shot, layer, location, purpose)])
        h = np.broadcast_to(self._base, shot.shape)
        for counter in (shot, layer, location, purpose):
            h = splitmix64(h ^ counter)
        return h

    def uniform(self, shot, layer, location, purpose) -> np.ndarray:
        "Uniform floats in [0, 1) with 53 bits of resolution."
        return (self.bits(shot, layer, location, purpose) >> _S11).astype(
            np.float64) * _INV53

    def integers(self, upper: typing.Union[int, np.ndarray], shot, layer,
                 location, purpose) -> np.ndarray:
        """Uniform integers in [0, upper) for each broadcast element.

        :param upper:  Positive exclusive bound (scalar or array).
        """
        u = self.uniform(shot, layer, location, purpose)
        upper = np.asarray(upper)
        if np.any(upper <= 0):
            raise ValueError('Upper bound must be positive')
        return np.minimum((u * upper).astype(np.int64), upper - 1)

    def child(self, index: int) -> 'CounterStream':
        "Derive an independent stream, for example one per chunk or task."
        return CounterStream(int(splitmix64(
            np.uint64(self.seed) ^ splitmix64(np.uint64(index)))))
