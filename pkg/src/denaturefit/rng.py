"""Reproducible random deviates built on a 32-bit Mersenne Twister.

Every draw goes through :class:`Mt19937`, so a seed fixes all synthetic
data and Monte Carlo rounds bit-for-bit on any platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Mt19937",
    "GaussianNoise",
    "LorentzianNoise",
    "NoiseSpec",
    "hwhm_from_sigma",
    "substream_seed",
    "substream",
    "mt_seed",
    "mt_next_u32",
    "uniform01",
    "gaussian",
    "lorentzian",
]

_N = 624
_M = 397
_MATRIX_A = np.uint32(0x9908B0DF)
_UPPER = np.uint32(0x80000000)
_LOWER = np.uint32(0x7FFFFFFF)
_MASK32 = 0xFFFFFFFF
_TWO32 = 4294967296.0
_GOLDEN = 0x9E3779B9


def _twist(mt: np.ndarray) -> None:
    # Reference loop vectorized in blocks with no intra-block dependency.
    y = (mt[: _N - _M] & _UPPER) | (mt[1 : _N - _M + 1] & _LOWER)
    mt[: _N - _M] = mt[_M:] ^ (y >> 1) ^ ((y & 1) * _MATRIX_A)
    # mt[kk] reads the already-updated mt[kk - (N - M)]
    for lo in range(_N - _M, _N - 1, _N - _M):
        hi = min(lo + _N - _M, _N - 1)
        y = (mt[lo:hi] & _UPPER) | (mt[lo + 1 : hi + 1] & _LOWER)
        mt[lo:hi] = mt[lo - (_N - _M) : hi - (_N - _M)] ^ (y >> 1) ^ ((y & 1) * _MATRIX_A)
    y = (mt[_N - 1] & _UPPER) | (mt[0] & _LOWER)
    mt[_N - 1] = mt[_M - 1] ^ (y >> 1) ^ ((y & 1) * _MATRIX_A)


def _temper(y: np.ndarray) -> np.ndarray:
    y = y ^ (y >> 11)
    y = y ^ ((y << 7) & np.uint32(0x9D2C5680))
    y = y ^ ((y << 15) & np.uint32(0xEFC60000))
    return y ^ (y >> 18)


class Mt19937:
    """MT19937 generator with a Box-Muller partner cache.

    ``index`` counts words consumed from the current 624-word block.  The
    cached Gaussian partner belongs to the stream, so two consecutive
    :meth:`gaussian` calls consume exactly two uniforms.
    """

    def __init__(self, seed: int = 5489):
        self.seed = int(seed) & _MASK32
        mt = [0] * _N
        mt[0] = self.seed
        for i in range(1, _N):
            prev = mt[i - 1]
            mt[i] = (1812433253 * (prev ^ (prev >> 30)) + i) & _MASK32
        self._mt = np.array(mt, dtype=np.uint32)
        self._out = np.empty(0, dtype=np.uint32)
        self.index = _N
        self._cached = None

    def __repr__(self):
        return f"Mt19937(seed={self.seed}, index={self.index})"

    def _refill(self):
        _twist(self._mt)
        self._out = _temper(self._mt)
        self.index = 0

    def next_u32_array(self, n: int) -> np.ndarray:
        """The next ``n`` 32-bit outputs as a uint32 array."""
        chunks = []
        need = int(n)
        while need > 0:
            if self.index >= _N:
                self._refill()
            take = min(need, _N - self.index)
            chunks.append(self._out[self.index : self.index + take])
            self.index += take
            need -= take
        if not chunks:
            return np.empty(0, dtype=np.uint32)
        return np.concatenate(chunks) if len(chunks) > 1 else chunks[0].copy()

    def next_u32(self) -> int:
        if self.index >= _N:
            self._refill()
        v = int(self._out[self.index])
        self.index += 1
        return v

    def uniform01(self) -> float:
        """Uniform on [0, 1) with 32-bit resolution."""
        return self.next_u32() / _TWO32

    def uniforms(self, n: int) -> np.ndarray:
        return self.next_u32_array(n) / _TWO32

    def gaussian(self, sigma: float = 1.0) -> float:
        """One Box-Muller deviate; the sine partner is cached for the next call."""
        if self._cached is not None:
            z = self._cached
            self._cached = None
            return sigma * z
        u1 = 1.0 - self.uniform01()  # (0, 1], keeps log finite
        u2 = self.uniform01()
        rad = math.sqrt(-2.0 * math.log(u1))
        self._cached = rad * math.sin(2.0 * math.pi * u2)
        return sigma * rad * math.cos(2.0 * math.pi * u2)

    def gaussians(self, n: int, sigma: float = 1.0) -> np.ndarray:
        """``n`` deviates; the same stream as ``n`` :meth:`gaussian` calls, up to rounding."""
        out = np.empty(int(n))
        start = 0
        if n > 0 and self._cached is not None:
            out[0] = self._cached
            self._cached = None
            start = 1
        rest = out.size - start
        pairs = (rest + 1) // 2
        if pairs:
            u = self.uniforms(2 * pairs)
            u1 = 1.0 - u[0::2]
            u2 = u[1::2]
            rad = np.sqrt(-2.0 * np.log(u1))
            z = np.empty(2 * pairs)
            z[0::2] = rad * np.cos(2.0 * np.pi * u2)
            z[1::2] = rad * np.sin(2.0 * np.pi * u2)
            out[start:] = z[:rest]
            if rest % 2:
                self._cached = float(z[-1])
        return sigma * out

    def lorentzian(self, median: float, gamma: float, cutoff: float = math.inf) -> float:
        """Cauchy deviate by inverse CDF, redrawn while farther than ``cutoff``."""
        while True:
            x = median + gamma * math.tan(math.pi * (self.uniform01() - 0.5))
            if abs(x - median) <= cutoff:
                return x

    def lorentzians(self, n: int, median: float, gamma: float,
                    cutoff: float = math.inf) -> np.ndarray:
        """``n`` deviates; the same stream as ``n`` :meth:`lorentzian` calls, up to rounding."""
        # a rejected uniform is simply skipped, so filtering a batch and
        # topping up the shortfall reproduces the scalar sequence exactly
        out = np.empty(0)
        while out.size < n:
            u = self.uniforms(n - out.size)
            x = median + gamma * np.tan(np.pi * (u - 0.5))
            out = np.concatenate([out, x[np.abs(x - median) <= cutoff]])
        return out

    def randbelow(self, n: int, size: int) -> np.ndarray:
        """``size`` integers uniform on [0, n) via floor(n * u)."""
        idx = (self.uniforms(size) * n).astype(np.int64)
        return np.minimum(idx, n - 1)


def hwhm_from_sigma(sigma: float) -> float:
    """Gaussian half-width at half-maximum, sigma * sqrt(2 ln 2)."""
    return sigma * math.sqrt(2.0 * math.log(2.0))


@dataclass(frozen=True)
class GaussianNoise:
    sigma: float = 10.0

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError("sigma must be >= 0")

    kind = "gaussian"

    def sample(self, rng: Mt19937, n: int) -> np.ndarray:
        if self.sigma == 0:
            return np.zeros(n)
        return rng.gaussians(n, self.sigma)


@dataclass(frozen=True)
class LorentzianNoise:
    gamma: float = hwhm_from_sigma(10.0)
    median: float = 0.0
    cutoff: float = 200.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not self.cutoff > 0:
            raise ValueError("cutoff must be positive")

    kind = "lorentzian"

    def sample(self, rng: Mt19937, n: int) -> np.ndarray:
        return rng.lorentzians(n, self.median, self.gamma, self.cutoff)


NoiseSpec = GaussianNoise | LorentzianNoise


def substream_seed(master_seed: int, i: int) -> int:
    """Seed of substream ``i``: low 32 bits of master XOR golden * (i + 1)."""
    return (int(master_seed) ^ (_GOLDEN * (int(i) + 1))) & _MASK32


def substream(master_seed: int, i: int) -> Mt19937:
    return Mt19937(substream_seed(master_seed, i))


# Functional aliases mirroring the generator's methods.

def mt_seed(seed: int) -> Mt19937:
    return Mt19937(seed)


def mt_next_u32(state: Mt19937) -> int:
    return state.next_u32()


def uniform01(state: Mt19937) -> float:
    return state.uniform01()


def gaussian(state: Mt19937, sigma: float = 1.0) -> float:
    return state.gaussian(sigma)


def lorentzian(state: Mt19937, median: float, gamma: float, cutoff: float = math.inf) -> float:
    return state.lorentzian(median, gamma, cutoff)
