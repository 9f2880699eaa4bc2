"""Seeded 64-bit PRNG (splitmix64) and random series generation.

Every randomized sweep in this package draws from SplitMix64 so that a
fixed seed reproduces byte-identical CSV and JSON outputs on any
platform.  The generator is the public-domain splitmix64 finalizer:
state advances by the golden-ratio increment 0x9E3779B97F4A7C15 and
each output word is scrambled by two xor-shift-multiply rounds.
Doubles come from the top 53 bits.
"""

from __future__ import annotations

import math

import numpy as np

from .series import (
    DEFAULT_FOURIER_WIDTH,
    FOURIER,
    TAYLOR,
    ScaledSeries,
    norm,
)

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class SplitMix64:
    """splitmix64 stream; uniform() yields 53-bit doubles in [0, 1)."""

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform_open(self) -> float:
        """Uniform on (0, 1]."""
        return 1.0 - self.uniform()

    def choice(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise ValueError("choice needs a positive range")
        return int(self.uniform() * n) % n

    def spawn(self, tag: int) -> "SplitMix64":
        """Derive an independent substream labelled by an integer tag."""
        return SplitMix64(self.next_u64() ^ ((tag * _GOLDEN) & _MASK))


def random_series(rng: SplitMix64, kind: str, order: int, *,
                  decay: float = 0.5, min_index: int = 0,
                  width: float = DEFAULT_FOURIER_WIDTH,
                  target_norm: float | None = None,
                  at_scale: float | None = None) -> ScaledSeries:
    """Random series with |c_m| <= decay^|m|, optionally rescaled in norm.

    ``min_index`` zeroes low indices: 1 gives a series vanishing at the
    origin (Taylor) or with zero mean (Fourier).  With ``target_norm``
    the series is rescaled so that |x|_{at_scale} equals the target.
    """
    if kind == TAYLOR:
        size = order + 1
        degrees = np.arange(size)
    elif kind == FOURIER:
        size = 2 * order + 1
        degrees = np.abs(np.arange(-order, order + 1))
    else:
        raise ValueError(f"unknown series kind {kind!r}")
    arr = np.zeros(size, dtype=np.complex128)
    for pos in range(size):
        mag = rng.uniform()
        phase = rng.uniform()
        if degrees[pos] < min_index:
            continue
        arr[pos] = (decay ** degrees[pos]) * mag * np.exp(2j * math.pi * phase)
    out = ScaledSeries(kind, arr, width)
    if target_norm is not None:
        if at_scale is None:
            raise ValueError("target_norm needs at_scale")
        current = norm(out, at_scale)
        if current == 0.0 or not math.isfinite(target_norm / current):
            raise ValueError("draw norm too degenerate to rescale")
        out = ScaledSeries(kind, arr * (target_norm / current), width)
    return out
