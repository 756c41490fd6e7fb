"""Synthetic dataset generators: noisy LED digit displays and triangular waveforms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Attribute, AttributeKind, Dataset, Schema

# Seven-segment patterns for digits 0-9, segment order (a, b, c, d, e, f, g):
# a top, b top-right, c bottom-right, d bottom, e bottom-left, f top-left, g middle.
LED_PATTERNS = np.array(
    [
        [1, 1, 1, 1, 1, 1, 0],
        [0, 1, 1, 0, 0, 0, 0],
        [1, 1, 0, 1, 1, 0, 1],
        [1, 1, 1, 1, 0, 0, 1],
        [0, 1, 1, 0, 0, 1, 1],
        [1, 0, 1, 1, 0, 1, 1],
        [1, 0, 1, 1, 1, 1, 1],
        [1, 1, 1, 0, 0, 0, 0],
        [1, 1, 1, 1, 1, 1, 1],
        [1, 1, 1, 1, 0, 1, 1],
    ],
    dtype=np.int64,
)
LED_PATTERNS.setflags(write=False)

N_SEGMENTS = 7
N_IRRELEVANT_BITS = 17


@dataclass(frozen=True)
class Led24Params:
    n: int
    noise: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must lie in [0, 1]")


def led_pattern(digit: int) -> np.ndarray:
    """Canonical 7-segment bit pattern of a digit (digit 8 lights every segment)."""
    return LED_PATTERNS[digit].copy()


def led24_schema() -> Schema:
    bit = AttributeKind.binary("0", "1")
    attrs = [Attribute(f"seg{i + 1}", bit) for i in range(N_SEGMENTS)]
    attrs += [Attribute(f"irr{i + 1}", bit) for i in range(N_IRRELEVANT_BITS)]
    return Schema(tuple(attrs), tuple(str(d) for d in range(10)))


def gen_led24(params: Led24Params) -> Dataset:
    """Digit-display task: 7 segment bits, each flipped with probability ``noise``,
    plus 17 irrelevant uniform-random bits.  Classes are the 10 digits, uniform prior."""
    rng = np.random.default_rng(params.seed)
    classes = rng.integers(0, 10, size=params.n)
    segments = LED_PATTERNS[classes]
    flips = rng.random((params.n, N_SEGMENTS)) < params.noise
    segments = segments ^ flips
    irrelevant = rng.integers(0, 2, size=(params.n, N_IRRELEVANT_BITS))
    x = np.hstack([segments, irrelevant]).astype(float)
    return Dataset(led24_schema(), x.reshape(params.n, N_SEGMENTS + N_IRRELEVANT_BITS), classes)


# Triangular base pulses of height 6 peaking at positions 7, 11 and 15 on a
# 21-point grid; each class mixes a distinct pair of them.
WAVE_CENTERS = (7.0, 11.0, 15.0)
WAVE_MIX = ((0, 1), (0, 2), (1, 2))
N_WAVE_POINTS = 21


def waveform_base(which: int) -> np.ndarray:
    m = np.arange(1, N_WAVE_POINTS + 1, dtype=float)
    return np.maximum(6.0 - np.abs(m - WAVE_CENTERS[which]), 0.0)


def waveform_values(cls: int, u: float, eps) -> np.ndarray:
    """Pre-assembly hook: the attribute vector for one instance given its class,
    mixing coefficient and additive noise (pass eps=0 for the noise-free wave)."""
    a, b = WAVE_MIX[cls]
    return u * waveform_base(a) + (1.0 - u) * waveform_base(b) + np.asarray(eps, dtype=float)


@dataclass(frozen=True)
class WaveformParams:
    n: int
    variant: int = 40
    seed: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("n must be non-negative")
        if self.variant not in (21, 40):
            raise ValueError("variant must be 21 or 40")


def waveform_schema(variant: int = 40) -> Schema:
    cont = AttributeKind.continuous()
    attrs = [Attribute(f"x{i + 1}", cont) for i in range(N_WAVE_POINTS)]
    if variant == 40:
        attrs += [Attribute(f"irr{i + 1}", cont) for i in range(19)]
    return Schema(tuple(attrs), ("0", "1", "2"))


def gen_waveform(params: WaveformParams) -> Dataset:
    """Three equiprobable classes, each a u-mixture of two base waves plus unit
    Gaussian noise; the 40-attribute variant appends 19 pure-noise attributes."""
    rng = np.random.default_rng(params.seed)
    n = params.n
    classes = rng.integers(0, 3, size=n)
    u = rng.random(n)
    eps = rng.standard_normal((n, N_WAVE_POINTS))
    bases = np.array([waveform_base(i) for i in range(3)])
    mix = np.array(WAVE_MIX)
    first = bases[mix[classes, 0]]
    second = bases[mix[classes, 1]]
    core = u[:, None] * first + (1.0 - u[:, None]) * second + eps
    if params.variant == 40:
        extra = rng.standard_normal((n, 19))
        x = np.hstack([core, extra])
    else:
        x = core
    width = N_WAVE_POINTS + (19 if params.variant == 40 else 0)
    return Dataset(waveform_schema(params.variant), x.reshape(n, width), classes)
