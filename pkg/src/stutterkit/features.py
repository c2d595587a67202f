"""MFCC front end: short-time power spectra, mel filterbank, DCT, row selection.

A 1-second segment at the canonical 22050 Hz rate with the default
config yields a (13, 44) coefficient matrix; the prolongation detector
additionally selects rows {0, 12} giving (2, 44).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .audio import CANONICAL_RATE
from .errors import StutterKitError


class SegmentTooShort(StutterKitError):
    """Signal too short to frame under the requested padding rules."""


class BadBand(StutterKitError):
    """Invalid mel band edges (f_min >= f_max or outside Nyquist)."""


class IndexOutOfRange(StutterKitError):
    """Coefficient selection outside the matrix rows."""


@dataclass(frozen=True)
class FeatureConfig:
    """Extraction parameters, stored alongside every trained model."""

    sample_rate: int = CANONICAL_RATE
    n_fft: int = 2048
    hop: int = 512
    n_mels: int = 40
    n_mfcc: int = 13
    f_min: float = 0.0
    f_max: float = CANONICAL_RATE / 2
    log_floor: float = 1e-10

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "FeatureConfig":
        return cls(**json.loads(text))

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureConfig":
        return cls(**data)


@dataclass
class MfccMatrix:
    """Coefficients-by-frames feature array plus which source rows it holds."""

    values: np.ndarray
    coeff_indices: list[int]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ValueError("MfccMatrix values must be 2-D")
        if self.values.shape[0] != len(self.coeff_indices):
            raise ValueError("coeff_indices must name every row")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass
class MelFilterbank:
    """Triangular mel filters evaluated on rfft bin frequencies."""

    weights: np.ndarray  # (n_mels, n_fft // 2 + 1), all >= 0
    f_min: float
    f_max: float
    center_freqs: np.ndarray  # Hz peak of each triangle


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _hann(n_fft: int) -> np.ndarray:
    # periodic Hann, standard for STFT analysis
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * np.arange(n_fft) / n_fft))


def stft_power(segment, n_fft: int = 2048, hop: int = 512, centered: bool = True) -> np.ndarray:
    """Hann-windowed short-time power spectrum, (n_fft/2 + 1) x n_frames.

    With centered framing the signal is reflection-padded by n_fft/2 on
    both ends and n_frames = floor(len/hop) + 1 (librosa-style).
    """
    samples = np.asarray(getattr(segment, "samples", segment), dtype=np.float64)
    if n_fft <= 0 or n_fft & (n_fft - 1):
        raise ValueError("n_fft must be a power of two")
    if hop <= 0:
        raise ValueError("hop must be positive")

    n = len(samples)
    if centered:
        pad = n_fft // 2
        if n < pad + 1:
            raise SegmentTooShort(f"{n} samples cannot be reflection-padded by {pad}")
        padded = np.pad(samples, pad, mode="reflect")
        n_frames = n // hop + 1
    else:
        if n < n_fft:
            raise SegmentTooShort(f"{n} samples < one {n_fft}-sample frame")
        padded = samples
        n_frames = (n - n_fft) // hop + 1

    window = _hann(n_fft)
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop][:n_frames]
    spectrum = np.fft.rfft(frames * window, axis=1)
    return (spectrum.real**2 + spectrum.imag**2).T


def mel_filterbank(
    sr: int, n_fft: int, n_mels: int, f_min: float = 0.0, f_max: float | None = None
) -> MelFilterbank:
    """Build n_mels triangular filters with peaks equally spaced on the mel scale."""
    if f_max is None:
        f_max = sr / 2
    if f_min < 0 or f_min >= f_max:
        raise BadBand(f"need 0 <= f_min < f_max, got [{f_min}, {f_max}]")
    if f_max > sr / 2:
        raise BadBand(f"f_max {f_max} above Nyquist {sr / 2}")
    if n_mels < 1:
        raise ValueError("n_mels must be >= 1")

    edges_hz = mel_to_hz(np.linspace(hz_to_mel(f_min), hz_to_mel(f_max), n_mels + 2))
    fft_freqs = np.arange(n_fft // 2 + 1) * (sr / n_fft)

    lower = edges_hz[:-2, None]
    center = edges_hz[1:-1, None]
    upper = edges_hz[2:, None]
    rising = (fft_freqs[None, :] - lower) / (center - lower)
    falling = (upper - fft_freqs[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))
    return MelFilterbank(weights, float(f_min), float(f_max), edges_hz[1:-1].copy())


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II basis: row k is the k-th cosine, rows orthonormal."""
    k = np.arange(n)[:, None]
    m = np.arange(n)[None, :]
    basis = np.cos(np.pi * k * (2 * m + 1) / (2 * n))
    basis[0] *= np.sqrt(1.0 / n)
    basis[1:] *= np.sqrt(2.0 / n)
    return basis


def mfcc(seg, config: FeatureConfig = FeatureConfig()) -> MfccMatrix:
    """Extract the MFCC matrix of a 1-second segment (n_mfcc x n_frames)."""
    power = stft_power(seg, config.n_fft, config.hop, centered=True)
    bank = mel_filterbank(config.sample_rate, config.n_fft, config.n_mels, config.f_min, config.f_max)
    log_mel = np.log(bank.weights @ power + config.log_floor)
    coeffs = dct_matrix(config.n_mels) @ log_mel
    return MfccMatrix(coeffs[: config.n_mfcc], list(range(config.n_mfcc)))


def select_coefficients(m: MfccMatrix, indices: list[int]) -> MfccMatrix:
    """Keep a strictly increasing subset of coefficient rows."""
    if not indices:
        raise IndexOutOfRange("empty selection")
    if any(b <= a for a, b in zip(indices, indices[1:])):
        raise IndexOutOfRange(f"indices must be strictly increasing, got {indices}")
    if indices[0] < 0 or indices[-1] >= m.values.shape[0]:
        raise IndexOutOfRange(f"{indices} outside rows 0..{m.values.shape[0] - 1}")
    return MfccMatrix(m.values[indices].copy(), [m.coeff_indices[i] for i in indices])


PROLONGATION_COEFFS = [0, 12]
