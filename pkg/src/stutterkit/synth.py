"""Deterministic synthetic audio corpus: prolongation, repetition, fluent, noise.

Every generator is a pure function of (seed, seconds) at the canonical
sample rate, so corpora are bit-reproducible. The archetypes are
engineered for their measurable signatures, not for voice realism:
sustained harmonics (low spectral flux), periodic bursts (strong
envelope autocorrelation), irregular syllables, and shaped noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .audio import AudioClip, CANONICAL_RATE, ManifestRow, write_manifest, write_wav_file
from .errors import IoFailure
from .features import stft_power

_FADE_S = 0.01


@dataclass(frozen=True)
class CorpusSpec:
    n_clips: int
    ratio_stutter: float = 0.25
    seed: int = 0
    clip_seconds: float = 3.0

    def __post_init__(self):
        if self.n_clips < 4:
            raise ValueError("need at least 4 clips so every class appears")
        if not 0.0 < self.ratio_stutter < 1.0:
            raise ValueError("ratio_stutter must be in (0, 1)")
        if self.clip_seconds < 1.0:
            raise ValueError("clips must be at least 1 second")


def _fade(signal: np.ndarray, sr: int, fade_s: float = _FADE_S) -> np.ndarray:
    n = min(len(signal) // 2, max(1, int(fade_s * sr)))
    ramp = np.linspace(0.0, 1.0, n)
    signal[:n] *= ramp
    signal[-n:] *= ramp[::-1]
    return signal


def _harmonic_tone(rng, f0: float, n: int, sr: int, harmonics: int = 3) -> np.ndarray:
    t = np.arange(n) / sr
    tone = np.zeros(n)
    for k in range(1, harmonics + 1):
        amp = rng.uniform(0.8, 1.2) / k
        tone += amp * np.sin(2.0 * np.pi * k * f0 * t + rng.uniform(0.0, 2.0 * np.pi))
    return tone


def _scale_to_rms(samples: np.ndarray, target_rms: float) -> np.ndarray:
    rms = float(np.sqrt(np.mean(samples**2)))
    if rms > 0:
        samples = samples * (target_rms / rms)
    peak = float(np.max(np.abs(samples)))
    if peak > 0.95:
        samples = samples * (0.95 / peak)
    return samples


def gen_prolongation_clip(seed: int, seconds: float = 3.0, sr: int = CANONICAL_RATE) -> AudioClip:
    """Sustained harmonic tone with slow amplitude jitter, held >= 80% of the clip."""
    if seconds < 1.0:
        raise ValueError("clips must be at least 1 second")
    rng = np.random.default_rng(seed)
    n = round(seconds * sr)
    lead = int(rng.uniform(0.0, 0.08) * n)
    tail = int(rng.uniform(0.0, 0.08) * n)
    tone_n = n - lead - tail

    tone = _harmonic_tone(rng, rng.uniform(90.0, 250.0), tone_n, sr)
    t = np.arange(tone_n) / sr
    jitter = 1.0 + 0.15 * np.sin(2.0 * np.pi * rng.uniform(0.3, 1.0) * t + rng.uniform(0.0, 2.0 * np.pi))
    tone = _fade(tone * jitter, sr)

    samples = np.zeros(n)
    samples[lead : lead + tone_n] = tone
    return AudioClip(_scale_to_rms(samples, rng.uniform(0.15, 0.3)), sr)


def gen_repetition_clip(seed: int, seconds: float = 3.0, sr: int = CANONICAL_RATE) -> AudioClip:
    """Identical voiced bursts on a fixed period, at least 4 bursts per second."""
    if seconds < 1.0:
        raise ValueError("clips must be at least 1 second")
    rng = np.random.default_rng(seed)
    n = round(seconds * sr)

    burst_s = rng.uniform(0.06, 0.13)
    gap_s = rng.uniform(0.05, min(0.12, 0.25 - burst_s))
    burst_n = round(burst_s * sr)
    period = burst_n + round(gap_s * sr)

    burst = _fade(_harmonic_tone(rng, rng.uniform(90.0, 250.0), burst_n, sr), sr, 0.005)
    samples = np.zeros(n)
    start = round(gap_s * sr / 2)
    while start + burst_n <= n:
        samples[start : start + burst_n] = burst
        start += period
    return AudioClip(_scale_to_rms(samples, rng.uniform(0.15, 0.3)), sr)


def gen_fluent_clip(seed: int, seconds: float = 3.0, sr: int = CANONICAL_RATE) -> AudioClip:
    """Syllable-like alternation: varying pitch and duration, natural pauses."""
    if seconds < 1.0:
        raise ValueError("clips must be at least 1 second")
    rng = np.random.default_rng(seed)
    n = round(seconds * sr)

    samples = np.zeros(n)
    pos = round(rng.uniform(0.0, 0.05) * sr)
    while pos < n:
        syl_n = round(rng.uniform(0.12, 0.30) * sr)
        syl_n = min(syl_n, n - pos)
        if syl_n > int(0.02 * sr):
            tone = _harmonic_tone(rng, rng.uniform(100.0, 280.0), syl_n, sr, harmonics=4)
            samples[pos : pos + syl_n] = _fade(tone, sr)
        pos += syl_n
        if rng.random() < 0.25:
            pos += round(rng.uniform(0.10, 0.25) * sr)  # longer pause
        else:
            pos += round(rng.uniform(0.01, 0.06) * sr)
    return AudioClip(_scale_to_rms(samples, rng.uniform(0.15, 0.3)), sr)


def gen_noise_clip(seed: int, seconds: float = 3.0, sr: int = CANONICAL_RATE) -> AudioClip:
    """Spectrally shaped broadband noise with a flat envelope."""
    if seconds < 1.0:
        raise ValueError("clips must be at least 1 second")
    rng = np.random.default_rng(seed)
    n = round(seconds * sr)
    white = rng.standard_normal(n)
    # lowpass tilt (truncated one-pole impulse response) shapes the
    # spectrum without modulating the envelope
    pole = rng.uniform(0.7, 0.9)
    kernel = (1.0 - pole) * pole ** np.arange(200)
    shaped = np.convolve(white, kernel, mode="same")
    return AudioClip(_scale_to_rms(shaped, rng.uniform(0.1, 0.2)), sr)


def spectral_flux(clip: AudioClip, n_fft: int = 2048, hop: int = 512) -> float:
    """Mean frame-to-frame L1 power-spectrum delta over interior frames."""
    power = stft_power(clip.samples, n_fft, hop, centered=True)
    deltas = np.abs(np.diff(power, axis=1)).sum(axis=0)
    interior = deltas[1:-1] if len(deltas) > 2 else deltas
    return float(np.mean(interior))


def envelope_autocorr_peak(
    clip: AudioClip,
    min_lag_s: float = 0.05,
    max_lag_s: float = 0.4,
    smooth_s: float = 0.01,
    decimate: int = 16,
) -> float:
    """Largest normalized autocovariance of the amplitude envelope away from lag 0.

    The envelope is |x| smoothed over ~10 ms and mean-removed, so a flat
    envelope scores ~0 and a periodic burst train scores near 1 at its
    period.
    """
    window = max(1, round(smooth_s * clip.sample_rate))
    env = np.convolve(np.abs(clip.samples), np.ones(window) / window, mode="valid")[::decimate]
    env = env - env.mean()
    denom = float(env @ env)
    if denom <= 0:
        return 0.0
    rate = clip.sample_rate / decimate
    lags = range(max(1, round(min_lag_s * rate)), min(len(env) - 1, round(max_lag_s * rate)) + 1)
    best = 0.0
    for lag in lags:
        value = float(env[:-lag] @ env[lag:]) / denom
        best = max(best, value)
    return best


_STUTTER_CLASSES = ("prolongation", "repetition")
_GENERATORS = {
    "prolongation": gen_prolongation_clip,
    "repetition": gen_repetition_clip,
    "fluent": gen_fluent_clip,
    "noise": gen_noise_clip,
}

# fraction of non-stutter clips that are background noise only
_NOISE_SHARE = 0.1


def corpus_plan(spec: CorpusSpec) -> list[str]:
    """Class name per clip index, honoring the stutter ratio within +-1 clip."""
    n_stutter = round(spec.ratio_stutter * spec.n_clips)
    n_stutter = min(max(n_stutter, 2), spec.n_clips - 2)  # every class appears
    n_pro = math.ceil(n_stutter / 2)
    n_rep = n_stutter - n_pro
    n_rest = spec.n_clips - n_stutter
    n_noise = max(1, round(_NOISE_SHARE * n_rest))
    n_fluent = n_rest - n_noise
    return (["prolongation"] * n_pro + ["repetition"] * n_rep
            + ["fluent"] * n_fluent + ["noise"] * n_noise)


def build_corpus(spec: CorpusSpec, out_dir: str | Path) -> Path:
    """Write one WAV per clip plus the ingestion manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        counters: dict[str, int] = {}
        for index, cls in enumerate(corpus_plan(spec)):
            idx = counters.get(cls, 0)
            counters[cls] = idx + 1
            clip = _GENERATORS[cls](spec.seed * 1_000_003 + index, spec.clip_seconds)
            name = f"{cls}_{idx:03d}.wav"
            write_wav_file(clip, out_dir / name)
            rows.append(
                ManifestRow(
                    name,
                    1 if cls == "prolongation" else 0,
                    1 if cls == "repetition" else 0,
                )
            )
        manifest_path = out_dir / "manifest.csv"
        write_manifest(rows, manifest_path)
    except OSError as exc:
        raise IoFailure(f"cannot write corpus to {out_dir}: {exc}") from exc
    return manifest_path
