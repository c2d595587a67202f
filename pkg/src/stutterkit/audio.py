"""WAV parsing/writing, resampling, and 1-second segmentation.

All audio inside the package is mono float64 in [-1, 1]. Files are
RIFF/WAVE, PCM (8/16/24-bit int or 32-bit float), 1 or 2 channels on
input; output is always 16-bit mono PCM. Recordings are canonicalized
to 22050 Hz before feature extraction so that a 1-second segment maps
to exactly 44 analysis frames.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import StutterKitError

CANONICAL_RATE = 22050

# Final partial segment is kept (zero-padded) iff it covers at least
# this fraction of a second.
TAIL_KEEP_FRACTION = 0.5


class MalformedHeader(StutterKitError):
    """RIFF/WAVE container structure is invalid."""


class UnsupportedEncoding(StutterKitError):
    """WAV format tag or sample layout this reader does not handle."""


@dataclass
class AudioClip:
    """Mono waveform with its sample rate. Samples live in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValueError("AudioClip samples must be 1-D mono")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class Segment:
    """Exactly one second of audio plus where it came from in the clip."""

    samples: np.ndarray
    sample_rate: int
    origin_offset: int
    padded: int = field(default=0)  # trailing zero samples added to fill 1 s

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if len(self.samples) != self.sample_rate:
            raise ValueError("segment must hold exactly one second of samples")
        if self.origin_offset % self.sample_rate != 0:
            raise ValueError("origin_offset must be a multiple of sample_rate")

    @property
    def offset_seconds(self) -> float:
        return self.origin_offset / self.sample_rate


_WAVE_FORMAT_PCM = 1
_WAVE_FORMAT_IEEE_FLOAT = 3
_WAVE_FORMAT_EXTENSIBLE = 0xFFFE


def parse_wav(data: bytes) -> AudioClip:
    """Decode a RIFF/WAVE byte string to a mono AudioClip.

    Stereo input is averaged to mono. Integer PCM is scaled by
    2**(bits-1); float PCM is taken as-is. Everything is clipped to
    [-1, 1] afterwards.
    """
    if len(data) < 12:
        raise MalformedHeader("file shorter than a RIFF header")
    if data[0:4] != b"RIFF":
        raise MalformedHeader(f"bad RIFF magic {data[0:4]!r}")
    if data[8:12] != b"WAVE":
        raise MalformedHeader(f"bad WAVE magic {data[8:12]!r}")

    fmt = None
    payload = None
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (chunk_size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + chunk_size]
        if chunk_id == b"fmt ":
            if chunk_size < 16 or len(body) < 16:
                raise MalformedHeader("fmt chunk too small")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif chunk_id == b"data":
            if len(body) < chunk_size:
                raise MalformedHeader("data chunk truncated")
            payload = body
        # chunks are word-aligned
        pos += 8 + chunk_size + (chunk_size & 1)

    if fmt is None:
        raise MalformedHeader("missing fmt chunk")
    if payload is None:
        raise MalformedHeader("missing data chunk")

    format_tag, n_channels, sample_rate, _byte_rate, _block_align, bits = fmt
    if format_tag == _WAVE_FORMAT_EXTENSIBLE:
        raise UnsupportedEncoding("WAVE_FORMAT_EXTENSIBLE is not supported")
    if format_tag not in (_WAVE_FORMAT_PCM, _WAVE_FORMAT_IEEE_FLOAT):
        raise UnsupportedEncoding(f"compressed/unknown format tag {format_tag}")
    if n_channels not in (1, 2):
        raise UnsupportedEncoding(f"{n_channels} channels (only mono/stereo)")
    if sample_rate <= 0:
        raise MalformedHeader("non-positive sample rate")

    if format_tag == _WAVE_FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncoding(f"{bits}-bit float PCM")
        raw = np.frombuffer(payload[: len(payload) - len(payload) % 4], dtype="<f4")
        samples = raw.astype(np.float64)
    else:
        if bits == 8:
            raw = np.frombuffer(payload, dtype=np.uint8)
            samples = (raw.astype(np.float64) - 128.0) / 128.0
        elif bits == 16:
            raw = np.frombuffer(payload[: len(payload) - len(payload) % 2], dtype="<i2")
            samples = raw.astype(np.float64) / 32768.0
        elif bits == 24:
            usable = len(payload) - len(payload) % 3
            triples = np.frombuffer(payload[:usable], dtype=np.uint8).reshape(-1, 3)
            vals = (
                triples[:, 0].astype(np.int32)
                | (triples[:, 1].astype(np.int32) << 8)
                | (triples[:, 2].astype(np.int32) << 16)
            )
            vals = np.where(vals >= 1 << 23, vals - (1 << 24), vals)
            samples = vals.astype(np.float64) / float(1 << 23)
        else:
            raise UnsupportedEncoding(f"{bits}-bit integer PCM")

    if n_channels == 2:
        samples = samples[: len(samples) - len(samples) % 2]
        samples = samples.reshape(-1, 2).mean(axis=1)

    return AudioClip(np.clip(samples, -1.0, 1.0), int(sample_rate))


def write_wav(clip: AudioClip) -> bytes:
    """Encode a clip as 16-bit mono PCM RIFF/WAVE bytes.

    Rounding is half away from zero, so parse_wav(write_wav(c)) matches
    c to within one quantization step (1/32768) per sample.
    """
    if len(clip.samples) == 0:
        raise ValueError("refusing to write an empty clip")
    scaled = clip.samples * 32768.0
    quantized = np.sign(scaled) * np.floor(np.abs(scaled) + 0.5)
    pcm = np.clip(quantized, -32768, 32767).astype("<i2")
    payload = pcm.tobytes()

    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF",
        36 + len(payload),
        b"WAVE",
        b"fmt ",
        16,
        _WAVE_FORMAT_PCM,
        1,
        clip.sample_rate,
        clip.sample_rate * 2,
        2,
        16,
        b"data",
        len(payload),
    )
    return header + payload


def read_wav_file(path: str | Path) -> AudioClip:
    return parse_wav(Path(path).read_bytes())


def write_wav_file(clip: AudioClip, path: str | Path) -> None:
    Path(path).write_bytes(write_wav(clip))


def resample(clip: AudioClip, target_rate: int) -> AudioClip:
    """Linear-interpolation resample. Identity when rates already match."""
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if target_rate == clip.sample_rate:
        return AudioClip(clip.samples.copy(), clip.sample_rate)
    n_out = int(round(len(clip.samples) * target_rate / clip.sample_rate))
    if n_out == 0 or len(clip.samples) == 0:
        return AudioClip(np.zeros(0), target_rate)
    positions = np.arange(n_out) * (clip.sample_rate / target_rate)
    out = np.interp(positions, np.arange(len(clip.samples)), clip.samples)
    return AudioClip(out, target_rate)


def segment(clip: AudioClip) -> list[Segment]:
    """Tile a clip into non-overlapping 1-second segments.

    A trailing partial window is zero-padded and kept when it covers at
    least half a second, dropped otherwise.
    """
    rate = clip.sample_rate
    n = len(clip.samples)
    segments = []
    for start in range(0, n, rate):
        chunk = clip.samples[start : start + rate]
        if len(chunk) == rate:
            segments.append(Segment(chunk.copy(), rate, start))
        elif 2 * len(chunk) >= rate:
            padded = np.zeros(rate)
            padded[: len(chunk)] = chunk
            segments.append(Segment(padded, rate, start, padded=rate - len(chunk)))
    return segments


@dataclass
class ManifestRow:
    """One ingestion entry: a wav path plus optional per-kind labels (None = NA)."""

    path: str
    label_prolongation: int | None
    label_repetition: int | None


MANIFEST_HEADER = ["path", "label_prolongation", "label_repetition"]


def _parse_label(text: str) -> int | None:
    text = text.strip()
    if text.upper() == "NA":
        return None
    if text in ("0", "1"):
        return int(text)
    raise ValueError(f"manifest label must be 0, 1 or NA, got {text!r}")


def read_manifest(path: str | Path) -> list[ManifestRow]:
    """Read a labeled-corpus manifest CSV; relative wav paths resolve against it."""
    path = Path(path)
    base = path.parent
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != MANIFEST_HEADER:
            raise ValueError(f"manifest header must be {','.join(MANIFEST_HEADER)}")
        for record in reader:
            if not record:
                continue
            wav_path = record[0]
            if not Path(wav_path).is_absolute():
                wav_path = str(base / wav_path)
            rows.append(ManifestRow(wav_path, _parse_label(record[1]), _parse_label(record[2])))
    return rows


def write_manifest(rows: list[ManifestRow], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(MANIFEST_HEADER)
        for row in rows:
            fmt = lambda v: "NA" if v is None else str(v)
            writer.writerow([row.path, fmt(row.label_prolongation), fmt(row.label_repetition)])
