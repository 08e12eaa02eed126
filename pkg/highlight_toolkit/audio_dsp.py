"""Mel-spectrogram encoding of audio chunks.

Audio chunks are turned into p x q images (p Mel bands, q STFT frames) scaled
to [0, 1] relative to the loudest cell, so the encoding is gain invariant.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf
from numpy.lib.stride_tricks import sliding_window_view

from ._errors import BoundsError, ConfigurationError, FormatError, InvalidInputError
from .models import ChunkWindow

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Added to Mel energies before taking logarithms
EPS_NUM = 1e-10


@dataclass(frozen=True)
class PcmSignal:
    """Mono PCM samples in [-1, 1]."""
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise InvalidInputError("PCM samples must be a 1-D array (downmix first)")
        if self.sample_rate_hz <= 0:
            raise InvalidInputError(f"Sample rate must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(samples)):
            raise InvalidInputError("PCM samples must be finite")
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return int(self.samples.size)

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def chunk(self, window: ChunkWindow) -> "PcmSignal":
        """Samples of [start_s, start_s + length_s)."""
        start = window.start_s * self.sample_rate_hz
        stop = (window.start_s + window.length_s) * self.sample_rate_hz
        if stop > len(self):
            raise BoundsError(
                f"Window [{window.start_s}, {window.end_s}] exceeds signal of {self.duration_s:.3f} s"
            )
        return PcmSignal(self.samples[start:stop], self.sample_rate_hz)


@dataclass(frozen=True)
class MelConfig:
    """STFT and Mel filterbank parameters."""
    sample_rate_hz: int = 16000
    fft_size: int = 1024
    hop_size: int = 512
    mel_bins: int = 64
    fmin_hz: float = 0.0
    fmax_hz: float = 8000.0
    db_floor: float = -80.0

    def __post_init__(self):
        if self.sample_rate_hz <= 0:
            raise ConfigurationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ConfigurationError(f"fft_size must be a power of two, got {self.fft_size}")
        if self.hop_size < 1:
            raise ConfigurationError(f"hop_size must be >= 1, got {self.hop_size}")
        if not 0.0 <= self.fmin_hz < self.fmax_hz <= self.sample_rate_hz / 2:
            raise ConfigurationError(
                f"Need 0 <= fmin < fmax <= sr/2, got fmin={self.fmin_hz}, fmax={self.fmax_hz}"
            )
        if self.mel_bins < 2:
            raise ConfigurationError(f"mel_bins must be >= 2, got {self.mel_bins}")
        if self.db_floor >= 0:
            raise ConfigurationError(f"db_floor must be negative, got {self.db_floor}")

    def num_frames(self, num_samples: int) -> int:
        return 1 + (num_samples - self.fft_size) // self.hop_size

    def output_shape(self, chunk_seconds: int) -> tuple:
        """(p, q) of the spectrogram of a chunk_seconds-long signal."""
        return self.mel_bins, self.num_frames(chunk_seconds * self.sample_rate_hz)


@dataclass(frozen=True)
class MelSpectrogram:
    values: np.ndarray
    config: MelConfig

    @property
    def shape(self) -> tuple:
        return self.values.shape


def hz_to_mel(f: ArrayLike) -> ArrayLike:
    """HTK Mel scale: m = 2595 * log10(1 + f / 700)."""
    f_arr = np.asarray(f, dtype=np.float64)
    if np.any(f_arr < 0):
        raise InvalidInputError("Frequencies must be non-negative")
    mel = 2595.0 * np.log10(1.0 + f_arr / 700.0)
    return float(mel) if mel.ndim == 0 else mel


def mel_to_hz(m: ArrayLike) -> ArrayLike:
    m_arr = np.asarray(m, dtype=np.float64)
    if np.any(m_arr < 0):
        raise InvalidInputError("Mel values must be non-negative")
    hz = 700.0 * (10.0 ** (m_arr / 2595.0) - 1.0)
    return float(hz) if hz.ndim == 0 else hz


def fft_frequencies(config: MelConfig) -> np.ndarray:
    return np.arange(config.fft_size // 2 + 1) * config.sample_rate_hz / config.fft_size


def mel_filterbank(config: MelConfig) -> np.ndarray:
    """Triangular filters, linear in the Mel coordinate, over mel-equispaced centers.

    Returns a mel_bins x (fft_size / 2 + 1) matrix.
    """
    mel_points = np.linspace(hz_to_mel(config.fmin_hz), hz_to_mel(config.fmax_hz), config.mel_bins + 2)
    bin_mels = hz_to_mel(fft_frequencies(config))

    lower = mel_points[:-2, None]
    center = mel_points[1:-1, None]
    upper = mel_points[2:, None]
    rising = (bin_mels[None, :] - lower) / (center - lower)
    falling = (upper - bin_mels[None, :]) / (upper - center)
    weights = np.maximum(0.0, np.minimum(rising, falling))

    peaks = np.argmax(weights, axis=1)
    if np.any(weights.max(axis=1) <= 0.0) or np.any(np.diff(peaks) <= 0):
        raise ConfigurationError(
            f"{config.mel_bins} Mel bins are too many for fft_size={config.fft_size} "
            f"over [{config.fmin_hz}, {config.fmax_hz}] Hz"
        )
    return weights


def _hann(size: int) -> np.ndarray:
    # periodic Hann
    n = np.arange(size)
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * n / size)


def power_spectrogram(signal: PcmSignal, config: MelConfig) -> np.ndarray:
    """Squared magnitude of the one-sided DFT of Hann-windowed frames; (fft_size/2 + 1) x q."""
    if len(signal) < config.fft_size:
        raise InvalidInputError(
            f"Signal of {len(signal)} samples is shorter than fft_size={config.fft_size}"
        )
    frames = sliding_window_view(signal.samples, config.fft_size)[::config.hop_size]
    spectrum = np.fft.rfft(frames * _hann(config.fft_size), axis=1)
    return (np.abs(spectrum) ** 2).T


def mel_spectrogram(signal: PcmSignal, config: MelConfig, filterbank: np.ndarray = None) -> MelSpectrogram:
    """Normalized Mel-spectrogram: dB relative to the matrix max, floor -> 0.0 and max -> 1.0."""
    if signal.sample_rate_hz != config.sample_rate_hz:
        raise InvalidInputError(
            f"Signal at {signal.sample_rate_hz} Hz, config expects {config.sample_rate_hz} Hz; resample first"
        )
    if filterbank is None:
        filterbank = mel_filterbank(config)
    mel = filterbank @ power_spectrogram(signal, config)

    if mel.max() <= EPS_NUM:
        return MelSpectrogram(np.zeros_like(mel), config)

    db = 10.0 * np.log10(mel + EPS_NUM)
    db = np.clip(db - db.max(), config.db_floor, 0.0)
    values = (db - config.db_floor) / -config.db_floor
    return MelSpectrogram(values, config)


def resample_linear(signal: PcmSignal, target_rate_hz: int) -> PcmSignal:
    """Linear-interpolation resampler; not band-limited."""
    if target_rate_hz <= 0:
        raise InvalidInputError(f"Target rate must be positive, got {target_rate_hz}")
    if target_rate_hz == signal.sample_rate_hz:
        return signal
    num_out = int(len(signal) * target_rate_hz // signal.sample_rate_hz)
    t_out = np.arange(num_out) / target_rate_hz
    t_in = np.arange(len(signal)) / signal.sample_rate_hz
    return PcmSignal(np.interp(t_out, t_in, signal.samples), target_rate_hz)


def read_wav(path: Union[str, Path]) -> PcmSignal:
    """Read a 16-bit PCM WAV file, downmixing stereo by averaging."""
    path = Path(path)
    try:
        info = sf.info(str(path))
    except RuntimeError as e:
        raise FormatError(f"{path} is not a readable WAV file: {e}") from e
    if info.format != "WAV" or info.subtype != "PCM_16":
        raise FormatError(f"{path}: expected 16-bit PCM WAV, got {info.format}/{info.subtype}")
    if info.channels not in (1, 2):
        raise FormatError(f"{path}: expected mono or stereo, got {info.channels} channels")

    data, sample_rate = sf.read(str(path), dtype="int16", always_2d=True)
    samples = data.astype(np.float64) / 32768.0
    if samples.shape[1] == 2:
        samples = (samples[:, 0] + samples[:, 1]) / 2.0
    else:
        samples = samples[:, 0]
    return PcmSignal(samples, int(sample_rate))


def write_wav(signal: PcmSignal, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pcm = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype(np.int16)
    sf.write(str(path), pcm, signal.sample_rate_hz, subtype="PCM_16", format="WAV")


def load_audio(path: Union[str, Path], config: MelConfig) -> PcmSignal:
    """Read a WAV file and bring it to the configured sample rate."""
    signal = read_wav(path)
    if signal.sample_rate_hz != config.sample_rate_hz:
        logger.info(f"Resampling {path} from {signal.sample_rate_hz} Hz to {config.sample_rate_hz} Hz")
        signal = resample_linear(signal, config.sample_rate_hz)
    return signal


class AudioChunkEncoder:
    """Encodes windows of one recording as (p, q, 1) model inputs."""

    def __init__(self, signal: PcmSignal, config: MelConfig):
        if signal.sample_rate_hz != config.sample_rate_hz:
            signal = resample_linear(signal, config.sample_rate_hz)
        self.signal = signal
        self.config = config
        self.filterbank = mel_filterbank(config)

    @property
    def duration_s(self) -> int:
        return len(self.signal) // self.config.sample_rate_hz

    def __call__(self, window: ChunkWindow) -> np.ndarray:
        spec = mel_spectrogram(self.signal.chunk(window), self.config, self.filterbank)
        return spec.values[:, :, None]
