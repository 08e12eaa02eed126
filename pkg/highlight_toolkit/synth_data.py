"""Seeded synthetic match recordings with planted highlights.

Each recording gets highlight annotations drawn from (seed, index) alone, so
the audio and video corpora of one configuration describe the same matches.
Audio highlights are crowd roars with voice-band harmonics over pink noise;
video highlights are a bright blob entering an event region of a slowly
drifting gradient background.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, FrozenSet, List, Tuple, Union

import numpy as np

from ._errors import ConfigurationError, FormatError
from .audio_dsp import PcmSignal, write_wav
from .models import HighlightInterval, HighlightSet, Modality
from .timeline import label_chunk, make_windows, save_annotations
from .video_prep import FrameSequence, save_frames

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
BACKGROUND_LEVEL = 0.02
# stream ids for np.random.default_rng([seed, index, stream])
_HIGHLIGHTS, _AUDIO, _VIDEO = 0, 1, 2
_BALANCE_STREAM = 1_000_003


@dataclass(frozen=True)
class AudioSynthConfig:
    sample_rate_hz: int = 16000
    crowd_snr_db: float = 12.0


@dataclass(frozen=True)
class VideoSynthConfig:
    fps: int = 5
    height: int = 96
    width: int = 128
    # top, left, bottom, right in pixels
    event_region: Tuple[int, int, int, int] = (24, 80, 72, 128)


@dataclass(frozen=True)
class SynthConfig:
    num_recordings: int = 70
    recording_length_s: int = 60
    highlights_per_recording: int = 2
    k: int = 5
    seed: int = 0
    audio: AudioSynthConfig = field(default_factory=AudioSynthConfig)
    video: VideoSynthConfig = field(default_factory=VideoSynthConfig)
    min_highlight_s: int = 6
    max_highlight_s: int = 10
    corrupt_audio: FrozenSet[int] = frozenset()
    corrupt_video: FrozenSet[int] = frozenset()
    # fraction of the highlight signature kept in corrupted recordings
    corruption_strength: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "corrupt_audio", frozenset(self.corrupt_audio))
        object.__setattr__(self, "corrupt_video", frozenset(self.corrupt_video))
        if self.num_recordings < 1:
            raise ConfigurationError(f"num_recordings must be >= 1, got {self.num_recordings}")
        if self.k < 1 or self.k > self.recording_length_s:
            raise ConfigurationError(f"k={self.k} invalid for {self.recording_length_s} s recordings")
        if self.highlights_per_recording < 0:
            raise ConfigurationError("highlights_per_recording must be >= 0")
        if not 2 <= self.min_highlight_s <= self.max_highlight_s:
            raise ConfigurationError(
                f"Need 2 <= min_highlight_s <= max_highlight_s, got {self.min_highlight_s}, {self.max_highlight_s}"
            )
        h = self.highlights_per_recording
        if h and h * self.max_highlight_s + (h - 1) > self.recording_length_s:
            raise ConfigurationError(
                f"{h} highlights of up to {self.max_highlight_s} s with 1 s gaps do not fit "
                f"in {self.recording_length_s} s"
            )
        if not 0.0 <= self.corruption_strength <= 1.0:
            raise ConfigurationError(f"corruption_strength must be in [0, 1], got {self.corruption_strength}")
        top, left, bottom, right = self.video.event_region
        if not (0 <= top < bottom <= self.video.height and 0 <= left < right <= self.video.width):
            raise ConfigurationError(f"event_region {self.video.event_region} outside the frame")


def default_audio_config(seed: int = 0) -> SynthConfig:
    """70 recordings of 60 s: roughly 700 balanced 5 s audio chunks."""
    return SynthConfig(num_recordings=70, seed=seed)


def default_video_config(seed: int = 0) -> SynthConfig:
    """100 recordings of 60 s: roughly 1000 balanced 5 s video chunks."""
    return SynthConfig(num_recordings=100, seed=seed)


def corruption_indices(num_recordings: int, which: str) -> FrozenSet[int]:
    """Recording indices for the CLI corruption choices none, first-half, second-half, all."""
    half = num_recordings // 2
    choices = {
        "none": range(0),
        "first-half": range(half),
        "second-half": range(half, num_recordings),
        "all": range(num_recordings),
    }
    if which not in choices:
        raise ConfigurationError(f"Unknown corruption choice {which!r}")
    return frozenset(choices[which])


@dataclass(frozen=True)
class ChunkRecord:
    recording: str
    start_s: int
    length_s: int
    label: int

    def to_dict(self) -> dict:
        return {"recording": self.recording, "start_s": self.start_s, "length_s": self.length_s, "label": self.label}


@dataclass
class Corpus:
    root: Path
    recordings: List[str]
    annotations: Dict[str, HighlightSet]
    chunks: List[ChunkRecord]


def recording_id(index: int) -> str:
    return f"rec_{index:04d}"


def place_highlights(config: SynthConfig, index: int) -> HighlightSet:
    """Highlights with random lengths, separated by at least one non-highlight second."""
    rng = np.random.default_rng([config.seed, index, _HIGHLIGHTS])
    h = config.highlights_per_recording
    if h == 0:
        return HighlightSet((), config.recording_length_s)
    lengths = rng.integers(config.min_highlight_s, config.max_highlight_s + 1, size=h)
    slack = config.recording_length_s - int(lengths.sum()) - (h - 1)
    cuts = np.sort(rng.integers(0, slack + 1, size=h))
    gaps = np.diff(np.concatenate(([0], cuts)))
    intervals = []
    start = 0
    for gap, length in zip(gaps, lengths):
        start += int(gap)
        intervals.append(HighlightInterval(start, start + int(length) - 1))
        start += int(length) + 1
    return HighlightSet(tuple(intervals), config.recording_length_s)


def pink_noise(num_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-RMS noise with a 1/f power spectrum."""
    spectrum = np.fft.rfft(rng.standard_normal(num_samples))
    freqs = np.arange(spectrum.size, dtype=np.float64)
    freqs[0] = 1.0
    noise = np.fft.irfft(spectrum / np.sqrt(freqs), n=num_samples)
    return noise / np.sqrt(np.mean(noise ** 2))


def _envelope(num_samples: int, sample_rate: int, highlights: HighlightSet, ramp_s: float = 0.25) -> np.ndarray:
    envelope = np.zeros(num_samples)
    ramp = int(ramp_s * sample_rate)
    for interval in highlights:
        a, b = interval.start_s * sample_rate, (interval.end_s + 1) * sample_rate
        segment = np.ones(b - a)
        segment[:ramp] = np.linspace(0.0, 1.0, ramp)
        segment[-ramp:] = np.minimum(segment[-ramp:], np.linspace(1.0, 0.0, ramp))
        envelope[a:b] = segment
    return envelope


def synth_audio(config: SynthConfig, index: int, highlights: HighlightSet) -> PcmSignal:
    rng = np.random.default_rng([config.seed, index, _AUDIO])
    sr = config.audio.sample_rate_hz
    n = config.recording_length_s * sr
    t = np.arange(n) / sr
    signal = BACKGROUND_LEVEL * pink_noise(n, rng)

    strength = config.corruption_strength if index in config.corrupt_audio else 1.0
    if len(highlights) and strength > 0.0:
        gain = 10.0 ** (config.audio.crowd_snr_db / 20.0)
        envelope = _envelope(n, sr, highlights)
        roar = BACKGROUND_LEVEL * (gain - 1.0) * pink_noise(n, rng)
        voice = np.zeros(n)
        f0 = rng.uniform(200.0, 300.0)
        vibrato = 1.0 + 0.02 * np.sin(2.0 * np.pi * rng.uniform(3.0, 6.0) * t)
        phase = 2.0 * np.pi * np.cumsum(f0 * vibrato) / sr
        for harmonic in range(1, int(900.0 // f0) + 1):
            voice += np.sin(harmonic * phase + rng.uniform(0, 2 * np.pi)) / harmonic
        voice *= 0.5 * BACKGROUND_LEVEL * gain
        signal = signal + strength * envelope * (roar + voice)
    return PcmSignal(np.clip(signal, -1.0, 1.0), sr)


def synth_frames(config: SynthConfig, index: int, highlights: HighlightSet) -> FrameSequence:
    rng = np.random.default_rng([config.seed, index, _VIDEO])
    vc = config.video
    num_frames = config.recording_length_s * vc.fps
    yy, xx = np.mgrid[0:vc.height, 0:vc.width].astype(np.float64)

    drift = rng.uniform(0.01, 0.03)
    tilt = rng.uniform(0.02, 0.08)
    top, left, bottom, right = vc.event_region
    # distractor wanders on the far side of the frame
    walk = np.cumsum(rng.normal(0.0, 1.5, size=(num_frames, 2)), axis=0)
    distractor_y = np.clip(vc.height / 2 + walk[:, 0], 8, vc.height - 8)
    distractor_x = np.clip(left / 3 + walk[:, 1], 8, max(9, left - 24))

    strength = config.corruption_strength if index in config.corrupt_video else 1.0
    blob_track = np.full((num_frames, 3), np.nan)
    for interval in highlights:
        first, last = interval.start_s * vc.fps, (interval.end_s + 1) * vc.fps
        target_y = rng.uniform(top + 6, bottom - 6)
        target_x = (left + right) / 2
        progress = np.linspace(0.0, 1.0, last - first)
        blob_track[first:last, 0] = target_y
        blob_track[first:last, 1] = (left - 12) + progress * (target_x - (left - 12))
        blob_track[first:last, 2] = 0.7 * strength

    frames = np.empty((num_frames, vc.height, vc.width))
    for f in range(num_frames):
        seconds = f / vc.fps
        frame = 0.3 + 0.1 * np.sin(2.0 * np.pi * (1.5 * xx / vc.width + drift * seconds)) + tilt * yy / vc.height
        frame += 0.25 * np.exp(-((yy - distractor_y[f]) ** 2 + (xx - distractor_x[f]) ** 2) / (2 * 5.0 ** 2))
        if not np.isnan(blob_track[f, 0]):
            by, bx, amp = blob_track[f]
            frame += amp * np.exp(-((yy - by) ** 2 + (xx - bx) ** 2) / (2 * 7.0 ** 2))
        frame += rng.normal(0.0, 0.02, size=frame.shape)
        frames[f] = np.clip(frame, 0.0, 1.0)
    return FrameSequence(frames, vc.fps)


def chunk_records(config: SynthConfig, rec_id: str, highlights: HighlightSet) -> List[ChunkRecord]:
    """Non-overlapping k-second chunks labeled by intersection with the annotation."""
    return [
        ChunkRecord(rec_id, w.start_s, w.length_s, label_chunk(w, highlights))
        for w in make_windows(config.recording_length_s, config.k, config.k)
    ]


def balance_chunks(chunks: List[ChunkRecord], seed: int) -> List[ChunkRecord]:
    """Subsample the majority label so positives and negatives are equal in number."""
    rng = np.random.default_rng([seed, _BALANCE_STREAM])
    positives = [c for c in chunks if c.label == 1]
    negatives = [c for c in chunks if c.label == 0]
    n = min(len(positives), len(negatives))
    keep_pos = np.sort(rng.permutation(len(positives))[:n])
    keep_neg = np.sort(rng.permutation(len(negatives))[:n])
    kept = [positives[i] for i in keep_pos] + [negatives[i] for i in keep_neg]
    return sorted(kept, key=lambda c: (c.recording, c.start_s))


def _write_manifest(root: Path, config: SynthConfig, modality: Modality, rec_ids: List[str],
                    chunks: List[ChunkRecord]) -> None:
    path = root / MANIFEST_NAME
    manifest = {}
    if path.exists():
        try:
            manifest = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise FormatError(f"Existing manifest {path} is not valid JSON: {e}") from e
        if manifest.get("seed") != config.seed or manifest.get("recording_length_s") != config.recording_length_s:
            logger.warning(f"Replacing manifest {path} written with a different seed or recording length")
            manifest = {}

    recordings = {r["id"]: r for r in manifest.get("recordings", [])}
    for rec_id in rec_ids:
        entry = recordings.setdefault(rec_id, {"id": rec_id, "annotation": f"annotations/{rec_id}.json"})
        if modality == "audio":
            entry["audio"] = f"audio/{rec_id}.wav"
        else:
            entry["frames"] = f"video/{rec_id}"

    manifest.update({
        "seed": config.seed,
        "k": config.k,
        "recording_length_s": config.recording_length_s,
        "recordings": [recordings[r] for r in sorted(recordings)],
    })
    manifest.setdefault("chunks", {})[modality] = [c.to_dict() for c in chunks]
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def _generate(config: SynthConfig, root: Union[str, Path], modality: Modality, jobs: int) -> Corpus:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)

    def build(index: int):
        rec_id = recording_id(index)
        highlights = place_highlights(config, index)
        save_annotations(highlights, root / "annotations" / f"{rec_id}.json")
        if modality == "audio":
            write_wav(synth_audio(config, index, highlights), root / "audio" / f"{rec_id}.wav")
        else:
            save_frames(synth_frames(config, index, highlights), root / "video" / rec_id)
        logger.info(f"Generated {modality} recording {rec_id} with {len(highlights)} highlight(s)")
        return rec_id, highlights

    indices = range(config.num_recordings)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            built = list(pool.map(build, indices))
    else:
        built = [build(i) for i in indices]

    annotations = dict(built)
    rec_ids = [rec_id for rec_id, _ in built]
    all_chunks = [c for rec_id, hs in built for c in chunk_records(config, rec_id, hs)]
    chunks = balance_chunks(all_chunks, config.seed)
    _write_manifest(root, config, modality, rec_ids, chunks)
    logger.info(f"{modality} corpus at {root}: {len(rec_ids)} recordings, {len(chunks)} balanced chunks")
    return Corpus(root, rec_ids, annotations, chunks)


def gen_audio_corpus(config: SynthConfig, root: Union[str, Path], jobs: int = 1) -> Corpus:
    """WAV recordings, annotations, and a label-balanced chunk list in the manifest."""
    return _generate(config, root, "audio", jobs)


def gen_video_corpus(config: SynthConfig, root: Union[str, Path], jobs: int = 1) -> Corpus:
    """PGM frame directories, annotations, and a label-balanced chunk list in the manifest."""
    return _generate(config, root, "video", jobs)


def load_manifest(root: Union[str, Path]) -> dict:
    path = Path(root)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.exists():
        raise FileNotFoundError(f"Corpus manifest not found: {path}")
    try:
        manifest = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e}") from e
    for key in ("recordings", "chunks", "k"):
        if key not in manifest:
            raise FormatError(f"{path} lacks the {key!r} entry")
    manifest["_root"] = str(path.parent)
    return manifest
