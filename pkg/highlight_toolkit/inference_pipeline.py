"""Sliding-window highlight detection over long recordings.

Steps: window the audio and frame sources, score every window with the
modality model, average window scores per second, fuse the audio and video
timelines, threshold, and keep runs that satisfy the minimum length.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ._errors import ConfigurationError, CoverageError, InvalidInputError
from .audio_dsp import AudioChunkEncoder, MelConfig, load_audio
from .models import ChunkWindow, HighlightSet, Modality, ScoreTimeline, WindowScore
from .nn_core import Model, model_forward
from .timeline import make_windows
from .video_prep import VideoChunkEncoder, VideoConfig, load_video

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("second", "audio", "video", "ensemble")


@dataclass(frozen=True)
class DetectionConfig:
    epsilon: float = 0.5
    min_length_s: int = 3
    stride_s: int = 1
    k: int = 5

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ConfigurationError(f"epsilon must be in (0, 1), got {self.epsilon}")
        if self.min_length_s < 1:
            raise ConfigurationError(f"min_length_s must be >= 1, got {self.min_length_s}")
        if self.stride_s < 1:
            raise ConfigurationError(f"stride_s must be >= 1, got {self.stride_s}")
        if self.k < 1:
            raise ConfigurationError(f"k must be >= 1, got {self.k}")


@dataclass
class DetectionResult:
    """Per-source timelines and extracted highlights of one recording."""
    timelines: Dict[str, ScoreTimeline] = field(default_factory=dict)
    intervals: Dict[str, HighlightSet] = field(default_factory=dict)

    @property
    def primary_source(self) -> str:
        """The ensemble when both modalities ran, else the single modality."""
        return "ensemble" if "ensemble" in self.timelines else next(iter(self.timelines))


def score_windows(model: Model, encode: Callable[[ChunkWindow], np.ndarray], windows: Sequence[ChunkWindow],
                  source: Modality, jobs: int = 1) -> List[WindowScore]:
    """Score every window with the model; results keep the order of ``windows``."""
    def score(window: ChunkWindow) -> WindowScore:
        return WindowScore(window, model_forward(model, encode(window)), source)

    if jobs <= 1:
        return [score(w) for w in windows]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(score, windows))


def score_per_second(window_scores: Sequence[WindowScore], duration_s: int) -> ScoreTimeline:
    """Mean score of the windows containing each second, summed in ascending window-start order."""
    if not window_scores:
        raise CoverageError("No window scores to average")
    sources = {ws.source for ws in window_scores}
    if len(sources) != 1:
        raise InvalidInputError(f"Window scores mix sources {sorted(sources)}")

    totals = np.zeros(duration_s)
    counts = np.zeros(duration_s, dtype=np.int64)
    for ws in sorted(window_scores, key=lambda s: s.window.start_s):
        window = ws.window
        if not window.fits(duration_s):
            raise InvalidInputError(
                f"Window [{window.start_s}, {window.end_s}] outside recording of {duration_s} s"
            )
        totals[window.start_s:window.end_s + 1] += ws.score
        counts[window.start_s:window.end_s + 1] += 1

    uncovered = np.flatnonzero(counts == 0)
    if uncovered.size:
        raise CoverageError(f"Seconds not covered by any window: {uncovered[:10].tolist()}")
    return ScoreTimeline(totals / counts, sources.pop())


def ensemble_scores(audio: ScoreTimeline, video: ScoreTimeline) -> ScoreTimeline:
    """Pointwise mean of the audio and video timelines."""
    if audio.duration_s != video.duration_s:
        raise InvalidInputError(
            f"Timeline durations differ: audio {audio.duration_s} s, video {video.duration_s} s"
        )
    return ScoreTimeline(0.5 * (audio.scores + video.scores), "ensemble")


def extract_intervals(timeline: ScoreTimeline, config: DetectionConfig) -> HighlightSet:
    """Runs of seconds scoring strictly above epsilon, dropping runs shorter than min_length_s."""
    return HighlightSet.from_mask(timeline.scores > config.epsilon, config.min_length_s)


def _check_model(model: Model, expected_shape: tuple, modality: str) -> None:
    if model.input_shape != tuple(expected_shape):
        raise ConfigurationError(
            f"{modality} model expects {model.input_shape} but the encoder produces {tuple(expected_shape)}"
        )
    if not model.is_binary:
        raise ConfigurationError(f"{modality} model is not a binary sigmoid classifier")


def run_detection(audio_path: Optional[Union[str, Path]], frames_path: Optional[Union[str, Path]],
                  models: Dict[str, Model], config: DetectionConfig,
                  mel_config: MelConfig = MelConfig(), video_config: VideoConfig = VideoConfig(),
                  jobs: int = 1) -> DetectionResult:
    """Score a recording from its audio file and/or frame directory.

    With a single modality the result holds that modality's timeline only.
    """
    sources = {}
    if audio_path is not None:
        if "audio" not in models:
            raise ConfigurationError("An audio model is required to score audio")
        _check_model(models["audio"], mel_config.output_shape(config.k) + (1,), "audio")
        encoder = AudioChunkEncoder(load_audio(audio_path, mel_config), mel_config)
        sources["audio"] = (models["audio"], encoder)
    if frames_path is not None:
        if "video" not in models:
            raise ConfigurationError("A video model is required to score video")
        _check_model(models["video"], video_config.input_shape(config.k), "video")
        encoder = VideoChunkEncoder(load_video(frames_path, video_config), video_config)
        sources["video"] = (models["video"], encoder)
    if not sources:
        raise InvalidInputError("Supply an audio file, a frame directory, or both")

    duration_s = min(encoder.duration_s for _, encoder in sources.values())
    if len({encoder.duration_s for _, encoder in sources.values()}) > 1:
        logger.warning(f"Audio and video durations differ; scoring the first {duration_s} s")
    windows = make_windows(duration_s, config.k, config.stride_s)
    logger.info(f"Scoring {len(windows)} windows of {config.k} s over {duration_s} s")

    result = DetectionResult()
    for modality, (model, encoder) in sources.items():
        scores = score_windows(model, encoder, windows, modality, jobs)
        result.timelines[modality] = score_per_second(scores, duration_s)
    if "audio" in result.timelines and "video" in result.timelines:
        result.timelines["ensemble"] = ensemble_scores(result.timelines["audio"], result.timelines["video"])

    for source, timeline in result.timelines.items():
        result.intervals[source] = extract_intervals(timeline, config)
        logger.info(f"{source}: {len(result.intervals[source])} highlight(s)")
    return result


def scores_frame(result: DetectionResult) -> pd.DataFrame:
    """Timelines as a DataFrame with columns second, audio, video, ensemble (present ones only)."""
    columns = [c for c in CSV_COLUMNS[1:] if c in result.timelines]
    duration_s = result.timelines[columns[0]].duration_s
    data = {"second": np.arange(duration_s)}
    for column in columns:
        data[column] = result.timelines[column].scores
    return pd.DataFrame(data)


def write_scores_csv(result: DetectionResult, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    scores_frame(result).to_csv(path, index=False, float_format="%.6f", lineterminator="\n")


def read_scores_csv(path: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(path)


def plot_timelines(result: DetectionResult, config: DetectionConfig, path: Union[str, Path]) -> None:
    """Standalone SVG: one curve per timeline plus the threshold line; no timestamps embedded."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    colours = {"audio": "tab:blue", "video": "tab:orange", "ensemble": "tab:green"}
    with matplotlib.rc_context({"svg.hashsalt": "highlight-toolkit", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(10, 4))
        for source in CSV_COLUMNS[1:]:
            if source in result.timelines:
                scores = result.timelines[source].scores
                ax.plot(np.arange(scores.size), scores, label=source, color=colours[source])
        ax.axhline(config.epsilon, color="tab:red", linestyle="--", label=f"threshold {config.epsilon:g}")
        ax.set_xlabel("second")
        ax.set_ylabel("highlight score")
        ax.set_ylim(0.0, 1.0)
        ax.legend(loc="upper right")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
