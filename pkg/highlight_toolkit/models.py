"""Data models shared across the highlight toolkit."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Tuple

import numpy as np

from ._errors import BoundsError, InvalidInputError

Modality = Literal["audio", "video"]
ScoreSource = Literal["audio", "video", "ensemble"]


@dataclass(frozen=True, order=True)
class HighlightInterval:
    """Highlight spanning the inclusive second indices [start_s, end_s]."""
    start_s: int
    end_s: int

    def __post_init__(self):
        if self.start_s < 0:
            raise InvalidInputError(f"Highlight start must be >= 0, got {self.start_s}")
        if self.start_s >= self.end_s:
            raise InvalidInputError(
                f"Highlight [{self.start_s}, {self.end_s}] must satisfy start_s < end_s"
            )

    @property
    def length_s(self) -> int:
        return self.end_s - self.start_s + 1

    def contains(self, second: int) -> bool:
        return self.start_s <= second <= self.end_s


@dataclass(frozen=True)
class HighlightSet:
    """Ordered, non-overlapping highlights annotating a recording of duration_s seconds."""
    intervals: Tuple[HighlightInterval, ...]
    duration_s: int

    def __post_init__(self):
        object.__setattr__(self, "intervals", tuple(self.intervals))
        if self.duration_s < 1:
            raise InvalidInputError(f"Recording duration must be >= 1 s, got {self.duration_s}")
        for interval in self.intervals:
            if interval.end_s >= self.duration_s:
                raise BoundsError(
                    f"Highlight [{interval.start_s}, {interval.end_s}] exceeds "
                    f"recording of {self.duration_s} s"
                )
        for prev, nxt in zip(self.intervals, self.intervals[1:]):
            if not prev.end_s < nxt.start_s:
                raise InvalidInputError(
                    f"Highlights [{prev.start_s}, {prev.end_s}] and "
                    f"[{nxt.start_s}, {nxt.end_s}] overlap or are out of order"
                )

    def __len__(self) -> int:
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def to_mask(self) -> np.ndarray:
        """Boolean per-second mask of length duration_s."""
        mask = np.zeros(self.duration_s, dtype=bool)
        for interval in self.intervals:
            mask[interval.start_s:interval.end_s + 1] = True
        return mask

    @classmethod
    def from_mask(cls, mask: np.ndarray, min_length_s: int = 2) -> "HighlightSet":
        """Turn maximal runs of True seconds into intervals, dropping short runs.

        Runs of a single second are always dropped since an interval needs start_s < end_s.
        """
        mask = np.asarray(mask, dtype=bool)
        min_length_s = max(min_length_s, 2)
        padded = np.concatenate(([False], mask, [False])).astype(np.int8)
        edges = np.diff(padded)
        starts = np.flatnonzero(edges == 1)
        ends = np.flatnonzero(edges == -1) - 1
        intervals = [
            HighlightInterval(int(s), int(e))
            for s, e in zip(starts, ends)
            if e - s + 1 >= min_length_s
        ]
        return cls(tuple(intervals), int(mask.size))


@dataclass(frozen=True)
class ChunkWindow:
    """A k-second window [start_s, start_s + length_s) of a recording."""
    start_s: int
    length_s: int

    def __post_init__(self):
        if self.start_s < 0:
            raise BoundsError(f"Window start must be >= 0, got {self.start_s}")
        if self.length_s < 1:
            raise InvalidInputError(f"Window length must be >= 1 s, got {self.length_s}")

    @property
    def end_s(self) -> int:
        """Last second covered by the window (inclusive)."""
        return self.start_s + self.length_s - 1

    def contains(self, second: int) -> bool:
        return self.start_s <= second <= self.end_s

    def fits(self, duration_s: int) -> bool:
        return self.start_s + self.length_s <= duration_s


@dataclass(frozen=True)
class WindowScore:
    """Highlight possibility rate of one window from one modality."""
    window: ChunkWindow
    score: float
    source: Modality

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise InvalidInputError(f"Window score must be in [0, 1], got {self.score}")


@dataclass(frozen=True)
class ScoreTimeline:
    """Per-second highlight possibility rates of a recording."""
    scores: np.ndarray
    source: ScoreSource

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=np.float64)
        if scores.ndim != 1 or scores.size == 0:
            raise InvalidInputError("Timeline scores must be a non-empty 1-D array")
        if np.any(scores < 0.0) or np.any(scores > 1.0) or not np.all(np.isfinite(scores)):
            raise InvalidInputError("Timeline scores must lie in [0, 1]")
        scores.setflags(write=False)
        object.__setattr__(self, "scores", scores)

    @property
    def duration_s(self) -> int:
        return int(self.scores.size)


@dataclass
class LabeledDataset:
    """Encoded chunks with binary labels for one modality."""
    inputs: np.ndarray
    labels: np.ndarray
    modality: Modality
    sources: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.inputs) == 0:
            raise InvalidInputError("A labeled dataset cannot be empty")
        if len(self.inputs) != len(self.labels):
            raise InvalidInputError(
                f"{len(self.inputs)} inputs but {len(self.labels)} labels"
            )
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise InvalidInputError("Labels must be 0 or 1")
        self.sources = tuple(self.sources)
        if self.sources and len(self.sources) != len(self.labels):
            raise InvalidInputError("sources must give one reference per sample")

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def positives(self) -> int:
        return int(self.labels.sum())

    @property
    def negatives(self) -> int:
        return len(self) - self.positives

    def subset(self, indices) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        sources = tuple(self.sources[i] for i in indices) if self.sources else ()
        return LabeledDataset(self.inputs[indices], self.labels[indices], self.modality, sources)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Binary confusion counts; the positive class is "highlight"."""
    tp: int
    fn: int
    fp: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fn, self.fp, self.tn) < 0:
            raise InvalidInputError("Confusion counts must be non-negative")
        if self.total == 0:
            raise InvalidInputError("Confusion matrix must count at least one sample")

    @property
    def total(self) -> int:
        return self.tp + self.fn + self.fp + self.tn

    def normalized_percent(self) -> dict:
        """Counts as a percentage of the test-set cardinality."""
        total = self.total
        return {
            "tp": 100.0 * self.tp / total,
            "fn": 100.0 * self.fn / total,
            "fp": 100.0 * self.fp / total,
            "tn": 100.0 * self.tn / total,
        }
