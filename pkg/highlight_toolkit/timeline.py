"""Highlight annotations, chunk labeling and sliding windows over a recording."""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import List, Union

from ._errors import BoundsError, FormatError, InvalidInputError
from .models import ChunkWindow, HighlightInterval, HighlightSet

logger = logging.getLogger(__name__)


def label_chunk(window: ChunkWindow, highlights: HighlightSet) -> int:
    """Return 1 if the window shares at least one second with a highlight, else 0."""
    if not window.fits(highlights.duration_s):
        raise BoundsError(
            f"Window [{window.start_s}, {window.end_s}] outside recording "
            f"of {highlights.duration_s} s"
        )
    for interval in highlights:
        if interval.start_s <= window.end_s and window.start_s <= interval.end_s:
            return 1
    return 0


def make_windows(duration_s: int, k: int, stride_s: int) -> List[ChunkWindow]:
    """Windows of k seconds every stride_s seconds, plus a tail window so every second is covered."""
    if stride_s < 1:
        raise InvalidInputError(f"Stride must be >= 1 s, got {stride_s}")
    if k < 1 or k > duration_s:
        raise InvalidInputError(f"Window length {k} s invalid for a {duration_s} s recording")

    last_start = duration_s - k
    starts = list(range(0, last_start + 1, stride_s))
    if starts[-1] < last_start:
        starts.append(last_start)
    return [ChunkWindow(start, k) for start in starts]


def interval_jaccard(a: HighlightInterval, b: HighlightInterval) -> float:
    """Jaccard overlap of two intervals measured in whole seconds."""
    inter = min(a.end_s, b.end_s) - max(a.start_s, b.start_s) + 1
    if inter <= 0:
        return 0.0
    union = a.length_s + b.length_s - inter
    return inter / union


def highlights_to_dict(highlights: HighlightSet) -> dict:
    return {
        "duration_s": highlights.duration_s,
        "highlights": [[i.start_s, i.end_s] for i in highlights],
    }


def highlights_from_dict(data: dict) -> HighlightSet:
    # InvalidInputError is a ValueError, so invariant violations land here too
    try:
        duration_s = int(data["duration_s"])
        intervals = tuple(HighlightInterval(int(s), int(e)) for s, e in data["highlights"])
        return HighlightSet(intervals, duration_s)
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Invalid annotation: {e}") from e


def load_annotations(path: Union[str, Path]) -> HighlightSet:
    """Read an annotation file {"duration_s": int, "highlights": [[start_s, end_s], ...]}."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path} is not valid JSON: {e}") from e
    highlights = highlights_from_dict(data)
    logger.debug(f"Loaded {len(highlights)} highlights from {path}")
    return highlights


def save_annotations(highlights: HighlightSet, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(highlights_to_dict(highlights), f, indent=2)
        f.write("\n")
