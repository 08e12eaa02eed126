"""Grayscale frame preparation and stacking of video chunks into u x w x (fps * k) tensors."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from ._errors import BoundsError, ConfigurationError, FormatError, InvalidInputError
from .models import ChunkWindow

logger = logging.getLogger(__name__)

FRAME_PATTERN = "frame_{:06d}.{}"
SIDECAR_NAME = "frames.json"

# BT.601 luma
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class VideoConfig:
    """Frame rate and frame size expected by the video model."""
    fps: int = 5
    height: int = 112
    width: int = 112

    def __post_init__(self):
        if self.fps < 1:
            raise ConfigurationError(f"fps must be >= 1, got {self.fps}")
        if self.height < 1 or self.width < 1:
            raise ConfigurationError(f"Frame size must be positive, got {self.height}x{self.width}")

    @property
    def out_size(self) -> Tuple[int, int]:
        return self.height, self.width

    def input_shape(self, chunk_seconds: int) -> Tuple[int, int, int]:
        return self.height, self.width, self.fps * chunk_seconds


@dataclass(frozen=True)
class FrameSequence:
    """Grayscale frames (T x u x w, reals in [0, 1]) at fps frames per second."""
    frames: np.ndarray
    fps: int

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 3:
            raise InvalidInputError("Frames must be a T x height x width array")
        if self.fps < 1:
            raise InvalidInputError(f"fps must be >= 1, got {self.fps}")
        object.__setattr__(self, "frames", frames)

    def __len__(self) -> int:
        return int(self.frames.shape[0])

    @property
    def duration_s(self) -> float:
        return len(self) / self.fps


@dataclass(frozen=True)
class VideoChunkTensor:
    values: np.ndarray
    frame_rate: int
    chunk_seconds: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if self.frame_rate < 1 or self.chunk_seconds < 1:
            raise InvalidInputError(f"Chunk rate and length must be >= 1, got {self.frame_rate}, {self.chunk_seconds}")
        if values.ndim != 3 or values.shape[2] != self.frame_rate * self.chunk_seconds:
            raise InvalidInputError(
                f"Chunk tensor needs {self.frame_rate * self.chunk_seconds} channels, "
                f"got shape {values.shape}"
            )
        object.__setattr__(self, "values", values)


def to_grayscale(rgb_pixel: Sequence[int]) -> int:
    """8-bit gray value of an 8-bit RGB triple."""
    r, g, b = rgb_pixel
    return int(np.clip(np.floor(0.299 * r + 0.587 * g + 0.114 * b + 0.5), 0, 255))


def rgb_to_grayscale(image: np.ndarray) -> np.ndarray:
    """Vectorized to_grayscale over an H x W x 3 uint8 image."""
    gray = np.floor(image[..., :3].astype(np.float64) @ LUMA_WEIGHTS + 0.5)
    return np.clip(gray, 0, 255).astype(np.uint8)


def adapt_framerate(seq: FrameSequence, target_fps: int) -> FrameSequence:
    """Nearest-index frame selection: frame j <- round(j * src_fps / target_fps)."""
    if len(seq) == 0:
        raise InvalidInputError("Cannot adapt the frame rate of an empty sequence")
    if target_fps < 1:
        raise InvalidInputError(f"Target fps must be >= 1, got {target_fps}")
    if target_fps == seq.fps:
        return seq

    num_out = len(seq) * target_fps // seq.fps
    j = np.arange(num_out)
    # round half up, in integers
    indices = (2 * j * seq.fps + target_fps) // (2 * target_fps)
    indices = np.minimum(indices, len(seq) - 1)
    return FrameSequence(seq.frames[indices], target_fps)


def resize_bilinear(image: np.ndarray, out_size: Tuple[int, int]) -> np.ndarray:
    """Corner-aligned bilinear resize of a 2-D image."""
    out_h, out_w = out_size
    in_h, in_w = image.shape
    if (in_h, in_w) == (out_h, out_w):
        return image.astype(np.float64, copy=True)

    ys = np.arange(out_h) * ((in_h - 1) / (out_h - 1)) if out_h > 1 else np.zeros(1)
    xs = np.arange(out_w) * ((in_w - 1) / (out_w - 1)) if out_w > 1 else np.zeros(1)
    y0 = np.floor(ys).astype(np.int64)
    x0 = np.floor(xs).astype(np.int64)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    wy = (ys - y0)[:, None]
    wx = (xs - x0)[None, :]

    top = image[y0][:, x0] * (1.0 - wx) + image[y0][:, x1] * wx
    bottom = image[y1][:, x0] * (1.0 - wx) + image[y1][:, x1] * wx
    return top * (1.0 - wy) + bottom * wy


def stack_chunk(seq: FrameSequence, window: ChunkWindow, out_size: Tuple[int, int]) -> VideoChunkTensor:
    """Resize the fps * k frames of the window and stack them as channels in temporal order."""
    first = window.start_s * seq.fps
    count = window.length_s * seq.fps
    if first + count > len(seq):
        raise BoundsError(
            f"Window [{window.start_s}, {window.end_s}] needs frames up to {first + count}, "
            f"only {len(seq)} available"
        )
    channels = [resize_bilinear(frame, out_size) for frame in seq.frames[first:first + count]]
    return VideoChunkTensor(np.stack(channels, axis=-1), seq.fps, window.length_s)


def _read_frame(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode == "L":
                return np.asarray(img, dtype=np.uint8)
            return rgb_to_grayscale(np.asarray(img.convert("RGB"), dtype=np.uint8))
    except (UnidentifiedImageError, OSError, ValueError) as e:
        raise FormatError(f"Cannot decode frame {path}: {e}") from e


def _frame_index(path: Path) -> int:
    try:
        return int(path.stem[len("frame_"):])
    except ValueError:
        raise FormatError(f"Frame file name {path.name} does not carry a frame number") from None


def load_frames(directory: Union[str, Path]) -> FrameSequence:
    """Load frame_%06d.pgm (or .png) files plus the frames.json sidecar; pixels scaled by /255."""
    directory = Path(directory)
    sidecar = directory / SIDECAR_NAME
    if not sidecar.exists():
        raise FileNotFoundError(f"Frame sidecar not found: {sidecar}")
    try:
        with open(sidecar, "r", encoding="utf-8") as f:
            fps = int(json.load(f)["fps"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise FormatError(f"Invalid sidecar {sidecar}: {e}") from e

    paths = sorted(directory.glob("frame_*.pgm")) or sorted(directory.glob("frame_*.png"))
    if not paths:
        raise FormatError(f"No frame_*.pgm or frame_*.png files in {directory}")
    paths.sort(key=_frame_index)
    indices = [_frame_index(p) for p in paths]
    if indices != list(range(len(paths))):
        missing = sorted(set(range(max(indices) + 1)) - set(indices))
        raise FormatError(f"Frames in {directory} are not numbered 0..{len(paths) - 1}; missing {missing[:5]}")

    frames = [_read_frame(p) for p in paths]
    if len({f.shape for f in frames}) != 1:
        raise FormatError(f"Frames in {directory} have differing dimensions")
    logger.debug(f"Loaded {len(frames)} frames at {fps} fps from {directory}")
    return FrameSequence(np.stack(frames).astype(np.float64) / 255.0, fps)


def save_frames(seq: FrameSequence, directory: Union[str, Path]) -> None:
    """Write binary PGM (P5, maxval 255) frames and the fps sidecar."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pixels = np.clip(np.round(seq.frames * 255.0), 0, 255).astype(np.uint8)
    for index, frame in enumerate(pixels):
        Image.fromarray(frame).save(directory / FRAME_PATTERN.format(index, "pgm"))
    with open(directory / SIDECAR_NAME, "w", encoding="utf-8") as f:
        json.dump({"fps": seq.fps}, f)
        f.write("\n")


def load_video(directory: Union[str, Path], config: VideoConfig) -> FrameSequence:
    """Load a frame directory and adapt it to the configured frame rate."""
    seq = load_frames(directory)
    if seq.fps != config.fps:
        logger.info(f"Adapting {directory} from {seq.fps} fps to {config.fps} fps")
        seq = adapt_framerate(seq, config.fps)
    return seq


class VideoChunkEncoder:
    """Encodes windows of one frame sequence as (u, w, fps * k) model inputs."""

    def __init__(self, seq: FrameSequence, config: VideoConfig):
        if seq.fps != config.fps:
            seq = adapt_framerate(seq, config.fps)
        self.seq = seq
        self.config = config

    @property
    def duration_s(self) -> int:
        return len(self.seq) // self.config.fps

    def __call__(self, window: ChunkWindow) -> np.ndarray:
        return stack_chunk(self.seq, window, self.config.out_size).values
