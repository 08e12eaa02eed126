"""Encode the chunk lists of a corpus manifest into labeled model inputs."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Union

import numpy as np

from ._errors import FormatError, InvalidInputError
from .audio_dsp import AudioChunkEncoder, MelConfig, load_audio
from .models import ChunkWindow, LabeledDataset, Modality
from .video_prep import VideoChunkEncoder, VideoConfig, load_video

logger = logging.getLogger(__name__)


def _chunks_by_recording(manifest: dict, modality: Modality) -> Dict[str, List[dict]]:
    chunks = manifest["chunks"].get(modality)
    if not chunks:
        raise InvalidInputError(f"The manifest lists no {modality} chunks")
    grouped: Dict[str, List[dict]] = {}
    for chunk in chunks:
        grouped.setdefault(chunk["recording"], []).append(chunk)
    return grouped


def _recording_paths(manifest: dict, key: str) -> Dict[str, Path]:
    root = Path(manifest["_root"])
    paths = {}
    for entry in manifest["recordings"]:
        if key in entry:
            paths[entry["id"]] = root / entry[key]
    return paths


def _encode(manifest: dict, modality: Modality, open_encoder: Callable[[Path], Callable],
            path_key: str, jobs: int) -> LabeledDataset:
    grouped = _chunks_by_recording(manifest, modality)
    paths = _recording_paths(manifest, path_key)
    missing = sorted(set(grouped) - set(paths))
    if missing:
        raise FormatError(f"Manifest chunks reference recordings without {path_key}: {missing[:5]}")

    def encode_recording(rec_id: str):
        encoder = open_encoder(paths[rec_id])
        inputs = [encoder(ChunkWindow(c["start_s"], c["length_s"])).astype(np.float32) for c in grouped[rec_id]]
        logger.debug(f"Encoded {len(inputs)} {modality} chunks of {rec_id}")
        return inputs

    rec_ids = list(grouped)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            encoded = list(pool.map(encode_recording, rec_ids))
    else:
        encoded = [encode_recording(r) for r in rec_ids]

    inputs, labels, sources = [], [], []
    for rec_id, rec_inputs in zip(rec_ids, encoded):
        inputs.extend(rec_inputs)
        for chunk in grouped[rec_id]:
            labels.append(int(chunk["label"]))
            sources.append(f"{rec_id}@{chunk['start_s']}")
    dataset = LabeledDataset(np.stack(inputs), np.asarray(labels), modality, tuple(sources))
    logger.info(f"Built {modality} dataset: {len(dataset)} chunks ({dataset.positives} positive), "
                f"input shape {dataset.inputs.shape[1:]}")
    return dataset


def build_audio_dataset(manifest: dict, mel_config: MelConfig = MelConfig(), jobs: int = 1) -> LabeledDataset:
    """Mel-spectrogram inputs of shape (p, q, 1) for every audio chunk of the manifest."""
    return _encode(manifest, "audio", lambda path: AudioChunkEncoder(load_audio(path, mel_config), mel_config),
                   "audio", jobs)


def build_video_dataset(manifest: dict, video_config: VideoConfig = VideoConfig(), jobs: int = 1) -> LabeledDataset:
    """Stacked grayscale inputs of shape (u, w, fps * k) for every video chunk of the manifest."""
    return _encode(manifest, "video", lambda path: VideoChunkEncoder(load_video(path, video_config), video_config),
                   "frames", jobs)


def save_dataset(dataset: LabeledDataset, path: Union[str, Path]) -> None:
    """Compressed .npz with float32 inputs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        np.savez_compressed(
            f,
            inputs=dataset.inputs.astype(np.float32),
            labels=dataset.labels,
            modality=np.array(dataset.modality),
            sources=np.array(dataset.sources, dtype=str),
        )
    logger.info(f"Saved {len(dataset)} {dataset.modality} samples to {path}")


def load_dataset(path: Union[str, Path]) -> LabeledDataset:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            return LabeledDataset(
                data["inputs"],
                data["labels"],
                str(data["modality"]),
                tuple(str(s) for s in data["sources"]),
            )
    except (KeyError, ValueError) as e:
        if isinstance(e, InvalidInputError):
            raise
        raise FormatError(f"{path} is not a highlight dataset archive: {e}") from e
