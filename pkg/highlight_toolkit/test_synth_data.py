"""Tests for the seeded synthetic corpora."""

import json
from dataclasses import replace

import numpy as np
import pytest

from ._errors import ConfigurationError, FormatError
from .audio_dsp import read_wav
from .models import ChunkWindow
from .synth_data import (
    AudioSynthConfig,
    SynthConfig,
    VideoSynthConfig,
    balance_chunks,
    chunk_records,
    corruption_indices,
    default_audio_config,
    default_video_config,
    gen_audio_corpus,
    gen_video_corpus,
    load_manifest,
    pink_noise,
    place_highlights,
    synth_audio,
    synth_frames,
)
from .timeline import label_chunk, load_annotations
from .video_prep import load_frames


def tiny_config(**kwargs):
    defaults = dict(
        num_recordings=4,
        recording_length_s=20,
        highlights_per_recording=1,
        k=2,
        seed=7,
        min_highlight_s=4,
        max_highlight_s=6,
        audio=AudioSynthConfig(sample_rate_hz=8000),
        video=VideoSynthConfig(fps=2, height=24, width=32, event_region=(4, 16, 20, 32)),
    )
    defaults.update(kwargs)
    return SynthConfig(**defaults)


def test_default_corpus_sizes():
    assert default_audio_config().num_recordings == 70
    assert default_video_config(seed=3).num_recordings == 100
    assert default_video_config(seed=3).seed == 3


def test_place_highlights_respects_lengths_and_gaps():
    config = SynthConfig(num_recordings=50, highlights_per_recording=3, seed=1)
    for index in range(50):
        highlights = place_highlights(config, index)
        assert len(highlights) == 3
        assert highlights.duration_s == 60
        for interval in highlights:
            assert config.min_highlight_s <= interval.length_s <= config.max_highlight_s
        for prev, nxt in zip(highlights.intervals, highlights.intervals[1:]):
            assert nxt.start_s - prev.end_s >= 2
        assert place_highlights(config, index) == highlights


def test_highlights_do_not_depend_on_modality_settings():
    a = tiny_config()
    b = tiny_config(audio=AudioSynthConfig(sample_rate_hz=16000), corrupt_video={0, 1})
    for index in range(4):
        assert place_highlights(a, index) == place_highlights(b, index)


@pytest.mark.parametrize("kwargs", [
    {"highlights_per_recording": 3, "recording_length_s": 30, "max_highlight_s": 10},
    {"min_highlight_s": 1},
    {"min_highlight_s": 8, "max_highlight_s": 6},
    {"k": 0},
    {"num_recordings": 0},
    {"corruption_strength": 1.5},
    {"video": VideoSynthConfig(height=24, width=32)},
])
def test_invalid_configs(kwargs):
    with pytest.raises(ConfigurationError):
        tiny_config(**kwargs)


def test_corruption_indices():
    assert corruption_indices(10, "none") == frozenset()
    assert corruption_indices(10, "first-half") == frozenset(range(5))
    assert corruption_indices(10, "second-half") == frozenset(range(5, 10))
    assert corruption_indices(3, "all") == frozenset({0, 1, 2})
    with pytest.raises(ConfigurationError):
        corruption_indices(10, "middle")


def test_pink_noise_is_unit_rms():
    noise = pink_noise(16000, np.random.default_rng(0))
    assert np.sqrt(np.mean(noise ** 2)) == pytest.approx(1.0)


def test_audio_highlights_are_louder():
    config = tiny_config()
    highlights = place_highlights(config, 0)
    signal = synth_audio(config, 0, highlights)
    assert signal.sample_rate_hz == 8000
    assert len(signal) == 20 * 8000
    per_second = signal.samples.reshape(20, 8000)
    rms = np.sqrt(np.mean(per_second ** 2, axis=1))
    mask = highlights.to_mask()
    assert rms[mask].mean() > 2.0 * rms[~mask].mean()


def test_corrupted_audio_keeps_background_and_drops_signature():
    config = tiny_config(corrupt_audio={0})
    highlights = place_highlights(config, 0)
    clean = synth_audio(replace(config, corrupt_audio=frozenset()), 0, highlights).samples
    corrupted = synth_audio(config, 0, highlights).samples
    outside = ~np.repeat(highlights.to_mask(), 8000)
    assert np.array_equal(clean[outside], corrupted[outside])
    inside = ~outside
    assert np.sqrt(np.mean(corrupted[inside] ** 2)) < 0.5 * np.sqrt(np.mean(clean[inside] ** 2))


def test_video_blob_appears_in_event_region_during_highlights():
    config = SynthConfig(num_recordings=1, recording_length_s=20, highlights_per_recording=1, seed=2,
                         corrupt_video={0})
    highlights = place_highlights(config, 0)
    without = synth_frames(config, 0, highlights).frames
    with_blob = synth_frames(replace(config, corrupt_video=frozenset()), 0, highlights).frames
    assert with_blob.shape == (100, 96, 128)
    assert with_blob.min() >= 0.0 and with_blob.max() <= 1.0

    diff = with_blob - without
    frame_mask = np.repeat(highlights.to_mask(), config.video.fps)
    assert not diff[~frame_mask].any()

    top, left, bottom, right = config.video.event_region
    region = np.zeros((96, 128), dtype=bool)
    region[top:bottom, left:right] = True
    last = int(np.flatnonzero(frame_mask)[-1])
    assert diff[last][region].mean() > 5.0 * diff[last][~region].mean()


def test_chunk_labels_and_balance():
    config = tiny_config()
    highlights = place_highlights(config, 1)
    records = chunk_records(config, "rec_0001", highlights)
    assert [r.start_s for r in records] == list(range(0, 20, 2))
    for record in records:
        assert record.label == label_chunk(ChunkWindow(record.start_s, record.length_s), highlights)

    balanced = balance_chunks(records, seed=7)
    labels = [r.label for r in balanced]
    assert labels.count(0) == labels.count(1) == sum(r.label for r in records)
    assert balanced == balance_chunks(records, seed=7)


def test_no_highlights_gives_empty_chunk_list(tmp_path):
    corpus = gen_audio_corpus(tiny_config(num_recordings=2, highlights_per_recording=0), tmp_path)
    assert corpus.chunks == []
    assert all(len(hs) == 0 for hs in corpus.annotations.values())


def corpus_files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_generation_is_deterministic_across_jobs(tmp_path):
    config = tiny_config()
    gen_audio_corpus(config, tmp_path / "a", jobs=1)
    gen_video_corpus(config, tmp_path / "a", jobs=1)
    gen_audio_corpus(config, tmp_path / "b", jobs=4)
    gen_video_corpus(config, tmp_path / "b", jobs=4)
    first, second = corpus_files(tmp_path / "a"), corpus_files(tmp_path / "b")
    assert "manifest.json" in first and "audio/rec_0000.wav" in first
    assert first == second


def test_corpus_layout_and_manifest(tmp_path):
    config = tiny_config()
    audio = gen_audio_corpus(config, tmp_path)
    video = gen_video_corpus(config, tmp_path)
    assert audio.recordings == video.recordings == [f"rec_{i:04d}" for i in range(4)]
    assert audio.annotations == video.annotations

    for rec_id, highlights in audio.annotations.items():
        assert load_annotations(tmp_path / "annotations" / f"{rec_id}.json") == highlights
    assert read_wav(tmp_path / "audio" / "rec_0000.wav").duration_s == 20
    frames = load_frames(tmp_path / "video" / "rec_0000")
    assert frames.fps == 2 and frames.frames.shape == (40, 24, 32)

    manifest = load_manifest(tmp_path)
    assert manifest["_root"] == str(tmp_path)
    assert manifest["k"] == 2 and manifest["seed"] == 7
    assert set(manifest["chunks"]) == {"audio", "video"}
    entry = manifest["recordings"][0]
    assert entry == {"id": "rec_0000", "annotation": "annotations/rec_0000.json",
                     "audio": "audio/rec_0000.wav", "frames": "video/rec_0000"}
    assert manifest["chunks"]["audio"] == [c.to_dict() for c in audio.chunks]


def test_load_manifest_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_manifest(tmp_path)
    (tmp_path / "manifest.json").write_text("{not json")
    with pytest.raises(FormatError):
        load_manifest(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps({"recordings": [], "k": 5}))
    with pytest.raises(FormatError):
        load_manifest(tmp_path / "manifest.json")
