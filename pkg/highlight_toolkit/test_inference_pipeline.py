"""Tests for per-second scoring, fusion, interval extraction and the detection outputs."""

import numpy as np
import pandas as pd
import pytest

from ._errors import ConfigurationError, CoverageError, InvalidInputError
from .audio_dsp import MelConfig, PcmSignal, write_wav
from .inference_pipeline import (
    DetectionConfig,
    DetectionResult,
    ensemble_scores,
    extract_intervals,
    plot_timelines,
    read_scores_csv,
    run_detection,
    score_per_second,
    score_windows,
    write_scores_csv,
)
from .models import ChunkWindow, HighlightInterval, ScoreTimeline, WindowScore
from .nn_core import build_classifier
from .timeline import make_windows
from .video_prep import FrameSequence, VideoConfig, save_frames

SMALL_MEL = MelConfig(sample_rate_hz=8000, fft_size=256, hop_size=128, mel_bins=16, fmax_hz=4000.0)
SMALL_VIDEO = VideoConfig(fps=2, height=12, width=12)


def window_scores(duration, k, stride, scores, source="audio"):
    windows = make_windows(duration, k, stride)
    return [WindowScore(w, float(s), source) for w, s in zip(windows, scores)]


def brute_force(ws, duration):
    out = []
    for second in range(duration):
        total, count = 0.0, 0
        for score in sorted(ws, key=lambda s: s.window.start_s):
            if score.window.contains(second):
                total += score.score
                count += 1
        out.append(total / count)
    return np.array(out)


def test_score_per_second_example():
    s = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
    timeline = score_per_second(window_scores(10, 5, 1, s), 10)
    assert timeline.scores[0] == pytest.approx(s[0])
    assert timeline.scores[4] == pytest.approx(sum(s[:5]) / 5)
    assert timeline.scores[7] == pytest.approx((s[3] + s[4] + s[5]) / 3)


def test_score_per_second_matches_brute_force_exactly():
    rng = np.random.default_rng(0)
    for _ in range(200):
        duration = int(rng.integers(1, 60))
        k = int(rng.integers(1, duration + 1))
        stride = int(rng.integers(1, k + 1))
        windows = make_windows(duration, k, stride)
        ws = [WindowScore(w, float(rng.random()), "video") for w in windows]
        order = rng.permutation(len(ws))
        shuffled = [ws[i] for i in order]
        timeline = score_per_second(shuffled, duration)
        assert np.array_equal(timeline.scores, brute_force(ws, duration))


def test_score_per_second_constant_and_single_window():
    np.testing.assert_allclose(score_per_second(window_scores(12, 5, 2, [0.3] * 5), 12).scores, 0.3)
    single = score_per_second([WindowScore(ChunkWindow(0, 8), 0.7, "audio")], 8)
    assert np.all(single.scores == 0.7)


def test_score_per_second_coverage_and_sources():
    with pytest.raises(CoverageError):
        score_per_second([WindowScore(ChunkWindow(0, 5), 0.5, "audio")], 8)
    with pytest.raises(CoverageError):
        score_per_second([], 8)
    mixed = [WindowScore(ChunkWindow(0, 5), 0.5, "audio"), WindowScore(ChunkWindow(3, 5), 0.5, "video")]
    with pytest.raises(InvalidInputError):
        score_per_second(mixed, 8)


def test_ensemble_scores():
    audio = ScoreTimeline([0.8, 1.0, 0.2], "audio")
    video = ScoreTimeline([0.4, 0.0, 0.2], "video")
    ensemble = ensemble_scores(audio, video)
    assert ensemble.source == "ensemble"
    np.testing.assert_allclose(ensemble.scores, [0.6, 0.5, 0.2])
    assert np.array_equal(ensemble_scores(audio, audio).scores, audio.scores)
    with pytest.raises(InvalidInputError):
        ensemble_scores(audio, ScoreTimeline([0.1, 0.2], "video"))


def test_ensemble_bounds():
    rng = np.random.default_rng(1)
    a = ScoreTimeline(rng.random(100), "audio")
    v = ScoreTimeline(rng.random(100), "video")
    e = ensemble_scores(a, v).scores
    assert np.all(e >= np.minimum(a.scores, v.scores))
    assert np.all(e <= np.maximum(a.scores, v.scores))


def test_single_modality_false_positive_is_damped():
    e = ensemble_scores(ScoreTimeline(np.ones(20), "audio"), ScoreTimeline(np.zeros(20), "video"))
    assert len(extract_intervals(e, DetectionConfig())) == 0


@pytest.mark.parametrize("min_len, expected", [(1, [HighlightInterval(1, 3)]), (4, [])])
def test_extract_intervals_examples(min_len, expected):
    timeline = ScoreTimeline([0.2, 0.6, 0.7, 0.6, 0.2], "ensemble")
    result = extract_intervals(timeline, DetectionConfig(min_length_s=min_len))
    assert list(result) == expected


def test_extract_intervals_strict_threshold_and_blip():
    tie = ScoreTimeline([0.5] * 6, "ensemble")
    assert len(extract_intervals(tie, DetectionConfig(min_length_s=1))) == 0
    scores = np.full(30, 0.1)
    scores[10:12] = 0.9
    scores[20:26] = 0.8
    result = extract_intervals(ScoreTimeline(scores, "ensemble"), DetectionConfig(min_length_s=3))
    assert list(result) == [HighlightInterval(20, 25)]


def test_extract_intervals_monotone_and_idempotent():
    rng = np.random.default_rng(2)
    for _ in range(50):
        timeline = ScoreTimeline(rng.random(40), "ensemble")
        low = extract_intervals(timeline, DetectionConfig(epsilon=0.4, min_length_s=1)).to_mask()
        high_set = extract_intervals(timeline, DetectionConfig(epsilon=0.6, min_length_s=1))
        high = high_set.to_mask()
        assert np.all(low[high])
        again = extract_intervals(ScoreTimeline(high.astype(float), "ensemble"),
                                  DetectionConfig(epsilon=0.6, min_length_s=1))
        assert again == high_set


@pytest.mark.parametrize("kwargs", [{"epsilon": 1.0}, {"epsilon": 0.0}, {"min_length_s": 0},
                                    {"stride_s": 0}, {"k": 0}])
def test_detection_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        DetectionConfig(**kwargs)


def test_score_windows_parallel_matches_sequential():
    model = build_classifier((12, 12, 1), seed=0, filters=(2, 2), hidden=3)
    rng = np.random.default_rng(3)
    inputs = {start: rng.random((12, 12, 1)) for start in range(10)}
    windows = make_windows(14, 5, 1)

    def encode(window):
        return inputs[window.start_s]

    sequential = score_windows(model, encode, windows, "audio", jobs=1)
    parallel = score_windows(model, encode, windows, "audio", jobs=4)
    assert sequential == parallel
    assert [s.window for s in parallel] == windows


@pytest.fixture
def recording(tmp_path):
    rng = np.random.default_rng(4)
    wav = tmp_path / "clip.wav"
    write_wav(PcmSignal(0.1 * rng.standard_normal(12 * 8000), 8000), wav)
    frames = tmp_path / "frames"
    save_frames(FrameSequence(rng.random((24, 10, 12)), 2), frames)
    return wav, frames


def small_models(k=2):
    p, q = SMALL_MEL.output_shape(k)
    return {
        "audio": build_classifier((p, q, 1), seed=1, filters=(2, 2), hidden=4),
        "video": build_classifier(SMALL_VIDEO.input_shape(k), seed=2, filters=(2, 2), hidden=4),
    }


def test_run_detection_both_modalities(recording, tmp_path):
    wav, frames = recording
    config = DetectionConfig(k=2)
    result = run_detection(wav, frames, small_models(), config, SMALL_MEL, SMALL_VIDEO, jobs=2)
    assert set(result.timelines) == {"audio", "video", "ensemble"}
    assert result.primary_source == "ensemble"
    assert all(t.duration_s == 12 for t in result.timelines.values())
    np.testing.assert_allclose(
        result.timelines["ensemble"].scores,
        (result.timelines["audio"].scores + result.timelines["video"].scores) / 2,
    )

    csv_path = tmp_path / "out" / "scores.csv"
    write_scores_csv(result, csv_path)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "second,audio,video,ensemble"
    assert len(lines) == 13
    assert len(lines[1].split(",")[1].split(".")[1]) == 6
    frame = read_scores_csv(csv_path)
    np.testing.assert_allclose(frame["audio"], result.timelines["audio"].scores, atol=1e-6)


def test_run_detection_audio_only(recording, tmp_path):
    wav, _ = recording
    result = run_detection(wav, None, {"audio": small_models()["audio"]}, DetectionConfig(k=2),
                           SMALL_MEL, SMALL_VIDEO)
    assert set(result.timelines) == {"audio"}
    assert result.primary_source == "audio"
    write_scores_csv(result, tmp_path / "a.csv")
    assert list(pd.read_csv(tmp_path / "a.csv").columns) == ["second", "audio"]


def test_run_detection_model_mismatch(recording):
    wav, frames = recording
    models = small_models()
    with pytest.raises(ConfigurationError):
        run_detection(wav, None, models, DetectionConfig(k=3), SMALL_MEL, SMALL_VIDEO)
    with pytest.raises(ConfigurationError):
        run_detection(None, frames, {"audio": models["audio"]}, DetectionConfig(k=2), SMALL_MEL, SMALL_VIDEO)
    with pytest.raises(InvalidInputError):
        run_detection(None, None, models, DetectionConfig(k=2), SMALL_MEL, SMALL_VIDEO)


def test_plot_is_reproducible(tmp_path):
    result = DetectionResult()
    result.timelines["audio"] = ScoreTimeline(np.linspace(0, 1, 30), "audio")
    result.timelines["video"] = ScoreTimeline(np.linspace(1, 0, 30), "video")
    result.timelines["ensemble"] = ensemble_scores(result.timelines["audio"], result.timelines["video"])
    first, second = tmp_path / "a.svg", tmp_path / "b.svg"
    plot_timelines(result, DetectionConfig(), first)
    plot_timelines(result, DetectionConfig(), second)
    svg = first.read_text()
    assert svg.lstrip().startswith("<?xml")
    assert "threshold 0.5" in svg
    assert first.read_bytes() == second.read_bytes()
