"""End-to-end runs on the default synthetic corpora.

These train real models and take minutes; deselect them with ``-m "not slow"``.
"""

import numpy as np
import pytest

from .audio_dsp import MelConfig
from .datasets import build_audio_dataset, build_video_dataset
from .eval_metrics import BATCH_FRACTIONS, SPLIT_FRACTIONS, evaluate, split_balanced
from .inference_pipeline import DetectionConfig, extract_intervals, run_detection
from .models import ScoreTimeline
from .nn_core import TrainConfig, batch_size_for, build_classifier, predict, train_model
from .synth_data import (
    SynthConfig,
    corruption_indices,
    default_audio_config,
    default_video_config,
    gen_audio_corpus,
    gen_video_corpus,
    load_manifest,
)
from .timeline import interval_jaccard
from .video_prep import VideoConfig

pytestmark = pytest.mark.slow

MEL = MelConfig()
# smaller frames than the 112 x 112 default keep the video run within minutes
VIDEO = VideoConfig(fps=5, height=56, width=64)
JOBS = 4


def train(dataset, seed=0):
    train_set, val_set, test_set = split_balanced(dataset, SPLIT_FRACTIONS[dataset.modality], seed)
    config = TrainConfig(
        learning_rate=0.01,
        momentum=0.9,
        batch_size=batch_size_for(len(train_set), BATCH_FRACTIONS[dataset.modality]),
        max_epochs=40,
        patience=8,
        seed=seed,
    )
    model, _ = train_model(build_classifier(dataset.inputs.shape[1:], seed), train_set, val_set, config)
    return model, test_set


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    audio_root = tmp_path_factory.mktemp("audio_corpus")
    video_root = tmp_path_factory.mktemp("video_corpus")
    gen_audio_corpus(default_audio_config(seed=0), audio_root, jobs=JOBS)
    gen_video_corpus(default_video_config(seed=0), video_root, jobs=JOBS)
    audio_model, audio_test = train(build_audio_dataset(load_manifest(audio_root), MEL, jobs=JOBS))
    video_model, video_test = train(build_video_dataset(load_manifest(video_root), VIDEO, jobs=JOBS))
    return {"audio": (audio_model, audio_test), "video": (video_model, video_test)}


@pytest.mark.parametrize("modality", ["audio", "video"])
def test_models_reach_ninety_percent(trained, modality):
    model, test_set = trained[modality]
    assert len(test_set) >= 150
    report = evaluate(model, test_set)
    assert report.accuracy >= 0.90, report.to_dict()


def test_ensemble_beats_corrupted_modalities(trained, tmp_path):
    num = 30
    config = SynthConfig(
        num_recordings=num,
        seed=11,
        corrupt_audio=corruption_indices(num, "first-half"),
        corrupt_video=corruption_indices(num, "second-half"),
        corruption_strength=0.3,
    )
    gen_audio_corpus(config, tmp_path, jobs=JOBS)
    gen_video_corpus(config, tmp_path, jobs=JOBS)
    manifest = load_manifest(tmp_path)
    audio = build_audio_dataset(manifest, MEL, jobs=JOBS)
    video = build_video_dataset(manifest, VIDEO, jobs=JOBS)
    assert audio.sources == video.sources
    assert np.array_equal(audio.labels, video.labels)

    audio_scores = predict(trained["audio"][0], audio.inputs)
    video_scores = predict(trained["video"][0], video.inputs)
    ensemble_scores = (audio_scores + video_scores) / 2.0

    def accuracy(scores):
        return float(np.mean((scores > 0.5) == audio.labels))

    single = [accuracy(audio_scores), accuracy(video_scores)]
    combined = accuracy(ensemble_scores)
    assert combined >= max(single) - 0.01, (combined, single)
    assert combined > min(single) + 0.05, (combined, single)


@pytest.fixture(scope="module")
def detections(trained, tmp_path_factory):
    root = tmp_path_factory.mktemp("clips")
    config = SynthConfig(num_recordings=20, highlights_per_recording=1, seed=101)
    audio_corpus = gen_audio_corpus(config, root, jobs=JOBS)
    gen_video_corpus(config, root, jobs=JOBS)
    models = {"audio": trained["audio"][0], "video": trained["video"][0]}
    results = []
    for rec_id in audio_corpus.recordings:
        result = run_detection(root / "audio" / f"{rec_id}.wav", root / "video" / rec_id, models,
                               DetectionConfig(), MEL, VIDEO, jobs=JOBS)
        results.append((audio_corpus.annotations[rec_id], result))
    return results


def test_detection_localizes_planted_highlights(detections):
    hits = 0
    for truth, result in detections:
        assert result.primary_source == "ensemble"
        (planted,) = truth.intervals
        best = max((interval_jaccard(planted, found) for found in result.intervals["ensemble"]), default=0.0)
        hits += best >= 0.5
    assert hits >= 18


def test_two_second_blip_is_removed(detections):
    config = DetectionConfig()
    for _, result in detections:
        scores = result.timelines["ensemble"].scores.copy()
        quiet = [i for i in range(1, scores.size - 2) if np.all(scores[i - 1:i + 3] <= config.epsilon)]
        assert quiet
        start = quiet[len(quiet) // 2]
        scores[start:start + 2] = 0.9
        blipped = extract_intervals(ScoreTimeline(scores, "ensemble"), config)
        assert blipped == result.intervals["ensemble"]
