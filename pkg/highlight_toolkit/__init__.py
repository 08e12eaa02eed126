"""Highlight Detection Toolkit

Detects highlight scenes in long sport recordings:
- Mel-spectrogram encoding of audio chunks and stacked grayscale frames for video chunks
- Small convolutional binary classifiers trained with SGD and early stopping
- Transfer of a pretrained RGB classifier to stacked-frame inputs
- Sliding-window per-second scoring with an audio/video ensemble and interval extraction
"""

from .inference_pipeline import DetectionConfig, DetectionResult, run_detection
from .models import HighlightInterval, HighlightSet, LabeledDataset, ScoreTimeline
from .nn_core import Model, build_classifier, load_model, save_model, train_model

__version__ = "0.1.0"
__all__ = [
    "DetectionConfig",
    "DetectionResult",
    "HighlightInterval",
    "HighlightSet",
    "LabeledDataset",
    "Model",
    "ScoreTimeline",
    "build_classifier",
    "load_model",
    "run_detection",
    "save_model",
    "train_model",
]
