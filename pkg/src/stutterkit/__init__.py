"""stutterkit: speech-dysfluency analysis and therapy recommendation toolkit.

Pipeline: WAV ingestion -> 1-second segments -> MFCC features -> two
gated-recurrent convolutional detectors (prolongation, repetition) ->
severity/improvement indices -> polynomial-kernel SVM therapy
recommendation.
"""

from . import assessment, audio, detectors, features, nn, sessions, synth, therapy
from .errors import IoFailure, StutterKitError

__version__ = "0.1.0"

__all__ = [
    "assessment",
    "audio",
    "detectors",
    "features",
    "nn",
    "sessions",
    "synth",
    "therapy",
    "IoFailure",
    "StutterKitError",
    "__version__",
]
