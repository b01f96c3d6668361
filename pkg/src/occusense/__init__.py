"""Occupancy detection from room reverberation time, CO2 and temperature."""

from .acoustics import (
    AbsorptionTable,
    MeanAbsorption,
    RoomGeometry,
    RoomModel,
    Surface,
    absorption_at,
    default_room,
    load_room,
    mean_absorption,
    reverberation_time,
    room_reverberation,
)
from .dataset import (
    Dataset,
    GeneratorParams,
    Schedule,
    SensorReading,
    SlotSample,
    generate_synthetic,
    ingest_readings,
    label_samples,
    windowize,
)
from .detector import Detector, DetectorConfig, ThresholdRule, threshold_detect
from .evaluation import ablation, cross_validate, make_folds
from .id3 import DecisionTree, LearnerConfig, best_split, deserialize, entropy, fit, information_gain, predict, serialize

__version__ = "0.1.0"

__all__ = [
    "AbsorptionTable",
    "Dataset",
    "DecisionTree",
    "Detector",
    "DetectorConfig",
    "GeneratorParams",
    "LearnerConfig",
    "MeanAbsorption",
    "RoomGeometry",
    "RoomModel",
    "Schedule",
    "SensorReading",
    "SlotSample",
    "Surface",
    "ThresholdRule",
    "ablation",
    "absorption_at",
    "best_split",
    "cross_validate",
    "default_room",
    "deserialize",
    "entropy",
    "fit",
    "generate_synthetic",
    "information_gain",
    "ingest_readings",
    "label_samples",
    "load_room",
    "make_folds",
    "mean_absorption",
    "predict",
    "reverberation_time",
    "room_reverberation",
    "serialize",
    "threshold_detect",
    "windowize",
]
