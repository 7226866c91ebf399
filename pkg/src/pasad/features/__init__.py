from . import acoustic, melspec, physio, windowing
from .pipeline import (
    BandStats,
    WindowFeatures,
    baseline_profile,
    build_dataset,
    extract_window,
    load_window_cache,
    save_window_cache,
    subject_windows,
)
from .recording import Recording, Subject, load_cohort, load_recording, save_recording

__all__ = [
    "BandStats", "Recording", "Subject", "WindowFeatures",
    "acoustic", "baseline_profile", "build_dataset", "extract_window",
    "load_cohort", "load_recording", "load_window_cache", "melspec",
    "physio", "save_recording", "save_window_cache", "subject_windows",
    "windowing",
]
