"""ECG arrhythmia pipeline: QRS detection, rasterisation, datasets, classifiers, metrics."""

__version__ = "0.1.0"

from .errors import DataError, DomainError, EcgError, FormatError, TrainingError, TruncationError
from .filters import BandpassSpec, IirCoefficients, apply_filter, design_bandpass
from .qrs import DetectorConfig, QrsFeatures, detect_qrs, enhance, find_peaks, qrs_features
from .raster import RasterConfig, RasterImage, rasterize, read_png, write_png
from .records import (CLASSES, LEAD_NAMES, ArrhythmiaClass, EcgRecord, LeadId, QrsAnnotation,
                      import_csv, read_record, write_record)

__all__ = [
    "DataError", "DomainError", "EcgError", "FormatError", "TrainingError", "TruncationError",
    "BandpassSpec", "IirCoefficients", "apply_filter", "design_bandpass",
    "DetectorConfig", "QrsFeatures", "detect_qrs", "enhance", "find_peaks", "qrs_features",
    "RasterConfig", "RasterImage", "rasterize", "read_png", "write_png",
    "CLASSES", "LEAD_NAMES", "ArrhythmiaClass", "EcgRecord", "LeadId", "QrsAnnotation",
    "import_csv", "read_record", "write_record",
]
