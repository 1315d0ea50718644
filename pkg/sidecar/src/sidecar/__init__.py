"""Reference producer of rigorbench input artifacts.

Trains a small vision-transformer classifier under the evaluation
protocol the toolkit audits (k-fold with early stopping on validation
macro F1, AdamW with linear warm-up, fixed seed) and exports the
predictions CSV, attention tensors, and run log in the toolkit's own
formats, so every artifact passes the toolkit's validators.

Attribute access is lazy so `python -m sidecar.train` does not import
the module it is about to run.
"""

from sidecar.errors import DatasetMissing, DeviceUnavailable, SidecarError

__all__ = [
    "DatasetMissing",
    "DeviceUnavailable",
    "ExportPaths",
    "SidecarError",
    "TrainConfig",
    "load_config",
    "train_and_export",
]

_LAZY = {
    "TrainConfig": "sidecar.config",
    "load_config": "sidecar.config",
    "ExportPaths": "sidecar.train",
    "train_and_export": "sidecar.train",
}


def __getattr__(name: str):
    if name in _LAZY:
        import importlib

        return getattr(importlib.import_module(_LAZY[name]), name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
