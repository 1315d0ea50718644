"""Small image I/O and raster helpers used across the toolkit."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import UndecodableImage

# (flipped, quarter turns counterclockwise) for the 8 dihedral variants.
# Flip is applied first, then the rotation.
DIHEDRAL_VARIANTS: tuple[tuple[str, bool, int], ...] = (
    ("identity", False, 0),
    ("rot90", False, 1),
    ("rot180", False, 2),
    ("rot270", False, 3),
    ("flip_h", True, 0),
    ("flip+rot", True, 1),
    ("flip_v", True, 2),
    ("flip+rot270", True, 3),
)


def load_rgb(path: str | Path) -> np.ndarray:
    """Decode an image file to an HxWx3 uint8 array.

    Raises UndecodableImage when the file is missing, truncated, or not an
    image format PIL understands.
    """
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise UndecodableImage(f"cannot decode {path}: {exc}") from exc


def save_png(path: str | Path, array: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(array.astype(np.uint8))).save(path, format="PNG")


def encode_png_bytes(array: np.ndarray) -> bytes:
    """Deterministic PNG encoding of an HxWx3 uint8 array."""
    import io

    buf = io.BytesIO()
    Image.fromarray(np.ascontiguousarray(array.astype(np.uint8))).save(buf, format="PNG")
    return buf.getvalue()


def dihedral(array: np.ndarray, flipped: bool, quarter_turns: int) -> np.ndarray:
    """Apply one of the 8 square-symmetry transforms, exactly (no resampling)."""
    out = array
    if flipped:
        out = out[:, ::-1]
    if quarter_turns % 4:
        out = np.rot90(out, k=quarter_turns % 4)
    return np.ascontiguousarray(out)


def round_half_up_u8(values: np.ndarray) -> np.ndarray:
    """Round to nearest with halves up, clamped to uint8.

    NumPy's default rounds halves to even, which would make pixel values
    depend on parity; floor(x + 0.5) keeps the mapping monotone.
    """
    return np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)
