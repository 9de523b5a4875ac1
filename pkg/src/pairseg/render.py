"""Rendering of probability maps to PNG images."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ContractViolation
from .maps import ProbMaps, argmax_segmap, entropy_map

#: categorical segment colors (RGB in [0, 1]), reused as per-segment hues
SEGMENT_COLORS = np.array(
    [
        [0.19, 0.45, 0.80],
        [0.20, 0.65, 0.32],
        [0.90, 0.77, 0.19],
        [0.80, 0.25, 0.20],
        [0.55, 0.35, 0.75],
        [0.35, 0.70, 0.70],
        [0.90, 0.45, 0.13],
        [0.55, 0.55, 0.55],
        [0.75, 0.35, 0.55],
    ]
)


def _upscale(arr: np.ndarray, scale: int) -> np.ndarray:
    if scale == 1:
        return arr
    return np.repeat(np.repeat(arr, scale, axis=0), scale, axis=1)


def render(maps: ProbMaps, mode: str = "argmax", scale: int = 1) -> dict[str, np.ndarray]:
    """Render maps to named images.

    per_segment: one black-to-hue image per segment, brightness equal to
    the probability. argmax: categorical segment colors. entropy: grayscale
    spanning [0, ln k]. Returns {name: uint8 array}.
    """
    if scale < 1:
        raise ContractViolation("scale must be >= 1")
    out: dict[str, np.ndarray] = {}
    if mode == "per_segment":
        for s in range(maps.k):
            hue = SEGMENT_COLORS[s % len(SEGMENT_COLORS)]
            img = maps.values[s][..., None] * hue[None, None, :]
            out[f"segment_{s}"] = _upscale(
                np.round(img * 255).astype(np.uint8), scale
            )
    elif mode == "argmax":
        labels = argmax_segmap(maps).labels
        colors = SEGMENT_COLORS[np.mod(np.arange(maps.k), len(SEGMENT_COLORS))]
        img = colors[labels]
        out["argmax"] = _upscale(np.round(img * 255).astype(np.uint8), scale)
    elif mode == "entropy":
        h = entropy_map(maps) / np.log(maps.k) if maps.k > 1 else entropy_map(maps)
        out["entropy"] = _upscale(np.round(h * 255).astype(np.uint8), scale)
    else:
        raise ContractViolation(f"unknown render mode {mode!r}")
    return out


def write_images(images: dict[str, np.ndarray], out_path) -> list[str]:
    """Write rendered images; multi-image modes get a name suffix."""
    out_path = Path(out_path)
    written = []
    for name, arr in images.items():
        if len(images) == 1:
            target = out_path
        else:
            target = out_path.with_name(f"{out_path.stem}_{name}{out_path.suffix}")
        Image.fromarray(arr).save(target)
        written.append(str(target))
    return written


def save_gray16(image: np.ndarray, path, manifest: dict | None = None) -> None:
    """Store a gray-level image (0..255 scale) as 16-bit PNG, plus a sidecar
    JSON manifest with the generation parameters."""
    arr = np.clip(np.asarray(image, dtype=np.float64), 0.0, 255.0)
    arr16 = np.round(arr * 257.0).astype(np.uint16)
    Image.fromarray(arr16).save(path)
    if manifest is not None:
        Path(path).with_suffix(".json").write_text(
            json.dumps(manifest, indent=1, sort_keys=True) + "\n"
        )


def load_gray16(path) -> np.ndarray:
    """Read a 16-bit grayscale PNG back to the 0..255 gray-level scale."""
    img = np.asarray(Image.open(path), dtype=np.float64)
    return img / 257.0
