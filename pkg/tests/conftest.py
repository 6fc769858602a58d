from __future__ import annotations

import os

import numpy as np
import pytest
from scipy import ndimage

from teco.imgseq import Frame, save_frame


def smooth_texture(height: int, width: int, seed: int,
                   sigma: float = 2.0) -> np.ndarray:
    """Seeded band-limited random texture in [0, 1], tileable (wrap mode),
    so rolled copies are globally consistent translations."""
    rng = np.random.default_rng(seed)
    base = ndimage.gaussian_filter(rng.random((height, width)), sigma,
                                   mode="wrap")
    lo, hi = base.min(), base.max()
    return ((base - lo) / (hi - lo)).astype(np.float32)


def rgb_frame(data2d: np.ndarray, name: str | None = None) -> Frame:
    return Frame(np.repeat(data2d.astype(np.float32)[:, :, None], 3, axis=2),
                 "rgb", name=name)


def luma_frame(data2d: np.ndarray, name: str | None = None) -> Frame:
    return Frame(data2d.astype(np.float32)[:, :, None], "luma", name=name)


def random_rgb_frame(rng: np.random.Generator, height: int = 24,
                     width: int = 32, name: str | None = None) -> Frame:
    return Frame(rng.random((height, width, 3), dtype=np.float32), "rgb",
                 name=name)


def write_scene(directory: str, frames: list[Frame],
                pattern: str = "%04d.png", start: int = 1) -> str:
    os.makedirs(directory, exist_ok=True)
    for i, frame in enumerate(frames):
        save_frame(frame, os.path.join(directory, pattern % (start + i)))
    return directory


def rolling_scene_frames(n: int, height: int = 72, width: int = 96,
                         seed: int = 5, step: int = 1) -> list[Frame]:
    """n RGB frames of a texture translating `step` px right per frame."""
    tex = smooth_texture(height, width, seed)
    return [rgb_frame(np.roll(tex, i * step, axis=1)) for i in range(n)]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)
