"""Frame and sequence handling: PNG I/O, colorspace, protocol cropping.

Frames are float32 HWC arrays in [0, 1], either 3-channel ``rgb`` or
1-channel ``luma``.  All loaders are strict: anything other than an 8-bit
grayscale or RGB PNG is rejected rather than silently converted.
"""

from __future__ import annotations

import os
import re
import struct
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image

from .errors import (
    MissingFileError,
    MissingFrameError,
    ProtocolError,
    ShapeMismatchError,
    TecoError,
    UnsupportedBitDepthError,
    UnsupportedFormatError,
)

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"

# BT.601 luma weights.
_LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True, eq=False)
class Frame:
    """One image: float32 (H, W, C) in [0, 1] plus a colorspace tag.

    ``name`` carries the source file basename when the frame was loaded from
    disk; derived frames keep the name of their source.  It is only consulted
    by table-based perceptual backends.
    """

    data: np.ndarray
    colorspace: str = "rgb"
    name: str | None = None

    def __post_init__(self) -> None:
        d = self.data
        if not isinstance(d, np.ndarray) or d.ndim != 3:
            raise ShapeMismatchError("frame data must be an (H, W, C) array")
        if d.dtype != np.float32:
            raise ShapeMismatchError(f"frame dtype must be float32, got {d.dtype}")
        if self.colorspace not in ("rgb", "luma"):
            raise TecoError(f"unknown colorspace {self.colorspace!r}")
        channels = {"rgb": 3, "luma": 1}[self.colorspace]
        if d.shape[2] != channels:
            raise ShapeMismatchError(
                f"{self.colorspace} frame needs {channels} channels, got {d.shape[2]}"
            )
        if d.shape[0] < 1 or d.shape[1] < 1:
            raise ShapeMismatchError("frame must have positive height and width")
        if not np.isfinite(d).all():
            raise TecoError("frame contains non-finite values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True, eq=False)
class Sequence:
    """An ordered run of frames with identical shape and colorspace.

    ``start_index`` records the index of the first frame in the source
    numbering, so reports can refer to original frame numbers after skipping.
    """

    frames: tuple[Frame, ...]
    start_index: int = 0

    def __post_init__(self) -> None:
        if len(self.frames) < 1:
            raise TecoError("sequence must contain at least one frame")
        first = self.frames[0]
        for f in self.frames[1:]:
            if f.data.shape != first.data.shape:
                raise ShapeMismatchError(
                    f"frame shape {f.data.shape} != {first.data.shape}"
                )
            if f.colorspace != first.colorspace:
                raise ShapeMismatchError("mixed colorspaces in sequence")

    def __len__(self) -> int:
        return len(self.frames)

    def __getitem__(self, i: int) -> Frame:
        return self.frames[i]

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def colorspace(self) -> str:
        return self.frames[0].colorspace


def _check_png_header(path: str) -> None:
    # IHDR layout: signature(8) len(4) "IHDR"(4) width(4) height(4)
    # bit-depth(1) color-type(1).  Pillow silently narrows 16-bit channels,
    # so the depth must be read from the raw header.
    with open(path, "rb") as fh:
        head = fh.read(26)
    if len(head) < 26 or head[:8] != _PNG_SIGNATURE:
        raise UnsupportedFormatError(f"{path}: not a PNG file")
    if head[12:16] != b"IHDR":
        raise UnsupportedFormatError(f"{path}: malformed PNG header")
    bit_depth, color_type = struct.unpack(">BB", head[24:26])
    if bit_depth != 8:
        raise UnsupportedBitDepthError(
            f"{path}: unsupported bit depth {bit_depth} (only 8-bit PNG is read)"
        )
    if color_type not in (0, 2):
        raise UnsupportedFormatError(
            f"{path}: unsupported PNG color type {color_type} "
            "(only grayscale and RGB are read)"
        )


def load_frame(path: str) -> Frame:
    """Load an 8-bit grayscale or RGB PNG as a [0, 1] float32 frame.

    Raises
    ------
    MissingFileError
        ``path`` does not exist.
    UnsupportedFormatError
        Not a PNG, or a PNG variant (palette, alpha) this package rejects.
    UnsupportedBitDepthError
        PNG with bit depth other than 8.
    """
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    _check_png_header(path)
    with Image.open(path) as img:
        arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
        colorspace = "luma"
    else:
        colorspace = "rgb"
    data = (arr.astype(np.float32)) / np.float32(255.0)
    return Frame(data=data, colorspace=colorspace, name=os.path.basename(path))


def save_frame(frame: Frame, path: str) -> None:
    """Write a frame as an 8-bit PNG (values clipped and rounded)."""
    arr = np.clip(np.rint(frame.data * 255.0), 0.0, 255.0).astype(np.uint8)
    if frame.channels == 1:
        img = Image.fromarray(arr[:, :, 0], mode="L")
    else:
        img = Image.fromarray(arr, mode="RGB")
    img.save(path, format="PNG")


def _pattern_regex(pattern: str) -> re.Pattern[str]:
    m = re.search(r"%0?(\d*)d", pattern)
    if m is None:
        raise TecoError(f"pattern {pattern!r} has no %d frame-number field")
    head = re.escape(pattern[: m.start()])
    tail = re.escape(pattern[m.end() :])
    return re.compile(f"^{head}(\\d+){tail}$")


def load_sequence(
    directory: str,
    pattern: str = "%04d.png",
    start: int | None = None,
    stop: int | None = None,
) -> Sequence:
    """Load a contiguous numbered frame sequence from ``directory``.

    ``pattern`` is a printf-style filename template with one integer field.
    ``start``/``stop`` bound the source indices (inclusive).  A gap in the
    numbering is an error: evaluation assumes consecutive frames.
    """
    if not os.path.isdir(directory):
        raise MissingFileError(f"no such directory: {directory}")
    rx = _pattern_regex(pattern)
    found: dict[int, str] = {}
    for name in sorted(os.listdir(directory)):
        m = rx.match(name)
        if m is None:
            continue
        idx = int(m.group(1))
        if idx in found:
            raise TecoError(
                f"{directory}: frame index {idx} matched by both "
                f"{found[idx]!r} and {name!r}"
            )
        found[idx] = name
    indices = sorted(found)
    if start is not None:
        indices = [i for i in indices if i >= start]
    if stop is not None:
        indices = [i for i in indices if i <= stop]
    if not indices:
        raise MissingFileError(
            f"{directory}: no frames matching {pattern!r} in the requested range"
        )
    for prev, cur in zip(indices, indices[1:]):
        if cur != prev + 1:
            raise MissingFrameError(
                f"{directory}: missing frame {prev + 1} (gap before {found[cur]!r})"
            )
    frames = tuple(load_frame(os.path.join(directory, found[i])) for i in indices)
    return Sequence(frames=frames, start_index=indices[0])


def to_luma(frame: Frame) -> Frame:
    """BT.601 luma of an RGB frame; 1-channel input is returned unchanged."""
    if frame.colorspace == "luma":
        return frame
    y = frame.data @ _LUMA_WEIGHTS
    return Frame(data=y[:, :, None].astype(np.float32), colorspace="luma",
                 name=frame.name)


def _crop_bounds(extent: int, border: int, divisor: int) -> tuple[int, int]:
    inner = extent - 2 * border
    if inner < divisor:
        raise ProtocolError(
            f"extent {extent} too small for border {border} and divisor {divisor}"
        )
    rem = inner % divisor
    lo = border + rem // 2
    hi = extent - border - (rem - rem // 2)
    return lo, hi


def protocol_crop(seq: Sequence, border: int = 8, divisor: int = 8) -> Sequence:
    """Crop ``border`` pixels per side, then shrink to a ``divisor`` multiple.

    The residual after the border crop is split floor-left / ceil-right on
    each axis.  With ``border=0`` on already-aligned dimensions this is the
    identity (modulo the array copy).
    """
    if border < 0 or divisor < 1:
        raise ProtocolError("border must be >= 0 and divisor >= 1")
    y0, y1 = _crop_bounds(seq.height, border, divisor)
    x0, x1 = _crop_bounds(seq.width, border, divisor)
    frames = tuple(
        replace(f, data=np.ascontiguousarray(f.data[y0:y1, x0:x1]))
        for f in seq.frames
    )
    return Sequence(frames=frames, start_index=seq.start_index)


def skip_frames(seq: Sequence, head: int, tail: int) -> Sequence:
    """Drop ``head`` leading and ``tail`` trailing frames."""
    if head < 0 or tail < 0:
        raise ProtocolError("head and tail must be >= 0")
    if head + tail >= len(seq):
        raise ProtocolError(
            f"cannot skip {head}+{tail} frames from a length-{len(seq)} sequence"
        )
    stop = len(seq) - tail
    return Sequence(frames=seq.frames[head:stop],
                    start_index=seq.start_index + head)


def resize_bicubic(frame: Frame, height: int, width: int) -> Frame:
    """Bicubic resample to (height, width); output clipped back to [0, 1]."""
    if height < 1 or width < 1:
        raise ProtocolError("target size must be positive")
    planes = []
    for c in range(frame.channels):
        img = Image.fromarray(frame.data[:, :, c], mode="F")
        planes.append(np.asarray(img.resize((width, height), Image.BICUBIC)))
    data = np.clip(np.stack(planes, axis=-1), 0.0, 1.0).astype(np.float32)
    return Frame(data=data, colorspace=frame.colorspace, name=frame.name)
