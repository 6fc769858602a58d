"""Backward warping W(f, v) with bilinear sampling, plus boundary zeroing.

A :class:`FlowField` stores per-pixel displacements (u, v) = (horizontal,
vertical) in pixels.  ``backward_warp`` gathers: the output at (x, y) is the
input sampled at (x + u, y + v), bilinearly interpolated with edge-clamped
coordinates, so zero flow is a bit-exact identity and constant images are
warp-invariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, TecoError
from .imgseq import Frame


@dataclass(frozen=True, eq=False)
class FlowField:
    """Dense displacement field, shape (H, W, 2), last axis (u, v).

    ``direction`` records how the field was estimated (``forward`` =
    earlier-to-later frame, ``backward`` = the alignment fields used for
    warping).  It is metadata only; no numeric path branches on it.
    """

    data: np.ndarray
    direction: str = "forward"

    def __post_init__(self) -> None:
        d = self.data
        if not isinstance(d, np.ndarray) or d.ndim != 3 or d.shape[2] != 2:
            raise ShapeMismatchError("flow data must be an (H, W, 2) array")
        if d.dtype != np.float32:
            raise ShapeMismatchError(f"flow dtype must be float32, got {d.dtype}")
        if self.direction not in ("forward", "backward"):
            raise TecoError(f"unknown flow direction {self.direction!r}")
        if not np.isfinite(d).all():
            raise TecoError("flow contains non-finite values")

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.data[:, :, 0]

    @property
    def v(self) -> np.ndarray:
        return self.data[:, :, 1]


def bilinear_sample(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample ``data`` (H, W[, C]) at float coordinates, edge-clamped.

    ``xs`` and ``ys`` share a common shape; the result has that shape plus
    any trailing channel axis of ``data``.  Accumulation runs in float64.
    At exact integer coordinates the result is the stored value, bit-exact.
    """
    h, w = data.shape[:2]
    x0f = np.floor(xs)
    y0f = np.floor(ys)
    fx = (xs - x0f).astype(np.float64)
    fy = (ys - y0f).astype(np.float64)
    x0u = x0f.astype(np.int64)
    y0u = y0f.astype(np.int64)
    x0 = np.clip(x0u, 0, w - 1)
    y0 = np.clip(y0u, 0, h - 1)
    x1 = np.clip(x0u + 1, 0, w - 1)
    y1 = np.clip(y0u + 1, 0, h - 1)
    if data.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    v00 = data[y0, x0].astype(np.float64)
    v01 = data[y0, x1].astype(np.float64)
    v10 = data[y1, x0].astype(np.float64)
    v11 = data[y1, x1].astype(np.float64)
    top = (1.0 - fx) * v00 + fx * v01
    bot = (1.0 - fx) * v10 + fx * v11
    return (1.0 - fy) * top + fy * bot


def _flow_array(flow: FlowField | np.ndarray) -> np.ndarray:
    if isinstance(flow, FlowField):
        return flow.data
    if not isinstance(flow, np.ndarray) or flow.ndim != 3 or flow.shape[2] != 2:
        raise ShapeMismatchError("flow must be a FlowField or an (H, W, 2) array")
    if not np.isfinite(flow).all():
        raise TecoError("flow contains non-finite values")
    return flow


def backward_warp(frame: Frame, flow: FlowField | np.ndarray) -> Frame:
    """Warp ``frame`` by ``flow``: out(x, y) = frame(x + u, y + v)."""
    fl = _flow_array(flow)
    if fl.shape[:2] != (frame.height, frame.width):
        raise ShapeMismatchError(
            f"flow shape {fl.shape[:2]} != frame shape "
            f"{(frame.height, frame.width)}"
        )
    ys, xs = np.meshgrid(
        np.arange(frame.height, dtype=np.float64),
        np.arange(frame.width, dtype=np.float64),
        indexing="ij",
    )
    sampled = bilinear_sample(
        frame.data,
        xs + fl[:, :, 0].astype(np.float64),
        ys + fl[:, :, 1].astype(np.float64),
    )
    return Frame(data=sampled.astype(np.float32), colorspace=frame.colorspace,
                 name=frame.name)


def scale_flow(flow: FlowField, factor: float) -> FlowField:
    """Multiply both displacement components by a scalar."""
    if not math.isfinite(factor):
        raise TecoError("scale factor must be finite")
    return FlowField(data=(flow.data * np.float32(factor)).astype(np.float32),
                     direction=flow.direction)


def zero_border(frame: Frame, margin: int = 16) -> Frame:
    """Zero a ``margin``-pixel band around the frame; interior is untouched."""
    if margin < 0:
        raise TecoError("margin must be >= 0")
    if margin == 0:
        return Frame(data=frame.data.copy(), colorspace=frame.colorspace,
                     name=frame.name)
    if 2 * margin >= min(frame.height, frame.width):
        raise TecoError(
            f"margin {margin} leaves no interior in a "
            f"{frame.height}x{frame.width} frame"
        )
    data = np.zeros_like(frame.data)
    data[margin:-margin, margin:-margin] = frame.data[margin:-margin, margin:-margin]
    return Frame(data=data, colorspace=frame.colorspace, name=frame.name)
