"""From-scratch Farneback dense optical flow, plus Middlebury .flo I/O.

Each frame is approximated per pixel by a quadratic polynomial
f(x + d) ~ d'Ad + b'd + c fitted by weighted least squares over a Gaussian
applicability window.  Displacements then solve A d = db between the two
expansions, averaged over a box neighborhood, coarse-to-fine over a Gaussian
pyramid.  ``estimate_flow(prev, next)`` returns the content motion from
``prev`` to ``next``: for ``next = roll(prev, (+3, -2))`` along (x, y) the
field converges to (u, v) = (3, -2).
"""

from __future__ import annotations

import math
import os
import struct
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import (
    MissingFileError,
    ShapeMismatchError,
    TecoError,
    UnsupportedFormatError,
)
from .imgseq import Frame, to_luma
from .warp import FlowField, bilinear_sample

# Levels smaller than this per side carry too little structure to help.
_MIN_LEVEL_SIDE = 16

# Tikhonov ridge on the normal equations: keeps structure-free regions at
# exactly zero displacement instead of dividing by a vanishing determinant.
_RIDGE = 1e-9

_FLO_MAGIC = np.float32(202021.25)


@dataclass(frozen=True)
class FlowParams:
    """Farneback parameters (the de-facto standard defaults).

    ``window`` is the box-averaging neighborhood, ``poly_n`` the odd size of
    the polynomial-expansion window, ``poly_sigma`` its Gaussian weighting.
    """

    pyramid_scale: float = 0.5
    levels: int = 3
    window: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.2

    def __post_init__(self) -> None:
        if not (0.0 < self.pyramid_scale < 1.0):
            raise TecoError("pyramid_scale must be in (0, 1)")
        if self.levels < 1:
            raise TecoError("levels must be >= 1")
        if self.window < 3 or self.window % 2 == 0:
            raise TecoError("window must be odd and >= 3")
        if self.iterations < 1:
            raise TecoError("iterations must be >= 1")
        if self.poly_n < 3 or self.poly_n % 2 == 0:
            raise TecoError("poly_n must be odd and >= 3")
        if not (math.isfinite(self.poly_sigma) and self.poly_sigma > 0):
            raise TecoError("poly_sigma must be positive")


def _resize_bilinear(arr: np.ndarray, height: int, width: int) -> np.ndarray:
    """Area-convention bilinear resize of an (H, W[, C]) float array."""
    h_in, w_in = arr.shape[:2]
    if (h_in, w_in) == (height, width):
        return arr.astype(np.float64, copy=True)
    ys = (np.arange(height, dtype=np.float64) + 0.5) * (h_in / height) - 0.5
    xs = (np.arange(width, dtype=np.float64) + 0.5) * (w_in / width) - 0.5
    xg, yg = np.meshgrid(xs, ys)
    return bilinear_sample(arr, xg, yg)


def gaussian_pyramid(frame: Frame, levels: int, scale: float) -> list[Frame]:
    """Luma pyramid: level 0 = input, each next level smoothed and resampled.

    Levels whose smaller side would drop below 16 px are truncated.
    """
    if frame.channels != 1:
        raise ShapeMismatchError("gaussian_pyramid expects a 1-channel frame")
    if not (0.0 < scale < 1.0):
        raise TecoError("scale must be in (0, 1)")
    if levels < 1:
        raise TecoError("levels must be >= 1")
    # Anti-alias std for a 1/scale dilation: half the residual spread.
    sigma = math.sqrt((1.0 / scale) ** 2 - 1.0) / 2.0
    out = [frame]
    cur = frame.data[:, :, 0].astype(np.float64)
    for _ in range(1, levels):
        nh = max(int(round(cur.shape[0] * scale)), 1)
        nw = max(int(round(cur.shape[1] * scale)), 1)
        if min(nh, nw) < _MIN_LEVEL_SIDE:
            break
        cur = _resize_bilinear(ndimage.gaussian_filter(cur, sigma, mode="nearest"),
                               nh, nw)
        out.append(Frame(data=cur[:, :, None].astype(np.float32),
                         colorspace="luma", name=frame.name))
    return out


def _poly_kernels(poly_n: int, poly_sigma: float):
    r = poly_n // 2
    off = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-(off**2) / (2.0 * poly_sigma**2))
    g /= g.sum()
    return off, g, off * g, off * off * g


def _poly_planes(img: np.ndarray, poly_n: int, poly_sigma: float):
    """Quadratic-expansion coefficient planes (a11, a12, a22, b1, b2, c).

    Separable correlations project the signal onto the weighted monomial
    basis {1, x, y, x^2, y^2, xy}; one shared normal-equation inverse maps
    projections to coefficients (the window is translation invariant).
    """
    off, g, gx, gxx = _poly_kernels(poly_n, poly_sigma)

    def sep(kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
        tmp = ndimage.correlate1d(img, kx, axis=1, mode="nearest")
        return ndimage.correlate1d(tmp, ky, axis=0, mode="nearest")

    proj = [sep(g, g), sep(gx, g), sep(g, gx), sep(gxx, g), sep(g, gxx),
            sep(gx, gx)]
    dy, dx = np.meshgrid(off, off, indexing="ij")
    basis = np.stack(
        [np.ones_like(dx), dx, dy, dx * dx, dy * dy, dx * dy], axis=-1
    ).reshape(-1, 6)
    wts = np.outer(g, g).reshape(-1)
    m = basis.T @ (wts[:, None] * basis)
    inv_m = np.linalg.inv(m)

    def recombine(row: int) -> np.ndarray:
        # Plain elementwise accumulation: bit-reproducible across BLAS builds.
        c0, c1, c2, c3, c4, c5 = inv_m[row]
        return (proj[0] * c0 + proj[1] * c1 + proj[2] * c2 + proj[3] * c3
                + proj[4] * c4 + proj[5] * c5)

    c = recombine(0)
    b1 = recombine(1)
    b2 = recombine(2)
    a11 = recombine(3)
    a22 = recombine(4)
    a12 = recombine(5) / 2.0
    return a11, a12, a22, b1, b2, c


def poly_expansion(frame: Frame, poly_n: int = 5, poly_sigma: float = 1.2):
    """Per-pixel quadratic fit f(x+d) ~ d'Ad + b'd + c of a luma frame.

    Returns (A, b, c) with shapes (H, W, 2, 2), (H, W, 2), (H, W); A is
    symmetric by construction.
    """
    if frame.channels != 1:
        raise ShapeMismatchError("poly_expansion expects a 1-channel frame")
    if poly_n < 3 or poly_n % 2 == 0:
        raise TecoError("poly_n must be odd and >= 3")
    if not (math.isfinite(poly_sigma) and poly_sigma > 0):
        raise TecoError("poly_sigma must be positive")
    a11, a12, a22, b1, b2, c = _poly_planes(
        frame.data[:, :, 0].astype(np.float64), poly_n, poly_sigma
    )
    amat = np.empty(a11.shape + (2, 2), dtype=np.float64)
    amat[:, :, 0, 0] = a11
    amat[:, :, 0, 1] = a12
    amat[:, :, 1, 0] = a12
    amat[:, :, 1, 1] = a22
    bvec = np.stack([b1, b2], axis=-1)
    return amat, bvec, c


def _flow_level(p1, p2stack, u, v, window: int, iterations: int):
    a11_1, a12_1, a22_1, b1_1, b2_1 = p1
    h, w = a11_1.shape
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    for _ in range(iterations):
        s = bilinear_sample(p2stack, xs + u, ys + v)
        a11 = 0.5 * (a11_1 + s[:, :, 0])
        a12 = 0.5 * (a12_1 + s[:, :, 1])
        a22 = 0.5 * (a22_1 + s[:, :, 2])
        db1 = -0.5 * (s[:, :, 3] - b1_1) + a11 * u + a12 * v
        db2 = -0.5 * (s[:, :, 4] - b2_1) + a12 * u + a22 * v
        g11 = ndimage.uniform_filter(a11 * a11 + a12 * a12, window,
                                     mode="nearest") + _RIDGE
        g12 = ndimage.uniform_filter(a12 * (a11 + a22), window, mode="nearest")
        g22 = ndimage.uniform_filter(a12 * a12 + a22 * a22, window,
                                     mode="nearest") + _RIDGE
        h1 = ndimage.uniform_filter(a11 * db1 + a12 * db2, window,
                                    mode="nearest")
        h2 = ndimage.uniform_filter(a12 * db1 + a22 * db2, window,
                                    mode="nearest")
        det = g11 * g22 - g12 * g12
        u = (g22 * h1 - g12 * h2) / det
        v = (g11 * h2 - g12 * h1) / det
    return u, v


def estimate_flow(prev: Frame, next: Frame,
                  params: FlowParams | None = None) -> FlowField:
    """Dense motion from ``prev`` to ``next`` (direction tag ``forward``).

    Frames are converted to luma internally.  Identical inputs yield an
    exactly zero field; the result is bit-deterministic for fixed inputs
    and parameters.
    """
    if params is None:
        params = FlowParams()
    if prev.data.shape != next.data.shape:
        raise ShapeMismatchError(
            f"frame shapes differ: {prev.data.shape} vs {next.data.shape}"
        )
    pyr1 = gaussian_pyramid(to_luma(prev), params.levels, params.pyramid_scale)
    pyr2 = gaussian_pyramid(to_luma(next), params.levels, params.pyramid_scale)
    u = v = None
    for lvl in range(len(pyr1) - 1, -1, -1):
        img1 = pyr1[lvl].data[:, :, 0].astype(np.float64)
        img2 = pyr2[lvl].data[:, :, 0].astype(np.float64)
        h, w = img1.shape
        if u is None:
            u = np.zeros((h, w), dtype=np.float64)
            v = np.zeros((h, w), dtype=np.float64)
        else:
            h_old, w_old = u.shape
            stacked = _resize_bilinear(np.stack([u, v], axis=-1), h, w)
            u = stacked[:, :, 0] * (w / w_old)
            v = stacked[:, :, 1] * (h / h_old)
        p1 = _poly_planes(img1, params.poly_n, params.poly_sigma)[:5]
        p2 = _poly_planes(img2, params.poly_n, params.poly_sigma)
        p2stack = np.stack(p2[:5], axis=-1)
        u, v = _flow_level(p1, p2stack, u, v, params.window, params.iterations)
    data = np.stack([u, v], axis=-1).astype(np.float32)
    if not np.isfinite(data).all():
        raise TecoError("flow estimation produced non-finite values")
    return FlowField(data=data, direction="forward")


def alignment_field(src: Frame, dst: Frame,
                    params: FlowParams | None = None) -> FlowField:
    """Field v with backward_warp(src, v) ~ dst (direction tag ``backward``).

    Backward warping gathers from displaced coordinates, so the field that
    aligns ``src`` onto ``dst`` is the motion estimated from ``dst`` to
    ``src``.
    """
    est = estimate_flow(dst, src, params)
    return FlowField(data=est.data, direction="backward")


def write_flo(flow: FlowField, path: str) -> None:
    """Write Middlebury .flo: "PIEH", int32 width/height, row-major (u, v)."""
    h, w = flow.height, flow.width
    with open(path, "wb") as fh:
        fh.write(_FLO_MAGIC.tobytes())
        fh.write(struct.pack("<ii", w, h))
        fh.write(np.ascontiguousarray(flow.data, dtype="<f4").tobytes())


def read_flo(path: str) -> FlowField:
    """Read a Middlebury .flo file written by :func:`write_flo`."""
    if not os.path.isfile(path):
        raise MissingFileError(f"no such file: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 12:
        raise UnsupportedFormatError(f"{path}: truncated .flo header")
    magic = np.frombuffer(raw[:4], dtype="<f4")[0]
    if magic != _FLO_MAGIC:
        raise UnsupportedFormatError(f"{path}: bad .flo magic {magic!r}")
    w, h = struct.unpack("<ii", raw[4:12])
    if not (0 < w < 100000 and 0 < h < 100000):
        raise UnsupportedFormatError(f"{path}: implausible .flo size {w}x{h}")
    expect = 12 + 8 * w * h
    if len(raw) != expect:
        raise UnsupportedFormatError(
            f"{path}: .flo payload is {len(raw) - 12} bytes, expected "
            f"{expect - 12}"
        )
    data = np.frombuffer(raw[12:], dtype="<f4").reshape(h, w, 2)
    return FlowField(data=np.ascontiguousarray(data, dtype=np.float32),
                     direction="forward")
