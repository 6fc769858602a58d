"""Generator/discriminator loss terms as pure array functions.

Convention: every ||.||_2 term is implemented as a mean squared error (not
a root, not a sum) so values are resolution independent.  Log arguments are
clamped at 1e-8, cosine denominators at 1e-12.  These functions serve
evaluation and act as executable reference semantics for training code; no
gradients are provided.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError, TecoError
from .imgseq import Frame, Sequence
from .warp import FlowField, backward_warp

_LOG_EPS = 1e-8
_COS_EPS = 1e-12

# Part names accepted by total_generator_loss, in weighting order.
PART_NAMES = ("warp", "pp", "adv", "phi", "content")


@dataclass(frozen=True)
class LossWeights:
    """Non-negative weights for the total generator objective."""

    warp: float
    pp: float
    adv: float
    phi: float
    content: float

    def __post_init__(self) -> None:
        for name in PART_NAMES:
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0.0):
                raise TecoError(f"weight {name} must be finite and >= 0")


def vsr_weights(phi_source: str = "vgg") -> LossWeights:
    """Super-resolution preset; phi weight depends on the feature source.

    ``phi_source`` picks between the two published feature weightings:
    0.2 for VGG feature maps, 1.0 for discriminator feature maps.
    """
    if phi_source not in ("vgg", "disc"):
        raise TecoError("phi_source must be 'vgg' or 'disc'")
    phi = 0.2 if phi_source == "vgg" else 1.0
    return LossWeights(warp=1.0, pp=0.5, adv=1e-3, phi=phi, content=1.0)


def uvt_weights() -> LossWeights:
    """Unpaired-translation preset.

    The phi weight stored here (1e6) is the initial value of a schedule
    that decays to 0 over training; scheduling is the trainer's concern.
    """
    return LossWeights(warp=0.0, pp=100.0, adv=0.5, phi=1e6, content=10.0)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Flattened feature activations: ``data`` is channels x positions."""

    channels: int
    positions: int
    data: np.ndarray

    def __post_init__(self) -> None:
        if self.channels < 1 or self.positions < 1:
            raise TecoError("channels and positions must be >= 1")
        if self.data.shape != (self.channels, self.positions):
            raise ShapeMismatchError(
                f"feature data shape {self.data.shape} != "
                f"{(self.channels, self.positions)}"
            )
        if not np.isfinite(self.data).all():
            raise TecoError("feature map contains non-finite values")

    @classmethod
    def from_frame(cls, frame: Frame) -> "FeatureMap":
        data = frame.data.reshape(-1, frame.channels).T.astype(np.float64)
        return cls(channels=frame.channels,
                   positions=frame.height * frame.width, data=data)


def _mse(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))


def _frame_list(s: Sequence | Iterable[Frame]) -> list[Frame]:
    if isinstance(s, Sequence):
        return list(s.frames)
    return list(s)


def warp_loss(a: Sequence | Iterable[Frame],
              flows: Iterable[FlowField],
              border: int = 0) -> float:
    """sum_t MSE(a_t, W(a_{t-1}, flow_t)), one flow per consecutive pair.

    ``border`` excludes an edge band from each per-pair mean, for fixtures
    where warping is exact only on the interior.
    """
    frames = _frame_list(a)
    flow_list = list(flows)
    if len(flow_list) != len(frames) - 1:
        raise ShapeMismatchError(
            f"need {len(frames) - 1} flows for {len(frames)} frames, "
            f"got {len(flow_list)}"
        )
    if border < 0:
        raise TecoError("border must be >= 0")
    total = 0.0
    for t in range(1, len(frames)):
        warped = backward_warp(frames[t - 1], flow_list[t - 1])
        cur = frames[t].data
        ref = warped.data
        if border > 0:
            if 2 * border >= min(cur.shape[0], cur.shape[1]):
                raise TecoError("border leaves no interior pixels")
            cur = cur[border:-border, border:-border]
            ref = ref[border:-border, border:-border]
        total += _mse(cur, ref)
    return total


def pp_loss(forward: Sequence | Iterable[Frame],
            backward: Sequence | Iterable[Frame]) -> float:
    """sum of per-pair MSE between index-aligned forward/backward frames.

    Empty legs (single-frame source) give 0; the shared middle frame is
    excluded by construction and must not appear in either leg.
    """
    fwd = _frame_list(forward)
    bwd = _frame_list(backward)
    if len(fwd) != len(bwd):
        raise ShapeMismatchError(
            f"leg lengths differ: {len(fwd)} vs {len(bwd)}"
        )
    total = 0.0
    for f, b in zip(fwd, bwd):
        if f.data.shape != b.data.shape:
            raise ShapeMismatchError("paired frames differ in shape")
        total += _mse(f.data, b.data)
    return total


def content_loss_vsr(g: Frame, b: Frame) -> float:
    """MSE between generated and target frames."""
    if g.data.shape != b.data.shape:
        raise ShapeMismatchError("frame shapes differ")
    return _mse(g.data, b.data)


def content_loss_uvt(cycle_a: Frame, a: Frame, cycle_b: Frame, b: Frame) -> float:
    """Sum of the two cycle-consistency MSEs."""
    if cycle_a.data.shape != a.data.shape or cycle_b.data.shape != b.data.shape:
        raise ShapeMismatchError("cycle/source frame shapes differ")
    return _mse(cycle_a.data, a.data) + _mse(cycle_b.data, b.data)


def _scores(d: object) -> np.ndarray:
    arr = np.asarray(d, dtype=np.float64)
    if arr.size == 0:
        raise TecoError("score array is empty")
    if not np.isfinite(arr).all():
        raise TecoError("scores contain non-finite values")
    return arr


def adv_g_vsr(d_fake: object) -> float:
    """Non-saturated generator loss mean(-log d), d clamped to [1e-8, 1]."""
    d = np.clip(_scores(d_fake), _LOG_EPS, 1.0)
    return float(np.mean(-np.log(d)))


def adv_g_uvt(d_fake: object) -> float:
    """Least-squares generator objective mean((d - 1)^2)."""
    d = _scores(d_fake)
    return float(np.mean((d - 1.0) ** 2))


def d_loss_vsr(d_real: object, d_fake: object) -> float:
    """mean(-log d_real) + mean(-log(1 - d_fake)), both clamped."""
    dr = np.clip(_scores(d_real), _LOG_EPS, 1.0)
    df = np.clip(1.0 - _scores(d_fake), _LOG_EPS, 1.0)
    return float(np.mean(-np.log(dr)) + np.mean(-np.log(df)))


def d_loss_uvt(d_real: object, d_fake: object) -> float:
    """Least-squares discriminator: mean((d_real - 1)^2) + mean(d_fake^2)."""
    dr = _scores(d_real)
    df = _scores(d_fake)
    return float(np.mean((dr - 1.0) ** 2) + np.mean(df ** 2))


def cosine_feature_loss(fg: FeatureMap, fb: FeatureMap) -> float:
    """1 - cosine similarity of the flattened feature vectors."""
    if fg.data.shape != fb.data.shape:
        raise ShapeMismatchError("feature shapes differ")
    x = fg.data.reshape(-1).astype(np.float64)
    y = fb.data.reshape(-1).astype(np.float64)
    denom = max(float(np.linalg.norm(x) * np.linalg.norm(y)), _COS_EPS)
    return float(1.0 - float(x @ y) / denom)


def gram_matrix(f: FeatureMap) -> np.ndarray:
    """G = (F F^T) / positions, channels x channels, symmetric PSD."""
    data = f.data.astype(np.float64)
    return (data @ data.T) / float(f.positions)


def gram_loss(fg: FeatureMap, fb: FeatureMap) -> float:
    """Mean squared difference of the two Gram matrices."""
    ga = gram_matrix(fg)
    gb = gram_matrix(fb)
    if ga.shape != gb.shape:
        raise ShapeMismatchError("gram shapes differ (channel counts)")
    return _mse(ga, gb)


def total_generator_loss(parts: Mapping[str, float], w: LossWeights) -> float:
    """Weighted sum over PART_NAMES; absent parts count as 0 with a warning."""
    unknown = sorted(set(parts) - set(PART_NAMES))
    if unknown:
        raise TecoError(f"unknown loss parts: {', '.join(unknown)}")
    missing = [n for n in PART_NAMES if n not in parts]
    if missing:
        warnings.warn(
            f"loss parts treated as 0: {', '.join(missing)}",
            RuntimeWarning, stacklevel=2,
        )
    total = 0.0
    for name in PART_NAMES:
        value = float(parts.get(name, 0.0))
        if not math.isfinite(value):
            raise TecoError(f"loss part {name} is not finite")
        total += getattr(w, name) * value
    return total
