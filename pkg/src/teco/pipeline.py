"""Ping-Pong sequence construction and discriminator-input triplets.

A triplet stacks three adjacent frames channel-wise (9 channels for RGB):
``original`` = (g_{t-1}, g_t, g_{t+1}), ``warped`` = neighbors aligned onto
the center frame by backward warping (with a zeroed boundary band, since
warping is unreliable near edges), ``static`` = the center frame three
times.  The curriculum blends static triplets toward warped/original ones
over a training schedule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ProtocolError, ShapeMismatchError, TecoError
from .imgseq import Frame, Sequence
from .warp import FlowField, backward_warp, scale_flow, zero_border

_KINDS = ("original", "warped", "static")

# Curriculum track names: which target the static triplets blend toward.
WARPED_TRACK = "warped-track"
ORIGINAL_TRACK = "original-track"


@dataclass(frozen=True, eq=False)
class Triplet:
    """Three same-shape frames around ``center_index``, tagged by kind."""

    slots: tuple[Frame, Frame, Frame]
    kind: str
    center_index: int

    def __post_init__(self) -> None:
        if len(self.slots) != 3:
            raise ShapeMismatchError("a triplet has exactly 3 slots")
        shape = self.slots[0].data.shape
        for f in self.slots[1:]:
            if f.data.shape != shape:
                raise ShapeMismatchError("triplet slots differ in shape")
        if self.kind not in _KINDS:
            raise TecoError(f"unknown triplet kind {self.kind!r}")
        if self.kind == "static":
            a, b, c = (f.data for f in self.slots)
            if not (np.array_equal(a, b) and np.array_equal(b, c)):
                raise TecoError("static triplet slots must be identical")

    @property
    def stack(self) -> np.ndarray:
        """Channel concatenation of the three slots: (H, W, 3C)."""
        return np.concatenate([f.data for f in self.slots], axis=2)


@dataclass(frozen=True)
class CurriculumState:
    """Training-progress snapshot: triplet mix fractions and blend factors.

    ``fractions`` = (static, warped, original) population shares;
    ``alpha`` is the blend weight inside the currently transitioning
    category; ``beta`` scales the flow used by the original-track blend.
    """

    step: int
    total_steps: int
    fractions: tuple[float, float, float]
    alpha: float
    beta: float

    def __post_init__(self) -> None:
        if self.total_steps < 1:
            raise TecoError("total_steps must be >= 1")
        if not (0 <= self.step):
            raise TecoError("step must be >= 0")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise TecoError("fractions must sum to 1")
        if not (0.0 <= self.alpha <= 1.0 and 0.0 <= self.beta <= 1.0):
            raise TecoError("alpha and beta must lie in [0, 1]")


def make_pp_sequence(s: Sequence) -> Sequence:
    """Palindrome a_1..a_n..a_1 of length 2n-1 (n=1 gives the input back)."""
    frames = s.frames + tuple(reversed(s.frames[:-1]))
    return Sequence(frames=frames, start_index=s.start_index)


def split_pp_outputs(out: Sequence) -> tuple[list[Frame], list[Frame]]:
    """Split a 2n-1 output into index-aligned legs of n-1 frames each.

    forward = out[0..n-2]; backward = out[n..2n-2] reversed, so element t of
    each list shows the same source frame generated by either leg.  The
    middle frame is shared by both legs and excluded.  Legs are plain frame
    lists (they are empty for n = 1).
    """
    if len(out) % 2 == 0:
        raise ProtocolError(
            f"ping-pong output length must be odd, got {len(out)}"
        )
    n = (len(out) + 1) // 2
    forward = list(out.frames[: n - 1])
    backward = list(reversed(out.frames[n:]))
    return forward, backward


def _interior_index(s: Sequence, t: int) -> None:
    if not (1 <= t <= len(s) - 2):
        raise ProtocolError(
            f"triplet center must be interior: 1 <= t <= {len(s) - 2}, got {t}"
        )


def triplet_original(s: Sequence, t: int) -> Triplet:
    """(g_{t-1}, g_t, g_{t+1}) around interior index t."""
    _interior_index(s, t)
    return Triplet(slots=(s[t - 1], s[t], s[t + 1]), kind="original",
                   center_index=t)


def triplet_warped(s: Sequence, fwd: FlowField, bwd: FlowField, t: int,
                   border_reset: int = 16) -> Triplet:
    """Neighbors warped onto frame t, all slots border-zeroed.

    ``fwd`` aligns g_{t-1} onto g_t and ``bwd`` aligns g_{t+1} onto g_t
    under backward warping (see flow.alignment_field for the estimation
    direction).  ``border_reset`` zeroes the outer band of every slot,
    where warped content is untrustworthy.
    """
    _interior_index(s, t)
    prev_w = backward_warp(s[t - 1], fwd)
    next_w = backward_warp(s[t + 1], bwd)
    slots = tuple(zero_border(f, border_reset)
                  for f in (prev_w, s[t], next_w))
    return Triplet(slots=slots, kind="warped", center_index=t)


def triplet_static(f: Frame, center_index: int = 0) -> Triplet:
    """The same frame three times."""
    return Triplet(slots=(f, f, f), kind="static", center_index=center_index)


def vsr_disc_input(ix: Triplet, iwx: Triplet, ia: Triplet) -> np.ndarray:
    """Discriminator input: concat(Ix, Iwx, Ia) along channels (27 for RGB).

    ``ia`` is the conditional input triplet, already resized to the output
    resolution by the caller.  Concatenation order is part of the data
    contract.
    """
    shape = ix.slots[0].data.shape
    for tri in (iwx, ia):
        if tri.slots[0].data.shape != shape:
            raise ShapeMismatchError("triplets differ in frame shape")
    return np.concatenate([ix.stack, iwx.stack, ia.stack], axis=2)


def curriculum_schedule(step: int, total_steps: int) -> CurriculumState:
    """Mix fractions and blend factors at a training step.

    Fractions ramp linearly (1,0,0) -> (0.75,0.25,0) over the first half of
    training (static-to-warped transition), then -> (0.5,0.25,0.25) over the
    second half (static-to-original transition).  ``alpha`` ramps 0 -> 1
    inside each half; ``beta`` stays 1, then decays 1 -> 0 alongside the
    original transition.  Steps beyond ``total_steps`` hold the final state.
    """
    if total_steps < 1:
        raise TecoError("total_steps must be >= 1")
    if step < 0:
        raise TecoError("step must be >= 0")
    step = min(step, total_steps)
    half = total_steps / 2.0
    if step <= half:
        ramp = step / half
        fractions = (1.0 - 0.25 * ramp, 0.25 * ramp, 0.0)
        alpha, beta = ramp, 1.0
    else:
        ramp = (step - half) / (total_steps - half)
        fractions = (0.75 - 0.25 * ramp, 0.25, 0.25 * ramp)
        alpha, beta = ramp, 1.0 - ramp
    return CurriculumState(step=step, total_steps=total_steps,
                           fractions=fractions, alpha=alpha, beta=beta)


def _blend(a: Frame, b: Frame, alpha: float) -> Frame:
    data = ((1.0 - alpha) * a.data.astype(np.float64)
            + alpha * b.data.astype(np.float64))
    return Frame(data=data.astype(np.float32), colorspace=a.colorspace,
                 name=b.name)


OriginalParts = tuple[Frame, Frame, Frame, FlowField, FlowField]


def curriculum_mix(static: Triplet, warped: Triplet | None,
                   original_parts: OriginalParts | None,
                   state: CurriculumState, category: str) -> Triplet:
    """Blend the static triplet toward its category target.

    warped-track: (1-alpha) * static + alpha * warped (the warped triplet
    arrives already border-zeroed).  original-track: (1-alpha) * static +
    alpha * (W(g_{t-1}, beta*v), g_t, W(g_{t+1}, beta*v')), unzeroed so the
    alpha=1, beta=0 endpoint is exactly the original triplet.  Endpoints are
    bit-exact: alpha=0 returns the static slots unchanged.
    """
    alpha = state.alpha
    if category == WARPED_TRACK:
        if warped is None:
            raise TecoError("warped-track mix needs the warped triplet")
        if alpha == 0.0:
            return static
        if alpha == 1.0:
            return warped
        slots = tuple(_blend(s, w, alpha)
                      for s, w in zip(static.slots, warped.slots))
        return Triplet(slots=slots, kind="warped",
                       center_index=warped.center_index)
    if category == ORIGINAL_TRACK:
        if original_parts is None:
            raise TecoError("original-track mix needs the original parts")
        g_prev, g_cur, g_next, v_fwd, v_bwd = original_parts
        if alpha == 0.0:
            return static
        target = (
            backward_warp(g_prev, scale_flow(v_fwd, state.beta)),
            g_cur,
            backward_warp(g_next, scale_flow(v_bwd, state.beta)),
        )
        if alpha == 1.0:
            slots = target
        else:
            slots = tuple(_blend(s, t, alpha)
                          for s, t in zip(static.slots, target))
        return Triplet(slots=slots, kind="original",
                       center_index=static.center_index)
    raise TecoError(
        f"unknown curriculum category {category!r} "
        f"(expected {WARPED_TRACK!r} or {ORIGINAL_TRACK!r})"
    )
