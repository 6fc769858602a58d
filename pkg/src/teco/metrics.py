"""Spatial/temporal metrics and the protocol-aware scene evaluator.

Reported values are raw (unscaled) means of per-frame values; the display
multipliers conventionally used in result tables (x10 for tOF, x100 for
T-diff and tLP) live in the report's ``scaling`` map and are applied only
when rendering human-readable output.

Norm conventions: per-pixel L1 quantities are averaged over pixels (and
channels), not summed, so values are resolution independent.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BackendError, ProtocolError, ShapeMismatchError, TecoError
from .flow import FlowParams, alignment_field, estimate_flow
from .imgseq import (
    Frame,
    Sequence,
    load_sequence,
    protocol_crop,
    resize_bicubic,
)
from .perceptual import PerceptualBackend, get_backend
from .warp import FlowField, backward_warp

METRIC_NAMES = ("psnr", "tdiff", "tdiff_gap", "tof", "tlp")

SCALING = {"psnr": 1.0, "tdiff": 100.0, "tdiff_gap": 100.0, "tof": 10.0,
           "tlp": 100.0}
DIRECTION = {"psnr": "up", "tdiff": "down", "tdiff_gap": "down",
             "tof": "down", "tlp": "down"}

# Human-readable column labels with the scaling baked into the name.
LABELS = {"psnr": "PSNR (dB)", "tdiff": "T-diff x100",
          "tdiff_gap": "T-diff-gap x100", "tof": "tOF x10",
          "tlp": "tLP x100"}

_SPATIAL = ("psnr",)


def default_metrics(mode: str) -> tuple[str, ...]:
    if mode == "vsr":
        return ("psnr", "tdiff", "tdiff_gap", "tof", "tlp")
    if mode == "uvt":
        return ("tdiff", "tdiff_gap", "tof", "tlp")
    raise ProtocolError(f"unknown mode {mode!r}")


def psnr(gt: Frame, gen: Frame) -> float:
    """10 log10(1 / MSE) over all channels; identical frames give +inf."""
    if gt.data.shape != gen.data.shape:
        raise ShapeMismatchError(
            f"frame shapes differ: {gt.data.shape} vs {gen.data.shape}"
        )
    mse = float(np.mean(
        (gt.data.astype(np.float64) - gen.data.astype(np.float64)) ** 2
    ))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * math.log10(1.0 / mse))


def _tdiff_pair(prev: Frame, cur: Frame, params: FlowParams) -> float:
    v = alignment_field(prev, cur, params)
    warped = backward_warp(prev, v)
    return float(np.mean(np.abs(cur.data.astype(np.float64)
                                - warped.data.astype(np.float64))))


def tdiff(gen: Sequence, flows: list[FlowField] | None = None,
          params: FlowParams | None = None) -> list[float]:
    """Warped temporal difference mean|g_t - W(g_{t-1}, v_t)| per pair.

    ``flows[k]`` must align frame k onto frame k+1 under backward warping;
    when omitted, alignment fields are estimated internally from ``gen``.
    """
    if params is None:
        params = FlowParams()
    n = len(gen)
    if flows is not None:
        if len(flows) != n - 1:
            raise ShapeMismatchError(
                f"need {n - 1} flows for {n} frames, got {len(flows)}"
            )
        out = []
        for t in range(1, n):
            warped = backward_warp(gen[t - 1], flows[t - 1])
            out.append(float(np.mean(np.abs(
                gen[t].data.astype(np.float64)
                - warped.data.astype(np.float64)
            ))))
        return out
    return [_tdiff_pair(gen[t - 1], gen[t], params) for t in range(1, n)]


def tof(ref: Sequence, gen: Sequence,
        params: FlowParams | None = None) -> list[float]:
    """L1 difference of motion fields estimated on ref vs gen, per pair.

    The per-pixel distance is |du| + |dv|, averaged over pixels.
    """
    if params is None:
        params = FlowParams()
    if len(ref) != len(gen):
        raise ShapeMismatchError(
            f"sequence lengths differ: {len(ref)} vs {len(gen)}"
        )
    if ref[0].data.shape[:2] != gen[0].data.shape[:2]:
        raise ShapeMismatchError(
            f"frame sizes differ: {ref[0].data.shape} vs {gen[0].data.shape}"
        )
    out = []
    for t in range(1, len(gen)):
        fr = estimate_flow(ref[t - 1], ref[t], params)
        fg = estimate_flow(gen[t - 1], gen[t], params)
        d = np.abs(fr.data.astype(np.float64) - fg.data.astype(np.float64))
        out.append(float(np.mean(d.sum(axis=2))))
    return out


def tlp(ref: Sequence, gen: Sequence,
        backend: PerceptualBackend | None = None) -> list[float]:
    """|LP(ref_{t-1}, ref_t) - LP(gen_{t-1}, gen_t)| per pair."""
    if backend is None:
        backend = get_backend("msgrad")
    if len(ref) != len(gen):
        raise ShapeMismatchError(
            f"sequence lengths differ: {len(ref)} vs {len(gen)}"
        )
    out = []
    for t in range(1, len(gen)):
        try:
            lp_ref = backend.distance(ref[t - 1], ref[t])
            lp_gen = backend.distance(gen[t - 1], gen[t])
        except BackendError as exc:
            raise BackendError(f"pair {t - 1}->{t}: {exc}") from exc
        out.append(abs(lp_ref - lp_gen))
    return out


@dataclass(frozen=True)
class EvalProtocol:
    """Everything evaluate_scene needs besides the two directories.

    ``metrics`` empty means the mode's default set.  ``mode`` is ``vsr``
    (pixel-aligned ground truth) or ``uvt`` (reference is the input-domain
    sequence, bicubically resampled to the generated size; psnr forbidden).
    """

    mode: str = "vsr"
    metrics: tuple[str, ...] = ()
    border: int = 8
    divisor: int = 8
    spatial_skip: tuple[int, int] = (2, 2)
    temporal_skip: tuple[int, int] = (3, 2)
    flow_params: FlowParams = field(default_factory=FlowParams)
    backend_name: str = "msgrad"
    backend_table: str | None = None
    pattern: str = "%04d.png"

    def __post_init__(self) -> None:
        if self.mode not in ("vsr", "uvt"):
            raise ProtocolError(f"unknown mode {self.mode!r}")
        for name in self.metrics:
            if name not in METRIC_NAMES:
                raise ProtocolError(
                    f"unknown metric {name!r} "
                    f"(known: {', '.join(METRIC_NAMES)})"
                )
        if self.mode == "uvt" and "psnr" in self.metrics:
            raise ProtocolError(
                "psnr needs pixel-aligned ground truth; not available in "
                "uvt mode"
            )
        if self.temporal_skip[0] < 1:
            raise ProtocolError(
                "temporal head skip must be >= 1 (each value needs a "
                "predecessor frame)"
            )
        if min(self.spatial_skip) < 0 or self.temporal_skip[1] < 0:
            raise ProtocolError("skips must be non-negative")

    @property
    def selected_metrics(self) -> tuple[str, ...]:
        return self.metrics if self.metrics else default_metrics(self.mode)


@dataclass(frozen=True, eq=False)
class MetricReport:
    """Per-frame values, means, display scalings, and the protocol record."""

    scene: str
    method: str
    per_frame: dict[str, list[float]]
    mean: dict[str, float]
    scaling: dict[str, float]
    protocol: dict[str, object]

    def __post_init__(self) -> None:
        if set(self.per_frame) != set(self.mean) or set(self.mean) != set(
            self.scaling
        ):
            raise TecoError("report metric maps must share the same keys")
        for name, values in self.per_frame.items():
            if not values:
                raise TecoError(f"metric {name} has no per-frame values")
            mu = self.mean[name]
            actual = float(np.mean(values))
            if math.isinf(actual) or math.isinf(mu):
                if mu != actual:
                    raise TecoError(f"metric {name} mean mismatch")
            elif abs(mu - actual) > 1e-9:
                raise TecoError(f"metric {name} mean mismatch")

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "scene": self.scene,
            "method": self.method,
            "per_frame": self.per_frame,
            "mean": self.mean,
            "scaling": self.scaling,
            "direction": {m: DIRECTION[m] for m in sorted(self.mean)},
            "protocol": self.protocol,
        }


def _load_pair(gt_dir: str, gen_dir: str,
               config: EvalProtocol) -> tuple[Sequence, Sequence]:
    ref = load_sequence(gt_dir, config.pattern)
    gen = load_sequence(gen_dir, config.pattern)
    if len(ref) != len(gen):
        raise ShapeMismatchError(
            f"frame-count mismatch: {gt_dir} has {len(ref)} frames, "
            f"{gen_dir} has {len(gen)}"
        )
    if ref.colorspace != gen.colorspace:
        raise ShapeMismatchError(
            f"colorspace mismatch: {ref.colorspace} vs {gen.colorspace}"
        )
    if config.mode == "uvt":
        if (ref.height, ref.width) != (gen.height, gen.width):
            ref = Sequence(
                frames=tuple(resize_bicubic(f, gen.height, gen.width)
                             for f in ref.frames),
                start_index=ref.start_index,
            )
    elif ref[0].data.shape != gen[0].data.shape:
        raise ShapeMismatchError(
            f"frame shapes differ: {ref[0].data.shape} vs "
            f"{gen[0].data.shape} (vsr mode requires aligned ground truth)"
        )
    return ref, gen


def _skip_range(n: int, head: int, tail: int, what: str) -> range:
    if head + tail >= n:
        raise ProtocolError(
            f"{what} skip ({head}, {tail}) leaves no frames of {n}"
        )
    return range(head, n - tail)


def evaluate_scene(gt_dir: str, gen_dir: str,
                   config: EvalProtocol | None = None,
                   scene: str | None = None, method: str | None = None,
                   threads: int = 1,
                   backend: PerceptualBackend | None = None) -> MetricReport:
    """Protocol evaluation of one scene directory pair.

    Crops (border, divisor-align), then computes the selected spatial
    metrics over the spatial-skip frame range and temporal metrics over the
    temporal-skip range (each temporal value at frame t uses the pair
    (t-1, t) of the cropped sequence).  ``threads`` parallelizes per-frame
    work without changing any output bit.
    """
    if config is None:
        config = EvalProtocol()
    if scene is None:
        scene = os.path.basename(os.path.normpath(gt_dir))
    if method is None:
        method = os.path.basename(os.path.normpath(gen_dir))
    if threads < 1:
        raise ProtocolError("threads must be >= 1")
    try:
        return _evaluate(gt_dir, gen_dir, config, scene, method, threads,
                         backend)
    except TecoError as exc:
        raise type(exc)(f"scene {scene!r}: {exc}") from exc


def _evaluate(gt_dir: str, gen_dir: str, config: EvalProtocol, scene: str,
              method: str, threads: int,
              backend: PerceptualBackend | None) -> MetricReport:
    selected = config.selected_metrics
    ref, gen = _load_pair(gt_dir, gen_dir, config)
    ref = protocol_crop(ref, config.border, config.divisor)
    gen = protocol_crop(gen, config.border, config.divisor)
    n = len(gen)
    fp = config.flow_params
    if "tlp" in selected and backend is None:
        backend = get_backend(config.backend_name, config.backend_table)

    spatial_sel = [m for m in selected if m in _SPATIAL]
    temporal_sel = [m for m in selected if m not in _SPATIAL]

    spatial_r = (_skip_range(n, *config.spatial_skip, what="spatial")
                 if spatial_sel else range(0))
    temporal_r = (_skip_range(n, *config.temporal_skip, what="temporal")
                  if temporal_sel else range(0))

    def spatial_task(t: int) -> dict[str, float]:
        return {"psnr": psnr(ref[t], gen[t])} if "psnr" in spatial_sel else {}

    def temporal_task(t: int) -> dict[str, float]:
        out: dict[str, float] = {}
        rp, rc = ref[t - 1], ref[t]
        gp, gc = gen[t - 1], gen[t]
        if "tof" in temporal_sel:
            fr = estimate_flow(rp, rc, fp)
            fg = estimate_flow(gp, gc, fp)
            d = np.abs(fr.data.astype(np.float64)
                       - fg.data.astype(np.float64))
            out["tof"] = float(np.mean(d.sum(axis=2)))
        if "tlp" in temporal_sel:
            try:
                out["tlp"] = abs(backend.distance(rp, rc)
                                 - backend.distance(gp, gc))
            except BackendError as exc:
                raise BackendError(f"pair {t - 1}->{t}: {exc}") from exc
        if "tdiff" in temporal_sel or "tdiff_gap" in temporal_sel:
            td_gen = _tdiff_pair(gp, gc, fp)
            if "tdiff" in temporal_sel:
                out["tdiff"] = td_gen
            if "tdiff_gap" in temporal_sel:
                out["tdiff_gap"] = abs(td_gen - _tdiff_pair(rp, rc, fp))
        return out

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            spatial_vals = list(pool.map(spatial_task, spatial_r))
            temporal_vals = list(pool.map(temporal_task, temporal_r))
    else:
        spatial_vals = [spatial_task(t) for t in spatial_r]
        temporal_vals = [temporal_task(t) for t in temporal_r]

    per_frame: dict[str, list[float]] = {}
    for m in selected:
        if m in _SPATIAL:
            per_frame[m] = [v[m] for v in spatial_vals]
        else:
            per_frame[m] = [v[m] for v in temporal_vals]
    mean = {m: float(np.mean(v)) for m, v in per_frame.items()}
    scaling = {m: SCALING[m] for m in selected}
    protocol: dict[str, object] = {
        "mode": config.mode,
        "border": config.border,
        "divisor": config.divisor,
        "spatial_skip": list(config.spatial_skip),
        "temporal_skip": list(config.temporal_skip),
        "flow": {
            "pyramid_scale": fp.pyramid_scale,
            "levels": fp.levels,
            "window": fp.window,
            "iterations": fp.iterations,
            "poly_n": fp.poly_n,
            "poly_sigma": fp.poly_sigma,
        },
        "backend": backend.id if backend is not None else None,
        "pattern": config.pattern,
        "frame_count": n,
        "height": gen.height,
        "width": gen.width,
        "start_index": gen.start_index,
    }
    return MetricReport(scene=scene, method=method, per_frame=per_frame,
                        mean=mean, scaling=scaling, protocol=protocol)
