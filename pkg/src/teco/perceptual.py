"""Pluggable perceptual-distance backends for the LP term in tLP.

No learned network ships with this package.  The built-in ``msgrad``
backend is a deterministic multi-scale gradient measure, clearly
non-comparable to published LPIPS numbers; distances computed offline by a
real LPIPS model plug in through :func:`external_table_backend`.  Every
report records the id of the backend that produced its numbers.
"""

from __future__ import annotations

import abc
import csv
import os

import numpy as np
from scipy import ndimage

from .errors import BackendError, MissingFileError, ShapeMismatchError
from .imgseq import Frame, to_luma

# Contrast normalization guard on flat regions.
_NORM_EPS = 1e-3

_LEVELS = 3
_MIN_SIDE = 4

_SOBEL_SMOOTH = np.array([1.0, 2.0, 1.0])
_SOBEL_DIFF = np.array([-1.0, 0.0, 1.0])


class PerceptualBackend(abc.ABC):
    """Distance oracle: non-negative, symmetric, zero on identical frames."""

    id: str = "abstract"

    @abc.abstractmethod
    def distance(self, a: Frame, b: Frame) -> float:
        raise NotImplementedError


def _grad_norm_map(img: np.ndarray) -> np.ndarray:
    gx = ndimage.correlate1d(
        ndimage.correlate1d(img, _SOBEL_DIFF, axis=1, mode="nearest"),
        _SOBEL_SMOOTH, axis=0, mode="nearest")
    gy = ndimage.correlate1d(
        ndimage.correlate1d(img, _SOBEL_DIFF, axis=0, mode="nearest"),
        _SOBEL_SMOOTH, axis=1, mode="nearest")
    mag = np.hypot(gx, gy)
    local = ndimage.uniform_filter(mag, size=5, mode="nearest")
    return mag / (local + _NORM_EPS)


def _halve(img: np.ndarray) -> np.ndarray:
    # 2x2 block mean; odd trailing row/column dropped.
    h2, w2 = img.shape[0] // 2, img.shape[1] // 2
    c = img[: 2 * h2, : 2 * w2]
    return 0.25 * (c[0::2, 0::2] + c[0::2, 1::2] + c[1::2, 0::2] + c[1::2, 1::2])


def msgrad_distance(a: Frame, b: Frame) -> float:
    """Mean abs difference of contrast-normalized gradient magnitudes.

    Computed on luma over a 3-level pyramid (2x2 block-mean downsampling,
    levels below 4 px per side truncated), Sobel gradients, normalization by
    a 5x5 local mean magnitude + eps, equal level weights.  Invariant to
    global brightness offsets; approximately invariant to global contrast
    scaling.
    """
    if a.data.shape != b.data.shape:
        raise ShapeMismatchError(
            f"frame shapes differ: {a.data.shape} vs {b.data.shape}"
        )
    pa = to_luma(a).data[:, :, 0].astype(np.float64)
    pb = to_luma(b).data[:, :, 0].astype(np.float64)
    values = []
    for lvl in range(_LEVELS):
        if lvl > 0:
            if min(pa.shape) < 2 * _MIN_SIDE:
                break
            pa = _halve(pa)
            pb = _halve(pb)
        values.append(float(np.mean(np.abs(_grad_norm_map(pa)
                                           - _grad_norm_map(pb)))))
    return float(np.mean(values))


class MsGradBackend(PerceptualBackend):
    """Built-in backend delegating to :func:`msgrad_distance`."""

    id = "msgrad"

    def distance(self, a: Frame, b: Frame) -> float:
        return msgrad_distance(a, b)


class TableBackend(PerceptualBackend):
    """Distances tabulated offline, keyed by file basename, symmetric."""

    def __init__(self, path: str):
        if not os.path.isfile(path):
            raise MissingFileError(f"no such file: {path}")
        self.id = f"table:{os.path.basename(path)}"
        self._table: dict[tuple[str, str], float] = {}
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), start=1):
                if not row or (lineno == 1 and row[0].strip().lower()
                               in ("framea", "frame_a", "a")):
                    continue
                if len(row) != 3:
                    raise BackendError(
                        f"{path}:{lineno}: expected frameA,frameB,distance"
                    )
                a, b = row[0].strip(), row[1].strip()
                try:
                    d = float(row[2])
                except ValueError as exc:
                    raise BackendError(
                        f"{path}:{lineno}: bad distance {row[2]!r}"
                    ) from exc
                if not (np.isfinite(d) and d >= 0.0):
                    raise BackendError(
                        f"{path}:{lineno}: distance must be finite and >= 0"
                    )
                key = (a, b) if a <= b else (b, a)
                old = self._table.get(key)
                if old is not None and abs(old - d) > 1e-12:
                    raise BackendError(
                        f"{path}:{lineno}: conflicting entries for ({a}, {b})"
                    )
                self._table[key] = d

    def distance(self, a: Frame, b: Frame) -> float:
        if a.name is None or b.name is None:
            raise BackendError(
                "table backend needs frames loaded from files "
                "(no source basename on input)"
            )
        if a.name == b.name:
            return 0.0
        key = (a.name, b.name) if a.name <= b.name else (b.name, a.name)
        try:
            return self._table[key]
        except KeyError:
            raise BackendError(
                f"no tabulated distance for pair ({a.name}, {b.name})"
            ) from None


def external_table_backend(path: str) -> TableBackend:
    """Load a CSV (columns frameA,frameB,distance) as a backend."""
    return TableBackend(path)


def _default_probes() -> list[tuple[Frame, Frame]]:
    rng = np.random.default_rng(20240901)
    probes = []
    for _ in range(3):
        a = rng.random((16, 16, 3), dtype=np.float32)
        b = rng.random((16, 16, 3), dtype=np.float32)
        probes.append((Frame(a, "rgb"), Frame(b, "rgb")))
    return probes


def validate_backend(backend: PerceptualBackend,
                     probes: list[tuple[Frame, Frame]] | None = None) -> None:
    """Check the backend contract (self-distance 0, symmetry, >= 0)."""
    if probes is None:
        probes = _default_probes()
    for a, b in probes:
        zero = backend.distance(a, a)
        if abs(zero) > 1e-12:
            raise BackendError(
                f"backend {backend.id}: distance(a, a) = {zero}, expected 0"
            )
        ab = backend.distance(a, b)
        ba = backend.distance(b, a)
        if ab < 0.0 or ba < 0.0:
            raise BackendError(f"backend {backend.id}: negative distance")
        if abs(ab - ba) > 1e-9:
            raise BackendError(
                f"backend {backend.id}: asymmetric ({ab} vs {ba})"
            )


_REGISTRY: dict[str, type[PerceptualBackend]] = {"msgrad": MsGradBackend}


def register_backend(name: str, factory: type[PerceptualBackend]) -> None:
    _REGISTRY[name] = factory


def get_backend(name: str = "msgrad", table: str | None = None) -> PerceptualBackend:
    """Instantiate a backend by registry name, or a table backend from CSV.

    Computational backends are probe-validated here; table backends are
    validated structurally at load (symmetric duplicates must agree, values
    finite and non-negative) since synthetic probe frames have no table keys.
    """
    if table is not None:
        return external_table_backend(table)
    if name not in _REGISTRY:
        raise BackendError(
            f"unknown backend {name!r} (known: {', '.join(sorted(_REGISTRY))})"
        )
    backend = _REGISTRY[name]()
    validate_backend(backend)
    return backend
