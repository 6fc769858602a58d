from __future__ import annotations

import math

import numpy as np
import numpy.testing as npt
import pytest

from teco.errors import ShapeMismatchError, TecoError
from teco.imgseq import Frame
from teco.warp import FlowField, backward_warp, scale_flow, zero_border

from conftest import luma_frame, rgb_frame


def naive_backward_warp(img: np.ndarray, flow: np.ndarray) -> np.ndarray:
    """Per-pixel reference sampler: bilinear with edge clamping."""
    h, w = img.shape[:2]
    out = np.zeros(img.shape, dtype=np.float64)

    def px(y, x):
        return img[min(max(y, 0), h - 1), min(max(x, 0), w - 1)].astype(
            np.float64
        )

    for y in range(h):
        for x in range(w):
            sx = x + float(flow[y, x, 0])
            sy = y + float(flow[y, x, 1])
            x0 = math.floor(sx)
            y0 = math.floor(sy)
            fx = sx - x0
            fy = sy - y0
            top = (1 - fx) * px(y0, x0) + fx * px(y0, x0 + 1)
            bot = (1 - fx) * px(y0 + 1, x0) + fx * px(y0 + 1, x0 + 1)
            out[y, x] = (1 - fy) * top + fy * bot
    return out


def const_flow(h: int, w: int, u: float, v: float) -> FlowField:
    data = np.empty((h, w, 2), dtype=np.float32)
    data[:, :, 0] = u
    data[:, :, 1] = v
    return FlowField(data)


class TestFlowField:
    def test_requires_float32(self):
        with pytest.raises(ShapeMismatchError):
            FlowField(np.zeros((4, 4, 2), dtype=np.float64))

    def test_requires_two_components(self):
        with pytest.raises(ShapeMismatchError):
            FlowField(np.zeros((4, 4, 3), dtype=np.float32))

    def test_rejects_non_finite(self):
        data = np.zeros((4, 4, 2), dtype=np.float32)
        data[0, 0, 0] = np.inf
        with pytest.raises(TecoError):
            FlowField(data)

    def test_direction_tag(self):
        FlowField(np.zeros((2, 2, 2), dtype=np.float32), "backward")
        with pytest.raises(TecoError):
            FlowField(np.zeros((2, 2, 2), dtype=np.float32), "sideways")

    def test_uv_views(self):
        data = np.zeros((2, 3, 2), dtype=np.float32)
        data[:, :, 0] = 1.5
        f = FlowField(data)
        npt.assert_array_equal(f.u, 1.5)
        npt.assert_array_equal(f.v, 0.0)


class TestBackwardWarp:
    def test_zero_flow_bit_exact(self, rng):
        for _ in range(20):
            f = Frame(rng.random((11, 13, 3), dtype=np.float32), "rgb")
            out = backward_warp(f, const_flow(11, 13, 0.0, 0.0))
            npt.assert_array_equal(out.data, f.data)
            assert out.data.dtype == np.float32

    def test_horizontal_ramp(self):
        w = 16
        ramp = np.tile(np.arange(w, dtype=np.float32) / (w - 1), (8, 1))
        out = backward_warp(luma_frame(ramp), const_flow(8, w, 1.0, 0.0))
        expected = np.minimum(np.arange(w) + 1, w - 1) / (w - 1)
        npt.assert_allclose(out.data[:, :, 0], np.tile(expected, (8, 1)),
                            rtol=0, atol=1e-7)

    def test_constant_image_any_flow(self, rng):
        f = rgb_frame(np.full((10, 10), 0.6, dtype=np.float32))
        flow = FlowField((rng.random((10, 10, 2), dtype=np.float32) * 30
                          - 15).astype(np.float32))
        out = backward_warp(f, flow)
        npt.assert_allclose(out.data, 0.6, rtol=0, atol=1e-6)

    def test_matches_naive_oracle(self, rng):
        for _ in range(5):
            img = rng.random((9, 12, 3), dtype=np.float32)
            flow = (rng.random((9, 12, 2), dtype=np.float32) * 8
                    - 4).astype(np.float32)
            out = backward_warp(Frame(img, "rgb"), FlowField(flow))
            ref = naive_backward_warp(img, flow)
            npt.assert_allclose(out.data, ref.astype(np.float32), rtol=0,
                                atol=1e-6)

    def test_integer_flow_exact_relocation(self, rng):
        img = rng.random((12, 14, 3), dtype=np.float32)
        out = backward_warp(Frame(img, "rgb"), const_flow(12, 14, 2.0, -1.0))
        # interior of the output equals the exactly relocated input
        npt.assert_array_equal(out.data[1:, :-2], img[:-1, 2:])

    def test_linear_in_frame(self, rng):
        a = rng.random((10, 10, 3), dtype=np.float32)
        b = rng.random((10, 10, 3), dtype=np.float32)
        flow = FlowField((rng.random((10, 10, 2), dtype=np.float32) * 4
                          - 2).astype(np.float32))
        mix = Frame((0.3 * a + 0.7 * b).astype(np.float32), "rgb")
        lhs = backward_warp(mix, flow).data
        rhs = (0.3 * backward_warp(Frame(a, "rgb"), flow).data
               + 0.7 * backward_warp(Frame(b, "rgb"), flow).data)
        npt.assert_allclose(lhs, rhs, rtol=0, atol=1e-6)

    def test_shape_mismatch(self, rng):
        f = Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
        with pytest.raises(ShapeMismatchError):
            backward_warp(f, const_flow(5, 4, 0.0, 0.0))

    def test_accepts_bare_array(self, rng):
        f = Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
        out = backward_warp(f, np.zeros((4, 5, 2), dtype=np.float32))
        npt.assert_array_equal(out.data, f.data)


class TestScaleFlow:
    def test_zero_factor(self, rng):
        flow = FlowField(rng.random((6, 6, 2), dtype=np.float32))
        out = scale_flow(flow, 0.0)
        npt.assert_array_equal(out.data, np.zeros((6, 6, 2), dtype=np.float32))

    def test_identity_factor(self, rng):
        flow = FlowField(rng.random((6, 6, 2), dtype=np.float32))
        npt.assert_array_equal(scale_flow(flow, 1.0).data, flow.data)

    def test_negation(self, rng):
        flow = FlowField(rng.random((6, 6, 2), dtype=np.float32))
        npt.assert_array_equal(scale_flow(flow, -1.0).data, -flow.data)

    def test_direction_preserved(self):
        flow = FlowField(np.zeros((2, 2, 2), dtype=np.float32), "backward")
        assert scale_flow(flow, 0.5).direction == "backward"

    def test_non_finite_factor(self):
        flow = FlowField(np.zeros((2, 2, 2), dtype=np.float32))
        with pytest.raises(TecoError):
            scale_flow(flow, float("nan"))


class TestZeroBorder:
    def test_margin_16_on_128(self, rng):
        f = Frame(rng.random((128, 128, 3), dtype=np.float32), "rgb")
        out = zero_border(f, 16)
        npt.assert_array_equal(out.data[16:112, 16:112],
                               f.data[16:112, 16:112])
        assert np.count_nonzero(out.data[:16]) == 0
        assert np.count_nonzero(out.data[-16:]) == 0
        assert np.count_nonzero(out.data[:, :16]) == 0
        assert np.count_nonzero(out.data[:, -16:]) == 0

    def test_margin_zero_identity_copy(self, rng):
        f = Frame(rng.random((8, 8, 3), dtype=np.float32), "rgb")
        out = zero_border(f, 0)
        npt.assert_array_equal(out.data, f.data)
        assert out.data is not f.data

    def test_margin_too_large(self, rng):
        f = Frame(rng.random((20, 20, 3), dtype=np.float32), "rgb")
        with pytest.raises(TecoError):
            zero_border(f, 16)

    def test_negative_margin(self, rng):
        f = Frame(rng.random((8, 8, 3), dtype=np.float32), "rgb")
        with pytest.raises(TecoError):
            zero_border(f, -1)
