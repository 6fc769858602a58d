from __future__ import annotations

import os

import numpy as np
import numpy.testing as npt
import pytest
from PIL import Image

from teco.errors import (
    MissingFileError,
    MissingFrameError,
    ProtocolError,
    ShapeMismatchError,
    TecoError,
    UnsupportedBitDepthError,
    UnsupportedFormatError,
)
from teco.imgseq import (
    Frame,
    Sequence,
    load_frame,
    load_sequence,
    protocol_crop,
    resize_bicubic,
    save_frame,
    skip_frames,
    to_luma,
)

from conftest import luma_frame, rgb_frame, write_scene


class TestFrame:
    def test_valid_rgb(self, rng):
        f = Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
        assert (f.height, f.width, f.channels) == (4, 5, 3)

    def test_dtype_rejected(self):
        with pytest.raises(ShapeMismatchError):
            Frame(np.zeros((4, 5, 3), dtype=np.float64), "rgb")

    def test_channel_colorspace_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            Frame(np.zeros((4, 5, 3), dtype=np.float32), "luma")
        with pytest.raises(ShapeMismatchError):
            Frame(np.zeros((4, 5, 1), dtype=np.float32), "rgb")

    def test_non_finite_rejected(self):
        data = np.zeros((4, 5, 1), dtype=np.float32)
        data[0, 0, 0] = np.nan
        with pytest.raises(TecoError):
            Frame(data, "luma")

    def test_unknown_colorspace(self):
        with pytest.raises(TecoError):
            Frame(np.zeros((4, 5, 3), dtype=np.float32), "hsv")


class TestSequence:
    def test_requires_frames(self):
        with pytest.raises(TecoError):
            Sequence(frames=())

    def test_shape_consistency(self, rng):
        a = Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
        b = Frame(rng.random((4, 6, 3), dtype=np.float32), "rgb")
        with pytest.raises(ShapeMismatchError):
            Sequence(frames=(a, b))

    def test_colorspace_consistency(self, rng):
        a = Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
        b = Frame(rng.random((4, 5, 1), dtype=np.float32), "luma")
        with pytest.raises(ShapeMismatchError):
            Sequence(frames=(a, b))

    def test_indexing(self, rng):
        frames = tuple(Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
                       for _ in range(3))
        s = Sequence(frames=frames, start_index=7)
        assert len(s) == 3
        assert s[1] is frames[1]
        assert s.start_index == 7


class TestLoadSave:
    def test_round_trip_rgb(self, tmp_path, rng):
        data = (rng.integers(0, 256, (6, 7, 3)) / 255.0).astype(np.float32)
        path = str(tmp_path / "a.png")
        save_frame(Frame(data, "rgb"), path)
        loaded = load_frame(path)
        npt.assert_array_equal(loaded.data, data)
        assert loaded.colorspace == "rgb"
        assert loaded.name == "a.png"

    def test_gray_levels(self, tmp_path):
        path = str(tmp_path / "g.png")
        Image.fromarray(np.full((2, 2), 255, dtype=np.uint8), "L").save(path)
        f = load_frame(path)
        assert f.colorspace == "luma"
        npt.assert_array_equal(f.data, np.ones((2, 2, 1), dtype=np.float32))
        Image.fromarray(np.full((2, 2), 128, dtype=np.uint8), "L").save(path)
        npt.assert_allclose(load_frame(path).data, 128.0 / 255.0, rtol=0,
                            atol=1e-7)

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_frame(str(tmp_path / "nope.png"))

    def test_sixteen_bit_rejected(self, tmp_path):
        path = str(tmp_path / "deep.png")
        Image.fromarray(np.zeros((4, 4), dtype=np.uint16)).save(path)
        with pytest.raises(UnsupportedBitDepthError):
            load_frame(path)

    def test_alpha_rejected(self, tmp_path):
        path = str(tmp_path / "rgba.png")
        Image.fromarray(np.zeros((4, 4, 4), dtype=np.uint8), "RGBA").save(path)
        with pytest.raises(UnsupportedFormatError):
            load_frame(path)

    def test_palette_rejected(self, tmp_path):
        path = str(tmp_path / "pal.png")
        img = Image.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), "RGB")
        img.convert("P").save(path)
        with pytest.raises(UnsupportedFormatError):
            load_frame(path)

    def test_non_png_rejected(self, tmp_path):
        path = str(tmp_path / "x.png")
        with open(path, "wb") as fh:
            fh.write(b"definitely not a png file, long enough header")
        with pytest.raises(UnsupportedFormatError):
            load_frame(path)


class TestLoadSequence:
    def test_contiguous(self, tmp_path, rng):
        frames = [Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
                  for _ in range(5)]
        d = write_scene(str(tmp_path / "s"), frames)
        s = load_sequence(d)
        assert len(s) == 5
        assert s.start_index == 1

    def test_gap_detected(self, tmp_path, rng):
        frames = [Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
                  for _ in range(4)]
        d = write_scene(str(tmp_path / "s"), frames)
        os.remove(os.path.join(d, "0003.png"))
        with pytest.raises(MissingFrameError, match="missing frame 3"):
            load_sequence(d)

    def test_range_bounds(self, tmp_path, rng):
        frames = [Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb")
                  for _ in range(6)]
        d = write_scene(str(tmp_path / "s"), frames)
        s = load_sequence(d, start=2, stop=4)
        assert len(s) == 3
        assert s.start_index == 2

    def test_empty_dir(self, tmp_path):
        d = str(tmp_path / "empty")
        os.makedirs(d)
        with pytest.raises(MissingFileError):
            load_sequence(d)

    def test_missing_dir(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_sequence(str(tmp_path / "nope"))

    def test_mixed_shapes(self, tmp_path, rng):
        d = str(tmp_path / "s")
        os.makedirs(d)
        save_frame(Frame(rng.random((4, 5, 3), dtype=np.float32), "rgb"),
                   os.path.join(d, "0001.png"))
        save_frame(Frame(rng.random((4, 6, 3), dtype=np.float32), "rgb"),
                   os.path.join(d, "0002.png"))
        with pytest.raises(ShapeMismatchError):
            load_sequence(d)

    def test_pattern_without_field(self, tmp_path):
        with pytest.raises(TecoError):
            load_sequence(str(tmp_path), pattern="frame.png")


class TestToLuma:
    def test_bt601_weights(self):
        red = np.zeros((2, 2, 3), dtype=np.float32)
        red[:, :, 0] = 1.0
        y = to_luma(Frame(red, "rgb"))
        npt.assert_allclose(y.data, 0.299, rtol=0, atol=1e-6)
        assert y.colorspace == "luma"

    def test_luma_passthrough(self, rng):
        f = luma_frame(rng.random((4, 4)))
        assert to_luma(f) is f

    def test_white_maps_to_one(self):
        white = rgb_frame(np.ones((3, 3)))
        npt.assert_allclose(to_luma(white).data, 1.0, rtol=0, atol=1e-6)


class TestProtocolCrop:
    def _seq(self, height, width):
        data = np.arange(height * width, dtype=np.float32).reshape(
            height, width
        )
        data = data / data.max()
        return Sequence(frames=(luma_frame(data),))

    def test_1280x536(self):
        out = protocol_crop(self._seq(536, 1280))
        assert (out.height, out.width) == (520, 1264)

    def test_320x134_split(self):
        s = self._seq(134, 320)
        out = protocol_crop(s)
        assert (out.height, out.width) == (112, 304)
        # height: 134-16=118, remainder 6 split 3/3; width exact
        expected = s[0].data[11:123, 8:312]
        npt.assert_array_equal(out[0].data, expected)

    def test_odd_remainder_floor_left(self):
        # inner 21 with divisor 8 leaves remainder 5: floor-left 2, ceil 3
        s = self._seq(21, 24)
        out = protocol_crop(s, border=0, divisor=8)
        assert out.height == 16
        npt.assert_array_equal(out[0].data, s[0].data[2:18, :])

    def test_identity_when_aligned(self):
        s = self._seq(16, 32)
        out = protocol_crop(s, border=0, divisor=8)
        npt.assert_array_equal(out[0].data, s[0].data)

    def test_too_small(self):
        with pytest.raises(ProtocolError):
            protocol_crop(self._seq(20, 20), border=8, divisor=8)

    def test_bad_params(self):
        with pytest.raises(ProtocolError):
            protocol_crop(self._seq(64, 64), border=-1)
        with pytest.raises(ProtocolError):
            protocol_crop(self._seq(64, 64), divisor=0)


class TestSkipFrames:
    def _seq(self, n, rng):
        return Sequence(
            frames=tuple(Frame(rng.random((4, 5, 3), dtype=np.float32),
                               "rgb") for _ in range(n)),
            start_index=1,
        )

    def test_head_tail(self, rng):
        s = skip_frames(self._seq(10, rng), 3, 2)
        assert len(s) == 5
        assert s.start_index == 4

    def test_all_skipped(self, rng):
        with pytest.raises(ProtocolError):
            skip_frames(self._seq(5, rng), 3, 2)

    def test_negative(self, rng):
        with pytest.raises(ProtocolError):
            skip_frames(self._seq(5, rng), -1, 0)


class TestResizeBicubic:
    def test_constant_preserved(self):
        f = rgb_frame(np.full((8, 8), 0.25, dtype=np.float32))
        out = resize_bicubic(f, 16, 12)
        assert out.data.shape == (16, 12, 3)
        npt.assert_allclose(out.data, 0.25, rtol=0, atol=1e-6)

    def test_range_clipped(self, rng):
        f = rgb_frame(rng.random((9, 9)).astype(np.float32))
        out = resize_bicubic(f, 27, 27)
        assert out.data.min() >= 0.0
        assert out.data.max() <= 1.0

    def test_bad_target(self, rng):
        f = rgb_frame(rng.random((4, 4)))
        with pytest.raises(ProtocolError):
            resize_bicubic(f, 0, 4)
