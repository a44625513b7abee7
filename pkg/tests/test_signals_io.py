import wave

import numpy as np
import pytest
from PIL import Image

from tilefit.partition import SignalTensor, SourceInfo
from tilefit.signals import load_audio, load_image, save_reconstruction, signal_from_array

from conftest import smooth_image


def write_png(path, arr):
    if arr.ndim == 3 and arr.shape[2] == 1:
        Image.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
    elif arr.ndim == 2:
        Image.fromarray(arr, mode="L").save(path, format="PNG")
    else:
        Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def write_wav(path, samples_i16, rate=8000, channels=1):
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(channels)
        wf.setsampwidth(2)
        wf.setframerate(rate)
        wf.writeframes(np.asarray(samples_i16, dtype="<i2").tobytes())


class TestLoadImage:
    def test_rgb_png(self, tmp_path):
        arr = smooth_image(32, seed=3)
        path = tmp_path / "img.png"
        write_png(path, arr)
        sig = load_image(path)
        assert (sig.rank, sig.n, sig.channels) == (2, 32, 3)
        assert sig.values.min() >= -1.0 and sig.values.max() <= 1.0
        np.testing.assert_allclose(sig.values, arr / 255.0 * 2.0 - 1.0, atol=1e-15)

    def test_grayscale_png_is_one_channel(self, tmp_path):
        arr = smooth_image(16, seed=4)[:, :, 0]
        path = tmp_path / "gray.png"
        write_png(path, arr)
        sig = load_image(path)
        assert sig.channels == 1

    def test_all_black_maps_to_minus_one(self, tmp_path):
        path = tmp_path / "black.png"
        write_png(path, np.zeros((8, 8, 3), dtype=np.uint8))
        sig = load_image(path)
        assert np.all(sig.values == -1.0)

    def test_non_square_rejected(self, tmp_path):
        path = tmp_path / "rect.png"
        Image.fromarray(np.zeros((100, 128, 3), dtype=np.uint8), mode="RGB").save(path)
        with pytest.raises(ValueError, match="square"):
            load_image(path)

    def test_unsupported_mode_rejected(self, tmp_path):
        path = tmp_path / "pal.png"
        Image.fromarray(np.zeros((8, 8, 3), dtype=np.uint8), mode="RGB").convert("P").save(path)
        with pytest.raises(ValueError, match="mode"):
            load_image(path)

    def test_garbage_rejected(self, tmp_path):
        path = tmp_path / "junk.png"
        path.write_bytes(b"this is not an image")
        with pytest.raises(ValueError):
            load_image(path)

    def test_png_roundtrip_pixel_identical(self, tmp_path):
        arr = smooth_image(24, seed=5)
        src = tmp_path / "src.png"
        dst = tmp_path / "dst.png"
        write_png(src, arr)
        save_reconstruction(load_image(src), dst)
        np.testing.assert_array_equal(np.asarray(Image.open(dst)), arr)


class TestSaveImage:
    def test_all_minus_one_is_zero_bytes(self, tmp_path):
        sig = SignalTensor(2, 8, 3, np.full((8, 8, 3), -1.0), SourceInfo("uint8"))
        path = tmp_path / "out.png"
        save_reconstruction(sig, path)
        assert np.all(np.asarray(Image.open(path)) == 0)

    def test_zero_value_rounds_half_to_even_to_128(self, tmp_path):
        # 0.0 maps to 127.5 exactly; bankers' rounding takes it to 128
        sig = SignalTensor(2, 8, 1, np.zeros((8, 8, 1)), SourceInfo("uint8"))
        path = tmp_path / "mid.png"
        save_reconstruction(sig, path)
        assert np.all(np.asarray(Image.open(path)) == 128)

    def test_out_of_range_values_clamped(self, tmp_path):
        vals = np.zeros((8, 8, 1))
        vals[0, 0] = 3.0
        vals[0, 1] = -7.0
        sig = SignalTensor(2, 8, 1, vals, SourceInfo("uint8"))
        path = tmp_path / "clamp.png"
        save_reconstruction(sig, path)
        arr = np.asarray(Image.open(path))
        assert arr[0, 0] == 255 and arr[0, 1] == 0


class TestLoadAudio:
    def test_mono_clip(self, tmp_path):
        rng = np.random.default_rng(0)
        samples = (rng.uniform(-0.5, 0.5, 4000) * 32768).astype("<i2")
        path = tmp_path / "a.wav"
        write_wav(path, samples, rate=4000)
        sig = load_audio(path)
        assert (sig.rank, sig.n, sig.channels) == (1, 4000, 1)
        assert sig.source.sample_rate == 4000
        np.testing.assert_allclose(sig.values[:, 0], samples / 32768.0, atol=1e-15)

    def test_full_scale_bounds(self, tmp_path):
        path = tmp_path / "fs.wav"
        write_wav(path, np.array([-32768, 32767, -32768, 32767]))
        sig = load_audio(path)
        assert sig.values.min() == -1.0
        # PCM16 asymmetry: positive full scale is 32767/32768, just under 1
        assert sig.values.max() == pytest.approx(32767 / 32768)

    def test_stereo_downmix_is_channel_mean(self, tmp_path):
        rng = np.random.default_rng(1)
        left = (rng.uniform(-0.9, 0.9, 500) * 32768).astype(np.int64)
        right = (rng.uniform(-0.9, 0.9, 500) * 32768).astype(np.int64)
        inter = np.empty(1000, dtype="<i2")
        inter[0::2] = np.clip(left, -32768, 32767)
        inter[1::2] = np.clip(right, -32768, 32767)
        path = tmp_path / "st.wav"
        write_wav(path, inter, channels=2)
        sig = load_audio(path)
        assert sig.n == 500
        expected = (inter[0::2].astype(np.float64) + inter[1::2]) / 2.0 / 32768.0
        np.testing.assert_allclose(sig.values[:, 0], expected, atol=1e-15)

    def test_truncation_and_trim(self, tmp_path):
        path = tmp_path / "t.wav"
        write_wav(path, np.zeros(10000, dtype="<i2"), rate=8000)
        sig = load_audio(path, max_seconds=1.0, trim_multiple=32)
        assert sig.n == 8000  # 8000 is already a multiple of 32
        sig2 = load_audio(path, max_seconds=0.5, trim_multiple=3)
        assert sig2.n == (4000 // 3) * 3

    def test_wav_roundtrip_lossless(self, tmp_path):
        rng = np.random.default_rng(2)
        samples = (rng.uniform(-1, 1, 2048) * 32767).astype("<i2")
        src = tmp_path / "src.wav"
        dst = tmp_path / "dst.wav"
        write_wav(src, samples, rate=44100)
        save_reconstruction(load_audio(src), dst)
        with wave.open(str(dst), "rb") as wf:
            assert wf.getframerate() == 44100
            back = np.frombuffer(wf.readframes(wf.getnframes()), dtype="<i2")
        np.testing.assert_array_equal(back, samples)

    def test_non_pcm16_rejected(self, tmp_path):
        path = tmp_path / "b8.wav"
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(1)
            wf.setframerate(8000)
            wf.writeframes(bytes(100))
        with pytest.raises(ValueError, match="16-bit"):
            load_audio(path)

    def test_empty_rejected(self, tmp_path):
        path = tmp_path / "empty.wav"
        write_wav(path, np.zeros(0, dtype="<i2"))
        with pytest.raises(ValueError, match="empty|short"):
            load_audio(path)


class TestSignalFromArray:
    def test_matches_png_path(self, tmp_path):
        arr = smooth_image(16, seed=9)
        path = tmp_path / "x.png"
        write_png(path, arr)
        a = load_image(path)
        b = signal_from_array(arr)
        np.testing.assert_array_equal(a.values, b.values)

    def test_wrong_dtype_rejected(self):
        with pytest.raises(ValueError):
            signal_from_array(np.zeros((8, 8, 3), dtype=np.float32))
