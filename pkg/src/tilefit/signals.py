"""Signal ingestion and export: 8-bit PNG images, 16-bit PCM WAV audio.

Both modalities normalize onto [-1, 1]: pixels by a linear map from
[0, 255], samples by 1/32768 (so -32768 maps to exactly -1.0 and +32767
to just under +1.0 - 16-bit PCM is asymmetric and a full-scale positive
peak cannot reach exactly +1).  Export inverts the map, clamps, and
rounds half-to-even, which makes save(load(x)) lossless for both formats.
"""

from __future__ import annotations

import wave
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .partition import SignalTensor, SourceInfo

PCM_SCALE = 32768.0


def load_image(path) -> SignalTensor:
    """Read a square 8-bit RGB or grayscale PNG as a rank-2 signal."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.format != "PNG":
                raise ValueError(f"{path}: expected a PNG file, got {im.format}")
            if im.mode not in ("L", "RGB"):
                raise ValueError(
                    f"{path}: unsupported PNG mode {im.mode}; need 8-bit L or RGB"
                )
            arr = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise ValueError(f"{path}: could not decode image: {exc}") from exc
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{path}: image must be square, got {arr.shape[1]}x{arr.shape[0]}")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    values = arr.astype(np.float64) / 255.0 * 2.0 - 1.0
    return SignalTensor(2, arr.shape[0], arr.shape[2], values, SourceInfo(kind="uint8"))


def signal_from_array(arr: np.ndarray) -> SignalTensor:
    """Wrap an 8-bit image array (HxW or HxWxC uint8) as a signal."""
    arr = np.asarray(arr)
    if arr.dtype != np.uint8:
        raise ValueError(f"expected uint8 pixels, got {arr.dtype}")
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"image must be square, got {arr.shape[1]}x{arr.shape[0]}")
    if arr.ndim == 2:
        arr = arr[:, :, None]
    values = arr.astype(np.float64) / 255.0 * 2.0 - 1.0
    return SignalTensor(2, arr.shape[0], arr.shape[2], values, SourceInfo(kind="uint8"))


def load_audio(path, max_seconds: float | None = None,
               trim_multiple: int | None = None) -> SignalTensor:
    """Read a 16-bit PCM WAV as a rank-1 signal; stereo is mean-downmixed.

    ``max_seconds`` truncates the clip; ``trim_multiple`` drops trailing
    samples so the length divides the largest grid order planned for it.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wf:
            sampwidth = wf.getsampwidth()
            channels = wf.getnchannels()
            rate = wf.getframerate()
            nframes = wf.getnframes()
            if sampwidth != 2:
                raise ValueError(
                    f"{path}: only 16-bit PCM WAV is supported, got {8 * sampwidth}-bit"
                )
            if channels not in (1, 2):
                raise ValueError(f"{path}: expected mono or stereo, got {channels} channels")
            raw = wf.readframes(nframes)
    except wave.Error as exc:
        raise ValueError(f"{path}: could not decode WAV: {exc}") from exc
    samples = np.frombuffer(raw, dtype="<i2").astype(np.float64)
    if channels == 2:
        samples = samples.reshape(-1, 2).mean(axis=1)
    if max_seconds is not None:
        samples = samples[: int(round(max_seconds * rate))]
    if trim_multiple is not None and trim_multiple > 1:
        samples = samples[: (len(samples) // trim_multiple) * trim_multiple]
    if len(samples) < 2:
        raise ValueError(f"{path}: audio clip is empty or too short")
    values = (samples / PCM_SCALE)[:, None]
    return SignalTensor(1, len(samples), 1, values, SourceInfo(kind="pcm16", sample_rate=rate))


def save_reconstruction(signal: SignalTensor, path) -> None:
    """Write a signal back out: PNG for rank 2, 16-bit WAV for rank 1."""
    path = Path(path)
    clipped = np.clip(signal.values, -1.0, 1.0)
    if signal.rank == 2:
        arr = np.rint((clipped + 1.0) / 2.0 * 255.0).astype(np.uint8)
        if signal.channels == 1:
            Image.fromarray(arr[:, :, 0], mode="L").save(path, format="PNG")
        elif signal.channels == 3:
            Image.fromarray(arr, mode="RGB").save(path, format="PNG")
        else:
            raise ValueError(f"cannot export an image with {signal.channels} channels")
    else:
        samples = np.clip(np.rint(clipped[:, 0] * PCM_SCALE), -32768, 32767).astype("<i2")
        rate = signal.source.sample_rate or 44100
        with wave.open(str(path), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(rate)
            wf.writeframes(samples.tobytes())
