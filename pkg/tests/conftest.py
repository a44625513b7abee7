import numpy as np
import pytest

from tilefit import kernels


def pytest_addoption(parser):
    parser.addoption(
        "--skip-slow", action="store_true", default=False,
        help="skip the long-running acceptance trainings",
    )


@pytest.fixture(params=kernels.available_backends())
def backend(request):
    """Run a test once per built kernel backend."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def smooth_image(n: int, channels: int = 3, seed: int = 0) -> np.ndarray:
    """Deterministic low-frequency uint8 test image (no file needed)."""
    rng = np.random.default_rng(seed)
    ax = np.linspace(0.0, 1.0, n)
    yy, xx = np.meshgrid(ax, ax, indexing="ij")
    img = np.zeros((n, n, channels))
    for c in range(channels):
        img[:, :, c] = (
            0.5
            + 0.3 * np.sin(2 * np.pi * (1.5 * xx + 0.7 * c) + rng.uniform(0, np.pi))
            * np.cos(2 * np.pi * (1.1 * yy - 0.3 * c))
            + 0.15 * rng.standard_normal()
        )
    img = np.clip(img, 0.0, 1.0)
    return np.rint(img * 255).astype(np.uint8)


@pytest.fixture
def tiny_signal():
    """16x16 RGB signal with values safely inside [-1, 1]."""
    from tilefit import signal_from_array

    return signal_from_array(smooth_image(16, seed=7))
