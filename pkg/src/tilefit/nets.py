"""Dense coordinate networks: sine, ReLU and Fourier-feature variants.

A network is ``depth_d + 2`` linear layers: one input layer, ``depth_d``
width-by-width hidden layers, and a linear output layer.  Sine networks
apply ``sin(omega0 * z)`` on every hidden layer, paired with the matching
init (first layer uniform in +-1/input_dim, deeper layers scaled down by
omega0); ReLU networks apply ``max(z, 0)`` throughout.  The
Fourier-feature variant first maps coordinates through a frozen random
projection ``x -> [cos(2*pi*B*x), sin(2*pi*B*x)]`` and then runs the ReLU
stack on those features.

Heavy lifting (forward, gradients, Adam) is delegated to the kernel
backends; everything here is shape bookkeeping, initialization and the
public API.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import kernels
from .kernels import ACT_RELU, ACT_SINE


class Activation(enum.Enum):
    SINE = "sine"
    RELU = "relu"
    FOURIER_RELU = "fourier-relu"


# Optimizer defaults used by every trainer and recorded in every report.
DEFAULT_LR = 1e-4
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPS = 1e-8


def seed_sequence(*parts: int) -> np.random.SeedSequence:
    """Deterministic seed stream keyed by a tuple of non-negative ints."""
    entropy = []
    for p in parts:
        p = int(p)
        if p < 0:
            raise ValueError("seed parts must be non-negative")
        entropy.append(p)
    return np.random.SeedSequence(entropy)


@dataclass(frozen=True)
class SubNetworkConfig:
    """Architecture of one sub-network.

    ``omega0`` only matters for SINE; ``mapping_size``/``mapping_scale``
    only for FOURIER_RELU.
    """

    depth_d: int
    width_w: int
    activation: Activation = Activation.SINE
    omega0: float = 30.0
    mapping_size: int = 65
    mapping_scale: float = 10.0

    def __post_init__(self):
        if self.depth_d < 1:
            raise ValueError(f"depth_d must be >= 1, got {self.depth_d}")
        if self.width_w < 1:
            raise ValueError(f"width_w must be >= 1, got {self.width_w}")
        if self.omega0 <= 0:
            raise ValueError("omega0 must be positive")
        if self.mapping_size < 1:
            raise ValueError("mapping_size must be >= 1")
        if self.mapping_scale <= 0:
            raise ValueError("mapping_scale must be positive")

    def to_dict(self) -> dict:
        return {
            "depth_d": self.depth_d,
            "width_w": self.width_w,
            "activation": self.activation.value,
            "omega0": self.omega0,
            "mapping_size": self.mapping_size,
            "mapping_scale": self.mapping_scale,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SubNetworkConfig":
        return cls(
            depth_d=int(d["depth_d"]),
            width_w=int(d["width_w"]),
            activation=Activation(d.get("activation", "sine")),
            omega0=float(d.get("omega0", 30.0)),
            mapping_size=int(d.get("mapping_size", 65)),
            mapping_scale=float(d.get("mapping_scale", 10.0)),
        )


def _act_code(activation: Activation) -> int:
    return ACT_SINE if activation is Activation.SINE else ACT_RELU


@dataclass
class SubNetwork:
    """One coordinate network: flat parameters plus shape metadata."""

    config: SubNetworkConfig
    input_dim: int
    output_dim: int
    theta: np.ndarray
    fourier_matrix: np.ndarray | None = None

    @property
    def dtype(self) -> np.dtype:
        return self.theta.dtype

    @property
    def feature_dim(self) -> int:
        """Width of the first linear layer's input."""
        if self.config.activation is Activation.FOURIER_RELU:
            return 2 * self.config.mapping_size
        return self.input_dim

    @property
    def dims(self) -> np.ndarray:
        c = self.config
        return np.asarray(
            [self.feature_dim] + [c.width_w] * (c.depth_d + 1) + [self.output_dim],
            dtype=np.int32,
        )

    @property
    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Views of (weight, bias) per layer into the flat parameter vector."""
        out = []
        for w0, b0, dout, din in kernels.layer_offsets(self.dims):
            out.append((self.theta[w0:b0].reshape(dout, din), self.theta[b0 : b0 + dout]))
        return out

    @property
    def num_params(self) -> int:
        return int(self.theta.size)

    def unflatten(self, flat: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
        """View a theta-shaped flat vector (e.g. a gradient) as layer pairs."""
        if flat.shape != self.theta.shape:
            raise ValueError("flat vector does not match parameter count")
        out = []
        for w0, b0, dout, din in kernels.layer_offsets(self.dims):
            out.append((flat[w0:b0].reshape(dout, din), flat[b0 : b0 + dout]))
        return out

    def copy(self) -> "SubNetwork":
        fm = None if self.fourier_matrix is None else self.fourier_matrix.copy()
        return SubNetwork(self.config, self.input_dim, self.output_dim, self.theta.copy(), fm)

    def astype(self, dtype) -> "SubNetwork":
        fm = None if self.fourier_matrix is None else self.fourier_matrix.astype(dtype)
        return SubNetwork(self.config, self.input_dim, self.output_dim, self.theta.astype(dtype), fm)

    def encode(self, coords: np.ndarray) -> np.ndarray:
        """Map raw coordinates to the first layer's input features."""
        x = np.ascontiguousarray(coords, dtype=self.dtype)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ValueError(f"coords must be batch x {self.input_dim}, got {x.shape}")
        if self.config.activation is not Activation.FOURIER_RELU:
            return x
        proj = (2.0 * np.pi) * (x @ self.fourier_matrix.T)
        return np.ascontiguousarray(np.concatenate([np.cos(proj), np.sin(proj)], axis=1))


@dataclass
class AdamState:
    """Optimizer accumulators; shapes mirror the flat parameter vector."""

    step: int
    first_moment: np.ndarray
    second_moment: np.ndarray
    learning_rate: float = DEFAULT_LR
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPS

    @classmethod
    def init(cls, net: SubNetwork, learning_rate: float = DEFAULT_LR,
             beta1: float = DEFAULT_BETA1, beta2: float = DEFAULT_BETA2,
             epsilon: float = DEFAULT_EPS) -> "AdamState":
        return cls(0, np.zeros_like(net.theta), np.zeros_like(net.theta),
                   learning_rate, beta1, beta2, epsilon)

    def copy(self) -> "AdamState":
        return AdamState(self.step, self.first_moment.copy(), self.second_moment.copy(),
                         self.learning_rate, self.beta1, self.beta2, self.epsilon)


def init_subnetwork(config: SubNetworkConfig, input_dim: int, output_dim: int,
                    rng_seed, dtype=np.float64) -> SubNetwork:
    """Build and initialize a sub-network deterministically from a seed.

    Sine: first layer ~ U(-1/input_dim, 1/input_dim), deeper layers
    ~ U(-sqrt(6/fan_in)/omega0, +), biases zero.  ReLU: He-uniform
    U(-sqrt(6/fan_in), +).  Fourier: frozen Gaussian projection with std
    ``mapping_scale``, then the ReLU scheme on the feature stack.
    """
    if input_dim < 1 or output_dim < 1:
        raise ValueError("input_dim and output_dim must be >= 1")
    rng = np.random.default_rng(
        rng_seed if isinstance(rng_seed, (np.random.SeedSequence, np.random.Generator))
        else seed_sequence(rng_seed)
    )

    fourier = None
    if config.activation is Activation.FOURIER_RELU:
        fourier = rng.normal(0.0, config.mapping_scale, size=(config.mapping_size, input_dim))
        feature_dim = 2 * config.mapping_size
    else:
        feature_dim = input_dim

    dims = [feature_dim] + [config.width_w] * (config.depth_d + 1) + [output_dim]
    parts = []
    for k in range(1, len(dims)):
        dout, din = dims[k], dims[k - 1]
        if config.activation is Activation.SINE:
            bound = (1.0 / din) if k == 1 else np.sqrt(6.0 / din) / config.omega0
        else:
            bound = np.sqrt(6.0 / din)
        parts.append(rng.uniform(-bound, bound, size=dout * din))
        parts.append(np.zeros(dout))
    theta = np.concatenate(parts).astype(dtype)
    fm = None if fourier is None else fourier.astype(dtype)
    return SubNetwork(config, input_dim, output_dim, theta, fm)


def forward(net: SubNetwork, coords: np.ndarray, backend=None) -> np.ndarray:
    """Evaluate the network on a batch of coordinates."""
    x = net.encode(coords)
    if not np.isfinite(x).all():
        raise ValueError("coords must be finite")
    be = kernels.get_backend(backend)
    return be.forward(net.theta, net.dims, _act_code(net.config.activation),
                      net.config.omega0, x)


def backward(net: SubNetwork, coords: np.ndarray, target: np.ndarray,
             backend=None) -> tuple[float, np.ndarray]:
    """MSE loss against ``target`` plus exact gradients, flat like theta."""
    x = net.encode(coords)
    t = np.ascontiguousarray(target, dtype=net.dtype)
    if t.ndim != 2 or t.shape != (x.shape[0], net.output_dim):
        raise ValueError(f"target must be {x.shape[0]} x {net.output_dim}, got {t.shape}")
    if x.shape[0] == 0:
        raise ValueError("batch must be non-empty")
    be = kernels.get_backend(backend)
    return be.loss_and_grad(net.theta, net.dims, _act_code(net.config.activation),
                            net.config.omega0, x, t)


def adam_step(net: SubNetwork, grads: np.ndarray, state: AdamState,
              backend=None) -> tuple[SubNetwork, AdamState]:
    """Apply one Adam update without mutating the inputs."""
    if grads.shape != net.theta.shape:
        raise ValueError("gradient does not match parameter count")
    be = kernels.get_backend(backend)
    new_net = net.copy()
    new_state = state.copy()
    g = np.ascontiguousarray(grads, dtype=net.dtype)
    new_state.step = be.adam_step(
        new_net.theta, g, new_state.first_moment, new_state.second_moment,
        state.step, state.learning_rate, state.beta1, state.beta2, state.epsilon,
    )
    return new_net, new_state
