"""Analytic FLOP model for one full forward pass.

Convention: one multiply-accumulate = 2 FLOPs, activations are free for
sine/ReLU stacks.  A network of depth ``d`` and width ``w`` therefore
costs ``2 * (in*w + d*w**2 + w*out)`` per sample.  The Fourier-feature
variant additionally pays for the frozen projection (``2 * in * F`` FLOPs)
plus its ``2F`` cos/sin evaluations counted as 1 FLOP each, and its stack
input widens to ``2F``.  Totals multiply by the full sample count
``N**rank`` and are therefore independent of the grid order: every sample
passes through exactly one sub-network.
"""

from __future__ import annotations

from .nets import Activation, SubNetworkConfig
from .partition import GridSpec

FlopCount = int


def flops_per_sample(config: SubNetworkConfig, input_dim: int, output_dim: int) -> int:
    """FLOPs for pushing one sample through one sub-network."""
    d, w = config.depth_d, config.width_w
    if config.activation is Activation.FOURIER_RELU:
        f = config.mapping_size
        mapping = 2 * input_dim * f + 2 * f
        mlp_in = 2 * f
        return mapping + 2 * (mlp_in * w + d * w * w + w * output_dim)
    return 2 * (input_dim * w + d * w * w + w * output_dim)


def total_flops(config: SubNetworkConfig, grid: GridSpec, n: int,
                input_dim: int, output_dim: int) -> FlopCount:
    """FLOPs for one forward pass over all ``n**rank`` samples."""
    grid.check_divides(n)
    return flops_per_sample(config, input_dim, output_dim) * n**grid.rank


def format_flops(count: FlopCount) -> str:
    """Human-readable count: two decimals, M or G units."""
    if count >= 10**9:
        return f"{count / 1e9:.2f} G"
    if count >= 10**6:
        return f"{count / 1e6:.2f} M"
    if count >= 10**3:
        return f"{count / 1e3:.2f} K"
    return str(count)
