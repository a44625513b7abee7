"""Binary model files: a JSON header plus per-cell float32 parameter blobs.

Layout (all little-endian):

    magic b"TFMF" | u32 version | u32 header length | header JSON (utf-8)
    then per cell, in linear index order:
        fourier matrix (mapping_size x input_dim f4, frozen), if present
        flat parameter vector (f4)

Weights are stored as 32-bit IEEE-754, which is what training produces,
so load(save(model)) round-trips bitwise.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .nets import Activation, SubNetwork, SubNetworkConfig
from .partition import GridSpec, SourceInfo
from .training import EnsembleModel

MAGIC = b"TFMF"
FORMAT_VERSION = 1


def save_model(model: EnsembleModel, n: int, path, *,
               source: SourceInfo | None = None) -> None:
    """Serialize an ensemble; ``n`` and ``source`` make it reconstructable."""
    path = Path(path)
    config = model.config
    first = model.subnets[0]
    header = {
        "format_version": FORMAT_VERSION,
        "grid_m": model.grid.m,
        "rank": model.grid.rank,
        "n": n,
        "input_dim": model.input_dim,
        "output_dim": model.output_dim,
        "config": config.to_dict(),
        "source": (source or SourceInfo()).to_dict(),
        "dtype": "float32",
        "theta_len": int(first.theta.size),
        "fourier_shape": (
            list(first.fourier_matrix.shape) if first.fourier_matrix is not None else None
        ),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for net in model.subnets:
            if net.fourier_matrix is not None:
                fh.write(np.ascontiguousarray(net.fourier_matrix, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(net.theta, dtype="<f4").tobytes())


def load_model(path) -> tuple[EnsembleModel, dict]:
    """Read a model file; returns the ensemble and its header dict."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model file (bad magic {magic!r})")
        version, hlen = struct.unpack("<II", fh.read(8))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format version {version}")
        header = json.loads(fh.read(hlen).decode("utf-8"))
        config = SubNetworkConfig.from_dict(header["config"])
        grid = GridSpec(header["grid_m"], header["rank"])
        input_dim = header["input_dim"]
        output_dim = header["output_dim"]
        theta_len = header["theta_len"]
        fshape = header["fourier_shape"]
        subnets = []
        for _ in range(grid.num_cells):
            fourier = None
            if fshape is not None:
                count = fshape[0] * fshape[1]
                fourier = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(fshape).copy()
            theta = np.frombuffer(fh.read(4 * theta_len), dtype="<f4").copy()
            if theta.size != theta_len:
                raise ValueError(f"{path}: truncated model file")
            subnets.append(SubNetwork(config, input_dim, output_dim, theta, fourier))
        trailing = fh.read(1)
    if trailing:
        raise ValueError(f"{path}: trailing bytes after model payload")
    model = EnsembleModel(grid, subnets, input_dim, output_dim)
    return model, header
