"""Checkpoint container: JSON header + raw little-endian float64 tensors.

Layout: 4-byte little-endian header length, the UTF-8 JSON header, then the
parameter tensors concatenated in layer order (within a layer, sorted by
parameter name). The header carries format_version, the architecture config,
a tensor manifest, and any run metadata the caller supplies.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .layers import layer_from_config
from .network import Network

FORMAT_VERSION = 1


def save_checkpoint(net: Network, path, metadata: dict | None = None) -> None:
    items = net.param_items()
    header = {
        "format_version": FORMAT_VERSION,
        "architecture": net.config(),
        "tensors": [{"name": n, "shape": list(p.shape)} for n, p in items],
        "metadata": metadata or {},
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for _, p in items:
            f.write(np.ascontiguousarray(p, dtype="<f8").tobytes())


def read_header(path) -> dict:
    with open(path, "rb") as f:
        (hlen,) = struct.unpack("<I", f.read(4))
        return json.loads(f.read(hlen).decode("utf-8"))


def load_checkpoint(path) -> tuple[Network, dict]:
    """Rebuild the network and its parameters; returns (net, header)."""
    path = Path(path)
    with open(path, "rb") as f:
        raw = f.read(4)
        if len(raw) < 4:
            raise ValueError(f"{path.name}: truncated checkpoint header")
        (hlen,) = struct.unpack("<I", raw)
        header = json.loads(f.read(hlen).decode("utf-8"))
        if header.get("format_version") != FORMAT_VERSION:
            raise ValueError(
                f"{path.name}: unsupported format_version {header.get('format_version')}"
            )
        arch = header["architecture"]
        net = Network([layer_from_config(c) for c in arch["layers"]],
                      tuple(arch["input_shape"]))
        params = dict(net.param_items())
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            buf = f.read(n * 8)
            if len(buf) != n * 8:
                raise ValueError(f"{path.name}: truncated tensor {entry['name']}")
            target = params[entry["name"]]
            if target.shape != shape:
                raise ValueError(
                    f"{path.name}: tensor {entry['name']} shape {shape} does not "
                    f"match architecture {target.shape}"
                )
            target[...] = np.frombuffer(buf, dtype="<f8").reshape(shape)
    return net, header
