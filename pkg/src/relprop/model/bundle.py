"""Portable model bundles: a JSON manifest plus one binary parameter blob.

Layout of a bundle directory::

    manifest.json   version, input shape/range, layer list, tensor index
    params.bin      concatenated float32 little-endian row-major tensors

Pattern tensors, when fitted, ride along as ``<layer>.pattern`` /
``<layer>.pattern_pos`` / ``<layer>.pattern_neg`` entries.
"""

import json
import os
import tempfile

import numpy as np

from ..errors import ManifestError, MissingTensorError, TensorShapeError
from .layers import Conv2D, Dense, Flatten, GlobalAvgPool, MaxPool2D, Residual, ReLU
from .network import Network

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
BLOB_NAME = "params.bin"

_PATTERN_SUFFIXES = (".pattern", ".pattern_pos", ".pattern_neg")


def _layer_to_dict(layer) -> dict:
    d = {"name": layer.name, "kind": layer.kind}
    if isinstance(layer, Dense):
        d.update(in_size=layer.in_size, out_size=layer.out_size)
    elif isinstance(layer, Conv2D):
        d.update(
            in_channels=layer.in_channels,
            out_channels=layer.out_channels,
            kernel=list(layer.kernel),
            stride=list(layer.stride),
            padding=layer.padding,
        )
    elif isinstance(layer, MaxPool2D):
        d.update(pool=list(layer.pool))
    elif isinstance(layer, Residual):
        d.update(body=[_layer_to_dict(sub) for sub in layer.body])
    return d


def _layer_from_dict(d: dict):
    try:
        kind = d["kind"]
        name = d["name"]
        if kind == "dense":
            return Dense(name, int(d["in_size"]), int(d["out_size"]))
        if kind == "conv2d":
            return Conv2D(
                name,
                int(d["in_channels"]),
                int(d["out_channels"]),
                tuple(d.get("kernel", (3, 3))),
                tuple(d.get("stride", (1, 1))),
                d.get("padding", "same"),
            )
        if kind == "relu":
            return ReLU(name)
        if kind == "maxpool2d":
            return MaxPool2D(name, tuple(d.get("pool", (2, 2))))
        if kind == "flatten":
            return Flatten(name)
        if kind == "global_avg_pool":
            return GlobalAvgPool(name)
        if kind == "residual":
            return Residual(name, tuple(_layer_from_dict(sub) for sub in d.get("body", [])))
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed layer entry {d!r}: {exc}") from exc
    raise ManifestError(f"unknown layer kind {kind!r} in layer {name!r}")


def save_bundle(net: Network, path) -> None:
    """Write the network (and any fitted patterns) as a bundle directory."""
    os.makedirs(path, exist_ok=True)
    tensors = dict(net.params)
    if net.patterns is not None:
        tensors.update(net.patterns.as_tensors())
    index = []
    offset = 0
    chunks = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype="<f4")
        index.append({"name": name, "offset": offset, "shape": list(arr.shape)})
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    manifest = {
        "version": FORMAT_VERSION,
        "input_shape": list(net.input_shape),
        "input_range": list(net.input_range),
        "layers": [_layer_to_dict(l) for l in net.layers],
        "tensors": index,
    }
    _atomic_write(os.path.join(path, BLOB_NAME), b"".join(chunks))
    _atomic_write(
        os.path.join(path, MANIFEST_NAME),
        json.dumps(manifest, indent=1).encode("ascii"),
    )


def _atomic_write(path, data: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_bundle(path) -> Network:
    """Load and validate a bundle; raises a distinct error per failure mode."""
    manifest_path = os.path.join(path, MANIFEST_NAME)
    try:
        with open(manifest_path, "rb") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise ManifestError(f"{path}: no {MANIFEST_NAME}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{manifest_path}: invalid JSON: {exc}") from exc
    if manifest.get("version") != FORMAT_VERSION:
        raise ManifestError(f"{path}: unsupported bundle version {manifest.get('version')!r}")
    for field in ("input_shape", "layers", "tensors"):
        if field not in manifest:
            raise ManifestError(f"{path}: manifest missing {field!r}")

    layers = tuple(_layer_from_dict(d) for d in manifest["layers"])
    try:
        with open(os.path.join(path, BLOB_NAME), "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise MissingTensorError(f"{path}: no {BLOB_NAME}") from exc

    tensors = {}
    for entry in manifest["tensors"]:
        try:
            name, offset, shape = entry["name"], int(entry["offset"]), tuple(entry["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}: malformed tensor entry {entry!r}") from exc
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if offset < 0 or end > len(blob):
            raise MissingTensorError(f"{path}: tensor {name!r} at offset {offset} exceeds blob")
        tensors[name] = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape).astype(np.float64)

    params = {k: v for k, v in tensors.items() if not k.endswith(_PATTERN_SUFFIXES)}
    pattern_tensors = {k: v for k, v in tensors.items() if k.endswith(_PATTERN_SUFFIXES)}
    try:
        net = Network(
            layers,
            tuple(manifest["input_shape"]),
            params,
            tuple(manifest.get("input_range", (0.0, 1.0))),
        )
    except TensorShapeError:
        raise
    if pattern_tensors:
        from ..attribution.patterns import PatternSet

        net.patterns = PatternSet.from_tensors(pattern_tensors)
    return net
