"""Versioned binary checkpoints for trained ensembles.

Layout (little-endian): magic "BCKP" | version u32 | header length u32 |
UTF-8 JSON header | concatenated raw parameter blobs in header manifest
order.  The JSON header carries the model spec, combiner, serialized
forest node lists, the run-config snapshot, and the array manifest.
"""

import json
import struct

import numpy as np

from . import bagging, forest, network
from .errors import CheckpointError

MAGIC = b"BCKP"
VERSION = 1


def _layer_to_dict(layer):
    return {"kind": layer.kind, "kernel": list(layer.kernel),
            "out_channels": layer.out_channels, "stride": layer.stride,
            "units": layer.units}


def _layer_from_dict(d):
    return network.LayerSpec(kind=d["kind"], kernel=tuple(d["kernel"]),
                             out_channels=d["out_channels"], stride=d["stride"],
                             units=d["units"])


def _forest_to_dict(rf):
    if rf is None:
        return None
    return {
        "n_classes": rf.n_classes,
        "n_features": rf.n_features,
        "trees": [
            [[n.feature, n.threshold, n.left, n.right, n.label] for n in t.nodes]
            for t in rf.trees
        ],
    }


def _forest_from_dict(d):
    if d is None:
        return None
    trees = [
        forest.DecisionTree(nodes=[forest.TreeNode(*row) for row in t]) for t in d["trees"]
    ]
    return forest.RandomForest(trees=trees, n_classes=d["n_classes"],
                               n_features=d["n_features"])


def save_checkpoint(path, ensemble: bagging.EnsembleModel, config=None):
    manifest = []
    blobs = []
    for m, params in enumerate(ensemble.param_sets):
        for name in sorted(params):
            arr = np.ascontiguousarray(params[name])
            manifest.append({"model": m, "name": name, "dtype": str(arr.dtype),
                             "shape": list(arr.shape)})
            blobs.append(arr.tobytes())
    header = {
        "model": {
            "input_shape": list(ensemble.model.input_shape),
            "layers": [_layer_to_dict(l) for l in ensemble.model.layers],
            "n_classes": ensemble.model.n_classes,
        },
        "n_models": ensemble.n_models,
        "combiner": ensemble.combiner,
        "forest": _forest_to_dict(ensemble.forest),
        "config": config or {},
        "arrays": manifest,
    }
    payload = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(payload)))
        fh.write(payload)
        for blob in blobs:
            fh.write(blob)


def _read_exact(fh, count, what):
    data = fh.read(count)
    if len(data) != count:
        raise CheckpointError(
            f"truncated checkpoint: expected {count} bytes for {what} at offset "
            f"{fh.tell() - len(data)}"
        )
    return data


def load_checkpoint(path):
    """Returns (EnsembleModel, config snapshot dict)."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise CheckpointError(f"bad magic {magic!r} at offset 0")
        version, hlen = struct.unpack("<II", _read_exact(fh, 8, "header sizes"))
        if version != VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version} at offset 4")
        try:
            header = json.loads(_read_exact(fh, hlen, "JSON header").decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CheckpointError(f"corrupt checkpoint header: {exc}") from exc
        model = network.ModelSpec(
            input_shape=tuple(header["model"]["input_shape"]),
            layers=tuple(_layer_from_dict(d) for d in header["model"]["layers"]),
            n_classes=header["model"]["n_classes"],
        )
        param_sets = [{} for _ in range(header["n_models"])]
        for entry in header["arrays"]:
            dtype = np.dtype(entry["dtype"])
            count = int(np.prod(entry["shape"])) if entry["shape"] else 1
            blob = _read_exact(fh, count * dtype.itemsize, f"array {entry['name']}")
            arr = np.frombuffer(blob, dtype=dtype).reshape(entry["shape"]).copy()
            param_sets[entry["model"]][entry["name"]] = arr
    ensemble = bagging.EnsembleModel(
        model=model, param_sets=param_sets, n_classes=model.n_classes,
        combiner=header["combiner"], forest=_forest_from_dict(header["forest"]),
    )
    return ensemble, header.get("config", {})
