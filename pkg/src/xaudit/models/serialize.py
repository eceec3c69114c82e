"""Binary model container.

Layout (all little-endian)::

    magic    8 bytes  b"XAUDMDL1"
    version  u8
    kind     u8       1 = MLP, 2 = random forest
    task     u8       0 = classification, 1 = regression
    payload

MLP payload: u32 layer count, then per layer u32 out_dim, u32 in_dim,
u8 activation code, out*in f64 weights (row-major), out f64 biases.

Forest payload: u32 n_features, u32 n_classes, i64 seed, u32 n_trees, then per
tree u32 n_nodes, u32 n_values and per node i64 feature, f64 threshold,
i64 left, i64 right, n_values f64 leaf values.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..errors import ModelFormatError
from .forest import RandomForest, Tree
from .mlp import ACTIVATIONS, LayerSpec, MlpModel

MAGIC = b"XAUDMDL1"
VERSION = 1
KIND_MLP = 1
KIND_FOREST = 2
TASKS = ("classification", "regression")


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.pos + size > len(self.buf):
            raise ModelFormatError(
                f"truncated model file: needed {size} bytes at offset {self.pos}, "
                f"only {len(self.buf) - self.pos} left")
        out = struct.unpack_from(fmt, self.buf, self.pos)
        self.pos += size
        return out

    def floats(self, count: int) -> np.ndarray:
        (raw,) = self.take(f"<{count * 8}s")
        return np.frombuffer(raw, dtype="<f8").astype(np.float64)


def dumps(model) -> bytes:
    parts = [MAGIC]
    if isinstance(model, MlpModel):
        parts.append(struct.pack("<BBB", VERSION, KIND_MLP, TASKS.index(model.task)))
        parts.append(struct.pack("<I", len(model.layers)))
        for layer in model.layers:
            parts.append(struct.pack("<IIB", layer.out_dim, layer.in_dim,
                                     ACTIVATIONS.index(layer.activation)))
            parts.append(np.ascontiguousarray(layer.weight, dtype="<f8").tobytes())
            parts.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    elif isinstance(model, RandomForest):
        parts.append(struct.pack("<BBB", VERSION, KIND_FOREST, TASKS.index(model.task)))
        parts.append(struct.pack("<IIqI", model.n_features, model.n_classes,
                                 model.seed, len(model.trees)))
        for tree in model.trees:
            n_values = tree.value.shape[1]
            parts.append(struct.pack("<II", tree.n_nodes, n_values))
            for k in range(tree.n_nodes):
                parts.append(struct.pack("<qdqq", int(tree.feature[k]),
                                         float(tree.threshold[k]),
                                         int(tree.left[k]), int(tree.right[k])))
                parts.append(np.ascontiguousarray(tree.value[k], dtype="<f8").tobytes())
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return b"".join(parts)


def loads(buf: bytes):
    if len(buf) < len(MAGIC) or buf[:len(MAGIC)] != MAGIC:
        raise ModelFormatError("bad magic header: not an xaudit model file")
    r = _Reader(buf)
    r.pos = len(MAGIC)
    version, kind, task_code = r.take("<BBB")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model file version {version} (expected {VERSION})")
    if task_code >= len(TASKS):
        raise ModelFormatError(f"unknown task code {task_code}")
    task = TASKS[task_code]

    if kind == KIND_MLP:
        (n_layers,) = r.take("<I")
        layers = []
        for _ in range(n_layers):
            out_dim, in_dim, act = r.take("<IIB")
            if act >= len(ACTIVATIONS):
                raise ModelFormatError(f"unknown activation code {act}")
            w = r.floats(out_dim * in_dim).reshape(out_dim, in_dim)
            b = r.floats(out_dim)
            layers.append(LayerSpec(w, b, ACTIVATIONS[act]))
        model = MlpModel(tuple(layers), task)
    elif kind == KIND_FOREST:
        n_features, n_classes, seed, n_trees = r.take("<IIqI")
        trees = []
        for _ in range(n_trees):
            n_nodes, n_values = r.take("<II")
            feat = np.empty(n_nodes, dtype=np.int64)
            thr = np.empty(n_nodes)
            left = np.empty(n_nodes, dtype=np.int64)
            right = np.empty(n_nodes, dtype=np.int64)
            vals = np.empty((n_nodes, n_values))
            for k in range(n_nodes):
                feat[k], thr[k], left[k], right[k] = r.take("<qdqq")
                vals[k] = r.floats(n_values)
            trees.append(Tree(feat, thr, left, right, vals))
        model = RandomForest(tuple(trees), task, n_features, n_classes, seed)
    else:
        raise ModelFormatError(f"unknown model kind {kind}")

    if r.pos != len(buf):
        raise ModelFormatError(f"{len(buf) - r.pos} trailing bytes after model payload")
    return model


def save_model(model, path) -> None:
    Path(path).write_bytes(dumps(model))


def load_model(path):
    return loads(Path(path).read_bytes())
