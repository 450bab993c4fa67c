"""Small differentiable MLPs with explicit tapes, AdamW, and checkpoints.

Architectures are fixed at construction (tanh hidden layers, linear output).
forward() returns an activation tape; backward() consumes it and produces
exact reverse-mode gradients for the parameters and the input. There is no
general autodiff graph -- just the layer chain, which is all the policy and
critic heads need.
"""

from __future__ import annotations

import json
import logging
import struct

import numpy as np

log = logging.getLogger(__name__)

MAGIC = b"FLXCKPT1"
CKPT_VERSION = 1


class ShapeMismatchError(Exception):
    """Input shape does not match the network's construction."""


class StaleTapeError(Exception):
    """Tape was produced by an older parameter version than the model holds."""


class Tape:
    __slots__ = ("x", "hs", "version")

    def __init__(self, x, hs, version):
        self.x = x          # input batch
        self.hs = hs        # hidden activations (post-tanh), one per hidden layer
        self.version = version


class MLP:
    """Fully connected tanh network; linear output layer.

    skip=True adds a linear bypass input->output (y += x @ S), which lets the
    net represent wide-range linear maps exactly instead of straining the
    tanh units; the bypass matrix is the last entry in params().
    """

    def __init__(self, sizes, rng: np.random.Generator, out_scale: float = 1.0,
                 skip: bool = False):
        self.sizes = list(sizes)
        self.Ws = []
        self.bs = []
        for i, (nin, nout) in enumerate(zip(sizes[:-1], sizes[1:])):
            scale = 1.0 / np.sqrt(nin)
            if i == len(sizes) - 2:
                scale *= out_scale
            self.Ws.append(rng.normal(0.0, scale, (nin, nout)))
            self.bs.append(np.zeros(nout))
        self.skip = np.zeros((sizes[0], sizes[-1])) if skip else None
        self.version = 0

    @property
    def in_dim(self):
        return self.sizes[0]

    @property
    def out_dim(self):
        return self.sizes[-1]

    def forward(self, x):
        """(B, in) -> ((B, out), tape). Deterministic in (params, x)."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatchError(f"expected (B, {self.in_dim}), got {x.shape}")
        hs = []
        h = x
        for W, b in zip(self.Ws[:-1], self.bs[:-1]):
            h = np.tanh(h @ W + b)
            hs.append(h)
        y = h @ self.Ws[-1] + self.bs[-1]
        if self.skip is not None:
            y = y + x @ self.skip
        return y, Tape(x, hs, self.version)

    def backward(self, tape: Tape, dy):
        """Reverse pass. Returns (grads, dx); grads aligns with params()."""
        if tape.version != self.version:
            raise StaleTapeError("tape predates the last parameter update")
        dy = np.asarray(dy, dtype=float)
        gWs = [None] * len(self.Ws)
        gbs = [None] * len(self.bs)
        delta = dy
        for li in range(len(self.Ws) - 1, -1, -1):
            a_prev = tape.hs[li - 1] if li > 0 else tape.x
            gWs[li] = a_prev.T @ delta
            gbs[li] = delta.sum(axis=0)
            delta = delta @ self.Ws[li].T
            if li > 0:
                delta = delta * (1.0 - tape.hs[li - 1] ** 2)
        grads = []
        for gW, gb in zip(gWs, gbs):
            grads.extend([gW, gb])
        if self.skip is not None:
            grads.append(tape.x.T @ dy)
            delta = delta + dy @ self.skip.T
        return grads, delta

    def params(self):
        out = []
        for W, b in zip(self.Ws, self.bs):
            out.extend([W, b])
        if self.skip is not None:
            out.append(self.skip)
        return out

    def set_params(self, arrays):
        k = 0
        for i in range(len(self.Ws)):
            self.Ws[i] = np.asarray(arrays[k], dtype=float).reshape(self.Ws[i].shape)
            self.bs[i] = np.asarray(arrays[k + 1], dtype=float).reshape(self.bs[i].shape)
            k += 2
        if self.skip is not None:
            self.skip = np.asarray(arrays[k], dtype=float).reshape(self.skip.shape)
        self.version += 1


def zeros_like_params(params):
    return [np.zeros_like(p) for p in params]


def add_grads(acc, grads, scale=1.0):
    for a, g in zip(acc, grads):
        a += scale * g
    return acc


class AdamW:
    """Decoupled-weight-decay adaptive moment optimizer."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=1e-4):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, lr):
        """One update in place. Returns False (and skips) on non-finite grads."""
        if any(not np.all(np.isfinite(g)) for g in grads):
            log.warning("non-finite gradient: update %d skipped", self.t + 1)
            return False
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            mh = m / b1t
            vh = v / b2t
            p -= lr * (mh / (np.sqrt(vh) + self.eps) + self.weight_decay * p)
        return True


def flatten(arrays):
    return np.concatenate([np.asarray(a, dtype=float).ravel() for a in arrays])


def unflatten(vec, like):
    out = []
    k = 0
    for a in like:
        n = a.size
        out.append(np.asarray(vec[k:k + n], dtype=float).reshape(a.shape))
        k += n
    return out


def save_checkpoint(path, named_arrays, meta):
    """Flat binary: magic, version, shape table, little-endian float32 data.

    meta (seed, step count, config hash, ...) goes to a sidecar
    '<path>.json'.
    """
    names = list(named_arrays.keys())
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", CKPT_VERSION, len(names)))
        for name in names:
            arr = named_arrays[name]
            nb = name.encode("utf-8")
            f.write(struct.pack("<H", len(nb)))
            f.write(nb)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
        for name in names:
            f.write(np.ascontiguousarray(named_arrays[name], dtype="<f4").tobytes())
    with open(str(path) + ".json", "w") as f:
        json.dump(meta, f, indent=1, sort_keys=True)


def load_checkpoint(path):
    with open(path, "rb") as f:
        if f.read(8) != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        version, n = struct.unpack("<II", f.read(8))
        if version != CKPT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        shapes = []
        for _ in range(n):
            (ln,) = struct.unpack("<H", f.read(2))
            name = f.read(ln).decode("utf-8")
            (ndim,) = struct.unpack("<B", f.read(1))
            dims = struct.unpack(f"<{ndim}I", f.read(4 * ndim))
            shapes.append((name, dims))
        arrays = {}
        for name, dims in shapes:
            count = int(np.prod(dims)) if dims else 1
            data = np.frombuffer(f.read(4 * count), dtype="<f4").astype(float)
            arrays[name] = data.reshape(dims)
    try:
        with open(str(path) + ".json") as f:
            meta = json.load(f)
    except FileNotFoundError:
        meta = {}
    return arrays, meta
