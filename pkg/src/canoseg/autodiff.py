"""Dense-tensor reverse-mode differentiation, plus the Adam optimizer and
the reduce-on-plateau learning-rate scheduler used for training.

Tensors wrap numpy arrays and record the operations that produced them;
``backward`` walks the recorded graph and accumulates gradients into every
reachable :class:`Parameter`.  Training defaults to float32; gradient checks
should build their graphs in float64.
"""

from __future__ import annotations

import base64
import hashlib

import numpy as np

from .errors import NotScalar, ShapeMismatch

_GRAD_ENABLED = True


class no_grad:
    """Context manager that disables graph recording (for decoding)."""

    def __enter__(self):
        global _GRAD_ENABLED
        self._prev = _GRAD_ENABLED
        _GRAD_ENABLED = False
        return self

    def __exit__(self, *exc):
        global _GRAD_ENABLED
        _GRAD_ENABLED = self._prev
        return False


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad=False):
        self.data = data if isinstance(data, np.ndarray) else np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad) and _GRAD_ENABLED
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data.reshape(()))

    def zero_grad(self):
        if self.grad is not None:
            self.grad[...] = 0

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={self.grad is not None})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


class Parameter(Tensor):
    """A named, trainable leaf tensor."""

    __slots__ = ("name", "trainable")

    def __init__(self, name, data, trainable=True):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.trainable = trainable
        self.grad = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    arr = np.asarray(x, dtype=dtype if dtype is not None else None)
    if arr.dtype.kind in "iub" and dtype is None:
        arr = arr.astype(np.float64)
    return Tensor(arr)


def _ensure_grad(t):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)


def _unbroadcast(g, shape):
    """Sum ``g`` down to ``shape`` (reverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, s in enumerate(shape):
        if s == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _make(data, parents, backward):
    out = Tensor(data)
    if _GRAD_ENABLED:
        grad_parents = tuple(p for p in parents if p.requires_grad)
        if grad_parents:
            out.requires_grad = True
            out._parents = grad_parents
            out._backward = backward
    return out


# ---------------------------------------------------------------------------
# core ops


def add(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data + b.data
    except ValueError as e:
        raise ShapeMismatch(f"add: {a.shape} vs {b.shape}") from e

    def backward(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += _unbroadcast(g, a.data.shape)
        if b.requires_grad:
            _ensure_grad(b)
            b.grad += _unbroadcast(g, b.data.shape)

    return _make(data, (a, b), backward)


def sub(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data - b.data
    except ValueError as e:
        raise ShapeMismatch(f"sub: {a.shape} vs {b.shape}") from e

    def backward(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += _unbroadcast(g, a.data.shape)
        if b.requires_grad:
            _ensure_grad(b)
            b.grad -= _unbroadcast(g, b.data.shape)

    return _make(data, (a, b), backward)


def mul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    try:
        data = a.data * b.data
    except ValueError as e:
        raise ShapeMismatch(f"mul: {a.shape} vs {b.shape}") from e

    def backward(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += _unbroadcast(g * b.data, a.data.shape)
        if b.requires_grad:
            _ensure_grad(b)
            b.grad += _unbroadcast(g * a.data, b.data.shape)

    return _make(data, (a, b), backward)


def matmul(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeMismatch(f"matmul: {a.shape} @ {b.shape}")
    data = a.data @ b.data

    def backward(g):
        if a.requires_grad:
            _ensure_grad(a)
            a.grad += g @ b.data.T
        if b.requires_grad:
            _ensure_grad(b)
            b.grad += a.data.T @ g

    return _make(data, (a, b), backward)


def concat(tensors, axis=-1):
    ts = [as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in ts], axis=axis)
    except ValueError as e:
        raise ShapeMismatch(f"concat: {[t.shape for t in ts]}") from e
    sizes = [t.data.shape[axis] for t in ts]
    offsets = np.cumsum([0] + sizes)

    def backward(g):
        for t, start, stop in zip(ts, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                _ensure_grad(t)
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(start, stop)
                t.grad += g[tuple(idx)]

    return _make(data, ts, backward)


def slice_axis(t, axis, start, stop):
    t = as_tensor(t)
    idx = [slice(None)] * t.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    data = t.data[idx]

    def backward(g):
        if t.requires_grad:
            _ensure_grad(t)
            t.grad[idx] += g

    return _make(data, (t,), backward)


def softmax(t, axis=-1):
    t = as_tensor(t)
    z = t.data - t.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if t.requires_grad:
            _ensure_grad(t)
            t.grad += y * (g - (g * y).sum(axis=axis, keepdims=True))

    return _make(y, (t,), backward)


def sigmoid(t):
    t = as_tensor(t)
    y = 1.0 / (1.0 + np.exp(-t.data))

    def backward(g):
        if t.requires_grad:
            _ensure_grad(t)
            t.grad += g * y * (1.0 - y)

    return _make(y, (t,), backward)


def tanh(t):
    t = as_tensor(t)
    y = np.tanh(t.data)

    def backward(g):
        if t.requires_grad:
            _ensure_grad(t)
            t.grad += g * (1.0 - y * y)

    return _make(y, (t,), backward)


def log(t):
    t = as_tensor(t)
    data = np.log(t.data)

    def backward(g):
        if t.requires_grad:
            _ensure_grad(t)
            t.grad += g / t.data

    return _make(data, (t,), backward)


def sum_(t, axis=None, keepdims=False):
    t = as_tensor(t)
    data = t.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if t.requires_grad:
            _ensure_grad(t)
            if axis is None:
                t.grad += g
            elif keepdims:
                t.grad += np.broadcast_to(g, t.data.shape)
            else:
                t.grad += np.broadcast_to(np.expand_dims(g, axis), t.data.shape)

    return _make(data, (t,), backward)


def mean_(t, axis=None, keepdims=False):
    t = as_tensor(t)
    n = t.data.size if axis is None else t.data.shape[axis]
    return mul(sum_(t, axis=axis, keepdims=keepdims), 1.0 / n)


def embedding_lookup(table, ids):
    """Rows of ``table`` selected by the integer array ``ids``.

    Output shape is ``ids.shape + (table.shape[1],)``.
    """
    table = as_tensor(table)
    ids = np.asarray(ids)
    if table.data.ndim != 2:
        raise ShapeMismatch(f"embedding table must be 2-D, got {table.shape}")
    if ids.size and (ids.min() < 0 or ids.max() >= table.data.shape[0]):
        raise ShapeMismatch("embedding index out of range")
    data = table.data[ids]

    def backward(g):
        if table.requires_grad:
            _ensure_grad(table)
            np.add.at(table.grad, ids.ravel(), g.reshape(-1, table.data.shape[1]))

    return _make(data, (table,), backward)


def dropout(t, p, train, rng):
    """Inverted dropout; identity when not training or p == 0."""
    t = as_tensor(t)
    if not train or p == 0.0:
        return t
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    mask = (rng.random(t.data.shape) >= p).astype(t.data.dtype) / (1.0 - p)
    return mul(t, Tensor(mask))


def cross_entropy(logits, targets, pad_mask=None):
    """Mean negative log-softmax probability of ``targets`` over non-pad rows.

    logits: (N, V); targets: (N,) int; pad_mask: (N,) with 1 = keep, 0 = pad.
    """
    logits = as_tensor(logits)
    targets = np.asarray(targets)
    if logits.data.ndim != 2 or targets.shape != (logits.data.shape[0],):
        raise ShapeMismatch(f"cross_entropy: logits {logits.shape}, targets {targets.shape}")
    n, v = logits.data.shape
    if pad_mask is None:
        mask = np.ones(n, dtype=logits.data.dtype)
    else:
        mask = np.asarray(pad_mask, dtype=logits.data.dtype)
        if mask.shape != (n,):
            raise ShapeMismatch(f"cross_entropy: pad_mask {mask.shape}")
    denom = float(mask.sum())
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1)) + logits.data.max(axis=1)
    nll = lse - logits.data[np.arange(n), targets]
    loss = (nll * mask).sum() / denom if denom > 0 else 0.0

    def backward(g):
        if logits.requires_grad and denom > 0:
            _ensure_grad(logits)
            probs = np.exp(z)
            probs /= probs.sum(axis=1, keepdims=True)
            probs[np.arange(n), targets] -= 1.0
            logits.grad += g * probs * (mask / denom)[:, None]

    return _make(np.asarray(loss, dtype=logits.data.dtype), (logits,), backward)


def gather_index(t, ids):
    """Pick one entry per row along the last axis: out[i] = t[i, ids[i]]."""
    t = as_tensor(t)
    ids = np.asarray(ids)
    if t.data.ndim != 2 or ids.shape != (t.data.shape[0],):
        raise ShapeMismatch(f"gather_index: {t.shape} with ids {ids.shape}")
    rows = np.arange(t.data.shape[0])
    data = t.data[rows, ids]

    def backward(g):
        if t.requires_grad:
            _ensure_grad(t)
            np.add.at(t.grad, (rows, ids), g)

    return _make(data, (t,), backward)


def scatter_probs(attn, ids, vocab_size):
    """Pool attention mass into vocabulary bins: out[b, v] = sum of attn[b, t]
    over positions t with ids[b, t] == v.  Used by the copy mechanism."""
    attn = as_tensor(attn)
    ids = np.asarray(ids)
    if attn.data.shape != ids.shape or attn.data.ndim != 2:
        raise ShapeMismatch(f"scatter_probs: attn {attn.shape}, ids {ids.shape}")
    b, t_len = ids.shape
    rows = np.repeat(np.arange(b), t_len)
    data = np.zeros((b, vocab_size), dtype=attn.data.dtype)
    np.add.at(data, (rows, ids.ravel()), attn.data.ravel())

    def backward(g):
        if attn.requires_grad:
            _ensure_grad(attn)
            attn.grad += g[rows, ids.ravel()].reshape(b, t_len)

    return _make(data, (attn,), backward)


# ---------------------------------------------------------------------------
# LSTM cell


class LSTMWeights:
    """One cell's weights: input and recurrent matrices plus a single bias,
    gate order (input, forget, candidate, output) along the last axis."""

    def __init__(self, w_ih, w_hh, b):
        self.w_ih = w_ih
        self.w_hh = w_hh
        self.b = b

    @property
    def hidden_size(self):
        return self.w_hh.data.shape[0]

    def params(self):
        return [self.w_ih, self.w_hh, self.b]


def lstm_cell(x, h_prev, c_prev, weights):
    """Standard gated LSTM step: returns (h_t, c_t)."""
    hid = weights.hidden_size
    if x.data.shape[1] != weights.w_ih.data.shape[0]:
        raise ShapeMismatch(
            f"lstm_cell: input width {x.data.shape[1]} != {weights.w_ih.data.shape[0]}")
    gates = add(add(matmul(x, weights.w_ih), matmul(h_prev, weights.w_hh)), weights.b)
    i = sigmoid(slice_axis(gates, 1, 0, hid))
    f = sigmoid(slice_axis(gates, 1, hid, 2 * hid))
    g = tanh(slice_axis(gates, 1, 2 * hid, 3 * hid))
    o = sigmoid(slice_axis(gates, 1, 3 * hid, 4 * hid))
    c_t = add(mul(f, c_prev), mul(i, g))
    h_t = mul(o, tanh(c_t))
    return h_t, c_t


# ---------------------------------------------------------------------------
# backward pass


def backward(loss):
    """Populate gradients of every parameter reachable from ``loss``."""
    if loss.data.size != 1:
        raise NotScalar(f"backward needs a scalar loss, got shape {loss.data.shape}")
    topo = []
    visited = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in visited:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# optimization


class Adam:
    """Bias-corrected Adam.  ``step`` consumes and zeroes gradients."""

    def __init__(self, params, lr, beta1=0.9, beta2=0.999, eps=1e-8, max_grad_norm=None):
        self.params = [p for p in params if p.trainable]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        if self.max_grad_norm is not None:
            total = 0.0
            for p in self.params:
                if p.grad is not None:
                    total += float((p.grad.astype(np.float64) ** 2).sum())
            norm = total ** 0.5
            if norm > self.max_grad_norm:
                scale = self.max_grad_norm / (norm + 1e-12)
                for p in self.params:
                    if p.grad is not None:
                        p.grad *= scale
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
        self.zero_grad()

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()


class PlateauScheduler:
    """Reduce-on-plateau in maximize mode: when the monitored metric fails to
    improve for more than ``patience`` consecutive steps, multiply the learning
    rate by ``factor`` (never below ``min_lr``) and reset the counter."""

    def __init__(self, lr, factor, patience, min_lr):
        if not 0.0 < factor < 1.0:
            raise ValueError(f"factor must be in (0, 1), got {factor}")
        self.lr = lr
        self.factor = factor
        self.patience = patience
        self.min_lr = min_lr
        self.best = float("-inf")
        self.epochs_since_best = 0

    def step(self, metric):
        if metric > self.best:
            self.best = metric
            self.epochs_since_best = 0
        else:
            self.epochs_since_best += 1
            if self.epochs_since_best > self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.epochs_since_best = 0
        return self.lr


# ---------------------------------------------------------------------------
# checkpoint files


CKPT_MAGIC = "#canoseg-ckpt"


def config_hash(header):
    blob = "\n".join(f"{k}={header[k]}" for k in sorted(header)).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def save_checkpoint(path, named_arrays, header):
    """Write a named-parameter table with a flat key-value header.

    Rows are ``name<TAB>shape<TAB>base64(little-endian float32)``.
    """
    lines = [f"{CKPT_MAGIC}\tv1\t{config_hash(header)}"]
    for k in sorted(header):
        lines.append(f"#cfg\t{k}\t{header[k]}")
    for name in sorted(named_arrays):
        arr = np.ascontiguousarray(named_arrays[name], dtype="<f4")
        shape = ",".join(str(s) for s in arr.shape)
        payload = base64.b64encode(arr.tobytes()).decode("ascii")
        lines.append(f"{name}\t{shape}\t{payload}")
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def load_checkpoint(path):
    """Read a checkpoint, returning (name -> float32 array, header dict)."""
    arrays = {}
    header = {}
    with open(path, encoding="utf-8") as f:
        first = f.readline().rstrip("\n")
        if not first.startswith(CKPT_MAGIC):
            raise ValueError(f"{path}: not a checkpoint file")
        stored_hash = first.split("\t")[2]
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#cfg\t"):
                _, key, value = line.split("\t", 2)
                header[key] = value
                continue
            name, shape_s, payload = line.split("\t")
            shape = tuple(int(s) for s in shape_s.split(",")) if shape_s else ()
            arr = np.frombuffer(base64.b64decode(payload), dtype="<f4").reshape(shape)
            arrays[name] = arr.copy()
    if config_hash(header) != stored_hash:
        raise ValueError(f"{path}: header hash mismatch")
    return arrays, header
