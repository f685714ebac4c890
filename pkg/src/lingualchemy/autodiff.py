"""Reverse-mode autodiff on dense numpy arrays, plus AdamW and checkpoints.

Small by design: rank <= 3 tensors, the exact op set the encoder and the
training losses need, and a tape built implicitly through parent links.
Gradients accumulate into ``.grad`` until explicitly zeroed; each call to
:func:`backward` contributes one full pass (PyTorch-style semantics).
"""

from __future__ import annotations

import struct
from contextlib import contextmanager

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable graph construction inside the block (evaluation fast path)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Tensor:
    """Dense row-major array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad=False, dtype=np.float64):
        self.data = np.asarray(data, dtype=dtype)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._vjp = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


def _make(data, parents, vjp):
    """Wrap an op result, recording the backward rule if the graph is live."""
    track = _grad_enabled and any(p.requires_grad for p in parents)
    out = Tensor(data, requires_grad=track, dtype=data.dtype)
    if track:
        out._parents = tuple(parents)
        out._vjp = vjp
    return out


def _topo_order(root: Tensor) -> list[Tensor]:
    """Iterative post-order DFS; result is a topological order ending at root."""
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(t) into ``t.grad`` for every tensor feeding loss.

    The per-pass flow is kept separate from the accumulated ``.grad`` so
    repeated calls without zeroing add one full gradient each time.
    """
    if loss.data.shape != ():
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    order = _topo_order(loss)
    flow: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.data.dtype)}
    for node in reversed(order):
        g = flow.get(id(node))
        if g is None or node._vjp is None:
            continue
        for parent, pg in zip(node._parents, node._vjp(g)):
            if pg is None or not parent.requires_grad:
                continue
            acc = flow.get(id(parent))
            flow[id(parent)] = pg if acc is None else acc + pg
    for node in order:
        g = flow.get(id(node))
        if g is None or not node.requires_grad:
            continue
        # flow arrays are never mutated afterwards, so sharing is safe here
        node.grad = g if node.grad is None else node.grad + g


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


# ---------------------------------------------------------------------------
# elementwise / broadcast ops
# ---------------------------------------------------------------------------

def _check_binary_shapes(a: Tensor, b: Tensor, op: str):
    if a.data.shape != b.data.shape and a.data.shape != () and b.data.shape != ():
        raise ValueError(f"{op}: incompatible shapes {a.data.shape} and {b.data.shape}")


def _reduce_to(g: np.ndarray, shape) -> np.ndarray:
    """Sum a gradient down to a (scalar-broadcast) operand's shape."""
    if g.shape == tuple(shape):
        return g
    return np.sum(g).reshape(shape).astype(g.dtype)


def _as_tensor(x, like: Tensor) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=like.data.dtype))


def add(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    _check_binary_shapes(a, b, "add")
    return _make(a.data + b.data, (a, b),
                 lambda g: (_reduce_to(g, a.data.shape), _reduce_to(g, b.data.shape)))


def sub(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    _check_binary_shapes(a, b, "sub")
    return _make(a.data - b.data, (a, b),
                 lambda g: (_reduce_to(g, a.data.shape), _reduce_to(-g, b.data.shape)))


def mul(a: Tensor, b) -> Tensor:
    b = _as_tensor(b, a)
    _check_binary_shapes(a, b, "mul")
    return _make(a.data * b.data, (a, b),
                 lambda g: (_reduce_to(g * b.data, a.data.shape),
                            _reduce_to(g * a.data, b.data.shape)))


def add_bias(x: Tensor, b: Tensor) -> Tensor:
    """Add a parameter whose shape is a trailing suffix of x (e.g. a bias row)."""
    bs = b.data.shape
    if x.data.shape[x.data.ndim - b.data.ndim:] != bs:
        raise ValueError(f"add_bias: {bs} is not a suffix of {x.data.shape}")
    lead = tuple(range(x.data.ndim - b.data.ndim))
    return _make(x.data + b.data, (x, b),
                 lambda g: (g, g.sum(axis=lead) if lead else g))


_GELU_C = np.sqrt(2.0 / np.pi)


def gelu(x: Tensor) -> Tensor:
    """tanh-approximated GELU."""
    xd = x.data
    sq = xd * xd
    t = np.tanh(_GELU_C * (xd + 0.044715 * sq * xd))
    out = 0.5 * xd * (1.0 + t)

    def vjp(g):
        du = _GELU_C * (1.0 + 3 * 0.044715 * sq)
        return (g * (0.5 * (1.0 + t) + 0.5 * xd * (1.0 - t * t) * du),)

    return _make(out, (x,), vjp)


def softplus(x: Tensor) -> Tensor:
    """log(1 + e^x), numerically stable; used for strictly-positive reparams."""
    out = np.logaddexp(0.0, x.data)
    return _make(out, (x,), lambda g: (g / (1.0 + np.exp(-x.data)),))


# ---------------------------------------------------------------------------
# linear algebra
# ---------------------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Matrix product; supports (m,k)@(k,n), batched (B,m,k)@(B,k,n), and
    (B,m,k)@(k,n)."""
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2 or ad.ndim > 3 or bd.ndim > 3:
        raise ValueError(f"matmul: unsupported ranks {ad.ndim} and {bd.ndim}")
    if ad.shape[-1] != bd.shape[-2]:
        raise ValueError(f"matmul: inner dims differ, {ad.shape} @ {bd.shape}")
    if ad.ndim == 3 and bd.ndim == 3 and ad.shape[0] != bd.shape[0]:
        raise ValueError(f"matmul: batch dims differ, {ad.shape} @ {bd.shape}")
    if ad.ndim == 2 and bd.ndim == 3:
        raise ValueError("matmul: (2d @ 3d) not supported")

    def vjp(g):
        da = g @ np.swapaxes(bd, -1, -2)
        if bd.ndim == 2 and ad.ndim == 3:
            k, n = bd.shape
            db = np.ascontiguousarray(ad).reshape(-1, k).T @ g.reshape(-1, n)
        else:
            db = np.swapaxes(ad, -1, -2) @ g
        return da, db

    return _make(ad @ bd, (a, b), vjp)


def transpose_last2(x: Tensor) -> Tensor:
    return _make(np.swapaxes(x.data, -1, -2), (x,),
                 lambda g: (np.swapaxes(g, -1, -2),))


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous slice of the last axis."""
    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[..., start:stop] = g
        return (gx,)
    return _make(x.data[..., start:stop].copy(), (x,), vjp)


def slice_rows(x: Tensor, stop: int) -> Tensor:
    """First ``stop`` rows along axis 0."""
    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[:stop] = g
        return (gx,)
    return _make(x.data[:stop].copy(), (x,), vjp)


def concat_last(parts: list[Tensor]) -> Tensor:
    sizes = [p.data.shape[-1] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def vjp(g):
        return tuple(g[..., offsets[i]:offsets[i + 1]] for i in range(len(parts)))

    return _make(np.concatenate([p.data for p in parts], axis=-1), tuple(parts), vjp)


def embedding(table: Tensor, ids: np.ndarray) -> Tensor:
    """Row gather from an embedding table; grads scatter-add back."""
    ids = np.asarray(ids)
    if ids.min() < 0 or ids.max() >= table.data.shape[0]:
        raise ValueError("embedding: id out of range")

    def vjp(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids.reshape(-1), g.reshape(-1, table.data.shape[1]))
        return (gt,)

    return _make(table.data[ids], (table,), vjp)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then scale-shift."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv
    out = gamma.data * xhat + beta.data

    def vjp(g):
        lead = tuple(range(g.ndim - 1))
        dgamma = (g * xhat).sum(axis=lead)
        dbeta = g.sum(axis=lead)
        dxhat = g * gamma.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        return dx, dgamma, dbeta

    return _make(out, (x, gamma, beta), vjp)


def masked_softmax(scores: Tensor, key_mask: np.ndarray) -> Tensor:
    """Softmax over the last axis with masked-out keys receiving zero weight.

    ``key_mask`` is (B, T) boolean; scores are (B, Tq, T). Each query row must
    keep at least one valid key.
    """
    key_mask = np.asarray(key_mask, dtype=bool)
    masked = np.where(key_mask[:, None, :], scores.data, -np.inf)
    shifted = masked - masked.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=-1, keepdims=True)

    def vjp(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        return (p * (g - inner),)

    return _make(p, (scores,), vjp)


def scale(x: Tensor, factor: float) -> Tensor:
    return _make(x.data * factor, (x,), lambda g: (g * factor,))


def sum_all(x: Tensor) -> Tensor:
    """Scalar sum of every element."""
    return _make(np.asarray(x.data.sum(), dtype=x.data.dtype), (x,),
                 lambda g: (np.broadcast_to(g, x.data.shape),))


# ---------------------------------------------------------------------------
# pooling
# ---------------------------------------------------------------------------

def take_first_position(x: Tensor) -> Tensor:
    """(B, T, d) -> (B, d) slice at position 0."""
    def vjp(g):
        gx = np.zeros_like(x.data)
        gx[:, 0, :] = g
        return (gx,)
    return _make(x.data[:, 0, :].copy(), (x,), vjp)


def mean_pool_masked(x: Tensor, mask: np.ndarray) -> Tensor:
    """(B, T, d) -> (B, d) mean over mask-true positions per row."""
    mask = np.asarray(mask, dtype=bool)
    counts = mask.sum(axis=1)
    if (counts == 0).any():
        raise ValueError("mean_pool_masked: a row has no unmasked position")
    w = mask.astype(x.data.dtype) / counts[:, None]
    out = np.einsum("btd,bt->bd", x.data, w)

    def vjp(g):
        return (g[:, None, :] * w[:, :, None],)

    return _make(out, (x,), vjp)


# ---------------------------------------------------------------------------
# losses
# ---------------------------------------------------------------------------

def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Mean over the batch of -log softmax(logits)[label]."""
    labels = np.asarray(labels, dtype=np.int64)
    n, c = logits.data.shape
    if labels.shape != (n,):
        raise ValueError(f"labels shape {labels.shape} does not match batch {n}")
    if labels.min() < 0 or labels.max() >= c:
        raise ValueError("label index out of range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(lse - shifted[np.arange(n), labels]))

    def vjp(g):
        p = np.exp(shifted)
        p /= p.sum(axis=1, keepdims=True)
        p[np.arange(n), labels] -= 1.0
        return (g * p / n,)

    return _make(np.asarray(loss, dtype=logits.data.dtype), (logits,), vjp)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over rows of the squared Euclidean row distance.

    Note the convention: row sums of squares averaged over the N rows, not
    over every element.
    """
    if pred.data.shape != target.data.shape:
        raise ValueError(f"mse: shapes differ, {pred.data.shape} vs {target.data.shape}")
    if pred.data.ndim != 2 or pred.data.shape[0] < 1:
        raise ValueError("mse expects a nonempty (N, d) matrix")
    n = pred.data.shape[0]
    diff = pred.data - target.data
    loss = np.asarray((diff ** 2).sum() / n, dtype=pred.data.dtype)

    def vjp(g):
        base = g * 2.0 * diff / n
        return base, -base

    return _make(loss, (pred, target), vjp)


# ---------------------------------------------------------------------------
# optimizer
# ---------------------------------------------------------------------------

class AdamW:
    """AdamW with decoupled weight decay and bias-corrected moments."""

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8,
                 weight_decay=0.01, no_decay=()):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self._no_decay = {id(p) for p in no_decay}
        self.step_count = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self):
        for p in self.params:
            if p.grad is None:
                raise RuntimeError("AdamW.step: parameter has no gradient; "
                                   "run backward() first")
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for i, p in enumerate(self.params):
            g = p.grad
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * g * g
            m_hat = self._m[i] / bc1
            v_hat = self._v[i] / bc2
            p.data = p.data - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay and id(p) not in self._no_decay:
                p.data = p.data - self.lr * self.weight_decay * p.data

    def zero_grad(self):
        zero_grads(self.params)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

_MAGIC = b"LALC"
_VERSION = 1


def save_checkpoint(path, named_params) -> None:
    """Binary checkpoint: magic, u16 version, then one record per tensor
    (u16 name length, name, u8 rank, u32 extents, float32 little-endian data).
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<H", _VERSION))
        for name, tensor in named_params:
            data = tensor.data if isinstance(tensor, Tensor) else np.asarray(tensor)
            arr = np.ascontiguousarray(data, dtype="<f4")
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", arr.ndim))
            for extent in arr.shape:
                fh.write(struct.pack("<I", extent))
            fh.write(arr.tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Read a checkpoint back as an ordered name -> float32 array mapping."""
    out: dict[str, np.ndarray] = {}
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: bad checkpoint magic")
        (version,) = struct.unpack("<H", fh.read(2))
        if version != _VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        while True:
            head = fh.read(2)
            if not head:
                break
            (name_len,) = struct.unpack("<H", head)
            name = fh.read(name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", fh.read(1))
            shape = tuple(struct.unpack("<I", fh.read(4))[0] for _ in range(rank))
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(4 * count), dtype="<f4").reshape(shape)
            out[name] = data.copy()
    return out
