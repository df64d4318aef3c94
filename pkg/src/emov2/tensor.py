"""Numpy-backed tensors with a tape of executed ops and reverse-mode gradients.

The tape is implicit: every op result carries a node holding its inputs, a
backward closure, and a global sequence number. backward() replays reachable
nodes strictly in reverse execution order. Gradients accumulate additively on
requires_grad leaves, so backward on a sum of losses equals the sum of the
individual backward passes.

Broadcasting is deliberately restricted: equal shapes, scalars, or same-rank
one-sided expansion (per-channel vectors like [1,C,1,1], keepdims statistics
like [N,1,H,W]). Rank extension and two-sided broadcasts raise, so silent
numpy broadcasts cannot corrupt gradients.
"""

from __future__ import annotations

import itertools
import struct
from contextlib import contextmanager

import numpy as np
from scipy.special import erf

_seq = itertools.count()
_grad_enabled = True

SQRT_2 = float(np.sqrt(2.0))
SQRT_2_PI = float(np.sqrt(2.0 / np.pi))


@contextmanager
def no_grad():
    """Disable tape recording inside the block (eval-mode forwards)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class _Node:
    __slots__ = ("seq", "inputs", "grad_fn")

    def __init__(self, inputs, grad_fn):
        self.seq = next(_seq)
        self.inputs = inputs
        self.grad_fn = grad_fn


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_node")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._node = None

    # -- introspection ----------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, requires_grad={self.requires_grad})"

    # -- autodiff ---------------------------------------------------------
    def backward(self):
        if self.size != 1:
            raise ValueError(f"backward requires a scalar, got shape {self.shape}")
        if self._node is None and not self.requires_grad:
            raise ValueError("backward on a tensor with no recorded graph")

        # Gather tensors reachable through the tape, iteratively (graphs for a
        # full backbone exceed the default recursion limit).
        ordered = []
        seen = set()
        stack = [self]
        while stack:
            t = stack.pop()
            if id(t) in seen or t._node is None:
                continue
            seen.add(id(t))
            ordered.append(t)
            stack.extend(t._node.inputs)
        ordered.sort(key=lambda t: t._node.seq, reverse=True)

        grads = {id(self): np.ones_like(self.data)}
        for t in ordered:
            g = grads.pop(id(t), None)
            if g is None:
                continue  # not on a path to the loss
            in_grads = t._node.grad_fn(g)
            for parent, pg in zip(t._node.inputs, in_grads):
                if pg is None:
                    continue
                if parent._node is not None:
                    acc = grads.get(id(parent))
                    grads[id(parent)] = pg if acc is None else acc + pg
                elif parent.requires_grad:
                    parent.grad = pg if parent.grad is None else parent.grad + pg
        # leaves that are also the root (x.backward() on a leaf scalar)
        if self._node is None and self.requires_grad:
            g = np.ones_like(self.data)
            self.grad = g if self.grad is None else self.grad + g

    # -- operator sugar ---------------------------------------------------
    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return scale(self, -1.0)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def permute(self, *axes):
        return permute(self, axes if len(axes) > 1 else axes[0])

    def transpose(self, a: int, b: int):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return permute(self, tuple(axes))

    def sum(self, axis=None, keepdims=False):
        return sum_(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return mean(self, axis, keepdims)


def _wrap(x):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=np.float64))


def _result(data, inputs, grad_fn):
    req = _grad_enabled and any(t.requires_grad or t._node is not None for t in inputs)
    out = Tensor(data)
    out.requires_grad = req
    if req:
        out._node = _Node(tuple(inputs), grad_fn)
    return out


# -- flop tracing ---------------------------------------------------------

class FlopTrace:
    """Counts of work actually executed while the trace is active.

    macs buckets by op kind; flops (2x convention) derived as 2*macs plus
    3 per softmax element. Bias adds kept separate so totals with and
    without bias are both available.
    """

    def __init__(self):
        self.macs = {}
        self.bias_adds = 0
        self.softmax_elements = 0

    def add_macs(self, kind: str, n: int):
        self.macs[kind] = self.macs.get(kind, 0) + int(n)

    @property
    def total_macs(self) -> int:
        return sum(self.macs.values())

    @property
    def softmax_flops(self) -> int:
        return 3 * self.softmax_elements

    @property
    def total_flops(self) -> int:
        """2x-MAC convention plus softmax, bias excluded."""
        return 2 * self.total_macs + self.softmax_flops

    def macs_of(self, kinds) -> int:
        return sum(self.macs.get(k, 0) for k in kinds)


_trace: FlopTrace | None = None


@contextmanager
def trace_flops():
    """Activate a FlopTrace for ops executed inside the block."""
    global _trace
    prev = _trace
    _trace = FlopTrace()
    try:
        yield _trace
    finally:
        _trace = prev


def _count_macs(kind, n):
    if _trace is not None:
        _trace.add_macs(kind, n)


def _count_bias(n):
    if _trace is not None:
        _trace.bias_adds += int(n)


def _count_softmax(n):
    if _trace is not None:
        _trace.softmax_elements += int(n)


# -- broadcasting guard ---------------------------------------------------

def _broadcast_ok(a, b) -> bool:
    if a == b:
        return True
    if a == () or b == ():
        return True
    if len(a) != len(b):
        return False
    a_grows = b_grows = False
    for da, db in zip(a, b):
        if da == db:
            continue
        if da == 1:
            a_grows = True
        elif db == 1:
            b_grows = True
        else:
            return False
    # one-sided only: [1,C,1,1] against [N,C,H,W] passes, rank extension and
    # two-sided patterns like [B,C,H,1] against [B,C,1,W] do not
    return not (a_grows and b_grows)


def _unbroadcast(grad, shape):
    if grad.shape == shape:
        return grad
    if shape == ():
        return np.asarray(grad.sum())
    axes = tuple(i for i, (g, s) in enumerate(zip(grad.shape, shape)) if s == 1 and g != 1)
    return grad.sum(axis=axes, keepdims=True)


def _check_pair(a: Tensor, b: Tensor, opname: str):
    if not _broadcast_ok(a.shape, b.shape):
        raise ValueError(
            f"{opname}: shapes {a.shape} and {b.shape} outside the supported "
            f"broadcast patterns (equal, scalar, or single-axis vector)"
        )


# -- elementwise ops ------------------------------------------------------

def add(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "add")

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return _result(a.data + b.data, (a, b), grad_fn)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "sub")

    def grad_fn(g):
        return _unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)

    return _result(a.data - b.data, (a, b), grad_fn)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "mul")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return _unbroadcast(g * bd, a.shape), _unbroadcast(g * ad, b.shape)

    return _result(ad * bd, (a, b), grad_fn)


def div(a: Tensor, b: Tensor) -> Tensor:
    _check_pair(a, b, "div")
    ad, bd = a.data, b.data

    def grad_fn(g):
        return _unbroadcast(g / bd, a.shape), _unbroadcast(-g * ad / (bd * bd), b.shape)

    return _result(ad / bd, (a, b), grad_fn)


def scale(a: Tensor, s: float) -> Tensor:
    s = float(s)

    def grad_fn(g):
        return (g * s,)

    return _result(a.data * s, (a,), grad_fn)


def sqrt(a: Tensor) -> Tensor:
    out = np.sqrt(a.data)

    def grad_fn(g):
        return (g * (0.5 / out),)

    return _result(out, (a,), grad_fn)


def silu(a: Tensor) -> Tensor:
    sig = 1.0 / (1.0 + np.exp(-a.data))
    out = a.data * sig

    def grad_fn(g):
        return (g * (sig * (1.0 + a.data * (1.0 - sig))),)

    return _result(out, (a,), grad_fn)


def gelu(a: Tensor) -> Tensor:
    # exact erf form, not the tanh approximation
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / SQRT_2))
    out = x * cdf

    def grad_fn(g):
        pdf = np.exp(-0.5 * x * x) / np.sqrt(2.0 * np.pi)
        return (g * (cdf + x * pdf),)

    return _result(out, (a,), grad_fn)


# -- reductions -----------------------------------------------------------

def _norm_axis(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axis(axis, a.ndim)
    out = a.data.sum(axis=axes, keepdims=keepdims)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _result(out, (a,), grad_fn)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axis(axis, a.ndim)
    n = 1
    for ax in axes:
        n *= a.shape[ax]
    out = a.data.mean(axis=axes, keepdims=keepdims)

    def grad_fn(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, a.shape) / n,)

    return _result(out, (a,), grad_fn)


# -- shape ops ------------------------------------------------------------

def reshape(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    old = a.shape

    def grad_fn(g):
        return (g.reshape(old),)

    return _result(a.data.reshape(shape), (a,), grad_fn)


def permute(a: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inv = np.argsort(axes)

    def grad_fn(g):
        return (g.transpose(inv),)

    return _result(a.data.transpose(axes), (a,), grad_fn)


def concat(tensors, axis: int) -> Tensor:
    tensors = list(tensors)
    axis = axis % tensors[0].ndim
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def grad_fn(g):
        return tuple(np.split(g, splits, axis=axis))

    return _result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), grad_fn)


def pad2d(a: Tensor, top: int, bottom: int, left: int, right: int) -> Tensor:
    """Zero-pad the trailing two (spatial) axes of a 4-d tensor."""
    if a.ndim != 4:
        raise ValueError(f"pad2d expects rank 4, got {a.ndim}")
    widths = ((0, 0), (0, 0), (top, bottom), (left, right))
    H, W = a.shape[2], a.shape[3]

    def grad_fn(g):
        return (g[:, :, top:top + H, left:left + W],)

    return _result(np.pad(a.data, widths), (a,), grad_fn)


def crop2d(a: Tensor, height: int, width: int) -> Tensor:
    """Keep the top-left height x width region of the spatial axes."""
    if a.ndim != 4:
        raise ValueError(f"crop2d expects rank 4, got {a.ndim}")
    full = a.shape

    def grad_fn(g):
        out = np.zeros(full, dtype=g.dtype)
        out[:, :, :height, :width] = g
        return (out,)

    return _result(a.data[:, :, :height, :width].copy(), (a,), grad_fn)


# -- matmul / softmax -----------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched matrix product [..., i, j] @ [..., j, k]; batch dims must match."""
    if a.ndim < 2 or b.ndim < 2:
        raise ValueError("matmul operands must have rank >= 2")
    if a.ndim != b.ndim and not (a.ndim == 2 or b.ndim == 2):
        raise ValueError(f"matmul rank mismatch: {a.shape} @ {b.shape}")
    if a.ndim == b.ndim and a.shape[:-2] != b.shape[:-2]:
        raise ValueError(f"matmul batch dims differ: {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul inner dims differ: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data
    out = ad @ bd
    batch = int(np.prod(out.shape[:-2], dtype=np.int64)) if out.ndim > 2 else 1
    _count_macs("matmul", batch * a.shape[-2] * a.shape[-1] * b.shape[-1])

    def grad_fn(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        # collapse batch dims if one operand was rank 2
        if ga.shape != ad.shape:
            ga = ga.reshape(-1, *ad.shape).sum(axis=0) if ga.ndim > ad.ndim else ga
            ga = ga.reshape(ad.shape)
        if gb.shape != bd.shape:
            gb = gb.reshape(-1, *bd.shape).sum(axis=0) if gb.ndim > bd.ndim else gb
            gb = gb.reshape(bd.shape)
        return ga, gb

    return _result(out, (a, b), grad_fn)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    m = x.max(axis=axis, keepdims=True)
    e = np.exp(x - m)
    out = e / e.sum(axis=axis, keepdims=True)
    _count_softmax(x.size)

    def grad_fn(g):
        s = (g * out).sum(axis=axis, keepdims=True)
        return (out * (g - s),)

    return _result(out, (a,), grad_fn)


def log_softmax(a: Tensor, axis: int = -1) -> Tensor:
    x = a.data
    m = x.max(axis=axis, keepdims=True)
    shifted = x - m
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse

    def grad_fn(g):
        soft = np.exp(out)
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return _result(out, (a,), grad_fn)


# -- linear / conv primitives ---------------------------------------------

def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x [N, fin] @ weight.T [fin, fout] + bias [fout]."""
    if x.ndim != 2 or weight.ndim != 2:
        raise ValueError(f"linear expects rank-2 x and weight, got {x.shape}, {weight.shape}")
    if x.shape[1] != weight.shape[1]:
        raise ValueError(f"linear feature mismatch: {x.shape} vs {weight.shape}")
    out = x.data @ weight.data.T + bias.data
    _count_macs("linear", x.shape[0] * x.shape[1] * weight.shape[0])
    _count_bias(x.shape[0] * weight.shape[0])

    def grad_fn(g):
        return g @ weight.data, g.T @ x.data, g.sum(axis=0)

    return _result(out, (x, weight, bias), grad_fn)


def _conv_geometry(x_shape, w_shape, stride, padding, groups):
    N, Cin, H, W = x_shape
    Cout, Cin_g, kh, kw = w_shape
    if Cin % groups or Cout % groups:
        raise ValueError(f"conv2d: channels ({Cin}->{Cout}) not divisible by groups={groups}")
    if Cin_g != Cin // groups:
        raise ValueError(f"conv2d: weight expects {Cin_g * groups} input channels, got {Cin}")
    Ho = (H + 2 * padding - kh) // stride + 1
    Wo = (W + 2 * padding - kw) // stride + 1
    if Ho <= 0 or Wo <= 0:
        raise ValueError(f"conv2d: kernel {kh}x{kw} does not fit input {H}x{W} with padding {padding}")
    return N, Cin, H, W, Cout, kh, kw, Ho, Wo


def _window_view(xp, kh, kw, stride, Ho, Wo):
    """Strided [N, C, Ho, Wo, kh, kw] view of the padded input, no copy."""
    N, C = xp.shape[:2]
    sN, sC, sH, sW = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp,
        shape=(N, C, Ho, Wo, kh, kw),
        strides=(sN, sC, sH * stride, sW * stride, sH, sW),
        writeable=False,
    )


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1,
           padding: int = 0, groups: int = 1) -> Tensor:
    """2-d convolution, im2col-style lowering. weight [Cout, Cin/G, kh, kw]."""
    N, Cin, H, W, Cout, kh, kw, Ho, Wo = _conv_geometry(x.shape, weight.shape, stride, padding, groups)
    wd = weight.data
    depthwise = groups == Cin and Cout == Cin
    kind = "dwconv" if depthwise else "conv"
    _count_macs(kind, N * Cout * Ho * Wo * (Cin // groups) * kh * kw)
    _count_bias(N * Cout * Ho * Wo)

    xp = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x.data

    if kh == kw == 1 and stride == 1 and padding == 0 and groups == 1:
        # dominant case: pointwise projection as one matmul
        out = np.einsum("nchw,oc->nohw", x.data, wd[:, :, 0, 0], optimize=True)
    elif kh == kw == 1 and stride == 1 and padding == 0:
        xg = x.data.reshape(N, groups, Cin // groups, H, W)
        wg = wd[:, :, 0, 0].reshape(groups, Cout // groups, Cin // groups)
        out = np.einsum("ngchw,goc->ngohw", xg, wg, optimize=True).reshape(N, Cout, Ho, Wo)
    elif depthwise:
        win = _window_view(xp, kh, kw, stride, Ho, Wo)
        out = np.einsum("nchwuv,cuv->nchw", win, wd[:, 0], optimize=True)
    else:
        win = _window_view(xp, kh, kw, stride, Ho, Wo)  # [N, Cin, Ho, Wo, kh, kw]
        wing = win.reshape(N, groups, Cin // groups, Ho, Wo, kh, kw)
        wg = wd.reshape(groups, Cout // groups, Cin // groups, kh, kw)
        out = np.einsum("ngchwuv,gocuv->ngohw", wing, wg, optimize=True).reshape(N, Cout, Ho, Wo)
    out = out + bias.data.reshape(1, Cout, 1, 1)

    def grad_fn(g):
        gb = g.sum(axis=(0, 2, 3))
        Hp, Wp = H + 2 * padding, W + 2 * padding
        if kh == kw == 1 and stride == 1 and padding == 0 and groups == 1:
            gw = np.einsum("nohw,nchw->oc", g, x.data, optimize=True).reshape(wd.shape)
            gx = np.einsum("nohw,oc->nchw", g, wd[:, :, 0, 0], optimize=True)
            return gx, gw, gb
        if kh == kw == 1 and stride == 1 and padding == 0:
            gg = g.reshape(N, groups, Cout // groups, H, W)
            xg = x.data.reshape(N, groups, Cin // groups, H, W)
            wg = wd[:, :, 0, 0].reshape(groups, Cout // groups, Cin // groups)
            gw = np.einsum("ngohw,ngchw->goc", gg, xg, optimize=True).reshape(wd.shape)
            gx = np.einsum("ngohw,goc->ngchw", gg, wg, optimize=True).reshape(N, Cin, H, W)
            return gx, gw, gb
        win = _window_view(xp, kh, kw, stride, Ho, Wo)
        if depthwise:
            gw = np.einsum("nohw,nohwuv->ouv", g, win, optimize=True)[:, None]
            gxp = np.zeros((N, Cin, Hp, Wp), dtype=g.dtype)
            # scatter-add each kernel tap back onto the padded input
            for u in range(kh):
                for v in range(kw):
                    gxp[:, :, u:u + Ho * stride:stride, v:v + Wo * stride:stride] += (
                        g * wd[None, :, 0, u, v, None, None]
                    )
        else:
            wing = win.reshape(N, groups, Cin // groups, Ho, Wo, kh, kw)
            gg = g.reshape(N, groups, Cout // groups, Ho, Wo)
            gw = np.einsum("ngohw,ngchwuv->gocuv", gg, wing, optimize=True).reshape(wd.shape)
            wg = wd.reshape(groups, Cout // groups, Cin // groups, kh, kw)
            gxp = np.zeros((N, groups, Cin // groups, Hp, Wp), dtype=g.dtype)
            for u in range(kh):
                for v in range(kw):
                    gxp[:, :, :, u:u + Ho * stride:stride, v:v + Wo * stride:stride] += np.einsum(
                        "ngohw,goc->ngchw", gg, wg[:, :, :, u, v], optimize=True
                    )
            gxp = gxp.reshape(N, Cin, Hp, Wp)
        gx = gxp[:, :, padding:padding + H, padding:padding + W] if padding else gxp
        return gx, gw, gb

    return _result(out, (x, weight, bias), grad_fn)


def direct_conv2d(x: np.ndarray, weight: np.ndarray, bias: np.ndarray,
                  stride: int = 1, padding: int = 0, groups: int = 1) -> np.ndarray:
    """Reference convolution: explicit loops over every output coordinate.

    Deliberately naive; the independent oracle the fast path is tested against.
    """
    N, Cin, H, W, Cout, kh, kw, Ho, Wo = _conv_geometry(x.shape, weight.shape, stride, padding, groups)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cin_g = Cin // groups
    cout_g = Cout // groups
    out = np.zeros((N, Cout, Ho, Wo), dtype=np.result_type(x, weight))
    for n in range(N):
        for co in range(Cout):
            g = co // cout_g
            for i in range(Ho):
                for j in range(Wo):
                    acc = 0.0
                    for ci in range(cin_g):
                        for u in range(kh):
                            for v in range(kw):
                                acc += (
                                    xp[n, g * cin_g + ci, i * stride + u, j * stride + v]
                                    * weight[co, ci, u, v]
                                )
                    out[n, co, i, j] = acc + bias[co]
    return out


# -- gradient checking ----------------------------------------------------

def grad_check(f, x: Tensor, eps: float = 1e-5) -> float:
    """Max over coordinates of |g_analytic - g_fd| / max(1, |g_fd|).

    f maps the tensor to a scalar Tensor; finite differences are central.
    """
    x.zero_grad()
    out = f(x)
    out.backward()
    if x.grad is None:
        raise ValueError("grad_check: x received no gradient; is requires_grad set?")
    analytic = x.grad.copy()

    fd = np.zeros_like(x.data)
    flat = x.data.reshape(-1)
    fd_flat = fd.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(x).item()
        flat[i] = orig - eps
        lo = f(x).item()
        flat[i] = orig
        fd_flat[i] = (hi - lo) / (2.0 * eps)

    err = np.abs(analytic - fd) / np.maximum(1.0, np.abs(fd))
    return float(err.max())


# -- tensor file format ---------------------------------------------------

_MAGIC_TENSOR = b"EMOT"
_TENSOR_VERSION = 1
_DTYPE_CODES = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_CODE_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


class FormatError(ValueError):
    """Raised for malformed tensor/checkpoint files."""


def save_tensor(path, arr: np.ndarray):
    arr = np.asarray(arr)
    if arr.dtype not in _DTYPE_CODES:
        raise FormatError(f"unsupported dtype {arr.dtype}; use float32 or float64")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sII", _MAGIC_TENSOR, _TENSOR_VERSION, arr.ndim))
        for d in arr.shape:
            fh.write(struct.pack("<Q", d))
        fh.write(struct.pack("<B", _DTYPE_CODES[arr.dtype]))
        fh.write(np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<")).tobytes())


def _read_exact(fh, n, what):
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what}")
    return buf


def load_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, version, rank = struct.unpack("<4sII", _read_exact(fh, 12, "header"))
        if magic != _MAGIC_TENSOR:
            raise FormatError(f"bad magic {magic!r}; not a tensor file")
        if version != _TENSOR_VERSION:
            raise FormatError(f"unsupported tensor format version {version}")
        if rank > 8:
            raise FormatError(f"implausible rank {rank}")
        dims = struct.unpack(f"<{rank}Q", _read_exact(fh, 8 * rank, "dims"))
        n = 1
        for d in dims:
            n *= d
        if n > 1 << 33:
            raise FormatError(f"dims {dims} exceed the supported element count")
        (code,) = struct.unpack("<B", _read_exact(fh, 1, "dtype"))
        if code not in _CODE_DTYPES:
            raise FormatError(f"unknown dtype code {code}")
        dt = _CODE_DTYPES[code]
        payload = _read_exact(fh, n * dt.itemsize, "payload")
        if fh.read(1):
            raise FormatError("trailing bytes after payload")
    return np.frombuffer(payload, dtype=dt).reshape(dims).astype(dt.newbyteorder("="))
