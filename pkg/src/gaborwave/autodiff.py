"""Complex tensors and a minimal reverse-mode differentiation tape.

Data model
----------
A ``CTensor`` stores a dense array of complex values as two float64 planes
(``re``, ``im``) of identical shape, row-major. A complex quantity is treated
everywhere as a pair of independent real values: the gradient of a real
scalar loss with respect to a complex tensor is the pair of real partials
(d/d re, d/d im), which is exactly what central finite differences measure
coordinate by coordinate. No Wirtinger calculus appears in the interface.

Tape model
----------
Operations record themselves on a ``Tape`` when any operand lives on one.
Records are appended in execution order, so the sequence is already
topologically sorted; ``Tape.backward`` makes a single reverse sweep and
visits each record exactly once. Tensors are immutable once built except
for the ``grad`` slot; a tape is single-writer and is meant to live for
one forward/backward step.

Conventions
-----------
Convolution is true convolution: the kernel is reversed along its taps and
slid over "valid" windows only (no padding). All arithmetic accumulates in
float64 regardless of how callers produced their inputs.
"""

from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ContractError, DimensionError, NumericError, ParameterError

Array = np.ndarray


def _as_plane(x) -> Array:
    return np.asarray(x, dtype=np.float64)


class CTensor:
    """Dense complex tensor stored as separate real/imaginary float64 planes."""

    __slots__ = ("re", "im", "grad", "_tape", "_idx")

    def __init__(self, re, im=None):
        re = _as_plane(re)
        if im is None:
            im = np.zeros_like(re)
        else:
            im = _as_plane(im)
        if re.shape != im.shape:
            raise DimensionError(
                f"real part has shape {re.shape} but imaginary part has shape {im.shape}"
            )
        self.re = re
        self.im = im
        self.grad: CTensor | None = None
        self._tape: "Tape | None" = None
        self._idx: int | None = None

    @property
    def shape(self) -> tuple:
        return self.re.shape

    @property
    def ndim(self) -> int:
        return self.re.ndim

    @property
    def size(self) -> int:
        return self.re.size

    def numpy(self) -> Array:
        """Copy out as a complex128 ndarray."""
        return self.re + 1j * self.im

    def item(self):
        if self.re.size != 1:
            raise ContractError(f"item() on tensor of shape {self.shape}")
        if np.all(self.im == 0.0):
            return float(self.re.reshape(()))
        return complex(self.re.reshape(()), self.im.reshape(()))

    def is_real(self) -> bool:
        return bool(np.all(self.im == 0.0))

    def __repr__(self):
        return f"CTensor(shape={self.shape}, tracked={self._tape is not None})"

    # Small operator surface; everything else is a module-level function.
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return cmul(self, other)

    def __rmul__(self, other):
        return cmul(other, self)

    def __neg__(self):
        return neg(self)


def ctensor(values, im=None) -> CTensor:
    """Build an untracked tensor from array-like (complex input is split)."""
    if im is not None:
        return CTensor(values, im)
    arr = np.asarray(values)
    if np.iscomplexobj(arr):
        return CTensor(arr.real, arr.imag)
    return CTensor(arr)


def _lift(x) -> CTensor:
    if isinstance(x, CTensor):
        return x
    if isinstance(x, complex):
        return CTensor(np.asarray(x.real), np.asarray(x.imag))
    return ctensor(x)


class Tape:
    """Append-only record of primitive operations plus a parameter registry."""

    def __init__(self):
        self._records: list[tuple[int, Callable | None]] = []
        self._params: dict[str, CTensor] = {}

    def __len__(self):
        return len(self._records)

    def parameter(self, name: str, re, im=None) -> CTensor:
        """Register a leaf tensor whose gradient ``backward`` will report.

        The arrays are wrapped without copying; the caller owns the storage
        and may update it in place between tapes (not while one is live).
        """
        if name in self._params:
            raise ContractError(f"parameter {name!r} registered twice")
        t = CTensor(_as_plane(re), None if im is None else _as_plane(im))
        self._append(t, None)
        self._params[name] = t
        return t

    def parameters(self) -> dict[str, CTensor]:
        return dict(self._params)

    def _append(self, out: CTensor, vjp: Callable | None):
        out._tape = self
        out._idx = len(self._records)
        self._records.append((out._idx, vjp))

    def backward(self, loss: CTensor) -> dict[str, CTensor]:
        """Reverse sweep from a real scalar node; returns grads per parameter.

        Parameters that never fed the loss get zero gradients. Complex grads
        come back as a CTensor holding both real partials.
        """
        if loss._tape is not self:
            raise ContractError("loss was not computed on this tape")
        if loss.size != 1:
            raise ContractError(f"loss must be scalar, got shape {loss.shape}")
        if not np.all(loss.im == 0.0):
            raise ContractError("loss must be real-valued")

        grads: dict[int, list] = {}
        grads[loss._idx] = [np.ones_like(loss.re), None]

        def acc(parent: CTensor, gre, gim):
            if parent._tape is not self:
                return  # constants and foreign tensors take no gradient
            buf = grads.get(parent._idx)
            if buf is None:
                grads[parent._idx] = [
                    np.array(gre, dtype=np.float64, copy=True) if gre is not None else None,
                    np.array(gim, dtype=np.float64, copy=True) if gim is not None else None,
                ]
                return
            if gre is not None:
                buf[0] = gre.copy() if buf[0] is None else buf[0] + gre
            if gim is not None:
                buf[1] = gim.copy() if buf[1] is None else buf[1] + gim

        for idx, vjp in reversed(self._records):
            buf = grads.get(idx)
            if buf is None or vjp is None:
                continue
            gre, gim = buf
            vjp(gre, gim, acc)

        out: dict[str, CTensor] = {}
        for name, p in self._params.items():
            buf = grads.get(p._idx)
            gre = buf[0] if buf and buf[0] is not None else np.zeros_like(p.re)
            gim = buf[1] if buf and buf[1] is not None else np.zeros_like(p.im)
            g = CTensor(np.broadcast_to(gre, p.shape).copy(),
                        np.broadcast_to(gim, p.shape).copy())
            p.grad = g
            out[name] = g
        return out


def _owner_tape(parents: Iterable[CTensor]) -> Tape | None:
    tape = None
    for p in parents:
        if p._tape is None:
            continue
        if tape is None:
            tape = p._tape
        elif tape is not p._tape:
            raise ContractError("operands live on different tapes")
    return tape


def _record(out: CTensor, parents: Sequence[CTensor], vjp: Callable):
    tape = _owner_tape(parents)
    if tape is not None:
        tape._append(out, vjp)
    return out


def _tracked(t: CTensor) -> bool:
    return t._tape is not None


def _unbroadcast(g: Array, shape: tuple) -> Array:
    """Sum a broadcast gradient back down to the operand's shape."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, extent in enumerate(shape):
        if extent == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_broadcast(a: CTensor, b: CTensor, opname: str):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(
            f"{opname}: shapes {a.shape} and {b.shape} are incompatible"
        ) from None


# ---------------------------------------------------------------------------
# elementwise complex arithmetic
# ---------------------------------------------------------------------------

def add(a, b) -> CTensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a, b, "add")
    out = CTensor(a.re + b.re, a.im + b.im)

    def vjp(gre, gim, acc):
        acc(a, None if gre is None else _unbroadcast(gre, a.shape),
            None if gim is None else _unbroadcast(gim, a.shape))
        acc(b, None if gre is None else _unbroadcast(gre, b.shape),
            None if gim is None else _unbroadcast(gim, b.shape))

    return _record(out, (a, b), vjp)


def sub(a, b) -> CTensor:
    a, b = _lift(a), _lift(b)
    _check_broadcast(a, b, "sub")
    out = CTensor(a.re - b.re, a.im - b.im)

    def vjp(gre, gim, acc):
        acc(a, None if gre is None else _unbroadcast(gre, a.shape),
            None if gim is None else _unbroadcast(gim, a.shape))
        acc(b, None if gre is None else _unbroadcast(-gre, b.shape),
            None if gim is None else _unbroadcast(-gim, b.shape))

    return _record(out, (a, b), vjp)


def neg(a) -> CTensor:
    a = _lift(a)
    out = CTensor(-a.re, -a.im)

    def vjp(gre, gim, acc):
        acc(a, None if gre is None else -gre, None if gim is None else -gim)

    return _record(out, (a,), vjp)


def cmul(a, b) -> CTensor:
    """Elementwise complex product with numpy broadcasting."""
    a, b = _lift(a), _lift(b)
    _check_broadcast(a, b, "cmul")
    out = CTensor(a.re * b.re - a.im * b.im, a.re * b.im + a.im * b.re)

    def vjp(gre, gim, acc):
        gre_ = gre if gre is not None else 0.0
        gim_ = gim if gim is not None else 0.0
        acc(a, _unbroadcast(np.asarray(gre_ * b.re + gim_ * b.im), a.shape),
            _unbroadcast(np.asarray(gim_ * b.re - gre_ * b.im), a.shape))
        acc(b, _unbroadcast(np.asarray(gre_ * a.re + gim_ * a.im), b.shape),
            _unbroadcast(np.asarray(gim_ * a.re - gre_ * a.im), b.shape))

    return _record(out, (a, b), vjp)


def complex_elementwise_mul(a: CTensor, b: CTensor) -> CTensor:
    """Strict same-shape complex Hadamard product."""
    a, b = _lift(a), _lift(b)
    if a.shape != b.shape:
        raise DimensionError(
            f"complex_elementwise_mul: shapes {a.shape} and {b.shape} differ"
        )
    return cmul(a, b)


def conj(a) -> CTensor:
    a = _lift(a)
    out = CTensor(a.re.copy(), -a.im)

    def vjp(gre, gim, acc):
        acc(a, gre, None if gim is None else -gim)

    return _record(out, (a,), vjp)


def make_complex(re_part, im_part) -> CTensor:
    """Join two real tensors into one complex tensor."""
    a, b = _lift(re_part), _lift(im_part)
    _require_real(a, "make_complex")
    _require_real(b, "make_complex")
    _check_broadcast(a, b, "make_complex")
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = CTensor(np.broadcast_to(a.re, shape).copy(),
                  np.broadcast_to(b.re, shape).copy())

    def vjp(gre, gim, acc):
        acc(a, None if gre is None else _unbroadcast(gre, a.shape), None)
        acc(b, None if gim is None else _unbroadcast(gim, b.shape), None)

    return _record(out, (a, b), vjp)


# ---------------------------------------------------------------------------
# real-domain elementwise ops (imaginary part must be zero)
# ---------------------------------------------------------------------------

def _require_real(a: CTensor, opname: str):
    if not np.all(a.im == 0.0):
        raise ContractError(f"{opname} expects a real-valued tensor")


def _real_unary(a, fwd, dfn, opname) -> CTensor:
    a = _lift(a)
    _require_real(a, opname)
    y = fwd(a.re)
    out = CTensor(y)

    def vjp(gre, gim, acc):
        if gre is None:
            return
        acc(a, gre * dfn(a.re, y), None)

    return _record(out, (a,), vjp)


def rexp(a) -> CTensor:
    return _real_unary(a, np.exp, lambda x, y: y, "rexp")


def rlog(a) -> CTensor:
    return _real_unary(a, np.log, lambda x, y: 1.0 / x, "rlog")


def rsqrt(a) -> CTensor:
    return _real_unary(a, np.sqrt, lambda x, y: 0.5 / y, "rsqrt")


def rrecip(a) -> CTensor:
    return _real_unary(a, lambda x: 1.0 / x, lambda x, y: -y * y, "rrecip")


def rcos(a) -> CTensor:
    return _real_unary(a, np.cos, lambda x, y: -np.sin(x), "rcos")


def rsin(a) -> CTensor:
    return _real_unary(a, np.sin, lambda x, y: np.cos(x), "rsin")


def rabs(a) -> CTensor:
    # Subgradient 0 at the kink.
    return _real_unary(a, np.abs, lambda x, y: np.sign(x), "rabs")


def rsinc(a) -> CTensor:
    """sin(x)/x with the removable singularity filled in (value 1, slope 0)."""

    def fwd(x):
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(x == 0.0, 1.0, np.sin(x) / np.where(x == 0.0, 1.0, x))
        return y

    def dfn(x, y):
        with np.errstate(divide="ignore", invalid="ignore"):
            safe = np.where(x == 0.0, 1.0, x)
            d = np.where(x == 0.0, 0.0, (np.cos(x) - y) / safe)
        return d

    return _real_unary(a, fwd, dfn, "rsinc")


def soft_clip_below(a, hi: float, margin: float) -> CTensor:
    """Identity below ``hi - margin``; saturates C1-smoothly toward ``hi``.

    Output is strictly less than ``hi`` for every finite input; the slope at
    the junction is 1 and decays exponentially inside the saturation zone.
    """
    if margin <= 0:
        raise ParameterError(f"margin must be positive, got {margin}")
    a = _lift(a)
    _require_real(a, "soft_clip_below")
    j = hi - margin
    x = a.re
    over = x > j
    y = np.where(over, j + margin * (1.0 - np.exp(-(x - j) / margin)), x)
    out = CTensor(y)

    def vjp(gre, gim, acc):
        if gre is None:
            return
        slope = np.where(over, np.exp(-(x - j) / margin), 1.0)
        acc(a, gre * slope, None)

    return _record(out, (a,), vjp)


# ---------------------------------------------------------------------------
# shape and reduction ops
# ---------------------------------------------------------------------------

def reshape(a, shape) -> CTensor:
    a = _lift(a)
    out = CTensor(a.re.reshape(shape), a.im.reshape(shape))

    def vjp(gre, gim, acc):
        acc(a, None if gre is None else gre.reshape(a.shape),
            None if gim is None else gim.reshape(a.shape))

    return _record(out, (a,), vjp)


def sslice(a, key) -> CTensor:
    """Basic (non-fancy) slicing; gradient scatters back into zeros."""
    a = _lift(a)
    out = CTensor(a.re[key].copy(), a.im[key].copy())

    def vjp(gre, gim, acc):
        zre = zim = None
        if gre is not None:
            zre = np.zeros_like(a.re)
            zre[key] = gre
        if gim is not None:
            zim = np.zeros_like(a.im)
            zim[key] = gim
        acc(a, zre, zim)

    return _record(out, (a,), vjp)


def csum(a, axis=None, keepdims: bool = False) -> CTensor:
    a = _lift(a)
    out = CTensor(a.re.sum(axis=axis, keepdims=keepdims),
                  a.im.sum(axis=axis, keepdims=keepdims))

    def expand(g):
        if g is None:
            return None
        if axis is None:
            return np.broadcast_to(g, a.shape).copy()
        axes = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            g = np.expand_dims(g, axes)
        return np.broadcast_to(g, a.shape).copy()

    def vjp(gre, gim, acc):
        acc(a, expand(gre), expand(gim))

    return _record(out, (a,), vjp)


def cmean(a, axis=None, keepdims: bool = False) -> CTensor:
    a = _lift(a)
    if axis is None:
        n = a.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        n = 1
        for ax in axes:
            n *= a.shape[ax]
    return cmul(csum(a, axis=axis, keepdims=keepdims), 1.0 / n)


def take_per_row(a, idx) -> CTensor:
    """Pick one column per row of a 2-D tensor."""
    a = _lift(a)
    idx = np.asarray(idx, dtype=np.intp)
    if a.ndim != 2 or idx.shape != (a.shape[0],):
        raise DimensionError(
            f"take_per_row: tensor {a.shape} with index shape {idx.shape}"
        )
    rows = np.arange(a.shape[0])
    out = CTensor(a.re[rows, idx].copy(), a.im[rows, idx].copy())

    def vjp(gre, gim, acc):
        zre = zim = None
        if gre is not None:
            zre = np.zeros_like(a.re)
            zre[rows, idx] = gre
        if gim is not None:
            zim = np.zeros_like(a.im)
            zim[rows, idx] = gim
        acc(a, zre, zim)

    return _record(out, (a,), vjp)


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------

def crelu(a) -> CTensor:
    """Split ReLU: clamp real and imaginary parts independently at zero."""
    a = _lift(a)
    mre = a.re > 0.0
    mim = a.im > 0.0
    out = CTensor(np.where(mre, a.re, 0.0), np.where(mim, a.im, 0.0))

    def vjp(gre, gim, acc):
        acc(a, None if gre is None else gre * mre,
            None if gim is None else gim * mim)

    return _record(out, (a,), vjp)


def modulus(a) -> CTensor:
    """|z| as a real tensor; gradient is radial (zero exactly at the origin)."""
    a = _lift(a)
    m = np.hypot(a.re, a.im)
    out = CTensor(m)

    def vjp(gre, gim, acc):
        if gre is None:
            return
        safe = np.where(m > 0.0, m, 1.0)
        acc(a, gre * np.where(m > 0.0, a.re / safe, 0.0),
            gre * np.where(m > 0.0, a.im / safe, 0.0))

    return _record(out, (a,), vjp)


def abs2(a) -> CTensor:
    """|z|^2 as a real tensor (no square root, smooth everywhere)."""
    a = _lift(a)
    out = CTensor(a.re * a.re + a.im * a.im)

    def vjp(gre, gim, acc):
        if gre is None:
            return
        acc(a, 2.0 * gre * a.re, 2.0 * gre * a.im)

    return _record(out, (a,), vjp)


# ---------------------------------------------------------------------------
# linear algebra: dense layer and 1-D convolution
# ---------------------------------------------------------------------------

def linear(z, w, b=None) -> CTensor:
    """Complex affine map: out[n,o] = sum_f z[n,f] * w[o,f] (+ b[o])."""
    z, w = _lift(z), _lift(w)
    if z.ndim != 2 or w.ndim != 2 or z.shape[1] != w.shape[1]:
        raise DimensionError(f"linear: input {z.shape} vs weight {w.shape}")
    out_re = z.re @ w.re.T - z.im @ w.im.T
    out_im = z.re @ w.im.T + z.im @ w.re.T
    parents = [z, w]
    if b is not None:
        b = _lift(b)
        if b.shape != (w.shape[0],):
            raise DimensionError(f"linear: bias {b.shape} vs weight {w.shape}")
        out_re = out_re + b.re
        out_im = out_im + b.im
        parents.append(b)
    out = CTensor(out_re, out_im)

    def vjp(gre, gim, acc):
        gre_ = gre if gre is not None else np.zeros_like(out.re)
        gim_ = gim if gim is not None else np.zeros_like(out.im)
        if _tracked(z):
            acc(z, gre_ @ w.re + gim_ @ w.im, gim_ @ w.re - gre_ @ w.im)
        if _tracked(w):
            acc(w, gre_.T @ z.re + gim_.T @ z.im, gim_.T @ z.re - gre_.T @ z.im)
        if b is not None and _tracked(b):
            acc(b, gre_.sum(axis=0), gim_.sum(axis=0))

    return _record(out, tuple(parents), vjp)


def _corr3(x: Array, k: Array, stride: int) -> Array:
    """out[b,o,w] = sum_{c,t} x[b,c,w*stride+t] * k[o,c,t] (plain correlation)."""
    bs, cin, time = x.shape
    cout, cin2, taps = k.shape
    assert cin == cin2
    win = np.lib.stride_tricks.sliding_window_view(x, taps, axis=2)[:, :, ::stride]
    nwin = win.shape[2]
    flat = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(bs * nwin, cin * taps)
    out = flat @ k.reshape(cout, cin * taps).T
    return out.reshape(bs, nwin, cout).transpose(0, 2, 1)


def _corr_k(g: Array, x: Array, taps: int, stride: int) -> Array:
    """dk[o,c,t] = sum_{b,w} g[b,o,w] * x[b,c,w*stride+t]."""
    bs, cout, nwin = g.shape
    cin = x.shape[1]
    win = np.lib.stride_tricks.sliding_window_view(x, taps, axis=2)[:, :, ::stride]
    flat = np.ascontiguousarray(win.transpose(0, 2, 1, 3)).reshape(bs * nwin, cin * taps)
    g2 = np.ascontiguousarray(g.transpose(1, 0, 2)).reshape(cout, bs * nwin)
    return (g2 @ flat).reshape(cout, cin, taps)


def _stuff(g: Array, stride: int) -> Array:
    if stride == 1:
        return g
    bs, cout, nwin = g.shape
    z = np.zeros((bs, cout, (nwin - 1) * stride + 1), dtype=g.dtype)
    z[:, :, ::stride] = g
    return z


def complex_conv1d(x, k, stride: int = 1) -> CTensor:
    """Valid-mode complex convolution of [batch, ch, time] with [out, ch, taps].

    True convolution: the kernel is reversed along its tap axis before the
    sliding dot product, so an impulse at input index ``taps - 1`` reproduces
    the kernel sequence itself on the output.
    """
    x, k = _lift(x), _lift(k)
    if x.ndim != 3 or k.ndim != 3:
        raise DimensionError(f"complex_conv1d: input {x.shape}, kernel {k.shape}")
    if x.shape[1] != k.shape[1]:
        raise DimensionError(
            f"complex_conv1d: {x.shape[1]} input channels vs kernel expecting {k.shape[1]}"
        )
    if not isinstance(stride, (int, np.integer)) or stride < 1:
        raise ParameterError(f"stride must be a positive integer, got {stride}")
    taps = k.shape[2]
    time = x.shape[2]
    if taps > time:
        raise DimensionError(
            f"kernel taps {taps} exceed input time extent {time}"
        )
    kf_re = k.re[:, :, ::-1]
    kf_im = k.im[:, :, ::-1]
    out_re = _corr3(x.re, kf_re, stride) - _corr3(x.im, kf_im, stride)
    out_im = _corr3(x.re, kf_im, stride) + _corr3(x.im, kf_re, stride)
    out = CTensor(out_re, out_im)

    def vjp(gre, gim, acc):
        gre_ = gre if gre is not None else np.zeros_like(out.re)
        gim_ = gim if gim is not None else np.zeros_like(out.im)
        if _tracked(k):
            dkf_re = _corr_k(gre_, x.re, taps, stride) + _corr_k(gim_, x.im, taps, stride)
            dkf_im = _corr_k(gim_, x.re, taps, stride) - _corr_k(gre_, x.im, taps, stride)
            acc(k, dkf_re[:, :, ::-1].copy(), dkf_im[:, :, ::-1].copy())
        if _tracked(x):
            pad = taps - 1
            pgr = np.pad(_stuff(gre_, stride), ((0, 0), (0, 0), (pad, pad)))
            pgi = np.pad(_stuff(gim_, stride), ((0, 0), (0, 0), (pad, pad)))
            kt_re = np.ascontiguousarray(k.re.transpose(1, 0, 2))
            kt_im = np.ascontiguousarray(k.im.transpose(1, 0, 2))
            dx_re = _corr3(pgr, kt_re, 1) + _corr3(pgi, kt_im, 1)
            dx_im = _corr3(pgi, kt_re, 1) - _corr3(pgr, kt_im, 1)
            full = dx_re.shape[2]
            if full < time:
                tail = time - full
                dx_re = np.pad(dx_re, ((0, 0), (0, 0), (0, tail)))
                dx_im = np.pad(dx_im, ((0, 0), (0, 0), (0, tail)))
            acc(x, dx_re, dx_im)

    return _record(out, (x, k), vjp)


def magnitude_maxpool(z, window: int) -> CTensor:
    """Keep the largest-modulus complex element of each window (ties: lowest index).

    Pools the trailing axis of a [batch, ch, time] tensor; a remainder that
    does not fill a window is dropped.
    """
    z = _lift(z)
    if not isinstance(window, (int, np.integer)) or window < 1:
        raise ParameterError(f"window must be a positive integer, got {window}")
    if window == 1:
        return z
    if z.ndim != 3:
        raise DimensionError(f"magnitude_maxpool expects 3-D input, got {z.shape}")
    bs, ch, time = z.shape
    nwin = time // window
    if nwin == 0:
        raise DimensionError(f"window {window} exceeds time extent {time}")
    cut = nwin * window
    re4 = z.re[:, :, :cut].reshape(bs, ch, nwin, window)
    im4 = z.im[:, :, :cut].reshape(bs, ch, nwin, window)
    mag2 = re4 * re4 + im4 * im4
    idx = np.argmax(mag2, axis=3)
    sel = idx[..., None]
    out = CTensor(np.take_along_axis(re4, sel, axis=3)[..., 0],
                  np.take_along_axis(im4, sel, axis=3)[..., 0])

    def vjp(gre, gim, acc):
        def scatter(g):
            if g is None:
                return np.zeros((bs, ch, time))
            buf = np.zeros((bs, ch, nwin, window))
            np.put_along_axis(buf, sel, g[..., None], axis=3)
            buf = buf.reshape(bs, ch, cut)
            if cut < time:
                buf = np.pad(buf, ((0, 0), (0, 0), (0, time - cut)))
            return buf

        acc(z, scatter(gre), scatter(gim))

    return _record(out, (z,), vjp)


# ---------------------------------------------------------------------------
# finite differences (the gradient oracle)
# ---------------------------------------------------------------------------

def finite_difference_grad(f: Callable[[Array], float], p: Array, step: float) -> Array:
    """Central-difference gradient of a scalar function of a flat real vector."""
    if step <= 0:
        raise ParameterError(f"step must be positive, got {step}")
    p = np.asarray(p, dtype=np.float64)
    g = np.zeros_like(p)
    flat = p.reshape(-1)
    gf = g.reshape(-1)
    for j in range(flat.size):
        orig = flat[j]
        flat[j] = orig + step
        hi = f(p)
        flat[j] = orig - step
        lo = f(p)
        flat[j] = orig
        if not (np.isfinite(hi) and np.isfinite(lo)):
            raise NumericError(f"function not finite near coordinate {j}")
        gf[j] = (hi - lo) / (2.0 * step)
    return g


def relative_error(analytic: Array, numeric: Array, floor: float = 1e-6) -> float:
    """Max-norm relative disagreement between two gradient vectors."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), floor)
    return float(np.max(np.abs(analytic - numeric)) / denom)
