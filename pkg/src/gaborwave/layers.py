"""Complex-valued network building blocks.

All blocks keep real/imaginary parts of a complex unit together: dropout
masks, pooling selections, and normalization scales apply to the pair, and
the split ReLU is the one deliberate exception (it clamps the parts
independently).

Normalization uses joint-variance scaling: both parts are divided by the
square root of E|z - mean|^2 over the normalization axis, which preserves
phase. Layer norm runs per sample over features and time; batch norm runs
per feature over the batch and keeps running statistics for eval mode,
updated as running <- momentum * running + (1 - momentum) * batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import autodiff as ad
from . import filterbank as fb
from .autodiff import CTensor, Tape, ctensor
from .errors import ContractError, DimensionError, ParameterError


@dataclass
class Context:
    """Per-forward-call state: the live tape, the mode, and the mask RNG."""

    tape: Tape | None = None
    train: bool = False
    rng: np.random.Generator | None = None

    def bind(self, name: str, re: np.ndarray, im: np.ndarray | None) -> CTensor:
        if self.tape is None:
            return CTensor(re, im)
        return self.tape.parameter(name, re, im)


class FrontEndLayer:
    """Parametric band-pass bank; only the raw cutoff pairs are trainable.

    Kernels are resampled from the raw parameters on every forward pass, so
    gradients flow from the output back into the cutoffs and nothing else in
    this layer ever trains.
    """

    def __init__(self, n_filters: int, taps: int, family: fb.FilterFamily,
                 stride: int = 1, sample_rate: float = 16000.0,
                 init: list[fb.Cutoffs] | None = None, name: str = "front_end"):
        if n_filters < 1:
            raise ParameterError(f"n_filters must be >= 1, got {n_filters}")
        if stride < 1:
            raise ParameterError(f"stride must be >= 1, got {stride}")
        self.n_filters = n_filters
        self.taps = taps
        self.family = fb.FilterFamily(family)
        self.stride = stride
        self.sample_rate = sample_rate
        self.name = name
        bank = init if init is not None else fb.init_cutoffs_mel(n_filters, sample_rate)
        if len(bank) != n_filters:
            raise ParameterError(f"expected {n_filters} cutoff pairs, got {len(bank)}")
        self.raw = fb.cutoffs_to_raw(bank)  # [n, 2], owned storage

    def params(self) -> Iterator[tuple[str, np.ndarray, np.ndarray | None]]:
        yield f"{self.name}.raw", self.raw, None

    def cutoffs(self) -> list[fb.Cutoffs]:
        return fb.resolve_cutoffs(self.raw)

    def kernels(self, ctx: Context) -> CTensor:
        raw = ctx.bind(f"{self.name}.raw", self.raw, None)
        f1, f2 = fb.learnable_cutoffs(raw)
        ker = fb.kernel_for_family(self.family, f1, f2, self.taps)
        return ad.reshape(ker, (self.n_filters, 1, self.taps))

    def forward(self, x: CTensor, ctx: Context) -> CTensor:
        if x.ndim != 3 or x.shape[1] != 1:
            raise DimensionError(f"front end expects [batch, 1, time], got {x.shape}")
        if x.shape[2] < self.taps:
            raise DimensionError(
                f"time extent {x.shape[2]} shorter than kernel taps {self.taps}"
            )
        return ad.complex_conv1d(x, self.kernels(ctx), self.stride)


def front_end_forward(layer: FrontEndLayer, x, ctx: Context | None = None) -> CTensor:
    """Convolve a real waveform batch with the layer's current filter bank."""
    return layer.forward(ad._lift(x), ctx if ctx is not None else Context())


class ComplexConv1d:
    """Standard complex convolution layer with freely trainable kernels."""

    def __init__(self, in_ch: int, out_ch: int, taps: int, stride: int = 1,
                 rng: np.random.Generator | None = None, name: str = "conv"):
        self.in_ch, self.out_ch, self.taps, self.stride = in_ch, out_ch, taps, stride
        self.name = name
        rng = rng or np.random.default_rng(0)
        self.w_re, self.w_im = complex_disk_init(rng, (out_ch, in_ch, taps), in_ch * taps)
        self.b_re = np.zeros(out_ch)
        self.b_im = np.zeros(out_ch)

    def params(self):
        yield f"{self.name}.w", self.w_re, self.w_im
        yield f"{self.name}.b", self.b_re, self.b_im

    def forward(self, x: CTensor, ctx: Context) -> CTensor:
        w = ctx.bind(f"{self.name}.w", self.w_re, self.w_im)
        b = ctx.bind(f"{self.name}.b", self.b_re, self.b_im)
        y = ad.complex_conv1d(x, w, self.stride)
        bias = ad.reshape(b, (1, self.out_ch, 1))
        return ad.add(y, bias)


class ComplexLinear:
    """Complex affine layer [out, in] with bias."""

    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator | None = None, name: str = "dense"):
        self.in_features, self.out_features = in_features, out_features
        self.name = name
        rng = rng or np.random.default_rng(0)
        self.w_re, self.w_im = complex_disk_init(rng, (out_features, in_features), in_features)
        self.b_re = np.zeros(out_features)
        self.b_im = np.zeros(out_features)

    def params(self):
        yield f"{self.name}.w", self.w_re, self.w_im
        yield f"{self.name}.b", self.b_re, self.b_im

    def forward(self, z: CTensor, ctx: Context) -> CTensor:
        w = ctx.bind(f"{self.name}.w", self.w_re, self.w_im)
        b = ctx.bind(f"{self.name}.b", self.b_re, self.b_im)
        return ad.linear(z, w, b)


def complex_disk_init(rng: np.random.Generator, shape: tuple, fan_in: int):
    """Weights uniform on the complex disk of radius 1/sqrt(fan_in), phase-unbiased."""
    radius = np.sqrt(rng.uniform(0.0, 1.0, size=shape)) / np.sqrt(fan_in)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return radius * np.cos(phase), radius * np.sin(phase)


crelu = ad.crelu
magnitude_maxpool = ad.magnitude_maxpool


def complex_layer_norm(z: CTensor, gain: CTensor | float = 1.0,
                       eps: float = 1e-5) -> CTensor:
    """Normalize each sample over all its features/time to joint variance 1.

    gain is a real per-channel scale broadcast over the remaining axes.
    """
    axes = tuple(range(1, z.ndim))
    mean = ad.cmean(z, axis=axes, keepdims=True)
    centered = ad.sub(z, mean)
    var = ad.cmean(ad.abs2(centered), axis=axes, keepdims=True)
    inv = ad.rrecip(ad.rsqrt(ad.add(var, eps)))
    out = ad.cmul(centered, inv)
    if isinstance(gain, CTensor) and z.ndim == 3:
        gain = ad.reshape(gain, (1, gain.shape[0], 1))
    return ad.cmul(out, gain)


@dataclass
class NormStats:
    """Per-feature batch statistics plus their running (eval-time) copies."""

    mean_re: np.ndarray
    mean_im: np.ndarray
    var: np.ndarray
    eps: float = 1e-5
    running_mean_re: np.ndarray = field(default=None)  # type: ignore[assignment]
    running_mean_im: np.ndarray = field(default=None)  # type: ignore[assignment]
    running_var: np.ndarray = field(default=None)  # type: ignore[assignment]

    @classmethod
    def for_features(cls, n: int, eps: float = 1e-5) -> "NormStats":
        return cls(mean_re=np.zeros(n), mean_im=np.zeros(n), var=np.ones(n), eps=eps,
                   running_mean_re=np.zeros(n), running_mean_im=np.zeros(n),
                   running_var=np.ones(n))


def complex_batch_norm(z: CTensor, stats: NormStats, mode: str,
                       momentum: float = 0.9, gain: CTensor | float = 1.0) -> CTensor:
    """Per-feature joint-variance normalization over the batch axis.

    Train mode normalizes by batch statistics and refreshes the running
    copies (detached from the tape); eval mode normalizes by the running
    statistics.
    """
    if z.ndim != 2:
        raise DimensionError(f"batch norm expects [batch, features], got {z.shape}")
    if mode not in ("train", "eval"):
        raise ParameterError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "train":
        if z.shape[0] < 2:
            raise ContractError(
                f"train-mode batch norm needs batch size >= 2, got {z.shape[0]}"
            )
        mean = ad.cmean(z, axis=0, keepdims=True)
        centered = ad.sub(z, mean)
        var = ad.cmean(ad.abs2(centered), axis=0, keepdims=True)
        bm_re = mean.re[0]
        bm_im = mean.im[0]
        bv = var.re[0]
        stats.mean_re, stats.mean_im, stats.var = bm_re.copy(), bm_im.copy(), bv.copy()
        stats.running_mean_re = momentum * stats.running_mean_re + (1 - momentum) * bm_re
        stats.running_mean_im = momentum * stats.running_mean_im + (1 - momentum) * bm_im
        stats.running_var = momentum * stats.running_var + (1 - momentum) * bv
    else:
        mean = CTensor(stats.running_mean_re[None, :], stats.running_mean_im[None, :])
        centered = ad.sub(z, mean)
        var = CTensor(stats.running_var[None, :])
    inv = ad.rrecip(ad.rsqrt(ad.add(var, stats.eps)))
    return ad.cmul(ad.cmul(centered, inv), gain)


def dropout(z: CTensor, p: float, mode: str,
            rng: np.random.Generator | None = None) -> CTensor:
    """Zero whole complex units with probability p; scale survivors by 1/(1-p)."""
    if not (0.0 <= p < 1.0):
        raise ParameterError(f"dropout probability must be in [0, 1), got {p}")
    if mode not in ("train", "eval"):
        raise ParameterError(f"mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or p == 0.0:
        return z
    if rng is None:
        raise ParameterError("train-mode dropout needs a random generator")
    keep = rng.random(z.shape) >= p
    mask = keep.astype(np.float64) / (1.0 - p)
    return ad.cmul(z, ctensor(mask))


def _log_softmax_modulus(z: CTensor) -> CTensor:
    """log softmax of per-class |logit| for a [batch, classes] complex tensor."""
    if z.ndim != 2:
        raise DimensionError(f"output head expects [batch, classes], got {z.shape}")
    mag = ad.modulus(z)
    shift = np.max(mag.re, axis=1, keepdims=True)  # constant; softmax is shift-invariant
    shifted = ad.sub(mag, ctensor(shift))
    lse = ad.rlog(ad.csum(ad.rexp(shifted), axis=1, keepdims=True))
    return ad.sub(shifted, lse)


def output_head(z: CTensor) -> CTensor:
    """Class probabilities: softmax over the moduli of the complex logits."""
    return ad.rexp(_log_softmax_modulus(z))


def cross_entropy(z: CTensor, labels: np.ndarray) -> CTensor:
    """Mean negative log-likelihood of integer labels under the output head."""
    logp = _log_softmax_modulus(z)
    picked = ad.take_per_row(logp, labels)
    return ad.neg(ad.cmean(picked))
