"""Network assembly from a declarative layer graph.

The stack is: parametric front end (complex conv over the raw waveform),
then zero or more complex conv blocks, then a complex dense classifier.
Each conv stage optionally applies layer norm, split ReLU, and magnitude
max-pooling; dense hidden layers optionally apply batch norm, split ReLU,
and dropout. The final dense layer emits complex class logits consumed by
the modulus/softmax head.

Stride and pool-window values are configuration with defaults chosen so the
large reference stack (128/60/60/60 filters, kernels 129/5/5/3, then a
5 x 1024 complex MLP) keeps a positive time extent on a 3200-sample input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import filterbank as fb
from . import layers as ly
from .autodiff import CTensor, Tape, ctensor
from .errors import BuildError, ParameterError


@dataclass(frozen=True)
class FrontEndSpec:
    n_filters: int = 128
    taps: int = 129
    stride: int = 1
    pool: int = 4
    norm: bool = True


@dataclass(frozen=True)
class ConvBlockSpec:
    filters: int
    kernel: int
    pool: int = 4
    norm: bool = True


@dataclass(frozen=True)
class LayerGraph:
    """Ordered description of the network, independent of the filter family."""

    front_end: FrontEndSpec = field(default_factory=FrontEndSpec)
    conv_blocks: tuple[ConvBlockSpec, ...] = (
        ConvBlockSpec(60, 5), ConvBlockSpec(60, 5), ConvBlockSpec(60, 3))
    dense_widths: tuple[int, ...] = (1024, 1024, 1024, 1024, 1024)
    n_classes: int = 10
    input_samples: int = 3200
    sample_rate: float = 16000.0
    dense_norm: bool = True
    bn_momentum: float = 0.7

    def __post_init__(self):
        if self.n_classes < 2:
            raise ParameterError(f"need at least 2 classes, got {self.n_classes}")

    def stage_extents(self) -> list[tuple[str, int, int]]:
        """(stage name, channels, time extent) after every conv stage.

        Raises BuildError naming the first stage whose extent collapses.
        """
        stages = []
        time = self.input_samples
        ch = 1

        def conv_out(name, t, kernel, stride, pool):
            if kernel > t:
                raise BuildError(
                    f"{name}: kernel {kernel} exceeds incoming time extent {t}"
                )
            t = (t - kernel) // stride + 1
            t //= pool
            if t < 1:
                raise BuildError(f"{name}: pooled time extent collapsed to {t}")
            return t

        fe = self.front_end
        time = conv_out("front_end", time, fe.taps, fe.stride, fe.pool)
        ch = fe.n_filters
        stages.append(("front_end", ch, time))
        for i, blk in enumerate(self.conv_blocks):
            time = conv_out(f"conv_block_{i}", time, blk.kernel, 1, blk.pool)
            ch = blk.filters
            stages.append((f"conv_block_{i}", ch, time))
        return stages

    def flat_features(self) -> int:
        _, ch, time = self.stage_extents()[-1]
        return ch * time


class Model:
    """A runnable network: layers, their parameter storage, and the forward pass."""

    def __init__(self, graph: LayerGraph, family: fb.FilterFamily, seed: int = 0):
        self.graph = graph
        self.family = fb.FilterFamily(family)
        self.seed = seed
        stages = graph.stage_extents()  # validates shapes up front
        rng = np.random.default_rng(seed)

        fe = graph.front_end
        self.front = ly.FrontEndLayer(fe.n_filters, fe.taps, self.family,
                                      fe.stride, graph.sample_rate)
        self.front_gain = np.ones(fe.n_filters) if fe.norm else None
        self.convs: list[ly.ComplexConv1d] = []
        self.conv_gains: list[np.ndarray | None] = []
        in_ch = fe.n_filters
        for i, blk in enumerate(graph.conv_blocks):
            self.convs.append(ly.ComplexConv1d(in_ch, blk.filters, blk.kernel,
                                               rng=rng, name=f"conv{i}"))
            self.conv_gains.append(np.ones(blk.filters) if blk.norm else None)
            in_ch = blk.filters

        self.denses: list[ly.ComplexLinear] = []
        self.bn_stats: list[ly.NormStats | None] = []
        self.bn_gains: list[np.ndarray | None] = []
        width_in = graph.flat_features()
        for i, width in enumerate(graph.dense_widths):
            self.denses.append(ly.ComplexLinear(width_in, width, rng=rng,
                                                name=f"dense{i}"))
            self.bn_stats.append(ly.NormStats.for_features(width)
                                 if graph.dense_norm else None)
            self.bn_gains.append(np.ones(width) if graph.dense_norm else None)
            width_in = width
        self.head = ly.ComplexLinear(width_in, graph.n_classes, rng=rng, name="head")
        self._stages = stages

    # -- parameters ---------------------------------------------------------

    def named_params(self) -> list[tuple[str, np.ndarray, np.ndarray | None]]:
        out = list(self.front.params())
        if self.front_gain is not None:
            out.append(("front_end.gain", self.front_gain, None))
        for conv, gain in zip(self.convs, self.conv_gains):
            out.extend(conv.params())
            if gain is not None:
                out.append((f"{conv.name}.gain", gain, None))
        for dense, gain in zip(self.denses, self.bn_gains):
            out.extend(dense.params())
            if gain is not None:
                out.append((f"{dense.name}.gain", gain, None))
        out.extend(self.head.params())
        return out

    def param_vector(self) -> np.ndarray:
        chunks = []
        for _, re, im in self.named_params():
            chunks.append(re.ravel().copy())
            if im is not None:
                chunks.append(im.ravel().copy())
        return np.concatenate(chunks)

    def set_param_vector(self, vec: np.ndarray):
        off = 0
        for _, re, im in self.named_params():
            re.flat[:] = vec[off:off + re.size]
            off += re.size
            if im is not None:
                im.flat[:] = vec[off:off + im.size]
                off += im.size
        if off != vec.size:
            raise ParameterError(f"vector length {vec.size} != parameter count {off}")

    # -- forward ------------------------------------------------------------

    def forward(self, x: np.ndarray, ctx: ly.Context | None = None,
                dropout_p: float = 0.0) -> CTensor:
        """Complex class logits for a real waveform batch [batch, 1, time]."""
        ctx = ctx or ly.Context()
        mode = "train" if ctx.train else "eval"
        h = self.front.forward(ctensor(np.asarray(x, dtype=np.float64)), ctx)
        if self.front_gain is not None:
            gain = ctx.bind("front_end.gain", self.front_gain, None)
            h = ly.complex_layer_norm(h, gain)
        h = ly.crelu(h)
        h = ly.magnitude_maxpool(h, self.graph.front_end.pool)
        for conv, gain_arr, blk in zip(self.convs, self.conv_gains, self.graph.conv_blocks):
            h = conv.forward(h, ctx)
            if gain_arr is not None:
                gain = ctx.bind(f"{conv.name}.gain", gain_arr, None)
                h = ly.complex_layer_norm(h, gain)
            h = ly.crelu(h)
            h = ly.magnitude_maxpool(h, blk.pool)
        h = ad.reshape(h, (h.shape[0], h.shape[1] * h.shape[2]))
        for dense, stats, gain_arr in zip(self.denses, self.bn_stats, self.bn_gains):
            h = dense.forward(h, ctx)
            if stats is not None:
                gain = ctx.bind(f"{dense.name}.gain", gain_arr, None)
                h = ly.complex_batch_norm(h, stats, mode,
                                          momentum=self.graph.bn_momentum, gain=gain)
            h = ly.crelu(h)
            if dropout_p > 0.0:
                h = ly.dropout(h, dropout_p, mode, ctx.rng)
        return self.head.forward(h, ctx)

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return ly.output_head(self.forward(x)).re

    def loss(self, x: np.ndarray, labels: np.ndarray,
             ctx: ly.Context | None = None, dropout_p: float = 0.0) -> CTensor:
        return ly.cross_entropy(self.forward(x, ctx, dropout_p), labels)


def build_model(graph: LayerGraph, family: fb.FilterFamily | str,
                seed: int = 0) -> Model:
    """Validate the graph and materialize a model with seeded initialization."""
    return Model(graph, fb.FilterFamily(family), seed=seed)
