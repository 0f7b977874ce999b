"""Compact CNN architecture strings: parsing, validation, shape inference.

An architecture is a ``-``-separated token string, e.g.
``1x28x28-32C5P0-MP2S2-32C5P0-MP2S2-H32-D0.5-H10``:

    CxHxW        input: channels x height x width
    <n>C<k>P<p>  convolution: n filters of size k x k, p zero-padding, stride 1
    MP<k>S<s>    max-pooling: k x k window, stride s
    H<n>         fully connected layer with n units
    D<p>         dropout with drop probability p, 0 <= p < 1

A softmax classifier over the final fully connected layer is implicit.
Convolutions are always followed by a ReLU; the first fully connected layer
(the "knob", whose width sets the hash-code length) and the final fully
connected layer (the classifier) carry no nonlinearity.

The grammar is case-sensitive and whitespace-free.  Dropout probabilities
use ``.`` as the decimal separator.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Union


class ArchError(ValueError):
    """Malformed or structurally invalid architecture description."""


@dataclass(frozen=True)
class Conv:
    """Convolution with `filters` kernels of size `kernel`, stride fixed at 1."""

    filters: int
    kernel: int
    padding: int
    relu: bool = True


@dataclass(frozen=True)
class MaxPool:
    window: int
    stride: int


@dataclass(frozen=True)
class FullyConnected:
    units: int
    relu: bool = False


@dataclass(frozen=True)
class Dropout:
    p: float


LayerSpec = Union[Conv, MaxPool, FullyConnected, Dropout]


@dataclass(frozen=True)
class ArchSpec:
    """Validated network description: input shape plus an ordered layer list."""

    input_shape: tuple[int, int, int]
    layers: tuple[LayerSpec, ...]

    @property
    def knob_index(self) -> int:
        """Index of the first fully connected layer (the code-length knob)."""
        for i, layer in enumerate(self.layers):
            if isinstance(layer, FullyConnected):
                return i
        raise ArchError("architecture has no fully connected layer")

    @property
    def classifier_index(self) -> int:
        for i in range(len(self.layers) - 1, -1, -1):
            if isinstance(self.layers[i], FullyConnected):
                return i
        raise ArchError("architecture has no fully connected layer")

    @property
    def knob_width(self) -> int:
        layer = self.layers[self.knob_index]
        assert isinstance(layer, FullyConnected)
        return layer.units

    def __str__(self) -> str:
        return format_arch(self)


class LayerInfo(NamedTuple):
    """Per-layer result of shape inference."""

    index: int
    out_shape: tuple[int, ...]
    params: int


_INPUT_RE = re.compile(r"^(\d+)x(\d+)x(\d+)$")
_CONV_RE = re.compile(r"^(\d+)C(\d+)P(\d+)$")
_POOL_RE = re.compile(r"^MP(\d+)S(\d+)$")
_FC_RE = re.compile(r"^H(\d+)$")
_DROP_RE = re.compile(r"^D(\d+(?:\.\d+)?)$")


def _token_error(index: int, token: str, why: str) -> ArchError:
    return ArchError(f"token {index} ({token!r}): {why}")


def parse_arch(spec: str) -> ArchSpec:
    """Parse an architecture string into a validated :class:`ArchSpec`.

    Raises :class:`ArchError` (with the offending token index and text) on
    malformed tokens, a missing input token, a trailing dropout layer, a
    missing classifier, non-positive dimensions, or any layer whose output
    shape would be invalid.
    """
    if not spec:
        raise ArchError("empty architecture string")
    tokens = spec.split("-")

    m = _INPUT_RE.match(tokens[0])
    if m is None:
        raise _token_error(0, tokens[0], "expected input token CxHxW")
    input_shape = tuple(int(g) for g in m.groups())
    if min(input_shape) < 1:
        raise _token_error(0, tokens[0], "non-positive input dimension")

    layers: list[LayerSpec] = []
    for i, tok in enumerate(tokens[1:], start=1):
        if m := _CONV_RE.match(tok):
            filters, kernel, padding = (int(g) for g in m.groups())
            if filters < 1 or kernel < 1:
                raise _token_error(i, tok, "non-positive filter count or kernel size")
            layers.append(Conv(filters, kernel, padding))
        elif m := _POOL_RE.match(tok):
            window, stride = int(m.group(1)), int(m.group(2))
            if window < 1 or stride < 1:
                raise _token_error(i, tok, "non-positive pooling window or stride")
            layers.append(MaxPool(window, stride))
        elif m := _FC_RE.match(tok):
            units = int(m.group(1))
            if units < 1:
                raise _token_error(i, tok, "non-positive unit count")
            layers.append(FullyConnected(units))
        elif m := _DROP_RE.match(tok):
            p = float(m.group(1))
            if not 0.0 <= p < 1.0:
                raise _token_error(i, tok, "drop probability must lie in [0, 1)")
            layers.append(Dropout(p))
        else:
            raise _token_error(i, tok, "unrecognized layer token")

    if not layers:
        raise ArchError("architecture has no layers after the input token")
    if isinstance(layers[-1], Dropout):
        raise _token_error(len(tokens) - 1, tokens[-1], "dangling dropout with no following layer")
    last_real = next(l for l in reversed(layers) if not isinstance(l, Dropout))
    if not isinstance(last_real, FullyConnected):
        raise ArchError("the last non-dropout layer must be fully connected (the classifier)")

    # The knob (first FC) and the classifier (last FC) carry no nonlinearity;
    # any fully connected layer in between is a conventional ReLU hidden layer.
    fc_positions = [i for i, l in enumerate(layers) if isinstance(l, FullyConnected)]
    for pos in fc_positions[1:-1]:
        layer = layers[pos]
        assert isinstance(layer, FullyConnected)
        layers[pos] = FullyConnected(layer.units, relu=True)

    arch = ArchSpec(input_shape, tuple(layers))
    infer_shapes(arch)  # shape validation; raises ArchError on bad geometry
    return arch


def infer_shapes(spec: ArchSpec) -> list[LayerInfo]:
    """Per-layer output shapes and parameter counts.

    Convolution output side is ``in + 2p - k + 1``; max-pooling output side
    is ``floor((in - k) / s) + 1`` (windows that would overflow the input are
    dropped); fully connected layers flatten their input; dropout preserves
    shape.  A convolution holds ``k*k*c_in*c_out + c_out`` parameters, a
    fully connected layer ``in*units + units``, pooling and dropout none.
    """
    shape: tuple[int, ...] = spec.input_shape
    infos: list[LayerInfo] = []
    for i, layer in enumerate(spec.layers):
        if isinstance(layer, Conv):
            if len(shape) != 3:
                raise ArchError(f"layer {i}: convolution after flattening")
            c, h, w = shape
            oh = h + 2 * layer.padding - layer.kernel + 1
            ow = w + 2 * layer.padding - layer.kernel + 1
            if oh < 1 or ow < 1:
                raise ArchError(f"layer {i}: convolution output side {min(oh, ow)} < 1")
            params = layer.kernel * layer.kernel * c * layer.filters + layer.filters
            shape = (layer.filters, oh, ow)
        elif isinstance(layer, MaxPool):
            if len(shape) != 3:
                raise ArchError(f"layer {i}: pooling after flattening")
            c, h, w = shape
            if layer.window > h or layer.window > w:
                raise ArchError(f"layer {i}: pooling window exceeds input side")
            oh = (h - layer.window) // layer.stride + 1
            ow = (w - layer.window) // layer.stride + 1
            params = 0
            shape = (c, oh, ow)
        elif isinstance(layer, FullyConnected):
            in_dim = math.prod(shape)
            params = in_dim * layer.units + layer.units
            shape = (layer.units,)
        else:  # Dropout
            params = 0
        infos.append(LayerInfo(i, shape, params))
    return infos


def parameter_count(spec: ArchSpec) -> int:
    """Total learnable parameter count of the network."""
    return sum(info.params for info in infer_shapes(spec))


def _format_drop(p: float) -> str:
    return f"D{p:g}"


def format_arch(spec: ArchSpec) -> str:
    """Canonical string form; ``parse_arch(format_arch(s))`` equals ``s``."""
    c, h, w = spec.input_shape
    tokens = [f"{c}x{h}x{w}"]
    for layer in spec.layers:
        if isinstance(layer, Conv):
            tokens.append(f"{layer.filters}C{layer.kernel}P{layer.padding}")
        elif isinstance(layer, MaxPool):
            tokens.append(f"MP{layer.window}S{layer.stride}")
        elif isinstance(layer, FullyConnected):
            tokens.append(f"H{layer.units}")
        else:
            tokens.append(_format_drop(layer.p))
    return "-".join(tokens)


def canonical(spec: str) -> str:
    """Canonicalize an architecture string (e.g. trims ``D0.50`` to ``D0.5``)."""
    return format_arch(parse_arch(spec))
