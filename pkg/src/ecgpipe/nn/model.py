"""
Architectures, parameter layout and the forward/backward passes.

All variants share a convolutional front end of three blocks
(conv -> ReLU -> max-pool) with kernel sizes 8, 5 and 3. The recurrent
variants read the conv output as a time sequence and feed their final
hidden state to a dense softmax head; the pure CNNs average-pool over time
(or over the image plane for ``cnn2d``). Optional auxiliary features
(the QRS rhythm summary) are appended right before the head.
"""

from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from ..errors import DomainError
from ..records import N_CLASSES, N_LEADS
from .layers import (GRU, LSTM, Conv1D, Conv2D, Dense, GlobalAvgPool, MaxPool1D,
                     MaxPool2D, ReLU, ToSequence, softmax, softmax_cross_entropy)

KINDS = ("cnn1d", "cnn1d_gru", "gru", "gru_lstm", "lstm", "cnn2d")
KERNEL_SIZES = (8, 5, 3)

_DEFAULT_FILTERS = {"cnn1d": 64, "cnn1d_gru": 64, "gru": 64, "gru_lstm": 128,
                    "lstm": 128, "cnn2d": 64}
_DEFAULT_RECURRENT = {
    "cnn1d": (),
    "cnn1d_gru": (("gru", 128),),
    "gru": (("gru", 64), ("gru", 128)),
    "gru_lstm": (("gru", 128), ("gru", 128), ("lstm", 128), ("lstm", 128)),
    "lstm": (("lstm", 128), ("lstm", 256), ("lstm", 256)),
    "cnn2d": (),
}


@dataclass(frozen=True)
class ArchSpec:
    """Network description. ``filters`` and ``recurrent`` default per ``kind``;
    override them for small test networks."""

    kind: str
    filters: Optional[int] = None
    recurrent: Optional[tuple] = None
    in_channels: int = N_LEADS
    n_aux: int = 0
    kernel_sizes: tuple = KERNEL_SIZES
    n_classes: int = N_CLASSES

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown architecture {self.kind!r}; choose from {KINDS}")
        if tuple(self.kernel_sizes) != KERNEL_SIZES:
            raise DomainError(f"kernel sizes must be {KERNEL_SIZES}")
        if self.n_classes != N_CLASSES:
            raise DomainError(f"output dimension must be {N_CLASSES}")
        if self.filters is None:
            object.__setattr__(self, "filters", _DEFAULT_FILTERS[self.kind])
        rec = _DEFAULT_RECURRENT[self.kind] if self.recurrent is None else self.recurrent
        rec = tuple((str(k), int(u)) for k, u in rec)
        if self.kind in ("cnn1d", "cnn2d") and rec:
            raise DomainError(f"{self.kind} takes no recurrent layers")
        if self.kind not in ("cnn1d", "cnn2d") and not rec:
            raise DomainError(f"{self.kind} needs at least one recurrent layer")
        for k, u in rec:
            if k not in ("gru", "lstm") or u < 1:
                raise DomainError(f"bad recurrent layer {(k, u)!r}")
        object.__setattr__(self, "recurrent", rec)
        object.__setattr__(self, "kernel_sizes", tuple(self.kernel_sizes))
        if self.kind == "cnn2d" and self.in_channels == N_LEADS:
            object.__setattr__(self, "in_channels", 1)

    @property
    def is_image(self):
        return self.kind == "cnn2d"

    def to_dict(self):
        d = asdict(self)
        d["recurrent"] = [list(r) for r in self.recurrent]
        d["kernel_sizes"] = list(self.kernel_sizes)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["recurrent"] = tuple(tuple(r) for r in d.get("recurrent") or ())
        d["kernel_sizes"] = tuple(d.get("kernel_sizes", KERNEL_SIZES))
        return cls(**d)


class Network:
    """Layer list split into a feature trunk and the dense head."""

    def __init__(self, arch):
        self.arch = arch
        trunk = []
        ch = arch.in_channels
        conv, pool = (Conv2D, MaxPool2D) if arch.is_image else (Conv1D, MaxPool1D)
        for k in arch.kernel_sizes:
            trunk += [conv(ch, arch.filters, k), ReLU(), pool()]
            ch = arch.filters
        if arch.recurrent:
            trunk.append(ToSequence())
            for i, (kind, units) in enumerate(arch.recurrent):
                last = i == len(arch.recurrent) - 1
                cell = GRU if kind == "gru" else LSTM
                trunk.append(cell(ch, units, return_sequences=not last))
                ch = units
        else:
            trunk.append(GlobalAvgPool())
        self.trunk = trunk
        self.head = Dense(ch + arch.n_aux, arch.n_classes)
        self.layers = trunk + [self.head]

        self.layout = []  # (layer index, param name, offset, shape)
        offset = 0
        for li, layer in enumerate(self.layers):
            for name, shape in layer.param_shapes().items():
                self.layout.append((li, name, offset, tuple(shape)))
                offset += int(np.prod(shape))
        self.n_params = offset

    def views(self, flat):
        """Per-layer dicts of reshaped views into ``flat``."""
        out = [dict() for _ in self.layers]
        for li, name, off, shape in self.layout:
            out[li][name] = flat[off:off + int(np.prod(shape))].reshape(shape)
        return out

    def named_views(self, flat):
        views = self.views(flat)
        return {f"{li}.{type(self.layers[li]).__name__}.{name}": views[li][name]
                for li, name, _, _ in self.layout}

    def check_input(self, x, aux):
        arch = self.arch
        want = 4 if arch.is_image else 3
        if x.ndim != want or x.shape[1] != arch.in_channels:
            raise DomainError(
                f"{arch.kind} expects input of shape (batch, {arch.in_channels}, ...) "
                f"with {want} dims, got {x.shape}")
        min_len = 2 ** len(arch.kernel_sizes)
        if any(s < min_len for s in x.shape[2:]):
            raise DomainError(f"spatial size {x.shape[2:]} below {min_len}")
        if arch.n_aux:
            if aux is None or aux.shape != (x.shape[0], arch.n_aux):
                raise DomainError(
                    f"expected auxiliary features of shape ({x.shape[0]}, {arch.n_aux}), "
                    f"got {None if aux is None else aux.shape}")
        elif aux is not None and aux.size:
            raise DomainError("architecture built without auxiliary features")

    def logits(self, flat, x, aux=None, keep_caches=False):
        x = np.asarray(x, dtype=np.float64)
        aux = None if aux is None else np.asarray(aux, dtype=np.float64)
        self.check_input(x, aux)
        params = self.views(flat)
        caches = []
        h = x
        for layer, p in zip(self.trunk, params):
            h, cache = layer.forward(p, h)
            caches.append(cache)
        if aux is not None and self.arch.n_aux:
            h = np.concatenate([h, aux], axis=1)
        out, cache = self.head.forward(params[-1], h)
        caches.append(cache)
        return (out, caches) if keep_caches else out

    def backward(self, flat, caches, dlogits):
        params = self.views(flat)
        grad = np.zeros(self.n_params)
        gviews = self.views(grad)
        dh, g = self.head.backward(params[-1], caches[-1], dlogits)
        for k, v in g.items():
            gviews[-1][k][...] = v
        dh = dh[:, :dh.shape[1] - self.arch.n_aux]
        for li in reversed(range(len(self.trunk))):
            dh, g = self.trunk[li].backward(params[li], caches[li], dh)
            for k, v in g.items():
                gviews[li][k][...] = v
        return grad


_NETWORKS = {}


def network(arch):
    net = _NETWORKS.get(arch)
    if net is None:
        net = _NETWORKS[arch] = Network(arch)
    return net


@dataclass
class ModelState:
    arch: ArchSpec
    params: np.ndarray
    seed: int = 0
    adam_m: Optional[np.ndarray] = None
    adam_v: Optional[np.ndarray] = None
    adam_t: int = 0
    epoch: int = 0
    best_val_loss: float = float("inf")
    lr: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def net(self):
        return network(self.arch)

    @property
    def n_params(self):
        return self.params.size

    def copy(self):
        return ModelState(
            self.arch, self.params.copy(), self.seed,
            None if self.adam_m is None else self.adam_m.copy(),
            None if self.adam_v is None else self.adam_v.copy(),
            self.adam_t, self.epoch, self.best_val_loss, self.lr, dict(self.meta))


def build(arch, seed=0):
    """Fresh model: Glorot-uniform weights, zero biases, seeded by ``seed``."""
    net = network(arch)
    flat = np.zeros(net.n_params)
    rng = np.random.Generator(np.random.PCG64(int(seed) & (2**64 - 1)))
    for layer, p in zip(net.layers, net.views(flat)):
        if p:
            layer.init_params(p, rng)
    return ModelState(arch=arch, params=flat, seed=int(seed),
                      adam_m=np.zeros_like(flat), adam_v=np.zeros_like(flat))


def forward(state, x, aux=None):
    """Class probabilities, one softmax row per example."""
    return softmax(state.net.logits(state.params, x, aux))


def loss_and_grad(state, x, onehot, aux=None, params=None):
    """Mean cross-entropy, its gradient w.r.t. the flat parameters, and the probabilities."""
    net = state.net
    flat = state.params if params is None else params
    onehot = np.asarray(onehot, dtype=np.float64)
    logits, caches = net.logits(flat, x, aux, keep_caches=True)
    if onehot.shape != logits.shape:
        raise DomainError(f"labels of shape {onehot.shape} do not match {logits.shape}")
    loss, dlogits, probs = softmax_cross_entropy(logits, onehot)
    return loss, net.backward(flat, caches, dlogits), probs


def backward(state, x, onehot, aux=None):
    return loss_and_grad(state, x, onehot, aux)[1]


def loss(state, x, onehot, aux=None, params=None):
    flat = state.params if params is None else params
    logits = state.net.logits(flat, x, aux)
    return softmax_cross_entropy(logits, np.asarray(onehot, dtype=np.float64))[0]


def param_count(arch):
    return network(arch).n_params
