"""Generator, discriminator and polisher built from :mod:`loadsr.layers`.

Every network is a :class:`NetworkParams` (trainable tensors plus batch-norm
running statistics, keyed by layer path) together with the config that
produced it.  Forward functions are plain functions of inputs and params.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from .autodiff import Tensor, add, concat
from .layers import (RunningStats, batch_norm, conv1d, conv1d_transpose, fully_connected,
                     leaky_relu, relu, residual_block, sigmoid)

INIT_STD = 0.02
DEFAULT_STRIDES = {3: (3, 1), 6: (2, 3), 12: (3, 4)}
MAX_STAGE_STRIDE = 4


def strides_for_alpha(alpha: int) -> tuple[int, int]:
    """Split a scale-up factor into two transpose-conv strides, each <= 4."""
    if alpha in DEFAULT_STRIDES:
        return DEFAULT_STRIDES[alpha]
    pairs = [(a, alpha // a) for a in range(1, alpha + 1) if alpha % a == 0]
    pairs = [(a, b) for a, b in pairs if a <= MAX_STAGE_STRIDE and b <= MAX_STAGE_STRIDE]
    if alpha < 2 or not pairs:
        raise ValueError(f"scale-up factor {alpha} cannot be split into two strides <= "
                         f"{MAX_STAGE_STRIDE}")
    a, b = min(pairs, key=lambda p: (abs(p[0] - p[1]), p[1] == 1, p[0] > p[1]))
    return (b, a) if a == 1 else (a, b)


@dataclass(frozen=True)
class GeneratorConfig:
    weather_channels: int = 0
    n_features: int = 64
    n_res_blocks: int = 4
    k_outer: int = 9
    k_inner: int = 3
    strides: tuple[int, int] = (2, 3)

    def __post_init__(self):
        if self.k_outer % 2 == 0 or self.k_inner % 2 == 0:
            raise ValueError("generator kernels must be odd")
        if any(s < 1 for s in self.strides) or len(self.strides) != 2:
            raise ValueError(f"need two positive strides, got {self.strides}")

    @property
    def alpha(self) -> int:
        return self.strides[0] * self.strides[1]

    @property
    def in_channels(self) -> int:
        return 1 + self.weather_channels

    @property
    def stages(self) -> tuple[int, ...]:
        """Active upsampling strides; a stride-1 stage is omitted."""
        return tuple(s for s in self.strides if s > 1)

    @classmethod
    def for_alpha(cls, alpha: int, **kw) -> "GeneratorConfig":
        return cls(strides=strides_for_alpha(alpha), **kw)


@dataclass(frozen=True)
class DiscriminatorConfig:
    length: int = 288
    features: tuple[int, ...] = (4, 8, 16, 32)
    kernel: int = 3
    stride: int = 2
    slope: float = 0.2

    def __post_init__(self):
        if len(self.features) != 4 or list(self.features) != sorted(self.features):
            raise ValueError(f"discriminator needs four increasing feature counts, got {self.features}")
        if self.stride < 2:
            raise ValueError("discriminator convs must compress (stride >= 2)")

    def conv_lengths(self) -> list[int]:
        pad = self.kernel // 2
        lengths, n = [], self.length
        for _ in self.features:
            n = (n + 2 * pad - self.kernel) // self.stride + 1
            lengths.append(n)
        return lengths


@dataclass(frozen=True)
class PolisherConfig:
    n_features: int = 32
    n_res_blocks: int = 2
    k_outer: int = 9
    k_inner: int = 3


def fingerprint(config) -> str:
    blob = json.dumps({"kind": type(config).__name__, **asdict(config)}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class NetworkParams:
    config: object
    params: dict[str, Tensor] = field(default_factory=dict)
    stats: dict[str, RunningStats] = field(default_factory=dict)

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.config)

    def count(self) -> int:
        return sum(p.data.size for p in self.params.values())

    def set_trainable(self, flag: bool) -> None:
        for p in self.params.values():
            p.requires_grad = flag

    def grads(self) -> dict[str, np.ndarray]:
        return {k: p.grad for k, p in self.params.items() if p.grad is not None}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def arrays(self) -> dict[str, np.ndarray]:
        """Flat name -> array view of params and running stats."""
        out = {k: p.data for k, p in self.params.items()}
        for k, s in self.stats.items():
            out[f"{k}.running_mean"] = s.mean
            out[f"{k}.running_var"] = s.var
        return out

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            self.config,
            {k: Tensor(p.data.copy(), p.requires_grad, k) for k, p in self.params.items()},
            {k: RunningStats(s.mean.copy(), s.var.copy()) for k, s in self.stats.items()})


# -- parameter layout ----------------------------------------------------------

def _conv(shapes, name, cout, cin, k):
    shapes[f"{name}.weight"] = ("w", (cout, cin, k))
    shapes[f"{name}.bias"] = ("b", (cout,))


def _bn(shapes, name, c):
    shapes[f"{name}.gamma"] = ("g", (c,))
    shapes[f"{name}.beta"] = ("b", (c,))


def _trunk_layout(shapes, cin, n, blocks, k_outer, k_inner):
    _conv(shapes, "conv_in", n, cin, k_outer)
    _bn(shapes, "bn_in", n)
    for i in range(blocks):
        for j in (1, 2):
            _conv(shapes, f"res{i}.conv{j}", n, n, k_inner)
            _bn(shapes, f"res{i}.bn{j}", n)
    _conv(shapes, "conv_mid", n, n, k_inner)
    _bn(shapes, "bn_mid", n)


def layout(config) -> dict[str, tuple[str, tuple[int, ...]]]:
    """Parameter name -> (init kind, shape) for a network config."""
    shapes: dict[str, tuple[str, tuple[int, ...]]] = {}
    if isinstance(config, GeneratorConfig):
        n = config.n_features
        _trunk_layout(shapes, config.in_channels, n, config.n_res_blocks,
                      config.k_outer, config.k_inner)
        for i, s in enumerate(config.stages):
            shapes[f"up{i}.weight"] = ("w", (n, n, s))
            shapes[f"up{i}.bias"] = ("b", (n,))
            _bn(shapes, f"bn_up{i}", n)
        _conv(shapes, "conv_out", 1, n, config.k_outer)
    elif isinstance(config, PolisherConfig):
        n = config.n_features
        _trunk_layout(shapes, 1, n, config.n_res_blocks, config.k_outer, config.k_inner)
        _conv(shapes, "conv_out", 1, n, config.k_outer)
    elif isinstance(config, DiscriminatorConfig):
        cin = 1
        for i, c in enumerate(config.features):
            _conv(shapes, f"conv{i}", c, cin, config.kernel)
            cin = c
        shapes["fc.weight"] = ("w", (1, cin * config.conv_lengths()[-1]))
        shapes["fc.bias"] = ("b", (1,))
    else:
        raise TypeError(f"unknown network config {config!r}")
    return shapes


def init_params(config, rng: np.random.Generator) -> NetworkParams:
    """Normal(0, 0.02) weights, zero biases, unit BN scales."""
    params, stats = {}, {}
    for name, (kind, shape) in layout(config).items():
        if kind == "w":
            data = rng.normal(0.0, INIT_STD, shape)
        elif kind == "g":
            data = np.ones(shape)
            stats[name.rsplit(".", 1)[0]] = RunningStats.fresh(shape[0])
        else:
            data = np.zeros(shape)
        params[name] = Tensor(data, requires_grad=True, name=name)
    return NetworkParams(config, params, stats)


# -- forward passes ------------------------------------------------------------

def _trunk(x: Tensor, net: NetworkParams, training: bool) -> Tensor:
    p, st, cfg = net.params, net.stats, net.config
    h = conv1d(x, p["conv_in.weight"], p["conv_in.bias"], 1, cfg.k_outer // 2)
    h = relu(batch_norm(h, p["bn_in.gamma"], p["bn_in.beta"], st["bn_in"], training))
    skip = h
    for i in range(cfg.n_res_blocks):
        h = residual_block(h, p, st, training, prefix=f"res{i}.")
    h = conv1d(h, p["conv_mid.weight"], p["conv_mid.bias"], 1, cfg.k_inner // 2)
    h = batch_norm(h, p["bn_mid.gamma"], p["bn_mid.beta"], st["bn_mid"], training)
    return add(h, skip)


def generator_forward(lr: Tensor, weather: Tensor | None, net: NetworkParams,
                      training: bool = False) -> Tensor:
    """Map ``(B, 1, M)`` LR profiles (+ ``(B, W, M)`` weather) to ``(B, 1, alpha*M)``."""
    cfg: GeneratorConfig = net.config
    lr = lr if isinstance(lr, Tensor) else Tensor(lr)
    if lr.ndim != 3 or lr.shape[1] != 1:
        raise ValueError(f"generator expects (batch, 1, M) load input, got {lr.shape}")
    if cfg.weather_channels:
        if weather is None:
            raise ValueError("generator was built with weather input but none was given")
        weather = weather if isinstance(weather, Tensor) else Tensor(weather)
        if weather.shape != (lr.shape[0], cfg.weather_channels, lr.shape[2]):
            raise ValueError(f"weather {weather.shape} does not match LR {lr.shape} "
                             f"with {cfg.weather_channels} channels")
        x = concat([lr, weather], axis=1)
    else:
        if weather is not None:
            raise ValueError("generator was built without weather input")
        x = lr
    p, st = net.params, net.stats
    h = _trunk(x, net, training)
    for i, s in enumerate(cfg.stages):
        h = conv1d_transpose(h, p[f"up{i}.weight"], p[f"up{i}.bias"], s)
        h = relu(batch_norm(h, p[f"bn_up{i}.gamma"], p[f"bn_up{i}.beta"], st[f"bn_up{i}"], training))
    return conv1d(h, p["conv_out.weight"], p["conv_out.bias"], 1, cfg.k_outer // 2)


def polisher_forward(hr: Tensor, net: NetworkParams, training: bool = False) -> Tensor:
    """Residual correction: ``hr + f(hr)`` with the same length as ``hr``."""
    hr = hr if isinstance(hr, Tensor) else Tensor(hr)
    if hr.ndim != 3 or hr.shape[1] != 1:
        raise ValueError(f"polisher expects (batch, 1, N), got {hr.shape}")
    p = net.params
    h = _trunk(hr, net, training)
    corr = conv1d(h, p["conv_out.weight"], p["conv_out.bias"], 1, net.config.k_outer // 2)
    return add(hr, corr)


def discriminator_forward(hr: Tensor, net: NetworkParams) -> tuple[Tensor, list[Tensor]]:
    """Real/fake probability per sample ``(B,)`` and the four conv feature maps."""
    cfg: DiscriminatorConfig = net.config
    hr = hr if isinstance(hr, Tensor) else Tensor(hr)
    if hr.ndim != 3 or hr.shape[1:] != (1, cfg.length):
        raise ValueError(f"discriminator expects (batch, 1, {cfg.length}), got {hr.shape}")
    p = net.params
    h, feats = hr, []
    for i in range(len(cfg.features)):
        h = conv1d(h, p[f"conv{i}.weight"], p[f"conv{i}.bias"], cfg.stride, cfg.kernel // 2)
        h = leaky_relu(h, cfg.slope)
        feats.append(h)
    logit = fully_connected(h, p["fc.weight"], p["fc.bias"])
    return sigmoid(logit.reshape((hr.shape[0],))), feats


# -- checkpoints -----------------------------------------------------------------
#
# Layout (little-endian):
#   b"LSRCKPT\0"  u32 format version
#   u32 len + utf-8 JSON header {"fingerprint", "alpha", "epoch", "config_kind", "config"}
#   u32 array count, then per array:
#   u32 len + utf-8 name, u32 ndim, ndim * u64 dims, u64 byte count, raw fp64 data

MAGIC = b"LSRCKPT\0"
FORMAT_VERSION = 1
CONFIG_TYPES = {c.__name__: c for c in (GeneratorConfig, DiscriminatorConfig, PolisherConfig)}


class CheckpointError(ValueError):
    pass


def save_checkpoint(net: NetworkParams, path, alpha: int = 0, epoch: int = 0) -> None:
    header = json.dumps({"fingerprint": net.fingerprint, "alpha": alpha, "epoch": epoch,
                         "config_kind": type(net.config).__name__,
                         "config": asdict(net.config)}, sort_keys=True).encode()
    arrays = net.arrays()
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<I", FORMAT_VERSION))
        f.write(struct.pack("<I", len(header)) + header)
        f.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            a = np.ascontiguousarray(arrays[name], dtype="<f8")
            b = name.encode()
            f.write(struct.pack("<I", len(b)) + b)
            f.write(struct.pack("<I", a.ndim) + struct.pack(f"<{a.ndim}Q", *a.shape))
            raw = a.tobytes()
            f.write(struct.pack("<Q", len(raw)) + raw)


def _read(f, fmt):
    size = struct.calcsize(fmt)
    buf = f.read(size)
    if len(buf) != size:
        raise CheckpointError("truncated checkpoint")
    return struct.unpack(fmt, buf)


def load_checkpoint(path, expected_config=None) -> tuple[NetworkParams, dict]:
    """Read a checkpoint; returns the network and its header.

    With ``expected_config`` the stored fingerprint must match it.
    """
    with open(path, "rb") as f:
        if f.read(len(MAGIC)) != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        (version,) = _read(f, "<I")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}")
        (hlen,) = _read(f, "<I")
        header = json.loads(f.read(hlen))
        (count,) = _read(f, "<I")
        arrays = {}
        for _ in range(count):
            (nlen,) = _read(f, "<I")
            name = f.read(nlen).decode()
            (ndim,) = _read(f, "<I")
            shape = _read(f, f"<{ndim}Q") if ndim else ()
            (nbytes,) = _read(f, "<Q")
            arrays[name] = np.frombuffer(f.read(nbytes), dtype="<f8").reshape(shape).astype(np.float64)
    cfg_dict = dict(header["config"])
    for k, v in cfg_dict.items():
        if isinstance(v, list):
            cfg_dict[k] = tuple(v)
    config = CONFIG_TYPES[header["config_kind"]](**cfg_dict)
    if fingerprint(config) != header["fingerprint"]:
        raise CheckpointError(f"{path}: header fingerprint does not match stored config")
    if expected_config is not None and fingerprint(expected_config) != header["fingerprint"]:
        raise CheckpointError(f"{path}: checkpoint fingerprint {header['fingerprint']} does not "
                              f"match expected config {fingerprint(expected_config)}")
    net = init_params(config, np.random.default_rng(0))
    expected = set(net.arrays())
    if set(arrays) != expected:
        raise CheckpointError(f"{path}: array names differ from the config layout")
    for name, p in net.params.items():
        p.data = arrays[name]
    for name, s in net.stats.items():
        s.mean = arrays[f"{name}.running_mean"]
        s.var = arrays[f"{name}.running_var"]
    return net, header
