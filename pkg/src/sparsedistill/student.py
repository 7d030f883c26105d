"""Compact student network with a factorised Gaussian posterior per weight.

Each layer keeps a mean matrix ``theta`` and a log-variance matrix
``log_sigma2`` over weights of the same shape.  The dropout rate of a
weight is summarised by ``log alpha = log sigma^2 - log theta^2``; large
values mean the multiplicative noise drowns the mean and the weight can
be removed.  Two KL penalties over log-alpha are provided (the sparsifying
form and the simpler log-uniform bound), plus pruning masks, forward
passes for training (noisy, via the local reparameterisation trick) and
evaluation (deterministic, masked), and checkpoint round-tripping.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .autograd import Tensor, maximum
from .errors import ConsistencyError, FormatError, ShapeError
from .tensor import RngStream, relu, sigmoid

__all__ = [
    "K1", "K2", "K3", "LOG_ALPHA_CLAMP",
    "VariationalDenseLayer", "StudentNet",
    "init_student", "alpha_log", "prune_mask", "prune_masks",
    "kl_svd", "kl_vbd", "kl_svd_node", "kl_vbd_node", "log_alpha_node",
    "variational_forward", "student_logits",
    "save_student", "load_student", "student_digest",
]

# Fitted constants of the sigmoid approximation to the sparsifying KL term.
K1 = 0.63576
K2 = 1.87320
K3 = 1.48695

# log-alpha is clamped to this symmetric range before entering any penalty,
# keeping exp() finite while leaving the saturated tails at zero gradient.
LOG_ALPHA_CLAMP = 40.0

_THETA_SQ_FLOOR = 1e-300  # keeps log(theta^2) finite on the graph path


@dataclass
class VariationalDenseLayer:
    theta: np.ndarray
    log_sigma2: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.theta.shape != self.log_sigma2.shape:
            raise ConsistencyError(
                f"theta {self.theta.shape} and log_sigma2 {self.log_sigma2.shape} differ"
            )
        if self.theta.shape[1] != self.bias.shape[0]:
            raise ConsistencyError(
                f"bias length {self.bias.shape[0]} != layer width {self.theta.shape[1]}"
            )

    @property
    def shape(self):
        return self.theta.shape


@dataclass
class StudentNet:
    layers: list[VariationalDenseLayer]
    activation: str = "relu"
    seed: int | None = None

    def __post_init__(self):
        for i in range(len(self.layers) - 1):
            if self.layers[i].shape[1] != self.layers[i + 1].shape[0]:
                raise ConsistencyError(
                    f"layer {i} output {self.layers[i].shape[1]} != "
                    f"layer {i + 1} input {self.layers[i + 1].shape[0]}"
                )

    @property
    def arch(self) -> list[int]:
        return [self.layers[0].shape[0]] + [l.shape[1] for l in self.layers]


def init_student(arch, seed: int, activation: str = "relu",
                 log_sigma2_init: float = -8.0) -> StudentNet:
    """Scaled-uniform means, constant small log-variance, zero biases."""
    from .teacher import parse_arch

    arch = parse_arch(arch)
    rng = RngStream(seed)
    layers = []
    for i, (k, h) in enumerate(zip(arch[:-1], arch[1:])):
        limit = np.sqrt(6.0 / k)
        theta = (rng.child(2, i).uniform(k, h) * 2.0 - 1.0) * limit
        layers.append(VariationalDenseLayer(theta, np.full((k, h), log_sigma2_init), np.zeros(h)))
    return StudentNet(layers, activation=activation, seed=seed)


def alpha_log(theta: np.ndarray, log_sigma2: np.ndarray) -> np.ndarray:
    """Per-weight log dropout ratio, clamped; exactly-zero means map to +inf."""
    with np.errstate(divide="ignore"):
        la = log_sigma2 - np.log(np.square(theta))
    la = np.clip(la, -LOG_ALPHA_CLAMP, LOG_ALPHA_CLAMP)
    return np.where(theta == 0.0, np.inf, la)


def prune_mask(layer: VariationalDenseLayer, tau: float) -> np.ndarray:
    """1.0 where a weight survives (log alpha <= tau), else 0.0."""
    if np.isposinf(tau):
        return np.ones_like(layer.theta)
    return (alpha_log(layer.theta, layer.log_sigma2) <= tau).astype(np.float64)


def prune_masks(net: StudentNet, tau: float) -> list[np.ndarray]:
    return [prune_mask(layer, tau) for layer in net.layers]


# -- KL penalties over log-alpha ----------------------------------------------


def kl_svd(log_alpha: np.ndarray) -> float:
    """Sparsifying penalty, summed.  Non-negative, and vanishes as alpha
    grows, so minimising it pushes weights toward removal.

    The constant-offset pair is folded into one complementary sigmoid,
    K1 - K1*sigmoid(x) = K1*sigmoid(-x), which keeps the tiny tail from
    being absorbed into the constant and then cancelled away.
    """
    la = np.clip(log_alpha, -LOG_ALPHA_CLAMP, LOG_ALPHA_CLAMP)
    sig_neg = 1.0 / (1.0 + np.exp(K2 + K3 * la))
    return float(np.sum(K1 * sig_neg + 0.5 * np.log1p(np.exp(-la))))


def kl_vbd(log_alpha: np.ndarray) -> float:
    """Log-uniform bound penalty, summed: 0.5 * log(1 + 1/alpha)."""
    la = np.clip(log_alpha, -LOG_ALPHA_CLAMP, LOG_ALPHA_CLAMP)
    return float(np.sum(0.5 * np.log1p(np.exp(-la))))


def log_alpha_node(theta_t: Tensor, log_sigma2_t: Tensor) -> Tensor:
    square = maximum(theta_t * theta_t, Tensor(np.float64(_THETA_SQ_FLOOR)))
    return (log_sigma2_t - square.log()).clip(-LOG_ALPHA_CLAMP, LOG_ALPHA_CLAMP)


def kl_svd_node(theta_t: Tensor, log_sigma2_t: Tensor) -> Tensor:
    """Graph version of :func:`kl_svd`; returns the scalar sum."""
    la = log_alpha_node(theta_t, log_sigma2_t)
    sig_neg = (la * -K3 - K2).sigmoid()
    half = ((la * -1.0).exp() + 1.0).log() * 0.5
    return (sig_neg * K1 + half).sum()


def kl_vbd_node(theta_t: Tensor, log_sigma2_t: Tensor) -> Tensor:
    la = log_alpha_node(theta_t, log_sigma2_t)
    return (((la * -1.0).exp() + 1.0).log() * 0.5).sum()


# -- forward passes ------------------------------------------------------------

_ACTIVATIONS = {"relu": relu, "sigmoid": sigmoid}
_VAR_FLOOR = 1e-18


def variational_forward(layer: VariationalDenseLayer, x: np.ndarray, *,
                        train: bool, rng: RngStream | None = None,
                        mask: np.ndarray | None = None) -> np.ndarray:
    """One layer's pre-activation output.

    Training draws the output from its per-unit Gaussian (mean ``x @ theta``,
    variance ``x^2 @ sigma^2``) so noise is sampled in activation space.
    Evaluation is deterministic on the means, with pruned weights zeroed.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.theta.shape[0]:
        raise ShapeError(f"batch shape {x.shape} incompatible with layer input {layer.theta.shape[0]}")
    if train:
        if rng is None:
            raise ConsistencyError("training forward needs an rng for the noise draw")
        m = x @ layer.theta + layer.bias
        v = np.square(x) @ np.exp(layer.log_sigma2)
        return m + np.sqrt(v + _VAR_FLOOR) * rng.normal(*m.shape)
    w = layer.theta if mask is None else layer.theta * mask
    return x @ w + layer.bias


def student_logits(net: StudentNet, x: np.ndarray, *, train: bool = False,
                   rng: RngStream | None = None,
                   masks: list[np.ndarray] | None = None) -> np.ndarray:
    """Full-network logits; hidden nonlinearity between layers, none after the last."""
    act = _ACTIVATIONS[net.activation]
    out = np.asarray(x, dtype=np.float64)
    for i, layer in enumerate(net.layers):
        mask = None if masks is None else masks[i]
        out = variational_forward(layer, out, train=train,
                                  rng=None if rng is None else rng.child(i), mask=mask)
        if i < len(net.layers) - 1:
            out = act(out)
    return out


def variational_forward_node(theta_t: Tensor, log_sigma2_t: Tensor, bias_t: Tensor,
                             x: np.ndarray, eps: np.ndarray) -> Tensor:
    """Graph version of the noisy forward; ``eps`` is drawn outside the graph."""
    x_node = Tensor(np.asarray(x, dtype=np.float64))
    m = x_node @ theta_t + bias_t
    v = Tensor(np.square(x_node.data)) @ log_sigma2_t.exp()
    return m + (v + _VAR_FLOOR).sqrt() * Tensor(eps)


def student_logits_node(param_ts: list[tuple[Tensor, Tensor, Tensor]], x: np.ndarray,
                        eps_list: list[np.ndarray], activation: str = "relu") -> Tensor:
    out_data = np.asarray(x, dtype=np.float64)
    out = None
    for i, (theta_t, logs2_t, bias_t) in enumerate(param_ts):
        src = out_data if out is None else out
        if isinstance(src, Tensor):
            m = src @ theta_t + bias_t
            v = (src * src) @ logs2_t.exp()
            out = m + (v + _VAR_FLOOR).sqrt() * Tensor(eps_list[i])
        else:
            out = variational_forward_node(theta_t, logs2_t, bias_t, src, eps_list[i])
        if i < len(param_ts) - 1:
            out = out.relu() if activation == "relu" else out.sigmoid()
    return out


# -- checkpoint serialization --------------------------------------------------


def _student_payload(net: StudentNet) -> bytes:
    parts = []
    for layer in net.layers:
        parts.append(np.ascontiguousarray(layer.theta, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(layer.bias, dtype="<f8").tobytes())
    for layer in net.layers:
        parts.append(np.ascontiguousarray(layer.log_sigma2, dtype="<f8").tobytes())
    return b"".join(parts)


def student_digest(net: StudentNet) -> str:
    return hashlib.sha256(_student_payload(net)).hexdigest()


def save_student(net: StudentNet, base_path, tau: float | None = None) -> str:
    from .teacher import write_manifest

    base_path = Path(base_path)
    base_path.parent.mkdir(parents=True, exist_ok=True)
    payload = _student_payload(net)
    digest = hashlib.sha256(payload).hexdigest()
    (base_path.parent / (base_path.name + ".bin")).write_bytes(payload)
    write_manifest(base_path, {
        "kind": "variational_mlp",
        "architecture": "-".join(str(w) for w in net.arch),
        "activation": net.activation,
        "seed": "" if net.seed is None else net.seed,
        "tau": "" if tau is None else repr(float(tau)),
        "digest": digest,
    })
    return digest


def load_student(base_path):
    """Returns ``(net, tau)`` where tau is None if the checkpoint has none."""
    from .teacher import count_parameters, parse_arch, read_manifest, _read_payload

    manifest = read_manifest(base_path)
    if manifest.get("kind") != "variational_mlp":
        raise FormatError(f"{base_path}: not a variational_mlp checkpoint ({manifest.get('kind')!r})")
    arch = parse_arch(manifest["architecture"])
    n_wb = count_parameters(arch)
    n_ls = sum(k * h for k, h in zip(arch[:-1], arch[1:]))
    flat = _read_payload(base_path, n_wb + n_ls, manifest["digest"])
    thetas, biases, pos = [], [], 0
    for k, h in zip(arch[:-1], arch[1:]):
        thetas.append(flat[pos:pos + k * h].reshape(k, h).copy())
        pos += k * h
        biases.append(flat[pos:pos + h].copy())
        pos += h
    layers = []
    for (k, h), theta, bias in zip(zip(arch[:-1], arch[1:]), thetas, biases):
        layers.append(VariationalDenseLayer(theta, flat[pos:pos + k * h].reshape(k, h).copy(), bias))
        pos += k * h
    seed = manifest.get("seed", "")
    net = StudentNet(layers, activation=manifest.get("activation", "relu"),
                     seed=int(seed) if seed else None)
    tau = manifest.get("tau", "")
    return net, (float(tau) if tau else None)
