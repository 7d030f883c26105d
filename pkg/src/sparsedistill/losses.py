"""Training objective: data term, softened hint term, and two regularisers.

The full objective is

    total = CE + lambda_t * hint + lambda_v_eff * KL + lambda_g * group

where the hint term matches temperature-softened class distributions
between student and a frozen teacher (scaled by ``2 T^2`` so its gradient
magnitude stays comparable across temperatures), the KL term is one of
the posterior penalties from :mod:`.student` warmed up linearly over the
first epochs, and the group term is a mixed norm over the rows of a
zero-padded stack of every weight matrix from both networks.  Teacher
slices of that stack never change, so their row aggregates are
precomputed once into a :class:`BsrContext` and only student rows go
through the graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .autograd import Tensor, maximum_of
from .errors import DomainError, ShapeError, UsageError
from .student import kl_svd_node, kl_vbd_node

__all__ = [
    "LossConfig", "resolve_variant", "warmup_scale", "effective_lambda_v",
    "cross_entropy", "cross_entropy_node", "hint_loss", "hint_node",
    "ConcatTensor", "concat_weights", "bsr", "BsrContext", "make_bsr_context",
    "bsr_node", "total_loss", "VARIANTS",
]

VARIANTS = ("simple", "kd", "kd-svd", "kd-vbd", "st-svd", "st-vbd")


@dataclass
class LossConfig:
    """Knobs of the combined objective.

    ``lambda_v_max`` of None means "one over the training-set size", the
    scale at which the summed KL matches an averaged data term.
    """

    temperature: float = 2.0
    lambda_t: float = 2.0
    lambda_v_max: Optional[float] = None
    lambda_g: float = 0.0
    kl_variant: Optional[str] = None      # "svd" | "vbd" | None
    bsr_variant: Optional[str] = None     # "l1lq" | "l1linf" | None
    q: float = 2.0
    warmup_epochs: int = 10
    hint_reverse: bool = False

    def __post_init__(self):
        if self.temperature <= 0:
            raise DomainError(f"temperature must be positive, got {self.temperature}")
        if self.kl_variant not in (None, "svd", "vbd"):
            raise UsageError(f"unknown kl variant {self.kl_variant!r}")
        if self.bsr_variant not in (None, "l1lq", "l1linf"):
            raise UsageError(f"unknown group-norm variant {self.bsr_variant!r}")
        if self.bsr_variant == "l1lq" and not (np.isfinite(self.q) and self.q >= 1):
            raise DomainError(f"q must be a finite number >= 1, got {self.q}")


def resolve_variant(variant: str, base: LossConfig | None = None,
                    lambda_g: float | None = None) -> LossConfig:
    """Expand a named training variant into a concrete :class:`LossConfig`."""
    cfg = base if base is not None else LossConfig()
    if variant not in VARIANTS:
        raise UsageError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    if variant == "simple":
        return replace(cfg, lambda_t=0.0, kl_variant=None, lambda_g=0.0)
    if variant == "kd":
        return replace(cfg, kl_variant=None, lambda_g=0.0)
    kl = "svd" if variant.endswith("svd") else "vbd"
    if variant.startswith("kd-"):
        return replace(cfg, kl_variant=kl, lambda_g=0.0)
    gate = lambda_g
    if gate is None:
        gate = cfg.lambda_g if cfg.lambda_g > 0 else 0.01
    if cfg.bsr_variant is None:
        cfg = replace(cfg, bsr_variant="l1lq")
    return replace(cfg, kl_variant=kl, lambda_g=gate)


def warmup_scale(epoch: int, warmup_epochs: int) -> float:
    """Linear ramp from 0 at epoch 0 to 1 at ``warmup_epochs`` (0-indexed)."""
    if warmup_epochs <= 0:
        return 1.0
    return min(1.0, epoch / warmup_epochs)


def effective_lambda_v(cfg: LossConfig, epoch: int, n_train: int) -> float:
    lam = cfg.lambda_v_max if cfg.lambda_v_max is not None else 1.0 / n_train
    return lam * warmup_scale(epoch, cfg.warmup_epochs)


# -- data and hint terms -------------------------------------------------------


def _check_labels(labels: np.ndarray, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1:
        raise ShapeError(f"labels must be 1-D, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise DomainError(f"labels outside [0, {n_classes})")
    return labels.astype(np.int64)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=1, keepdims=True)
    return z - m - np.log(np.exp(z - m).sum(axis=1, keepdims=True))


def _log_softmax_node(z: Tensor) -> Tensor:
    # The shift is treated as a constant; the derivative of log-sum-exp is
    # unchanged by it, so gradients stay exact.
    m = Tensor(z.data.max(axis=1, keepdims=True))
    shifted = z - m
    return shifted - shifted.exp().sum(axis=1, keepdims=True).log()


def cross_entropy(logits: np.ndarray, labels) -> float:
    """Mean negative log-likelihood of the true class."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = _check_labels(labels, logits.shape[1])
    logp = _log_softmax(logits)
    return float(-logp[np.arange(len(labels)), labels].mean())


def cross_entropy_node(logits: Tensor, labels) -> Tensor:
    labels = _check_labels(labels, logits.data.shape[1])
    onehot = np.zeros(logits.data.shape)
    onehot[np.arange(len(labels)), labels] = 1.0
    logp = _log_softmax_node(logits)
    return (logp * Tensor(onehot)).sum() * (-1.0 / max(len(labels), 1))


def hint_loss(student_logits: np.ndarray, teacher_logits: np.ndarray,
              temperature: float, reverse: bool = False) -> float:
    """``2 T^2`` times the batch-mean KL between softened class distributions.

    By default the student's distribution is the one under the log
    (gradients reshape the student toward the teacher); ``reverse`` swaps
    the roles.
    """
    if temperature <= 0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    zs = np.asarray(student_logits, dtype=np.float64) / temperature
    zt = np.asarray(teacher_logits, dtype=np.float64) / temperature
    if zs.shape != zt.shape:
        raise ShapeError(f"logit shapes differ: {zs.shape} vs {zt.shape}")
    lps, lpt = _log_softmax(zs), _log_softmax(zt)
    if reverse:
        kl_rows = (np.exp(lpt) * (lpt - lps)).sum(axis=1)
    else:
        kl_rows = (np.exp(lps) * (lps - lpt)).sum(axis=1)
    return float(2.0 * temperature ** 2 * kl_rows.mean())


def hint_node(student_logits: Tensor, teacher_logits: np.ndarray,
              temperature: float, reverse: bool = False) -> Tensor:
    if temperature <= 0:
        raise DomainError(f"temperature must be positive, got {temperature}")
    zt = np.asarray(teacher_logits, dtype=np.float64) / temperature
    if student_logits.data.shape != zt.shape:
        raise ShapeError(f"logit shapes differ: {student_logits.data.shape} vs {zt.shape}")
    lps = _log_softmax_node(student_logits * (1.0 / temperature))
    lpt = Tensor(_log_softmax(zt))
    if reverse:
        pt = Tensor(np.exp(lpt.data))
        kl_rows = (pt * (lpt - lps)).sum(axis=1)
    else:
        kl_rows = (lps.exp() * (lps - lpt)).sum(axis=1)
    return kl_rows.mean() * (2.0 * temperature ** 2)


# -- mixed-norm group regulariser ----------------------------------------------


@dataclass
class ConcatTensor:
    """Zero-padded stack of weight matrices from both networks.

    Axis 0 indexes rows (padded to the tallest matrix), axis 1 columns
    (padded to the widest), axis 2 the matrices themselves, teacher
    layers first.
    """

    tensor: np.ndarray
    n_teacher: int
    shapes: list

    @property
    def m(self) -> int:
        return self.tensor.shape[0]


def concat_weights(teacher_weights, student_weights) -> ConcatTensor:
    mats = [np.asarray(w, dtype=np.float64) for w in list(teacher_weights) + list(student_weights)]
    for w in mats:
        if w.ndim != 2:
            raise ShapeError(f"expected 2-D weight matrices, got shape {w.shape}")
    m = max(w.shape[0] for w in mats)
    n = max(w.shape[1] for w in mats)
    out = np.zeros((m, n, len(mats)))
    for l, w in enumerate(mats):
        out[:w.shape[0], :w.shape[1], l] = w
    return ConcatTensor(out, n_teacher=len(list(teacher_weights)), shapes=[w.shape for w in mats])


def bsr(concat: ConcatTensor, variant: str, q: float = 2.0) -> float:
    """Mixed norm over the stacked tensor: an outer sum over rows of an
    inner q-norm (or max) across everything in that row.

    Aggregation walks the matrices through their true shapes and the outer
    sum is correctly rounded, so padded zeros cannot perturb the value
    even at the last bit.
    """
    t = np.abs(concat.tensor)
    if variant == "l1linf":
        row_max = np.zeros(concat.m)
        for l, (h, _) in enumerate(concat.shapes):
            row_max[:h] = np.maximum(row_max[:h], t[:h, :, l].max(axis=1))
        return float(math.fsum(row_max))
    if variant == "l1lq":
        if not (np.isfinite(q) and q >= 1):
            raise DomainError(f"q must be a finite number >= 1, got {q}")
        rows = np.zeros(concat.m)
        for l, (h, c) in enumerate(concat.shapes):
            rows[:h] += (t[:h, :c, l] ** q).sum(axis=1)
        return float(math.fsum(rows ** (1.0 / q)))
    raise UsageError(f"unknown group-norm variant {variant!r}")


@dataclass
class BsrContext:
    """Precomputed teacher-side row aggregates for the group term.

    ``teacher_row_agg`` holds, per padded row, either the sum of
    ``|w|^q`` (l1lq) or the row maximum (l1linf) across all teacher
    matrices; student matrices are folded in at graph-build time.
    """

    variant: str
    q: float
    m: int
    teacher_row_agg: np.ndarray = field(repr=False)


def make_bsr_context(teacher_weights, student_shapes, variant: str, q: float = 2.0) -> BsrContext:
    teacher_weights = [np.asarray(w, dtype=np.float64) for w in teacher_weights]
    heights = [w.shape[0] for w in teacher_weights] + [s[0] for s in student_shapes]
    m = max(heights)
    agg = np.zeros(m)
    if variant == "l1lq":
        if not (np.isfinite(q) and q >= 1):
            raise DomainError(f"q must be a finite number >= 1, got {q}")
        for w in teacher_weights:
            agg[:w.shape[0]] += (np.abs(w) ** q).sum(axis=1)
    elif variant == "l1linf":
        for w in teacher_weights:
            k = w.shape[0]
            agg[:k] = np.maximum(agg[:k], np.abs(w).max(axis=1))
    else:
        raise UsageError(f"unknown group-norm variant {variant!r}")
    return BsrContext(variant=variant, q=q, m=m, teacher_row_agg=agg)


def bsr_node(ctx: BsrContext, student_thetas: list[Tensor]) -> Tensor:
    """Graph version of :func:`bsr` over the same stack, never materialising
    the padded tensor; matches the numeric value on the means to rounding."""
    if ctx.variant == "l1lq":
        total = Tensor(ctx.teacher_row_agg)
        for theta in student_thetas:
            total = total + (theta.abs() ** ctx.q).sum(axis=1).pad_to(ctx.m)
        return total.qroot(ctx.q).sum()
    parts = [Tensor(ctx.teacher_row_agg)]
    for theta in student_thetas:
        parts.append(theta.abs().max(axis=1).pad_to(ctx.m))
    return maximum_of(parts).sum()


# -- combined objective ----------------------------------------------------------


def total_loss(param_ts, xb: np.ndarray, yb, teacher_rows: np.ndarray | None,
               cfg: LossConfig, *, epoch: int, n_train: int,
               bsr_ctx: BsrContext | None = None, rng=None,
               activation: str = "relu"):
    """Assemble the full objective for one batch.

    ``param_ts`` is a list of ``(theta, log_sigma2, bias)`` graph-tensor
    triples.  Returns ``(loss, parts)`` where ``parts`` maps each term
    name to its unweighted float value plus the effective KL weight.
    """
    from .student import student_logits_node

    if rng is None:
        raise UsageError("total_loss needs an rng stream for the noise draws")
    xb = np.asarray(xb, dtype=np.float64)
    eps_list = [rng.child(i).normal(xb.shape[0], theta.data.shape[1])
                for i, (theta, _, _) in enumerate(param_ts)]
    logits = student_logits_node(param_ts, xb, eps_list, activation=activation)

    loss = cross_entropy_node(logits, yb)
    parts = {"ce": loss.item(), "temperature": cfg.temperature,
             "lambda_t": cfg.lambda_t, "lambda_g": cfg.lambda_g}

    if cfg.lambda_t != 0.0 and teacher_rows is not None:
        hint = hint_node(logits, teacher_rows, cfg.temperature, cfg.hint_reverse)
        parts["hint"] = hint.item()
        loss = loss + hint * cfg.lambda_t
    else:
        parts["hint"] = 0.0

    lam_v = effective_lambda_v(cfg, epoch, n_train)
    parts["lambda_v_eff"] = lam_v
    if cfg.kl_variant is not None:
        node = kl_svd_node if cfg.kl_variant == "svd" else kl_vbd_node
        kl = node(param_ts[0][0], param_ts[0][1])
        for theta, logs2, _ in param_ts[1:]:
            kl = kl + node(theta, logs2)
        parts["kl"] = kl.item()
        if lam_v != 0.0:
            loss = loss + kl * lam_v
    else:
        parts["kl"] = 0.0

    if cfg.lambda_g != 0.0 and bsr_ctx is not None:
        group = bsr_node(bsr_ctx, [theta for theta, _, _ in param_ts])
        parts["bsr"] = group.item()
        loss = loss + group * cfg.lambda_g
    else:
        parts["bsr"] = 0.0

    parts["total"] = loss.item()
    return loss, parts
