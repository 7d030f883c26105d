"""Adam, the student training loop, evaluation, and the low-data sweep.

Training writes two artifacts when given a log directory: ``session.jsonl``
(one metadata line, then one line per epoch) which is byte-identical
across runs with the same inputs, and ``timing.jsonl`` which holds the
wall-clock numbers and is allowed to differ run to run.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from time import perf_counter

import numpy as np

from .autograd import Tensor
from .data import Dataset, batch_iter, subset_indices
from .errors import ConsistencyError, TrainingError, UsageError
from .losses import BsrContext, LossConfig, make_bsr_context, total_loss
from .metrics import per_layer_sparsity_pct, sparsity_ratio, top1_error
from .student import StudentNet, init_student, prune_masks, student_logits
from .tensor import RngStream

__all__ = ["Adam", "StudentTrainConfig", "train_student", "evaluate_student",
           "lowdata_sweep", "summarize_sweep"]


class Adam(object):
    """Adam with bias correction; updates parameter arrays in place."""

    def __init__(self, params: list[Tensor], lr: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        self.t += 1
        for i, p in enumerate(self.params):
            if p.grad is None:
                continue
            g = p.grad
            if not np.all(np.isfinite(g)):
                raise TrainingError(f"non-finite gradient in parameter {i}", param=i)
            self._m[i] = self.beta1 * self._m[i] + (1.0 - self.beta1) * g
            self._v[i] = self.beta2 * self._v[i] + (1.0 - self.beta2) * np.square(g)
            m_hat = self._m[i] / (1.0 - self.beta1 ** self.t)
            v_hat = self._v[i] / (1.0 - self.beta2 ** self.t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


@dataclass
class StudentTrainConfig:
    arch: list[int] = field(default_factory=lambda: [784, 500, 50, 10])
    epochs: int = 100
    batch_size: int = 512
    lr: float = 1e-3
    seed: int = 0
    tau: float = 3.0
    activation: str = "relu"
    log_sigma2_init: float = -8.0
    grad_clip: float | None = None


def _clip_global_norm(params, max_norm: float):
    """Scale all gradients together so their joint l2 norm is at most max_norm."""
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(np.square(p.grad)))
    norm = np.sqrt(total)
    if norm > max_norm and norm > 0:
        scale = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= scale


def _epoch_eval(net: StudentNet, test_ds: Dataset | None, tau: float) -> dict:
    masks = prune_masks(net, tau)
    out = {
        "r_s": sparsity_ratio(masks),
        "per_layer_sparsity": per_layer_sparsity_pct(masks),
    }
    if test_ds is not None:
        out["test_error_pct"] = 100.0 * top1_error(
            _chunked_logits(net, test_ds.images, masks), test_ds.labels)
    return out


def _chunked_logits(net: StudentNet, images: np.ndarray, masks=None,
                    chunk: int = 4096) -> np.ndarray:
    rows = [student_logits(net, images[i:i + chunk], train=False, masks=masks)
            for i in range(0, len(images), chunk)]
    return np.vstack(rows)


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def train_student(ds: Dataset, teacher_logits: np.ndarray | None,
                  loss_cfg: LossConfig, cfg: StudentTrainConfig, *,
                  teacher_weights=None, test_ds: Dataset | None = None,
                  log_dir=None):
    """Train a student against cached teacher logits.

    ``teacher_logits`` must be row-aligned with ``ds`` (pass None only
    when the hint weight is zero).  ``teacher_weights`` is required when
    the group regulariser is active, since its row groups span both
    networks.  Returns ``(net, records)``.
    """
    if teacher_logits is not None and len(teacher_logits) != len(ds):
        raise ConsistencyError(
            f"{len(teacher_logits)} cached logit rows for {len(ds)} training rows")
    if loss_cfg.lambda_t != 0.0 and teacher_logits is None:
        raise UsageError("hint weight is non-zero but no teacher logits were given")

    net = init_student(cfg.arch, cfg.seed, cfg.activation, cfg.log_sigma2_init)
    param_ts = [(Tensor(l.theta, requires_grad=True),
                 Tensor(l.log_sigma2, requires_grad=True),
                 Tensor(l.bias, requires_grad=True)) for l in net.layers]
    flat_params = [t for triple in param_ts for t in triple]
    opt = Adam(flat_params, lr=cfg.lr)

    bsr_ctx: BsrContext | None = None
    if loss_cfg.lambda_g != 0.0 and loss_cfg.bsr_variant is not None:
        if teacher_weights is None:
            raise UsageError("group regulariser is active but no teacher weights were given")
        bsr_ctx = make_bsr_context(teacher_weights, [l.theta.shape for l in net.layers],
                                   loss_cfg.bsr_variant, loss_cfg.q)

    session_lines = [_json_line({
        "kind": "train_session",
        "arch": list(net.arch),
        "n_train": len(ds),
        "loss": asdict(loss_cfg),
        "train": asdict(cfg),
    })]
    timing_lines = []
    records = []
    part_keys = ("ce", "hint", "kl", "bsr", "total")

    for epoch in range(cfg.epochs):
        t0 = perf_counter()
        sums = dict.fromkeys(part_keys, 0.0)
        lam_v_eff = 0.0
        steps = 0
        for xb, yb, idx in batch_iter(ds, cfg.batch_size, shuffle_seed=(cfg.seed, epoch)):
            rows = None if teacher_logits is None else teacher_logits[idx]
            noise = RngStream(cfg.seed).child(5, epoch, steps)
            loss, parts = total_loss(param_ts, xb, yb, rows, loss_cfg,
                                     epoch=epoch, n_train=len(ds),
                                     bsr_ctx=bsr_ctx, rng=noise,
                                     activation=cfg.activation)
            if not np.isfinite(parts["total"]):
                raise TrainingError(f"loss diverged at epoch {epoch} step {steps}",
                                    epoch=epoch, batch=steps)
            opt.zero_grad()
            loss.backward()
            if cfg.grad_clip is not None:
                _clip_global_norm(flat_params, cfg.grad_clip)
            opt.step()
            for k in part_keys:
                sums[k] += parts[k]
            lam_v_eff = parts["lambda_v_eff"]
            steps += 1

        record = {"epoch": epoch, "lambda_v_eff": lam_v_eff}
        record.update({k: sums[k] / max(steps, 1) for k in part_keys})
        record.update(_epoch_eval(net, test_ds, cfg.tau))
        records.append(record)
        session_lines.append(_json_line(record))
        timing_lines.append(_json_line({"epoch": epoch, "seconds": perf_counter() - t0}))

    if log_dir is not None:
        log_dir = Path(log_dir)
        log_dir.mkdir(parents=True, exist_ok=True)
        (log_dir / "session.jsonl").write_text("\n".join(session_lines) + "\n")
        (log_dir / "timing.jsonl").write_text("\n".join(timing_lines) + "\n")
    return net, records


def evaluate_student(net: StudentNet, ds: Dataset, tau: float) -> dict:
    """Deterministic pruned-network metrics on a dataset."""
    masks = prune_masks(net, tau)
    err = top1_error(_chunked_logits(net, ds.images, masks), ds.labels)
    return {
        "test_error_pct": 100.0 * err,
        "per_layer_sparsity": per_layer_sparsity_pct(masks),
        "r_s": sparsity_ratio(masks),
        "tau": float(tau),
    }


def lowdata_sweep(train_ds: Dataset, test_ds: Dataset, teacher_logits: np.ndarray,
                  loss_cfg: LossConfig, cfg: StudentTrainConfig,
                  sizes, seeds, *, teacher_weights=None) -> list[dict]:
    """Train hint-on and hint-off students per (subset size, seed) pair.

    Subsets are stratified, so every class keeps its share even at small
    sizes.  The KL weight ceiling tracks the subset size whenever
    ``loss_cfg.lambda_v_max`` is None.  Two rows come out of every pair:
    one trained with the configured hint weight, one with it zeroed.
    """
    results = []
    off_cfg = replace(loss_cfg, lambda_t=0.0)
    for size in sizes:
        for seed in seeds:
            idx = subset_indices(train_ds, size, seed)
            sub = train_ds.take(idx)
            run_cfg = StudentTrainConfig(**{**asdict(cfg), "seed": seed})
            for hint, lcfg in ((True, loss_cfg), (False, off_cfg)):
                net, _ = train_student(sub, teacher_logits[idx], lcfg, run_cfg,
                                       teacher_weights=teacher_weights, test_ds=None)
                scored = evaluate_student(net, test_ds, cfg.tau)
                results.append({"size": int(size), "seed": int(seed), "hint": hint,
                                "test_error_pct": scored["test_error_pct"],
                                "r_s": scored["r_s"]})
    return results


def summarize_sweep(rows: list[dict]) -> list[dict]:
    """Mean and population standard deviation of error per (size, hint) group."""
    groups: dict[tuple, list[float]] = {}
    for row in rows:
        groups.setdefault((row["size"], row["hint"]), []).append(row["test_error_pct"])
    out = []
    for (size, hint), errs in sorted(groups.items()):
        out.append({"size": size, "hint": hint, "n": len(errs),
                    "mean_test_error_pct": float(np.mean(errs)),
                    "std_test_error_pct": float(np.std(errs))})
    return out
