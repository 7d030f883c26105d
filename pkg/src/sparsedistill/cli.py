"""Command-line surface: train the teacher, train student variants,
evaluate checkpoints, and sweep training-set sizes.

Configuration precedence is flags, then a ``key=value`` config file
(``--config``), then built-in defaults; every artifact embeds the fully
resolved configuration.  Exit codes: 0 on success, 2 on usage problems,
1 on runtime failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import teacher as teacher_mod
from .data import load_idx
from .errors import UsageError
from .losses import LossConfig, VARIANTS, resolve_variant
from .metrics import (SparsityReport, REPORT_FORMATS, compression_ratio, emit_report,
                      footprint, inference_time, remaining_parameters)
from .optim import (StudentTrainConfig, evaluate_student, lowdata_sweep,
                    summarize_sweep, train_student)
from .student import load_student, prune_masks, save_student
from .teacher import (TeacherConfig, count_parameters, load_checkpoint, load_logit_cache,
                      parse_arch, payload_digest, precompute_logits, save_checkpoint,
                      save_logit_cache, train_teacher)

__all__ = ["main", "build_parser"]

TEACHER_ARCH = "784-1200-1200-10"
STUDENT_ARCH = "784-500-50-10"
DEFAULT_SIZES = "100,500,1000,5000,10000"


# -- option plumbing ----------------------------------------------------------


def _arch(text: str) -> str:
    parse_arch(text)
    return text


def _sizes(text: str) -> list[int]:
    try:
        out = [int(p) for p in str(text).split(",") if p.strip()]
    except ValueError:
        raise UsageError(f"bad size list {text!r}; expected comma-separated integers")
    if not out or any(s < 1 for s in out):
        raise UsageError(f"sizes must be positive integers, got {text!r}")
    return out


def _seeds(text: str) -> list[int]:
    """A bare integer N means seeds 0..N-1; a comma list is used as given."""
    text = str(text)
    if "," in text:
        return [int(p) for p in text.split(",") if p.strip()]
    try:
        n = int(text)
    except ValueError:
        raise UsageError(f"bad seed spec {text!r}")
    if n < 1:
        raise UsageError(f"need at least one seed, got {n}")
    return list(range(n))


def _lambda_v(text) -> float | None:
    if text is None or str(text).lower() in ("auto", "none", ""):
        return None
    return float(text)


def _choice(name, options):
    def convert(text: str):
        if text not in options:
            raise UsageError(f"bad {name} {text!r}; expected one of {', '.join(options)}")
        return text
    return convert


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    if str(text).lower() in ("1", "true", "yes", "on"):
        return True
    if str(text).lower() in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"bad boolean {text!r}")


_CONVERTERS = {
    "arch": _arch,
    "variant": _choice("variant", VARIANTS),
    "kl": _choice("kl variant", ("svd", "vbd")),
    "bsr": _choice("group-norm variant", ("none", "l1linf", "l1l2", "l1lq")),
    "q": float,
    "temperature": float,
    "lambda_t": float,
    "lambda_v": _lambda_v,
    "lambda_g": float,
    "warmup_epochs": int,
    "epochs": int,
    "batch": int,
    "lr": float,
    "tau": float,
    "seed": int,
    "sizes": _sizes,
    "seeds": _seeds,
    "format": _choice("report format", REPORT_FORMATS),
    "time": _bool,
    "hint_reverse": _bool,
    "clip": float,
    "activation": _choice("activation", ("relu", "sigmoid")),
}


def _argparse_type(dest):
    convert = _CONVERTERS[dest]

    def wrapped(text):
        try:
            return convert(text)
        except (UsageError, ValueError) as exc:
            raise argparse.ArgumentTypeError(str(exc))
    return wrapped


class Resolved:
    """flags > config file > defaults, with file values type-converted."""

    def __init__(self, args: argparse.Namespace, defaults: dict):
        self.flags = vars(args)
        self.defaults = defaults
        self.file = {}
        config_path = self.flags.get("config")
        if config_path:
            path = Path(config_path)
            if not path.exists():
                raise UsageError(f"no such config file: {path}")
            raw = teacher_mod.read_manifest(path)
            for key, value in raw.items():
                dest = key.replace("-", "_")
                if dest in _CONVERTERS:
                    self.file[dest] = _CONVERTERS[dest](value)
                else:
                    self.file[dest] = value

    def __call__(self, dest):
        v = self.flags.get(dest)
        if v is not None:
            return v
        if dest in self.file:
            return self.file[dest]
        return self.defaults.get(dest)

    def snapshot(self, keys) -> dict:
        return {k: self(k) for k in keys}


def _require_file(path, what: str) -> Path:
    if path is None:
        raise UsageError(f"missing required {what}")
    path = Path(path)
    if not path.exists():
        raise UsageError(f"no such {what}: {path}")
    return path


def _load_pair(v, prefix: str, required: bool):
    images, labels = v(f"{prefix}_images"), v(f"{prefix}_labels")
    if images is None and labels is None:
        if required:
            raise UsageError(f"missing --{prefix}-images/--{prefix}-labels")
        return None
    return load_idx(_require_file(images, f"{prefix} images file"),
                    _require_file(labels, f"{prefix} labels file"))


def _check_arch_against(arch_text: str, ds) -> list[int]:
    arch = parse_arch(arch_text)
    if arch[0] != ds.n_features:
        raise UsageError(f"architecture input width {arch[0]} != dataset features {ds.n_features}")
    if arch[-1] < ds.n_classes:
        raise UsageError(f"architecture output width {arch[-1]} < {ds.n_classes} classes")
    return arch


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# -- loss config assembly -----------------------------------------------------


def build_loss_config(v) -> LossConfig:
    base = LossConfig(temperature=v("temperature"), lambda_t=v("lambda_t"),
                      lambda_v_max=v("lambda_v"), lambda_g=0.0,
                      kl_variant=None, bsr_variant=None, q=v("q"),
                      warmup_epochs=v("warmup_epochs"),
                      hint_reverse=v("hint_reverse"))
    cfg = resolve_variant(v("variant"), base, lambda_g=v("lambda_g"))
    if v("kl") is not None:
        cfg = replace(cfg, kl_variant=v("kl"))
    bsr_flag = v("bsr")
    if bsr_flag is not None:
        if bsr_flag == "none":
            cfg = replace(cfg, bsr_variant=None, lambda_g=0.0)
        else:
            kind = "l1linf" if bsr_flag == "l1linf" else "l1lq"
            q = 2.0 if bsr_flag == "l1l2" else cfg.q
            gate = v("lambda_g")
            if gate is None:
                gate = cfg.lambda_g if cfg.lambda_g > 0 else 0.01
            cfg = replace(cfg, bsr_variant=kind, q=q, lambda_g=gate)
    return cfg


# -- subcommands ----------------------------------------------------------------

_TEACHER_DEFAULTS = {"arch": TEACHER_ARCH, "epochs": 100, "batch": 128, "lr": 1e-3,
                     "seed": 0, "activation": "relu", "out": "runs/teacher"}

_STUDENT_DEFAULTS = {"arch": STUDENT_ARCH, "variant": "kd-svd", "kl": None, "bsr": None,
                     "q": 2.0, "temperature": 2.0, "lambda_t": 2.0, "lambda_v": None,
                     "lambda_g": None, "warmup_epochs": 10, "epochs": 100, "batch": 512,
                     "lr": 1e-3, "tau": 3.0, "seed": 0, "activation": "relu",
                     "hint_reverse": False, "clip": None, "out": "runs/student",
                     "format": "json"}

_EVAL_DEFAULTS = {"tau": 3.0, "format": "json", "time": False, "batch": 100}

_LOWDATA_DEFAULTS = dict(_STUDENT_DEFAULTS, sizes=_sizes(DEFAULT_SIZES), seeds=_seeds("3"),
                         epochs=30, out="runs/lowdata")


def cmd_train_teacher(args) -> int:
    v = Resolved(args, _TEACHER_DEFAULTS)
    train_ds = _load_pair(v, "train", required=True)
    test_ds = _load_pair(v, "test", required=False)
    arch = _check_arch_against(v("arch"), train_ds)
    cfg = TeacherConfig(arch=arch, epochs=v("epochs"), batch_size=v("batch"),
                        lr=v("lr"), seed=v("seed"), activation=v("activation"))
    net, records = train_teacher(train_ds, cfg, test_ds=test_ds)

    out = Path(v("out"))
    out.mkdir(parents=True, exist_ok=True)
    digest = save_checkpoint(net, out / "teacher.ckpt")
    save_logit_cache(precompute_logits(net, train_ds), out / "cache.ckpt")
    resolved = v.snapshot(("arch", "epochs", "batch", "lr", "seed", "activation", "out"))
    meta = {"kind": "teacher_session", "config": resolved, "n_train": len(train_ds),
            "parameters": count_parameters(net), "digest": digest}
    lines = [json.dumps(meta, sort_keys=True, separators=(",", ":"))]
    lines += [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in records]
    (out / "session.jsonl").write_text("\n".join(lines) + "\n")
    _write_json(out / "config.json", resolved)
    final = records[-1] if records else {}
    print(f"teacher {'-'.join(str(w) for w in arch)}: "
          f"{count_parameters(net)} parameters, digest {digest[:12]}, "
          f"final train error {final.get('train_error', float('nan')):.4f}"
          + (f", test error {final['test_error']:.4f}" if "test_error" in final else ""))
    print(f"wrote {out / 'teacher.ckpt'} and {out / 'cache.ckpt'}")
    return 0


def _load_teacher_and_cache(v, train_ds):
    """Returns (teacher_net, logits aligned with train_ds) or (None, None)."""
    teacher_path = v("teacher")
    if teacher_path is None:
        return None, None
    net = load_checkpoint(_require_file(teacher_path, "teacher checkpoint"))
    digest = payload_digest(net)
    cache_path = v("cache")
    if cache_path is not None:
        cache = load_logit_cache(_require_file(cache_path, "logit cache"), digest)
        logits = cache.logits
    else:
        logits = precompute_logits(net, train_ds).logits
    if len(logits) != len(train_ds):
        raise UsageError(f"logit cache has {len(logits)} rows but the training set has "
                         f"{len(train_ds)}; rebuild the cache for this dataset")
    return net, logits


_STUDENT_KEYS = ("arch", "variant", "kl", "bsr", "q", "temperature", "lambda_t",
                 "lambda_v", "lambda_g", "warmup_epochs", "epochs", "batch", "lr",
                 "tau", "seed", "activation", "hint_reverse", "clip", "out", "format")


def _teacher_baseline(teacher_net):
    """(parameter count, dense bytes) of the compression baseline."""
    params = count_parameters(teacher_net)
    return params, 4 * params


def _student_report(net, tau, test_ds, teacher_net, config: dict,
                    timed_batch: int | None = None) -> SparsityReport:
    masks = prune_masks(net, tau)
    scored = evaluate_student(net, test_ds, tau)
    biases = [l.bias for l in net.layers]
    fp = footprint(masks, biases)
    kept = remaining_parameters(masks, biases)
    if teacher_net is not None:
        baseline_params, baseline_bytes = _teacher_baseline(teacher_net)
        config = dict(config, compression_baseline="teacher")
    else:
        baseline_params = sum(int(m.size) for m in masks) + sum(int(b.size) for b in biases)
        baseline_bytes = fp["dense_bytes"]
        config = dict(config, compression_baseline="self")
    report = SparsityReport(
        network="-".join(str(w) for w in net.arch),
        test_error_pct=scored["test_error_pct"],
        per_layer_sparsity=scored["per_layer_sparsity"],
        r_s=scored["r_s"],
        r_c=compression_ratio(baseline_params, kept),
        dense_bytes=baseline_bytes,
        csr_bytes=fp["stored_bytes"],
        footprint_compression=baseline_bytes / fp["stored_bytes"],
        inference_ms=None,
        config=config,
    )
    if timed_batch:
        x = test_ds.images[:timed_batch]
        report.inference_ms = 1000.0 * inference_time(net, x, masks=masks)
    return report


def cmd_train_student(args) -> int:
    v = Resolved(args, _STUDENT_DEFAULTS)
    train_ds = _load_pair(v, "train", required=True)
    test_ds = _load_pair(v, "test", required=False)
    arch = _check_arch_against(v("arch"), train_ds)
    loss_cfg = build_loss_config(v)
    if v("variant") != "simple" and v("teacher") is None:
        raise UsageError(f"variant {v('variant')!r} needs --teacher (only 'simple' runs without one)")
    teacher_net, logits = _load_teacher_and_cache(v, train_ds)
    cfg = StudentTrainConfig(arch=arch, epochs=v("epochs"), batch_size=v("batch"),
                             lr=v("lr"), seed=v("seed"), tau=v("tau"),
                             activation=v("activation"), grad_clip=v("clip"))
    out = Path(v("out"))
    net, records = train_student(
        train_ds, logits, loss_cfg, cfg,
        teacher_weights=None if teacher_net is None else teacher_net.weights,
        test_ds=test_ds, log_dir=out)

    save_student(net, out / "student.ckpt", tau=v("tau"))
    resolved = v.snapshot(_STUDENT_KEYS)
    resolved["loss"] = asdict(loss_cfg)
    _write_json(out / "config.json", resolved)
    last = records[-1]
    print(f"student {'-'.join(str(w) for w in arch)} [{v('variant')}]: "
          f"R_s {last['r_s']:.2f} at tau {v('tau')}"
          + (f", test error {last['test_error_pct']:.2f}%" if "test_error_pct" in last else ""))
    if test_ds is not None:
        report = _student_report(net, v("tau"), test_ds, teacher_net, resolved)
        ext = {"json": "json", "markdown": "md", "csv": "csv"}[v("format")]
        (out / f"report.{ext}").write_text(emit_report([report], v("format")) + "\n")
        print(f"wrote {out / f'report.{ext}'}")
    print(f"wrote {out / 'student.ckpt'} and {out / 'session.jsonl'}")
    return 0


def cmd_evaluate(args) -> int:
    v = Resolved(args, _EVAL_DEFAULTS)
    net, _ = load_student(_require_file(v("student"), "student checkpoint"))
    test_ds = _load_pair(v, "test", required=True)
    teacher_net = None
    if v("teacher") is not None:
        teacher_net = load_checkpoint(_require_file(v("teacher"), "teacher checkpoint"))
    resolved = {"student": str(v("student")), "tau": v("tau"), "format": v("format")}
    report = _student_report(net, v("tau"), test_ds, teacher_net, resolved,
                             timed_batch=v("batch") if v("time") else None)
    doc = emit_report([report], v("format"))
    if v("out"):
        out = Path(v("out"))
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(doc + "\n")
        print(f"wrote {out}")
    else:
        print(doc)
    return 0


def cmd_lowdata(args) -> int:
    v = Resolved(args, _LOWDATA_DEFAULTS)
    train_ds = _load_pair(v, "train", required=True)
    test_ds = _load_pair(v, "test", required=True)
    arch = _check_arch_against(v("arch"), train_ds)
    if v("teacher") is None:
        raise UsageError("lowdata needs --teacher for the hint comparison")
    teacher_net, logits = _load_teacher_and_cache(v, train_ds)
    loss_cfg = build_loss_config(v)
    cfg = StudentTrainConfig(arch=arch, epochs=v("epochs"), batch_size=v("batch"),
                             lr=v("lr"), seed=v("seed"), tau=v("tau"),
                             activation=v("activation"), grad_clip=v("clip"))
    rows = lowdata_sweep(train_ds, test_ds, logits, loss_cfg, cfg,
                         v("sizes"), v("seeds"),
                         teacher_weights=teacher_net.weights)
    summary = summarize_sweep(rows)
    resolved = v.snapshot(_STUDENT_KEYS + ("sizes", "seeds"))
    resolved["loss"] = asdict(loss_cfg)
    out = Path(v("out"))
    _write_json(out / "sweep.json", {"rows": rows, "summary": summary, "config": resolved})
    for s in summary:
        label = "with hint" if s["hint"] else "no hint  "
        print(f"n={s['size']:>6} {label} error {s['mean_test_error_pct']:.2f}% "
              f"+/- {s['std_test_error_pct']:.2f} over {s['n']} seeds")
    print(f"wrote {out / 'sweep.json'}")
    return 0


# -- parser ---------------------------------------------------------------------


def _add_data_flags(p, train=True, test=True):
    if train:
        p.add_argument("--train-images", help="IDX image file for training")
        p.add_argument("--train-labels", help="IDX label file for training")
    if test:
        p.add_argument("--test-images", help="IDX image file for evaluation")
        p.add_argument("--test-labels", help="IDX label file for evaluation")


def _add_common(p):
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--out", help="output directory (or file for evaluate)")
    p.add_argument("--seed", type=_argparse_type("seed"), help="run seed")


def _add_student_flags(p):
    p.add_argument("--arch", type=_argparse_type("arch"),
                   help=f"dash-separated widths (default {STUDENT_ARCH})")
    p.add_argument("--variant", type=_argparse_type("variant"),
                   help="one of " + ", ".join(VARIANTS) + " (default kd-svd)")
    p.add_argument("--kl", type=_argparse_type("kl"), help="posterior penalty: svd or vbd")
    p.add_argument("--bsr", type=_argparse_type("bsr"),
                   help="row-group norm: none, l1linf, l1l2, or l1lq")
    p.add_argument("--q", type=_argparse_type("q"), help="inner norm order for l1lq (default 2)")
    p.add_argument("--temperature", type=_argparse_type("temperature"),
                   help="softening temperature (default 2)")
    p.add_argument("--lambda-t", type=_argparse_type("lambda_t"),
                   help="hint weight (default 2)")
    p.add_argument("--lambda-v", type=_argparse_type("lambda_v"),
                   help="KL weight ceiling; 'auto' = 1/n_train (default auto)")
    p.add_argument("--lambda-g", type=_argparse_type("lambda_g"),
                   help="group-norm weight (default 0.01 when active)")
    p.add_argument("--warmup-epochs", type=_argparse_type("warmup_epochs"),
                   help="epochs to ramp the KL weight (default 10)")
    p.add_argument("--epochs", type=_argparse_type("epochs"), help="training epochs")
    p.add_argument("--batch", type=_argparse_type("batch"), help="batch size (default 512)")
    p.add_argument("--lr", type=_argparse_type("lr"), help="Adam step size (default 1e-3)")
    p.add_argument("--tau", type=_argparse_type("tau"),
                   help="prune weights with log alpha above this (default 3)")
    p.add_argument("--hint-reverse", action="store_const", const=True, dest="hint_reverse",
                   help="swap the roles in the hint divergence")
    p.add_argument("--clip", type=_argparse_type("clip"),
                   help="clip the joint gradient l2 norm to this value (off by default)")
    p.add_argument("--activation", type=_argparse_type("activation"),
                   help="hidden nonlinearity (default relu)")
    p.add_argument("--format", type=_argparse_type("format"),
                   help="report format: json, markdown, or csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsedistill",
        description="Train a dense teacher, distill it into a sparse variational "
                    "student, prune, and report compression metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-teacher", help="train the dense teacher and cache its logits")
    _add_data_flags(p)
    _add_common(p)
    p.add_argument("--arch", type=_argparse_type("arch"),
                   help=f"dash-separated widths (default {TEACHER_ARCH})")
    p.add_argument("--epochs", type=_argparse_type("epochs"), help="training epochs (default 100)")
    p.add_argument("--batch", type=_argparse_type("batch"), help="batch size (default 128)")
    p.add_argument("--lr", type=_argparse_type("lr"), help="Adam step size (default 1e-3)")
    p.add_argument("--activation", type=_argparse_type("activation"),
                   help="hidden nonlinearity (default relu)")
    p.set_defaults(func=cmd_train_teacher)

    p = sub.add_parser("train-student", help="train a variational student against a teacher")
    _add_data_flags(p)
    _add_common(p)
    p.add_argument("--teacher", help="teacher checkpoint (manifest path)")
    p.add_argument("--cache", help="teacher logit cache (manifest path)")
    _add_student_flags(p)
    p.set_defaults(func=cmd_train_student)

    p = sub.add_parser("evaluate", help="score a student checkpoint at a pruning threshold")
    _add_data_flags(p, train=False)
    _add_common(p)
    p.add_argument("--student", help="student checkpoint (manifest path)")
    p.add_argument("--teacher", help="teacher checkpoint for compression baselines")
    p.add_argument("--tau", type=_argparse_type("tau"), help="pruning threshold (default 3)")
    p.add_argument("--format", type=_argparse_type("format"),
                   help="report format: json, markdown, or csv")
    p.add_argument("--time", action="store_const", const=True, dest="time",
                   help="also measure inference time (makes output nondeterministic)")
    p.add_argument("--batch", type=_argparse_type("batch"),
                   help="batch size for the timed forward pass (default 100)")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("lowdata", help="sweep training-set sizes with and without the hint")
    _add_data_flags(p)
    _add_common(p)
    p.add_argument("--teacher", help="teacher checkpoint (manifest path)")
    p.add_argument("--cache", help="teacher logit cache (manifest path)")
    p.add_argument("--sizes", type=_argparse_type("sizes"),
                   help=f"comma-separated subset sizes (default {DEFAULT_SIZES})")
    p.add_argument("--seeds", type=_argparse_type("seeds"),
                   help="seed count, or comma-separated seed list (default 3)")
    _add_student_flags(p)
    p.set_defaults(func=cmd_lowdata)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - single boundary for exit-code mapping
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
