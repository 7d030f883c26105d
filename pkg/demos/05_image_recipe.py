"""The full-scale recipe on a real handwritten-digit corpus.

Trains the reference pair end to end: a 784-1200-1200-10 teacher for 100
epochs, then a 784-500-50-10 variational student for 100 epochs against
the cached teacher logits, pruned at the default threshold.  Expect a
teacher around 1.5% test error and a student matching it within about a
percent while keeping only a few percent of its weights.

Point --data-dir at a directory holding the four classic IDX files
(gunzipped):

    train-images-idx3-ubyte   train-labels-idx1-ubyte
    t10k-images-idx3-ubyte    t10k-labels-idx1-ubyte

    python3 demos/05_image_recipe.py --data-dir ~/data/digits --out runs/full

This is a long run on a CPU (hours, not minutes); pass smaller --epochs
for a quick look.  The command line drives the identical path:

    sparsedistill train-teacher --train-images ... --out runs/full
    sparsedistill train-student --variant st-svd --teacher ... --cache ...
"""

import argparse
import sys
from pathlib import Path

from sparsedistill import (LossConfig, StudentTrainConfig, TeacherConfig,
                           count_parameters, evaluate_student, load_idx,
                           precompute_logits, resolve_variant, save_checkpoint,
                           save_logit_cache, save_student, train_student,
                           train_teacher)

FILES = {
    "train-images-idx3-ubyte": "train-labels-idx1-ubyte",
    "t10k-images-idx3-ubyte": "t10k-labels-idx1-ubyte",
}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", required=True, type=Path)
    ap.add_argument("--out", type=Path, default=Path("runs/full"))
    ap.add_argument("--variant", default="st-svd",
                    choices=["simple", "kd", "kd-svd", "kd-vbd", "st-svd", "st-vbd"])
    ap.add_argument("--epochs", type=int, default=100,
                    help="epochs for both networks (default 100)")
    ap.add_argument("--tau", type=float, default=3.0)
    args = ap.parse_args(argv)

    missing = [n for pair in FILES.items() for n in pair
               if not (args.data_dir / n).is_file()]
    if missing:
        ap.error(f"missing IDX files under {args.data_dir}: {', '.join(missing)} "
                 "(download the classic digit corpus and gunzip it there)")

    train_ds = load_idx(args.data_dir / "train-images-idx3-ubyte",
                        args.data_dir / "train-labels-idx1-ubyte")
    test_ds = load_idx(args.data_dir / "t10k-images-idx3-ubyte",
                       args.data_dir / "t10k-labels-idx1-ubyte")
    args.out.mkdir(parents=True, exist_ok=True)

    # -- teacher ------------------------------------------------------------
    t_cfg = TeacherConfig(arch=[784, 1200, 1200, 10], epochs=args.epochs,
                          batch_size=128, lr=1e-3, seed=0)
    teacher, t_recs = train_teacher(train_ds, t_cfg, test_ds=test_ds)
    print(f"teacher: {count_parameters(teacher)} parameters, "
          f"test error {100 * t_recs[-1]['test_error']:.2f}%")
    save_checkpoint(teacher, args.out / "teacher.ckpt")
    cache = precompute_logits(teacher, train_ds)
    save_logit_cache(cache, args.out / "cache.ckpt")

    # -- student ------------------------------------------------------------
    loss_cfg = resolve_variant(args.variant, LossConfig(
        temperature=2.0, lambda_t=2.0, warmup_epochs=10))
    s_cfg = StudentTrainConfig(arch=[784, 500, 50, 10], epochs=args.epochs,
                               batch_size=512, lr=1e-3, seed=0, tau=args.tau)
    logits = None if loss_cfg.lambda_t == 0.0 else cache.logits
    weights = teacher.weights if loss_cfg.lambda_g != 0.0 else None
    student, s_recs = train_student(train_ds, logits, loss_cfg, s_cfg,
                                    teacher_weights=weights, test_ds=test_ds,
                                    log_dir=args.out)
    save_student(student, args.out / "student.ckpt", tau=args.tau)

    # -- outcome ------------------------------------------------------------
    summary = evaluate_student(student, test_ds, args.tau)
    layers = "-".join(f"{v:.1f}" for v in summary["per_layer_sparsity"])
    print(f"student ({args.variant}): test error {summary['test_error_pct']:.2f}%, "
          f"kept 1 weight in {summary['r_s']:.1f}, "
          f"per-layer sparsity {layers}%")
    print(f"artifacts under {args.out}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
