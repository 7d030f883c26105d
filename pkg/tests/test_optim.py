"""Optimizer behavior, the training loop's contracts, and the data-size sweep."""

from dataclasses import asdict, replace

import numpy as np
import pytest

from sparsedistill.autograd import Tensor
from sparsedistill.data import subset_indices
from sparsedistill.errors import ConsistencyError, TrainingError, UsageError
from sparsedistill.losses import LossConfig, resolve_variant
from sparsedistill.optim import (Adam, StudentTrainConfig, _clip_global_norm,
                                 evaluate_student, lowdata_sweep, summarize_sweep,
                                 train_student)
from sparsedistill.student import init_student, student_digest

from conftest import make_blobs


def blob_dataset(n=60, d=8, classes=3, seed=0):
    return make_blobs(n, d, classes, seed)


def quick_cfg(**overrides):
    base = dict(arch=[8, 6, 3], epochs=2, batch_size=16, lr=1e-3, seed=0, tau=3.0)
    return StudentTrainConfig(**{**base, **overrides})


class TestAdam:
    def test_missing_gradient_leaves_parameter_untouched(self):
        p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
        opt = Adam([p], lr=0.1)
        opt.step()
        np.testing.assert_array_equal(p.data, [1.0, 2.0])

    def test_first_step_moves_by_learning_rate_toward_sign(self):
        p = Tensor(np.array([0.0, 0.0]), requires_grad=True)
        p.grad = np.array([3.0, -0.5])
        Adam([p], lr=0.01).step()
        np.testing.assert_allclose(p.data, [-0.01, 0.01], rtol=1e-6)

    def test_converges_on_quadratic(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        opt = Adam([p], lr=0.05)
        for _ in range(200):
            opt.zero_grad()
            (p * p).sum().backward()
            opt.step()
        assert abs(p.data[0]) < 1e-2

    def test_bias_correction_keeps_early_steps_full_size(self):
        p = Tensor(np.array([0.0]), requires_grad=True)
        p.grad = np.array([1e-6])
        Adam([p], lr=0.01).step()
        assert 0.95 * 0.01 <= abs(p.data[0]) <= 0.01

    def test_nonfinite_gradient_raises_with_index(self):
        a = Tensor(np.array([1.0]), requires_grad=True)
        b = Tensor(np.array([1.0]), requires_grad=True)
        a.grad = np.array([0.5])
        b.grad = np.array([np.nan])
        with pytest.raises(TrainingError) as err:
            Adam([a, b], lr=0.01).step()
        assert err.value.param == 1

    def test_updates_are_in_place(self):
        p = Tensor(np.array([1.0, 1.0]), requires_grad=True)
        buf = p.data
        p.grad = np.array([1.0, 1.0])
        Adam([p], lr=0.01).step()
        assert p.data is buf

    def test_zero_grad_resets_to_none(self):
        p = Tensor(np.array([1.0]), requires_grad=True)
        p.grad = np.array([2.0])
        opt = Adam([p])
        opt.zero_grad()
        assert p.grad is None

    def test_deterministic_trajectory(self):
        def run():
            p = Tensor(np.array([0.7, -0.3]), requires_grad=True)
            opt = Adam([p], lr=0.02)
            for _ in range(50):
                opt.zero_grad()
                ((p - 2.0) * (p - 2.0)).sum().backward()
                opt.step()
            return p.data.copy()

        np.testing.assert_array_equal(run(), run())


class TestGradientClipping:
    def test_scales_joint_norm_down_to_limit(self):
        a = Tensor(np.array([0.0]), requires_grad=True)
        b = Tensor(np.array([0.0]), requires_grad=True)
        a.grad = np.array([3.0])
        b.grad = np.array([4.0])
        _clip_global_norm([a, b], 2.5)
        np.testing.assert_allclose(a.grad, [1.5])
        np.testing.assert_allclose(b.grad, [2.0])

    def test_leaves_small_gradients_alone(self):
        a = Tensor(np.array([0.0]), requires_grad=True)
        a.grad = np.array([0.3, -0.4])
        _clip_global_norm([a], 2.5)
        np.testing.assert_array_equal(a.grad, [0.3, -0.4])

    def test_skips_missing_gradients(self):
        a = Tensor(np.array([0.0]), requires_grad=True)
        b = Tensor(np.array([0.0]), requires_grad=True)
        a.grad = np.array([6.0, 8.0])
        _clip_global_norm([a, b], 5.0)
        np.testing.assert_allclose(a.grad, [3.0, 4.0])
        assert b.grad is None


class TestTrainStudent:
    def test_misaligned_cache_is_rejected(self):
        ds = blob_dataset()
        logits = np.zeros((len(ds) - 1, 3))
        with pytest.raises(ConsistencyError):
            train_student(ds, logits, LossConfig(), quick_cfg())

    def test_hint_without_cache_is_rejected(self):
        ds = blob_dataset()
        with pytest.raises(UsageError):
            train_student(ds, None, LossConfig(lambda_t=2.0), quick_cfg())

    def test_group_norm_without_teacher_weights_is_rejected(self):
        ds = blob_dataset()
        cfg = LossConfig(lambda_t=0.0, lambda_g=0.01, bsr_variant="l1lq")
        with pytest.raises(UsageError):
            train_student(ds, None, cfg, quick_cfg())

    def test_record_structure(self):
        ds = blob_dataset()
        test = blob_dataset(n=30, seed=1)
        cfg = LossConfig(lambda_t=0.0, kl_variant="svd", warmup_epochs=0)
        net, records = train_student(ds, None, cfg, quick_cfg(epochs=3), test_ds=test)
        assert len(records) == 3
        assert [r["epoch"] for r in records] == [0, 1, 2]
        for r in records:
            for key in ("lambda_v_eff", "ce", "hint", "kl", "bsr", "total",
                        "r_s", "per_layer_sparsity", "test_error_pct"):
                assert key in r
            assert len(r["per_layer_sparsity"]) == 2
        assert len(net.layers) == 2

    def test_no_test_set_means_no_error_column(self):
        ds = blob_dataset()
        _, records = train_student(ds, None, LossConfig(lambda_t=0.0),
                                   quick_cfg(epochs=1))
        assert "test_error_pct" not in records[0]

    def test_loss_decreases_on_separable_data(self):
        ds = blob_dataset(n=120)
        cfg = LossConfig(lambda_t=0.0)
        _, records = train_student(ds, None, cfg, quick_cfg(epochs=8, lr=5e-3))
        assert records[-1]["ce"] < records[0]["ce"]

    def test_session_log_is_byte_identical_across_runs(self, tmp_path):
        ds = blob_dataset()
        logits = np.random.default_rng(3).normal(size=(len(ds), 3))
        cfg = resolve_variant("st-svd", LossConfig(warmup_epochs=2))
        teacher_w = [np.random.default_rng(4).normal(size=(8, 5)),
                     np.random.default_rng(5).normal(size=(5, 3))]
        for d in ("one", "two"):
            train_student(ds, logits, cfg, quick_cfg(), teacher_weights=teacher_w,
                          log_dir=tmp_path / d)
        a = (tmp_path / "one" / "session.jsonl").read_bytes()
        b = (tmp_path / "two" / "session.jsonl").read_bytes()
        assert a == b
        assert (tmp_path / "one" / "timing.jsonl").exists()

    def test_warmup_ramps_effective_weight(self):
        ds = blob_dataset()
        cfg = LossConfig(lambda_t=0.0, kl_variant="vbd", lambda_v_max=0.1,
                         warmup_epochs=4)
        _, records = train_student(ds, None, cfg, quick_cfg(epochs=3))
        assert records[0]["lambda_v_eff"] == 0.0
        assert records[2]["lambda_v_eff"] == pytest.approx(0.05)
        assert records[0]["lambda_v_eff"] < records[2]["lambda_v_eff"]

    def test_named_variant_equals_handbuilt_config(self):
        ds = blob_dataset()
        simple = resolve_variant("simple")
        manual = LossConfig(lambda_t=0.0, kl_variant=None, lambda_g=0.0)
        net_a, _ = train_student(ds, None, simple, quick_cfg())
        net_b, _ = train_student(ds, None, manual, quick_cfg())
        assert student_digest(net_a) == student_digest(net_b)

    def test_teacher_inputs_are_not_mutated(self):
        ds = blob_dataset()
        rng = np.random.default_rng(6)
        logits = rng.normal(size=(len(ds), 3))
        teacher_w = [rng.normal(size=(8, 5)), rng.normal(size=(5, 3))]
        logits_before = logits.copy()
        w_before = [w.copy() for w in teacher_w]
        cfg = resolve_variant("st-vbd", LossConfig(warmup_epochs=1))
        train_student(ds, logits, cfg, quick_cfg(epochs=1), teacher_weights=teacher_w)
        np.testing.assert_array_equal(logits, logits_before)
        for w, before in zip(teacher_w, w_before):
            np.testing.assert_array_equal(w, before)

    def test_gradient_clipping_changes_trajectory(self):
        ds = blob_dataset()
        cfg = LossConfig(lambda_t=0.0)
        net_a, _ = train_student(ds, None, cfg, quick_cfg(epochs=1))
        net_b, _ = train_student(ds, None, cfg, quick_cfg(epochs=1, grad_clip=1e-3))
        assert student_digest(net_a) != student_digest(net_b)


class TestEvaluateStudent:
    def test_repeat_evaluation_is_identical(self):
        ds = blob_dataset(n=40, seed=2)
        net = init_student([8, 6, 3], seed=0)
        a = evaluate_student(net, ds, tau=3.0)
        b = evaluate_student(net, ds, tau=3.0)
        assert a == b
        assert set(a) == {"test_error_pct", "per_layer_sparsity", "r_s", "tau"}
        assert a["tau"] == 3.0

    def test_fully_pruned_network_predicts_first_class(self):
        ds = make_blobs(100, 6, 10, seed=3)
        net = init_student([6, 5, 10], seed=0)
        for layer in net.layers:
            layer.theta[:] = 0.0
            layer.log_sigma2[:] = 0.0
            layer.bias[:] = 0.0
        with pytest.warns(UserWarning):
            scored = evaluate_student(net, ds, tau=3.0)
        assert scored["test_error_pct"] == pytest.approx(90.0)
        assert np.isinf(scored["r_s"])
        assert scored["per_layer_sparsity"] == [100.0, 100.0]


class TestLowdataSweep:
    def make_inputs(self):
        train = blob_dataset(n=90, seed=4)
        test = blob_dataset(n=30, seed=5)
        logits = np.random.default_rng(7).normal(size=(len(train), 3)) * 2
        loss_cfg = LossConfig(lambda_t=2.0, warmup_epochs=0)
        cfg = quick_cfg(epochs=1)
        return train, test, logits, loss_cfg, cfg

    def test_row_grid_covers_sizes_seeds_and_both_hints(self):
        train, test, logits, loss_cfg, cfg = self.make_inputs()
        rows = lowdata_sweep(train, test, logits, loss_cfg, cfg,
                             sizes=[30, 45], seeds=[0, 1])
        assert len(rows) == 2 * 2 * 2
        combos = {(r["size"], r["seed"], r["hint"]) for r in rows}
        assert combos == {(s, sd, h) for s in (30, 45) for sd in (0, 1)
                          for h in (True, False)}
        for r in rows:
            assert set(r) == {"size", "seed", "hint", "test_error_pct", "r_s"}

    def test_hint_off_rows_match_manual_zeroed_hint(self):
        train, test, logits, loss_cfg, cfg = self.make_inputs()
        rows = lowdata_sweep(train, test, logits, loss_cfg, cfg,
                             sizes=[30], seeds=[1])
        off_row = next(r for r in rows if not r["hint"])
        idx = subset_indices(train, 30, 1)
        sub = train.take(idx)
        manual_cfg = StudentTrainConfig(**{**asdict(cfg), "seed": 1})
        net, _ = train_student(sub, logits[idx], replace(loss_cfg, lambda_t=0.0),
                               manual_cfg)
        scored = evaluate_student(net, test, cfg.tau)
        assert off_row["test_error_pct"] == scored["test_error_pct"]
        assert off_row["r_s"] == scored["r_s"]


class TestSummarizeSweep:
    def test_population_statistics(self):
        rows = [{"size": 100, "hint": True, "test_error_pct": 2.0, "r_s": 1.0, "seed": 0},
                {"size": 100, "hint": True, "test_error_pct": 4.0, "r_s": 1.0, "seed": 1}]
        out = summarize_sweep(rows)
        assert len(out) == 1
        assert out[0]["mean_test_error_pct"] == pytest.approx(3.0)
        assert out[0]["std_test_error_pct"] == pytest.approx(1.0)
        assert out[0]["n"] == 2

    def test_groups_sorted_by_size_then_hint(self):
        rows = []
        for size in (1000, 100):
            for hint in (True, False):
                rows.append({"size": size, "hint": hint, "seed": 0,
                             "test_error_pct": 5.0, "r_s": 1.0})
        out = summarize_sweep(rows)
        assert [(g["size"], g["hint"]) for g in out] == [
            (100, False), (100, True), (1000, False), (1000, True)]
