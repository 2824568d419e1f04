"""Training loop behaviour, supervision modes, early stopping, and metrics."""

import dataclasses

import numpy as np
import pytest

from kellyfe import data, trainer
from kellyfe.network import LayerSpec, init_he


def _separable_sets(seed=0):
    train_set = data.with_synthesized_priors(
        data.generate(2, 2, 200, [0.5, 0.5], 6.0, seed=seed), 0.1
    )
    val_set = data.with_synthesized_priors(
        data.generate(2, 2, 100, [0.5, 0.5], 6.0, seed=seed + 1), 0.1
    )
    return train_set, val_set


class TestTrain:
    def test_cross_entropy_on_separable_data(self):
        train_set, val_set = _separable_sets()
        cfg = trainer.TrainConfig(loss="ce", mode="grnp", max_iterations=600, seed=3)
        params, history = trainer.train(cfg, train_set, val_set)
        emas = np.array([h.val_loss_ema for h in history])
        assert np.all(np.diff(emas) <= 1e-9)  # monotone EMA on this geometry
        report = trainer.evaluate(params, train_set)
        assert np.trace(report.confusion) == report.confusion.sum()  # accuracy 1.0

    def test_efe_fully_unsupervised_terminates_finite(self):
        train_set, val_set = _separable_sets(seed=5)
        cfg = trainer.TrainConfig(loss="efe", mode="ngnp", max_iterations=200, patience=200, seed=0)
        _, history = trainer.train(cfg, train_set, val_set)
        assert len(history) == 200
        assert all(np.isfinite(h.train_loss) and np.isfinite(h.val_loss) for h in history)
        assert all(h.expected_complexity_term >= 0.0 for h in history)

    def test_grnp_uniform_priors_stay_finite(self):
        train_set, val_set = _separable_sets(seed=6)
        cfg = trainer.TrainConfig(loss="efe", mode="grnp", max_iterations=200, patience=200, seed=1)
        _, history = trainer.train(cfg, train_set, val_set)
        assert len(history) == 200
        assert all(np.isfinite(h.train_loss) for h in history)

    def test_patience_stops_after_flat_ema(self):
        # zero features force uniform posteriors; the expected-free-energy
        # gradient then vanishes identically and nothing ever improves
        base = data.generate(2, 2, 40, [0.5, 0.5], 0.0, seed=7)
        frozen = dataclasses.replace(base, features=np.zeros_like(base.features))
        cfg = trainer.TrainConfig(
            loss="efe", mode="ngnp", patience=1, max_iterations=100, batch_size=40, seed=0
        )
        _, history = trainer.train(cfg, frozen, frozen)
        assert len(history) == 2  # patience + 1
        assert history[0].train_loss == history[1].train_loss

    def test_max_iterations_bound(self):
        train_set, val_set = _separable_sets(seed=8)
        cfg = trainer.TrainConfig(loss="ce", mode="grnp", max_iterations=17, seed=0)
        _, history = trainer.train(cfg, train_set, val_set)
        assert len(history) == 17
        assert [h.iteration for h in history] == list(range(1, 18))

    def test_determinism_bitwise(self):
        train_set, val_set = _separable_sets(seed=9)
        cfg = trainer.TrainConfig(loss="efe", mode="grpr", max_iterations=60, seed=11)
        params_a, history_a = trainer.train(cfg, train_set, val_set)
        params_b, history_b = trainer.train(cfg, train_set, val_set)
        assert history_a == history_b
        for la, lb in zip(params_a.layers, params_b.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)
            np.testing.assert_array_equal(la.biases, lb.biases)

    def test_incompatible_loss_mode(self):
        train_set, val_set = _separable_sets(seed=10)
        for loss in ("ce", "wce", "focal", "wfocal", "dice", "lovasz"):
            for mode in ("ngpr", "ngnp"):
                cfg = trainer.TrainConfig(loss=loss, mode=mode, max_iterations=5)
                with pytest.raises(trainer.IncompatibleConfigError):
                    trainer.train(cfg, train_set, val_set)

    def test_every_supervised_loss_runs(self):
        train_set, val_set = _separable_sets(seed=12)
        for loss in ("wce", "focal", "wfocal", "dice", "lovasz"):
            cfg = trainer.TrainConfig(loss=loss, mode="grnp", max_iterations=25, seed=2)
            _, history = trainer.train(cfg, train_set, val_set)
            assert len(history) == 25
            assert all(np.isfinite(h.train_loss) for h in history)
            assert all(h.uncertainty_term is None for h in history)

    def test_mismatched_sets_rejected(self):
        train_set, _ = _separable_sets(seed=13)
        other = data.with_synthesized_priors(
            data.generate(3, 2, 60, [0.4, 0.3, 0.3], 2.0, seed=0), 0.5
        )
        cfg = trainer.TrainConfig(loss="ce", mode="grnp", max_iterations=5)
        with pytest.raises(ValueError):
            trainer.train(cfg, train_set, other)


class TestEvaluate:
    def _all_zero_params(self, n_features, n_classes):
        params = init_he([LayerSpec(n_features, n_classes, activation="linear")], seed=0)
        params.layers[0].weights = np.zeros_like(params.layers[0].weights)
        return params

    def test_all_one_class_predictor(self):
        # logits all zero -> argmax ties resolve to class 0
        ds = data.generate(2, 2, 100, [0.9, 0.1], 3.0, seed=1)
        params = self._all_zero_params(2, 2)
        report = trainer.evaluate(params, ds)
        np.testing.assert_allclose(report.recall, [1.0, 0.0])
        np.testing.assert_allclose(report.precision, [0.9, 0.0])
        assert report.precision_defined.tolist() == [True, False]
        assert report.recall_defined.tolist() == [True, True]

    def test_confusion_rows_are_class_counts(self):
        ds = data.generate(3, 2, 300, [0.5, 0.3, 0.2], 2.0, seed=2)
        params = init_he(
            [LayerSpec(2, 8), LayerSpec(8, 3, activation="linear")], seed=3
        )
        report = trainer.evaluate(params, ds)
        np.testing.assert_array_equal(
            report.confusion.sum(axis=1), np.bincount(ds.true_labels, minlength=3)
        )

    def test_perfect_predictor_metrics(self):
        train_set, val_set = _separable_sets(seed=14)
        cfg = trainer.TrainConfig(loss="ce", mode="grnp", max_iterations=500, seed=4)
        params, _ = trainer.train(cfg, train_set, val_set)
        report = trainer.evaluate(params, val_set)
        if np.trace(report.confusion) == report.confusion.sum():
            np.testing.assert_allclose(report.precision, 1.0)
            np.testing.assert_allclose(report.recall, 1.0)
            np.testing.assert_allclose(report.dice, 1.0)
            np.testing.assert_allclose(report.jaccard, 1.0)
            assert report.macro_f1 == 1.0

    def test_report_serializes(self):
        import json

        ds = data.generate(2, 2, 50, [0.5, 0.5], 2.0, seed=5)
        params = self._all_zero_params(2, 2)
        report = trainer.evaluate(params, ds)
        doc = json.loads(json.dumps(report.to_dict()))
        assert doc["confusion"][0][0] == report.confusion[0, 0]


class TestHistoryIO:
    def test_round_trip(self, tmp_path):
        train_set, val_set = _separable_sets(seed=15)
        cfg = trainer.TrainConfig(loss="efe", mode="grpr", max_iterations=12, seed=6)
        _, history = trainer.train(cfg, train_set, val_set)
        path = tmp_path / "history.csv"
        trainer.write_history(history, path)
        assert trainer.read_history(path) == history

    def test_non_efe_terms_empty(self, tmp_path):
        train_set, val_set = _separable_sets(seed=16)
        cfg = trainer.TrainConfig(loss="ce", mode="grnp", max_iterations=3, seed=7)
        _, history = trainer.train(cfg, train_set, val_set)
        path = tmp_path / "history.csv"
        trainer.write_history(history, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "iteration,train_loss,val_loss,val_loss_ema,uncertainty_term,expected_complexity_term"
        assert all(line.endswith(",,") for line in lines[1:])


class TestConfig:
    def test_defaults_match_fixed_values(self):
        cfg = trainer.TrainConfig()
        assert cfg.gamma_mod == 2.0
        assert cfg.alpha_lr == 0.001
        assert cfg.beta_fm == 0.90
        assert cfg.beta_sm == 0.99
        assert cfg.max_iterations == 15000
        assert cfg.patience == 100
        assert cfg.ema_decay == 0.9

    def test_rejects_unknown_names(self):
        with pytest.raises(ValueError):
            trainer.TrainConfig(loss="mse")
        with pytest.raises(ValueError):
            trainer.TrainConfig(mode="full")
        with pytest.raises(ValueError):
            trainer.TrainConfig(patience=0)

    def test_config_from_dict_rejects_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown config keys"):
            trainer.config_from_dict({"loss": "ce", "learning_rate": 0.1})
        cfg = trainer.config_from_dict({"loss": "ce", "hidden_widths": [4, 4]})
        assert cfg.hidden_widths == (4, 4)
