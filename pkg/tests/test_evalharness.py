"""Tests for the evaluation harness: metrics, the sweep, and the report writers."""

import datetime as dt
import json
import hashlib
import math

import numpy as np
import pytest

from cellcast import (
    EvalError,
    EvalReport,
    HoltWintersForecaster,
    LmaConfig,
    SeasonalNaiveForecaster,
    SeriesPanel,
    SplitSpec,
    TrainConfig,
    TrainedModelForecaster,
    assemble_covariates,
    rmsle_per_series,
    rmsle_pooled,
    split_panel,
    stability_std,
    sweep,
    train,
    write_report_csvs,
    write_svg_plots,
)
from cellcast.evalharness import THREADS_ENV_VAR, provenance_payload, thread_count, write_provenance


def oracle_rmsle_rows(actual, predicted):
    """Plain-Python transcription: per-row root mean squared log1p error."""
    rows = []
    for a_row, p_row in zip(actual, predicted):
        total = 0.0
        for a, p in zip(a_row, p_row):
            d = math.log1p(p) - math.log1p(a)
            total += d * d
        rows.append(math.sqrt(total / len(a_row)))
    return rows


def oracle_rmsle_pooled(actual, predicted):
    total = 0.0
    for a_row, p_row in zip(actual, predicted):
        row = 0.0
        for a, p in zip(a_row, p_row):
            d = math.log1p(p) - math.log1p(a)
            row += d * d
        total += row / len(a_row)
    return math.sqrt(total / len(actual))


class TestMetrics:
    def test_pinned_values(self):
        """Hand-computable cases fix the log1p convention and the pooling."""
        assert rmsle_pooled(np.array([[0.0]]), np.array([[math.e - 1.0]])) == 1.0
        np.testing.assert_allclose(
            rmsle_pooled(np.array([[0.0, 0.0]]), np.array([[math.e - 1.0, math.e**2 - 1.0]])),
            math.sqrt(2.5),
            rtol=1e-12,
        )
        assert rmsle_pooled(np.array([[3.0, 4.0]]), np.array([[3.0, 4.0]])) == 0.0
        assert stability_std(np.array([1.0, 3.0])) == 1.0
        assert stability_std(np.array([2.0])) == 0.0

    def test_matches_python_oracle(self):
        """Both metrics agree with the loop-and-math transcription to 1e-12."""
        rng = np.random.default_rng(2024)
        for _ in range(100):
            n = int(rng.integers(1, 12))
            h = int(rng.integers(1, 15))
            a = rng.uniform(0.0, 5000.0, (n, h))
            p = rng.uniform(0.0, 5000.0, (n, h))
            np.testing.assert_allclose(
                rmsle_pooled(a, p), oracle_rmsle_pooled(a, p), rtol=1e-12
            )
            np.testing.assert_allclose(
                rmsle_per_series(a, p), oracle_rmsle_rows(a, p), rtol=1e-12
            )

    def test_symmetry_is_bit_exact(self):
        """Swapping actual and predicted leaves both metrics bit-identical."""
        rng = np.random.default_rng(8)
        a = rng.uniform(0.0, 100.0, (6, 9))
        p = rng.uniform(0.0, 100.0, (6, 9))
        assert rmsle_pooled(a, p) == rmsle_pooled(p, a)
        np.testing.assert_array_equal(rmsle_per_series(a, p), rmsle_per_series(p, a))

    def test_pooling_identity(self):
        """pooled^2 equals the mean of squared per-series values."""
        rng = np.random.default_rng(9)
        for _ in range(25):
            n = int(rng.integers(1, 10))
            h = int(rng.integers(1, 12))
            a = rng.uniform(0.0, 900.0, (n, h))
            p = rng.uniform(0.0, 900.0, (n, h))
            rows = rmsle_per_series(a, p)
            np.testing.assert_allclose(
                rmsle_pooled(a, p) ** 2, np.mean(rows**2), rtol=1e-12
            )

    def test_validation(self):
        good = np.ones((2, 3))
        with pytest.raises(EvalError):
            rmsle_pooled(good, np.ones((2, 4)))
        with pytest.raises(EvalError):
            rmsle_pooled(np.ones(3), np.ones(3))
        with pytest.raises(EvalError):
            rmsle_pooled(good, -good)
        with pytest.raises(EvalError):
            rmsle_pooled(good * np.nan, good)
        with pytest.raises(EvalError):
            stability_std(np.array([]))
        with pytest.raises(EvalError):
            stability_std(np.array([1.0, np.inf]))


class TestThreadCount:
    def test_default_and_overrides(self, monkeypatch):
        """Unset means 1 worker; positive integers pass through; floors at 1."""
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert thread_count() == 1
        monkeypatch.setenv(THREADS_ENV_VAR, "4")
        assert thread_count() == 4
        monkeypatch.setenv(THREADS_ENV_VAR, "0")
        assert thread_count() == 1
        monkeypatch.setenv(THREADS_ENV_VAR, "-3")
        assert thread_count() == 1
        monkeypatch.setenv(THREADS_ENV_VAR, "two")
        with pytest.raises(EvalError):
            thread_count()


def weekly_panel(n_series=6, n_steps=40, seed=201):
    rng = np.random.default_rng(seed)
    t = np.arange(n_steps)
    rows = []
    for _ in range(n_series):
        level = rng.uniform(100.0, 400.0)
        amp = rng.uniform(20.0, 60.0)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        x = level + amp * np.sin(2.0 * math.pi * t / 7.0 + phase)
        x += rng.normal(0.0, 2.0, n_steps)
        rows.append(np.maximum(x, 0.0))
    ids = tuple(f"s{i:02d}" for i in range(n_series))
    return SeriesPanel(ids, dt.date(2021, 1, 1), np.stack(rows))


class OracleForecaster:
    """Returns the true future values; the sweep should score it at exactly zero."""

    def __init__(self, test_values):
        self.test_values = test_values

    def forecast_panel(self, train_panel, horizon, seed_ids=(0,)):
        return self.test_values[:, :horizon]

    def describe(self):
        return {"kind": "oracle"}


class BrokenForecaster:
    def forecast_panel(self, train_panel, horizon, seed_ids=(0,)):
        raise RuntimeError("boom")

    def describe(self):
        return {"kind": "broken"}


class ShapeLiar:
    def forecast_panel(self, train_panel, horizon, seed_ids=(0,)):
        return np.ones((1, horizon))

    def describe(self):
        return {"kind": "liar"}


class TestSweep:
    def setup_method(self):
        self.panel = weekly_panel()
        self.split = SplitSpec(pred_start=36, pred_end=40)
        self.train_panel, self.test_panel = split_panel(self.panel, self.split)

    def test_oracle_model_scores_zero(self):
        """A forecaster that emits the true values gets zero pooled RMSLE and stability."""
        report = sweep(
            {"oracle": OracleForecaster(self.test_panel.values)},
            self.panel,
            self.split,
            steps=(1, 3, 5),
        )
        np.testing.assert_array_equal(report.pooled, np.zeros((1, 3)))
        np.testing.assert_array_equal(report.stability, np.zeros((1, 3)))
        np.testing.assert_array_equal(report.per_series, np.zeros((1, 6, 3)))
        assert report.models == ("oracle",)
        assert report.failures == {}

    def test_report_is_per_step_truncation_of_one_forecast(self):
        """Each step scores the first s columns of the max-step forecast, so adding
        later steps never changes earlier columns."""
        naive = {"naive": SeasonalNaiveForecaster(season=7)}
        short = sweep(naive, self.panel, self.split, steps=(2, 4))
        full = sweep(naive, self.panel, self.split, steps=(2, 4, 5))
        np.testing.assert_array_equal(short.pooled, full.pooled[:, :2])
        np.testing.assert_array_equal(short.stability, full.stability[:, :2])
        np.testing.assert_array_equal(short.per_series, full.per_series[:, :, :2])

    def test_pooled_column_matches_direct_metric(self):
        """The pooled matrix reproduces rmsle_pooled on the truncated forecasts."""
        naive = SeasonalNaiveForecaster(season=7)
        report = sweep({"naive": naive}, self.panel, self.split, steps=(3, 5))
        pred = naive.forecast_panel(self.train_panel, 5)
        pred = np.maximum(pred, 0.0)
        actual = self.test_panel.values
        for k, s in enumerate((3, 5)):
            np.testing.assert_allclose(
                report.pooled[0, k], rmsle_pooled(actual[:, :s], pred[:, :s]), rtol=1e-15
            )
            np.testing.assert_allclose(
                report.stability[0, k], stability_std(rmsle_per_series(actual[:, :s], pred[:, :s])), rtol=1e-15
            )

    def test_failures_are_isolated(self):
        """A raising model lands in failures; the others are still scored."""
        report = sweep(
            {
                "naive": SeasonalNaiveForecaster(season=7),
                "broken": BrokenForecaster(),
                "liar": ShapeLiar(),
            },
            self.panel,
            self.split,
            steps=(2, 5),
        )
        assert report.models == ("naive",)
        assert report.failures["broken"] == "RuntimeError: boom"
        assert report.failures["liar"].startswith("EvalError:")
        assert report.provenance["failures"] == report.failures
        assert set(report.provenance["models"]) == {"naive", "broken", "liar"}

    def test_all_models_failing_gives_empty_report(self):
        report = sweep({"broken": BrokenForecaster()}, self.panel, self.split, steps=(2,))
        assert report.models == ()
        assert report.pooled.shape == (0, 1)
        assert list(report.failures) == ["broken"]

    def test_negative_predictions_are_clamped(self):
        """Holt-Winters may go below zero; the sweep clamps before scoring."""

        class NegativeForecaster:
            def forecast_panel(self, train_panel, horizon, seed_ids=(0,)):
                return np.full((train_panel.n_series, horizon), -5.0)

            def describe(self):
                return {"kind": "negative"}

        report = sweep({"neg": NegativeForecaster()}, self.panel, self.split, steps=(2,))
        assert report.models == ("neg",)
        zero_pred = np.zeros((6, 2))
        np.testing.assert_allclose(
            report.pooled[0, 0], rmsle_pooled(self.test_panel.values[:, :2], zero_pred), rtol=1e-15
        )

    def test_sweep_validation(self):
        models = {"naive": SeasonalNaiveForecaster(season=7)}
        with pytest.raises(EvalError):
            sweep(models, self.panel, self.split, steps=())
        with pytest.raises(EvalError):
            sweep(models, self.panel, self.split, steps=(3, 3))
        with pytest.raises(EvalError):
            sweep(models, self.panel, self.split, steps=(0, 2))
        with pytest.raises(EvalError):
            sweep(models, self.panel, self.split, steps=(2, 9))  # beyond the test range
        with pytest.raises(EvalError):
            sweep({}, self.panel, self.split, steps=(2,))

    def test_accessors(self):
        report = sweep(
            {"naive": SeasonalNaiveForecaster(season=7), "hw": HoltWintersForecaster()},
            self.panel,
            self.split,
            steps=(2, 4),
        )
        assert set(report.models) == {"naive", "hw"}
        for name in report.models:
            np.testing.assert_array_equal(
                report.model_pooled(name), report.pooled[report.models.index(name)]
            )
        np.testing.assert_allclose(report.pooled_mean, report.pooled.mean(axis=1))


class TestTrainedModelForecaster:
    def make_model(self, with_lma=True, seed=31):
        panel = weekly_panel()
        train_panel, _ = split_panel(panel, SplitSpec(36, 40))
        cfg = TrainConfig(
            context_length=7,
            horizon=5,
            epochs=1,
            batch_size=8,
            hidden_size=6,
            num_layers=1,
            seed=seed,
            windows_per_series=4,
        )
        lma_cfg = LmaConfig(window_len=7, horizon=5) if with_lma else None
        cov = assemble_covariates(train_panel, lma_cfg, 5) if with_lma else None
        model = train(train_panel, cov, cfg, lma_config=lma_cfg)
        return model, train_panel

    def test_forecasts_whole_panel_deterministically(self):
        model, train_panel = self.make_model()
        fc = TrainedModelForecaster(model, n_samples=10)
        a = fc.forecast_panel(train_panel, 5, (3,))
        b = fc.forecast_panel(train_panel, 5, (3,))
        assert a.shape == (6, 5)
        np.testing.assert_array_equal(a, b)
        c = fc.forecast_panel(train_panel, 5, (4,))
        assert not np.array_equal(a, c)

    def test_thread_pool_does_not_change_results(self, monkeypatch):
        """Per-series substreams make the pooled run bit-identical to the serial one."""
        model, train_panel = self.make_model()
        fc = TrainedModelForecaster(model, n_samples=8)
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        serial = fc.forecast_panel(train_panel, 5, (2,))
        monkeypatch.setenv(THREADS_ENV_VAR, "4")
        pooled = fc.forecast_panel(train_panel, 5, (2,))
        np.testing.assert_array_equal(serial, pooled)

    def test_statistic_mean_differs_from_median(self):
        model, train_panel = self.make_model()
        med = TrainedModelForecaster(model, n_samples=9, statistic="median")
        avg = TrainedModelForecaster(model, n_samples=9, statistic="mean")
        assert not np.array_equal(
            med.forecast_panel(train_panel, 5, (2,)), avg.forecast_panel(train_panel, 5, (2,))
        )

    def test_horizon_cap(self):
        model, train_panel = self.make_model()
        fc = TrainedModelForecaster(model, n_samples=4)
        with pytest.raises(EvalError, match="horizon"):
            fc.forecast_panel(train_panel, 6, (0,))

    def test_channel_mismatch_is_reported(self):
        """A model whose channels cannot be rebuilt from its configs is rejected."""
        from cellcast import TrainedModel
        from cellcast.deepar import init_params
        from cellcast import substream

        model, train_panel = self.make_model(with_lma=False)
        # hand-build a model that expects one channel but carries no channel config
        params = init_params(2, 4, 1, substream(0))
        bad = TrainedModel(params, model.train_config, None, ())
        fc = TrainedModelForecaster(bad, n_samples=4)
        with pytest.raises(EvalError, match="channels"):
            fc.forecast_panel(train_panel, 5, (0,))

    def test_describe_carries_configs(self):
        model, _ = self.make_model()
        desc = TrainedModelForecaster(model, n_samples=7).describe()
        assert desc["kind"] == "deepar"
        assert desc["n_samples"] == 7
        assert desc["train_config"]["hidden_size"] == 6
        assert desc["lma_config"]["window_len"] == 7
        assert desc["lma_config"]["features"] == ["mean", "std"]
        naive_desc = SeasonalNaiveForecaster(season=7).describe()
        assert naive_desc == {"kind": "seasonal_naive", "season": 7}


class TestWriters:
    def make_report(self):
        panel = weekly_panel()
        split = SplitSpec(36, 40)
        return sweep(
            {"naive": SeasonalNaiveForecaster(season=7), "hw": HoltWintersForecaster()},
            panel,
            split,
            steps=(2, 3, 5),
            seed=4,
        )

    def test_csv_layout_and_values(self, tmp_path):
        """Tables are step-by-model with a trailing mean row, values round-trip exact."""
        report = self.make_report()
        pooled_path = str(tmp_path / "pooled.csv")
        stab_path = str(tmp_path / "stability.csv")
        write_report_csvs(report, pooled_path, stab_path)
        for path, matrix, means in (
            (pooled_path, report.pooled, report.pooled_mean),
            (stab_path, report.stability, report.stability_mean),
        ):
            with open(path) as fh:
                lines = fh.read().splitlines()
            assert lines[0] == "step," + ",".join(report.models)
            assert len(lines) == 1 + len(report.steps) + 1
            for k, line in enumerate(lines[1:-1]):
                cells = line.split(",")
                assert cells[0] == str(report.steps[k])
                for j, cell in enumerate(cells[1:]):
                    assert float(cell) == matrix[j, k]
            mean_cells = lines[-1].split(",")
            assert mean_cells[0] == "mean"
            for j, cell in enumerate(mean_cells[1:]):
                assert float(cell) == means[j]

    def test_writers_are_deterministic(self, tmp_path):
        """Writing the same report twice produces identical bytes for all artifacts."""
        report = self.make_report()
        names = ["p1.csv", "s1.csv", "p2.csv", "s2.csv"]
        write_report_csvs(report, str(tmp_path / names[0]), str(tmp_path / names[1]))
        write_report_csvs(report, str(tmp_path / names[2]), str(tmp_path / names[3]))
        assert (tmp_path / names[0]).read_bytes() == (tmp_path / names[2]).read_bytes()
        assert (tmp_path / names[1]).read_bytes() == (tmp_path / names[3]).read_bytes()
        write_provenance(report, str(tmp_path / "prov1.json"), extra={"command": "x"})
        write_provenance(report, str(tmp_path / "prov2.json"), extra={"command": "x"})
        assert (tmp_path / "prov1.json").read_bytes() == (tmp_path / "prov2.json").read_bytes()
        write_svg_plots(report, str(tmp_path / "c1.svg"), str(tmp_path / "c2.svg"))
        write_svg_plots(report, str(tmp_path / "c3.svg"), str(tmp_path / "c4.svg"))
        assert (tmp_path / "c1.svg").read_bytes() == (tmp_path / "c3.svg").read_bytes()

    def test_provenance_hash_is_self_consistent(self, tmp_path):
        """config_sha256 is the hash of the payload without the hash field."""
        report = self.make_report()
        path = str(tmp_path / "prov.json")
        write_provenance(report, path, extra={"command": "sweep"})
        payload = json.load(open(path))
        digest = payload.pop("config_sha256")
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        assert digest == hashlib.sha256(canonical.encode()).hexdigest()
        assert payload["command"] == "sweep"
        assert payload["provenance"]["seed"] == 4
        assert payload["provenance"]["split"] == {"pred_start": 36, "pred_end": 40}
        assert provenance_payload(report, {"command": "sweep"})["config_sha256"] == digest

    def test_svg_contains_a_curve_per_model(self, tmp_path):
        report = self.make_report()
        pooled_path = str(tmp_path / "pooled.svg")
        write_svg_plots(report, pooled_path, str(tmp_path / "stab.svg"))
        svg = open(pooled_path).read()
        assert svg.startswith("<svg ")
        assert svg.count("<polyline") == len(report.models)
        for name in report.models:
            assert name in svg


class TestEvalReportValidation:
    def test_shape_checks(self):
        with pytest.raises(EvalError):
            EvalReport(
                steps=(1, 2),
                models=("m",),
                series_ids=("a",),
                pooled=np.zeros((1, 3)),
                stability=np.zeros((1, 2)),
                per_series=np.zeros((1, 1, 2)),
                failures={},
                provenance={},
            )
        with pytest.raises(EvalError):
            EvalReport(
                steps=(1,),
                models=("m",),
                series_ids=("a",),
                pooled=np.array([[np.nan]]),
                stability=np.zeros((1, 1)),
                per_series=np.zeros((1, 1, 1)),
                failures={},
                provenance={},
            )
