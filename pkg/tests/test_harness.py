import csv
import math

import numpy as np
import pytest

from dpmestim.harness import (
    AGGREGATE_FIELDS,
    RESULT_FIELDS,
    CsvError,
    CsvSchema,
    ExperimentConfig,
    ResultRow,
    aggregate,
    emit_report,
    gen_logistic_data,
    gen_robust_data,
    load_csv,
    read_results,
    run_experiment,
)
from dpmestim.model import hypercube


class TestGenerators:
    def test_degenerate_robust(self):
        data, theta = gen_robust_data(50, 3, 0.0, 0.0, 1)
        assert np.all(data.y == 0) and np.all(theta == 0)

    def test_theta_norm(self):
        _, theta = gen_robust_data(10, 7, 2.5, 1.0, 3)
        assert abs(np.linalg.norm(theta) - 2.5) <= 1e-12

    def test_noise_variance(self):
        data, theta = gen_robust_data(100000, 3, 1.0, 0.7, 4)
        resid = data.y - data.X @ theta
        assert resid.var() == pytest.approx(2 * 0.7**2, rel=0.1)

    def test_logistic_symmetric(self):
        data, _ = gen_logistic_data(10000, 3, 0.0, 5)
        assert set(np.unique(data.y)) <= {-1.0, 1.0}
        assert np.mean(data.y == 1) == pytest.approx(0.5, abs=0.02)

    def test_logistic_signal(self):
        data, theta = gen_logistic_data(5000, 3, 5.0, 6)
        assert np.mean(np.sign(data.X @ theta) == data.y) > 0.5

    def test_seeded(self):
        a, _ = gen_robust_data(20, 2, 1.0, 1.0, 9)
        b, _ = gen_robust_data(20, 2, 1.0, 1.0, 9)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(a.y, b.y)


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestCsv:
    def test_round_trip(self, tmp_path):
        p = write(tmp_path / "a.csv", "a,b,y\n0.1,0.2,1.5\n-0.5,1.0,-2\n0,0,0\n")
        data = load_csv(p, CsvSchema(("a", "b"), "y"))
        np.testing.assert_array_equal(data.X, [[0.1, 0.2], [-0.5, 1.0], [0.0, 0.0]])
        np.testing.assert_array_equal(data.y, [1.5, -2.0, 0.0])

    def test_domain_violation_names_row(self, tmp_path):
        p = write(tmp_path / "a.csv", "a,y\n0.1,1\n1.5,1\n")
        with pytest.raises(CsvError, match="row 2") as exc:
            load_csv(p, CsvSchema(("a",), "y"))
        assert exc.value.row == 2

    def test_threshold_labels(self, tmp_path):
        p = write(tmp_path / "a.csv", "age,income\n0.2,52000\n0.5,40000\n-0.1,39999\n")
        data = load_csv(p, CsvSchema(("age",), "income", 40000.0))
        np.testing.assert_array_equal(data.y, [1.0, -1.0, -1.0])

    def test_missing_column(self, tmp_path):
        p = write(tmp_path / "a.csv", "a,y\n0.1,1\n")
        with pytest.raises(CsvError, match="missing"):
            load_csv(p, CsvSchema(("a", "b"), "y"))

    @pytest.mark.parametrize("bad", ["x", "nan", ""])
    def test_parse_failure(self, tmp_path, bad):
        p = write(tmp_path / "a.csv", f"a,y\n0.1,1\n{bad},1\n")
        with pytest.raises(CsvError) as exc:
            load_csv(p, CsvSchema(("a",), "y"))
        assert exc.value.row == 2

    def test_wider_domain(self, tmp_path):
        p = write(tmp_path / "a.csv", "a,y\n2.0,1\n")
        assert load_csv(p, CsvSchema(("a",), "y", domain=hypercube(3.0))).n == 1


def small_cfg(**kw):
    base = dict(mechanisms=["nonprivate"], n_grid=[500], eps_grid=[1.0], d=3, seeds=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            small_cfg(n_grid=[])
        with pytest.raises(ValueError):
            small_cfg(seeds=0)
        with pytest.raises(ValueError):
            small_cfg(mechanisms=["magic"])

    def test_json_round_trip(self, tmp_path):
        import json

        cfg = small_cfg(pnorm=math.inf)
        p = tmp_path / "c.json"
        p.write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.from_json(p) == cfg


class TestRun:
    def test_single_row(self):
        rows = run_experiment(small_cfg())
        assert len(rows) == 1 and rows[0].status == "ok" and rows[0].error is not None

    def test_deterministic(self):
        cfg = small_cfg(mechanisms=["local", "nonprivate", "naive", "objective", "dpsgd", "eigen"], seeds=2)
        strip = lambda rows: [{**r.__dict__, "wall_time": 0} for r in rows]
        assert strip(run_experiment(cfg)) == strip(run_experiment(cfg))

    def test_bottom_is_reported(self):
        rows = run_experiment(small_cfg(mechanisms=["local"], n_grid=[40]))
        assert rows[0].bottom and rows[0].error is None and rows[0].status == "ok"

    def test_fallback_gate(self):
        rows = run_experiment(small_cfg(mechanisms=["local"], n_grid=[40], fallback="objective"))
        assert not rows[0].bottom and rows[0].status == "fallback:objective"
        theta_rows = run_experiment(small_cfg(mechanisms=["local"], n_grid=[40], fallback="objective", target="theta"))
        assert theta_rows[0].status == "fallback:objective"

    def test_fallback_uses_half_budget(self):
        from dpmestim import baselines
        from dpmestim.harness import _make_data
        from dpmestim.privacy import PrivacyParams

        cfg = small_cfg(mechanisms=["local"], n_grid=[40], fallback="objective")
        row = run_experiment(cfg)[0]
        data, _ = _make_data(cfg, 40, 0)
        # replay: the functional release consumes one normal and two Laplace draws first
        rng = np.random.default_rng([0, 0, 0])
        rng.standard_normal()
        rng.laplace()
        rng.laplace()
        from dpmestim.model import fit, robust_log_loss

        loss = robust_log_loss()
        alt = baselines.objective_perturbation(data, loss, None, PrivacyParams(0.5, 1e-6), rng)
        res = fit(data, loss, 0.0)
        assert row.error == pytest.approx(abs(alt.value[0] - res.theta[0]))

    def test_eigen_rows(self):
        rows = run_experiment(small_cfg(mechanisms=["eigen"], n_grid=[100], d=5, seeds=3))
        assert all(r.status == "zero" and r.error == 1.0 for r in rows)

    @pytest.mark.slow
    def test_local_error_nonincreasing_in_epsilon(self):
        cfg = ExperimentConfig(["local"], [20000], [1.0, 2.0, 4.0, 6.0, 8.0], d=5, seeds=25)
        rows = run_experiment(cfg)
        med = []
        for eps in cfg.eps_grid:
            errs = [math.inf if r.error is None else r.error for r in rows if r.epsilon == eps]
            med.append(np.median(errs))
        assert all(np.diff(med) <= 0), med


def row(err, mech="m", bottom=False):
    return ResultRow(mech, 10, 2, 1.0, 0, err, bottom, None, None, 0.0)


class TestReport:
    def test_empty(self, tmp_path):
        res, agg = emit_report([], tmp_path)
        assert res.read_text().strip() == ",".join(RESULT_FIELDS)
        assert agg.read_text().strip() == ",".join(AGGREGATE_FIELDS)

    def test_constant_errors(self):
        (a,) = aggregate([row(0.5), row(0.5), row(0.5)])
        assert a["std_error"] == 0.0 and a["median_error"] == 0.5

    def test_hand_fixture(self):
        (a,) = aggregate([row(1.0), row(2.0), row(6.0), row(None, bottom=True)])
        # sample std of (1, 2, 6) is sqrt(7); se = sqrt(7/3)
        assert a["runs"] == 4 and a["bottom_rate"] == 0.25
        assert a["median_error"] == 2.0 and a["mean_error"] == 3.0
        assert a["std_error"] == pytest.approx(math.sqrt(7 / 3))
        assert a["ci_low"] == pytest.approx(2 - 2 * math.sqrt(7 / 3))
        assert a["ci_high"] == pytest.approx(2 + 2 * math.sqrt(7 / 3))

    def test_round_trip(self, tmp_path):
        rows = run_experiment(small_cfg(mechanisms=["local", "nonprivate"], n_grid=[40, 2000]))
        res, _ = emit_report(rows, tmp_path)
        back = read_results(res)
        assert back == rows
        with open(res, newline="") as fh:
            assert next(csv.reader(fh)) == RESULT_FIELDS

    def test_order_independent(self):
        rows = [row(1.0), row(3.0, "a"), row(2.0), row(5.0, "a")]
        assert aggregate(rows) == aggregate(rows[::-1])
