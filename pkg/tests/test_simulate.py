import math

import numpy as np
import pytest

from lassoridge.core import Rng
from lassoridge.simulate import (
    DEFAULT_SEED,
    OUT_OF_SAMPLE,
    ImprovementReport,
    ReplicationRecord,
    ScenarioConfig,
    SemiSyntheticSpec,
    _ar1_raw,
    ar1_design,
    beta_case_semi,
    improvement_pct,
    load_csv,
    run_real_data,
    run_scenario,
    run_semi_synthetic,
    run_theory_check,
    standin_design,
    true_beta,
)


def test_ar1_rho_zero_is_iid_before_normalization():
    raw = _ar1_raw(Rng(3), 20, 4, 0.0)
    z = Rng(3).generator.standard_normal((20, 4))
    np.testing.assert_array_equal(raw, z)


def test_ar1_lag_one_correlation():
    raw = _ar1_raw(Rng(4), 5000, 3, 0.5)
    c = np.corrcoef(raw, rowvar=False)
    assert abs(c[0, 1] - 0.5) < 0.05
    assert abs(c[1, 2] - 0.5) < 0.05
    assert abs(c[0, 2] - 0.25) < 0.05


def test_ar1_design_reproducible_and_normalized():
    a = ar1_design(Rng(9), 30, 12, 0.9)
    b = ar1_design(Rng(9), 30, 12, 0.9)
    assert np.array_equal(a.values, b.values)
    np.testing.assert_allclose((a.values ** 2).sum(axis=0), 30.0, rtol=1e-12)
    with pytest.raises(ValueError):
        ar1_design(Rng(0), 5, 5, 1.0)


def test_true_beta():
    assert true_beta("unit_first_s", 5, 2).tolist() == [1, 1, 0, 0, 0]
    assert not np.any(true_beta("unit_first_s", 4, 0))
    assert true_beta("custom", 2, 0, custom=(3, -1)).tolist() == [3, -1]
    with pytest.raises(ValueError):
        true_beta("custom", 5, 0, custom=(3, -1))
    with pytest.raises(ValueError):
        true_beta("unit_first_s", 3, 4)


def test_beta_case_semi():
    b2 = beta_case_semi(2, 30, Rng(0))
    assert b2[3] == 2.5
    assert np.count_nonzero(b2) == 10

    b1 = beta_case_semi(1, 30, Rng(1))
    assert np.all((b1[:5] >= 3) & (b1[:5] <= 4))
    assert np.all((b1[5:10] >= 1) & (b1[5:10] <= 2))
    assert not np.any(b1[10:])

    b3 = beta_case_semi(3, 30, Rng(2))
    assert np.count_nonzero(b3) == 20 and np.all(b3[:20] >= 1)
    with pytest.raises(ValueError):
        beta_case_semi(3, 19, Rng(0))


def test_improvement_pct():
    assert improvement_pct(2.0, 1.0) == (100.0, False)
    pct, flag = improvement_pct(0.0, 0.0)
    assert math.isnan(pct) and flag


def test_report_identity_on_stored_means():
    recs = [ReplicationRecord(i, pred_lasso=2.0 + i, pred_new=1.0 + i, est_lasso=3.0, est_new=1.5)
            for i in range(3)]
    rep = ImprovementReport.from_records({}, "in_sample", recs[::-1])
    assert [r.index for r in rep.records] == [0, 1, 2]
    assert rep.pred_improvement_pct == 100.0 * (rep.mean_pred_mse_lasso / rep.mean_pred_mse_new - 1.0)
    assert rep.est_improvement_pct == 100.0


def test_degenerate_scenario_is_flagged():
    rep = run_scenario(ScenarioConfig(n=20, p=10, s_true=0, sigma=0.0, replications=2))
    assert rep.mean_pred_mse_lasso == 0.0 and rep.mean_pred_mse_new == 0.0
    assert rep.pred_degenerate and math.isnan(rep.pred_improvement_pct)


def test_scenario_config_validation():
    with pytest.raises(ValueError):
        ScenarioConfig(n=10, p=5, s_true=6)
    with pytest.raises(ValueError):
        ScenarioConfig(n=10, p=5, s_true=1, rho=1.5)
    with pytest.raises(ValueError):
        ScenarioConfig(n=10, p=5, s_true=1, replications=0)
    assert ScenarioConfig(n=10, p=5, s_true=1).seed == DEFAULT_SEED


def test_scenario_is_deterministic_and_thread_independent():
    cfg = ScenarioConfig(n=40, p=50, s_true=3, sigma=0.5, replications=3, n_lambda_l=8, n_lambda_r=4)
    a = run_scenario(cfg)
    b = run_scenario(cfg, threads=3)
    assert a.records == b.records
    assert a.pred_improvement_pct == b.pred_improvement_pct
    assert a.failures == 0


def test_out_of_sample_variant_runs():
    cfg = ScenarioConfig(n=40, p=30, s_true=3, sigma=0.5, replications=2, n_lambda_l=6,
                         n_lambda_r=3, prediction=OUT_OF_SAMPLE)
    rep = run_scenario(cfg)
    assert rep.failures == 0 and np.isfinite(rep.mean_pred_mse_new)


def test_semi_synthetic_spec_and_determinism():
    with pytest.raises(ValueError):
        SemiSyntheticSpec(design=np.zeros((5, 5)), train_fraction=1.0)
    design = standin_design(Rng(1), n=30, p=60)
    spec = SemiSyntheticSpec(design=design, rounds=2, seed=5)
    a, b = run_semi_synthetic(spec), run_semi_synthetic(spec)
    assert a.mean_pred_mse_lasso == b.mean_pred_mse_lasso
    assert a.mean_pred_mse_new == b.mean_pred_mse_new
    assert a.kind == "test_mse" and a.failures == 0


def test_real_data_constant_response():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 5))
    rep = run_real_data(None, rounds=3, data=(X, np.full(40, 3.0)))
    assert rep.mean_pred_mse_lasso == rep.mean_pred_mse_new
    assert rep.mean_pred_mse_lasso == pytest.approx(0.0, abs=1e-20)


def test_real_data_from_csv_reproducible(tmp_path):
    rng = np.random.default_rng(1)
    X = rng.standard_normal((60, 6))
    y = X[:, 0] - 2 * X[:, 1] + rng.standard_normal(60)
    path = tmp_path / "d.csv"
    np.savetxt(path, np.column_stack([X, y]), delimiter=",", header="a,b,c,d,e,f,target", comments="")
    a = run_real_data(path, response="target", rounds=2, seed=3)
    b = run_real_data(path, response=-1, rounds=2, seed=3)
    assert a.mean_pred_mse_new == b.mean_pred_mse_new
    assert np.isfinite(a.mean_pred_mse_lasso)


def test_csv_bad_cell_reports_row_and_column(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("1,2,3\n4,nan,6\n")
    with pytest.raises(ValueError, match=r"row 2, column 1"):
        load_csv(path, -1)
    path.write_text("1,2,3\n4,,6\n")
    with pytest.raises(ValueError, match=r"row 2, column 1"):
        load_csv(path, -1)


def test_theory_check_small():
    res = run_theory_check(n=50, p=50, replications=10, seed=1)
    assert res.certificates_hold
    assert 0.0 <= res.frequency <= 1.0 and res.improved.size == 10
