import json
import math

import numpy as np
import pytest

import mieval


def test_rubin_pool_hand_arithmetic():
    q = np.array([[1.0], [2.0], [3.0]])
    u = np.array([[0.5], [0.5], [0.5]])
    p = mieval.rubin_pool(q, u)
    assert p["qbar"][0] == pytest.approx(2.0, abs=1e-12)
    assert p["between"][0] == pytest.approx(1.0, abs=1e-12)
    assert p["total"][0] == pytest.approx(0.5 + (1 + 1 / 3) * 1.0, abs=1e-12)


def test_m_rules():
    assert mieval.recommend_m(0.42, "von_hippel") == 42
    assert mieval.relative_efficiency(0.42, 42) == pytest.approx(1 + 0.42 / 42, abs=1e-12)


def test_wilcoxon():
    assert mieval.wilcoxon_signed_rank([1, 2, 3], [3, 4, 5])["p_value"] == pytest.approx(0.25)
    r = mieval.wilcoxon_signed_rank([1, 2], [1, 2])
    assert r["p_value"] == 1.0 and r["flags"] == ["no signal"]


def test_em_loglik_nondecreasing():
    rng = np.random.default_rng(1)
    Y = rng.multivariate_normal([0, 1], [[1, 0.6], [0.6, 2]], size=400)
    Y[rng.random(400) < 0.3, 1] = np.nan
    fit = mieval.em_mvn(Y)
    assert fit["converged"]
    assert all(b >= a - 1e-9 for a, b in zip(fit["loglik"], fit["loglik"][1:]))


def test_pipeline_keeps_observed_cells():
    table, truth = mieval.synth({"preset": "gaussian", "n": 300, "seed": 2})
    assert len(table) == 300
    assert truth["outcomes"][0]["name"] == "y"
    plan = {"mechanism": "MAR", "patterns": [["x1"], ["x2"]], "pattern_freqs": [0.5, 0.5],
            "overall_prop": 0.3, "A": 1, "seed": 4}
    amputed, realized = mieval.ampute(table, plan)
    assert abs(realized - 0.3) < 0.08
    sets = mieval.impute(amputed, {"method": "fcs", "variant": "norm", "one_hot_categorical": True}, m=3, seed=9)
    assert len(sets) == 3
    before = amputed.columns
    for s in sets:
        after = s.columns
        for name, values in before.items():
            for v, w in zip(values, after[name]):
                assert w is not None
                if v is not None:
                    assert v == w


def test_little_flags_mcar_as_plausible():
    rng = np.random.default_rng(3)
    Y = rng.normal(size=(500, 2))
    Y[rng.random(500) < 0.2, 0] = np.nan
    assert mieval.little_mcar_test(Y)["p_value"] > 0.001


def test_config_errors_raise():
    with pytest.raises(mieval.MievalError, match="config"):
        mieval.recommend_m(0.3, "no_such_rule")


def test_run_experiment(tmp_path):
    cfg = {
        "dataset": {"preset": "gaussian", "n": 400, "seed": 5},
        "amputation": {"mechanism": "MAR", "patterns": [["x1"], ["x2"]], "pattern_freqs": [0.5, 0.5],
                       "overall_prop": 0.3},
        "A": 2, "m": 3, "seed": 11, "out_dir": str(tmp_path),
        "methods": [{"method": "jm"}, {"method": "ipw"}],
        "include_oracle": True,
    }
    out = mieval.run_experiment(cfg)
    assert not out["any_failed"]
    ids = [r["id"] for r in out["reports"]]
    assert ids == ["jm_out_noohn", "ipw-logistic_noout_noohn", "oracle"]
    oracle = out["reports"][-1]
    assert oracle["mean_abs_rb"] == 0 and oracle["mean_mse"] == 0 and oracle["mean_cr"] == 1
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["m"] == 3 and len(manifest["fingerprint"]) == 16
    assert (tmp_path / "wtl_mse.csv").exists()
