"""End-to-end command checks: outputs, determinism, exit codes."""

import json
import math

import pytest

from hetqos.cli import main
from hetqos.config import build_scenario, load_config, parse_config_text

# a small, fast scenario: baseline-friendly densities, coarse numerics
FAST_CFG = """
mode = clustered
seed = 7
network.user_intensity_per_m2 = 381.9718634205488
network.cache_ratio = 0.1
network.sbs_parent_intensity_per_m2 = 3.819718634205488
network.sbs_mean_daughters = 10
network.sbs_sigma_m = 0.05
network.mbs_intensity_per_m2 = 7.639437268410976
network.power_d2d_w = 73
network.power_sbs_w = 373
network.power_mbs_w = 1773
content.catalog_size = 500
content.cache_d2d = 10
content.cache_sbs = 50
content.zipf_skew = 0.8
traffic.weights_sbs = 1,1,1.1,1.1,1.5,1.87
numerics.s_nodes = 24
numerics.offset_nodes = 16
numerics.outer_rel_tol = 1e-3
sweep.parameter = network.cache_ratio
sweep.values = 0.1
"""


@pytest.fixture()
def fast_cfg_path(tmp_path):
    p = tmp_path / "fast.cfg"
    p.write_text(FAST_CFG)
    return str(p)


def read_csv(path):
    lines = open(path).read().splitlines()
    meta = [ln for ln in lines if ln.startswith("# ")]
    body = [ln for ln in lines if not ln.startswith("# ")]
    header = body[0].split(",")
    rows = [dict(zip(header, ln.split(","))) for ln in body[1:]]
    return meta, header, rows


class TestAssocCommand:
    def test_runs_and_is_deterministic(self, tmp_path):
        out1 = str(tmp_path / "a1.csv")
        out2 = str(tmp_path / "a2.csv")
        args = ["assoc", "--config", "fig3", "--sweep-values", "0,0.8"]
        assert main(args + ["--out", out1]) == 0
        assert main(args + ["--out", out2]) == 0
        assert open(out1, "rb").read() == open(out2, "rb").read()
        meta, header, rows = read_csv(out1)
        assert any("tool_version" in m for m in meta)
        assert header[0] == "sweep_value"
        assert len(rows) == 2
        total = sum(float(rows[0][f"g3_{t}"]) for t in ("d2d", "sbs", "mbs"))
        assert total == pytest.approx(1.0, abs=1e-4)
        cases = sum(float(rows[0][f"p_case{m}"]) for m in (1, 2, 3, 4))
        assert cases == pytest.approx(1.0, abs=1e-4)

    def test_d2d_case_monotone_in_skew(self, tmp_path):
        out = str(tmp_path / "mono.csv")
        assert main(["assoc", "--config", "fig3", "--out", out,
                     "--sweep-values", "0,0.4,0.8,1.2"]) == 0
        _, _, rows = read_csv(out)
        d2d_share = [float(r["p_case1"]) for r in rows]  # includes F(1,M1)
        # direct check on the D2D association row of the state matrix
        # is covered in traffic tests; here the case-4 column must grow
        case4 = [float(r["p_case4"]) for r in rows]
        assert all(a <= b + 1e-12 for a, b in zip(case4, case4[1:]))

    def test_parallel_workers_identical_output(self, tmp_path):
        seq = str(tmp_path / "w1.csv")
        par = str(tmp_path / "w2.csv")
        base = ["assoc", "--config", "fig3", "--sweep-values", "0,0.4,0.8"]
        assert main(base + ["--out", seq]) == 0
        assert main(base + ["--out", par, "--workers", "2"]) == 0
        assert open(seq, "rb").read() == open(par, "rb").read()

    def test_json_mirror(self, tmp_path):
        out = str(tmp_path / "a.json")
        assert main(["assoc", "--config", "fig3", "--out", out,
                     "--format", "json", "--sweep-values", "0.8"]) == 0
        obj = json.load(open(out))
        assert obj["meta"]["command"] == "assoc"
        assert "g3_sbs" in obj["columns"]
        assert len(obj["rows"]) == 1


class TestModeSemantics:
    def test_baseline_differs_only_in_sbs_layout(self):
        raw = load_config("fig3")
        clustered = build_scenario(raw, mode="clustered")
        baseline = build_scenario(raw, mode="baseline")
        assert clustered.network.sbs_layout.kind == "thomas"
        assert baseline.network.sbs_layout.kind == "poisson"
        assert baseline.network.sbs_layout.effective_intensity == \
            pytest.approx(clustered.network.sbs_layout.effective_intensity)
        import dataclasses
        c = dataclasses.replace(clustered.network,
                                sbs_layout=baseline.network.sbs_layout)
        assert c == baseline.network
        assert clustered.content == baseline.content
        assert clustered.traffic == baseline.traffic


class TestQosAndTraffic:
    def test_qos_emits_both_disciplines(self, fast_cfg_path, tmp_path):
        out = str(tmp_path / "qos.csv")
        assert main(["qos", "--config", fast_cfg_path, "--out", out]) == 0
        _, header, rows = read_csv(out)
        assert "discipline" in header
        discs = {r["discipline"] for r in rows}
        assert discs == {"dps", "eps"}
        assert all(r["stable"] == "1" for r in rows)

    def test_traffic_matrices(self, fast_cfg_path, tmp_path):
        out = str(tmp_path / "traffic.csv")
        assert main(["traffic", "--config", fast_cfg_path, "--out",
                     out]) == 0
        text = open(out).read()
        assert "quantity,class_row,bh_needed,tier,value" in text
        assert "total_utilization" in text

    def test_rates_positive_and_finite(self, fast_cfg_path, tmp_path):
        out = str(tmp_path / "rates.csv")
        assert main(["rates", "--config", fast_cfg_path, "--out", out]) == 0
        _, header, rows = read_csv(out)
        for col in header[2:]:
            v = float(rows[0][col])
            assert v > 0 and math.isfinite(v)


class TestValidateCommand:
    def test_passes_on_canonical_preset(self, tmp_path):
        out = str(tmp_path / "validate.csv")
        code = main(["validate", "--config", "fig3", "--samples", "20000",
                     "--seed", "3", "--out", out])
        assert code == 0
        _, _, rows = read_csv(out)
        verdicts = {r["verdict"] for r in rows}
        assert "fail" not in verdicts

    def test_low_power_marks_inconclusive(self, tmp_path):
        out = str(tmp_path / "weak.csv")
        code = main(["validate", "--config", "fig3", "--samples", "100",
                     "--out", out])
        assert code == 0
        _, _, rows = read_csv(out)
        assoc_rows = [r for r in rows if r["check"].endswith("association")]
        assert any(r["verdict"] == "inconclusive" for r in assoc_rows)
        assert all(r["verdict"] != "fail" for r in assoc_rows)

    def test_rate_cells_inconclusive_when_underpowered(self, fast_cfg_path,
                                                       tmp_path):
        # too few realizations for 500 event hits in the rarest cell
        out = str(tmp_path / "rates_weak.csv")
        code = main(["validate", "--config", fast_cfg_path, "--with-rates",
                     "--samples", "2000", "--out", out])
        assert code == 0
        _, _, rows = read_csv(out)
        rate_rows = [r for r in rows if r["check"] == "ergodic_rate"]
        assert rate_rows and all(r["verdict"] == "inconclusive"
                                 for r in rate_rows)


class TestFigureCommand:
    def test_figure3_writes_csv_and_png(self, tmp_path):
        code = main(["figure", "3", "--out", str(tmp_path),
                     "--sweep-values", "0,1.2"])
        assert code == 0
        assert (tmp_path / "fig3.csv").exists()
        assert (tmp_path / "fig3.png").exists()
        _, _, rows = read_csv(str(tmp_path / "fig3.csv"))
        modes = {r["mode"] for r in rows}
        assert modes == {"clustered", "baseline"}

    def test_no_plot_flag(self, tmp_path):
        code = main(["figure", "3", "--out", str(tmp_path), "--no-plot",
                     "--sweep-values", "0.8"])
        assert code == 0
        assert not (tmp_path / "fig3.png").exists()


class TestErrors:
    def test_config_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.cfg"
        bad.write_text("network.cache_ratio = 2.0\n")
        assert main(["assoc", "--config", str(bad)]) == 2

    def test_unknown_preset(self):
        assert main(["assoc", "--config", "fig99"]) == 2

    def test_malformed_line(self, tmp_path):
        bad = tmp_path / "bad2.cfg"
        bad.write_text("this is not a config\n")
        assert main(["assoc", "--config", str(bad)]) == 2

    def test_sweep_values_without_parameter(self, tmp_path):
        cfg = tmp_path / "nosweep.cfg"
        cfg.write_text(FAST_CFG.replace("sweep.parameter = network.cache_ratio",
                                        "sweep.parameter = ")
                       .replace("sweep.values = 0.1", "sweep.values = "))
        assert main(["assoc", "--config", str(cfg),
                     "--sweep-values", "0.2"]) == 2

    def test_parse_round_trip(self):
        raw = parse_config_text("a.b = 1\n# comment\nc = x  # ignored\n")
        assert raw == {"a.b": "1", "c": "x"}


def test_numerics_keys_reach_profile(tmp_path):
    cfg = tmp_path / "printed.cfg"
    cfg.write_text(FAST_CFG + "numerics.cluster_model = printed\n")
    scn = build_scenario(load_config(str(cfg)))
    assert scn.numerics.cluster_model == "printed"
    assert scn.numerics.s_nodes == 24


def test_envelope_policy_requires_finite_domain():
    import math as _math

    import numpy as _np
    from hetqos.specfun import QuadratureSpec, integrate
    spec = QuadratureSpec(truncation_policy="envelope")
    with pytest.raises(ValueError):
        integrate(lambda x: _np.exp(-x), 0.0, _math.inf, spec)
    v, _ = integrate(lambda x: _np.exp(-x), 0.0, 40.0, spec)
    assert v == pytest.approx(1.0, rel=1e-7)
