"""Oracle self-checks: determinism, degenerate inputs, distribution laws."""

import math

import numpy as np
import pytest
import scipy.stats

from hetqos.association import NetworkConfig
from hetqos.geometry import TierLayout
from conftest import DISK_KM
from hetqos.montecarlo import (
    McRunSpec,
    dps_des,
    empirical_association,
    spatial_snapshot,
)



class TestDeterminism:
    def test_association_bit_identical(self, fig3_cfg):
        spec = McRunSpec(realizations=4000, seed=321)
        a = empirical_association(fig3_cfg, spec)
        b = empirical_association(fig3_cfg, spec)
        assert a["g3"] == b["g3"]
        assert a["ordered"] == b["ordered"]
        assert np.array_equal(a["snapshot"].nearest[2],
                              b["snapshot"].nearest[2])

    def test_seed_changes_samples(self, fig3_cfg):
        a = empirical_association(fig3_cfg, McRunSpec(4000, seed=1))
        b = empirical_association(fig3_cfg, McRunSpec(4000, seed=2))
        assert not np.array_equal(a["snapshot"].nearest[2],
                                  b["snapshot"].nearest[2])

    def test_des_deterministic(self):
        r1 = dps_des([0.4], [1.0], [1.0], completions=20000, seed=5)
        r2 = dps_des([0.4], [1.0], [1.0], completions=20000, seed=5)
        assert r1.mean_sojourn == r2.mean_sojourn


class TestDegenerateInputs:
    def test_dominant_tier_takes_all(self):
        cfg = NetworkConfig(
            user_intensity=3.2e-4, cache_ratio=0.0,
            sbs_layout=TierLayout.thomas(3 / DISK_KM, 10.0, 250.0),
            mbs_intensity=2 / DISK_KM, power_d2d=1.0, power_sbs=13.0,
            power_mbs=1e-12)
        res = empirical_association(cfg, McRunSpec(2000, seed=9))
        assert res["g3"][2] == 1.0

    def test_ordering_frequencies_sum_to_one(self, fig3_cfg):
        res = empirical_association(fig3_cfg, McRunSpec(3000, seed=11))
        assert sum(res["ordered"].values()) == pytest.approx(1.0, abs=1e-12)
        assert sum(res["g3"].values()) == pytest.approx(1.0, abs=1e-12)

    def test_dense_layout_pairwise_agreement(self, fig4_cfg, fig4_engine):
        res = empirical_association(fig4_cfg, McRunSpec(10000, seed=13))
        for pair in ((2, 3), (3, 2)):
            z = abs(fig4_engine.pairwise_prob(*pair) - res["pairwise"][pair])
            assert z <= 3 * res["pairwise_se"][pair]


@pytest.fixture(scope="module")
def snap(fig3_cfg):
    return spatial_snapshot(fig3_cfg, McRunSpec(10000, seed=77))


class TestDistributionLaws:
    def test_contact_ks_all_tiers(self, fig3_cfg, fig3_engine, snap):
        crit = 1.628 / math.sqrt(snap.realizations)
        for i in (1, 2, 3):
            law = fig3_engine.laws[i]
            stat = scipy.stats.kstest(
                snap.nearest[i],
                lambda r: 1.0 - np.exp(-law.exponent(np.asarray(r)))).statistic
            assert stat < crit

    def test_tcp_ccdf_pointwise(self, fig3_cfg, snap):
        from hetqos.geometry import tcp_contact_ccdf
        r2 = snap.nearest[2]
        for r in (100.0, 250.0, 500.0):
            emp = float(np.mean(r2 > r))
            se = math.sqrt(emp * (1 - emp) / r2.size)
            assert abs(emp - tcp_contact_ccdf(r, fig3_cfg.sbs_layout)) \
                <= 3 * se

    def test_case1_serving_distance_chi2(self, fig3_cfg, fig3_engine, snap):
        # conditional serving distances given tier-2 association vs the
        # analytic conditional density, quantile-binned chi-square
        c = snap.received
        winner2 = (c[2] >= c[1]) & (c[2] >= c[3])
        samples = snap.nearest[2][winner2]
        assert samples.size > 500
        grid = np.linspace(0, 2500, 4001)
        pdf = fig3_engine.serving_pdf_case1(2, grid)
        cdf = np.cumsum(pdf) * (grid[1] - grid[0])
        cdf /= cdf[-1]
        n_bins = 20
        quantiles = np.interp(np.linspace(0, 1, n_bins + 1)[1:-1], cdf, grid)
        edges = np.concatenate([[0.0], quantiles, [np.inf]])
        counts, _ = np.histogram(samples, edges)
        stat, p = scipy.stats.chisquare(counts)
        assert p > 0.01

    def test_clustering_stretches_contact_median(self, fig3_cfg, snap):
        # cluster attraction leaves larger voids, so the typical nearest
        # distance exceeds the matched-intensity PPP value
        lam_eff = fig3_cfg.sbs_layout.effective_intensity
        emp_med = np.median(snap.nearest[2])
        ppp_med = math.sqrt(math.log(2) / (math.pi * lam_eff))
        assert emp_med > ppp_med


class TestDesOracle:
    def test_single_class_sharing_closed_form(self):
        des = dps_des([0.5], [1.0], [1.0], completions=200000, seed=41)
        assert abs(des.mean_sojourn[0] - 2.0) <= 3 * des.sojourn_se[0]

    def test_littles_law(self):
        des = dps_des([0.3, 0.2], [1.0, 1.0], [1.0, 2.0],
                      completions=200000, seed=43)
        for i in (0, 1):
            lam_hat = des.throughput[i]
            lhs = des.mean_number[i]
            rhs = lam_hat * des.mean_sojourn[i]
            assert abs(lhs - rhs) <= 3 * lam_hat * des.sojourn_se[i] + 1e-3

    def test_identical_classes_symmetric(self):
        des = dps_des([0.25, 0.25], [1.0, 1.0], [1.0, 1.0],
                      completions=200000, seed=47)
        gap = abs(des.mean_sojourn[0] - des.mean_sojourn[1])
        spread = 3 * (des.sojourn_se[0] + des.sojourn_se[1])
        assert gap <= spread

    def test_input_validation(self):
        with pytest.raises(ValueError):
            dps_des([0.1], [0.0], [1.0], completions=10)
        with pytest.raises(ValueError):
            dps_des([0.1], [1.0], [1.0, 2.0], completions=10)


def test_raw_sample_streaming(tmp_path, fig3_cfg):
    path = tmp_path / "samples.csv"
    spatial_snapshot(fig3_cfg, McRunSpec(50, seed=3), csv_path=str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "realization,nearest_d2d,nearest_sbs,nearest_mbs"
    assert len(lines) == 51
