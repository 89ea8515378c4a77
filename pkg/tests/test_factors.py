import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carbonrisk.exceptions import (
    DegenerateSortError,
    InsufficientDataError,
    ValidationError,
)
from carbonrisk.factors import (
    FactorBuildConfig,
    ScorePanel,
    SortedBuckets,
    bmg_return,
    build_bmg_factor,
    compute_bgs,
    sort_universe,
)

unit = st.floats(0.0, 1.0)


class TestComputeBgs:
    def test_all_green_lower_bound(self):
        assert compute_bgs(0.0, 0.0, 0.0) == 0.0

    def test_all_brown_upper_bound(self):
        assert compute_bgs(1.0, 1.0, 1.0) == pytest.approx(1.0)

    def test_value_chain_only(self):
        # (2/3) * 0.7, cross-checked by direct spreadsheet arithmetic
        assert compute_bgs(1.0, 0.0, 0.0) == pytest.approx(0.46667, abs=1e-5)

    def test_vectorized(self):
        out = compute_bgs(np.array([0.0, 1.0]), np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        np.testing.assert_allclose(out, [0.0, 1.0])

    def test_out_of_range_rejected(self):
        with pytest.raises(ValidationError):
            compute_bgs(1.2, 0.0, 0.0)
        with pytest.raises(ValidationError):
            compute_bgs(0.5, -0.1, 0.0)

    @given(unit, unit, unit, st.floats(0.0, 0.2))
    @settings(max_examples=100, deadline=None)
    def test_monotone_in_each_argument(self, vc, pp, na, eps):
        base = compute_bgs(vc, pp, na)
        assert compute_bgs(min(vc + eps, 1.0), pp, na) >= base - 1e-12
        assert compute_bgs(vc, min(pp + eps, 1.0), na) >= base - 1e-12
        assert compute_bgs(vc, pp, min(na + eps, 1.0)) >= base - 1e-12

    @given(unit, unit, unit)
    @settings(max_examples=100, deadline=None)
    def test_range(self, vc, pp, na):
        assert 0.0 <= compute_bgs(vc, pp, na) <= 1.0


def series(values, assets=None):
    assets = assets or [f"A{i}" for i in range(len(values))]
    return pd.Series(dict(zip(assets, values)))


class TestSortUniverse:
    def test_exact_tercile_and_median_boundaries(self):
        scores = series([0.1, 0.2, 0.4, 0.5, 0.8, 0.9])
        caps = series([1, 2, 3, 4, 5, 6])
        buckets = sort_universe(scores, caps)
        a = buckets.assignments
        assert a["A0"] == "SG" and a["A1"] == "SG"
        assert a["A2"] == "SN" and a["A3"] == "BN"
        assert a["A4"] == "BB" and a["A5"] == "BB"
        # cap median is 3.5: A0..A2 Small, A3..A5 Big
        assert all(a[f"A{i}"][0] == "S" for i in range(3))
        assert all(a[f"A{i}"][0] == "B" for i in range(3, 6))

    def test_all_equal_scores_all_neutral(self):
        scores = series([0.5] * 6)
        caps = series([1, 2, 3, 4, 5, 6])
        buckets = sort_universe(scores, caps)
        assert all(lab[1] == "N" for lab in buckets.assignments)

    def test_cap_at_median_goes_big(self):
        scores = series([0.1, 0.2, 0.4, 0.5, 0.8, 0.9])
        caps = series([1, 1, 1, 1, 1, 1])
        buckets = sort_universe(scores, caps)
        assert all(lab[0] == "B" for lab in buckets.assignments)

    def test_too_few_assets(self):
        with pytest.raises(InsufficientDataError):
            sort_universe(series([0.1, 0.5, 0.9]), series([1, 2, 3]))

    def test_rank_split_oracle_random(self):
        rng = np.random.default_rng(3)
        for _ in range(30):
            n = 30
            scores = pd.Series(rng.uniform(0, 1, n), index=[f"A{i:02d}" for i in range(n)])
            caps = pd.Series(rng.uniform(1, 100, n), index=scores.index)
            buckets = sort_universe(scores, caps)
            order = scores.sort_values(kind="stable").index
            k1, k2 = int(np.ceil(n / 3)), int(np.ceil(2 * n / 3))
            expect_green = set(order[:k1])
            expect_brown = set(order[k2:])
            med = np.median(caps.values)
            for asset, lab in buckets.assignments.items():
                assert (lab[1] == "G") == (asset in expect_green)
                assert (lab[1] == "B") == (asset in expect_brown)
                assert (lab[0] == "S") == (caps[asset] < med)

    def test_invariant_under_monotone_transforms(self):
        rng = np.random.default_rng(4)
        scores = pd.Series(rng.uniform(0, 1, 20), index=[f"A{i:02d}" for i in range(20)])
        caps = pd.Series(rng.uniform(1, 50, 20), index=scores.index)
        base = sort_universe(scores, caps).assignments
        warped = sort_universe(scores**3, np.exp(caps / 20)).assignments
        assert (base == warped).all()


class TestBmgReturn:
    def _buckets(self):
        labels = {
            "a": "SB", "b": "BB", "c": "SG", "d": "BG", "e": "SN", "f": "BN",
        }
        return SortedBuckets(assignments=pd.Series(labels))

    def test_symmetric_cancellation(self):
        b = self._buckets()
        rets = series([0.03] * 6, assets=list("abcdef"))
        caps = series([1, 2, 3, 4, 5, 6], assets=list("abcdef"))
        assert bmg_return(b, rets, caps) == pytest.approx(0.0, abs=1e-15)

    def test_simple_arithmetic(self):
        b = self._buckets()
        rets = series([0.02, 0.02, 0.01, 0.01, 0.0, 0.0], assets=list("abcdef"))
        caps = series([1.0] * 6, assets=list("abcdef"))
        assert bmg_return(b, rets, caps, "CW") == pytest.approx(0.01)
        assert bmg_return(b, rets, caps, "EW") == pytest.approx(0.01)

    def test_cap_weighted_oracle(self):
        rng = np.random.default_rng(5)
        assets = [f"A{i:02d}" for i in range(20)]
        labels = pd.Series(
            [["SB", "BB", "SG", "BG"][i % 4] for i in range(20)], index=assets
        )
        b = SortedBuckets(assignments=labels)
        rets = pd.Series(rng.normal(0, 0.05, 20), index=assets)
        caps = pd.Series(rng.uniform(1, 100, 20), index=assets)

        def wmean(bucket):
            m = labels.index[labels == bucket]
            return np.average(rets[m], weights=caps[m])

        expected = 0.5 * (wmean("SB") + wmean("BB")) - 0.5 * (wmean("SG") + wmean("BG"))
        assert bmg_return(b, rets, caps, "CW") == pytest.approx(expected, rel=1e-12)

    def test_translation_invariance(self):
        rng = np.random.default_rng(6)
        assets = [f"A{i:02d}" for i in range(16)]
        labels = pd.Series(
            [["SB", "BB", "SG", "BG"][i % 4] for i in range(16)], index=assets
        )
        b = SortedBuckets(assignments=labels)
        rets = pd.Series(rng.normal(0, 0.05, 16), index=assets)
        caps = pd.Series(rng.uniform(1, 100, 16), index=assets)
        for w in ("CW", "EW"):
            base = bmg_return(b, rets, caps, w)
            shifted = bmg_return(b, rets + 0.123, caps, w)
            assert shifted == pytest.approx(base, abs=1e-12)

    def test_empty_corner_raises(self):
        labels = pd.Series({"a": "SB", "b": "BB", "c": "SG", "d": "SN"})
        b = SortedBuckets(assignments=labels)
        rets = series([0.01] * 4, assets=list("abcd"))
        caps = series([1.0] * 4, assets=list("abcd"))
        with pytest.raises(DegenerateSortError):
            bmg_return(b, rets, caps)


def _month_ends(n, start="2015-01-31"):
    return pd.date_range(start, periods=n, freq="ME")


class TestBuildFactor:
    def _panel(self, n_assets=40, n_months=24, seed=7):
        rng = np.random.default_rng(seed)
        dates = _month_ends(n_months)
        assets = [f"A{i:02d}" for i in range(n_assets)]
        shape = (n_months, n_assets)
        vc = pd.DataFrame(rng.uniform(0, 1, shape), index=dates, columns=assets)
        pp = pd.DataFrame(rng.uniform(0, 1, shape), index=dates, columns=assets)
        na = pd.DataFrame(rng.uniform(0, 1, shape), index=dates, columns=assets)
        caps = pd.DataFrame(rng.uniform(1, 100, shape), index=dates, columns=assets)
        returns = pd.DataFrame(rng.normal(0, 0.05, shape), index=dates, columns=assets)
        return ScorePanel(market_cap=caps, vc=vc, pp=pp, na=na), returns

    def test_monthly_factor_has_one_return_per_month_after_first(self):
        panel, returns = self._panel()
        factor = build_bmg_factor(panel, returns)
        assert len(factor) == len(returns.index) - 1
        assert factor.index[0] == returns.index[1]
        assert np.all(np.isfinite(factor.values))

    def test_static_rebalance_uses_average_scores(self):
        panel, returns = self._panel()
        static = build_bmg_factor(
            panel, returns, FactorBuildConfig(rebalance="static")
        )
        monthly = build_bmg_factor(panel, returns)
        assert len(static) == len(monthly)
        assert not np.allclose(static.values, monthly.values)

    def test_green_high_orientation_flips_factor(self):
        panel, returns = self._panel()
        cfg_gen = FactorBuildConfig(score_source="generic", brown_high=True, weighting="EW")
        # generic score equal to BGS so both orientations can be compared
        bgs = panel.brownness("bgs")
        p2 = ScorePanel(market_cap=panel.market_cap, generic_score=bgs)
        p3 = ScorePanel(market_cap=panel.market_cap, generic_score=-bgs)
        brown = build_bmg_factor(p2, returns, cfg_gen)
        green = build_bmg_factor(
            p3, returns, FactorBuildConfig(score_source="generic", brown_high=False, weighting="EW")
        )
        np.testing.assert_allclose(brown.values, green.values, atol=1e-12)

    def test_score_panel_validation(self):
        dates = _month_ends(3)
        good = pd.DataFrame(np.ones((3, 6)), index=dates, columns=list("abcdef"))
        with pytest.raises(ValidationError):
            ScorePanel(market_cap=-good, vc=good, pp=good, na=good)
        with pytest.raises(ValidationError):
            ScorePanel(market_cap=good, vc=2 * good, pp=good, na=good)
        with pytest.raises(ValidationError):
            ScorePanel(market_cap=good)  # no scores at all
