import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvlab import generators as gen
from curvlab.curvature import min_kappa
from curvlab.functional import (OptConfig, alpha_logsob, alpha_mod, counterexample_chain,
                                counterexample_ratio, el_residual, entropy, logsob_ratio,
                                mixing_time, modlogsob_ratio)
from curvlab.spectral import spectral_gap, spectrum

from conftest import chains, p3, two_point

FAST = OptConfig(restarts=16)


def t2_lsi_grid(points=10 ** 6):
    """min over f = √2(cos t, sin t) of E/Ent(f²) on the two-point chain, in u = cos 2t."""
    t = (np.arange(points) + 0.5) / points * (np.pi / 2)
    u = np.cos(2 * t)
    E = u * u / (1 + np.sqrt(1 - u * u))
    small = np.abs(u) < 1e-2
    series = sum(u ** (2 * k) / (k * (2 * k - 1)) for k in range(1, 8))
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = (1 + u) * np.log1p(u) + (1 - u) * np.log1p(-u)
    Ent = 0.5 * np.where(small, series, direct)
    return float(np.min(E / Ent))


def mod_ratio_mp(chain, f):
    mp.mp.dps = 60
    m = [mp.mpf(v) for v in chain.m]
    f = [mp.mpf(v) for v in f]
    n = len(f)
    N = sum(mi * fi for mi, fi in zip(m, f))
    g = [fi / N for fi in f]
    ent = sum(mi * gi * mp.log(gi) for mi, gi in zip(m, g))
    E = mp.mpf(0)
    for x in range(n):
        for y in range(n):
            if x != y and chain.P[x, y] > 0:
                E += m[x] * mp.mpf(chain.P[x, y]) * (g[y] - g[x]) * (mp.log(g[y]) - mp.log(g[x]))
    return float(E / 2 / ent)


class TestEntropy:
    def test_constant(self, P3):
        assert entropy(P3, [2, 2, 2]) == 0.0

    def test_two_point(self, T2):
        expected = 0.5 * (1.8 * math.log(1.8) + 0.2 * math.log(0.2))
        assert math.isclose(entropy(T2, [1.8, 0.2]), expected, rel_tol=1e-13)
        assert math.isclose(expected, 0.3680642071684971, rel_tol=1e-15)

    @given(chains(n_max=5), st.floats(1e-3, 1e3), st.data())
    def test_scale_invariant_and_nonnegative(self, c, k, data):
        f = np.array(data.draw(st.lists(st.floats(0.01, 10), min_size=c.n, max_size=c.n)))
        e = entropy(c, f)
        assert e >= 0
        assert math.isclose(entropy(c, k * f), e, rel_tol=1e-9, abs_tol=1e-15)

    def test_rejects_nonpositive(self, T2):
        with pytest.raises(ValueError):
            entropy(T2, [1.0, 0.0])


class TestLogSobolev:
    def test_two_point_against_grid(self, T2):
        res = alpha_logsob(T2, FAST)
        assert abs(res.value - t2_lsi_grid()) <= 1e-6

    def test_witness_normalized(self, P3):
        res = alpha_logsob(P3, FAST)
        assert math.isclose(float(P3.m @ res.witness ** 2), 1.0, rel_tol=1e-12)
        assert res.value <= spectrum(P3).lam / 2 + 1e-12

    @settings(max_examples=6)
    @given(chains(n_min=2, n_max=3), st.data())
    def test_grid_certified_is_infimum(self, c, data):
        res = alpha_logsob(c, FAST)
        for _ in range(20):
            f = np.array(data.draw(st.lists(st.floats(-3, 3), min_size=c.n, max_size=c.n)))
            if np.ptp(np.abs(f)) > 1e-3:
                assert logsob_ratio(c, f) >= res.value - 1e-6


class TestModified:
    def test_two_point_sandwich(self, T2):
        a = alpha_logsob(T2, FAST).value
        am = alpha_mod(T2, FAST).value
        assert am <= 2 * spectrum(T2).lam + 1e-12
        assert am >= 4 * a - 1e-6

    @pytest.mark.parametrize("chain", [two_point(), p3(), gen.counterexample(0.5),
                                       gen.two_point(1.0, 3.0)], ids=["T2", "P3", "GEPS(.5)", "T2asym"])
    def test_sandwich_small(self, chain):
        assert 4 * alpha_logsob(chain, FAST).value <= alpha_mod(chain, FAST).value + 1e-6

    def test_counterexample_trend(self):
        hi = alpha_mod(gen.counterexample(0.1), FAST).value
        lo = alpha_mod(gen.counterexample(1e-4), FAST).value
        assert lo < hi

    def test_linearization_limit(self, T2):
        g = spectrum(T2).eigenfunction(1, T2)
        vals = [modlogsob_ratio(T2, 1 + e * g) for e in (1e-2, 1e-4, 1e-6)]
        assert abs(vals[-1] - 4.0) < 1e-5
        assert abs(vals[1] - 4.0) < abs(vals[0] - 4.0)

    @given(chains(n_max=5), st.data())
    def test_ratio_against_mp(self, c, data):
        f = np.array(data.draw(st.lists(st.floats(0.05, 20), min_size=c.n, max_size=c.n)))
        if np.ptp(f) < 1e-3:
            return
        assert math.isclose(modlogsob_ratio(c, f), mod_ratio_mp(c, f), rel_tol=1e-9)

    def test_witness_reproduces(self):
        c = gen.counterexample(0.01)
        res = alpha_mod(c, FAST)
        assert not res.limit
        assert math.isclose(modlogsob_ratio(c, res.witness), res.value, rel_tol=1e-9)
        assert math.isclose(float(c.m @ res.witness), 1.0, rel_tol=1e-12)


class TestEulerLagrange:
    def test_constant(self, P3):
        assert el_residual(P3, np.ones(3), 3.7) == 0.0

    def test_grid_minimizer(self, T2):
        res = alpha_mod(T2, FAST)
        assert el_residual(T2, res.witness, res.value) <= 1e-5

    def test_interior_minimizer(self):
        c = gen.counterexample(0.01)
        res = alpha_mod(c, FAST)
        assert el_residual(c, res.witness, res.value) <= 1e-5

    @settings(max_examples=10, deadline=None)
    @given(chains(n_min=4, n_max=5))
    def test_el_audit_gating(self, c):
        res = alpha_mod(c, FAST)
        lam = spectral_gap(c)
        audited = not res.limit and res.value < min(lam / 2, 2 * lam)
        assert (res.el_residual is not None) == audited
        if audited:
            assert res.el_residual <= 1e-5

    def test_negative_control(self):
        c = gen.counterexample(0.01)
        am = alpha_mod(c, FAST).value
        rng = np.random.default_rng(5)
        for _ in range(10):
            assert el_residual(c, np.exp(rng.standard_normal(3)), am) > 1e-3


class TestMixing:
    def test_two_point(self, T2):
        tau, _ = mixing_time(T2)
        assert abs(tau - 0.5) <= 1e-6

    def test_time_rescaling(self):
        a, _ = mixing_time(gen.path(4))
        b, _ = mixing_time(gen.path(4, 2.0))
        assert math.isclose(b, a / 2, rel_tol=1e-7)

    @pytest.mark.parametrize("chain", [two_point(), p3(), gen.counterexample(0.3)], ids=["T2", "P3", "GEPS"])
    def test_diaconis_saloff_coste(self, chain):
        a = alpha_logsob(chain, FAST).value
        tau, _ = mixing_time(chain)
        pi_star = float(chain.m.min())
        assert 1 / (2 * a) <= tau + 1e-6
        assert tau <= (4 + math.log(math.log(1 / pi_star))) / (4 * a) + 1e-6


class TestCounterexample:
    def test_rates(self):
        c = counterexample_chain(0.1)
        assert np.allclose([c.P[0, 1], c.P[1, 0], c.P[1, 2], c.P[2, 1]], [1, 10, 1, 20], rtol=1e-14)

    @pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3, 1e-4])
    def test_curvature_at_least_one(self, eps):
        assert min_kappa(counterexample_chain(eps)) >= 1 - 1e-9

    def test_domain(self):
        with pytest.raises(ValueError):
            counterexample_chain(1.5)

    @pytest.mark.parametrize("eps", [10.0 ** -k for k in range(1, 9)])
    def test_ratio_against_mp(self, eps):
        f = [eps, 1.0, -math.log(eps)]
        assert math.isclose(counterexample_ratio(eps), mod_ratio_mp(counterexample_chain(eps), f), rel_tol=1e-10)

    def test_ratio_decreasing(self):
        assert counterexample_ratio(1e-2) > counterexample_ratio(1e-4) > counterexample_ratio(1e-8)

    @pytest.mark.parametrize("eps", [1e-1, 1e-3])
    def test_ratio_above_optimizer(self, eps):
        assert counterexample_ratio(eps) >= alpha_mod(counterexample_chain(eps), FAST).value - 1e-9

    def test_ratio_below_curvature_bound(self):
        assert counterexample_ratio(1e-8) < 1.0
