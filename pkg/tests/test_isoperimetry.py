import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvlab import generators as gen
from curvlab.isoperimetry import (SubsetTable, boundary_measure, boundary_measure_energy, cheeger,
                                  closure, concentration_profile, gaussian_rho, iso_profile,
                                  obs_diameter, subset_diameter)

from conftest import c4, chains, p3, two_point


def subsets(n, proper=True):
    lo, hi = (1, n - 1) if proper else (1, n)
    for k in range(lo, hi + 1):
        yield from (list(s) for s in itertools.combinations(range(n), k))


def boundary_oracle(c, W):
    return sum(c.m[x] * c.P[x, y] * c.D[x, y] for x in W for y in range(c.n) if y not in W)


def cheeger_oracle(c, weight):
    f = {"plain": lambda v: v, "log": lambda v: -v * math.log(v),
         "sqrtlog": lambda v: v * math.sqrt(math.log(1 / v))}[weight]
    vals = [boundary_oracle(c, W) / f(c.m[W].sum()) for W in subsets(c.n)
            if c.m[W].sum() <= 0.5 + 1e-12 and f(c.m[W].sum()) > 0]
    return min(vals, default=math.inf)


def obs_diameter_oracle(c, eps):
    """sup of min_{a∈A,b∈B} d(a,b) over all pairs of subsets meeting the mass constraints."""
    best = 0.0
    all_sets = list(subsets(c.n, proper=False))
    for B in all_sets:
        clB = set(B) | {y for x in B for y in range(c.n) if c.adjacency[x, y]}
        if c.m[sorted(clB)].sum() < eps - 1e-12:
            continue
        for A in all_sets:
            if c.m[A].sum() >= eps - 1e-12:
                best = max(best, c.D[np.ix_(A, B)].min())
    return best


def concentration_oracle(c, r):
    worst = 0.0
    for A in subsets(c.n, proper=False):
        if c.m[A].sum() >= 0.5 - 1e-12:
            far = [x for x in range(c.n) if c.D[x, A].min() > r]
            worst = max(worst, c.m[far].sum())
    return worst


class TestBoundary:
    def test_cycle_vertex(self, C4):
        assert math.isclose(boundary_measure(C4, [0]), 0.25)
        assert math.isclose(boundary_measure_energy(C4, [0]), 0.25)

    def test_cycle_adjacent_pair(self, C4):
        assert math.isclose(boundary_measure(C4, [0, 1]), 0.25)
        assert math.isclose(boundary_measure_energy(C4, [0, 1]), 0.25)

    @pytest.mark.parametrize("W", [[], [0, 1, 2, 3]])
    def test_improper(self, C4, W):
        with pytest.raises(ValueError):
            boundary_measure(C4, W)

    @given(chains(n_max=6), st.data())
    def test_against_oracle_and_energy_identity(self, c, data):
        W = sorted(data.draw(st.sets(st.integers(0, c.n - 1), min_size=1, max_size=c.n - 1)))
        b = boundary_measure(c, W)
        assert math.isclose(b, boundary_oracle(c, W), rel_tol=1e-12, abs_tol=1e-15)
        assert math.isclose(b, boundary_measure_energy(c, W), rel_tol=1e-10, abs_tol=1e-14)

    @settings(max_examples=10)
    @given(chains(n_max=6))
    def test_table_matches(self, c):
        t = SubsetTable(c)
        for bits in range(1, (1 << c.n) - 1):
            W = [v for v in range(c.n) if bits >> v & 1]
            assert math.isclose(t.boundary[bits], boundary_oracle(c, W), rel_tol=1e-12, abs_tol=1e-15)


class TestClosure:
    def test_path_endpoint(self, P3):
        assert closure(P3, [2]).tolist() == [False, True, True]

    def test_full(self, P3):
        assert closure(P3, [0, 1, 2]).all()

    def test_cycle_vertex(self, C4):
        assert closure(C4, [0]).sum() == 3 and not closure(C4, [0])[2]

    def test_subset_diameter_is_ambient(self):
        c = gen.cycle(6)
        # {0, 2} is disconnected as an induced subgraph but has ambient diameter 2
        assert subset_diameter(c, [0, 2]) == 2.0


class TestCheeger:
    def test_cycle(self, C4):
        res = cheeger(C4)
        assert math.isclose(res.value, 0.5)
        assert len(res.witness) == 2 and C4.adjacency[res.witness[0], res.witness[1]]

    def test_two_point(self, T2):
        assert math.isclose(cheeger(T2).value, 1.0)

    @pytest.mark.parametrize("weight", ["plain", "log", "sqrtlog"])
    def test_witness_audit(self, weight):
        c = gen.hypercube(3)
        res = cheeger(c, weight)
        v = res.mass
        denom = {"plain": v, "log": -v * math.log(v), "sqrtlog": v * math.sqrt(math.log(1 / v))}[weight]
        assert math.isclose(res.value * denom, boundary_measure(c, res.witness), rel_tol=1e-12)

    @settings(max_examples=15)
    @given(chains(n_max=6))
    def test_against_oracle(self, c):
        for weight in ("plain", "log", "sqrtlog"):
            assert math.isclose(cheeger(c, weight).value, cheeger_oracle(c, weight), rel_tol=1e-10)

    def test_unknown_weight(self, C4):
        with pytest.raises(ValueError):
            cheeger(C4, "cube")

    def test_cap(self):
        with pytest.raises(ValueError):
            cheeger(gen.path(17))


class TestObsDiameter:
    def test_complete(self):
        assert obs_diameter(gen.complete(3), 1 / 8).value == 1.0

    def test_path(self, P3):
        res = obs_diameter(P3, 1 / 3)
        assert res.value == 2.0 and res.exact
        assert P3.D[np.ix_(res.A, res.B)].min() == 2.0

    def test_two_point(self, T2):
        assert obs_diameter(T2, 0.5).value == 1.0

    def test_domain(self, T2):
        with pytest.raises(ValueError):
            obs_diameter(T2, 0.0)
        with pytest.raises(ValueError):
            obs_diameter(T2, 0.5, mode="guess")

    @settings(max_examples=12)
    @given(chains(n_max=5, lengths=True), st.sampled_from([1 / 8, 1 / 4, 1 / 3, 1 / 2, 0.9]))
    def test_exact_against_oracle(self, c, eps):
        res = obs_diameter(c, eps)
        assert res.value == obs_diameter_oracle(c, eps)
        assert c.m[res.A].sum() >= eps - 1e-12
        assert c.m[closure(c, res.B)].sum() >= eps - 1e-12

    @settings(max_examples=12)
    @given(chains(n_max=6), st.sampled_from([1 / 8, 1 / 4, 1 / 2]))
    def test_heuristic_is_lower_bound(self, c, eps):
        h = obs_diameter(c, eps, mode="heuristic")
        assert not h.exact
        assert h.value <= obs_diameter(c, eps).value

    def test_nonincreasing_in_eps(self):
        c = gen.path(7)
        vals = [obs_diameter(c, e).value for e in (0.05, 0.125, 0.25, 0.5)]
        assert vals == sorted(vals, reverse=True)


class TestConcentration:
    def test_cycle(self, C4):
        prof = concentration_profile(C4)
        assert prof[0][0] == 0.5 and all(v == 0 for r, (v, _) in prof.items() if r >= 1)

    @pytest.mark.parametrize("n", [2, 4, 6])
    def test_complete(self, n):
        prof = concentration_profile(gen.complete(n))
        assert all(v == 0 for r, (v, _) in prof.items() if r >= 1)

    @settings(max_examples=15)
    @given(chains(n_max=6))
    def test_against_oracle_and_monotone(self, c):
        prof = concentration_profile(c)
        vals = [prof[r][0] for r in sorted(prof)]
        assert all(a >= b for a, b in zip(vals, vals[1:]))
        for r, (v, A) in prof.items():
            assert math.isclose(v, concentration_oracle(c, r), abs_tol=1e-12)
            assert c.m[A].sum() >= 0.5 - 1e-12


class TestRho:
    def test_cycle_infinite(self, C4):
        assert gaussian_rho(concentration_profile(C4)) == math.inf

    def test_hypercube_finite(self):
        c = gen.hypercube(3)
        prof = concentration_profile(c)
        rho = gaussian_rho(prof)
        expected = min(-math.log(concentration_oracle(c, r)) / r ** 2
                       for r in range(1, 4) if concentration_oracle(c, r) > 0)
        assert math.isfinite(rho) and math.isclose(rho, expected, rel_tol=1e-12)

    def test_synthetic(self):
        assert math.isclose(gaussian_rho({0: 0.5, 1: math.exp(-2)}), 2.0)

    def test_profile_bundle(self):
        prof = iso_profile(c4(), eps_values=(1 / 8, 1 / 4))
        assert math.isclose(prof.h.value, 0.5) and prof.rho == math.inf
        assert set(prof.diam_obs) == {1 / 8, 1 / 4}
        assert prof.h_log.value >= 0 and prof.h_sqrtlog.value >= 0
        assert iso_profile(p3()).concentration[0][0] > 0
        assert two_point() is not None
