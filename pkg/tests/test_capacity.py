import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvlab import generators as gen
from curvlab.capacity import alpha_cap, alpha_cap_theta, brute_force_pairs, capacity
from curvlab.chain import MarkovChain, dirichlet_form
from curvlab.spectral import log_mean

from conftest import chains


def energy_minimizer(chain, A, B):
    """argmin of f W f with f = 0 on A, 1 on B, via the energy matrix normal equations."""
    W = chain.energy_matrix
    f = np.zeros(chain.n)
    f[list(B)] = 1.0
    free = [v for v in range(chain.n) if v not in A and v not in B]
    if free:
        fixed = [v for v in range(chain.n) if v not in free]
        f[free] = np.linalg.solve(W[np.ix_(free, free)], -W[np.ix_(free, fixed)] @ f[fixed])
    return f, float(f @ W @ f)


def alpha_cap_oracle(chain):
    best = math.inf
    for A, B, cap in brute_force_pairs(chain):
        mA, mB = chain.m[A].sum(), chain.m[B].sum()
        if mB >= 0.5 - 1e-10:
            best = min(best, cap / (mA * math.log(1 + math.e ** 2 / mA)))
    return best


def alpha_cap_theta_oracle(chain):
    return min(log_mean(cap / chain.m[A].sum(), cap / chain.m[B].sum())
               for A, B, cap in brute_force_pairs(chain))


class TestCapacity:
    def test_two_point(self, T2):
        res = capacity(T2, ["a"], ["b"])
        assert res.value == 0.5 and list(res.potential) == [0, 1]

    def test_path(self, P3):
        res = capacity(P3, [0], [2])
        assert np.allclose(res.potential, [0, 0.5, 1])
        assert math.isclose(res.value, 1 / 6)

    def test_no_interior(self, P3):
        assert math.isclose(capacity(P3, [0, 1], [2]).value, dirichlet_form(P3, [0, 0, 1]))

    def test_overlap_rejected(self, P3):
        with pytest.raises(ValueError):
            capacity(P3, [0, 1], [1, 2])

    @given(chains(n_max=7), st.data())
    def test_against_energy_minimizer(self, c, data):
        labels = data.draw(st.lists(st.integers(0, 2), min_size=c.n, max_size=c.n))
        A = [v for v in range(c.n) if labels[v] == 1]
        B = [v for v in range(c.n) if labels[v] == 2]
        if not A or not B:
            return
        res = capacity(c, A, B)
        f, E = energy_minimizer(c, A, B)
        assert np.allclose(res.potential, f, atol=1e-9)
        assert math.isclose(res.value, E, rel_tol=1e-9, abs_tol=1e-13)
        assert abs(res.value - dirichlet_form(c, res.potential)) <= 1e-10 * max(1.0, res.value)
        # any other admissible function has at least the same energy
        g = res.potential.copy()
        free = labels.count(0)
        if free:
            g[[v for v in range(c.n) if labels[v] == 0]] += 0.1
            assert dirichlet_form(c, g) >= res.value - 1e-12

    @given(chains(n_max=6), st.data())
    def test_symmetric(self, c, data):
        A = [0]
        B = [c.n - 1]
        assert math.isclose(capacity(c, A, B).value, capacity(c, B, A).value, rel_tol=1e-9)


class TestIsocapacitary:
    def test_two_point(self, T2):
        value, A, B = alpha_cap(T2)
        assert math.isclose(value, 0.5 / (0.5 * math.log(1 + 2 * math.e ** 2)), rel_tol=1e-12)

    def test_two_point_theta(self, T2):
        assert math.isclose(alpha_cap_theta(T2)[0], 1.0)

    def test_path_theta_oracle(self, P3):
        assert math.isclose(alpha_cap_theta(P3)[0], alpha_cap_theta_oracle(P3), rel_tol=1e-12)

    def test_theta_scaling(self, P3):
        assert math.isclose(alpha_cap_theta(gen.path(3, 2.0))[0], 2 * alpha_cap_theta(P3)[0], rel_tol=1e-12)

    def test_cap(self):
        with pytest.raises(ValueError):
            alpha_cap(gen.path(13))

    @settings(max_examples=15)
    @given(chains(n_max=6))
    def test_against_brute_force(self, c):
        assert math.isclose(alpha_cap(c)[0], alpha_cap_oracle(c), rel_tol=1e-9)
        assert math.isclose(alpha_cap_theta(c)[0], alpha_cap_theta_oracle(c), rel_tol=1e-9)

    @settings(max_examples=15)
    @given(chains(n_max=6), st.data())
    def test_monotone_in_weights(self, c, data):
        x = data.draw(st.integers(0, c.n - 1))
        y = data.draw(st.integers(0, c.n - 1))
        if x == y:
            return
        w = c.m[:, None] * c.rates
        bump = data.draw(st.floats(0.01, 2.0))
        w[x, y] += bump
        w[y, x] += bump
        heavier = MarkovChain.from_weights(w, m=c.m)
        assert alpha_cap(heavier)[0] >= alpha_cap(c)[0] - 1e-12

    @settings(max_examples=15)
    @given(chains(n_max=7))
    def test_sandwich(self, c):
        ac = alpha_cap(c)[0]
        at = alpha_cap_theta(c)[0]
        assert 0.5 * ac <= at * (1 + 1e-9) and at <= 3 * ac * (1 + 1e-9)
