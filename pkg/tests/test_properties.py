"""Property-based checks: eta shape, constraint activity, solver residuals."""

import math

import numpy as np
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from covertjam.covertness import eta, solve_chi_star
from covertjam.fast_varying import (
    chi_given_tau,
    ergodic_sum_rate,
    tau_given_chi,
    zeta_vector,
)
from covertjam.quasi_static import (
    closed_form_solve,
    poa_solve,
    single_receiver_gamma,
    tv_budget,
)
from covertjam.scenario import (
    ScenarioConfig,
    beamforming_stats,
    derive_fast_varying,
    derive_quasi_static,
    sample_scenario,
)

unit = st.floats(min_value=1e-9, max_value=1.0 - 1e-9)


@given(unit)
def test_eta_stays_below_identity(x):
    v = float(eta(x))
    assert 0.0 <= v <= 1.0
    assert v <= x


@given(unit, unit)
def test_eta_monotone_increasing(x, y):
    lo, hi = min(x, y), max(x, y)
    assume(hi - lo > 1e-12)
    assert float(eta(hi)) > float(eta(lo)) - 1e-15


@given(unit, unit)
def test_eta_midpoint_concave(x, y):
    mid = float(eta(0.5 * (x + y)))
    chord = 0.5 * (float(eta(x)) + float(eta(y)))
    assert mid >= chord - 1e-13


@given(st.floats(min_value=1e-6, max_value=0.99))
def test_chi_star_inverts_eta(epsilon):
    chi = solve_chi_star(epsilon)
    assert float(eta(chi)) <= epsilon
    if chi < 1.0 - 1e-9:
        assert float(eta(min(chi * (1.0 + 1e-9), 1.0 - 1e-15))) >= \
            epsilon - 1e-12


@given(st.floats(min_value=0.5, max_value=3.5),
       st.floats(min_value=-3.0, max_value=0.3),
       st.floats(min_value=-3.0, max_value=-0.05))
def test_threshold_stationarity_residual(log_a, log_bm1, log_chi):
    a = 10.0 ** log_a
    b = 1.0 + 10.0 ** log_bm1
    chi = 10.0 ** log_chi
    gamma = single_receiver_gamma(a, b, chi)
    kappa = 1.0 / gamma
    m = a * chi * kappa
    # Independent restatement of the optimality condition:
    # exp(A chi k) = B (A chi k) (1 + k) ln(1 + 1/k) at k = 1/gamma.
    xi = math.exp(m) - b * m * (1.0 + kappa) * math.log1p(1.0 / kappa)
    assert abs(xi - b) / math.exp(m) <= 1e-10


@settings(deadline=None, max_examples=25)
@given(st.integers(min_value=0, max_value=10**6),
       st.integers(min_value=1, max_value=5),
       st.floats(min_value=0.05, max_value=0.95),
       st.floats(min_value=0.005, max_value=0.2),
       st.integers(min_value=5, max_value=200))
def test_power_budget_activity(seed, k, tau, epsilon, n_d):
    params = derive_fast_varying(
        sample_scenario(ScenarioConfig(K=k, seed=seed)), 100, 100, epsilon)
    zetas = zeta_vector(params, float(n_d))
    budget = 2.0 * epsilon ** 2 / params.L
    chis, lam = chi_given_tau(tau, params, zetas, budget)
    assert lam > 0.0
    assert np.all(chis > 0.0)
    used = 0.5 * float(np.dot(zetas, chis * chis))
    assert abs(used - budget) <= 1e-10 * budget


@settings(deadline=None, max_examples=25)
@given(st.integers(min_value=0, max_value=10**6),
       st.integers(min_value=1, max_value=4))
def test_pilot_fraction_local_optimality(seed, k):
    params = derive_fast_varying(
        sample_scenario(ScenarioConfig(K=k, seed=seed)), 50, 20, 0.05)
    rng = np.random.default_rng(seed + 1)
    chis = rng.uniform(1e-6, 1e-3, k)
    tau = tau_given_chi(chis, params)
    best = ergodic_sum_rate(chis, tau, params)
    for step in (1e-5, -1e-5):
        other = tau + step
        if 0.0 < other < 1.0:
            assert best >= ergodic_sum_rate(chis, other, params) \
                - 1e-12 * max(1.0, abs(best))


@settings(deadline=None, max_examples=10)
@given(st.integers(min_value=0, max_value=10**6))
def test_covertness_activity_at_optima(seed):
    inst = sample_scenario(ScenarioConfig(K=2, seed=seed))
    params = derive_quasi_static(inst, 0.005)
    res = poa_solve(params, delta=1e-3)
    assert 0.0 <= params.epsilon - tv_budget(res.chi) <= 1e-10 * params.epsilon
    single = sample_scenario(ScenarioConfig(K=1, seed=seed))
    closed = closed_form_solve(derive_quasi_static(single, 0.005))
    assert abs(tv_budget(closed.chi) - 0.005) <= 1e-10 * 0.005


@given(st.integers(min_value=1, max_value=10**4),
       st.floats(min_value=1.0, max_value=1e4),
       st.floats(min_value=0.0, max_value=1e4))
def test_gain_variance_split(m, n_t, mu):
    g, e = beamforming_stats(m, n_t, mu)
    total = (n_t * m + mu) / (n_t + mu)
    assert abs(g + e - total) <= 1e-12 * total
    # The variance share M - G grows from 1 - pi/4 at M = 1 toward 1/4,
    # which pins down the log-gamma route at both ends.
    g_const = math.exp(2.0 * (gammaln(m + 0.5) - gammaln(m)))
    assert 1.0 - math.pi / 4.0 - 1e-12 <= m - g_const <= 0.25 + 1e-6
