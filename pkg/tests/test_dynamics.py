import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdledger.dynamics import (
    BadHorizonError,
    DynamicalSystem,
    EmptyCountsError,
    EquilibriumParams,
    LyapunovEstimate,
    LyapunovMethod,
    TooShortError,
    VoteSeries,
    equilibrium,
    gram_schmidt_qr,
    lyapunov_from_jacobians,
    lyapunov_from_series,
    qr_eigenvalues,
    raw_tangent_eigenvalues,
    shannon_entropy,
)

# ------------------------------------------------------------------- entropy


def test_entropy_single_category_is_zero():
    assert shannon_entropy({"up": 4, "down": 0}) == 0.0


def test_entropy_uniform_two_categories_is_one_bit():
    assert shannon_entropy({"up": 5, "down": 5}) == pytest.approx(1.0, abs=1e-12)


def test_entropy_eight_two_split():
    # direct evaluation: -0.8*log2(0.8) - 0.2*log2(0.2)
    expected = -(0.8 * math.log2(0.8) + 0.2 * math.log2(0.2))
    assert expected == pytest.approx(0.7219280948873623, abs=1e-15)
    assert shannon_entropy({"up": 8, "down": 2}) == pytest.approx(expected, abs=1e-9)


def test_entropy_empty_counts():
    with pytest.raises(EmptyCountsError):
        shannon_entropy({"up": 0, "down": 0})
    with pytest.raises(ValueError):
        shannon_entropy({"up": -1, "down": 3})


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=50), min_size=1, max_size=6))
def test_entropy_bounds_and_extremes(counts):
    total = sum(counts)
    if total == 0:
        return
    h = shannon_entropy(dict(enumerate(counts)))
    k = len(counts)
    assert -1e-12 <= h <= math.log2(k) + 1e-12
    nonzero = [c for c in counts if c > 0]
    if len(nonzero) == 1:
        assert h == 0.0
    if all(c == counts[0] for c in counts) and counts[0] > 0:
        assert h == pytest.approx(math.log2(k), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(min_value=0, max_value=50), min_size=2, max_size=6),
       st.randoms())
def test_entropy_permutation_invariance(counts, rnd):
    if sum(counts) == 0:
        return
    shuffled = counts[:]
    rnd.shuffle(shuffled)
    a = shannon_entropy(dict(enumerate(counts)))
    b = shannon_entropy(dict(enumerate(shuffled)))
    assert a == pytest.approx(b, abs=1e-12)


# ------------------------------------------------------ jacobian-based spectrum


def linear_map_system(rate):
    return DynamicalSystem(
        state_dim=1,
        step_fn=lambda x, t: rate * x,
        jacobian=lambda x, t: np.array([[rate]]),
        dt=1.0,
    )


def test_linear_map_exponent():
    est = lyapunov_from_jacobians(linear_map_system(0.5), [1.0], 0, 200)
    assert est.method is LyapunovMethod.JACOBIAN_PRODUCT
    assert est.exponents[0] == pytest.approx(math.log(0.5), abs=1e-6)


def test_identity_dynamics_zero_exponent():
    est = lyapunov_from_jacobians(linear_map_system(1.0), [1.0], 0, 100)
    assert est.exponents[0] == 0.0


def test_logistic_map_exponent_matches_orbit_average():
    # oracle: average of log|f'(x_t)| along the same orbit
    x = 0.2
    for _ in range(100):
        x = 4.0 * x * (1.0 - x)
    x0, steps = x, 100_000
    acc = 0.0
    for _ in range(steps):
        acc += math.log(abs(4.0 - 8.0 * x))
        x = 4.0 * x * (1.0 - x)
    oracle = acc / steps

    system = DynamicalSystem(
        state_dim=1,
        step_fn=lambda x, t: 4.0 * x * (1.0 - x),
        jacobian=lambda x, t: np.array([[4.0 - 8.0 * x[0]]]),
        dt=1.0,
    )
    est = lyapunov_from_jacobians(system, [x0], 0, steps)
    assert est.exponents[0] == pytest.approx(oracle, abs=1e-9)
    assert est.exponents[0] == pytest.approx(math.log(2.0), abs=0.01)


def test_diagonal_system_recovers_each_rate():
    rates = np.array([0.5, 0.8, 1.25])
    system = DynamicalSystem(
        state_dim=3,
        step_fn=lambda x, t: rates * x,
        jacobian=lambda x, t: np.diag(rates),
        dt=1.0,
    )
    est = lyapunov_from_jacobians(system, [1.0, 1.0, 1.0], 0, 300)
    expected = sorted(np.log(rates), reverse=True)
    assert np.allclose(est.exponents, expected, atol=1e-6)


def test_field_jacobian_matches_euler_decay():
    # increment-field form of dx/dt = -x sampled at dt: propagator 1 + J dt
    dt = 0.001
    system = DynamicalSystem(
        state_dim=1,
        step_fn=lambda x, t: x + (-x) * dt,
        jacobian=lambda x, t: np.array([[-1.0]]),
        dt=dt,
        jacobian_kind="field",
    )
    est = lyapunov_from_jacobians(system, [1.0], 0.0, 10.0)
    assert est.exponents[0] == pytest.approx(math.log(1.0 - dt) / dt, rel=1e-9)


def test_bad_horizon():
    with pytest.raises(BadHorizonError):
        lyapunov_from_jacobians(linear_map_system(0.5), [1.0], 5, 5)


def test_raw_tangent_eigenvalues_short_horizon():
    rates = np.array([0.5, 0.9])
    system = DynamicalSystem(
        state_dim=2,
        step_fn=lambda x, t: rates * x,
        jacobian=lambda x, t: np.diag(rates),
        dt=1.0,
    )
    eigs = raw_tangent_eigenvalues(system, [1.0, 1.0], 0, 20)
    assert np.allclose(sorted(np.abs(eigs), reverse=True),
                       sorted([0.9**20, 0.5**20], reverse=True), rtol=1e-9)


def test_qr_eigenvalues_against_numpy_separated_spectra():
    # similarity transforms of spectra with distinct moduli, the helper's use case
    rng = np.random.default_rng(3)
    for _ in range(20):
        d = int(rng.integers(2, 7))
        spectrum = np.array(sorted(rng.uniform(0.3, 4.0, size=d) * 1.7 ** np.arange(d)))
        p = rng.normal(size=(d, d)) + np.eye(d) * 2.0
        m = p @ np.diag(spectrum) @ np.linalg.inv(p)
        mine = np.sort(np.abs(qr_eigenvalues(m, sweeps=200)))
        ref = np.sort(np.abs(np.linalg.eigvals(m)))
        assert np.allclose(mine, ref, rtol=1e-6, atol=1e-8)


def test_qr_eigenvalues_complex_pair():
    # rotation-scaling block: eigenvalues r*exp(+-i theta)
    r, theta = 0.8, 0.6
    block = r * np.array([[math.cos(theta), -math.sin(theta)],
                          [math.sin(theta), math.cos(theta)]])
    m = np.zeros((3, 3))
    m[:2, :2] = block
    m[2, 2] = 2.0
    eigs = qr_eigenvalues(m, sweeps=200)
    ref = np.linalg.eigvals(m)
    assert np.allclose(np.sort(np.abs(eigs)), np.sort(np.abs(ref)), rtol=1e-8)
    assert np.allclose(sorted(e.imag for e in eigs), sorted(e.imag for e in ref), atol=1e-8)


def test_qr_eigenvalues_symmetric_matches_numpy():
    rng = np.random.default_rng(11)
    for _ in range(10):
        d = int(rng.integers(2, 8))
        s = rng.normal(size=(d, d))
        m = (s + s.T) / 2.0
        mine = np.sort(qr_eigenvalues(m, sweeps=400).real)
        ref = np.sort(np.linalg.eigvalsh(m))
        assert np.allclose(mine, ref, atol=1e-6)


def test_gram_schmidt_qr_reconstructs():
    rng = np.random.default_rng(5)
    m = rng.normal(size=(5, 5))
    q, r = gram_schmidt_qr(m)
    assert np.allclose(q @ r, m, atol=1e-10)
    assert np.allclose(q.T @ q, np.eye(5), atol=1e-10)
    assert np.all(np.diag(r) >= 0)


# ------------------------------------------------------------ series estimator


def series_oracle(values):
    s = np.cumsum(values) / np.arange(1, len(values) + 1)
    d = np.abs(np.diff(s))
    d = np.where(d == 0, 1e-12, d)
    return float(np.mean(np.log(d[1:] / d[:-1])))


def test_series_constant_votes_zero():
    est = lyapunov_from_series(VoteSeries([1] * 20))
    assert est.method is LyapunovMethod.SERIES_DIVERGENCE
    assert abs(est.exponents[0]) < 1e-9


def test_series_alternating_is_negative_and_matches_oracle():
    values = [1 if i % 2 == 0 else -1 for i in range(40)]
    est = lyapunov_from_series(VoteSeries(values))
    assert est.exponents[0] == pytest.approx(series_oracle(values), abs=1e-12)
    assert est.exponents[0] < 0


def test_series_reversal_is_non_negative():
    values = [1] * 50 + [-1] * 50
    est = lyapunov_from_series(VoteSeries(values))
    assert est.exponents[0] == pytest.approx(series_oracle(values), abs=1e-12)
    assert est.exponents[0] >= 0


def test_series_too_short():
    with pytest.raises(TooShortError):
        lyapunov_from_series(VoteSeries([1, -1, 1]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.sampled_from([-1, 1]), min_size=4, max_size=60))
def test_series_matches_direct_evaluation(values):
    est = lyapunov_from_series(values)
    assert est.exponents[0] == pytest.approx(series_oracle(values), abs=1e-10)


# ----------------------------------------------------------------- equilibrium


def make_estimate(*exponents):
    return LyapunovEstimate(tuple(exponents), LyapunovMethod.SERIES_DIVERGENCE)


def test_equilibrium_truth_table():
    params = EquilibriumParams(tau=0.9, c_min=10)
    cases = [
        ((-0.1,), 0.3, 50, True),    # all three conjuncts hold
        ((0.2, -0.5), 0.3, 50, False),  # a non-negative exponent
        ((-1.0,), 0.0, 5, False),    # too few votes
        ((-0.1,), 0.95, 50, False),  # entropy at/above threshold
        ((0.1,), 0.95, 5, False),
        ((0.1,), 0.3, 5, False),
        ((0.1,), 0.95, 50, False),
        ((-0.1,), 0.95, 5, False),
    ]
    for exponents, h, c, expected in cases:
        assert equilibrium(make_estimate(*exponents), h, params, c) is expected


def test_equilibrium_boundaries_are_strict():
    params = EquilibriumParams(tau=0.9, c_min=10)
    assert not equilibrium(make_estimate(0.0), 0.3, params, 50)  # zero exponent fails
    assert not equilibrium(make_estimate(-0.1), 0.9, params, 50)  # H must be < tau
    assert equilibrium(make_estimate(-0.1), 0.3, params, 10)  # C == C_min passes


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(-2, 2, allow_nan=False), min_size=1, max_size=4),
    st.floats(0, 1, allow_nan=False),
    st.integers(0, 100),
)
def test_equilibrium_monotonicity(exponents, h, c):
    params = EquilibriumParams(tau=0.9, c_min=10)
    base = equilibrium(make_estimate(*exponents), h, params, c)
    if base:
        better = [lam - 0.5 for lam in exponents]
        assert equilibrium(make_estimate(*better), h / 2.0, params, c + 10)


def test_params_validation():
    with pytest.raises(ValueError):
        EquilibriumParams(tau=0.0)
    with pytest.raises(ValueError):
        EquilibriumParams(tau=0.5, c_min=0)
