import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crowdledger.metrics import (
    ConfusionCounts,
    EmptyCountsError,
    OneClassOnlyError,
    SingularError,
    TooFewSamplesError,
    UnderdeterminedError,
    attack_impact_regression,
    classification_metrics,
    format_ols_table,
    mean_ci,
    ols_fit,
    regularized_incomplete_beta,
    roc_auc,
    student_t_quantile,
    student_t_two_sided_p,
)

# two-sided p-values and 97.5% quantiles frozen from a reference t table
T_TABLE_P = [
    (2.0, 10, 0.073388034771),
    (1.0, 1, 0.5),
    (2.5, 3, 0.087706647008),
    (0.5, 47, 0.619408099804),
    (4.2, 7, 0.004035559925),
    (12.706204736174698, 1, 0.05),
]
T_TABLE_Q975 = [
    (1, 12.706204736432),
    (2, 4.302652729696),
    (4, 2.776445105198),
    (9, 2.262157162854),
    (29, 2.045229642133),
]


# ------------------------------------------------------------------ confusion


def test_classification_metrics_basic():
    m = classification_metrics(ConfusionCounts(tp=8, fp=2, tn=8, fn=2))
    assert (m.precision, m.recall, m.f1, m.accuracy) == pytest.approx((0.8, 0.8, 0.8, 0.8))
    assert not m.degenerate


def test_classification_metrics_perfect():
    m = classification_metrics(ConfusionCounts(tp=5, fp=0, tn=7, fn=0))
    assert m.precision == m.recall == m.f1 == m.accuracy == 1.0


def test_classification_metrics_degenerate_precision():
    m = classification_metrics(ConfusionCounts(tp=0, fp=0, tn=4, fn=2))
    assert m.precision == 0.0 and m.degenerate


def test_classification_metrics_empty():
    with pytest.raises(EmptyCountsError):
        classification_metrics(ConfusionCounts(0, 0, 0, 0))


def test_f1_is_harmonic_mean_property():
    rng = np.random.default_rng(0)
    for _ in range(50):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 30, size=4))
        if tp + fp == 0 or tp + fn == 0 or tp == 0:
            continue
        m = classification_metrics(ConfusionCounts(tp, fp, tn, fn))
        assert m.f1 == pytest.approx(
            2 * m.precision * m.recall / (m.precision + m.recall), abs=1e-12
        )


# ------------------------------------------------------------------------ roc


def test_roc_perfect_separation():
    curve = roc_auc([0.9, 0.8, 0.7, 0.2, 0.1], [1, 1, 1, -1, -1])
    assert curve.auc == 1.0
    assert curve.points[0] == (0.0, 0.0) and curve.points[-1] == (1.0, 1.0)


def test_roc_reversed_scores():
    curve = roc_auc([0.1, 0.2, 0.8, 0.9], [1, 1, -1, -1])
    assert curve.auc == 0.0


def test_roc_random_scores_near_half():
    rng = np.random.default_rng(1)
    scores = rng.normal(size=10_000)
    labels = rng.choice([-1, 1], size=10_000)
    assert roc_auc(scores, labels).auc == pytest.approx(0.5, abs=0.03)


def test_roc_one_class_only():
    with pytest.raises(OneClassOnlyError):
        roc_auc([0.1, 0.2], [1, 1])


def test_roc_points_monotone_and_tied_scores_grouped():
    curve = roc_auc([0.5, 0.5, 0.5, 0.2], [1, -1, 1, -1])
    fprs = [p[0] for p in curve.points]
    tprs = [p[1] for p in curve.points]
    assert fprs == sorted(fprs) and tprs == sorted(tprs)
    assert len(curve.points) == 3  # origin plus one step per distinct score


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 5, allow_nan=False),
                          st.sampled_from([-1, 1])), min_size=4, max_size=60))
def test_roc_invariant_under_monotone_transform(pairs):
    scores = [s for s, _ in pairs]
    labels = [lab for _, lab in pairs]
    if len(set(labels)) < 2:
        return
    base = roc_auc(scores, labels)
    squashed = roc_auc(np.tanh(np.asarray(scores) / 3.0), labels)
    assert squashed.auc == pytest.approx(base.auc, abs=1e-12)
    assert squashed.points == base.points


# --------------------------------------------------------------------- t tail


@pytest.mark.parametrize("t,df,expected", T_TABLE_P)
def test_two_sided_p_matches_reference_table(t, df, expected):
    assert student_t_two_sided_p(t, df) == pytest.approx(expected, abs=1e-4)


@pytest.mark.parametrize("df,expected", T_TABLE_Q975)
def test_quantile_matches_reference_table(df, expected):
    assert student_t_quantile(0.975, df) == pytest.approx(expected, abs=1e-6)


def test_incomplete_beta_edges():
    assert regularized_incomplete_beta(2.0, 3.0, 0.0) == 0.0
    assert regularized_incomplete_beta(2.0, 3.0, 1.0) == 1.0
    # symmetric case: I_{1/2}(a, a) = 1/2
    assert regularized_incomplete_beta(4.5, 4.5, 0.5) == pytest.approx(0.5, abs=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.floats(0.01, 40.0), st.integers(1, 60))
def test_p_values_in_range_and_monotone(t, df):
    p = student_t_two_sided_p(t, df)
    assert 0.0 <= p <= 1.0
    assert student_t_two_sided_p(t + 0.5, df) <= p + 1e-12


def test_mean_ci_constant_samples():
    assert mean_ci([1, 1, 1, 1]) == (1.0, 0.0)


def test_mean_ci_two_samples_frozen_value():
    mean, half = mean_ci([0.0, 2.0], level=0.95)
    assert mean == 1.0
    # t_{1,0.975} * s / sqrt(n) with s = sqrt(2): the quantile itself
    assert half == pytest.approx(12.706204736432, abs=1e-5)


def test_mean_ci_too_few():
    with pytest.raises(TooFewSamplesError):
        mean_ci([1.0])


# ------------------------------------------------------------------------ ols


def test_ols_exact_line():
    x = np.arange(10, dtype=float)
    design = np.column_stack([np.ones(10), x])
    y = 2.0 * x + 1.0
    res = ols_fit(design, y)
    assert np.allclose(res.coefficients, [1.0, 2.0], atol=1e-10)
    assert res.r_squared == pytest.approx(1.0, abs=1e-12)


def test_ols_intercept_only_is_mean():
    y = np.array([3.0, 5.0, 4.0, 8.0])
    res = ols_fit(np.ones((4, 1)), y)
    assert res.coefficients[0] == pytest.approx(y.mean(), abs=1e-12)


def test_ols_matches_numpy_oracle():
    rng = np.random.default_rng(2)
    x = np.column_stack([np.ones(50), rng.normal(size=(50, 2))])
    y = x @ np.array([0.5, -1.2, 2.0]) + rng.normal(scale=0.3, size=50)
    res = ols_fit(x, y)
    beta_ref = np.linalg.solve(x.T @ x, x.T @ y)
    assert np.allclose(res.coefficients, beta_ref, atol=1e-10)
    resid = y - x @ res.coefficients
    assert np.max(np.abs(x.T @ resid)) < 1e-8
    # reference standard errors via the covariance formula
    sigma2 = resid @ resid / (50 - 3)
    se_ref = np.sqrt(np.diag(sigma2 * np.linalg.inv(x.T @ x)))
    assert np.allclose(res.std_errors, se_ref, atol=1e-10)


def test_ols_p_values_match_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng = np.random.default_rng(3)
    x = np.column_stack([np.ones(40), rng.normal(size=(40, 2))])
    y = rng.normal(size=40)
    res = ols_fit(x, y)
    ref = 2.0 * scipy_stats.t.sf(np.abs(res.t_statistics), res.dof)
    assert np.allclose(res.p_values, ref, atol=1e-10)


def test_ols_singular_design():
    x = np.ones((10, 2))  # duplicated column
    with pytest.raises(SingularError):
        ols_fit(x, np.arange(10, dtype=float))


def test_ols_underdetermined():
    with pytest.raises(UnderdeterminedError):
        ols_fit(np.ones((3, 4)), np.zeros(3))


def test_ols_condition_warning():
    rng = np.random.default_rng(9)
    x = np.column_stack([np.ones(20), rng.normal(size=20), 1e-7 * rng.normal(size=20)])
    with pytest.warns(UserWarning):
        ols_fit(x, np.arange(20, dtype=float))


# -------------------------------------------------------------- attack impact


def synth_runs(n, seed=0, accuracy_fn=None):
    rng = np.random.default_rng(seed)
    runs = []
    for _ in range(n):
        normal = rng.uniform(30, 70)
        rest = 100.0 - normal
        shares = rng.dirichlet(np.ones(5)) * rest
        troll, rand, traitor, orch, target = shares
        accuracy = accuracy_fn(normal, troll, rand, traitor, orch) if accuracy_fn else 0.8
        runs.append(
            {
                "normal": normal, "troll": troll, "random": rand, "traitor": traitor,
                "orchestrated": orch, "target": target,
                "precision": accuracy, "recall": accuracy, "f1": accuracy,
                "accuracy": accuracy,
            }
        )
    return runs


def test_attack_regression_recovers_linear_ground_truth():
    runs = synth_runs(200, seed=4, accuracy_fn=lambda n, t, r, tr, o: 1.0 - 0.01 * t)
    res = attack_impact_regression(runs)["accuracy"]
    troll_coef = res.coefficients[2]
    assert troll_coef == pytest.approx(-0.01, abs=1e-9)
    assert res.r_squared > 0.999999


def test_attack_regression_constant_metrics():
    runs = synth_runs(60, seed=5)
    res = attack_impact_regression(runs)["f1"]
    assert np.allclose(res.coefficients[1:], 0.0, atol=1e-10)
    assert res.r_squared == pytest.approx(0.0, abs=1e-9)


def test_attack_regression_needs_enough_runs():
    with pytest.raises(UnderdeterminedError):
        attack_impact_regression(synth_runs(10))


def test_format_ols_table_contains_terms():
    runs = synth_runs(50, seed=6, accuracy_fn=lambda n, t, r, tr, o: 0.5 + 0.004 * n)
    table = format_ols_table(attack_impact_regression(runs))
    for term in ("intercept", "normal", "troll", "orchestrated", "R^2"):
        assert term in table
