import numpy as np
import pytest

from ffcc.metrics import MetricSummary, angular_error, entropy, entropy_ordered_error, summarize


def eo_error_direct(pairs):
    """Definition-level oracle: 2x the trapezoid area under the cumulative
    error polyline with images sorted by ascending entropy, normalized."""
    order = np.argsort([p[1] for p in pairs], kind="stable")
    errors = [pairs[k][0] for k in order]
    n = len(errors)
    cumsum = np.concatenate([[0.0], np.cumsum(errors)])
    area = 0.0
    for k in range(1, n + 1):
        area += (cumsum[k - 1] + cumsum[k]) / 2.0 * (1.0 / n)
    return 2.0 * area / n


def test_angular_error_identical_vectors():
    assert angular_error((0.2, 0.5, 0.3), (0.2, 0.5, 0.3)) == 0.0


def test_angular_error_orthogonal():
    assert abs(angular_error((1, 0, 0), (0, 1, 0)) - 90.0) < 1e-12


def test_angular_error_direct_case():
    got = angular_error((1, 1, 1), (1, 1, 0))
    assert abs(got - np.degrees(np.arccos(2.0 / np.sqrt(6.0)))) < 1e-12
    assert abs(got - 35.26438968) < 1e-6


def test_angular_error_symmetric_and_scale_invariant():
    rng = np.random.default_rng(0)
    for _ in range(50):
        a = rng.uniform(0.01, 1.0, 3)
        b = rng.uniform(0.01, 1.0, 3)
        assert abs(angular_error(a, b) - angular_error(b, a)) < 1e-12
        assert abs(angular_error(a, b) - angular_error(3.7 * a, 0.2 * b)) < 1e-9


def test_angular_error_zero_vector_rejected():
    with pytest.raises(ValueError):
        angular_error((0, 0, 0), (1, 1, 1))


def test_summarize_constant_list():
    s = summarize([2.0, 2.0, 2.0, 2.0, 2.0])
    for name in ("mean", "median", "trimean", "best25", "worst25", "avg"):
        assert getattr(s, name) == pytest.approx(2.0, abs=1e-12)


def test_summarize_hand_computed_1234():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s.mean == pytest.approx(2.5, abs=1e-12)
    assert s.median == pytest.approx(2.5, abs=1e-12)
    # linear-interpolated quartiles: Q1 = 1.75, Q3 = 3.25
    assert s.trimean == pytest.approx(2.5, abs=1e-12)
    assert s.best25 == pytest.approx(1.0, abs=1e-12)
    assert s.worst25 == pytest.approx(4.0, abs=1e-12)
    assert s.avg == pytest.approx((2.5 * 2.5 * 2.5 * 1.0 * 4.0) ** 0.2, abs=1e-12)


def test_summarize_hand_computed_eight():
    s = summarize([8.0, 1.0, 5.0, 2.0, 7.0, 3.0, 6.0, 4.0])
    assert s.mean == pytest.approx(4.5, abs=1e-12)
    assert s.median == pytest.approx(4.5, abs=1e-12)
    # Q1 = 2.75, Q3 = 6.25 under linear interpolation
    assert s.trimean == pytest.approx((2.75 + 9.0 + 6.25) / 4.0, abs=1e-12)
    assert s.best25 == pytest.approx(1.5, abs=1e-12)
    assert s.worst25 == pytest.approx(7.5, abs=1e-12)


def test_summarize_permutation_invariant():
    rng = np.random.default_rng(1)
    errs = rng.uniform(0.1, 20.0, 31)
    s1 = summarize(errs)
    s2 = summarize(rng.permutation(errs))
    assert s1 == s2


def test_summarize_order_invariants():
    rng = np.random.default_rng(2)
    for _ in range(20):
        s = summarize(rng.uniform(0.0, 15.0, int(rng.integers(1, 40))))
        assert s.best25 <= s.median + 1e-12
        assert s.median <= s.worst25 + 1e-12


def test_summarize_empty_rejected():
    with pytest.raises(ValueError):
        summarize([])


def test_entropy_closed_forms():
    assert entropy(np.eye(2)) == pytest.approx(0.0, abs=1e-15)
    assert entropy(3.0 * np.eye(2)) == pytest.approx(np.log(3.0), abs=1e-12)
    sigma = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert entropy(2.0 * sigma) > entropy(sigma)


def test_entropy_rejects_non_pd():
    with pytest.raises(ValueError):
        entropy(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_eo_error_single_element():
    assert entropy_ordered_error([(3.2, -5.0)]) == pytest.approx(3.2, abs=1e-12)


def test_eo_error_matches_direct_construction():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(1, 30))
        pairs = [(float(rng.uniform(0, 10)), float(rng.uniform(-8, 0))) for _ in range(n)]
        assert entropy_ordered_error(pairs) == pytest.approx(eo_error_direct(pairs), abs=1e-12)


def test_eo_error_equals_mean_for_uninformative_entropy():
    # constant errors: any ordering gives exactly the mean
    pairs = [(2.5, e) for e in np.random.default_rng(4).uniform(-5, 0, 17)]
    assert entropy_ordered_error(pairs) == pytest.approx(2.5, abs=1e-12)


def test_eo_error_ordering_inequality():
    rng = np.random.default_rng(5)
    for _ in range(100):
        errs = rng.uniform(0.0, 10.0, int(rng.integers(2, 50)))
        mean = errs.mean()
        sorted_pairs = [(e, k) for k, e in enumerate(np.sort(errs))]
        anti_pairs = [(e, k) for k, e in enumerate(np.sort(errs)[::-1])]
        assert entropy_ordered_error(sorted_pairs) <= mean + 1e-12
        assert entropy_ordered_error(anti_pairs) >= mean - 1e-12


def test_eo_error_perfect_correlation_below_mean():
    errs = np.array([1.0, 2.0, 5.0, 9.0])
    pairs = [(e, e) for e in errs]
    assert entropy_ordered_error(pairs) < errs.mean()


def test_eo_error_stable_ties():
    # equal entropies: input order decides, deterministically
    pairs = [(4.0, 0.0), (1.0, 0.0), (7.0, 0.0)]
    assert entropy_ordered_error(pairs) == pytest.approx(eo_error_direct(pairs), abs=1e-12)


def test_eo_error_empty_rejected():
    with pytest.raises(ValueError):
        entropy_ordered_error([])
