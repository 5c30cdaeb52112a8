import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoprofile.corpus import User, build_corpus
from geoprofile.gazetteer import Gazetteer
from geoprofile.genmodel import (
    DistanceHistogram,
    FitError,
    NoiseParams,
    PowerLawParams,
    RandomModels,
    TweetModelPrior,
    bucket_of,
    build_distance_histogram,
    fit_power_law,
    follow_prob,
    random_models,
    tweet_prob,
)


def line_gazetteer(*offsets_miles):
    """Points due north of (40, -100), offsets in miles."""
    deg = 180 / (np.pi * 3958.8)
    return Gazetteer.from_records([(f"P{k}", "XX", 40 + off * deg, -100.0) for k, off in enumerate(offsets_miles)])


def test_follow_prob_examples():
    g = line_gazetteer(0, 1, 100)
    p = PowerLawParams(-0.55, 0.0045)
    assert follow_prob(0, 1, p, g) == pytest.approx(0.0045, abs=1e-12)
    assert follow_prob(0, 2, p, g) == pytest.approx(0.0045 * 100 ** -0.55, abs=1e-12)
    # 0.0045 * 10**-1.1
    assert follow_prob(0, 2, p, g) == pytest.approx(3.5745e-4, abs=1e-7)
    assert follow_prob(1, 1, p, g) == pytest.approx(0.0045)


def test_follow_prob_clamped_to_one():
    assert PowerLawParams(-0.5, 5.0).prob(1.0) == 1.0
    assert PowerLawParams(-0.5, 5.0).prob(0.2) == 1.0


@settings(max_examples=100, deadline=None)
@given(st.floats(-3, -0.01), st.floats(1e-4, 0.5), st.floats(0, 5000), st.floats(0, 5000))
def test_follow_prob_non_increasing(alpha, beta, d1, d2):
    p = PowerLawParams(alpha, beta)
    lo, hi = sorted((d1, d2))
    assert p.prob(hi) <= p.prob(lo) + 1e-15


def test_param_validation():
    with pytest.raises(ValueError):
        PowerLawParams(-0.5, 0.0)
    with pytest.raises(ValueError):
        NoiseParams(1.2, 0.1)
    with pytest.raises(ValueError):
        TweetModelPrior(0.0)
    with pytest.raises(ValueError):
        RandomModels(0.1, np.array([0.5, 0.6]))


def test_tweet_prob():
    assert tweet_prob(3, 0, np.full(10, 0.1)) == pytest.approx(0.1)
    point = np.zeros(10)
    point[4] = 1.0
    assert tweet_prob(4, 0, point) == 1.0
    assert tweet_prob(5, 0, point) == 0.0
    assert tweet_prob(4, 1, np.vstack([np.full(10, 0.1), point])) == 1.0


def corpus_on(g, homes, follows=(), tweets=()):
    return build_corpus([User(i, h) for i, h in enumerate(homes)], follows, tweets, g)


def test_random_models_examples():
    g = Gazetteer.from_records([("A", "X", 0, 0), ("B", "X", 1, 1)])
    follows = [(i, (i + 1) % 10) for i in range(10)]
    c = corpus_on(g, [0] + [None] * 9, follows, [(0, 0)] * 3 + [(1, 1)])
    rm = random_models(c)
    assert rm.p_follow == pytest.approx(0.1)
    assert rm.p_tweet.tolist() == [0.75, 0.25]
    c0 = corpus_on(g, [0, None], [(0, 1)])
    assert random_models(c0).p_tweet.tolist() == [0.5, 0.5]
    assert random_models(c).p_tweet.sum() == pytest.approx(1, abs=1e-9)


def test_distance_histogram_examples():
    g = line_gazetteer(0, 50)
    c = corpus_on(g, [0, 1])
    assert build_distance_histogram([0, 1], c).buckets == {50: (1.0, 0)}
    c = corpus_on(g, [0, 1], [(1, 0)])
    assert build_distance_histogram([0, 1], c).buckets == {50: (1.0, 1)}
    c = corpus_on(g, [0, 0], [(0, 1), (1, 0)])
    assert build_distance_histogram([0, 1], c).buckets == {1: (1.0, 1)}
    assert build_distance_histogram([0, 1], c, ordered=True).buckets == {1: (2.0, 2)}
    with pytest.raises(FitError):
        build_distance_histogram([0], c)


def test_bucket_of():
    assert bucket_of(0.0) == 1
    assert bucket_of(0.3) == 1
    assert bucket_of(1.0) == 1
    assert bucket_of(49.2) == 50
    assert bucket_of(np.array([0.0, 2.5])).tolist() == [1, 3]


def exact_histogram(alpha, beta, dmax=1000, pairs=1000.0):
    h = DistanceHistogram()
    for d in range(1, dmax + 1):
        h.add(d, pairs, pairs * beta * d ** alpha)
    return h


@pytest.mark.parametrize("alpha, beta", [(-0.55, 0.0045), (-1.0, 0.01)])
def test_fit_exact(alpha, beta):
    p = fit_power_law(exact_histogram(alpha, beta))
    assert p.alpha == pytest.approx(alpha, abs=1e-9)
    assert p.beta == pytest.approx(beta, abs=1e-9)


def test_fit_needs_two_buckets():
    h = DistanceHistogram()
    h.add(5, 10, 1)
    h.add(7, 10, 0)
    with pytest.raises(FitError):
        fit_power_law(h)


def test_fit_noisy_trials():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        h = DistanceHistogram()
        for d in range(1, 1001):
            h.add(d, 1000.0, 1000.0 * 0.0045 * d ** -0.55 * np.exp(rng.normal(0, 0.1)))
        worst = max(worst, abs(fit_power_law(h).alpha + 0.55))
    assert worst <= 0.05


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1000))
def test_fit_invariant_to_pair_scaling(factor):
    rng = np.random.default_rng(1)
    h = DistanceHistogram()
    for d in range(1, 200):
        h.add(d, 500.0, 500.0 * 0.01 * d ** -0.8 * np.exp(rng.normal(0, 0.2)))
    a, b = fit_power_law(h), fit_power_law(h.scaled(factor))
    assert b.alpha == pytest.approx(a.alpha, abs=1e-9)
    assert b.beta == pytest.approx(a.beta / factor, rel=1e-9)
