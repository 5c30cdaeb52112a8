import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoprofile.corpus import (
    CorpusError,
    PriorConfig,
    User,
    build_corpus,
    candidacy_vector,
    observation_vector,
    prior,
)
from geoprofile.gazetteer import Gazetteer, bundled_gazetteer_path, load_gazetteer


def grid(n=10):
    return Gazetteer.from_records([(f"C{k}", "XX", 30 + k, -100 + k) for k in range(n)])


def test_minimal_corpus():
    c = build_corpus([User(0, 1), User(1)], [(0, 1)], [], grid())
    assert (c.N, c.S, c.K) == (2, 1, 0)


def test_dangling_references():
    g = grid()
    with pytest.raises(CorpusError):
        build_corpus([User(0, 1), User(1)], [(0, 5)], [], g)
    with pytest.raises(CorpusError):
        build_corpus([User(0, 1)], [], [(0, 99)], g)
    with pytest.raises(CorpusError):
        build_corpus([User(0, 1)], [], [(3, 0)], g)
    with pytest.raises(CorpusError):
        build_corpus([User(0, 42)], [], [], g)


def test_requires_a_label():
    with pytest.raises(CorpusError, match="labeled"):
        build_corpus([User(0), User(1)], [(0, 1)], [], grid())


def test_self_follow_rejected_and_duplicates_dropped(caplog):
    g = grid()
    with pytest.raises(CorpusError, match="self-follow"):
        build_corpus([User(0, 1)], [(0, 0)], [], g)
    c = build_corpus([User(0, 1), User(1)], [(0, 1), (0, 1), (1, 0)], [], g)
    assert c.S == 2
    assert "duplicate" in caplog.text


def test_all_labeled():
    c = build_corpus([User(i, i) for i in range(4)], [(0, 1)], [], grid())
    assert all(observation_vector(u, 10).sum() == 1 for u in c.users)


def test_observation_vector():
    assert observation_vector(User(0), 10).sum() == 0
    eta = observation_vector(User(0, 7), 10)
    assert eta[7] == 1 and eta.sum() == 1
    assert not np.array_equal(observation_vector(User(0, 2), 10), observation_vector(User(1, 3), 10))


def test_candidacy_examples():
    g = grid()
    c = build_corpus([User(0), User(1, 3)], [(0, 1)], [], g)
    assert np.flatnonzero(candidacy_vector(c.users[0], c)).tolist() == [3]
    # friends and followers both count
    c = build_corpus([User(0), User(1, 3)], [(1, 0)], [], g)
    assert np.flatnonzero(candidacy_vector(c.users[0], c)).tolist() == [3]
    c = build_corpus([User(0), User(1, 3)], [], [], g)
    assert candidacy_vector(c.users[0], c).sum() == 10


def test_candidacy_princeton():
    us = load_gazetteer(bundled_gazetteer_path())
    c = build_corpus([User(0), User(1, 0)], [], [(0, us.venue_id("princeton"))], us)
    lam = candidacy_vector(c.users[0], c)
    assert set(np.flatnonzero(lam).tolist()) == {l.loc_id for l in us.locations if l.city_name == "Princeton"}
    assert lam.sum() == 19


def test_prior_examples():
    pc = PriorConfig(tau=0.1, base_gamma=1.0, boost=100.0)
    lam = np.zeros(10)
    lam[[2, 5]] = 1
    gam = prior(np.zeros(10), lam, pc)
    assert gam[2] == gam[5] == pytest.approx(0.1) and gam.sum() == pytest.approx(0.2)
    eta = np.zeros(10)
    eta[2] = 1
    gam = prior(eta, lam, pc)
    assert gam[2] == pytest.approx(100.1) and gam[5] == pytest.approx(0.1)
    eta = np.zeros(10)
    eta[9] = 1
    gam = prior(eta, lam, pc)
    assert gam[9] == pytest.approx(100.1)


def test_label_outside_candidacy_is_added():
    c = build_corpus([User(0, 9), User(1, 2)], [(0, 1)], [], grid())
    p = c.priors[0]
    assert 9 in p.support.tolist()
    assert p.gamma[p.support.tolist().index(9)] == pytest.approx(100.1)


def test_prior_config_validation():
    with pytest.raises(ValueError):
        PriorConfig(tau=0)
    with pytest.raises(ValueError):
        PriorConfig(base_gamma=-1)
    with pytest.raises(ValueError):
        PriorConfig(boost=-0.1)


@st.composite
def random_corpus_inputs(draw):
    n = draw(st.integers(2, 8))
    homes = draw(st.lists(st.one_of(st.none(), st.integers(0, 9)), min_size=n, max_size=n))
    homes[0] = draw(st.integers(0, 9))
    pairs = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)).filter(lambda p: p[0] != p[1]),
                          max_size=12))
    tweets = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, 9)), max_size=12))
    return homes, pairs, tweets


@settings(max_examples=60, deadline=None)
@given(random_corpus_inputs())
def test_prior_invariants(inputs):
    homes, pairs, tweets = inputs
    pc = PriorConfig()
    c = build_corpus([User(i, h) for i, h in enumerate(homes)], pairs, tweets, grid(), pc)
    for u, p in zip(c.users, c.priors):
        assert len(p.support) >= 1
        assert np.array_equal(np.flatnonzero(p.dense_gamma), p.support)
        assert np.array_equal(np.flatnonzero(p.lam), p.support)
        assert p.eta.sum() <= 1
        if u.home_label is not None:
            assert int(np.argmax(p.dense_gamma)) == u.home_label


@settings(max_examples=30, deadline=None)
@given(random_corpus_inputs())
def test_build_is_deterministic(inputs):
    homes, pairs, tweets = inputs
    users = [User(i, h) for i, h in enumerate(homes)]
    a = build_corpus(users, pairs, tweets, grid())
    b = build_corpus(users, list(pairs), list(tweets), grid())
    assert a.serialize() == b.serialize()


def test_without_tweets_rebuilds_priors():
    g = grid()
    c = build_corpus([User(0), User(1, 3)], [(0, 1)], [(0, 7)], g)
    assert c.priors[0].support.tolist() == [3, 7]
    assert c.without_tweets().priors[0].support.tolist() == [3]
    assert c.without_follows().priors[0].support.tolist() == [7]
