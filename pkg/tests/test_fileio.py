import logging
from importlib import resources

import numpy as np
import pytest

from geoprofile import fileio
from geoprofile.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from geoprofile.gazetteer import bundled_gazetteer_path, load_gazetteer
from geoprofile.sampler import GibbsConfig, ModelParams, advance, audit_counts, collect_result, init_state
from geoprofile.synth import SynthConfig, generate_world

FIXTURE = resources.files("geoprofile") / "data" / "fixture"


@pytest.fixture(scope="module")
def us():
    return load_gazetteer(bundled_gazetteer_path())


@pytest.fixture(scope="module")
def world():
    return generate_world(SynthConfig(n_users=80, n_locations=8, tweets_per_user=3.0, seed=6))


def test_read_fixture(us):
    c = fileio.read_corpus(us, FIXTURE / "users.tsv", FIXTURE / "follows.tsv", FIXTURE / "tweets.tsv")
    assert c.N == 12 and c.S > 0 and c.K > 0
    assert c.users[c.user_names.index("erin")].home_label == us.lookup("Princeton", "NJ")
    assert c.users[c.user_names.index("grace")].home_label is None


def test_unresolvable_label_is_unlabeled(us, tmp_path, caplog):
    (tmp_path / "u.tsv").write_text("alice\tLos Angeles, CA\nbob\tPrinceton\ncarl\tMiddle Earth\n")
    (tmp_path / "f.tsv").write_text("alice\tbob\n")
    with caplog.at_level(logging.WARNING):
        c = fileio.read_corpus(us, tmp_path / "u.tsv", tmp_path / "f.tsv")
    assert [u.home_label is None for u in c.users] == [False, True, True]
    assert "2 labels did not resolve" in caplog.text


def test_corpus_round_trip(world, tmp_path):
    c = world.corpus
    paths = fileio.write_corpus(c, tmp_path, "seed=6")
    g = c.gazetteer
    back = fileio.read_corpus(g, tmp_path / "users.tsv", tmp_path / "follows.tsv", tmp_path / "tweets.tsv")
    assert back.serialize() == c.serialize()
    assert (tmp_path / "users.tsv").read_text().startswith("# seed=6\n")
    assert paths


def test_errors_carry_line_numbers(us, tmp_path):
    (tmp_path / "u.tsv").write_text("alice\tLos Angeles, CA\nbob\n")
    (tmp_path / "f.tsv").write_text("# comment\nalice\tbob\nalice\tzed\n")
    with pytest.raises(fileio.DataError, match=r"f\.tsv:3: unknown user id 'zed'"):
        fileio.read_corpus(us, tmp_path / "u.tsv", tmp_path / "f.tsv")
    (tmp_path / "f.tsv").write_text("alice\tbob\textra\n")
    with pytest.raises(fileio.DataError, match=r"f\.tsv:1: expected 2"):
        fileio.read_corpus(us, tmp_path / "u.tsv", tmp_path / "f.tsv")
    (tmp_path / "f.tsv").write_text("alice\tbob\n")
    (tmp_path / "t.tsv").write_text("bob\tatlantis\n")
    with pytest.raises(fileio.DataError, match=r"t\.tsv:1: unknown venue"):
        fileio.read_corpus(us, tmp_path / "u.tsv", tmp_path / "f.tsv", tmp_path / "t.tsv")
    (tmp_path / "t.tsv").write_text("bob\taustin\t0\n")
    with pytest.raises(fileio.DataError, match="positive"):
        fileio.read_corpus(us, tmp_path / "u.tsv", tmp_path / "f.tsv", tmp_path / "t.tsv")
    with pytest.raises(fileio.DataError, match="no such file"):
        fileio.read_corpus(us, tmp_path / "missing.tsv", tmp_path / "f.tsv")
    (tmp_path / "u.tsv").write_text("alice\nalice\n")
    with pytest.raises(fileio.DataError, match="duplicate"):
        fileio.read_corpus(us, tmp_path / "u.tsv", tmp_path / "f.tsv")


def test_truth_round_trip(world, tmp_path):
    g = world.corpus.gazetteer
    fileio.write_truth(world, tmp_path / "truth.tsv", "seed=6")
    t = fileio.read_truth(g, tmp_path / "truth.tsv")
    c = world.corpus
    assert t.users == [c.name(i) for i in range(c.N)]
    assert [t.home[c.name(i)] for i in range(c.N)] == world.true_home.tolist()
    for i in range(c.N):
        prof = t.profile[c.name(i)]
        np.testing.assert_array_equal([prof.get(l, 0.0) for l in range(g.n_locations)], world.true_theta[i])
    assert [e[3] for e in t.follows] == world.true_mu.tolist()
    assert [e[5] for e in t.follows] == world.true_y.tolist()
    assert [e[4] for e in t.tweets] == world.true_z.tolist()


def test_predictions_round_trip(world, tmp_path):
    c = world.corpus
    r = collect_result(init_state(c, ModelParams(), GibbsConfig(seed=0)))
    fileio.write_profiles(c, r, tmp_path / "p.tsv")
    fileio.write_explanations(c, r, tmp_path / "e.tsv")
    p = fileio.read_predictions(c.gazetteer, tmp_path / "p.tsv", tmp_path / "e.tsv")
    assert [p.home[c.name(i)] for i in range(c.N)] == r.home.tolist()
    assert [p.top_k[c.name(i)] for i in range(c.N)] == r.top_k
    assert [e[4] for e in p.follows] == r.follow_x.tolist()
    assert [e[3] for e in p.follows] == [bool(m) for m in r.follow_mu]
    i = 5
    assert [p.theta[c.name(i)][int(l)] for l in r.supports[i]] == r.theta[i].tolist()


def test_empty_truth_rejected(us, tmp_path):
    (tmp_path / "t.tsv").write_text("# nothing\n")
    with pytest.raises(fileio.DataError, match="no user records"):
        fileio.read_truth(us, tmp_path / "t.tsv")


def test_checkpoint_resume_is_exact(world, tmp_path):
    c = world.corpus
    cfg = GibbsConfig(sweeps=8, burn_in=3, em_rounds=2, seed=9)
    ref = init_state(c, ModelParams(), cfg)
    advance(ref)
    st = init_state(c, ModelParams(), cfg)
    assert not advance(st, stop_after=11)
    save_checkpoint(st, tmp_path / "m.ckpt")
    back = load_checkpoint(c, tmp_path / "m.ckpt")
    assert audit_counts(back).ok
    assert back.sweep_count == 11 and len(back.samples) == len(st.samples)
    assert advance(back)
    a, b = collect_result(ref), collect_result(back)
    assert np.array_equal(a.home, b.home)
    assert np.array_equal(a.follow_x, b.follow_x) and np.array_equal(a.tweet_z, b.tweet_z)
    assert all(np.array_equal(p, q) for p, q in zip(a.theta, b.theta))
    assert a.em_trace == b.em_trace


def test_checkpoint_rejects_other_corpus(world, tmp_path):
    st = init_state(world.corpus, ModelParams(), GibbsConfig(seed=0))
    save_checkpoint(st, tmp_path / "m.ckpt")
    other = generate_world(SynthConfig(n_users=80, n_locations=8, tweets_per_user=3.0, seed=7)).corpus
    with pytest.raises(CheckpointError, match="different corpus"):
        load_checkpoint(other, tmp_path / "m.ckpt")
    (tmp_path / "bad.ckpt").write_text("something else\n")
    with pytest.raises(CheckpointError):
        load_checkpoint(world.corpus, tmp_path / "bad.ckpt")
    with pytest.raises(CheckpointError):
        load_checkpoint(world.corpus, tmp_path / "absent.ckpt")
