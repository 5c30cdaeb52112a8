"""Users, follow edges and tweet edges, plus the per-user Dirichlet priors.

Each user gets an observation vector (its home label, if any), a candidacy
vector (locations seen through labeled neighbours and tweeted venues) and a
prior ``gamma_i = eta_i * B * g + tau * lambda_i``.  Priors are stored sparse
over the candidacy support, which is also the support every sampled location
assignment for the user is confined to.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .gazetteer import Gazetteer

log = logging.getLogger(__name__)


class CorpusError(ValueError):
    """Dangling references or otherwise unusable corpus input."""


@dataclass(frozen=True)
class PriorConfig:
    tau: float = 0.1
    base_gamma: float = 1.0
    boost: float = 100.0

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if not self.base_gamma > 0:
            raise ValueError("base_gamma must be positive")
        if self.boost < 0:
            raise ValueError("boost must be non-negative")


@dataclass(frozen=True)
class User:
    user_id: int
    home_label: Optional[int] = None


@dataclass(frozen=True)
class UserPriors:
    """Sparse view of (eta, lambda, gamma) for one user.

    ``support`` holds the sorted candidate loc_ids, ``gamma`` the prior mass
    aligned with it.
    """

    n_locations: int
    home: Optional[int]
    support: np.ndarray
    gamma: np.ndarray

    @property
    def eta(self) -> np.ndarray:
        return observation_vector(User(-1, self.home), self.n_locations)

    @property
    def lam(self) -> np.ndarray:
        out = np.zeros(self.n_locations, dtype=np.int8)
        out[self.support] = 1
        return out

    @property
    def dense_gamma(self) -> np.ndarray:
        out = np.zeros(self.n_locations)
        out[self.support] = self.gamma
        return out


@dataclass
class Corpus:
    gazetteer: Gazetteer
    users: list
    follow_src: np.ndarray
    follow_dst: np.ndarray
    tweet_user: np.ndarray
    tweet_venue: np.ndarray
    prior_config: PriorConfig
    priors: list = field(default_factory=list)
    user_names: Optional[list] = None

    @property
    def N(self) -> int:
        return len(self.users)

    @property
    def S(self) -> int:
        return len(self.follow_src)

    @property
    def K(self) -> int:
        return len(self.tweet_user)

    @property
    def labeled(self) -> list:
        return [u.user_id for u in self.users if u.home_label is not None]

    def name(self, user_id: int) -> str:
        if self.user_names is None:
            return str(user_id)
        return self.user_names[user_id]

    def homes(self) -> np.ndarray:
        """Home labels as an int array, -1 for unlabeled users."""
        return np.array([-1 if u.home_label is None else u.home_label for u in self.users], dtype=np.int64)

    def neighbours(self) -> list:
        """Friends and followers of every user, deduplicated and sorted."""
        nb = [set() for _ in range(self.N)]
        for a, b in zip(self.follow_src.tolist(), self.follow_dst.tolist()):
            nb[a].add(b)
            nb[b].add(a)
        return [sorted(s) for s in nb]

    def without_tweets(self) -> "Corpus":
        """Same users and follow graph, tweets dropped, priors rebuilt."""
        return build_corpus(
            self.users, zip(self.follow_src.tolist(), self.follow_dst.tolist()), [],
            self.gazetteer, self.prior_config, user_names=self.user_names,
        )

    def without_follows(self) -> "Corpus":
        return build_corpus(
            self.users, [], zip(self.tweet_user.tolist(), self.tweet_venue.tolist()),
            self.gazetteer, self.prior_config, user_names=self.user_names,
        )

    def serialize(self) -> bytes:
        """Canonical byte serialization, used for determinism checks."""
        parts = [f"N={self.N} S={self.S} K={self.K} pc={self.prior_config!r}"]
        for u, p in zip(self.users, self.priors):
            parts.append(f"u {u.user_id} {u.home_label} {p.support.tolist()} {[repr(x) for x in p.gamma.tolist()]}")
        parts.append(repr(self.follow_src.tolist()) + repr(self.follow_dst.tolist()))
        parts.append(repr(self.tweet_user.tolist()) + repr(self.tweet_venue.tolist()))
        return "\n".join(parts).encode()

    def digest(self) -> str:
        return hashlib.sha256(self.serialize()).hexdigest()


def observation_vector(u: User, n_locations: int) -> np.ndarray:
    eta = np.zeros(n_locations, dtype=np.int8)
    if u.home_label is not None:
        eta[u.home_label] = 1
    return eta


def candidacy_vector(u: User, c: Corpus, neighbours: Optional[list] = None) -> np.ndarray:
    """Binary vector of admissible locations for ``u``.

    Sources: homes of labeled friends/followers, referents of tweeted venues,
    and the user's own label.  An empty result falls back to all ones.
    """
    L = c.gazetteer.n_locations
    lam = np.zeros(L, dtype=np.int8)
    if neighbours is None:
        neighbours = c.neighbours()
    for nb in neighbours[u.user_id]:
        h = c.users[nb].home_label
        if h is not None:
            lam[h] = 1
    venues = np.unique(c.tweet_venue[c.tweet_user == u.user_id])
    for v in venues.tolist():
        lam[list(c.gazetteer.venues[v].referent_locs)] = 1
    if u.home_label is not None:
        lam[u.home_label] = 1
    if not lam.any():
        lam[:] = 1
    return lam


def prior(eta: np.ndarray, lam: np.ndarray, pc: PriorConfig) -> np.ndarray:
    """Dense gamma_i with a diagonal, uniform boosting matrix."""
    lam = np.asarray(lam).copy()
    eta = np.asarray(eta)
    lam[eta > 0] = 1
    return eta * pc.boost * pc.base_gamma + pc.tau * lam


def _build_priors(c: Corpus) -> list:
    L = c.gazetteer.n_locations
    nbs = c.neighbours()
    # referents per user from tweets, without rescanning the tweet table per user
    order = np.argsort(c.tweet_user, kind="stable")
    bounds = np.searchsorted(c.tweet_user[order], np.arange(c.N + 1))
    referents = [frozenset(v.referent_locs) for v in c.gazetteer.venues]
    out = []
    for u in c.users:
        cand = set()
        for nb in nbs[u.user_id]:
            h = c.users[nb].home_label
            if h is not None:
                cand.add(h)
        vs = np.unique(c.tweet_venue[order[bounds[u.user_id]:bounds[u.user_id + 1]]])
        for v in vs.tolist():
            cand |= referents[v]
        if u.home_label is not None:
            cand.add(u.home_label)
        if cand:
            support = np.array(sorted(cand), dtype=np.int64)
        else:
            support = np.arange(L, dtype=np.int64)
        gamma = np.full(len(support), c.prior_config.tau)
        if u.home_label is not None:
            pos = int(np.searchsorted(support, u.home_label))
            gamma[pos] += c.prior_config.boost * c.prior_config.base_gamma
        out.append(UserPriors(L, u.home_label, support, gamma))
    return out


def build_corpus(
    users: Sequence,
    follows: Iterable,
    tweets: Iterable,
    g: Gazetteer,
    pc: PriorConfig = PriorConfig(),
    user_names: Optional[list] = None,
    require_labels: bool = True,
) -> Corpus:
    """Assemble a corpus from dense-id records.

    ``users`` is a sequence of :class:`User` (or ``(user_id, home_label)``
    pairs) with ids ``0..N-1``; ``follows`` yields ``(follower, friend)`` and
    ``tweets`` yields ``(user, venue_id)``.
    """
    users = [u if isinstance(u, User) else User(int(u[0]), None if u[1] is None else int(u[1])) for u in users]
    N = len(users)
    for i, u in enumerate(users):
        if u.user_id != i:
            raise CorpusError(f"user ids must be dense 0..N-1, got {u.user_id} at position {i}")
        if u.home_label is not None and not 0 <= u.home_label < g.n_locations:
            raise CorpusError(f"user {i}: home label {u.home_label} is not a valid location")
    if require_labels and not any(u.home_label is not None for u in users):
        raise CorpusError("corpus has no labeled users; at least one home label is required")

    src, dst, seen = [], [], set()
    dupes = 0
    for a, b in follows:
        a, b = int(a), int(b)
        if not (0 <= a < N and 0 <= b < N):
            raise CorpusError(f"follow edge ({a}, {b}) references an unknown user")
        if a == b:
            raise CorpusError(f"self-follow edge for user {a}")
        if (a, b) in seen:
            dupes += 1
            continue
        seen.add((a, b))
        src.append(a)
        dst.append(b)
    if dupes:
        log.warning("dropped %d duplicate follow edges", dupes)

    tu, tv = [], []
    for a, v in tweets:
        a, v = int(a), int(v)
        if not 0 <= a < N:
            raise CorpusError(f"tweet edge references unknown user {a}")
        if not 0 <= v < g.n_venues:
            raise CorpusError(f"tweet edge references unknown venue {v}")
        tu.append(a)
        tv.append(v)

    c = Corpus(
        gazetteer=g,
        users=users,
        follow_src=np.array(src, dtype=np.int64),
        follow_dst=np.array(dst, dtype=np.int64),
        tweet_user=np.array(tu, dtype=np.int64),
        tweet_venue=np.array(tv, dtype=np.int64),
        prior_config=pc,
        user_names=user_names,
    )
    c.priors = _build_priors(c)
    return c
