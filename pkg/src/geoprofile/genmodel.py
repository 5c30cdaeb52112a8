"""Edge generation distributions and power-law fitting.

Location-based following is a power law in distance, ``beta * d**alpha``;
location-based tweeting is categorical over venues; the random models are
the empirical follow density ``S / N**2`` and the empirical venue frequency.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Corpus
from .gazetteer import Gazetteer


class FitError(ValueError):
    """Too little data to fit a power law."""


@dataclass(frozen=True)
class PowerLawParams:
    alpha: float = -0.55
    beta: float = 0.0045

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")

    def prob(self, d):
        """Follow probability at distance ``d`` miles (scalar or array)."""
        if np.ndim(d) == 0:
            return min(1.0, self.beta * max(float(d), 1.0) ** self.alpha)
        d = np.maximum(np.asarray(d, dtype=float), 1.0)
        return np.minimum(1.0, self.beta * d ** self.alpha)


@dataclass(frozen=True)
class NoiseParams:
    rho_f: float = 0.1
    rho_t: float = 0.1

    def __post_init__(self):
        for name in ("rho_f", "rho_t"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


@dataclass(frozen=True)
class TweetModelPrior:
    delta: float = 0.01

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")


@dataclass
class RandomModels:
    p_follow: float
    p_tweet: np.ndarray

    def __post_init__(self):
        self.p_tweet = np.asarray(self.p_tweet, dtype=float)
        if not 0.0 <= self.p_follow <= 1.0:
            raise ValueError("p_follow must lie in [0, 1]")
        if (self.p_tweet < 0).any() or abs(self.p_tweet.sum() - 1.0) > 1e-9:
            raise ValueError("p_tweet must be a probability vector")


@dataclass
class DistanceHistogram:
    """Per 1-mile bucket: (number of pairs, number of pairs with a follow)."""

    buckets: dict = field(default_factory=dict)

    def add(self, bucket: int, pairs: float, following: float = 0) -> None:
        p, f = self.buckets.get(bucket, (0, 0))
        self.buckets[bucket] = (p + pairs, f + following)

    def arrays(self) -> tuple:
        keys = sorted(self.buckets)
        d = np.array(keys, dtype=float)
        pairs = np.array([self.buckets[k][0] for k in keys], dtype=float)
        follows = np.array([self.buckets[k][1] for k in keys], dtype=float)
        return d, pairs, follows

    def scaled(self, factor: float) -> "DistanceHistogram":
        return DistanceHistogram({k: (p * factor, f) for k, (p, f) in self.buckets.items()})


def bucket_of(d):
    """1-mile bucket index: ceil(d), at least 1."""
    if np.ndim(d) == 0:
        return max(1, int(math.ceil(float(d))))
    return np.maximum(1, np.ceil(np.asarray(d, dtype=float))).astype(np.int64)


def follow_prob(x: int, y: int, p: PowerLawParams, g: Gazetteer) -> float:
    return p.prob(g.dist(x, y))


def tweet_prob(v: int, l: int, psi) -> float:
    """Probability of venue ``v`` under location ``l``'s venue distribution.

    ``psi`` is either the distribution for ``l`` itself or an ``|L| x |V|``
    table of them.
    """
    psi = np.asarray(psi)
    if psi.ndim == 2:
        return float(psi[l, v])
    return float(psi[v])


def random_models(c: Corpus) -> RandomModels:
    V = c.gazetteer.n_venues
    p_follow = c.S / float(c.N ** 2) if c.N else 0.0
    if c.K == 0:
        p_tweet = np.full(V, 1.0 / V)
    else:
        p_tweet = np.bincount(c.tweet_venue, minlength=V) / float(c.K)
    return RandomModels(p_follow, p_tweet)


def build_distance_histogram(labeled_users, c: Corpus, ordered: bool = False) -> DistanceHistogram:
    """Histogram of labeled-pair distances and of those pairs that follow.

    With ``ordered=False`` each unordered pair counts once and is "following"
    if an edge exists in either direction.  Pair counts are aggregated per
    location pair, so the cost is O(|L|^2 + S) rather than O(|U*|^2).
    """
    labeled = sorted(set(int(u) for u in labeled_users))
    if len(labeled) < 2:
        raise FitError("need at least two labeled users")
    homes = c.homes()
    if (homes[labeled] < 0).any():
        raise ValueError("labeled_users contains users without a home label")
    L = c.gazetteer.n_locations
    n_at = np.bincount(homes[labeled], minlength=L).astype(float)
    occupied = np.flatnonzero(n_at)
    D = c.gazetteer.distances()
    h = DistanceHistogram()
    for a_i, a in enumerate(occupied.tolist()):
        for b in occupied[a_i:].tolist():
            if a == b:
                pairs = n_at[a] * (n_at[a] - 1) / 2.0
            else:
                pairs = n_at[a] * n_at[b]
            if ordered:
                pairs *= 2
            if pairs:
                h.add(bucket_of(D[a, b]), pairs, 0)
    is_labeled = np.zeros(c.N, dtype=bool)
    is_labeled[labeled] = True
    seen = set()
    for a, b in zip(c.follow_src.tolist(), c.follow_dst.tolist()):
        if not (is_labeled[a] and is_labeled[b]):
            continue
        key = (a, b) if ordered else (min(a, b), max(a, b))
        if key in seen:
            continue
        seen.add(key)
        h.add(bucket_of(D[homes[a], homes[b]]), 0, 1)
    return h


def fit_power_law(h: DistanceHistogram) -> PowerLawParams:
    """Unweighted least squares of log(follow ratio) on log(distance)."""
    d, pairs, follows = h.arrays()
    use = (follows > 0) & (pairs > 0)
    if use.sum() < 2:
        raise FitError(f"need at least 2 buckets with following pairs, have {int(use.sum())}")
    x = np.log(d[use])
    y = np.log(follows[use] / pairs[use])
    if np.ptp(x) == 0:
        raise FitError("all usable buckets share one distance")
    slope, intercept = np.polyfit(x, y, 1)
    return PowerLawParams(alpha=float(slope), beta=float(math.exp(intercept)))
