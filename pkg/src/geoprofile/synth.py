"""Forward simulation of the multiple-location generative process.

Every ordered user pair draws a selector; the location-based channel picks
one location from each user's planted profile and follows with probability
``beta * d**alpha``, the random channel with a fixed density.  Tweets draw a
selector per slot and then either a venue from the random model or a
location from the profile and a venue from that location's venue model.
Only realized edges are kept, together with their latent variables.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .corpus import Corpus, PriorConfig, User, build_corpus
from .gazetteer import Gazetteer
from .genmodel import DistanceHistogram, NoiseParams, PowerLawParams, TweetModelPrior, bucket_of

MAX_USERS = 5000

# continental US, roughly
DEFAULT_BBOX = (30.0, 47.0, -122.0, -72.0)


class SynthError(ValueError):
    """Invalid synthetic-world configuration."""


def _geometric_sizes(n: int = 4, decay: float = 0.5) -> tuple:
    w = [decay ** k for k in range(n)]
    return tuple(x / sum(w) for x in w)


@dataclass(frozen=True)
class SynthConfig:
    n_locations: int = 20
    n_venues: Optional[int] = None
    n_users: int = 1000
    label_fraction: float = 0.8
    tweets_per_user: float = 20.0
    power_law: PowerLawParams = field(default_factory=PowerLawParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    prior: PriorConfig = field(default_factory=PriorConfig)
    delta: TweetModelPrior = field(default_factory=TweetModelPrior)
    profile_sparsity: float = 1.0
    profile_size_probs: tuple = field(default_factory=_geometric_sizes)
    seed: int = 0
    p_follow_random: Optional[float] = None
    geo_coherent: bool = False
    geo_scale_miles: float = 50.0
    geo_concentration: float = 20.0
    bbox: tuple = DEFAULT_BBOX
    jitter: float = 0.3

    def validate(self) -> None:
        if self.n_locations < 1 or self.n_users < 1:
            raise SynthError("n_locations and n_users must be positive")
        if self.n_users > MAX_USERS:
            raise SynthError(f"n_users={self.n_users} exceeds the pair-loop cap of {MAX_USERS}")
        nv = self.venue_count
        if not 1 <= nv <= self.n_locations:
            raise SynthError("n_venues must lie in [1, n_locations]; venues are city names")
        if not 0.0 <= self.label_fraction <= 1.0:
            raise SynthError("label_fraction must lie in [0, 1]")
        if self.tweets_per_user < 0:
            raise SynthError("tweets_per_user must be non-negative")
        if not self.profile_sparsity > 0:
            raise SynthError("profile_sparsity must be positive")
        probs = np.asarray(self.profile_size_probs, dtype=float)
        if probs.ndim != 1 or len(probs) == 0 or (probs < 0).any() or abs(probs.sum() - 1) > 1e-9:
            raise SynthError("profile_size_probs must be a probability vector")
        if len(probs) > self.n_locations:
            raise SynthError("profile sizes exceed the number of locations")
        if self.power_law.beta > 1.0:
            raise SynthError(f"beta={self.power_law.beta} gives an edge probability above 1")
        if self.p_follow_random is not None and not 0 <= self.p_follow_random <= 1:
            raise SynthError(f"p_follow_random={self.p_follow_random} is not a probability")

    @property
    def venue_count(self) -> int:
        return self.n_locations if self.n_venues is None else self.n_venues


@dataclass
class SyntheticDataset:
    corpus: Corpus
    true_theta: np.ndarray
    true_home: np.ndarray
    true_mu: np.ndarray
    true_x: np.ndarray
    true_y: np.ndarray
    true_nu: np.ndarray
    true_z: np.ndarray
    true_psi: np.ndarray
    p_follow_random: float
    p_tweet_random: np.ndarray
    config: SynthConfig

    @property
    def gazetteer(self) -> Gazetteer:
        return self.corpus.gazetteer

    def true_sets(self) -> list:
        return [np.flatnonzero(row > 0).tolist() for row in self.true_theta]


def _place_locations(cfg: SynthConfig, rng: np.random.Generator) -> Gazetteer:
    lat0, lat1, lon0, lon1 = cfg.bbox
    n = cfg.n_locations
    aspect = (lon1 - lon0) * math.cos(math.radians((lat0 + lat1) / 2)) / (lat1 - lat0)
    cols = max(1, int(round(math.sqrt(n * aspect))))
    rows = int(math.ceil(n / cols))
    dlat, dlon = (lat1 - lat0) / rows, (lon1 - lon0) / cols
    nv = cfg.venue_count
    records = []
    for l in range(n):
        r, c = divmod(l, cols)
        lat = lat0 + (r + 0.5 + cfg.jitter * (rng.random() - 0.5) * 2) * dlat
        lon = lon0 + (c + 0.5 + cfg.jitter * (rng.random() - 0.5) * 2) * dlon
        # names repeat once l >= n_venues, making those venues ambiguous
        records.append((f"Town {l % nv:03d}", f"R{l:03d}", lat, lon))
    return Gazetteer.from_records(records)


def _draw_profiles(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    N, L = cfg.n_users, cfg.n_locations
    theta = np.zeros((N, L))
    sizes = rng.choice(len(cfg.profile_size_probs), size=N, p=np.asarray(cfg.profile_size_probs)) + 1
    for i in range(N):
        locs = rng.choice(L, size=sizes[i], replace=False)
        g = rng.gamma(cfg.profile_sparsity, size=sizes[i])
        if g.sum() <= 0 or not np.isfinite(g).all():
            w = np.zeros(sizes[i])
            w[int(rng.integers(sizes[i]))] = 1.0
        else:
            w = g / g.sum()
        theta[i, locs] = w
    return theta


def _draw_psi(cfg: SynthConfig, g: Gazetteer, rng: np.random.Generator) -> np.ndarray:
    L, V = g.n_locations, g.n_venues
    conc = np.full((L, V), cfg.delta.delta)
    if cfg.geo_coherent:
        D = g.distances()
        near = 1.0 / (1.0 + D / cfg.geo_scale_miles)
        w = np.zeros((L, V))
        for v in g.venues:
            w[:, v.venue_id] = near[:, sorted(v.referent_locs)].sum(axis=1)
        w /= w.sum(axis=1, keepdims=True)
        conc = conc + cfg.geo_concentration * w
    psi = np.empty((L, V))
    for l in range(L):
        draw = rng.gamma(conc[l])
        if draw.sum() <= 0:
            draw = np.zeros(V)
            draw[int(np.argmax(conc[l]))] = 1.0
        psi[l] = draw / draw.sum()
    return psi


def expected_location_density(theta: np.ndarray, P: np.ndarray) -> float:
    """Mean location-based follow probability over ordered pairs i != j."""
    N = theta.shape[0]
    if N < 2:
        return 0.0
    m = theta.sum(axis=0)
    total = m @ P @ m - np.einsum("il,lk,ik->", theta, P, theta)
    return float(total / (N * (N - 1)))


def _sample_rows(cum: np.ndarray, locs: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draws, one per row of a padded cumulative table."""
    idx = (u[:, None] >= cum).sum(axis=1)
    idx = np.minimum(idx, cum.shape[1] - 1)
    return locs[np.arange(len(u)), idx]


def generate_world(cfg: SynthConfig) -> SyntheticDataset:
    cfg.validate()
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    g = _place_locations(cfg, rng)
    V, N = g.n_venues, cfg.n_users
    psi = _draw_psi(cfg, g, rng)
    theta = _draw_profiles(cfg, rng)
    home = np.array([int(np.flatnonzero(row == row.max()).min()) for row in theta], dtype=np.int64)

    P = cfg.power_law.prob(g.distances())
    f_r = cfg.p_follow_random
    if f_r is None:
        f_r = expected_location_density(theta, P)
    if not 0 <= f_r <= 1:
        raise SynthError(f"random follow probability {f_r} is not a probability")
    t_r = np.full(V, 1.0 / V)

    # padded per-user profile tables for vectorized draws
    width = max(1, int((theta > 0).sum(axis=1).max()))
    locs = np.zeros((N, width), dtype=np.int64)
    cum = np.ones((N, width))
    for i in range(N):
        sup = np.flatnonzero(theta[i] > 0)
        locs[i, :len(sup)] = sup
        locs[i, len(sup):] = sup[-1]
        cum[i, :len(sup)] = np.cumsum(theta[i, sup])
        cum[i, len(sup) - 1:] = 1.0

    rho_f, rho_t = cfg.noise.rho_f, cfg.noise.rho_t
    f_src, f_dst, f_mu, f_x, f_y = [], [], [], [], []
    everyone = np.arange(N)
    for i in range(N):
        u = rng.random((4, N))
        mu = u[0] < rho_f
        x = _sample_rows(np.broadcast_to(cum[i], (N, width)), np.broadcast_to(locs[i], (N, width)), u[1])
        y = _sample_rows(cum, locs, u[2])
        p = np.where(mu, f_r, P[x, y])
        hit = (u[3] < p) & (everyone != i)
        js = np.flatnonzero(hit)
        f_src.extend([i] * len(js))
        f_dst.extend(js.tolist())
        f_mu.extend(mu[js].astype(int).tolist())
        f_x.extend(np.where(mu[js], -1, x[js]).tolist())
        f_y.extend(np.where(mu[js], -1, y[js]).tolist())

    n_tweets = rng.poisson(cfg.tweets_per_user, size=N)
    t_user, t_venue, t_nu, t_z = [], [], [], []
    psi_cum = np.cumsum(psi, axis=1)
    tr_cum = np.cumsum(t_r)
    for i in range(N):
        n = int(n_tweets[i])
        if n == 0:
            continue
        u = rng.random((4, n))
        nu = u[0] < rho_t
        z = _sample_rows(np.broadcast_to(cum[i], (n, width)), np.broadcast_to(locs[i], (n, width)), u[1])
        v_loc = np.minimum((u[2][:, None] >= psi_cum[z]).sum(axis=1), V - 1)
        v_rand = np.minimum(np.searchsorted(tr_cum, u[3], side="right"), V - 1)
        v = np.where(nu, v_rand, v_loc)
        t_user.extend([i] * n)
        t_venue.extend(v.tolist())
        t_nu.extend(nu.astype(int).tolist())
        t_z.extend(np.where(nu, -1, z).tolist())

    # canonical tweet order (user, venue) so the aggregated file format
    # reproduces the same edge order on ingest
    order = np.lexsort((np.arange(len(t_user)), np.array(t_venue, dtype=np.int64), np.array(t_user, dtype=np.int64)))
    t_user = np.array(t_user, dtype=np.int64)[order]
    t_venue = np.array(t_venue, dtype=np.int64)[order]
    t_nu = np.array(t_nu, dtype=np.int64)[order]
    t_z = np.array(t_z, dtype=np.int64)[order]

    n_lab = int(round(cfg.label_fraction * N))
    labeled = np.zeros(N, dtype=bool)
    labeled[rng.choice(N, size=n_lab, replace=False)] = True
    users = [User(i, int(home[i]) if labeled[i] else None) for i in range(N)]
    names = [f"u{i:05d}" for i in range(N)]
    corpus = build_corpus(users, zip(f_src, f_dst), zip(t_user.tolist(), t_venue.tolist()), g, cfg.prior,
                          user_names=names, require_labels=n_lab > 0)
    return SyntheticDataset(
        corpus=corpus,
        true_theta=theta,
        true_home=home,
        true_mu=np.array(f_mu, dtype=np.int64),
        true_x=np.array(f_x, dtype=np.int64),
        true_y=np.array(f_y, dtype=np.int64),
        true_nu=t_nu,
        true_z=t_z,
        true_psi=psi,
        p_follow_random=float(f_r),
        p_tweet_random=t_r,
        config=cfg,
    )


def true_distance_histogram(d: SyntheticDataset) -> DistanceHistogram:
    """Distance histogram of the planted location channel.

    Following counts are the realized ``mu = 0`` edges bucketed by the
    distance between their true assignments.  Pair counts are the expected
    number of ordered user pairs whose drawn locations fall in each bucket,
    ``sum_{i != j} theta_i(x) theta_j(y)``, i.e. the exposure of the channel.
    """
    g = d.corpus.gazetteer
    D = g.distances()
    theta = d.true_theta
    tot = theta.sum(axis=0)
    exposure = np.outer(tot, tot) - theta.T @ theta
    h = DistanceHistogram()
    buckets = bucket_of(D)
    for a in range(g.n_locations):
        for b in range(g.n_locations):
            if exposure[a, b] > 0:
                h.add(int(buckets[a, b]), float(exposure[a, b]), 0)
    loc = d.true_mu == 0
    for b in bucket_of(D[d.true_x[loc], d.true_y[loc]]).tolist():
        h.add(b, 0, 1)
    return h


def dataset_stats(d: SyntheticDataset) -> dict:
    c = d.corpus
    in_support = [d.true_home[i] in set(c.priors[i].support.tolist()) for i in range(c.N)]
    return {
        "users": c.N,
        "locations": c.gazetteer.n_locations,
        "venues": c.gazetteer.n_venues,
        "S": c.S,
        "K": c.K,
        "mean_out_degree": c.S / c.N if c.N else 0.0,
        "mean_degree": 2 * c.S / c.N if c.N else 0.0,
        "tweets_per_user": c.K / c.N if c.N else 0.0,
        "follow_noise_fraction": float(d.true_mu.mean()) if len(d.true_mu) else 0.0,
        "tweet_noise_fraction": float(d.true_nu.mean()) if len(d.true_nu) else 0.0,
        "label_coverage": len(c.labeled) / c.N if c.N else 0.0,
        "home_in_candidacy": float(np.mean(in_support)) if c.N else 0.0,
        "multi_location_users": float(((d.true_theta > 0).sum(axis=1) > 1).mean()),
        "p_follow_random": d.p_follow_random,
    }
