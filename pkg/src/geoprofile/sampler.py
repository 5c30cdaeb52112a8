"""Collapsed Gibbs sampling over model selectors and location assignments.

Latent variables per follow edge ``s = (i -> j)``: a selector ``mu`` (1 =
random model) and assignments ``x`` (follower side) and ``y`` (friend side).
Per tweet edge ``k = (i, v)``: a selector ``nu`` and an assignment ``z``.
Profiles ``theta`` and venue models ``psi`` are integrated out, leaving

* ``user_count[i][l]`` - location-based assignments of ``l`` to user ``i``
  over x-, y- and z-roles,
* ``venue_count[l, v]`` - location-based tweets of ``v`` assigned to ``l``.

Only ``mu = 0`` / ``nu = 0`` assignments are counted.  Assignments of noise
edges are kept so a selector can flip back; they are distributed according
to the user's normalized prior ``gamma_i / sum(gamma_i)``, which makes every
update below an exact conditional of one collapsed joint.

Assignments are stored as positions into the owner's candidacy support.
Each sweep draws one block of uniforms (3 per follow edge, 2 per tweet edge)
from a PCG64 generator, so the chain is fully determined by the seed and the
generator state can be checkpointed.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy import stats

from .corpus import Corpus
from .genmodel import (
    DistanceHistogram,
    FitError,
    NoiseParams,
    PowerLawParams,
    RandomModels,
    TweetModelPrior,
    bucket_of,
    build_distance_histogram,
    fit_power_law,
    random_models,
)

log = logging.getLogger(__name__)

_DENSE_KERNEL_MAX_L = 2000


@dataclass
class ModelParams:
    power_law: PowerLawParams = field(default_factory=PowerLawParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    random: Optional[RandomModels] = None
    tweet_prior: TweetModelPrior = field(default_factory=TweetModelPrior)

    def resolved(self, c: Corpus) -> "ModelParams":
        if self.random is not None:
            return self
        return replace(self, random=random_models(c))


@dataclass
class GibbsConfig:
    sweeps: int = 20
    burn_in: int = 10
    em_rounds: int = 3
    thin: int = 2
    seed: int = 0
    estimate_mode: str = "final_state"
    top_k: int = 2
    mass_threshold: Optional[float] = None
    single_ratio_selector: bool = False
    prefit: bool = False

    def __post_init__(self):
        if self.sweeps < 1:
            raise ValueError("sweeps must be positive")
        if not 0 <= self.burn_in < self.sweeps:
            raise ValueError("burn_in must lie in [0, sweeps)")
        if self.em_rounds < 0:
            raise ValueError("em_rounds must be non-negative")
        if self.thin < 1:
            raise ValueError("thin must be positive")
        if self.estimate_mode not in ("final_state", "averaged"):
            raise ValueError(f"unknown estimate_mode {self.estimate_mode!r}")
        if self.top_k < 1:
            raise ValueError("top_k must be positive")

    @property
    def rounds(self) -> int:
        return max(self.em_rounds, 1)

    @property
    def total_sweeps(self) -> int:
        return self.rounds * self.sweeps


@dataclass
class Sample:
    """One retained chain state, assignments as loc_ids."""

    mu: np.ndarray
    x: np.ndarray
    y: np.ndarray
    nu: np.ndarray
    z: np.ndarray


@dataclass
class ProfilesResult:
    supports: list
    theta: list
    home: np.ndarray
    top_k: list
    follow_x: np.ndarray
    follow_y: np.ndarray
    follow_mu: np.ndarray
    tweet_z: np.ndarray
    tweet_nu: np.ndarray
    power_law: PowerLawParams
    em_trace: list = field(default_factory=list)
    seed: int = 0

    def dense_theta(self, n_locations: int) -> np.ndarray:
        out = np.zeros((len(self.theta), n_locations))
        for i, (sup, p) in enumerate(zip(self.supports, self.theta)):
            out[i, sup] = p
        return out


class _FollowKernel:
    """``beta * max(d, 1)**alpha`` clamped to 1, looked up by loc_id pair."""

    def __init__(self, c: Corpus, p: PowerLawParams):
        self.g = c.gazetteer
        self.p = p
        if self.g.n_locations <= _DENSE_KERNEL_MAX_L:
            self.table = p.prob(self.g.distances()).tolist()
        else:
            self.table = None
            self._cache = {}

    def __call__(self, a: int, b: int) -> float:
        if self.table is not None:
            return self.table[a][b]
        key = (a, b) if a <= b else (b, a)
        v = self._cache.get(key)
        if v is None:
            v = self._cache[key] = self.p.prob(self.g.dist(a, b))
        return v


def _draw(weights: list, u: float) -> int:
    target = u * sum(weights)
    acc = 0.0
    for idx, w in enumerate(weights):
        acc += w
        if target < acc:
            return idx
    # u * total rounding past the last bucket; take the last positive weight
    for idx in range(len(weights) - 1, -1, -1):
        if weights[idx] > 0:
            return idx
    raise AssertionError("all conditional weights are zero")


class SamplerState:
    def __init__(self, c: Corpus, params: ModelParams, cfg: GibbsConfig):
        self.corpus = c
        self.params = params.resolved(c)
        self.cfg = cfg
        self.rng = np.random.Generator(np.random.PCG64(cfg.seed))
        self.sweep_count = 0
        self.samples: list = []
        self.em_trace: list = []
        self.history: list = []

        self.src = c.follow_src.tolist()
        self.dst = c.follow_dst.tolist()
        self.tuser = c.tweet_user.tolist()
        self.tvenue = c.tweet_venue.tolist()
        self.support = [p.support.tolist() for p in c.priors]
        self.gam = [p.gamma.tolist() for p in c.priors]
        self.gsum = [math.fsum(g) for g in self.gam]
        self.V = c.gazetteer.n_venues
        self._set_power_law(self.params.power_law)

        S, K = c.S, c.K
        self.mu = [0] * S
        self.xp = [0] * S
        self.yp = [0] * S
        self.nu = [0] * K
        self.zp = [0] * K
        self._reset_counts()

    # -- counts -------------------------------------------------------------

    def _set_power_law(self, p: PowerLawParams) -> None:
        self.params = replace(self.params, power_law=p)
        self.kernel = _FollowKernel(self.corpus, p)

    def _reset_counts(self) -> None:
        self.user_count = [[0] * len(s) for s in self.support]
        self.user_total = [0] * self.corpus.N
        self.venue_count: dict = {}
        self.loc_total = [0] * self.corpus.gazetteer.n_locations

    def rebuild_counts(self) -> None:
        self._reset_counts()
        for s in range(len(self.mu)):
            if self.mu[s] == 0:
                self._add_follow(s, 1)
        for k in range(len(self.nu)):
            if self.nu[k] == 0:
                self._add_tweet(k, 1)

    def _add_follow(self, s: int, delta: int) -> None:
        i, j = self.src[s], self.dst[s]
        self.user_count[i][self.xp[s]] += delta
        self.user_total[i] += delta
        self.user_count[j][self.yp[s]] += delta
        self.user_total[j] += delta

    def _add_tweet(self, k: int, delta: int) -> None:
        i = self.tuser[k]
        pz = self.zp[k]
        self.user_count[i][pz] += delta
        self.user_total[i] += delta
        l = self.support[i][pz]
        key = l * self.V + self.tvenue[k]
        self.venue_count[key] = self.venue_count.get(key, 0) + delta
        self.loc_total[l] += delta

    # -- weights (edge's own contribution must already be removed) ----------

    def _profile(self, i: int, p: int) -> float:
        return (self.user_count[i][p] + self.gam[i][p]) / (self.user_total[i] + self.gsum[i])

    def _mu_weights(self, s: int) -> tuple:
        i, j = self.src[s], self.dst[s]
        px, py = self.xp[s], self.yp[s]
        noise = self.params.noise
        f = self.kernel(self.support[i][px], self.support[j][py])
        if self.cfg.single_ratio_selector:
            w1 = noise.rho_f * self.params.random.p_follow
            w0 = (1.0 - noise.rho_f) * self._profile(i, px) * f
            return w0, w1
        w1 = noise.rho_f * self.params.random.p_follow * (self.gam[i][px] / self.gsum[i]) * (self.gam[j][py] / self.gsum[j])
        w0 = (1.0 - noise.rho_f) * self._profile(i, px) * self._profile(j, py) * f
        return w0, w1

    def _side_weights(self, s: int, follower: bool) -> list:
        i, j = self.src[s], self.dst[s]
        if not follower:
            i, j = j, i
            other = self.support[j][self.xp[s]]
        else:
            other = self.support[j][self.yp[s]]
        g = self.gam[i]
        if self.mu[s] == 1:
            return list(g)
        cnt = self.user_count[i]
        denom = self.user_total[i] + self.gsum[i]
        kern = self.kernel
        if follower:
            return [(cnt[p] + g[p]) / denom * kern(l, other) for p, l in enumerate(self.support[i])]
        return [(cnt[p] + g[p]) / denom * kern(other, l) for p, l in enumerate(self.support[i])]

    def _venue_term(self, l: int, v: int) -> float:
        delta = self.params.tweet_prior.delta
        return (self.venue_count.get(l * self.V + v, 0) + delta) / (self.loc_total[l] + self.V * delta)

    def _nu_weights(self, k: int) -> tuple:
        i, v, pz = self.tuser[k], self.tvenue[k], self.zp[k]
        noise = self.params.noise
        w1 = noise.rho_t * float(self.params.random.p_tweet[v]) * (self.gam[i][pz] / self.gsum[i])
        w0 = (1.0 - noise.rho_t) * self._profile(i, pz) * self._venue_term(self.support[i][pz], v)
        return w0, w1

    def _z_weights(self, k: int) -> list:
        i, v = self.tuser[k], self.tvenue[k]
        g = self.gam[i]
        if self.nu[k] == 1:
            return list(g)
        cnt = self.user_count[i]
        denom = self.user_total[i] + self.gsum[i]
        return [(cnt[p] + g[p]) / denom * self._venue_term(l, v) for p, l in enumerate(self.support[i])]

    # -- single-site updates -------------------------------------------------

    def update_follow(self, s: int, u_mu: float, u_x: float, u_y: float) -> None:
        if self.mu[s] == 0:
            self._add_follow(s, -1)
        w0, w1 = self._mu_weights(s)
        if w0 + w1 <= 0:
            raise AssertionError(f"follow edge {s}: both selector weights are zero")
        self.mu[s] = 1 if u_mu * (w0 + w1) < w1 else 0
        self.xp[s] = _draw(self._side_weights(s, True), u_x)
        self.yp[s] = _draw(self._side_weights(s, False), u_y)
        if self.mu[s] == 0:
            self._add_follow(s, 1)

    def update_tweet(self, k: int, u_nu: float, u_z: float) -> None:
        if self.nu[k] == 0:
            self._add_tweet(k, -1)
        w0, w1 = self._nu_weights(k)
        if w0 + w1 <= 0:
            raise AssertionError(f"tweet edge {k}: both selector weights are zero")
        self.nu[k] = 1 if u_nu * (w0 + w1) < w1 else 0
        self.zp[k] = _draw(self._z_weights(k), u_z)
        if self.nu[k] == 0:
            self._add_tweet(k, 1)

    def sweep(self) -> None:
        S, K = len(self.mu), len(self.nu)
        u = self.rng.random(3 * S + 2 * K).tolist()
        for s in range(S):
            self.update_follow(s, u[3 * s], u[3 * s + 1], u[3 * s + 2])
        off = 3 * S
        for k in range(K):
            self.update_tweet(k, u[off + 2 * k], u[off + 2 * k + 1])
        self.sweep_count += 1

    # -- exact conditionals (for inspection and testing) ---------------------

    def _excluding_follow(self, s: int, fn):
        counted = self.mu[s] == 0
        if counted:
            self._add_follow(s, -1)
        try:
            return fn()
        finally:
            if counted:
                self._add_follow(s, 1)

    def _excluding_tweet(self, k: int, fn):
        counted = self.nu[k] == 0
        if counted:
            self._add_tweet(k, -1)
        try:
            return fn()
        finally:
            if counted:
                self._add_tweet(k, 1)

    def conditional_mu(self, s: int) -> float:
        """P(mu_s = 1 | everything else)."""
        w0, w1 = self._excluding_follow(s, lambda: self._mu_weights(s))
        return w1 / (w0 + w1)

    def conditional_x(self, s: int) -> np.ndarray:
        w = np.array(self._excluding_follow(s, lambda: self._side_weights(s, True)))
        return w / w.sum()

    def conditional_y(self, s: int) -> np.ndarray:
        w = np.array(self._excluding_follow(s, lambda: self._side_weights(s, False)))
        return w / w.sum()

    def conditional_nu(self, k: int) -> float:
        w0, w1 = self._excluding_tweet(k, lambda: self._nu_weights(k))
        return w1 / (w0 + w1)

    def conditional_z(self, k: int) -> np.ndarray:
        w = np.array(self._excluding_tweet(k, lambda: self._z_weights(k)))
        return w / w.sum()

    # -- views ---------------------------------------------------------------

    def x_locs(self) -> np.ndarray:
        return np.array([self.support[i][p] for i, p in zip(self.src, self.xp)], dtype=np.int64)

    def y_locs(self) -> np.ndarray:
        return np.array([self.support[j][p] for j, p in zip(self.dst, self.yp)], dtype=np.int64)

    def z_locs(self) -> np.ndarray:
        return np.array([self.support[i][p] for i, p in zip(self.tuser, self.zp)], dtype=np.int64)

    def snapshot(self) -> Sample:
        return Sample(
            np.array(self.mu, dtype=np.int8), self.x_locs(), self.y_locs(),
            np.array(self.nu, dtype=np.int8), self.z_locs(),
        )

    def set_assignments(self, mu, x, y, nu, z) -> None:
        """Install assignments given as loc_ids and rebuild counts."""
        pos = [{l: p for p, l in enumerate(sup)} for sup in self.support]
        self.mu = [int(m) for m in mu]
        self.xp = [pos[i][int(l)] for i, l in zip(self.src, x)]
        self.yp = [pos[j][int(l)] for j, l in zip(self.dst, y)]
        self.nu = [int(n) for n in nu]
        self.zp = [pos[i][int(l)] for i, l in zip(self.tuser, z)]
        self.rebuild_counts()


# -- module-level operations ---------------------------------------------------


def init_state(c: Corpus, params: ModelParams, cfg: GibbsConfig) -> SamplerState:
    """Random selectors and uniform assignments over each owner's support."""
    st = SamplerState(c, params, cfg)
    for p in c.priors:
        assert len(p.support) > 0, "empty candidacy support"
    rng = st.rng
    S, K = c.S, c.K
    noise = st.params.noise
    st.mu = (rng.random(S) < noise.rho_f).astype(int).tolist()
    sizes_x = np.array([len(st.support[i]) for i in st.src], dtype=np.int64)
    sizes_y = np.array([len(st.support[j]) for j in st.dst], dtype=np.int64)
    st.xp = np.minimum((rng.random(S) * sizes_x).astype(np.int64), sizes_x - 1).tolist()
    st.yp = np.minimum((rng.random(S) * sizes_y).astype(np.int64), sizes_y - 1).tolist()
    st.nu = (rng.random(K) < noise.rho_t).astype(int).tolist()
    sizes_z = np.array([len(st.support[i]) for i in st.tuser], dtype=np.int64)
    st.zp = np.minimum((rng.random(K) * sizes_z).astype(np.int64), sizes_z - 1).tolist()
    st.rebuild_counts()
    return st


def sample_selectors(edge: int, st: SamplerState, kind: str = "follow", u: Optional[float] = None) -> int:
    """Resample ``mu`` (follow) or ``nu`` (tweet) for one edge."""
    if u is None:
        u = float(st.rng.random())
    if kind == "follow":
        if st.mu[edge] == 0:
            st._add_follow(edge, -1)
        w0, w1 = st._mu_weights(edge)
        st.mu[edge] = 1 if u * (w0 + w1) < w1 else 0
        if st.mu[edge] == 0:
            st._add_follow(edge, 1)
        return st.mu[edge]
    if kind == "tweet":
        if st.nu[edge] == 0:
            st._add_tweet(edge, -1)
        w0, w1 = st._nu_weights(edge)
        st.nu[edge] = 1 if u * (w0 + w1) < w1 else 0
        if st.nu[edge] == 0:
            st._add_tweet(edge, 1)
        return st.nu[edge]
    raise ValueError(f"unknown edge kind {kind!r}")


def sample_follow_assignments(s: int, st: SamplerState, u_x: Optional[float] = None, u_y: Optional[float] = None) -> tuple:
    if u_x is None:
        u_x, u_y = st.rng.random(2).tolist()
    counted = st.mu[s] == 0
    if counted:
        st._add_follow(s, -1)
    st.xp[s] = _draw(st._side_weights(s, True), u_x)
    st.yp[s] = _draw(st._side_weights(s, False), u_y)
    if counted:
        st._add_follow(s, 1)
    return st.support[st.src[s]][st.xp[s]], st.support[st.dst[s]][st.yp[s]]


def sample_tweet_assignment(k: int, st: SamplerState, u: Optional[float] = None) -> int:
    if u is None:
        u = float(st.rng.random())
    counted = st.nu[k] == 0
    if counted:
        st._add_tweet(k, -1)
    st.zp[k] = _draw(st._z_weights(k), u)
    if counted:
        st._add_tweet(k, 1)
    return st.support[st.tuser[k]][st.zp[k]]


def sweep(st: SamplerState) -> SamplerState:
    st.sweep()
    return st


@dataclass
class AuditReport:
    discrepancies: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def __bool__(self) -> bool:
        return self.ok


def audit_counts(st: SamplerState) -> AuditReport:
    """Recount tables from the assignments and compare with the live ones."""
    c = st.corpus
    user_count = [[0] * len(s) for s in st.support]
    user_total = [0] * c.N
    venue_count: dict = {}
    loc_total = [0] * c.gazetteer.n_locations
    for s in range(len(st.mu)):
        if st.mu[s] == 0:
            i, j = st.src[s], st.dst[s]
            user_count[i][st.xp[s]] += 1
            user_count[j][st.yp[s]] += 1
            user_total[i] += 1
            user_total[j] += 1
    for k in range(len(st.nu)):
        if st.nu[k] == 0:
            i = st.tuser[k]
            user_count[i][st.zp[k]] += 1
            user_total[i] += 1
            l = st.support[i][st.zp[k]]
            key = l * st.V + st.tvenue[k]
            venue_count[key] = venue_count.get(key, 0) + 1
            loc_total[l] += 1
    report = AuditReport()
    for i in range(c.N):
        for p, l in enumerate(st.support[i]):
            if user_count[i][p] != st.user_count[i][p]:
                report.discrepancies.append(("user_loc", i, l, user_count[i][p], st.user_count[i][p]))
        if user_total[i] != st.user_total[i]:
            report.discrepancies.append(("user_total", i, None, user_total[i], st.user_total[i]))
    for key in set(venue_count) | set(st.venue_count):
        a, b = venue_count.get(key, 0), st.venue_count.get(key, 0)
        if a != b:
            report.discrepancies.append(("loc_venue", key // st.V, key % st.V, a, b))
    for l in range(len(loc_total)):
        if loc_total[l] != st.loc_total[l]:
            report.discrepancies.append(("loc_total", l, None, loc_total[l], st.loc_total[l]))
    return report


def _counts_from_sample(st: SamplerState, smp: Sample) -> list:
    pos = [{l: p for p, l in enumerate(sup)} for sup in st.support]
    counts = [np.zeros(len(s)) for s in st.support]
    for s in np.flatnonzero(smp.mu == 0).tolist():
        i, j = st.src[s], st.dst[s]
        counts[i][pos[i][int(smp.x[s])]] += 1
        counts[j][pos[j][int(smp.y[s])]] += 1
    for k in np.flatnonzero(smp.nu == 0).tolist():
        i = st.tuser[k]
        counts[i][pos[i][int(smp.z[k])]] += 1
    return counts


def estimate_theta(st: SamplerState, i: int, samples: Optional[list] = None) -> tuple:
    """Posterior-mean profile of user ``i`` over its candidacy support.

    With ``samples`` the counts are averaged over those retained states
    first; otherwise the live counts are used.  Returns ``(support, probs)``.
    """
    return _all_thetas(st, samples, users=[i])[0]


def _all_thetas(st: SamplerState, samples: Optional[list] = None, users=None) -> list:
    users = range(st.corpus.N) if users is None else users
    if samples:
        acc = [np.zeros(len(s)) for s in st.support]
        for smp in samples:
            for i, cnt in enumerate(_counts_from_sample(st, smp)):
                acc[i] += cnt
        counts = [a / len(samples) for a in acc]
    else:
        counts = [np.asarray(c, dtype=float) for c in st.user_count]
    out = []
    for i in users:
        sup = np.asarray(st.support[i], dtype=np.int64)
        g = np.asarray(st.gam[i])
        num = counts[i] + g
        out.append((sup, num / num.sum()))
    return out


def _argmax_lowest(support: np.ndarray, probs: np.ndarray) -> int:
    best = probs.max()
    return int(support[probs == best].min())


def homes_from_thetas(thetas: list) -> np.ndarray:
    return np.array([_argmax_lowest(s, p) for s, p in thetas], dtype=np.int64)


def rank_locations(support: np.ndarray, probs: np.ndarray, k: int, threshold: Optional[float] = None) -> list:
    """Top-k loc_ids by probability, ties to the lowest loc_id.

    With ``threshold`` locations below that mass are dropped, but the top
    location is always kept.
    """
    order = np.lexsort((support, -probs))
    ranked = support[order][:k].tolist()
    if threshold is not None:
        keep = probs[order][:k] >= threshold
        keep[0] = True
        ranked = [l for l, ok in zip(ranked, keep) if ok]
    return ranked


def _pair_histogram(homes: np.ndarray, c: Corpus) -> DistanceHistogram:
    """Ordered user pairs bucketed by the distance between their homes."""
    L = c.gazetteer.n_locations
    n_at = np.bincount(homes[homes >= 0], minlength=L).astype(float)
    occupied = np.flatnonzero(n_at)
    D = c.gazetteer.distances()
    h = DistanceHistogram()
    for a in occupied.tolist():
        for b in occupied.tolist():
            pairs = n_at[a] * (n_at[a] - 1) if a == b else n_at[a] * n_at[b]
            if pairs:
                h.add(bucket_of(D[a, b]), pairs, 0)
    return h


def expected_distance_histogram(c: Corpus, samples: list, homes: np.ndarray) -> DistanceHistogram:
    """E-step summary: location-based edges bucketed by expected distance,
    against the ordered pair histogram of the given home locations.

    An edge counts as location-based when ``mu = 0`` in at least half of the
    samples; its distance is averaged over those samples.
    """
    D = c.gazetteer.distances()
    mus = np.stack([s.mu for s in samples]).astype(float)
    dists = np.stack([D[s.x, s.y] for s in samples])
    loc_based = (mus == 0)
    frac = loc_based.mean(axis=0)
    use = frac >= 0.5
    h = _pair_histogram(homes, c)
    if use.any():
        exp_d = (dists * loc_based).sum(axis=0)[use] / loc_based.sum(axis=0)[use]
        for b in bucket_of(exp_d).tolist():
            h.add(b, 0, 1)
    return h


def refit_power_law(st: SamplerState, samples: list, homes: Optional[np.ndarray] = None) -> PowerLawParams:
    """M-step: refit (alpha, beta) from expected edge distances.

    Keeps the current parameters (with a warning) when the retained samples
    do not populate at least two distance buckets.
    """
    current = st.params.power_law
    if not samples:
        log.warning("no retained samples; keeping alpha=%.4f beta=%.6g", current.alpha, current.beta)
        return current
    if homes is None:
        homes = homes_from_thetas(_all_thetas(st, samples))
    h = expected_distance_histogram(st.corpus, samples, homes)
    try:
        return fit_power_law(h)
    except FitError as exc:
        log.warning("power-law refit skipped (%s); keeping alpha=%.4f beta=%.6g", exc, current.alpha, current.beta)
        return current


def _modal(rows: np.ndarray) -> np.ndarray:
    if rows.shape[1] == 0:
        return rows[0].astype(np.int64)
    return np.asarray(stats.mode(rows, axis=0, keepdims=False).mode, dtype=np.int64)


def collect_result(st: SamplerState) -> ProfilesResult:
    cfg = st.cfg
    samples = st.samples if cfg.estimate_mode == "averaged" else None
    thetas = _all_thetas(st, samples)
    home = homes_from_thetas(thetas)
    top = [rank_locations(s, p, cfg.top_k, cfg.mass_threshold) for s, p in thetas]
    pool = st.samples or [st.snapshot()]
    fx = _modal(np.stack([s.x for s in pool]))
    fy = _modal(np.stack([s.y for s in pool]))
    fmu = _modal(np.stack([s.mu for s in pool]))
    tz = _modal(np.stack([s.z for s in pool]))
    tnu = _modal(np.stack([s.nu for s in pool]))
    return ProfilesResult(
        supports=[s for s, _ in thetas], theta=[p for _, p in thetas], home=home, top_k=top,
        follow_x=fx, follow_y=fy, follow_mu=fmu, tweet_z=tz, tweet_nu=tnu,
        power_law=st.params.power_law, em_trace=list(st.em_trace), seed=cfg.seed,
    )


def prefit_params(c: Corpus, params: ModelParams) -> ModelParams:
    """Replace the initial power law by a fit on labeled users, if possible."""
    try:
        p = fit_power_law(build_distance_histogram(c.labeled, c))
    except FitError as exc:
        log.warning("pre-fit skipped: %s", exc)
        return params
    return replace(params, power_law=p)


def advance(st: SamplerState, stop_after: Optional[int] = None,
            callback: Optional[Callable[[SamplerState], None]] = None) -> bool:
    """Continue the sweep / EM schedule; True once the schedule is complete.

    ``stop_after`` interrupts after that many total sweeps, leaving the state
    resumable (see :func:`geoprofile.checkpoint.save_checkpoint`).
    """
    cfg = st.cfg
    total = cfg.total_sweeps
    while st.sweep_count < total:
        if stop_after is not None and st.sweep_count >= stop_after:
            return False
        st.sweep()
        w = (st.sweep_count - 1) % cfg.sweeps
        if w >= cfg.burn_in and (w - cfg.burn_in) % cfg.thin == 0:
            st.samples.append(st.snapshot())
        if callback is not None:
            callback(st)
        if w == cfg.sweeps - 1:
            if cfg.em_rounds > 0:
                new = refit_power_law(st, st.samples)
                st.em_trace.append(new)
                log.info("EM round %d: alpha=%.4f beta=%.6g", len(st.em_trace), new.alpha, new.beta)
                st._set_power_law(new)
            if st.sweep_count < total:
                st.samples = []
    return True


def run(c: Corpus, params: Optional[ModelParams] = None, cfg: Optional[GibbsConfig] = None,
        callback: Optional[Callable[[SamplerState], None]] = None) -> ProfilesResult:
    """Initialise, run the Gibbs-EM schedule and summarise."""
    params = params or ModelParams()
    cfg = cfg or GibbsConfig()
    if cfg.prefit:
        params = prefit_params(c, params)
    st = init_state(c, params, cfg)
    advance(st, callback=callback)
    return collect_result(st)
