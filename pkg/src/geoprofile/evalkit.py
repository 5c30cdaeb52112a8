"""Evaluation metrics for home prediction, multi-location discovery and
relationship explanation, plus simple reference predictors.

Closeness conventions follow the measures they implement: ACC@m counts a
prediction within ``<= m`` miles, while DP/DR call a location close to a set
when some member lies strictly ``< m`` miles away.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .corpus import Corpus
from .gazetteer import Gazetteer


class EvalError(ValueError):
    """Empty or inconsistent evaluation input."""


@dataclass
class HomeEval:
    predicted: np.ndarray
    true: np.ndarray

    def __post_init__(self):
        self.predicted = np.asarray(self.predicted, dtype=np.int64)
        self.true = np.asarray(self.true, dtype=np.int64)
        if self.predicted.shape != self.true.shape:
            raise EvalError("predicted and true homes differ in length")


@dataclass
class MultiLocEval:
    predicted: list
    true: list

    def __post_init__(self):
        if len(self.predicted) != len(self.true):
            raise EvalError("predicted and true location lists differ in length")
        for t in self.true:
            if len(t) == 0:
                raise EvalError("every user needs a non-empty true location set")


@dataclass
class ExplainEval:
    pred_x: np.ndarray
    pred_y: np.ndarray
    true_x: np.ndarray
    true_y: np.ndarray
    skipped: int = 0

    def __post_init__(self):
        for name in ("pred_x", "pred_y", "true_x", "true_y"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        n = len(self.pred_x)
        if not (len(self.pred_y) == len(self.true_x) == len(self.true_y) == n):
            raise EvalError("explanation arrays differ in length")


@dataclass
class MultiLocScore:
    dp: float
    dr: float
    per_user_dp: list = field(default_factory=list)
    per_user_dr: list = field(default_factory=list)
    empty_predictions: list = field(default_factory=list)


def _pair_dist(g: Gazetteer, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return g.distances()[a, b]


def acc_at_m(e: HomeEval, m: float, g: Gazetteer) -> float:
    if m < 0:
        raise EvalError("m must be non-negative")
    if len(e.true) == 0:
        raise EvalError("no users to evaluate")
    return float(np.mean(_pair_dist(g, e.predicted, e.true) <= m))


def aad_curve(e: HomeEval, breakpoints: Sequence, g: Gazetteer) -> list:
    """ACC@m at each breakpoint (miles, ascending)."""
    bp = [float(b) for b in breakpoints]
    if any(b2 < b1 for b1, b2 in zip(bp, bp[1:])):
        raise EvalError("breakpoints must be ascending")
    if len(e.true) == 0:
        raise EvalError("no users to evaluate")
    d = _pair_dist(g, e.predicted, e.true)
    return [(b, float(np.mean(d <= b))) for b in bp]


def _close(l: int, locs: Sequence, m: float, D: np.ndarray) -> bool:
    return any(D[l, l2] < m for l2 in locs)


def dp_dr_at_k(e: MultiLocEval, k: int, m: float, g: Gazetteer) -> MultiLocScore:
    """Distance-based precision and recall of the top-k predictions.

    A user whose truncated prediction list is empty scores DP = 0 and DR = 0
    and is listed in ``empty_predictions``.
    """
    if k < 1:
        raise EvalError("k must be positive")
    if not e.true:
        raise EvalError("no users to evaluate")
    D = g.distances()
    dps, drs, empty = [], [], []
    for u, (pred, true) in enumerate(zip(e.predicted, e.true)):
        pred = list(pred)[:k]
        true = list(true)
        if not pred:
            empty.append(u)
            dps.append(0.0)
            drs.append(0.0)
            continue
        dps.append(sum(_close(l, true, m, D) for l in pred) / len(pred))
        drs.append(sum(_close(l, pred, m, D) for l in true) / len(true))
    return MultiLocScore(float(np.mean(dps)), float(np.mean(drs)), dps, drs, empty)


def explain_accuracy(e: ExplainEval, m: float, g: Gazetteer) -> float:
    """Fraction of edges with both endpoints assigned within m miles."""
    if m < 0:
        raise EvalError("m must be non-negative")
    if len(e.true_x) == 0:
        raise EvalError("no edges to evaluate")
    ok = (_pair_dist(g, e.pred_x, e.true_x) <= m) & (_pair_dist(g, e.pred_y, e.true_y) <= m)
    return float(ok.mean())


def baseline_home_explainer(c: Corpus, homes, edges: Optional[Sequence] = None) -> tuple:
    """Explain each follow edge by the two users' home locations.

    ``homes`` maps user_id to loc_id (array with -1, or dict/None for
    missing).  Returns ``(edge_ids, pred_x, pred_y, skipped)``; edges with
    an endpoint lacking a home are skipped.
    """
    if isinstance(homes, dict):
        get = homes.get
    else:
        arr = np.asarray(homes)
        get = lambda u: None if arr[u] < 0 else int(arr[u])  # noqa: E731
    edges = range(c.S) if edges is None else edges
    ids, px, py = [], [], []
    skipped = 0
    for s in edges:
        a, b = get(int(c.follow_src[s])), get(int(c.follow_dst[s]))
        if a is None or b is None:
            skipped += 1
            continue
        ids.append(int(s))
        px.append(a)
        py.append(b)
    return np.array(ids, dtype=np.int64), np.array(px, dtype=np.int64), np.array(py, dtype=np.int64), skipped


def neighbour_majority_homes(c: Corpus) -> np.ndarray:
    """Strawman home predictor: labeled users keep their label, others take
    the most common home among labeled friends and followers (ties to the
    lowest loc_id); -1 when no labeled neighbour exists.
    """
    out = c.homes().copy()
    nbs = c.neighbours()
    for u in range(c.N):
        if out[u] >= 0:
            continue
        votes = Counter(int(out[v]) for v in nbs[u] if c.users[v].home_label is not None)
        if votes:
            best = max(votes.values())
            out[u] = min(l for l, n in votes.items() if n == best)
    return out


def home_accuracy(pred: np.ndarray, true: np.ndarray, m: float, g: Gazetteer) -> float:
    """ACC@m where a missing prediction (-1) counts as a miss."""
    pred = np.asarray(pred)
    true = np.asarray(true)
    if len(true) == 0:
        raise EvalError("no users to evaluate")
    have = pred >= 0
    hits = np.zeros(len(true), dtype=bool)
    hits[have] = _pair_dist(g, pred[have], true[have]) <= m
    return float(hits.mean())


def replicate_top1(ranked: list, k: int = 2) -> list:
    """Single-location predictor: the top location repeated k times."""
    return [[r[0]] * k if r else [] for r in ranked]
