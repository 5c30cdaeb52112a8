"""Line-oriented UTF-8 file formats.

Inputs (tab separated, ``#`` lines and blank lines ignored):

* users: ``user_id<TAB>City, Region`` (label empty when unknown)
* follows: ``follower_id<TAB>friend_id``
* tweets: ``user_id<TAB>venue_name<TAB>count`` (count expands into edges)

Outputs:

* idmap: ``internal_index<TAB>user_id``
* truth: record-typed lines, first field ``user``, ``follow`` or ``tweet``::

      user    user_id  labeled(0/1)  home  loc=mass|loc=mass...
      follow  edge  follower  friend  mu  x  y      (x, y are "-" for noise)
      tweet   edge  user  venue  nu  z               (z is "-" for noise)

* profiles: ``user_id<TAB>home<TAB>top1|top2...<TAB>loc=mass|...``
* explanations: ``follow<TAB>edge<TAB>follower<TAB>friend<TAB>location|noise<TAB>x<TAB>y``
  and ``tweet<TAB>edge<TAB>user<TAB>venue<TAB>location|noise<TAB>z``

Locations are written as ``City, Region`` labels.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .corpus import Corpus, CorpusError, PriorConfig, User, build_corpus
from .gazetteer import Gazetteer, parse_profile_location

log = logging.getLogger(__name__)

PathLike = Union[str, Path]
LIST_SEP = "|"


class DataError(ValueError):
    """Unreadable or inconsistent input file, with file and line context."""


def _rows(path: PathLike, n_fields: tuple):
    """Yield ``(lineno, fields)`` for non-comment lines of a TSV file."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"{path}: no such file")
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) not in n_fields:
                want = " or ".join(str(n) for n in n_fields)
                raise DataError(f"{path}:{lineno}: expected {want} tab-separated fields, got {len(parts)}")
            yield lineno, parts


def _open_out(path: PathLike, header: str = ""):
    fh = open(path, "w", encoding="utf-8")
    if header:
        fh.write(f"# {header}\n")
    return fh


def _label(g: Gazetteer, loc: int) -> str:
    return "-" if loc < 0 else g.label(int(loc))


def _loc(g: Gazetteer, text: str, where: str) -> int:
    if text == "-":
        return -1
    loc = parse_profile_location(text, g)
    if loc is None:
        raise DataError(f"{where}: unknown location {text!r}")
    return loc


# -- corpus input ----------------------------------------------------------------


def read_corpus(g: Gazetteer, users: PathLike, follows: PathLike, tweets: Optional[PathLike] = None,
                pc: PriorConfig = PriorConfig()) -> Corpus:
    """Read the three input files into a corpus with dense internal ids.

    A label that does not resolve to a single gazetteer location is dropped
    with a warning and the user is treated as unlabeled.
    """
    names, index, homes = [], {}, []
    unresolved = 0
    for lineno, parts in _rows(users, (1, 2)):
        ext = parts[0].strip()
        if not ext:
            raise DataError(f"{users}:{lineno}: empty user id")
        if ext in index:
            raise DataError(f"{users}:{lineno}: duplicate user id {ext!r}")
        text = parts[1].strip() if len(parts) == 2 else ""
        home = None
        if text:
            home = parse_profile_location(text, g)
            if home is None:
                unresolved += 1
        index[ext] = len(names)
        names.append(ext)
        homes.append(home)
    if unresolved:
        log.warning("%s: %d labels did not resolve to a gazetteer location; treated as unlabeled", users, unresolved)

    def user_ref(path, lineno, ext):
        try:
            return index[ext]
        except KeyError:
            raise DataError(f"{path}:{lineno}: unknown user id {ext!r}") from None

    pairs = []
    for lineno, parts in _rows(follows, (2,)):
        a, b = user_ref(follows, lineno, parts[0].strip()), user_ref(follows, lineno, parts[1].strip())
        if a == b:
            raise DataError(f"{follows}:{lineno}: self-follow by {parts[0].strip()!r}")
        pairs.append((a, b))

    tw = []
    if tweets is not None:
        for lineno, parts in _rows(tweets, (2, 3)):
            u = user_ref(tweets, lineno, parts[0].strip())
            v = g.venue_id(parts[1])
            if v is None:
                raise DataError(f"{tweets}:{lineno}: unknown venue {parts[1]!r}")
            n = 1
            if len(parts) == 3:
                try:
                    n = int(parts[2])
                except ValueError:
                    raise DataError(f"{tweets}:{lineno}: count {parts[2]!r} is not an integer") from None
                if n < 1:
                    raise DataError(f"{tweets}:{lineno}: count must be positive")
            tw.extend([(u, v)] * n)

    try:
        return build_corpus([User(i, h) for i, h in enumerate(homes)], pairs, tw, g, pc, user_names=names)
    except CorpusError as exc:
        raise DataError(str(exc)) from None


def write_corpus(c: Corpus, out_dir: PathLike, header: str = "") -> dict:
    """Write users, follows and tweets files; returns the paths written."""
    out = Path(out_dir)
    g = c.gazetteer
    paths = {k: out / f"{k}.tsv" for k in ("users", "follows", "tweets")}
    with _open_out(paths["users"], header) as fh:
        for u in c.users:
            fh.write(f"{c.name(u.user_id)}\t{'' if u.home_label is None else g.label(u.home_label)}\n")
    with _open_out(paths["follows"], header) as fh:
        for a, b in zip(c.follow_src.tolist(), c.follow_dst.tolist()):
            fh.write(f"{c.name(a)}\t{c.name(b)}\n")
    with _open_out(paths["tweets"], header) as fh:
        # consecutive repeats collapse into one counted line
        run_key, run_n = None, 0
        for key in zip(c.tweet_user.tolist(), c.tweet_venue.tolist()):
            if key == run_key:
                run_n += 1
                continue
            if run_key is not None:
                fh.write(f"{c.name(run_key[0])}\t{g.venues[run_key[1]].name}\t{run_n}\n")
            run_key, run_n = key, 1
        if run_key is not None:
            fh.write(f"{c.name(run_key[0])}\t{g.venues[run_key[1]].name}\t{run_n}\n")
    return paths


def write_idmap(c: Corpus, path: PathLike, header: str = "") -> None:
    with _open_out(path, header) as fh:
        for i in range(c.N):
            fh.write(f"{i}\t{c.name(i)}\n")


# -- ground truth ------------------------------------------------------------------


@dataclass
class Truth:
    """Ground truth keyed by external user ids."""

    users: list = field(default_factory=list)
    labeled: dict = field(default_factory=dict)
    home: dict = field(default_factory=dict)
    profile: dict = field(default_factory=dict)
    follows: list = field(default_factory=list)
    tweets: list = field(default_factory=list)


def write_truth(d, path: PathLike, header: str = "") -> None:
    """Ground-truth sidecar for a :class:`~geoprofile.synth.SyntheticDataset`."""
    c = d.corpus
    g = c.gazetteer
    with _open_out(path, header) as fh:
        for i, u in enumerate(c.users):
            sup = np.flatnonzero(d.true_theta[i] > 0)
            mass = LIST_SEP.join(f"{g.label(l)}={float(d.true_theta[i, l])!r}" for l in sup.tolist())
            fh.write(f"user\t{c.name(i)}\t{int(u.home_label is not None)}\t{g.label(int(d.true_home[i]))}\t{mass}\n")
        for s in range(c.S):
            a, b = int(c.follow_src[s]), int(c.follow_dst[s])
            fh.write(f"follow\t{s}\t{c.name(a)}\t{c.name(b)}\t{int(d.true_mu[s])}\t"
                     f"{_label(g, d.true_x[s])}\t{_label(g, d.true_y[s])}\n")
        for k in range(c.K):
            fh.write(f"tweet\t{k}\t{c.name(int(c.tweet_user[k]))}\t{g.venues[int(c.tweet_venue[k])].name}\t"
                     f"{int(d.true_nu[k])}\t{_label(g, d.true_z[k])}\n")


def _parse_masses(g: Gazetteer, text: str, where: str) -> dict:
    out = {}
    if not text:
        return out
    for item in text.split(LIST_SEP):
        label, sep, mass = item.rpartition("=")
        if not sep:
            raise DataError(f"{where}: malformed location=mass item {item!r}")
        try:
            out[_loc(g, label, where)] = float(mass)
        except ValueError:
            raise DataError(f"{where}: mass {mass!r} is not a number") from None
    return out


def read_truth(g: Gazetteer, path: PathLike) -> Truth:
    t = Truth()
    for lineno, parts in _rows(path, (5, 6, 7)):
        where = f"{path}:{lineno}"
        kind = parts[0]
        if kind == "user" and len(parts) == 5:
            ext = parts[1]
            t.users.append(ext)
            t.labeled[ext] = parts[2] == "1"
            t.home[ext] = _loc(g, parts[3], where)
            t.profile[ext] = _parse_masses(g, parts[4], where)
        elif kind == "follow" and len(parts) == 7:
            t.follows.append((int(parts[1]), parts[2], parts[3], int(parts[4]),
                              _loc(g, parts[5], where), _loc(g, parts[6], where)))
        elif kind == "tweet" and len(parts) == 6:
            t.tweets.append((int(parts[1]), parts[2], parts[3], int(parts[4]), _loc(g, parts[5], where)))
        else:
            raise DataError(f"{where}: unrecognised truth record")
    if not t.users:
        raise DataError(f"{path}: truth file has no user records")
    return t


# -- predictions -----------------------------------------------------------------


@dataclass
class Predictions:
    """Fitted output keyed by external user ids."""

    users: list = field(default_factory=list)
    home: dict = field(default_factory=dict)
    top_k: dict = field(default_factory=dict)
    theta: dict = field(default_factory=dict)
    follows: list = field(default_factory=list)
    tweets: list = field(default_factory=list)


def write_profiles(c: Corpus, r, path: PathLike, header: str = "") -> None:
    g = c.gazetteer
    with _open_out(path, header) as fh:
        for i in range(c.N):
            top = LIST_SEP.join(g.label(l) for l in r.top_k[i])
            mass = LIST_SEP.join(f"{g.label(int(l))}={float(p)!r}" for l, p in zip(r.supports[i], r.theta[i]))
            fh.write(f"{c.name(i)}\t{g.label(int(r.home[i]))}\t{top}\t{mass}\n")


def write_explanations(c: Corpus, r, path: PathLike, header: str = "") -> None:
    g = c.gazetteer
    with _open_out(path, header) as fh:
        for s in range(c.S):
            a, b = int(c.follow_src[s]), int(c.follow_dst[s])
            sel = "noise" if r.follow_mu[s] else "location"
            fh.write(f"follow\t{s}\t{c.name(a)}\t{c.name(b)}\t{sel}\t{g.label(int(r.follow_x[s]))}\t"
                     f"{g.label(int(r.follow_y[s]))}\n")
        for k in range(c.K):
            sel = "noise" if r.tweet_nu[k] else "location"
            fh.write(f"tweet\t{k}\t{c.name(int(c.tweet_user[k]))}\t{g.venues[int(c.tweet_venue[k])].name}\t"
                     f"{sel}\t{g.label(int(r.tweet_z[k]))}\n")


def read_predictions(g: Gazetteer, profiles: PathLike, explanations: Optional[PathLike] = None) -> Predictions:
    p = Predictions()
    for lineno, parts in _rows(profiles, (4,)):
        where = f"{profiles}:{lineno}"
        ext = parts[0]
        if ext in p.home:
            raise DataError(f"{where}: duplicate user id {ext!r}")
        p.users.append(ext)
        p.home[ext] = _loc(g, parts[1], where)
        p.top_k[ext] = [_loc(g, x, where) for x in parts[2].split(LIST_SEP)] if parts[2] else []
        p.theta[ext] = _parse_masses(g, parts[3], where)
    if explanations is not None and Path(explanations).exists():
        for lineno, parts in _rows(explanations, (6, 7)):
            where = f"{explanations}:{lineno}"
            if parts[0] == "follow" and len(parts) == 7:
                p.follows.append((int(parts[1]), parts[2], parts[3], parts[4] == "noise",
                                  _loc(g, parts[5], where), _loc(g, parts[6], where)))
            elif parts[0] == "tweet" and len(parts) == 6:
                p.tweets.append((int(parts[1]), parts[2], parts[3], parts[4] == "noise", _loc(g, parts[5], where)))
            else:
                raise DataError(f"{where}: unrecognised explanation record")
    return p


def write_key_values(items, path: PathLike, header: str = "") -> None:
    with _open_out(path, header) as fh:
        for k, v in items:
            fh.write(f"{k}={v}\n")
