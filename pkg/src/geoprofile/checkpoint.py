"""Versioned text checkpoint of a sampler state, for exact resume.

Layout (one section header per ``[name]`` line, values space separated)::

    geoprofile-checkpoint 1
    [corpus]      sha256 digest of the corpus the chain was run on
    [params]      key value lines; p_tweet holds |V| floats
    [config]      key value lines of the GibbsConfig
    [progress]    sweep_count
    [rng]         JSON of the PCG64 bit generator state
    [em]          one "alpha beta" line per finished EM round
    [follow]      one "mu x y" line per follow edge (loc_ids)
    [tweet]       one "nu z" line per tweet edge (loc_ids)
    [samples]     n, then 5 lines per retained sample: mu, x, y, nu, z

Floats are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path
from typing import Union

import numpy as np

from .corpus import Corpus
from .genmodel import NoiseParams, PowerLawParams, RandomModels, TweetModelPrior
from .sampler import GibbsConfig, ModelParams, Sample, SamplerState

MAGIC = "geoprofile-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    """Checkpoint unreadable, from another version, or for another corpus."""


def _ints(xs) -> str:
    return " ".join(str(int(v)) for v in xs)


def save_checkpoint(st: SamplerState, path: Union[str, Path]) -> None:
    p = st.params
    lines = [f"{MAGIC} {VERSION}", "[corpus]", st.corpus.digest(), "[params]",
             f"alpha {float(p.power_law.alpha)!r}", f"beta {float(p.power_law.beta)!r}",
             f"rho_f {float(p.noise.rho_f)!r}", f"rho_t {float(p.noise.rho_t)!r}",
             f"delta {float(p.tweet_prior.delta)!r}", f"p_follow {float(p.random.p_follow)!r}",
             "p_tweet " + " ".join(repr(float(v)) for v in p.random.p_tweet), "[config]"]
    for f in fields(GibbsConfig):
        lines.append(f"{f.name} {getattr(st.cfg, f.name)!r}")
    lines += ["[progress]", str(st.sweep_count), "[rng]", json.dumps(st.rng.bit_generator.state, sort_keys=True), "[em]"]
    lines += [f"{float(e.alpha)!r} {float(e.beta)!r}" for e in st.em_trace]
    lines.append("[follow]")
    lines += [f"{m} {x} {y}" for m, x, y in zip(st.mu, st.x_locs().tolist(), st.y_locs().tolist())]
    lines.append("[tweet]")
    lines += [f"{n} {z}" for n, z in zip(st.nu, st.z_locs().tolist())]
    lines += ["[samples]", str(len(st.samples))]
    for smp in st.samples:
        lines += [_ints(smp.mu), _ints(smp.x), _ints(smp.y), _ints(smp.nu), _ints(smp.z)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _sections(text: str) -> dict:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or lines[0] != f"{MAGIC} {VERSION}":
        raise CheckpointError(f"not a version {VERSION} checkpoint")
    out, cur = {}, None
    for line in lines[1:]:
        if line.startswith("[") and line.endswith("]"):
            cur = line[1:-1]
            out[cur] = []
        elif cur is not None:
            out[cur].append(line)
    return out


def _parse_value(text: str):
    if text == "None":
        return None
    if text in ("True", "False"):
        return text == "True"
    if text.startswith("'"):
        return text.strip("'")
    try:
        return int(text)
    except ValueError:
        return float(text)


def _array(line: str) -> np.ndarray:
    return np.array([int(v) for v in line.split()], dtype=np.int64)


def load_checkpoint(c: Corpus, path: Union[str, Path]) -> SamplerState:
    """Rebuild a sampler state that continues exactly where it was saved."""
    try:
        sec = _sections(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CheckpointError(f"{path}: {exc}") from None
    try:
        if sec["corpus"][0] != c.digest():
            raise CheckpointError(f"{path}: checkpoint was written for a different corpus")
        kv = dict(line.split(" ", 1) for line in sec["params"])
        params = ModelParams(
            power_law=PowerLawParams(float(kv["alpha"]), float(kv["beta"])),
            noise=NoiseParams(float(kv["rho_f"]), float(kv["rho_t"])),
            random=RandomModels(float(kv["p_follow"]), np.array([float(v) for v in kv["p_tweet"].split()])),
            tweet_prior=TweetModelPrior(float(kv["delta"])),
        )
        ckv = dict(line.split(" ", 1) for line in sec["config"])
        cfg = GibbsConfig(**{k: _parse_value(v) for k, v in ckv.items()})
        st = SamplerState(c, params, cfg)
        st.sweep_count = int(sec["progress"][0])
        st.rng.bit_generator.state = json.loads(sec["rng"][0])
        st.em_trace = [PowerLawParams(*map(float, line.split())) for line in sec["em"]]
        follow = [tuple(map(int, line.split())) for line in sec["follow"]]
        tweet = [tuple(map(int, line.split())) for line in sec["tweet"]]
        if len(follow) != c.S or len(tweet) != c.K:
            raise CheckpointError(f"{path}: edge counts do not match the corpus")
        mu, x, y = zip(*follow) if follow else ((), (), ())
        nu, z = zip(*tweet) if tweet else ((), ())
        st.set_assignments(mu, x, y, nu, z)
        rows = sec["samples"]
        n = int(rows[0])
        for t in range(n):
            block = rows[1 + 5 * t: 6 + 5 * t]
            mu_s, x_s, y_s, nu_s, z_s = (_array(b) for b in block)
            st.samples.append(Sample(mu_s.astype(np.int8), x_s, y_s, nu_s.astype(np.int8), z_s))
    except (KeyError, IndexError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None
    return st
