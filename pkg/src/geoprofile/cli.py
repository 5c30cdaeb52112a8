"""Command-line entry point: ``geoprofile synth | fit | eval | explain``.

Settings come from built-in defaults, then an optional flat ``key=value``
config file (``--config``), then command-line flags; later sources win.
Every output directory receives ``config.txt`` with the resolved settings.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import fileio
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .corpus import CorpusError, PriorConfig
from .evalkit import (
    EvalError,
    ExplainEval,
    HomeEval,
    MultiLocEval,
    aad_curve,
    acc_at_m,
    dp_dr_at_k,
    explain_accuracy,
)
from .gazetteer import GazetteerError, bundled_gazetteer_path, load_gazetteer
from .genmodel import NoiseParams, PowerLawParams, TweetModelPrior
from .sampler import (
    GibbsConfig,
    ModelParams,
    ProfilesResult,
    _modal,
    advance,
    collect_result,
    homes_from_thetas,
    init_state,
    prefit_params,
    rank_locations,
)
from .synth import SynthConfig, SynthError, dataset_stats, generate_world

log = logging.getLogger("geoprofile")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3
DEFAULT_BREAKPOINTS = "0,10,25,50,100,250,500,1000,2500"


class ConfigError(ValueError):
    """Bad or missing setting."""


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _opt_float(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return float(text)


def _opt_int(text):
    if text is None or str(text).strip().lower() in ("", "none"):
        return None
    return int(text)


def _floats(text) -> tuple:
    return tuple(float(x) for x in str(text).split(",") if x.strip())


@dataclass(frozen=True)
class Key:
    type: Callable
    default: object
    help: str
    commands: tuple


_ALL = ("synth", "fit", "eval", "explain")
KEYS = {
    "seed": Key(int, 0, "random seed", _ALL),
    "out": Key(str, None, "output directory", ("synth", "fit", "eval")),
    "gazetteer": Key(str, None, "gazetteer TSV (default: bundled US cities)", ("fit", "eval", "explain")),
    # synth
    "n_users": Key(int, 1000, "number of users", ("synth",)),
    "n_locations": Key(int, 20, "number of locations", ("synth",)),
    "n_venues": Key(_opt_int, None, "number of venue names (default: one per location)", ("synth",)),
    "label_fraction": Key(float, 0.8, "fraction of users with an observed home", ("synth",)),
    "tweets_per_user": Key(float, 20.0, "mean venue mentions per user", ("synth",)),
    "profile_sparsity": Key(float, 1.0, "Dirichlet concentration of planted profiles", ("synth",)),
    "profile_sizes": Key(_floats, None, "probabilities of 1,2,.. planted locations per user", ("synth",)),
    "geo_coherent": Key(_bool, False, "venue models favour nearby venue names", ("synth",)),
    "alpha": Key(float, -0.55, "planted power-law exponent", ("synth",)),
    "beta": Key(float, 0.0045, "planted power-law scale", ("synth",)),
    # shared model settings
    "rho_f": Key(float, 0.1, "follow noise rate", ("synth", "fit")),
    "rho_t": Key(float, 0.1, "tweet noise rate", ("synth", "fit")),
    "tau": Key(float, 0.1, "candidacy prior mass", ("synth", "fit")),
    "boost": Key(float, 100.0, "prior boost on observed homes", ("synth", "fit")),
    "base_gamma": Key(float, 1.0, "base prior mass", ("synth", "fit")),
    "delta": Key(float, 0.01, "venue-model Dirichlet prior", ("synth", "fit")),
    # fit
    "users": Key(str, None, "users file", ("fit",)),
    "follows": Key(str, None, "follows file", ("fit",)),
    "tweets": Key(str, None, "tweets file (optional)", ("fit",)),
    "sweeps": Key(int, 20, "sweeps per EM round", ("fit",)),
    "burn_in": Key(int, 10, "sweeps discarded at the start of each round", ("fit",)),
    "em_rounds": Key(int, 3, "EM rounds (0 keeps alpha, beta fixed)", ("fit",)),
    "thin": Key(int, 2, "keep every n-th sweep after burn-in", ("fit",)),
    "alpha0": Key(float, -0.55, "initial power-law exponent", ("fit",)),
    "beta0": Key(float, 0.0045, "initial power-law scale", ("fit",)),
    "prefit": Key(_bool, False, "start from a fit on labeled users", ("fit",)),
    "estimate_mode": Key(str, "final_state", "final_state or averaged", ("fit",)),
    "mass_threshold": Key(_opt_float, None, "drop ranked locations below this mass", ("fit",)),
    "single_ratio_selector": Key(_bool, False, "selector update with the follower ratio only", ("fit",)),
    "chains": Key(int, 1, "independent chains run concurrently", ("fit",)),
    "resume": Key(str, None, "checkpoint to continue from", ("fit",)),
    "stop_after": Key(_opt_int, None, "stop after this many total sweeps and checkpoint", ("fit",)),
    "top_k": Key(int, 2, "locations kept per user", ("fit", "eval", "explain")),
    # eval / explain
    "truth": Key(str, None, "ground-truth sidecar", ("eval",)),
    "predictions": Key(str, None, "directory written by fit", ("eval", "explain")),
    "acc_miles": Key(float, 100.0, "distance for ACC@m, DP/DR and explanation accuracy", ("eval",)),
    "breakpoints": Key(_floats, _floats(DEFAULT_BREAKPOINTS), "AAD breakpoints in miles", ("eval",)),
    "user": Key(str, None, "user id to explain", ("explain",)),
}

REQUIRED = {
    "synth": ("out",),
    "fit": ("users", "follows", "out"),
    "eval": ("truth", "predictions", "out"),
    "explain": ("predictions", "user"),
}


def read_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {path} does not exist")
    out = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key = key.strip().replace("-", "_")
        if key not in KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown setting {key!r}")
        out[key] = value.strip()
    return out


def resolve(command: str, file_values: dict, flag_values: dict) -> dict:
    """Defaults, then config file, then flags; values converted by type."""
    cfg = {}
    for name, key in KEYS.items():
        if command not in key.commands:
            continue
        raw, source = key.default, None
        if name in file_values:
            raw, source = file_values[name], "config file"
        if flag_values.get(name) is not None:
            raw, source = flag_values[name], "flag"
        try:
            cfg[name] = key.type(raw) if (source is not None and raw is not None) else raw
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{name} from {source}: {exc}") from None
    missing = [k for k in REQUIRED[command] if cfg.get(k) is None]
    if missing:
        raise ConfigError("missing required setting(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return cfg


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(repr(x) for x in v)
    return "" if v is None else str(v)


def write_config_echo(cfg: dict, command: str, out: Path) -> None:
    fileio.write_key_values([("command", command)] + [(k, _fmt(v)) for k, v in sorted(cfg.items())],
                            out / "config.txt")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoprofile", description="Multi-location user profiling from follows and venue mentions.")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in _ALL:
        sp = sub.add_parser(command)
        sp.add_argument("--config", help="flat key=value settings file")
        sp.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
        for name, key in KEYS.items():
            if command in key.commands:
                sp.add_argument("--" + name.replace("_", "-"), dest=name, default=None, help=key.help)
    return parser


# -- synth ---------------------------------------------------------------------------


def cmd_synth(cfg: dict) -> int:
    extra = {}
    if cfg["profile_sizes"] is not None:
        extra["profile_size_probs"] = cfg["profile_sizes"]
    sc = SynthConfig(
        n_locations=cfg["n_locations"], n_venues=cfg["n_venues"], n_users=cfg["n_users"],
        label_fraction=cfg["label_fraction"], tweets_per_user=cfg["tweets_per_user"],
        power_law=PowerLawParams(cfg["alpha"], cfg["beta"]),
        noise=NoiseParams(cfg["rho_f"], cfg["rho_t"]),
        prior=PriorConfig(cfg["tau"], cfg["base_gamma"], cfg["boost"]),
        delta=TweetModelPrior(cfg["delta"]), profile_sparsity=cfg["profile_sparsity"],
        seed=cfg["seed"], geo_coherent=cfg["geo_coherent"], **extra,
    )
    d = generate_world(sc)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    header = f"seed={cfg['seed']}"
    d.corpus.gazetteer.write(out / "gazetteer.tsv")
    fileio.write_corpus(d.corpus, out, header)
    fileio.write_truth(d, out / "truth.tsv", header)
    stats = dataset_stats(d)
    fileio.write_key_values([("seed", cfg["seed"])] + list(stats.items()), out / "stats.txt")
    write_config_echo(cfg, "synth", out)
    for k, v in stats.items():
        print(f"{k}\t{v:.6g}" if isinstance(v, float) else f"{k}\t{v}")
    return EXIT_OK


# -- fit -----------------------------------------------------------------------------


def _gazetteer(cfg: dict):
    return load_gazetteer(cfg.get("gazetteer") or bundled_gazetteer_path())


def _model_setup(cfg: dict, seed: int) -> tuple:
    params = ModelParams(
        power_law=PowerLawParams(cfg["alpha0"], cfg["beta0"]),
        noise=NoiseParams(cfg["rho_f"], cfg["rho_t"]),
        tweet_prior=TweetModelPrior(cfg["delta"]),
    )
    gc = GibbsConfig(
        sweeps=cfg["sweeps"], burn_in=cfg["burn_in"], em_rounds=cfg["em_rounds"], thin=cfg["thin"],
        seed=seed, estimate_mode=cfg["estimate_mode"], top_k=cfg["top_k"],
        mass_threshold=cfg["mass_threshold"], single_ratio_selector=cfg["single_ratio_selector"], prefit=cfg["prefit"],
    )
    return params, gc


def _run_chain(c, params, gc, ckpt: Path, resume: Optional[str], stop_after: Optional[int]):
    """One chain from scratch or from a checkpoint; None if stopped early."""
    if resume:
        st = load_checkpoint(c, resume)
    else:
        if gc.prefit:
            params = prefit_params(c, params)
        st = init_state(c, params, gc)
    done = advance(st, stop_after=stop_after)
    save_checkpoint(st, ckpt)
    if not done:
        return None
    return collect_result(st)


def _write_fit(c, r: ProfilesResult, out: Path, header: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_profiles(c, r, out / "profiles.tsv", header)
    fileio.write_explanations(c, r, out / "explanations.tsv", header)
    with open(out / "em_trace.tsv", "w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        for n, p in enumerate(r.em_trace, start=1):
            fh.write(f"{n}\t{float(p.alpha)!r}\t{float(p.beta)!r}\n")


def pool_results(results: list, top_k: int, threshold: Optional[float]) -> ProfilesResult:
    """Average profiles across chains; modal edge assignments across chains."""
    first = results[0]
    theta = [np.mean([r.theta[i] for r in results], axis=0) for i in range(len(first.theta))]
    thetas = list(zip(first.supports, theta))
    stack = lambda name: _modal(np.stack([getattr(r, name) for r in results]))  # noqa: E731
    return ProfilesResult(
        supports=first.supports, theta=theta, home=homes_from_thetas(thetas),
        top_k=[rank_locations(s, p, top_k, threshold) for s, p in thetas],
        follow_x=stack("follow_x"), follow_y=stack("follow_y"), follow_mu=stack("follow_mu"),
        tweet_z=stack("tweet_z"), tweet_nu=stack("tweet_nu"), power_law=first.power_law,
        em_trace=[], seed=first.seed,
    )


def cmd_fit(cfg: dict) -> int:
    for key in ("users", "follows", "tweets"):
        if cfg[key] is not None and not Path(cfg[key]).is_file():
            raise fileio.DataError(f"{key} file {cfg[key]} does not exist")
    g = _gazetteer(cfg)
    pc = PriorConfig(cfg["tau"], cfg["base_gamma"], cfg["boost"])
    c = fileio.read_corpus(g, cfg["users"], cfg["follows"], cfg["tweets"], pc)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_config_echo(cfg, "fit", out)
    fileio.write_idmap(c, out / "idmap.tsv", f"seed={cfg['seed']}")
    n = cfg["chains"]
    if n < 1:
        raise ConfigError("chains must be at least 1")
    if n > 1 and cfg["resume"]:
        raise ConfigError("--resume continues a single chain; run it without --chains")
    log.info("corpus: N=%d S=%d K=%d labeled=%d", c.N, c.S, c.K, len(c.labeled))

    seeds = [cfg["seed"] + k for k in range(n)]
    dirs = [out] if n == 1 else [out / f"chain_{k}" for k in range(n)]
    for d in dirs:
        d.mkdir(parents=True, exist_ok=True)
    jobs = []
    for seed, d in zip(seeds, dirs):
        params, gc = _model_setup(cfg, seed)
        jobs.append((c, params, gc, d / "model.ckpt", cfg["resume"], cfg["stop_after"]))
    if n == 1:
        results = [_run_chain(*jobs[0])]
    else:
        with ProcessPoolExecutor(max_workers=n) as ex:
            results = list(ex.map(_run_chain, *zip(*jobs)))

    if any(r is None for r in results):
        print(f"stopped after {cfg['stop_after']} sweeps; checkpoint in {dirs[0] / 'model.ckpt'}")
        return EXIT_OK
    for seed, d, r in zip(seeds, dirs, results):
        _write_fit(c, r, d, f"seed={seed}")
        for k, p in enumerate(r.em_trace, start=1):
            print(f"seed {seed} EM round {k}: alpha={p.alpha:.4f} beta={p.beta:.6g}")
    if n > 1:
        pooled = pool_results(results, cfg["top_k"], cfg["mass_threshold"])
        fileio.write_profiles(c, pooled, out / "profiles.tsv", f"seeds={seeds[0]}..{seeds[-1]} pooled")
        fileio.write_explanations(c, pooled, out / "explanations.tsv", f"seeds={seeds[0]}..{seeds[-1]} pooled")
    return EXIT_OK


# -- eval ----------------------------------------------------------------------------


def _check_ids(truth: fileio.Truth, pred: fileio.Predictions) -> None:
    t, p = set(truth.users), set(pred.users)
    if t == p:
        return
    only_t, only_p = sorted(t - p), sorted(p - t)
    msg = []
    if only_t:
        msg.append(f"{len(only_t)} user(s) missing from predictions: {', '.join(only_t[:10])}")
    if only_p:
        msg.append(f"{len(only_p)} user(s) not in truth: {', '.join(only_p[:10])}")
    raise EvalError("; ".join(msg))


def evaluate(g, truth: fileio.Truth, pred: fileio.Predictions, m: float, k: int, breakpoints) -> tuple:
    """Metrics for one prediction set; returns (items, aad curve)."""
    _check_ids(truth, pred)
    users = [u for u in truth.users if not truth.labeled[u]] or list(truth.users)
    he = HomeEval([pred.home[u] for u in users], [truth.home[u] for u in users])
    ml = MultiLocEval([pred.top_k[u] for u in users],
                      [[l for l, w in truth.profile[u].items() if w > 0] or [truth.home[u]] for u in users])
    mlscore = dp_dr_at_k(ml, k, m, g)
    curve = aad_curve(he, breakpoints, g)
    items = [("eval_users", len(users)), (f"acc@{m:g}", acc_at_m(he, m, g))]
    items += [(f"aad@{b:g}", a) for b, a in curve]
    items += [(f"dp@{k}", mlscore.dp), (f"dr@{k}", mlscore.dr), ("empty_predictions", len(mlscore.empty_predictions))]

    by_edge = {e[0]: e for e in pred.follows}
    loc_edges = [e for e in truth.follows if e[3] == 0]
    if loc_edges and by_edge:
        bad = [e[0] for e in loc_edges if e[0] not in by_edge or by_edge[e[0]][1:3] != e[1:3]]
        if bad:
            raise EvalError(f"{len(bad)} follow edge(s) differ between truth and explanations: "
                            + ", ".join(map(str, bad[:10])))
        ee = ExplainEval([by_edge[e[0]][4] for e in loc_edges], [by_edge[e[0]][5] for e in loc_edges],
                         [e[4] for e in loc_edges], [e[5] for e in loc_edges])
        base = ExplainEval([pred.home[e[1]] for e in loc_edges], [pred.home[e[2]] for e in loc_edges],
                           ee.true_x, ee.true_y)
        items += [("explained_edges", len(loc_edges)), (f"explain@{m:g}", explain_accuracy(ee, m, g)),
                  (f"explain_home_baseline@{m:g}", explain_accuracy(base, m, g))]
    return items, curve


def cmd_eval(cfg: dict) -> int:
    from .plotting import plot_aad, plot_power_law

    g = _gazetteer(cfg)
    truth = fileio.read_truth(g, cfg["truth"])
    pdir = Path(cfg["predictions"])
    m, k, bps = cfg["acc_miles"], cfg["top_k"], cfg["breakpoints"]
    runs = [("pooled" if (pdir / "chain_0").is_dir() else "model", pdir)]
    runs += [(d.name, d) for d in sorted(pdir.glob("chain_*")) if d.is_dir()]
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    write_config_echo(cfg, "eval", out)

    report, curves = [("seed", cfg["seed"]), ("acc_miles", m), ("top_k", k)], {}
    for name, d in runs:
        pred = fileio.read_predictions(g, d / "profiles.tsv", d / "explanations.tsv")
        items, curve = evaluate(g, truth, pred, m, k, bps)
        prefix = "" if name in ("model", "pooled") else f"{name}."
        report += [(prefix + key, val) for key, val in items]
        curves[name] = curve
    fileio.write_key_values(report, out / "metrics.txt")
    with open(out / "aad.tsv", "w", encoding="utf-8") as fh:
        fh.write("run\tmiles\tacc\n")
        for name, curve in curves.items():
            for b, a in curve:
                fh.write(f"{name}\t{b:g}\t{a!r}\n")
    plot_aad(curves, out / "aad.png")
    fits, labels = [PowerLawParams()], ["initial"]
    for _, d in runs:
        trace = d / "em_trace.tsv"
        if trace.is_file():
            for lineno, parts in fileio._rows(trace, (3,)):
                fits.append(PowerLawParams(float(parts[1]), float(parts[2])))
                labels.append(f"{d.name} round {parts[0]}")
    if len(fits) > 1:
        plot_power_law(fits, out / "power_law.png", labels=labels)
    for key, val in report:
        print(f"{key}={val:.4f}" if isinstance(val, float) else f"{key}={val}")
    return EXIT_OK


# -- explain -------------------------------------------------------------------------


def cmd_explain(cfg: dict) -> int:
    g = _gazetteer(cfg)
    d = Path(cfg["predictions"])
    pred = fileio.read_predictions(g, d / "profiles.tsv", d / "explanations.tsv")
    u = cfg["user"]
    if u not in pred.home:
        raise fileio.DataError(f"unknown user id {u!r}")
    print(f"user {u}  home: {g.label(pred.home[u])}")
    print(f"profile (top {cfg['top_k']}):")
    for loc in pred.top_k[u][:cfg["top_k"]]:
        print(f"  {g.label(loc):<32} {pred.theta[u].get(loc, 0.0):.3f}")
    print("follow relationships:")
    for s, a, b, noise, x, y in pred.follows:
        if u not in (a, b):
            continue
        what = "noise" if noise else f"{g.label(x)} ~ {g.label(y)}"
        print(f"  {a} -> {b}  {what}")
    return EXIT_OK


COMMANDS = {"synth": cmd_synth, "fit": cmd_fit, "eval": cmd_eval, "explain": cmd_explain}


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items() if k in KEYS}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve(args.command, file_values, flags)
        return COMMANDS[args.command](cfg)
    except (ConfigError, SynthError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (fileio.DataError, GazetteerError, CorpusError, CheckpointError, EvalError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        # dataclass validation of numeric settings
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
