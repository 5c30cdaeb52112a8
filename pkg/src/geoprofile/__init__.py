"""Multi-location profiling of social-network users from follow edges and
tweeted venue names, with collapsed Gibbs sampling and Gibbs-EM refitting of
a distance power law."""

from .corpus import Corpus, PriorConfig, User, build_corpus
from .evalkit import (
    ExplainEval,
    HomeEval,
    MultiLocEval,
    aad_curve,
    acc_at_m,
    baseline_home_explainer,
    dp_dr_at_k,
    explain_accuracy,
)
from .gazetteer import Gazetteer, GeoPoint, bundled_gazetteer_path, distance, load_gazetteer
from .genmodel import NoiseParams, PowerLawParams, TweetModelPrior, fit_power_law
from .sampler import GibbsConfig, ModelParams, ProfilesResult, run
from .synth import SynthConfig, generate_world

__version__ = "0.1.0"

__all__ = [
    "Corpus", "PriorConfig", "User", "build_corpus",
    "ExplainEval", "HomeEval", "MultiLocEval", "aad_curve", "acc_at_m",
    "baseline_home_explainer", "dp_dr_at_k", "explain_accuracy",
    "Gazetteer", "GeoPoint", "bundled_gazetteer_path", "distance", "load_gazetteer",
    "NoiseParams", "PowerLawParams", "TweetModelPrior", "fit_power_law",
    "GibbsConfig", "ModelParams", "ProfilesResult", "run",
    "SynthConfig", "generate_world",
]
