"""Personalized federated dictionary learning."""

import json

from ._pfeddl import *  # noqa: F401,F403
from ._pfeddl import run_experiment_json as _run_experiment_json
from ._pfeddl import run_pfeddl as _run_pfeddl


def run_pfeddl(sites, hyper, threads=1):
    """Pretrain, align and federate; rounds come back as dicts."""
    out = _run_pfeddl(sites, hyper, threads)
    out["rounds"] = [json.loads(r) for r in out["rounds"]]
    return out


def run_experiment(sites, hyper, folds=4, threads=1, planted_global=None):
    """Cross-validated run; returns the report as a dict."""
    return json.loads(_run_experiment_json(sites, hyper, folds, threads, planted_global))
