"""Python bindings for the hvaudit core library."""

import json as _json

from . import _core
from ._core import Error, Model, class_weights, krippendorff_alpha, percent_agreement, run_pipeline, tokenize

__version__ = _core.version


def taxonomy():
    return _json.loads(_core.taxonomy_json())


def taxonomy_fingerprint():
    return _core.taxonomy_fingerprint()


def metrics(golds, preds, num_classes):
    return _json.loads(_core.metrics_json(list(golds), list(preds), num_classes))


def ingest(source, *paths):
    """Returns {"items": [...], "skips": [...]} for hh-rlhf (train, test), webgpt or alpaca."""
    return _json.loads(_core.ingest_json(source, [str(p) for p in paths]))


__all__ = [
    "Error",
    "Model",
    "class_weights",
    "ingest",
    "krippendorff_alpha",
    "metrics",
    "percent_agreement",
    "run_pipeline",
    "taxonomy",
    "taxonomy_fingerprint",
    "tokenize",
]
