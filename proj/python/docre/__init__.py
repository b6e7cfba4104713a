"""Document-level relation extraction with an edge-typed GCNN (C++ core)."""

import json

from . import _docre
from ._docre import DocreError

__all__ = ["DocreError", "Model", "config_text", "gen_synth", "graph_report", "load", "run_cli", "train"]


def _overrides(config):
    out = {}
    for key, value in (config or {}).items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        out[key] = str(value)
    return out


def _records(docs):
    return [json.dumps(d) for d in docs]


def config_text(**config):
    return _docre.config_text(_overrides(config))


def gen_synth(entities=300, triples=None, docs=100, pct_inter=0.5, pct_coref_only=0.0, seed=1, kb_seed=None):
    """Returns (documents, truth, kb) as plain Python data."""
    if triples is None:
        triples = min(entities, entities * (entities - 1))
    records, truth, kb = _docre.gen_synth(
        entities, triples, docs, pct_inter, pct_coref_only, seed, seed if kb_seed is None else kb_seed
    )
    return [json.loads(r) for r in records], json.loads(truth), json.loads(kb)


def graph_report(doc, **config):
    return json.loads(_docre.graph_report(json.dumps(doc), _overrides(config)))


class Model:
    def __init__(self, handle):
        self._m = handle

    @property
    def best_epoch(self):
        return self._m.best_epoch

    @property
    def best_dev_f1(self):
        return self._m.best_dev_f1

    @property
    def parameter_count(self):
        return self._m.parameter_count

    @property
    def log(self):
        return [json.loads(e) for e in self._m.log]

    def evaluate(self, docs):
        return json.loads(self._m.evaluate(_records(docs)))

    def save(self, directory):
        self._m.save(str(directory))


def train(train_docs, dev_docs, **config):
    return Model(_docre.train(_records(train_docs), _records(dev_docs), _overrides(config)))


def load(directory):
    return Model(_docre.load(str(directory)))


def run_cli(*args):
    """Runs the docre command line in-process; returns (exit code, stdout, stderr)."""
    return _docre.run_cli([str(a) for a in args])
