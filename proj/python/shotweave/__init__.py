"""Python access to the shotweave core: planning, transitions, routing,
evaluation arithmetic and the mock-backed pipeline."""

import json as _json

from . import _shotweave as _core
from ._shotweave import (
    ConflictError,
    Error,
    NotFoundError,
    PreconditionError,
    ValidationError,
    hermite_position,
    round_half_up,
    win_rate,
)

__all__ = [
    "ConflictError",
    "Error",
    "NotFoundError",
    "Pipeline",
    "PreconditionError",
    "ValidationError",
    "build_routing",
    "default_taxonomy",
    "generate_plan",
    "hermite_position",
    "plan_transition",
    "round_half_up",
    "summarize_llm_audit",
    "synth_tracks",
    "win_rate",
]


def _dump(doc):
    if doc is None:
        return ""
    return doc if isinstance(doc, str) else _json.dumps(doc)


def default_taxonomy():
    return _json.loads(_core.default_taxonomy())


def generate_plan(n, seed=0, taxonomy=None):
    """Balanced control signals: {"entries": [...], "report": {...}}."""
    return _json.loads(_core.generate_plan(n, seed, _dump(taxonomy)))


def plan_transition(tracks, **params):
    """Cuts, control field and cut list for a merged track document."""
    return _json.loads(_core.plan_transition(_dump(tracks), _dump(params or None)))


def synth_tracks(profile=None, n_points=16, seed=0):
    return _json.loads(_core.synth_tracks(_dump(profile or {}), n_points, seed))


def build_routing(scores=None, tie_break=("scene_preservation",)):
    return _json.loads(_core.build_routing(_dump(scores), list(tie_break)))


def summarize_llm_audit(audits):
    return _json.loads(_core.summarize_llm_audit(_dump(audits)))


class Pipeline:
    """Pipeline over a run store. Mock endpoints unless built from a config."""

    def __init__(self, store, seed=0, gates=(), _core_pipeline=None):
        self._p = _core_pipeline or _core.Pipeline(str(store), seed, list(gates))

    @classmethod
    def from_config(cls, path):
        return cls(None, _core_pipeline=_core.Pipeline.from_config(str(path)))

    def run(self, signals, stop_after=None):
        return _json.loads(self._p.run(_dump(signals), stop_after or ""))

    def batch(self, samples, parallelism=0):
        return _json.loads(self._p.batch(_json.dumps(list(samples)), parallelism))

    def resume(self, run_id):
        return _json.loads(self._p.resume(run_id))

    def advance(self, run_id):
        return _json.loads(self._p.advance(run_id))

    def status(self, run_id):
        return _json.loads(self._p.status(run_id))

    def runs(self):
        return list(self._p.runs())

    def approve(self, run_id, stage):
        return _json.loads(self._p.approve(run_id, stage))

    def reject(self, run_id, stage, edit=None):
        return _json.loads(self._p.reject(run_id, stage, _dump(edit)))

    def regenerate(self, run_id, stage):
        return _json.loads(self._p.regenerate(run_id, stage))

    def manifest(self):
        return _json.loads(self._p.manifest())

    def read_artifact(self, digest):
        return self._p.read_artifact(digest)
