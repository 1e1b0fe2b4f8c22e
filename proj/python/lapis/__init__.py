"""Python bindings for the LAPIS crime-investigation retrieval and assessment core."""

import json

from . import _lapis
from ._lapis import (
    Conflict,
    InvalidInput,
    LapisError,
    NotFound,
    ParseError,
    StateError,
    StorageError,
    TransportError,
    metrics,
    render_answer,
)

__all__ = [
    "Conflict",
    "InvalidInput",
    "LapisError",
    "NotFound",
    "ParseError",
    "Retriever",
    "Sessions",
    "StateError",
    "StorageError",
    "TransportError",
    "build_index",
    "build_prompt",
    "cli",
    "ingest",
    "metrics",
    "parse_response",
    "render_answer",
]


def ingest(corpus, out_dir, max_tokens=256):
    """Chunk a JSONL corpus into out_dir and return its statistics."""
    return json.loads(_lapis.ingest(str(corpus), str(out_dir), max_tokens))


def build_index(index_dir, provider="hash", dim=256):
    return json.loads(_lapis.build_index(str(index_dir), provider, dim))


def build_prompt(strategy, context, hypothesis, premises=None, exemplars=None, seed=0):
    """Render a prompt. premises is a list of premise dicts as returned by Retriever.retrieve."""
    encoded = None if premises is None else json.dumps(premises)
    return _lapis.build_prompt(
        strategy, context, hypothesis, encoded, None if exemplars is None else str(exemplars), seed
    )


def parse_response(raw):
    return json.loads(_lapis.parse_response(raw))


def cli(*args):
    """Run the lapis command line in-process; returns (exit_code, stdout, stderr)."""
    return _lapis.cli([str(a) for a in args])


class Retriever:
    def __init__(self, index_dir):
        self._inner = _lapis.Retriever(str(index_dir))

    def retrieve(self, context, hypothesis, k=5):
        return json.loads(self._inner.retrieve(context, hypothesis, k))

    @property
    def size(self):
        return self._inner.size

    @property
    def search_count(self):
        return self._inner.search_count

    @property
    def provider_id(self):
        return self._inner.provider_id


class Sessions:
    """Investigation sessions backed by a JSONL event log and a scripted mock service."""

    def __init__(self, store, retriever, mock_script, k=5, exemplars=None):
        self._inner = _lapis.Sessions(
            str(store), retriever._inner, str(mock_script), k,
            None if exemplars is None else str(exemplars),
        )

    def create(self, title=""):
        return json.loads(self._inner.create(title))

    def add_context(self, session_id, delta):
        return json.loads(self._inner.add_context(session_id, delta))

    def submit(self, session_id, step_id, hypothesis, strategy=None):
        return json.loads(self._inner.submit(session_id, step_id, hypothesis, strategy))

    def close(self, session_id):
        return json.loads(self._inner.close(session_id))

    def get(self, session_id):
        return json.loads(self._inner.get(session_id))

    def list(self):
        return json.loads(self._inner.list())
