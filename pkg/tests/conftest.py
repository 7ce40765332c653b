"""Shared fixtures: a small deterministic issue-section corpus, tiny model
configurations that train in seconds, and an in-process fake tracker server.
"""

from __future__ import annotations

import http.server
import json
import threading
from urllib.parse import parse_qs, urlparse

import pytest

from satdkit.corpus.io import save_dataset
from satdkit.corpus.types import IssueSection, LabeledDataset, SATDLabel
from satdkit.evaluation.pipeline import PipelineConfig, train_pipeline

# --------------------------------------------------------------- toy corpus

_POSITIVE_TEXTS = [
    "this is a hack we should remove before the release",
    "ugly workaround for the parser bug in the scanner",
    "todo clean up this mess in the connection pool later",
    "temporary solution until the real refactor of the cache lands",
    "this code is slow and dirty please get rid of it",
    "fixme the retry logic is broken by design",
    "quick and dirty patch for the scheduler deadlock",
    "we must remove this kludge from the allocator",
    "the flaky test keeps failing so we disabled it as a stopgap",
    "technical debt in the planner keeps growing with every patch",
    "remove this ugly code after the storage migration",
    "horrible hack around the threading model needs a rewrite",
]

_NEGATIVE_TEXTS = [
    "update the documentation for the new rest api",
    "release notes for version two point three",
    "add a unit test for the pagination helper",
    "user cannot log in with single sign on",
    "improve the error message when the config file is missing",
    "upgrade the build image to the latest toolchain",
    "the dashboard chart renders twice on reload",
    "support reading settings from the environment",
    "typo in the getting started guide",
    "crash when the upload folder does not exist",
    "expose the queue depth as a metric",
    "translate the welcome banner into french",
    "allow sorting the result table by owner",
    "the installer should verify the checksum first",
]

_POSITIVE_LABELS = [
    SATDLabel(is_satd=True, satd_type="code", indicator="low-quality code"),
    SATDLabel(is_satd=True, satd_type="design", indicator="non-optimal decisions"),
    SATDLabel(is_satd=True),
    SATDLabel(is_satd=True, satd_type="test", indicator="flaky tests"),
    SATDLabel(is_satd=True, satd_type="code", indicator="slow algorithm"),
    SATDLabel(is_satd=True, satd_type="defect", indicator="uncorrected known defects"),
]

_KINDS = ("summary", "description", "comment")


def build_toy_dataset() -> LabeledDataset:
    """72 sections over 3 projects and both tracker families, ~43% positive.

    Fully deterministic by construction: project blocks of 24 sections each,
    positives on indices i % 5 < 2 plus a tail tweak so classes stay mixed
    per project and per tracker.
    """
    blocks = [("hadoop", "jira", "HAD"), ("camel", "jira", "CAM"),
              ("chromium", "monorail", "42")]
    sections: list[IssueSection] = []
    labels: list[SATDLabel] = []
    pos_i = 0
    neg_i = 0
    for project, tracker, prefix in blocks:
        for i in range(24):
            positive = i % 5 < 2
            if positive:
                text = _POSITIVE_TEXTS[pos_i % len(_POSITIVE_TEXTS)]
                label = _POSITIVE_LABELS[pos_i % len(_POSITIVE_LABELS)]
                pos_i += 1
            else:
                text = _NEGATIVE_TEXTS[neg_i % len(_NEGATIVE_TEXTS)]
                label = SATDLabel(is_satd=False)
                neg_i += 1
            text = f"{text} in {project} build {i}"
            sections.append(IssueSection(
                project=project, tracker=tracker, issue_id=f"{prefix}-{i}",
                kind=_KINDS[i % 3], position=0, author=f"dev{i % 4}",
                text=text, raw_text=text))
            labels.append(label)
    return LabeledDataset(sections=sections, labels=labels, provenance="toy corpus")


@pytest.fixture(scope="session")
def toy_dataset() -> LabeledDataset:
    return build_toy_dataset()


@pytest.fixture(scope="session")
def toy_dataset_path(toy_dataset, tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "dataset.jsonl"
    save_dataset(toy_dataset, path)
    return path


# ----------------------------------------------------------- tiny CNN setup

TINY_KWARGS = dict(
    classifier="cnn",
    region_sizes=(1, 2),
    feature_maps_per_size=4,
    embedding_dim=8,
    max_len=32,
    epochs=2,
    batch_size=16,
    early_stop=False,
    seed=11,
)

TINY_TOML = """\
[model]
classifier = "cnn"
region_sizes = [1, 2]
feature_maps = 4
epochs = 2
batch_size = 16
early_stop = false

[preprocess]
embedding_dim = 8
max_len = 32

[evaluation]
k = 3
seed = 11
"""


def tiny_config(**overrides) -> PipelineConfig:
    kwargs = dict(TINY_KWARGS)
    kwargs.update(overrides)
    return PipelineConfig(**kwargs)


@pytest.fixture(scope="session")
def tiny_toml_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("config") / "tiny.toml"
    path.write_text(TINY_TOML, encoding="utf-8")
    return path


@pytest.fixture(scope="session")
def trained_tiny(toy_dataset):
    """One tiny CNN trained on the toy corpus, shared by read-only tests."""
    model, vocab, artifacts = train_pipeline(toy_dataset, tiny_config(epochs=4))
    return model, vocab, artifacts


# ------------------------------------------------------- fake tracker server

JIRA_ISSUES = {
    "HAD-1": {
        "summary": "hack in the scheduler needs cleanup",
        "description": "this is a hack {code}int x = 1;{code} remove it soon",
        "comments": [
            {"author": {"name": "alice"}, "body": "agreed, ugly workaround",
             "created": "2020-01-02T10:00:00.000+0000", "id": 10002},
            {"author": {"name": "buildbot"}, "body": "Build #12 failed",
             "created": "2020-01-01T09:00:00.000+0000", "id": 10001},
        ],
    },
    "HAD-2": {
        "summary": "update install guide",
        "description": None,
        "comments": [],
    },
    "HAD-3": {
        "summary": "flaky test in the io layer",
        "description": "disable it as a temporary solution",
        "comments": [
            {"author": {"name": "buildbot"}, "body": "Build #13 failed",
             "created": "2020-01-03T09:00:00.000+0000", "id": 10003},
        ],
    },
}

MONORAIL_ISSUES = {
    "1": {
        "summary": "renderer crashes on resize",
        "comments": [
            {"content": "stack trace attached, looks like a use after free",
             "author": {"name": "dev"}, "published": "2020-02-01T00:00:00"},
            {"content": "todo get rid of this dirty cast",
             "author": {"name": "dev"}, "published": "2020-02-02T00:00:00"},
        ],
    },
    "2": {
        "summary": "add dark mode toggle",
        "comments": [
            {"content": "design doc linked", "author": {"name": "pm"},
             "published": "2020-02-03T00:00:00"},
        ],
    },
}


class _TrackerHandler(http.server.BaseHTTPRequestHandler):
    """Minimal read-only fake for both tracker API families."""

    def _send(self, status: int, body: str, content_type="application/json"):
        data = body.encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _send_json(self, payload, status: int = 200):
        self._send(status, json.dumps(payload))

    def do_GET(self):  # noqa: N802 - http.server API
        url = urlparse(self.path)
        query = {k: v[0] for k, v in parse_qs(url.query).items()}
        parts = [p for p in url.path.split("/") if p]
        self.server.request_count += 1

        if url.path == "/rest/api/2/search":
            project = query.get("jql", "").split("=")[1].split("ORDER")[0].strip()
            if project == "BIG":
                total, start = 120, int(query.get("startAt", 0))
                max_results = int(query.get("maxResults", 50))
                page = [{"key": f"BIG-{i}"} for i in
                        range(start, min(start + max_results, total))]
                return self._send_json({"issues": page, "total": total})
            if project not in ("HAD",):
                return self._send_json({"errorMessages": ["no project"]}, status=404)
            keys = sorted(JIRA_ISSUES)
            start = int(query.get("startAt", 0))
            return self._send_json(
                {"issues": [{"key": k} for k in keys[start:start + 50]],
                 "total": len(keys)})

        if parts[:4] == ["rest", "api", "2", "issue"]:
            key = parts[4]
            if key not in JIRA_ISSUES:
                return self._send_json({}, status=404)
            issue = JIRA_ISSUES[key]
            return self._send_json({"fields": {
                "summary": issue["summary"],
                "description": issue["description"],
                "comment": {"comments": issue["comments"]},
            }})

        if parts[:1] == ["projects"] and len(parts) >= 3 and parts[2] == "issues":
            project = parts[1]
            if project != "chrom":
                return self._send_json({}, status=404)
            if len(parts) == 3:
                ids = sorted(MONORAIL_ISSUES, key=int)
                return self._send_json(
                    {"items": [{"id": int(i)} for i in ids], "totalResults": len(ids)})
            issue_id = parts[3]
            if issue_id not in MONORAIL_ISSUES:
                return self._send_json({}, status=404)
            issue = MONORAIL_ISSUES[issue_id]
            if len(parts) == 5 and parts[4] == "comments":
                return self._send_json({"items": issue["comments"]})
            return self._send_json({"summary": issue["summary"]})

        if url.path.startswith("/broken"):
            return self._send(200, "this is not json {{{")

        return self._send_json({}, status=404)

    def log_message(self, *args):  # silence request logging
        pass


@pytest.fixture(scope="session")
def tracker_server():
    server = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _TrackerHandler)
    server.request_count = 0
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server, f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
