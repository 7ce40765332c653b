"""HTTP clients for the two tracker families, with an on-disk replay cache."""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from urllib.parse import urlencode

import requests

from .types import RawComment, RawIssue

PAGE_SIZE = 50


class TrackerError(Exception):
    """Base class for tracker-client failures."""


class NetworkError(TrackerError):
    """Transport failure after exhausting retries (retryable by the caller)."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempt(s))")
        self.attempts = attempts


class UnknownProjectError(TrackerError):
    """The tracker reports that the requested project does not exist."""


class MalformedResponseError(TrackerError):
    """A response body failed to parse; the raw payload is kept on disk."""

    def __init__(self, message: str, payload_path: Path):
        super().__init__(f"{message} (payload saved at {payload_path})")
        self.payload_path = payload_path


class HttpCache:
    """Disk cache keyed by method+URL+query so fetches replay offline.

    Each entry is a JSON file holding the request line, status code, and raw
    body text.  A cached entry is replayed verbatim, making re-runs
    byte-identical with no network access.
    """

    def __init__(self, cache_dir):
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, method: str, url: str, params: dict | None) -> Path:
        query = urlencode(sorted((params or {}).items()))
        digest = hashlib.sha256(f"{method} {url}?{query}".encode()).hexdigest()
        return self.dir / f"{digest}.json"

    def get(self, method: str, url: str, params: dict | None):
        path = self._path(method, url, params)
        if not path.exists():
            return None
        entry = json.loads(path.read_text(encoding="utf-8"))
        return entry["status"], entry["body"], path

    def put(self, method: str, url: str, params: dict | None, status: int, body: str) -> Path:
        path = self._path(method, url, params)
        entry = {"method": method, "url": url,
                 "params": dict(sorted((params or {}).items())),
                 "status": status, "body": body}
        path.write_text(json.dumps(entry, ensure_ascii=False), encoding="utf-8")
        return path


def _fetch_body(session, method: str, url: str, params: dict | None, headers: dict | None,
                cache: HttpCache | None, offline: bool, max_attempts: int = 3,
                backoff: float = 0.2):
    """Return (status, body_text, payload_path), consulting the cache first."""
    if cache is not None:
        hit = cache.get(method, url, params)
        if hit is not None:
            return hit
    if offline or session is None:
        raise NetworkError(f"offline and {url} not in cache", attempts=0)
    last_exc = None
    for attempt in range(1, max_attempts + 1):
        try:
            response = session.request(method, url, params=params, headers=headers, timeout=30)
            break
        except requests.RequestException as exc:
            last_exc = exc
            if attempt < max_attempts:
                time.sleep(backoff * (2 ** (attempt - 1)))
    else:
        raise NetworkError(f"request to {url} failed: {last_exc}", attempts=max_attempts)
    status, body = response.status_code, response.text
    path = None
    if cache is not None:
        path = cache.put(method, url, params, status, body)
    return status, body, path


def _get_json(session, url: str, params: dict | None, headers: dict | None,
              cache: HttpCache | None, offline: bool, project: str):
    status, body, path = _fetch_body(session, "GET", url, params, headers, cache, offline)
    if status == 404:
        raise UnknownProjectError(f"project {project!r} not found at {url}")
    if status >= 400:
        raise TrackerError(f"HTTP {status} from {url}")
    try:
        return json.loads(body)
    except json.JSONDecodeError as exc:
        if path is None and cache is None:
            path = Path("<uncached>")
        elif path is None:
            path = cache.put("GET", url, params, status, body)
        raise MalformedResponseError(f"unparseable response from {url}: {exc}", path) from exc


class JiraClient:
    """Client for Jira-family trackers via their JSON search/issue endpoints."""

    tracker = "jira"

    def __init__(self, base_url: str, session=None, auth: str | None = None,
                 cache: HttpCache | None = None, offline: bool = False):
        self.base_url = base_url.rstrip("/")
        self.session = session
        self.auth = auth
        self.cache = cache
        self.offline = offline

    def _headers(self):
        return {"Authorization": f"Bearer {self.auth}"} if self.auth else None

    def _json(self, url, params, project):
        return _get_json(self.session, url, params, self._headers(),
                         self.cache, self.offline, project)

    def list_issue_keys(self, project: str, max_issues: int) -> list[str]:
        keys: list[str] = []
        start = 0
        while len(keys) < max_issues:
            payload = self._json(
                f"{self.base_url}/rest/api/2/search",
                {"jql": f"project = {project} ORDER BY key ASC",
                 "startAt": start, "maxResults": PAGE_SIZE, "fields": "key"},
                project)
            try:
                issues = payload["issues"]
                page = [issue["key"] for issue in issues]
                total = int(payload["total"])
            except (KeyError, TypeError) as exc:
                raise TrackerError(f"unexpected search payload shape: {exc}") from exc
            keys.extend(page)
            start += len(page)
            if not page or start >= total:
                break
        return keys[:max_issues]

    def fetch_issue(self, project: str, key: str) -> RawIssue:
        payload = self._json(
            f"{self.base_url}/rest/api/2/issue/{key}",
            {"fields": "summary,description,comment"},
            project)
        try:
            fields = payload["fields"]
            summary = fields.get("summary") or ""
            description = fields.get("description")
            raw_comments = (fields.get("comment") or {}).get("comments", [])
            comments = tuple(
                RawComment(
                    author=(c.get("author") or {}).get("name", ""),
                    text=c.get("body") or "",
                    created=c.get("created", ""),
                    comment_id=str(c.get("id", "")),
                )
                for c in raw_comments
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise TrackerError(f"unexpected issue payload shape for {key}: {exc}") from exc
        return RawIssue(project=project, tracker=self.tracker, issue_id=key,
                        summary=summary, description=description, comments=comments)

    def fetch_project(self, project: str, max_issues: int, jobs: int = 1) -> list[RawIssue]:
        keys = self.list_issue_keys(project, max_issues)
        return _fetch_details(self.fetch_issue, project, keys, jobs)


class MonorailClient:
    """Client for Monorail-family trackers via their issues-list JSON API.

    The tracker stores an issue's description as its comment 0; the client
    maps that entry to the description and the remainder to comments.
    """

    tracker = "monorail"

    def __init__(self, base_url: str, session=None, auth: str | None = None,
                 cache: HttpCache | None = None, offline: bool = False):
        self.base_url = base_url.rstrip("/")
        self.session = session
        self.auth = auth
        self.cache = cache
        self.offline = offline

    def _headers(self):
        return {"Authorization": f"Bearer {self.auth}"} if self.auth else None

    def _json(self, url, params, project):
        return _get_json(self.session, url, params, self._headers(),
                         self.cache, self.offline, project)

    def list_issue_ids(self, project: str, max_issues: int) -> list[str]:
        ids: list[str] = []
        start = 0
        while len(ids) < max_issues:
            payload = self._json(
                f"{self.base_url}/projects/{project}/issues",
                {"startIndex": start, "maxResults": PAGE_SIZE},
                project)
            try:
                items = payload.get("items", [])
                page = [str(item["id"]) for item in items]
                total = int(payload.get("totalResults", len(page)))
            except (KeyError, TypeError) as exc:
                raise TrackerError(f"unexpected issues payload shape: {exc}") from exc
            ids.extend(page)
            start += len(page)
            if not page or start >= total:
                break
        return ids[:max_issues]

    def fetch_issue(self, project: str, issue_id: str) -> RawIssue:
        listing = self._json(
            f"{self.base_url}/projects/{project}/issues/{issue_id}",
            None, project)
        comments = self._json(
            f"{self.base_url}/projects/{project}/issues/{issue_id}/comments",
            None, project)
        try:
            summary = listing.get("summary") or ""
            items = comments.get("items", [])
            description = items[0].get("content") if items else None
            raw_comments = tuple(
                RawComment(
                    author=(c.get("author") or {}).get("name", ""),
                    text=c.get("content") or "",
                    created=c.get("published", ""),
                    comment_id=str(i),
                )
                for i, c in enumerate(items[1:], start=1)
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise TrackerError(f"unexpected payload shape for issue {issue_id}: {exc}") from exc
        return RawIssue(project=project, tracker=self.tracker, issue_id=issue_id,
                        summary=summary, description=description, comments=raw_comments)

    def fetch_project(self, project: str, max_issues: int, jobs: int = 1) -> list[RawIssue]:
        ids = self.list_issue_ids(project, max_issues)
        return _fetch_details(self.fetch_issue, project, ids, jobs)


def _fetch_details(fetch_one, project: str, ids: list[str], jobs: int) -> list[RawIssue]:
    if jobs <= 1 or len(ids) <= 1:
        return [fetch_one(project, i) for i in ids]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda i: fetch_one(project, i), ids))


def make_client(tracker: str, base_url: str, **kwargs):
    if tracker == "jira":
        return JiraClient(base_url, **kwargs)
    if tracker == "monorail":
        return MonorailClient(base_url, **kwargs)
    raise ValueError(f"unknown tracker {tracker!r}; expected 'jira' or 'monorail'")


def fetch_issues(tracker_base_url: str, tracker: str, project: str, max_issues: int,
                 auth: str | None = None, cache_dir=None, session=None,
                 offline: bool = False, jobs: int = 1) -> list[RawIssue]:
    """Fetch up to ``max_issues`` issues with summary, description, comments.

    Responses are cached under ``cache_dir`` so re-runs replay offline and
    byte-identically.  ``session`` defaults to a fresh requests session; pass
    ``offline=True`` to forbid network access entirely.
    """
    if max_issues < 1:
        raise ValueError("max_issues must be positive")
    cache = HttpCache(cache_dir) if cache_dir is not None else None
    if session is None and not offline:
        session = requests.Session()
    client = make_client(tracker, tracker_base_url, session=session, auth=auth,
                         cache=cache, offline=offline)
    return client.fetch_project(project, max_issues, jobs=jobs)
