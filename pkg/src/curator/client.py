"""Depot service contract: domain records, the abstract client, and the
HTTP backend speaking the reference wire protocol.

Two interchangeable implementations exist: :class:`HttpDepotClient` below
and the in-process :class:`curator.depot.Depot`. Workflow code only ever
sees the :class:`DepotClient` interface.
"""

from __future__ import annotations

import logging
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import quote, urlparse

import requests

from .errors import IoError, TransportError, wire_error

logger = logging.getLogger(__name__)

ARTICLE_KINDS = ("code", "fileset")

DEFAULT_TIMEOUT = 30.0
# Transport failures are retried this many times before surfacing.
RETRY_BACKOFF = (0.5, 1.0, 2.0)


@dataclass
class ArticleMeta:
    """Descriptive metadata for a depot article (code archive or fileset)."""

    title: str
    description: str = ""
    kind: str = "fileset"
    category: str = ""
    tags: list[str] = field(default_factory=list)


@dataclass
class FileEntry:
    """One stored file within an article version."""

    file_id: int
    name: str
    size: int
    md5: str


@dataclass
class ArticleRecord:
    """Current state of a depot article as seen by clients."""

    article_id: int
    meta: ArticleMeta
    status: str = "draft"  # "draft" | "published"
    version: int = 0
    doi: str | None = None
    files: list[FileEntry] = field(default_factory=list)
    authors: list[int] = field(default_factory=list)


@dataclass
class ClientConfig:
    """Connection settings for the HTTP backend.

    The wire protocol authenticates with a single bearer-style header
    carrying ``token``; the remaining credential fields mirror the usual
    OAuth-style four-part scheme and must still be populated.
    """

    base_url: str
    client_key: str
    client_secret: str
    token: str
    token_secret: str


def file_entry_to_wire(entry: FileEntry) -> dict:
    return {
        "file_id": entry.file_id,
        "name": entry.name,
        "size": entry.size,
        "md5": entry.md5,
    }


def file_entry_from_wire(payload: dict) -> FileEntry:
    return FileEntry(
        file_id=payload["file_id"],
        name=payload["name"],
        size=payload["size"],
        md5=payload["md5"],
    )


def record_to_wire(record: ArticleRecord) -> dict:
    """Flatten a record into the wire-protocol article representation."""
    return {
        "article_id": record.article_id,
        "title": record.meta.title,
        "description": record.meta.description,
        "kind": record.meta.kind,
        "category": record.meta.category,
        "tags": list(record.meta.tags),
        "status": record.status,
        "version": record.version,
        "doi": record.doi,
        "files": [file_entry_to_wire(f) for f in record.files],
        "authors": list(record.authors),
    }


def record_from_wire(payload: dict) -> ArticleRecord:
    meta = ArticleMeta(
        title=payload["title"],
        description=payload.get("description", ""),
        kind=payload["kind"],
        category=payload.get("category", ""),
        tags=list(payload.get("tags", [])),
    )
    return ArticleRecord(
        article_id=payload["article_id"],
        meta=meta,
        status=payload["status"],
        version=payload["version"],
        doi=payload.get("doi"),
        files=[file_entry_from_wire(f) for f in payload.get("files", [])],
        authors=list(payload.get("authors", [])),
    )


def read_local_file(local_path) -> bytes:
    """Read a file for upload, mapping OS failures to IoError."""
    try:
        return Path(local_path).read_bytes()
    except OSError as exc:
        raise IoError(f"cannot read {local_path}: {exc.strerror or exc}") from exc


class DepotClient(ABC):
    """Operations every depot backend must support."""

    @abstractmethod
    def create_article(self, meta: ArticleMeta) -> ArticleRecord:
        """Create a draft article and return its initial record."""

    @abstractmethod
    def upload_file(self, article_id: int, local_path) -> FileEntry:
        """Upload a local file, replacing any entry with the same name."""

    @abstractmethod
    def search_by_tag(self, tag: str) -> list[ArticleRecord]:
        """Return every article (draft or published) carrying the tag."""

    @abstractmethod
    def add_tag(self, article_id: int, tag: str) -> ArticleRecord:
        """Add a tag; adding an existing tag is a no-op."""

    @abstractmethod
    def add_authors(self, article_id: int, author_ids) -> ArticleRecord:
        """Append author ids in order, skipping ones already present."""

    @abstractmethod
    def publish_article(self, article_id: int) -> tuple[str, int]:
        """Publish pending changes; returns (doi, version). The DOI is
        minted on the first publish and identical ever after."""

    @abstractmethod
    def get_article(self, article_id: int) -> ArticleRecord:
        """Fetch the current record."""


class HttpDepotClient(DepotClient):
    """Depot client over HTTP.

    Connection errors and timeouts are retried with the RETRY_BACKOFF
    schedule before raising TransportError; every other failure maps to
    the error kind named in the response body. All calls carry a bounded
    timeout, so no operation blocks indefinitely.
    """

    def __init__(self, config: ClientConfig, timeout: float = DEFAULT_TIMEOUT):
        if urlparse(config.base_url).scheme not in ("http", "https"):
            raise ValueError("base_url must use an http or https scheme")
        missing = [
            name
            for name in ("client_key", "client_secret", "token", "token_secret")
            if not getattr(config, name)
        ]
        if missing:
            raise ValueError(f"credential fields must be nonempty: {', '.join(missing)}")
        self._base = config.base_url.rstrip("/")
        self._timeout = timeout
        self._session = requests.Session()
        self._session.headers["Authorization"] = f"token {config.token}"

    def _request(self, method: str, path: str, *, json_body=None, data=None, headers=None):
        url = f"{self._base}{path}"
        for delay in (*RETRY_BACKOFF, None):
            try:
                response = self._session.request(
                    method,
                    url,
                    json=json_body,
                    data=data,
                    headers=headers,
                    timeout=self._timeout,
                )
            except (requests.ConnectionError, requests.Timeout) as exc:
                if delay is None:
                    raise TransportError(
                        f"{method} {url} failed after retries: {exc.__class__.__name__}"
                    ) from exc
                logger.warning(
                    "transport failure on %s %s; retrying in %.1fs", method, url, delay
                )
                time.sleep(delay)
                continue
            except requests.RequestException as exc:
                raise TransportError(f"{method} {url}: {exc}") from exc
            return self._handle_response(method, path, response)
        raise AssertionError("unreachable")

    @staticmethod
    def _handle_response(method: str, path: str, response: requests.Response):
        if 200 <= response.status_code < 300:
            return response.json() if response.content else None
        kind = None
        try:
            kind = response.json().get("error")
        except ValueError:
            pass
        exc_class = wire_error(kind, response.status_code)
        raise exc_class(f"{method} {path} returned {response.status_code}")

    def create_article(self, meta: ArticleMeta) -> ArticleRecord:
        payload = {
            "title": meta.title,
            "description": meta.description,
            "kind": meta.kind,
            "category": meta.category,
            "tags": list(meta.tags),
        }
        created = self._request("POST", "/v1/articles", json_body=payload)
        return self.get_article(created["article_id"])

    def upload_file(self, article_id: int, local_path) -> FileEntry:
        path = Path(local_path)
        body = read_local_file(path)
        payload = self._request(
            "POST",
            f"/v1/articles/{article_id}/files",
            data=body,
            headers={
                "X-File-Name": path.name,
                "Content-Type": "application/octet-stream",
            },
        )
        return file_entry_from_wire(payload)

    def search_by_tag(self, tag: str) -> list[ArticleRecord]:
        payload = self._request("GET", f"/v1/articles/search?tag={quote(tag, safe='')}")
        return [record_from_wire(item) for item in payload["items"]]

    def add_tag(self, article_id: int, tag: str) -> ArticleRecord:
        payload = self._request(
            "POST", f"/v1/articles/{article_id}/tags", json_body={"tag": tag}
        )
        return record_from_wire(payload)

    def add_authors(self, article_id: int, author_ids) -> ArticleRecord:
        payload = self._request(
            "POST",
            f"/v1/articles/{article_id}/authors",
            json_body={"author_ids": list(author_ids)},
        )
        return record_from_wire(payload)

    def publish_article(self, article_id: int) -> tuple[str, int]:
        payload = self._request("POST", f"/v1/articles/{article_id}/publish", json_body={})
        return payload["doi"], payload["version"]

    def get_article(self, article_id: int) -> ArticleRecord:
        return record_from_wire(self._request("GET", f"/v1/articles/{article_id}"))
