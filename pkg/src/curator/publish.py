"""Publication workflows.

Software publication is idempotent: the full commit hash doubles as a
search tag, so a version that is already on the depot is returned as-is
instead of being republished. Fileset publication keeps a local MD5
sidecar per data file and re-uploads only files whose checksum no longer
matches, which makes repeat runs cheap and crash-safe.
"""

from __future__ import annotations

import hashlib
import logging
import re
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

from .client import ArticleMeta, DepotClient
from .errors import InvalidMeta, IoError, KindMismatch, NothingToPublish
from .gitrepo import COMMIT_HASH_RE, export_archive

logger = logging.getLogger(__name__)

# One author id per line, e.g. "Jane Doe <fs:554577>"; the scheme is
# documented in the README and easy to swap out.
AUTHOR_TOKEN_RE = re.compile(r"<fs:(\d+)>")

_MD5_CHUNK = 1 << 20


@dataclass
class SoftwareIdentity:
    """Everything needed to publish one revision of a software project."""

    name: str
    commit: str
    local_repo: Path
    category: str = ""
    remote_url: str | None = None


@dataclass
class FilesetSpec:
    """Everything needed to publish a set of data files."""

    title: str
    description: str = ""
    tags: list[str] = field(default_factory=list)
    paths: list = field(default_factory=list)
    existing_article_id: int | None = None


@dataclass
class AuthorEntry:
    display_name: str
    service_author_id: int


class SoftwareResult(NamedTuple):
    article_id: int
    doi: str
    reused: bool


class DataResult(NamedTuple):
    article_id: int
    doi: str
    uploaded: list
    skipped: list


def file_md5(path) -> str:
    """MD5 of a file's current bytes, streamed."""
    digest = hashlib.md5()
    try:
        with open(path, "rb") as handle:
            while True:
                chunk = handle.read(_MD5_CHUNK)
                if not chunk:
                    break
                digest.update(chunk)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return digest.hexdigest()


def sidecar_path(path) -> Path:
    return Path(str(path) + ".md5")


def write_sidecar(path, digest: str) -> None:
    try:
        sidecar_path(path).write_text(digest + "\n", encoding="ascii")
    except OSError as exc:
        raise IoError(f"cannot write sidecar for {path}: {exc.strerror or exc}") from exc


def needs_upload(path) -> bool:
    """True when no sidecar exists or the file changed since it was written."""
    sidecar = sidecar_path(path)
    if not sidecar.exists():
        return True
    try:
        recorded = sidecar.read_text(encoding="ascii", errors="replace").strip()
    except OSError as exc:
        raise IoError(f"cannot read {sidecar}: {exc.strerror or exc}") from exc
    return recorded != file_md5(path)


def parse_authors_file(path) -> list[AuthorEntry]:
    """Extract (display name, author id) pairs from an AUTHORS file.

    A line counts when it carries a ``<fs:ID>`` token with a positive
    integer id; the display name is whatever precedes the token. Comment
    lines and token-less lines are skipped, and a duplicated id keeps its
    first occurrence. A missing file simply yields no authors.
    """
    path = Path(path)
    if not path.exists():
        return []
    try:
        text = path.read_text(encoding="utf-8", errors="replace")
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    entries: list[AuthorEntry] = []
    seen: set[int] = set()
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = AUTHOR_TOKEN_RE.search(line)
        if match is None:
            continue
        author_id = int(match.group(1))
        if author_id <= 0 or author_id in seen:
            continue
        seen.add(author_id)
        entries.append(
            AuthorEntry(
                display_name=line[: match.start()].strip(),
                service_author_id=author_id,
            )
        )
    return entries


class Publisher:
    """Drives the depot client through complete publication workflows.

    One instance runs one publication at a time. ``fileset_authors``
    optionally applies a fixed author-id list to published filesets;
    by default only software articles get authors (from AUTHORS files).
    """

    def __init__(
        self,
        client: DepotClient,
        default_category: str = "",
        fileset_authors: list[int] | None = None,
    ):
        self.client = client
        self._default_category = default_category
        self._fileset_authors = list(fileset_authors or [])

    # -- software -----------------------------------------------------

    def find_software(self, name: str, commit: str):
        """Look up an existing publication of this exact revision.

        Returns (article_id, doi) or None. Several matches should not
        happen in normal use; the lowest article id wins with a warning.
        """
        records = self.client.search_by_tag(commit)
        if not records:
            return None
        if len(records) > 1:
            logger.warning(
                "%d articles carry tag %s; selecting the lowest id", len(records), commit
            )
        chosen = min(records, key=lambda record: record.article_id)
        return chosen.article_id, chosen.doi

    def publish_software(self, identity: SoftwareIdentity) -> SoftwareResult:
        """Publish one revision, or return the existing publication.

        A draft left behind by an interrupted run is completed rather
        than duplicated, so the commit hash stays a unique key.
        """
        if not identity.name or "/" in identity.name:
            raise InvalidMeta(f"software name {identity.name!r} must be a nonempty name")
        if not COMMIT_HASH_RE.match(identity.commit or ""):
            raise InvalidMeta("commit must be a full 40-hex lowercase hash")

        found = self.find_software(identity.name, identity.commit)
        if found is not None:
            article_id, doi = found
            if doi is None:
                logger.info("completing interrupted publication of article %s", article_id)
                doi = self._finish_software(article_id, identity)
            return SoftwareResult(article_id, doi, reused=True)

        description = f"Source code of {identity.name} at revision {identity.commit}."
        if identity.remote_url:
            description += f"\nRepository: {identity.remote_url}"
        meta = ArticleMeta(
            title=f"{identity.name} ({identity.commit[:7]})",
            description=description,
            kind="code",
            category=identity.category or self._default_category,
        )
        record = self.client.create_article(meta)
        doi = self._finish_software(record.article_id, identity)
        return SoftwareResult(record.article_id, doi, reused=False)

    def _finish_software(self, article_id: int, identity: SoftwareIdentity) -> str:
        with tempfile.TemporaryDirectory(prefix="curator-") as scratch:
            archive = export_archive(
                identity.local_repo,
                identity.commit,
                Path(scratch) / f"{identity.name}-{identity.commit[:7]}.zip",
                name=identity.name,
            )
            self.client.upload_file(article_id, archive)
        self.client.add_tag(article_id, identity.commit)
        authors = parse_authors_file(Path(identity.local_repo) / "AUTHORS")
        if authors:
            self.client.add_authors(
                article_id, [entry.service_author_id for entry in authors]
            )
        doi, _ = self.client.publish_article(article_id)
        return doi

    # -- data ---------------------------------------------------------

    def publish_data(self, spec: FilesetSpec) -> DataResult:
        """Publish a fileset, uploading only what actually changed.

        A fresh article uploads every path. With ``existing_article_id``
        the sidecar cache decides per file, the article gains a version
        and the DOI stays what it was. When nothing changed the publish
        step is skipped and the previous DOI is returned.
        """
        paths = [Path(p) for p in spec.paths]
        self._check_fileset(spec, paths)

        if spec.existing_article_id is None:
            meta = ArticleMeta(
                title=spec.title,
                description=spec.description,
                kind="fileset",
                category=self._default_category,
                tags=list(spec.tags),
            )
            article_id = self.client.create_article(meta).article_id
            # A new article has no confirmed uploads yet, whatever stale
            # sidecars say, so everything goes up.
            pending = {path: True for path in paths}
        else:
            article_id = spec.existing_article_id
            record = self.client.get_article(article_id)
            if record.meta.kind != "fileset":
                raise KindMismatch(
                    f"article {article_id} holds {record.meta.kind!r}, not a fileset"
                )
            pending = {path: needs_upload(path) for path in paths}

        uploaded = []
        skipped = []
        for path in paths:
            if not pending[path]:
                skipped.append(path)
                continue
            entry = self.client.upload_file(article_id, path)
            write_sidecar(path, entry.md5)
            uploaded.append(path)

        if self._fileset_authors:
            self.client.add_authors(article_id, self._fileset_authors)

        try:
            doi, _ = self.client.publish_article(article_id)
        except NothingToPublish:
            doi = self.client.get_article(article_id).doi
            logger.info("article %s unchanged; keeping %s", article_id, doi)
        return DataResult(article_id, doi, uploaded, skipped)

    @staticmethod
    def _check_fileset(spec: FilesetSpec, paths: list[Path]) -> None:
        if not spec.title:
            raise InvalidMeta("fileset title must be nonempty")
        if not paths:
            raise InvalidMeta("fileset needs at least one path")
        names = set()
        for path in paths:
            if path.suffix == ".md5":
                raise InvalidMeta(f"checksum sidecars are never published: {path}")
            if not path.is_file():
                raise IoError(f"no such data file: {path}")
            if path.name in names:
                raise InvalidMeta(f"duplicate file name in fileset: {path.name}")
            names.add(path.name)
