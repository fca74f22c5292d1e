from __future__ import annotations

import hashlib
import logging
import subprocess

import pytest

from conftest import git, make_repo

from curator.depot import Depot
from curator.errors import InvalidMeta, IoError, KindMismatch, NotFound
from curator.gitrepo import export_archive
from curator.publish import (
    FilesetSpec,
    Publisher,
    SoftwareIdentity,
    file_md5,
    needs_upload,
    parse_authors_file,
    sidecar_path,
    write_sidecar,
)


def md5sum_of(path) -> str:
    out = subprocess.run(["md5sum", str(path)], capture_output=True, text=True, check=True)
    return out.stdout.split()[0]


# -- checksum sidecars ------------------------------------------------


def test_file_md5_matches_system_utility(tmp_path):
    path = tmp_path / "blob.bin"
    path.write_bytes(b"some bytes\x00\xff" * 100)
    assert file_md5(path) == md5sum_of(path)


def test_sidecar_format_is_hex_plus_newline(tmp_path):
    path = tmp_path / "data.vtu"
    path.write_bytes(b"payload")
    write_sidecar(path, file_md5(path))
    content = sidecar_path(path).read_bytes()
    assert len(content) == 33
    assert content.endswith(b"\n")
    assert content[:-1] == file_md5(path).encode()


def test_needs_upload_transitions(tmp_path):
    path = tmp_path / "data.vtu"
    path.write_bytes(b"original")
    assert needs_upload(path) is True

    write_sidecar(path, file_md5(path))
    assert needs_upload(path) is False

    path.write_bytes(b"originaX")
    assert needs_upload(path) is True

    sidecar_path(path).write_text("not a checksum\n")
    assert needs_upload(path) is True


def test_needs_upload_missing_file(tmp_path):
    # without a sidecar the answer is simply "upload it"
    assert needs_upload(tmp_path / "gone.vtu") is True
    # with a sidecar the checksum is compared and the read fails loudly
    path = tmp_path / "was_here.vtu"
    path.write_text("x")
    write_sidecar(path, file_md5(path))
    path.unlink()
    with pytest.raises(IoError):
        needs_upload(path)


# -- AUTHORS parsing --------------------------------------------------


def test_parse_authors_basic_line(tmp_path):
    path = tmp_path / "AUTHORS"
    path.write_text("A. Researcher <fs:554577>\n")
    entries = parse_authors_file(path)
    assert len(entries) == 1
    assert entries[0].display_name == "A. Researcher"
    assert entries[0].service_author_id == 554577


def test_parse_authors_grammar_cases(tmp_path):
    path = tmp_path / "AUTHORS"
    path.write_text(
        "# maintainers\n"
        "Jane Doe\n"
        "A B <fs:9> trailing words\n"
        "   \n"
        "Dup Entry <fs:9>\n"
        "Zero Id <fs:0>\n"
        "  # indented comment <fs:77>\n"
        "No Brackets fs:12\n"
    )
    entries = parse_authors_file(path)
    assert [(e.display_name, e.service_author_id) for e in entries] == [("A B", 9)]


def test_parse_authors_order_and_duplicates(tmp_path):
    path = tmp_path / "AUTHORS"
    path.write_text(
        "First Author <fs:30>\n"
        "Second Author <fs:10>\n"
        "First Author Again <fs:30>\n"
        "Third Author <fs:20>\n"
    )
    assert [e.service_author_id for e in parse_authors_file(path)] == [30, 10, 20]


def test_parse_authors_empty_and_missing(tmp_path):
    empty = tmp_path / "AUTHORS"
    empty.write_text("")
    assert parse_authors_file(empty) == []
    assert parse_authors_file(tmp_path / "nope") == []


# -- software publication ---------------------------------------------


def test_publish_software_end_to_end(tmp_path):
    repo = make_repo(tmp_path / "wavesolver", remote="https://example.org/wave.git")
    head = git(repo, "rev-parse", "HEAD")
    depot = Depot()
    publisher = Publisher(depot, default_category="Computational Physics")

    result = publisher.publish_software(
        SoftwareIdentity(
            name="wavesolver",
            commit=head,
            local_repo=repo,
            remote_url="https://example.org/wave.git",
        )
    )
    assert result.reused is False
    assert result.doi == f"10.5072/mockdepot.{result.article_id}"

    record = depot.get_article(result.article_id)
    assert record.meta.title == f"wavesolver ({head[:7]})"
    assert record.meta.kind == "code"
    assert record.meta.category == "Computational Physics"
    assert head in record.meta.tags
    assert "https://example.org/wave.git" in record.meta.description
    assert record.status == "published"
    assert record.version == 1
    # conftest AUTHORS fixture carries ids 9001 and 9002 in that order
    assert record.authors == [9001, 9002]

    # the uploaded archive is exactly the deterministic export
    reference = export_archive(repo, head, tmp_path / "ref.zip", name="wavesolver")
    assert [f.name for f in record.files] == [f"wavesolver-{head[:7]}.zip"]
    assert record.files[0].md5 == hashlib.md5(reference.read_bytes()).hexdigest()


def test_publish_software_is_idempotent(tmp_path):
    repo = make_repo(tmp_path / "repo")
    head = git(repo, "rev-parse", "HEAD")
    depot = Depot()
    publisher = Publisher(depot)
    identity = SoftwareIdentity(name="repo", commit=head, local_repo=repo)

    first = publisher.publish_software(identity)
    ops_after_first = list(depot.state.op_log)
    second = publisher.publish_software(identity)

    assert second == (first.article_id, first.doi, True)
    assert depot.state.op_log == ops_after_first
    assert len(depot.state.articles) == 1


def test_publish_software_completes_interrupted_draft(tmp_path):
    repo = make_repo(tmp_path / "repo")
    head = git(repo, "rev-parse", "HEAD")
    depot = Depot()
    # simulate a crash after create+tag but before publish
    from curator.client import ArticleMeta

    draft = depot.create_article(ArticleMeta(title=f"repo ({head[:7]})", kind="code"))
    depot.add_tag(draft.article_id, head)

    result = Publisher(depot).publish_software(
        SoftwareIdentity(name="repo", commit=head, local_repo=repo)
    )
    assert result.reused is True
    assert result.article_id == draft.article_id
    record = depot.get_article(draft.article_id)
    assert record.status == "published"
    assert record.doi == result.doi
    assert len(depot.state.articles) == 1


def test_find_software_prefers_lowest_id_with_warning(tmp_path, caplog):
    from curator.client import ArticleMeta

    depot = Depot()
    a = depot.create_article(ArticleMeta(title="a", kind="code"))
    b = depot.create_article(ArticleMeta(title="b", kind="code"))
    tag = "f" * 40
    depot.add_tag(b.article_id, tag)
    depot.add_tag(a.article_id, tag)
    with caplog.at_level(logging.WARNING):
        found = Publisher(depot).find_software("x", tag)
    assert found[0] == a.article_id
    assert any("lowest" in record.message for record in caplog.records)


def test_find_software_empty_depot():
    assert Publisher(Depot()).find_software("x", "a" * 40) is None


@pytest.mark.parametrize(
    "name,commit",
    [
        ("", "a" * 40),
        ("bad/name", "a" * 40),
        ("fine", "short"),
        ("fine", "A" * 40),
        ("fine", None),
    ],
)
def test_publish_software_validates_identity(tmp_path, name, commit):
    with pytest.raises(InvalidMeta):
        Publisher(Depot()).publish_software(
            SoftwareIdentity(name=name, commit=commit, local_repo=tmp_path)
        )


# -- fileset publication ----------------------------------------------


def _data_files(tmp_path, count=3):
    paths = []
    for index in range(count):
        path = tmp_path / f"frame_{index}.vtu"
        path.write_text(f"field values {index}\n")
        paths.append(path)
    return paths


def test_publish_data_fresh_uploads_everything(tmp_path):
    depot = Depot()
    paths = _data_files(tmp_path)
    # a stale sidecar must not suppress uploads to a brand-new article
    write_sidecar(paths[0], file_md5(paths[0]))

    result = Publisher(depot).publish_data(FilesetSpec(title="run data", paths=paths))
    assert result.uploaded == paths
    assert result.skipped == []
    record = depot.get_article(result.article_id)
    assert record.version == 1
    assert record.meta.kind == "fileset"
    assert [f.name for f in record.files] == [p.name for p in paths]
    for path in paths:
        assert sidecar_path(path).exists()


def test_publish_data_selective_rerun(tmp_path):
    depot = Depot()
    publisher = Publisher(depot)
    paths = _data_files(tmp_path)
    first = publisher.publish_data(FilesetSpec(title="run data", paths=paths))

    paths[1].write_text("changed content\n")
    second = publisher.publish_data(
        FilesetSpec(title="run data", paths=paths, existing_article_id=first.article_id)
    )
    assert second.uploaded == [paths[1]]
    assert second.skipped == [paths[0], paths[2]]
    assert second.doi == first.doi
    assert depot.get_article(first.article_id).version == 2


def test_publish_data_noop_rerun_skips_publish(tmp_path):
    depot = Depot()
    publisher = Publisher(depot)
    paths = _data_files(tmp_path)
    first = publisher.publish_data(FilesetSpec(title="run data", paths=paths))
    ops_before = list(depot.state.op_log)

    again = publisher.publish_data(
        FilesetSpec(title="run data", paths=paths, existing_article_id=first.article_id)
    )
    assert again.uploaded == []
    assert again.skipped == paths
    assert again.doi == first.doi
    assert depot.get_article(first.article_id).version == 1
    assert depot.state.op_log == ops_before


def test_publish_data_sidecars_match_stored_bytes(tmp_path):
    depot = Depot()
    paths = _data_files(tmp_path, count=4)
    result = Publisher(depot).publish_data(FilesetSpec(title="run data", paths=paths))
    stored = depot.state.articles[result.article_id]
    by_name = {entry.name: stored.blobs[entry.file_id] for entry in stored.head.files}
    for path in paths:
        recorded = sidecar_path(path).read_text().strip()
        assert recorded == hashlib.md5(by_name[path.name]).hexdigest()


def test_publish_data_existing_must_be_fileset(tmp_path):
    from curator.client import ArticleMeta

    depot = Depot()
    code = depot.create_article(ArticleMeta(title="code thing", kind="code"))
    paths = _data_files(tmp_path, count=1)
    with pytest.raises(KindMismatch):
        Publisher(depot).publish_data(
            FilesetSpec(title="d", paths=paths, existing_article_id=code.article_id)
        )


def test_publish_data_unknown_existing_id(tmp_path):
    paths = _data_files(tmp_path, count=1)
    with pytest.raises(NotFound):
        Publisher(Depot()).publish_data(
            FilesetSpec(title="d", paths=paths, existing_article_id=555)
        )


def test_publish_data_rejects_bad_requests(tmp_path):
    publisher = Publisher(Depot())
    good = _data_files(tmp_path, count=2)

    with pytest.raises(InvalidMeta):
        publisher.publish_data(FilesetSpec(title="", paths=good))
    with pytest.raises(InvalidMeta):
        publisher.publish_data(FilesetSpec(title="d", paths=[]))
    with pytest.raises(IoError):
        publisher.publish_data(FilesetSpec(title="d", paths=[tmp_path / "absent.vtu"]))

    sidecar = tmp_path / "frame.vtu.md5"
    sidecar.write_text("aa\n")
    with pytest.raises(InvalidMeta):
        publisher.publish_data(FilesetSpec(title="d", paths=[sidecar]))

    nested = tmp_path / "sub"
    nested.mkdir()
    clash = nested / good[0].name
    clash.write_text("same basename\n")
    with pytest.raises(InvalidMeta):
        publisher.publish_data(FilesetSpec(title="d", paths=[good[0], clash]))


def test_publish_data_optional_fileset_authors(tmp_path):
    depot = Depot()
    paths = _data_files(tmp_path, count=1)
    result = Publisher(depot, fileset_authors=[42, 43]).publish_data(
        FilesetSpec(title="with authors", paths=paths)
    )
    assert depot.get_article(result.article_id).authors == [42, 43]

    plain = Publisher(depot).publish_data(
        FilesetSpec(title="without authors", paths=paths)
    )
    assert depot.get_article(plain.article_id).authors == []


def test_publish_data_applies_tags_on_create(tmp_path):
    depot = Depot()
    paths = _data_files(tmp_path, count=1)
    result = Publisher(depot).publish_data(
        FilesetSpec(title="tagged", tags=["run-7"], paths=paths)
    )
    assert depot.get_article(result.article_id).meta.tags == ["run-7"]
