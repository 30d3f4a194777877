import io
import logging
import os
import tarfile
import threading
import zipfile

import pytest

from datadep.acquire import datadep_path, install, resolve
from datadep.consent import PromptIO
from datadep.db_utils import get_ledger
from datadep.errors import (
    ChecksumMismatchError,
    DeclinedError,
    DownloadFailedError,
    DownloadsDisabledError,
    ExitStatus,
    InstallFailedError,
    ManualDataDepMissingError,
    NotRegisteredError,
    PostFetchFailedError,
)
from datadep.locate import Origin, SatisfiedBy
from datadep.registry import (
    ChecksumSpec,
    DataDepSpec,
    DepKind,
    PostFetchAction,
    Registry,
    RemoteFile,
)
from datadep.staging import StagingArea

from conftest import ABC_SHA256, sha256


def managed(name, urls, digests=None, **kwargs):
    checksum = ChecksumSpec.enforce(digests) if digests is not None else ChecksumSpec.absent()
    return DataDepSpec(
        name=name,
        message=f"{name} test data",
        remote_sources=tuple(RemoteFile(u) for u in urls),
        checksum=checksum,
        **kwargs,
    )


def silent_prompt(answer=""):
    return PromptIO(io.StringIO(answer), io.StringIO(), interactive=True)


def snapshot(root):
    return sorted(str(p) for p in root.rglob("*"))


def staging_leftovers(store):
    staging = store / ".staging"
    return list(staging.iterdir()) if staging.exists() else []


EDGES = [
    # id, preinstalled, accept, bodies, digest, outcome, GET count
    ("found-local", True, None, [b"abc"], ABC_SHA256, SatisfiedBy.FOUND_LOCAL, 0),
    ("accept-checksum-pass", False, "true", [b"abc"], ABC_SHA256, SatisfiedBy.FETCHED, 1),
    ("decline-abort", False, "false", [b"abc"], ABC_SHA256, DeclinedError, 0),
    ("checksum-fail-retry-pass", False, "true", [b"abd", b"abc"], ABC_SHA256, SatisfiedBy.FETCHED, 2),
    ("checksum-fail-retry-abort", False, "true", [b"abd"], ABC_SHA256, ChecksumMismatchError, 2),
    ("unpinned-proceeds", False, "true", [b"abc"], None, SatisfiedBy.FETCHED, 1),
]


@pytest.mark.parametrize(
    "preinstalled, accept, bodies, digest, outcome, gets",
    [edge[1:] for edge in EDGES],
    ids=[edge[0] for edge in EDGES],
)
def test_resolution_edges(
    server, env, load_path, store, workdir, preinstalled, accept, bodies, digest, outcome, gets
):
    url = server.route("/D/data.txt", bodies=bodies)
    registry = Registry([managed("D", [url], [digest] if digest else None)])
    if preinstalled:
        local = workdir / "datadeps" / "D"
        local.mkdir(parents=True)
        (local / "data.txt").write_bytes(b"abc")
    env = {**env, "DATADEP_ALWAYS_ACCEPT": accept} if accept else {
        k: v for k, v in env.items() if k != "DATADEP_ALWAYS_ACCEPT"
    }
    prompt_io = silent_prompt()

    if isinstance(outcome, SatisfiedBy):
        resolution = resolve(registry, "D", load_path, env, prompt_io)
        assert resolution.satisfied_by is outcome
        assert os.path.isabs(resolution.path)
        with open(os.path.join(resolution.path, "data.txt"), "rb") as f:
            assert f.read() == b"abc"
    else:
        with pytest.raises(outcome):
            resolve(registry, "D", load_path, env, prompt_io)
        assert not (store / "D").exists()

    assert len(server.gets("/D/data.txt")) == gets
    assert prompt_io.stdout.getvalue() == ""
    assert staging_leftovers(store) == []


class TestResolve:
    def test_fetch_installs_into_store(self, server, env, load_path, store):
        url = server.route("/abc.txt", b"abc")
        registry = Registry([managed("ABC", [url], [ABC_SHA256])])
        resolution = resolve(registry, "ABC", load_path, env, silent_prompt())
        assert resolution.path == str(store / "ABC")
        assert (store / "ABC" / "abc.txt").read_bytes() == b"abc"

        (record,) = get_ledger(str(store)).get_fetches("ABC")
        assert (record.url, record.filename, record.byte_count) == (url, "abc.txt", 3)
        assert (record.sha256, record.attempts) == (ABC_SHA256, 1)

    def test_interactive_accept_shows_provenance(self, server, env, load_path, store):
        url = server.route("/abc.txt", b"abc")
        registry = Registry([managed("ABC", [url], [ABC_SHA256], license="CC0")])
        env.pop("DATADEP_ALWAYS_ACCEPT")
        prompt_io = silent_prompt("y\n")
        resolve(registry, "ABC", load_path, env, prompt_io)
        shown = prompt_io.stdout.getvalue()
        assert "ABC test data" in shown
        assert "License: CC0" in shown
        assert url in shown
        assert f"Destination: {store / 'ABC'}" in shown
        assert "Size:" not in shown

    def test_interactive_decline_touches_nothing(self, server, env, load_path, tmp_path):
        url = server.route("/abc.txt", b"abc")
        registry = Registry([managed("ABC", [url], [ABC_SHA256])])
        env.pop("DATADEP_ALWAYS_ACCEPT")
        before = snapshot(tmp_path)
        with pytest.raises(DeclinedError) as excinfo:
            resolve(registry, "ABC", load_path, env, silent_prompt("\n"))
        assert excinfo.value.exit_code == ExitStatus.DECLINED
        assert snapshot(tmp_path) == before
        assert server.requests == []

    def test_second_resolve_is_local(self, server, env, load_path):
        url = server.route("/abc.txt", b"abc")
        registry = Registry([managed("ABC", [url], [ABC_SHA256])])
        first = resolve(registry, "ABC", load_path, env, silent_prompt())
        server.clear_log()

        env.pop("DATADEP_ALWAYS_ACCEPT")
        prompt_io = silent_prompt()
        second = resolve(registry, "ABC", load_path, env, prompt_io)
        assert second.path == first.path
        assert second.satisfied_by is SatisfiedBy.FOUND_LOCAL
        assert second.origin is Origin.ENV
        assert server.requests == []
        assert prompt_io.stdout.getvalue() == ""

    def test_only_failing_files_are_refetched(self, server, env, load_path, store):
        good = server.route("/good.txt", b"abc")
        flaky = server.route("/flaky.txt", bodies=[b"abd", b"abc"])
        registry = Registry([managed("Two", [good, flaky], [ABC_SHA256, ABC_SHA256])])
        resolve(registry, "Two", load_path, env, silent_prompt())
        assert len(server.gets("/good.txt")) == 1
        assert len(server.gets("/flaky.txt")) == 2
        attempts = [r.attempts for r in get_ledger(str(store)).get_fetches("Two")]
        assert attempts == [1, 2]

    def test_checksum_mismatch_details(self, server, env, load_path):
        url = server.route("/abd.txt", b"abd")
        registry = Registry([managed("X", [url], [ABC_SHA256])])
        with pytest.raises(ChecksumMismatchError) as excinfo:
            resolve(registry, "X", load_path, env, silent_prompt())
        assert excinfo.value.expected == ABC_SHA256
        assert excinfo.value.computed == sha256(b"abd")
        assert excinfo.value.exit_code == ExitStatus.CHECKSUM_MISMATCH

    def test_unpinned_fetch_prints_snippet(self, server, env, load_path, caplog):
        url = server.route("/abc.txt", b"abc")
        registry = Registry([managed("U", [url])])
        with caplog.at_level(logging.WARNING, logger="datadep"):
            resolve(registry, "U", load_path, env, silent_prompt())
        assert ABC_SHA256 in caplog.text
        assert "[[datadep]]" in caplog.text
        assert f'sha256 = "{ABC_SHA256}"' in caplog.text

    def test_ignore_mode_warns_without_snippet(self, server, env, load_path, caplog):
        url = server.route("/abc.txt", b"abc")
        spec = DataDepSpec("I", "m", (RemoteFile(url),), ChecksumSpec.ignore())
        with caplog.at_level(logging.WARNING, logger="datadep"):
            resolve(Registry([spec]), "I", load_path, env, silent_prompt())
        assert ABC_SHA256 in caplog.text
        assert "[[datadep]]" not in caplog.text

    def test_unpack_after_verification(self, server, env, load_path, store):
        buffer = io.BytesIO()
        with zipfile.ZipFile(buffer, "w") as archive:
            archive.writestr("images/0.png", b"png")
        body = buffer.getvalue()
        url = server.route("/digits.zip", body)
        registry = Registry(
            [managed("Digits", [url], [sha256(body)], post_fetch=PostFetchAction.UNPACK_AUTO)]
        )
        path = resolve(registry, "Digits", load_path, env, silent_prompt()).path
        assert sorted(os.listdir(path)) == ["digits.zip", "images"]
        assert (store / "Digits" / "images" / "0.png").read_bytes() == b"png"

    def test_corrupt_archive_installs_nothing(self, server, env, load_path, store):
        url = server.route("/broken.zip", b"not a zip")
        registry = Registry(
            [managed("Broken", [url], [sha256(b"not a zip")], post_fetch=PostFetchAction.UNPACK_AUTO)]
        )
        with pytest.raises(PostFetchFailedError):
            resolve(registry, "Broken", load_path, env, silent_prompt())
        assert not (store / "Broken").exists()
        assert staging_leftovers(store) == []

    def test_archive_with_no_files_installs_nothing(self, server, env, load_path, store):
        buffer = io.BytesIO()
        with tarfile.open(fileobj=buffer, mode="w:gz"):
            pass
        url = server.route("/e.tar.gz", buffer.getvalue())
        spec = DataDepSpec(
            "E",
            "empty archive",
            (RemoteFile(url),),
            ChecksumSpec.ignore(),
            PostFetchAction.UNPACK_THEN_DELETE,
        )
        registry = Registry([spec])
        for _ in range(2):
            with pytest.raises(PostFetchFailedError) as excinfo:
                resolve(registry, "E", load_path, env, silent_prompt())
            assert "no files" in str(excinfo.value)
            assert not (store / "E").exists()
            assert staging_leftovers(store) == []
        assert excinfo.value.exit_code == ExitStatus.FAILURE

    def test_download_failure_installs_nothing(self, server, env, load_path, store):
        ok = server.route("/ok.txt", b"abc")
        registry = Registry([managed("Gone", [ok, server.url("/missing.txt")])])
        with pytest.raises(DownloadFailedError) as excinfo:
            resolve(registry, "Gone", load_path, env, silent_prompt())
        assert excinfo.value.status == 404
        assert not (store / "Gone").exists()
        assert staging_leftovers(store) == []

    def test_manual_dependency_missing(self, server, env, load_path):
        spec = DataDepSpec("Private", "Ask the lab.", kind=DepKind.MANUAL)
        with pytest.raises(ManualDataDepMissingError) as excinfo:
            resolve(Registry([spec]), "Private", load_path, env, silent_prompt())
        error = excinfo.value
        assert error.exit_code == ExitStatus.MANUAL_MISSING
        assert "Ask the lab." in str(error)
        assert error.locations[0] == os.path.join(load_path.directories()[0], "Private")

    def test_manual_dependency_present(self, env, load_path, workdir):
        local = workdir / "datadeps" / "Private"
        local.mkdir(parents=True)
        (local / "secret.csv").write_text("1")
        spec = DataDepSpec("Private", "Ask the lab.", kind=DepKind.MANUAL)
        resolution = resolve(Registry([spec]), "Private", load_path, env, silent_prompt())
        assert resolution.path == str(local)
        assert resolution.origin is Origin.WORKING_DIR

    def test_not_registered(self, env, load_path):
        registry = Registry([managed("MNIST", ["https://example.org/m"])])
        with pytest.raises(NotRegisteredError) as excinfo:
            resolve(registry, "MNIST ", load_path, env, silent_prompt())
        assert excinfo.value.suggestion == "MNIST"
        assert excinfo.value.exit_code == ExitStatus.NOT_REGISTERED

    def test_downloads_disabled(self, server, env, load_path):
        url = server.route("/abc.txt", b"abc")
        registry = Registry([managed("ABC", [url], [ABC_SHA256])])
        offline = {**env, "DATADEP_DISABLE_DOWNLOAD": "1"}
        with pytest.raises(DownloadsDisabledError) as excinfo:
            resolve(registry, "ABC", load_path, offline, silent_prompt())
        assert excinfo.value.exit_code == ExitStatus.DOWNLOADS_DISABLED

        resolve(registry, "ABC", load_path, env, silent_prompt())
        server.clear_log()
        assert resolve(registry, "ABC", load_path, offline, silent_prompt()).satisfied_by is (
            SatisfiedBy.FOUND_LOCAL
        )
        assert server.requests == []

    def test_disable_download_false_values(self, server, env, load_path):
        url = server.route("/abc.txt", b"abc")
        registry = Registry([managed("ABC", [url], [ABC_SHA256])])
        resolution = resolve(
            registry, "ABC", load_path, {**env, "DATADEP_DISABLE_DOWNLOAD": "0"}, silent_prompt()
        )
        assert resolution.satisfied_by is SatisfiedBy.FETCHED

    def test_concurrent_threads_agree(self, server, env, load_path, store):
        body = os.urandom(256 * 1024)
        url = server.route("/blob.bin", body, chunk_size=16 * 1024, chunk_delay=0.01)
        registry = Registry([managed("Blob", [url], [sha256(body)])])
        results, errors = [], []

        def worker():
            try:
                results.append(resolve(registry, "Blob", load_path, env, silent_prompt()).path)
            except Exception as e:  # noqa: BLE001
                errors.append(e)

        threads = [threading.Thread(target=worker) for _ in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()

        assert errors == []
        assert set(results) == {str(store / "Blob")}
        assert os.listdir(store / "Blob") == ["blob.bin"]
        assert (store / "Blob" / "blob.bin").read_bytes() == body
        assert staging_leftovers(store) == []


class TestInstall:
    def staged(self, store, content=b"new"):
        staging = StagingArea.create(str(store), "D")
        with open(os.path.join(staging.root, "f"), "wb") as f:
            f.write(content)
        return staging

    def test_existing_copy_wins(self, tmp_path):
        final = tmp_path / "D"
        final.mkdir()
        (final / "f").write_bytes(b"old")
        staging = self.staged(tmp_path)
        assert install(staging, str(final)) is False
        assert (final / "f").read_bytes() == b"old"
        assert not staging.exists()

    def test_empty_target_is_replaced(self, tmp_path):
        final = tmp_path / "D"
        final.mkdir()
        staging = self.staged(tmp_path)
        assert install(staging, str(final)) is True
        assert (final / "f").read_bytes() == b"new"

    def test_empty_target_removed_by_another_resolver(self, tmp_path, monkeypatch):
        final = tmp_path / "D"
        final.mkdir()
        staging = self.staged(tmp_path)
        real_rmdir = os.rmdir

        def already_gone(path):
            real_rmdir(path)
            raise FileNotFoundError(2, "No such file or directory", path)

        monkeypatch.setattr(os, "rmdir", already_gone)
        assert install(staging, str(final)) is True
        assert (final / "f").read_bytes() == b"new"

    def test_rename_failure(self, tmp_path, monkeypatch):
        staging = self.staged(tmp_path)

        def refuse(src, dst):
            raise PermissionError(13, "Permission denied")

        monkeypatch.setattr(os, "rename", refuse)
        with pytest.raises(InstallFailedError) as excinfo:
            install(staging, str(tmp_path / "D"))
        assert "Permission denied" in str(excinfo.value)
        assert not staging.exists()
        assert not (tmp_path / "D").exists()

    def test_lost_race_during_rename(self, tmp_path, monkeypatch):
        staging = self.staged(tmp_path)
        final = tmp_path / "D"

        def winner_first(src, dst):
            final.mkdir()
            (final / "f").write_bytes(b"winner")
            raise OSError(39, "Directory not empty")

        monkeypatch.setattr(os, "rename", winner_first)
        assert install(staging, str(final)) is False
        assert (final / "f").read_bytes() == b"winner"
        assert not staging.exists()


def test_datadep_path_reads_manifest(server, env, workdir, store, write_manifest_file, monkeypatch):
    url = server.route("/abc.txt", b"abc")
    write_manifest_file(managed("ABC", [url], [ABC_SHA256]))
    monkeypatch.chdir(workdir)
    path = datadep_path("ABC", env=env)
    assert path == str(store / "ABC")
    assert datadep_path("ABC", manifest_path=str(workdir / "DataDeps.toml"), env=env) == path
