"""
Acquisition Pipeline for datadep
search -> consent -> download -> checksum (one retry) -> post-fetch -> atomic install
"""

import os
import sqlite3
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence

import requests

from .archive_utils import post_fetch
from .checksum_utils import ChecksumOutcome, ChecksumReport, verify_checksum
from .config import ENV_DISABLE_DOWNLOAD, get_settings, is_set, load_env_file
from .consent import Answer, PromptIO, ask, policy_from_env, render_prompt
from .db_utils import FetchRecord, get_ledger
from .errors import (
    ChecksumMismatchError,
    DeclinedError,
    DownloadsDisabledError,
    InstallFailedError,
    ManualDataDepMissingError,
    PostFetchFailedError,
)
from .http_utils import FetchedFile, ProgressCallback, download, make_session, timeouts
from .locate import (
    LoadPath,
    Resolution,
    SatisfiedBy,
    build_load_path,
    current_platform,
    planned_store_dir,
    search,
    store_dir,
    with_store,
)
from .logging_utils import get_logger
from .manifest import load_manifest, manifest_snippet
from .registry import (
    ChecksumMode,
    ChecksumSpec,
    DataDepSpec,
    DepKind,
    Registry,
    RemoteFile,
    is_valid_name,
)
from .staging import StagingArea

log = get_logger(__name__)

MAX_PARALLEL_DOWNLOADS = 4


@dataclass(frozen=True)
class FileReport:
    url: str
    filename: str
    byte_count: int
    digest: str
    attempts: int


@dataclass(frozen=True)
class FetchReport:
    name: str
    files: List[FileReport]


def _is_populated(path: str) -> bool:
    try:
        with os.scandir(path) as it:
            return any(True for _ in it)
    except OSError:
        return False


def install(staging: StagingArea, final_dir: str) -> bool:
    """
    Atomically rename the staging root to ``final_dir``

    If another resolver got there first the staged copy is thrown away
    and the existing directory is accepted.

    Args:
        staging: Fully prepared staging area
        final_dir: <store>/<name>

    Returns:
        True if this call installed the data, False if an existing copy won

    Raises:
        InstallFailedError: rename failed and nothing is installed
    """
    if _is_populated(final_dir):
        log.info(f"[INSTALL] {final_dir} already present, discarding staged copy")
        staging.cleanup()
        return False

    try:
        # an empty directory does not count as installed
        try:
            os.rmdir(final_dir)
        except FileNotFoundError:
            pass
        os.rename(staging.root, final_dir)
    except OSError as e:
        staging.cleanup()
        if _is_populated(final_dir):
            log.info(f"[INSTALL] Lost install race for {final_dir}, using winner's copy")
            return False
        raise InstallFailedError(final_dir, str(e)) from e

    log.info(f"[INSTALL] Installed {final_dir}")
    return True


def _download_all(
    sources: Sequence[RemoteFile],
    staging: StagingArea,
    http_client: requests.Session,
    timeout,
    progress: Optional[ProgressCallback],
) -> List[FetchedFile]:
    if len(sources) == 1:
        return [download(sources[0], staging, http_client, timeout, progress)]

    workers = min(MAX_PARALLEL_DOWNLOADS, len(sources))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(download, source, staging, http_client, timeout, progress)
            for source in sources
        ]
        # result() re-raises the first failure in source order
        return [future.result() for future in futures]


def _warn_unpinned(spec: DataDepSpec, report: ChecksumReport) -> None:
    for result in report.files:
        log.warning(
            f"[CHECKSUM] {spec.name}: {os.path.basename(result.path)} sha256 {result.computed}"
        )
    if spec.checksum.mode is ChecksumMode.ABSENT:
        log.warning(
            f"[CHECKSUM] {spec.name} declares no checksum. To pin this download, "
            "use this entry in DataDeps.toml:\n" + manifest_snippet(spec, report.digests)
        )


def _fetch_verified(
    spec: DataDepSpec,
    staging: StagingArea,
    http_client: requests.Session,
    timeout,
    progress: Optional[ProgressCallback],
) -> FetchReport:
    sources = list(spec.remote_sources)
    fetched = _download_all(sources, staging, http_client, timeout, progress)
    attempts = [1] * len(fetched)

    report = verify_checksum(spec.checksum, [f.path for f in fetched])
    digests = report.digests

    if report.outcome is ChecksumOutcome.FAIL:
        failing = [i for i, result in enumerate(report.files) if not result.ok]
        for i in failing:
            result = report.files[i]
            log.warning(
                f"[CHECKSUM] {fetched[i].filename} does not match (expected "
                f"{result.expected}, got {result.computed}); downloading again"
            )
            staging.discard(fetched[i].path)

        retried = _download_all(
            [sources[i] for i in failing], staging, http_client, timeout, progress
        )
        retry_report = verify_checksum(
            ChecksumSpec.enforce([spec.checksum.digests[i] for i in failing]),
            [f.path for f in retried],
        )
        for i, refetched, result in zip(failing, retried, retry_report.files):
            fetched[i] = refetched
            attempts[i] = 2
            digests[i] = result.computed
            if not result.ok:
                raise ChecksumMismatchError(
                    refetched.filename, result.expected, result.computed
                )
    elif report.outcome is ChecksumOutcome.WARNED:
        _warn_unpinned(spec, report)

    return FetchReport(
        spec.name,
        [
            FileReport(f.url, f.filename, f.byte_count, digest, tries)
            for f, digest, tries in zip(fetched, digests, attempts)
        ],
    )


def _record(store: str, report: FetchReport) -> None:
    try:
        get_ledger(store).record_fetch(
            report.name,
            [
                FetchRecord(report.name, f.url, f.filename, f.byte_count, f.digest, f.attempts)
                for f in report.files
            ],
        )
    except (sqlite3.Error, OSError) as e:
        log.warning(f"[INSTALL] Could not update fetch ledger in {store}: {e}")


def acquire(
    spec: DataDepSpec,
    store: str,
    http_client: requests.Session,
    timeout_secs: Optional[float] = None,
    progress: Optional[ProgressCallback] = None,
) -> Resolution:
    """
    Download, verify, unpack and install one dependency into ``store``

    Args:
        spec: Managed dependency
        store: Existing writable store directory
        http_client: Session for all requests
        timeout_secs: Read timeout when the spec sets none
        progress: Byte progress callback

    Returns:
        Resolution satisfied by FETCHED
    """
    final_dir = os.path.join(store, spec.name)
    timeout = timeouts(spec.timeout_secs or timeout_secs)

    try:
        staging = StagingArea.create(store, spec.name)
    except OSError as e:
        raise InstallFailedError(final_dir, f"cannot create staging area: {e}") from e

    try:
        report = _fetch_verified(spec, staging, http_client, timeout, progress)
        post_fetch(spec.post_fetch, staging)
        if not _is_populated(staging.root):
            raise PostFetchFailedError(
                ", ".join(f.filename for f in report.files),
                PostFetchFailedError.IO,
                "archive produced no files",
            )
        won = install(staging, final_dir)
    except BaseException:
        staging.cleanup()
        raise

    if won:
        _record(store, report)
    return Resolution(final_dir, SatisfiedBy.FETCHED)


def resolve(
    registry: Registry,
    name: str,
    load_path: LoadPath,
    env: Optional[Mapping[str, str]] = None,
    prompt_io: Optional[PromptIO] = None,
    http_client: Optional[requests.Session] = None,
    progress: Optional[ProgressCallback] = None,
) -> Resolution:
    """
    Return the absolute path of a dependency, fetching it first if needed

    Args:
        registry: Declared dependencies
        name: Dependency name
        load_path: Directories to search
        env: Environment mapping (DATADEP_* variables)
        prompt_io: Streams for the consent question
        http_client: Session to download with; one is created if omitted
        progress: Byte progress callback

    Returns:
        Resolution, FOUND_LOCAL without prompting or network when present

    Raises:
        NotRegisteredError, ManualDataDepMissingError, DownloadsDisabledError,
        DeclinedError, DownloadFailedError, ChecksumMismatchError,
        PostFetchFailedError, InstallFailedError, NoWritableStoreError
    """
    if env is None:
        env = os.environ

    load_path = with_store(load_path, env)
    if is_valid_name(name):
        found = search(load_path, name)
        if found is not None:
            return found

    spec = registry.lookup(name)

    if spec.kind is DepKind.MANUAL:
        raise ManualDataDepMissingError(
            name,
            spec.display_message,
            [os.path.join(directory, name) for directory in load_path.directories()],
        )

    if is_set(env, ENV_DISABLE_DOWNLOAD):
        raise DownloadsDisabledError(name)

    planned = planned_store_dir(load_path, env)
    destination = os.path.join(planned, name) if planned else "(no writable store)"
    rendered = render_prompt(spec, destination)
    if ask(prompt_io or PromptIO.from_sys(), policy_from_env(env), rendered) is Answer.DECLINE:
        raise DeclinedError(name)

    store = store_dir(load_path, env)
    timeout_secs = get_settings(env).timeout_secs

    if http_client is not None:
        return acquire(spec, store, http_client, timeout_secs, progress)
    with make_session() as session:
        return acquire(spec, store, session, timeout_secs, progress)


def datadep_path(
    name: str,
    manifest_path: Optional[str] = None,
    env: Optional[Mapping[str, str]] = None,
) -> str:
    """
    Absolute path to a dependency declared in DataDeps.toml

    This is what research code calls; the data is fetched on first use.

    Args:
        name: Dependency name
        manifest_path: Manifest file, defaults to DATADEP_MANIFEST or ./DataDeps.toml
        env: Environment mapping, defaults to ``os.environ`` (after loading .env)

    Returns:
        Absolute path string
    """
    if env is None:
        load_env_file()
        env = os.environ
    manifest = load_manifest(manifest_path or get_settings(env).manifest_path)
    load_path = build_load_path(env, current_platform(), os.getcwd())
    return resolve(manifest.to_registry(), name, load_path, env).path
