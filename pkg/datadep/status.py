"""
Status and Verification Helpers for datadep
Row builders behind the list, status and verify commands and the dashboard
"""

import os
import sqlite3
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence

import requests

from .checksum_utils import ChecksumOutcome, verify_checksum
from .db_utils import FetchRecord, get_ledger
from .errors import ChecksumIoError
from .http_utils import RemoteCheck, check_url, infer_filename, timeouts
from .locate import LoadPath, search
from .logging_utils import get_logger
from .registry import DataDepSpec, DepKind, PostFetchAction, Registry

log = get_logger(__name__)

FOUND = "found"
NOT_FETCHED = "not-fetched"
MANUAL = "manual"

OK = "ok"
FAILED = "failed"
MISSING_FILE = "missing-file"
UNPINNED = "unpinned"
VERIFIED_AT_FETCH = "verified-at-fetch"
MANUAL_PRESENT = "manual-present"


@dataclass(frozen=True)
class ListRow:
    name: str
    kind: str
    sources: int


@dataclass(frozen=True)
class StatusRow:
    name: str
    state: str
    origin: Optional[str] = None
    path: Optional[str] = None
    locations: List[str] = field(default_factory=list)
    fetched_at: Optional[str] = None


@dataclass(frozen=True)
class FileCheck:
    filename: str
    computed: Optional[str]
    expected: Optional[str] = None
    ok: bool = True


@dataclass(frozen=True)
class VerifyRow:
    name: str
    state: str
    path: Optional[str] = None
    files: List[FileCheck] = field(default_factory=list)
    detail: str = ""

    def failed(self, strict: bool = False) -> bool:
        if self.state in (FAILED, MISSING_FILE):
            return True
        return strict and self.state == NOT_FETCHED


@dataclass(frozen=True)
class RemoteRow:
    name: str
    url: str
    ok: bool
    status: Optional[int]
    method: str
    error: Optional[str] = None


def as_dict(row) -> Dict:
    return asdict(row)


def list_rows(registry: Registry) -> List[ListRow]:
    return [ListRow(s.name, s.kind.value, len(s.remote_sources)) for s in registry]


def _ledger_records(store: str, name: str) -> List[FetchRecord]:
    try:
        ledger = get_ledger(store, create=False)
        return ledger.get_fetches(name) if ledger is not None else []
    except sqlite3.Error as e:
        log.debug(f"Ledger in {store} unreadable: {e}")
        return []


def dep_status(spec: DataDepSpec, load_path: LoadPath) -> StatusRow:
    """
    Where a dependency is installed, if anywhere

    Args:
        spec: Declared dependency
        load_path: Directories to search

    Returns:
        StatusRow with state found, not-fetched or manual
    """
    found = search(load_path, spec.name)
    if found is not None:
        records = _ledger_records(os.path.dirname(found.path), spec.name)
        return StatusRow(
            spec.name,
            FOUND,
            found.origin.value if found.origin else None,
            found.path,
            fetched_at=records[0].fetched_at if records else None,
        )
    if spec.kind is DepKind.MANUAL:
        locations = [os.path.join(d, spec.name) for d in load_path.directories()]
        return StatusRow(spec.name, MANUAL, locations=locations)
    return StatusRow(spec.name, NOT_FETCHED)


def _retained_filenames(spec: DataDepSpec, records: Sequence[FetchRecord]) -> List[str]:
    if len(records) == len(spec.remote_sources):
        return [r.filename for r in records]
    return [
        remote.filename_override or infer_filename(remote.url)
        for remote in spec.remote_sources
    ]


def verify_local(spec: DataDepSpec, load_path: LoadPath) -> VerifyRow:
    """
    Re-hash the retained downloads of an installed dependency

    Args:
        spec: Declared dependency
        load_path: Directories to search

    Returns:
        VerifyRow; unpacked-and-deleted archives report verified-at-fetch
    """
    found = search(load_path, spec.name)
    if found is None:
        return VerifyRow(spec.name, NOT_FETCHED)
    if spec.kind is DepKind.MANUAL:
        return VerifyRow(spec.name, MANUAL_PRESENT, found.path, detail="manual data is not checksummed")

    records = _ledger_records(os.path.dirname(found.path), spec.name)

    if spec.post_fetch is PostFetchAction.UNPACK_THEN_DELETE:
        files = [FileCheck(r.filename, r.sha256) for r in records]
        detail = "archives were deleted after unpacking"
        if records:
            detail += f"; verified when fetched at {records[0].fetched_at}"
        return VerifyRow(spec.name, VERIFIED_AT_FETCH, found.path, files, detail)

    filenames = _retained_filenames(spec, records)
    paths = [os.path.join(found.path, filename) for filename in filenames]
    missing = [name for name, path in zip(filenames, paths) if not os.path.isfile(path)]
    if missing:
        return VerifyRow(
            spec.name,
            MISSING_FILE,
            found.path,
            [FileCheck(name, None, ok=False) for name in missing],
            "retained download(s) missing",
        )

    try:
        report = verify_checksum(spec.checksum, paths)
    except ChecksumIoError as e:
        return VerifyRow(spec.name, MISSING_FILE, found.path, detail=str(e))

    files = [
        FileCheck(name, result.computed, result.expected, result.ok)
        for name, result in zip(filenames, report.files)
    ]
    if report.outcome is ChecksumOutcome.PASS:
        return VerifyRow(spec.name, OK, found.path, files)
    if report.outcome is ChecksumOutcome.FAIL:
        return VerifyRow(spec.name, FAILED, found.path, files, "checksum mismatch")
    return VerifyRow(spec.name, UNPINNED, found.path, files, "no checksum to compare against")


def verify_remote(
    specs: Sequence[DataDepSpec],
    http_client: requests.Session,
    timeout_secs: Optional[float] = None,
    max_workers: int = 8,
) -> List[RemoteRow]:
    """
    Probe every source URL for link rot

    Args:
        specs: Dependencies to check (manual ones have no URLs)
        http_client: Session to probe with
        timeout_secs: Read timeout per request
        max_workers: Concurrent probes

    Returns:
        One RemoteRow per URL, in manifest order
    """
    jobs = [(spec, remote.url) for spec in specs for remote in spec.remote_sources]
    if not jobs:
        return []

    def probe(job) -> RemoteCheck:
        spec, url = job
        return check_url(http_client, url, timeouts(spec.timeout_secs or timeout_secs))

    with ThreadPoolExecutor(max_workers=min(max_workers, len(jobs))) as pool:
        checks = list(pool.map(probe, jobs))

    return [
        RemoteRow(spec.name, check.url, check.ok, check.status, check.method, check.error)
        for (spec, _), check in zip(jobs, checks)
    ]
