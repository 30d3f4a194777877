"""
Checksum Utilities for datadep
Streamed SHA-256 hashing and verification against a ChecksumSpec
"""

import hashlib
import os
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence

from .errors import ChecksumIoError
from .registry import ChecksumMode, ChecksumSpec

BLOCK_SIZE = 1 << 20


class ChecksumOutcome(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    WARNED = "warned"


@dataclass(frozen=True)
class FileDigest:
    path: str
    computed: str
    expected: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.expected is None or self.expected == self.computed


@dataclass(frozen=True)
class ChecksumReport:
    outcome: ChecksumOutcome
    files: List[FileDigest]

    @property
    def failures(self) -> List[FileDigest]:
        return [f for f in self.files if not f.ok]

    @property
    def digests(self) -> List[str]:
        return [f.computed for f in self.files]


def sha256_file(path: str, block_size: int = BLOCK_SIZE) -> str:
    """
    SHA-256 of a file's full content, read in fixed-size blocks

    Args:
        path: File to hash
        block_size: Read size in bytes

    Returns:
        Lowercase hex digest
    """
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for block in iter(lambda: f.read(block_size), b""):
                digest.update(block)
    except OSError as e:
        raise ChecksumIoError(path, str(e)) from e
    return digest.hexdigest()


def verify_checksum(spec: ChecksumSpec, files: Sequence[str]) -> ChecksumReport:
    """
    Hash ``files`` and compare against the declared digests

    A mismatch is reported through the outcome, never raised.

    Args:
        spec: Checksum policy; Enforce digests align with ``files``
        files: Paths in remote-source order

    Returns:
        ChecksumReport with outcome PASS, FAIL (Enforce only) or WARNED
    """
    if spec.mode is ChecksumMode.ENFORCE and len(files) != len(spec.digests):
        raise ValueError(f"{len(files)} file(s) but {len(spec.digests)} digest(s)")

    results = []
    for i, path in enumerate(files):
        computed = sha256_file(os.fspath(path))
        expected = spec.digests[i].lower() if spec.mode is ChecksumMode.ENFORCE else None
        results.append(FileDigest(os.fspath(path), computed, expected))

    if spec.mode is not ChecksumMode.ENFORCE:
        return ChecksumReport(ChecksumOutcome.WARNED, results)
    if all(r.ok for r in results):
        return ChecksumReport(ChecksumOutcome.PASS, results)
    return ChecksumReport(ChecksumOutcome.FAIL, results)
