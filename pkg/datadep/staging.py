"""
Staging Areas for datadep
Private per-resolve directories under <store>/.staging where files are
downloaded, verified and unpacked before being renamed into place
"""

import os
import secrets
import shutil
import threading
import time
from typing import List, Optional

from .locate import STAGING_DIRNAME
from .logging_utils import get_logger

log = get_logger(__name__)

STALE_AFTER_SECS = 24 * 60 * 60


class StagingArea:
    """A uniquely named scratch directory for one resolve of one dependency"""

    def __init__(self, root: str):
        self.root = root
        self.files: List[str] = []
        self._claimed = set()
        self._lock = threading.Lock()

    @classmethod
    def create(cls, store: str, name: str) -> "StagingArea":
        """
        Make ``<store>/.staging/<name>-<12 hex nonce>``

        Args:
            store: Writable store directory
            name: Dependency name

        Returns:
            StagingArea with an existing, empty root
        """
        parent = os.path.join(store, STAGING_DIRNAME)
        os.makedirs(parent, exist_ok=True)
        while True:
            root = os.path.join(parent, f"{name}-{secrets.token_hex(6)}")
            try:
                os.mkdir(root)
            except FileExistsError:
                continue
            log.debug(f"[FETCH] Staging in {root}")
            return cls(root)

    def claim(self, filename: str) -> Optional[str]:
        """Reserve ``filename`` inside the root; None if already taken"""
        with self._lock:
            if filename in self._claimed:
                return None
            self._claimed.add(filename)
            return os.path.join(self.root, filename)

    def add(self, path: str) -> None:
        with self._lock:
            self.files.append(path)

    def discard(self, path: str) -> None:
        """Delete one staged file and release its name"""
        with self._lock:
            if path in self.files:
                self.files.remove(path)
            self._claimed.discard(os.path.basename(path))
        try:
            os.remove(path)
        except FileNotFoundError:
            pass

    def exists(self) -> bool:
        return os.path.isdir(self.root)

    def cleanup(self) -> None:
        """Remove the root, best effort"""
        shutil.rmtree(self.root, ignore_errors=True)


def reap_stale(store: str, max_age_secs: float = STALE_AFTER_SECS) -> List[str]:
    """
    Delete staging directories left behind by killed resolves

    Args:
        store: Store directory whose .staging is swept
        max_age_secs: Only entries older than this are removed

    Returns:
        Paths that were removed
    """
    parent = os.path.join(store, STAGING_DIRNAME)
    if not os.path.isdir(parent):
        return []

    cutoff = time.time() - max_age_secs
    removed = []
    with os.scandir(parent) as it:
        entries = list(it)
    for entry in entries:
        try:
            if entry.stat(follow_symlinks=False).st_mtime >= cutoff:
                continue
            if entry.is_dir(follow_symlinks=False):
                shutil.rmtree(entry.path)
            else:
                os.remove(entry.path)
            removed.append(entry.path)
            log.info(f"[INSTALL] Removed stale staging entry {entry.path}")
        except OSError as e:
            log.warning(f"[INSTALL] Could not remove {entry.path}: {e}")
    return removed
