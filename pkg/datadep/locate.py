"""
Load Path Utilities for datadep
Builds the ordered list of storage directories and finds installed dependencies
"""

import ntpath
import os
import posixpath
import sys
from dataclasses import dataclass
from enum import Enum
from typing import List, Mapping, Optional, Tuple

from .config import ENV_LOAD_PATH, ENV_STORE
from .errors import NoWritableStoreError
from .logging_utils import get_logger

log = get_logger(__name__)

STORE_DIRNAME = "datadeps"
STAGING_DIRNAME = ".staging"


class Platform(str, Enum):
    POSIX = "posix"
    WINDOWS = "windows"


class Origin(str, Enum):
    ENV = "env"
    WORKING_DIR = "working-dir"
    USER_STORE = "user-store"
    SYSTEM_STORE = "system-store"


class SatisfiedBy(str, Enum):
    FOUND_LOCAL = "found-local"
    FETCHED = "fetched"


@dataclass(frozen=True)
class LoadPathEntry:
    directory: str
    origin: Origin


@dataclass(frozen=True)
class LoadPath:
    entries: Tuple[LoadPathEntry, ...]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def directories(self, origin: Optional[Origin] = None) -> List[str]:
        return [e.directory for e in self.entries if origin is None or e.origin is origin]

    def prepend(self, directory: str, origin: Origin = Origin.ENV) -> "LoadPath":
        return LoadPath((LoadPathEntry(directory, origin),) + self.entries)


@dataclass(frozen=True)
class Resolution:
    path: str
    satisfied_by: SatisfiedBy
    origin: Optional[Origin] = None


def current_platform() -> Platform:
    return Platform.WINDOWS if sys.platform.startswith("win") else Platform.POSIX


def _user_data_dir(env: Mapping[str, str], platform: Platform) -> Optional[str]:
    if platform is Platform.WINDOWS:
        local = env.get("LOCALAPPDATA")
        if local and ntpath.isabs(local):
            return local
        profile = env.get("USERPROFILE")
        if profile and ntpath.isabs(profile):
            return ntpath.join(profile, "AppData", "Local")
        return None

    # relative XDG values are invalid per the base directory spec
    xdg = env.get("XDG_DATA_HOME")
    if xdg and posixpath.isabs(xdg):
        return xdg
    home = env.get("HOME")
    if home and posixpath.isabs(home):
        return posixpath.join(home, ".local", "share")
    return None


def build_load_path(
    env: Mapping[str, str], platform: Platform, working_dir: str
) -> LoadPath:
    """
    Build the ordered list of directories searched for dependencies

    Order: DATADEP_LOAD_PATH entries, ./datadeps, the user data store,
    the system store. Pure function of its arguments.

    Args:
        env: Environment mapping
        platform: Target platform conventions
        working_dir: Absolute working directory

    Returns:
        LoadPath
    """
    pathmod = ntpath if platform is Platform.WINDOWS else posixpath
    separator = ";" if platform is Platform.WINDOWS else ":"

    if not pathmod.isabs(working_dir):
        raise ValueError(f"working_dir must be absolute: {working_dir!r}")

    def absolute(path: str) -> str:
        return pathmod.normpath(pathmod.join(working_dir, path))

    entries = []
    for segment in env.get(ENV_LOAD_PATH, "").split(separator):
        if segment:
            entries.append(LoadPathEntry(absolute(segment), Origin.ENV))

    entries.append(
        LoadPathEntry(pathmod.join(working_dir, STORE_DIRNAME), Origin.WORKING_DIR)
    )

    user_dir = _user_data_dir(env, platform)
    if user_dir is not None:
        entries.append(
            LoadPathEntry(
                pathmod.normpath(pathmod.join(user_dir, STORE_DIRNAME)),
                Origin.USER_STORE,
            )
        )

    if platform is Platform.WINDOWS:
        program_data = env.get("PROGRAMDATA") or "C:\\ProgramData"
        system_dir = ntpath.join(program_data, STORE_DIRNAME)
    else:
        system_dir = posixpath.join("/usr", "share", STORE_DIRNAME)
    entries.append(LoadPathEntry(system_dir, Origin.SYSTEM_STORE))

    return LoadPath(tuple(entries))


def default_load_path(env: Optional[Mapping[str, str]] = None) -> LoadPath:
    """Load path for the running process"""
    if env is None:
        env = os.environ
    return build_load_path(env, current_platform(), os.getcwd())


def _is_populated_dir(path: str) -> bool:
    if not os.path.isdir(path):
        return False
    with os.scandir(path) as it:
        return any(True for _ in it)


def search(load_path: LoadPath, name: str) -> Optional[Resolution]:
    """
    Find the first load-path entry holding a non-empty ``<entry>/<name>``

    Performs no writes and no network access.

    Args:
        load_path: Directories to search, in precedence order
        name: Already validated dependency name

    Returns:
        Resolution, or None when the dependency is not installed
    """
    for entry in load_path:
        candidate = os.path.join(entry.directory, name)
        try:
            if _is_populated_dir(candidate):
                log.debug(f"[SEARCH] {name} found in {entry.directory} ({entry.origin.value})")
                return Resolution(candidate, SatisfiedBy.FOUND_LOCAL, entry.origin)
        except OSError as e:
            log.warning(f"[SEARCH] Skipping unreadable {candidate}: {e}")
    log.debug(f"[SEARCH] {name} not found in {len(load_path)} location(s)")
    return None


def planned_store_dir(load_path: LoadPath, env: Mapping[str, str]) -> Optional[str]:
    """
    The store directory ``store_dir`` would pick, without touching the disk

    Returns:
        Absolute path, or None when no candidate exists
    """
    override = env.get(ENV_STORE)
    if override:
        return os.path.abspath(override)
    for origin in (Origin.USER_STORE, Origin.SYSTEM_STORE):
        candidates = load_path.directories(origin)
        if candidates:
            return candidates[0]
    return None


def _ensure_writable(path: str) -> None:
    os.makedirs(path, exist_ok=True)
    if not os.access(path, os.W_OK | os.X_OK):
        raise PermissionError(f"not writable: {path}")


def store_dir(load_path: LoadPath, env: Mapping[str, str]) -> str:
    """
    The writable directory new dependencies are installed into

    DATADEP_STORE wins; otherwise the user store, then the system store.
    The directory is created if needed.

    Args:
        load_path: Current load path
        env: Environment mapping

    Returns:
        Absolute path of an existing writable directory

    Raises:
        NoWritableStoreError: listing each attempted path and its error
    """
    override = env.get(ENV_STORE)
    if override:
        candidates = [os.path.abspath(override)]
    else:
        candidates = load_path.directories(Origin.USER_STORE)[:1]
        candidates += load_path.directories(Origin.SYSTEM_STORE)[:1]

    attempts = []
    for candidate in candidates:
        try:
            _ensure_writable(candidate)
            return candidate
        except OSError as e:
            log.debug(f"[INSTALL] Store candidate {candidate} rejected: {e}")
            attempts.append((candidate, str(e)))

    raise NoWritableStoreError(attempts)


def with_store(load_path: LoadPath, env: Mapping[str, str]) -> LoadPath:
    """
    Append the DATADEP_STORE directory when the load path does not list it

    Dependencies fetched into an explicit store must be found again by
    the next search; existing entries keep their precedence.
    """
    override = env.get(ENV_STORE)
    if not override:
        return load_path
    store = os.path.abspath(override)
    if any(os.path.normcase(e.directory) == os.path.normcase(store) for e in load_path):
        return load_path
    return LoadPath(load_path.entries + (LoadPathEntry(store, Origin.ENV),))
