"""
Archive Utilities for datadep
Post-fetch unpacking of zip, tar and gzip files with path traversal protection
"""

import gzip
import lzma
import os
import shutil
import tarfile
import zipfile
import zlib
from typing import List, Optional

from .errors import PostFetchFailedError
from .logging_utils import get_logger
from .registry import PostFetchAction
from .staging import StagingArea

log = get_logger(__name__)

TAR_SUFFIXES = (".tar.gz", ".tgz", ".tar.bz2", ".tar.xz", ".tar")
ZIP_SUFFIXES = (".zip",)
GZIP_SUFFIXES = (".gz",)

_CORRUPT_ERRORS = (
    zipfile.BadZipFile,
    tarfile.TarError,
    gzip.BadGzipFile,
    lzma.LZMAError,
    zlib.error,
    EOFError,
)


def archive_kind(filename: str) -> Optional[str]:
    """
    Classify a file by suffix

    Args:
        filename: File name or path

    Returns:
        "tar", "zip", "gz" or None for non-archives
    """
    lower = filename.lower()
    if lower.endswith(TAR_SUFFIXES):
        return "tar"
    if lower.endswith(ZIP_SUFFIXES):
        return "zip"
    if lower.endswith(GZIP_SUFFIXES):
        return "gz"
    return None


def _escapes(dest_root: str, member_name: str) -> bool:
    name = member_name.replace("\\", "/")
    if name.startswith("/") or os.path.isabs(name) or (len(name) > 1 and name[1] == ":"):
        return True
    if ".." in name.split("/"):
        return True
    target = os.path.normpath(os.path.join(dest_root, name))
    return os.path.commonpath([dest_root, target]) != dest_root


def _check_zip(archive: zipfile.ZipFile, dest_root: str, path: str) -> None:
    for member in archive.namelist():
        if _escapes(dest_root, member):
            log.error(f"[SECURITY] Blocked unsafe path in archive {path}: {member}")
            raise PostFetchFailedError(
                path, PostFetchFailedError.PATH_TRAVERSAL, f"entry {member!r}"
            )


def _safe_tar_members(
    archive: tarfile.TarFile, dest_root: str, path: str
) -> List[tarfile.TarInfo]:
    members = []
    for member in archive.getmembers():
        if _escapes(dest_root, member.name):
            log.error(f"[SECURITY] Blocked unsafe path in archive {path}: {member.name}")
            raise PostFetchFailedError(
                path, PostFetchFailedError.PATH_TRAVERSAL, f"entry {member.name!r}"
            )
        if member.issym() or member.islnk():
            link_base = os.path.dirname(member.name) if member.issym() else ""
            link_target = os.path.join(link_base, member.linkname)
            if os.path.isabs(member.linkname) or _escapes(dest_root, link_target):
                log.error(f"[SECURITY] Blocked escaping link in {path}: {member.name}")
                raise PostFetchFailedError(
                    path, PostFetchFailedError.PATH_TRAVERSAL, f"link {member.name!r}"
                )
        if member.isdev() or member.isfifo():
            log.warning(f"[EXTRACT] Skipping special file {member.name} in {path}")
            continue
        members.append(member)
    return members


def _extract_tar(path: str, dest_root: str) -> None:
    with tarfile.open(path, mode="r:*") as archive:
        members = _safe_tar_members(archive, dest_root, path)
        if hasattr(tarfile, "data_filter"):
            archive.extractall(dest_root, members=members, filter="data")
        else:
            archive.extractall(dest_root, members=members)


def _extract_zip(path: str, dest_root: str) -> None:
    with zipfile.ZipFile(path) as archive:
        _check_zip(archive, dest_root, path)
        archive.extractall(dest_root)


def _extract_gz(path: str, dest_root: str) -> str:
    basename = os.path.basename(path)
    target = os.path.join(dest_root, basename[: -len(".gz")] or "download")
    part = target + ".part"
    try:
        with gzip.open(path, "rb") as src, open(part, "wb") as dst:
            shutil.copyfileobj(src, dst)
        os.replace(part, target)
    finally:
        if os.path.exists(part):
            os.remove(part)
    return target


def unpack(path: str, dest_root: str) -> None:
    """
    Extract a single archive into ``dest_root``

    Entries that would land outside ``dest_root`` abort the whole
    extraction before anything is written.

    Args:
        path: Archive file
        dest_root: Destination directory

    Raises:
        PostFetchFailedError: corrupt-archive, unsupported-format,
            path-traversal-entry or io
    """
    kind = archive_kind(path)
    if kind is None:
        raise PostFetchFailedError(path, PostFetchFailedError.UNSUPPORTED_FORMAT)

    dest_root = os.path.realpath(dest_root)
    try:
        if kind == "tar":
            _extract_tar(path, dest_root)
        elif kind == "zip":
            _extract_zip(path, dest_root)
        else:
            _extract_gz(path, dest_root)
    except PostFetchFailedError:
        raise
    except _CORRUPT_ERRORS as e:
        raise PostFetchFailedError(
            path, PostFetchFailedError.CORRUPT_ARCHIVE, str(e)
        ) from e
    except OSError as e:
        raise PostFetchFailedError(path, PostFetchFailedError.IO, str(e)) from e

    log.info(f"[EXTRACT] Unpacked {os.path.basename(path)}")


def post_fetch(action: PostFetchAction, staging: StagingArea) -> None:
    """
    Apply the declared post-fetch action inside the staging area

    Args:
        action: NONE, UNPACK_AUTO or UNPACK_THEN_DELETE
        staging: Staging area whose files were already checksum-verified

    Raises:
        PostFetchFailedError: see ``unpack``
    """
    if action is PostFetchAction.NONE:
        return

    for path in list(staging.files):
        if archive_kind(path) is None:
            log.debug(f"[EXTRACT] {os.path.basename(path)} is not an archive, kept as is")
            continue
        unpack(path, staging.root)
        if action is PostFetchAction.UNPACK_THEN_DELETE:
            try:
                os.remove(path)
            except OSError as e:
                raise PostFetchFailedError(path, PostFetchFailedError.IO, str(e)) from e
            staging.files.remove(path)
