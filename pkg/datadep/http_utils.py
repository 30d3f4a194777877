"""
HTTP Utilities for datadep
Session setup, filename inference, streamed downloads and link checks
"""

import os
from dataclasses import dataclass
from email.message import Message
from typing import Callable, Optional, Tuple
from urllib.parse import unquote, urlparse

import requests

from . import __version__
from .config import CONNECT_TIMEOUT_SECS, DEFAULT_TIMEOUT_SECS
from .errors import DownloadFailedError
from .logging_utils import get_logger
from .registry import RemoteFile
from .staging import StagingArea
from .text_cleaner import FALLBACK_FILENAME, sanitize_filename

log = get_logger(__name__)

MAX_REDIRECTS = 10
CHUNK_SIZE = 64 * 1024
USER_AGENT = f"datadep/{__version__}"

ProgressCallback = Callable[[str, int, Optional[int]], None]


@dataclass(frozen=True)
class FetchedFile:
    url: str
    filename: str
    path: str
    byte_count: int


@dataclass(frozen=True)
class RemoteCheck:
    url: str
    ok: bool
    status: Optional[int] = None
    method: str = "HEAD"
    error: Optional[str] = None


def make_session() -> requests.Session:
    """
    Get a configured HTTP session

    Returns:
        requests.Session sending the datadep User-Agent
    """
    session = requests.Session()
    session.headers["User-Agent"] = USER_AGENT
    session.max_redirects = MAX_REDIRECTS
    return session


def timeouts(read_secs: Optional[float] = None) -> Tuple[float, float]:
    return (CONNECT_TIMEOUT_SECS, float(read_secs or DEFAULT_TIMEOUT_SECS))


def infer_filename(url: str, content_disposition: Optional[str] = None) -> str:
    """
    Pick a local filename for a download

    Precedence: Content-Disposition filename, last URL path segment,
    then "download". The result is always sanitized.

    Args:
        url: Absolute URL that was requested
        content_disposition: Raw header value, if the server sent one

    Returns:
        A single, safe path segment
    """
    if content_disposition:
        header = Message()
        header["content-disposition"] = content_disposition
        try:
            filename = header.get_filename()
        except (ValueError, LookupError):
            filename = None
        if filename:
            return sanitize_filename(filename)

    path = urlparse(url).path
    segments = [s for s in path.split("/") if s]
    if segments:
        return sanitize_filename(unquote(segments[-1]))

    return FALLBACK_FILENAME


def download(
    remote: RemoteFile,
    staging: StagingArea,
    http_client: requests.Session,
    timeout: Optional[Tuple[float, float]] = None,
    progress: Optional[ProgressCallback] = None,
) -> FetchedFile:
    """
    Stream one remote file into the staging area

    The body is written to ``<filename>.part`` and renamed on completion.

    Args:
        remote: Source URL and optional filename override
        staging: Existing staging area
        http_client: Session used for the GET
        timeout: (connect, read) seconds
        progress: Called with (filename, bytes so far, total or None)

    Returns:
        FetchedFile describing the written file

    Raises:
        DownloadFailedError: status >= 400, timeout, redirect loop or I/O error
    """
    url = remote.url
    timeout = timeout or timeouts()
    target = None
    part = None

    try:
        with http_client.get(
            url, stream=True, timeout=timeout, allow_redirects=True
        ) as response:
            if response.status_code >= 400:
                raise DownloadFailedError(
                    url, DownloadFailedError.STATUS, status=response.status_code
                )

            filename = remote.filename_override or infer_filename(
                url, response.headers.get("Content-Disposition")
            )
            target = staging.claim(filename)
            if target is None:
                raise DownloadFailedError(
                    url,
                    DownloadFailedError.IO,
                    detail=f"another source already produced {filename!r}; set a filename",
                )

            total = response.headers.get("Content-Length")
            total = int(total) if total and total.isdigit() else None

            part = target + ".part"
            byte_count = 0
            with open(part, "wb") as f:
                for chunk in response.iter_content(CHUNK_SIZE):
                    if not chunk:
                        continue
                    f.write(chunk)
                    byte_count += len(chunk)
                    if progress is not None:
                        progress(filename, byte_count, total)
            os.replace(part, target)
            part = None

    except requests.TooManyRedirects as e:
        raise DownloadFailedError(
            url, DownloadFailedError.TOO_MANY_REDIRECTS, detail=str(e)
        ) from e
    except requests.Timeout as e:
        raise DownloadFailedError(url, DownloadFailedError.TIMEOUT, detail=str(e)) from e
    except requests.RequestException as e:
        raise DownloadFailedError(url, DownloadFailedError.IO, detail=str(e)) from e
    except OSError as e:
        raise DownloadFailedError(url, DownloadFailedError.IO, detail=str(e)) from e
    finally:
        if part is not None:
            try:
                os.remove(part)
            except OSError:
                pass
            if target is not None:
                staging.discard(target)

    staging.add(target)
    log.info(f"[FETCH] {url} -> {os.path.basename(target)} ({byte_count} bytes)")
    return FetchedFile(url, os.path.basename(target), target, byte_count)


def check_url(
    http_client: requests.Session, url: str, timeout: Optional[Tuple[float, float]] = None
) -> RemoteCheck:
    """
    Probe a URL without downloading it

    HEAD first; servers rejecting HEAD (405/501) get a one-byte range GET.

    Args:
        http_client: Session to use
        url: URL to probe
        timeout: (connect, read) seconds

    Returns:
        RemoteCheck, ok iff the final status is below 400
    """
    timeout = timeout or timeouts()
    method = "HEAD"
    try:
        response = http_client.head(url, timeout=timeout, allow_redirects=True)
        response.close()
        if response.status_code in (405, 501):
            method = "GET"
            response = http_client.get(
                url,
                headers={"Range": "bytes=0-0"},
                stream=True,
                timeout=timeout,
                allow_redirects=True,
            )
            response.close()
    except requests.RequestException as e:
        log.debug(f"[FETCH] {method} {url} failed: {e}")
        return RemoteCheck(url, False, None, method, type(e).__name__)

    return RemoteCheck(url, response.status_code < 400, response.status_code, method)
