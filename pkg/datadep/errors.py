"""
Error Types for datadep
Every failure the library can surface, each carrying the CLI exit status it maps to
"""

from typing import List, Optional, Sequence


class ExitStatus:
    """Process exit codes used by the ``datadep`` command"""

    SUCCESS = 0
    FAILURE = 1
    USAGE = 2
    DECLINED = 3
    CHECKSUM_MISMATCH = 4
    NOT_REGISTERED = 5
    DOWNLOADS_DISABLED = 6
    MANUAL_MISSING = 7


class DataDepError(Exception):
    """Base class for all datadep errors"""

    exit_code = ExitStatus.FAILURE


class InvalidNameError(DataDepError, ValueError):
    """A dependency name that cannot be used as a directory name"""

    EMPTY = "empty"
    ILLEGAL_CHAR = "illegal-char"
    TOO_LONG = "too-long"
    RESERVED = "reserved"

    def __init__(self, name: str, reason: str, position: Optional[int] = None):
        self.name = name
        self.reason = reason
        self.position = position
        if reason == self.ILLEGAL_CHAR:
            detail = f"illegal character {name[position]!r} at position {position}"
        elif reason == self.EMPTY:
            detail = "name is empty"
        elif reason == self.TOO_LONG:
            detail = f"name is {len(name)} characters long (max 128)"
        else:
            detail = "name is reserved"
        super().__init__(f"Invalid data dependency name {name!r}: {detail}")


class RegistrationError(DataDepError):
    """A spec could not be added to a registry"""

    DUPLICATE_NAME = "duplicate-name"
    INVALID_SPEC = "invalid-spec"

    def __init__(self, name: str, reason: str, detail: str = ""):
        self.name = name
        self.reason = reason
        self.detail = detail
        message = f"Cannot register {name!r}: {reason}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class NotRegisteredError(DataDepError, KeyError):
    exit_code = ExitStatus.NOT_REGISTERED

    def __init__(self, name: str, suggestion: Optional[str] = None):
        self.name = name
        self.suggestion = suggestion
        message = f"No data dependency named {name!r} is registered"
        if suggestion is not None:
            message += f"; did you mean {suggestion!r}?"
        super().__init__(message)

    def __str__(self) -> str:
        # KeyError would otherwise repr() the message
        return self.args[0]


class ManualDataDepMissingError(DataDepError):
    """A manual dependency was requested but is not installed anywhere"""

    exit_code = ExitStatus.MANUAL_MISSING

    def __init__(self, name: str, message: str, locations: Sequence[str]):
        self.name = name
        self.message = message
        self.locations = list(locations)
        lines = [
            f"The manual data dependency {name!r} is not installed.",
            "It cannot be downloaded automatically. Its description reads:",
            "",
            message,
            "",
            "Place its files in a directory named after it under one of:",
        ]
        lines.extend(f"  {loc}" for loc in self.locations)
        super().__init__("\n".join(lines))


class DeclinedError(DataDepError):
    exit_code = ExitStatus.DECLINED

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"Download of {name!r} was declined; nothing was fetched")


class DownloadsDisabledError(DataDepError):
    exit_code = ExitStatus.DOWNLOADS_DISABLED

    def __init__(self, name: str):
        self.name = name
        super().__init__(
            f"{name!r} is not available locally and DATADEP_DISABLE_DOWNLOAD is set"
        )


class DownloadFailedError(DataDepError):
    """Transfer of one remote file failed"""

    STATUS = "status"
    IO = "io"
    TOO_MANY_REDIRECTS = "too-many-redirects"
    TIMEOUT = "timeout"

    def __init__(
        self, url: str, cause: str, status: Optional[int] = None, detail: str = ""
    ):
        self.url = url
        self.cause = cause
        self.status = status
        self.detail = detail
        message = f"Download of {url} failed: {cause}"
        if status is not None:
            message += f" {status}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class ChecksumMismatchError(DataDepError):
    exit_code = ExitStatus.CHECKSUM_MISMATCH

    def __init__(self, file: str, expected: str, computed: str):
        self.file = file
        self.expected = expected
        self.computed = computed
        super().__init__(
            f"Checksum mismatch for {file}: expected sha256 {expected}, got {computed}"
        )


class ChecksumIoError(DataDepError):
    def __init__(self, path: str, detail: str = ""):
        self.path = path
        super().__init__(f"Cannot read {path} for hashing: {detail}")


class PostFetchFailedError(DataDepError):
    """Unpacking a downloaded file failed"""

    CORRUPT_ARCHIVE = "corrupt-archive"
    UNSUPPORTED_FORMAT = "unsupported-format"
    PATH_TRAVERSAL = "path-traversal-entry"
    IO = "io"

    def __init__(self, file: str, cause: str, detail: str = ""):
        self.file = file
        self.cause = cause
        self.detail = detail
        message = f"Post-fetch processing of {file} failed: {cause}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class InstallFailedError(DataDepError):
    def __init__(self, final_dir: str, detail: str = ""):
        self.final_dir = final_dir
        self.detail = detail
        super().__init__(f"Could not install into {final_dir}: {detail}")


class NoWritableStoreError(DataDepError):
    def __init__(self, attempts: List[tuple]):
        self.attempts = list(attempts)
        if self.attempts:
            tried = "; ".join(f"{path}: {err}" for path, err in self.attempts)
        else:
            tried = "no candidate directory (home directory unknown)"
        super().__init__(f"No writable data dependency store: {tried}")


class ManifestParseError(DataDepError):
    """All problems found in a manifest, collected rather than stopping at the first"""

    def __init__(self, issues: list, source: str = "<manifest>"):
        self.issues = list(issues)
        self.source = source
        lines = [f"{source}: {len(self.issues)} problem(s)"]
        lines.extend(f"  {issue}" for issue in self.issues)
        super().__init__("\n".join(lines))
