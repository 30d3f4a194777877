"""
Manifest Parsing for datadep
Strict reader and canonical writer for DataDeps.toml
"""

import difflib
import re
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

import tomli_w

from .errors import DataDepError, InvalidNameError, ManifestParseError
from .registry import (
    ChecksumAlgorithm,
    ChecksumMode,
    ChecksumSpec,
    DataDepSpec,
    DepKind,
    PostFetchAction,
    Registry,
    RemoteFile,
    check_spec,
    validate_name,
)

FORMAT_VERSION = 1

SYNTAX = "syntax"
UNKNOWN_FIELD = "unknown-field"
MISSING_FIELD = "missing-field"
INVALID_VALUE = "invalid-value"
DUPLICATE_NAME = "duplicate-name"
UNSUPPORTED_VERSION = "unsupported-version"

TOP_LEVEL_FIELDS = ("version", "datadep")

# canonical output order
DEP_FIELDS = (
    "name",
    "message",
    "author",
    "license",
    "citation",
    "website",
    "manual",
    "urls",
    "filename",
    "sha256",
    "post_fetch",
    "timeout_secs",
)

PROVENANCE_FIELDS = ("author", "license", "citation", "website")
IGNORE_CHECKSUM = "ignore"

_HEX64 = re.compile(r"[0-9a-fA-F]{64}")
_DEP_HEADER = re.compile(r"^\s*\[\[\s*datadep\s*\]\]")
_TOML_LINE = re.compile(r"at line (\d+)")


@dataclass(frozen=True)
class ManifestIssue:
    kind: str
    message: str
    line: Optional[int] = None
    field: Optional[str] = None
    dep: Optional[str] = None

    def __str__(self) -> str:
        where = f"line {self.line}: " if self.line is not None else ""
        what = f"{self.field}: " if self.field else ""
        dep = f"[{self.dep}] " if self.dep else ""
        return f"{where}{dep}{what}{self.kind}: {self.message}"


@dataclass(frozen=True)
class Manifest:
    deps: Tuple[DataDepSpec, ...] = ()
    format_version: int = FORMAT_VERSION

    def to_registry(self) -> Registry:
        return Registry(self.deps)


class _Lines:
    """Maps dependency tables and their keys back to source lines"""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.headers = [
            number
            for number, line in enumerate(self.lines, start=1)
            if _DEP_HEADER.match(line)
        ]

    def dep(self, index: int) -> Optional[int]:
        if index < len(self.headers):
            return self.headers[index]
        return None

    def field(self, index: int, field: Optional[str]) -> Optional[int]:
        start = self.dep(index)
        if start is None or field is None:
            return start
        end = self.headers[index + 1] if index + 1 < len(self.headers) else len(self.lines) + 1
        pattern = re.compile(rf"^\s*\"?{re.escape(field)}\"?\s*=")
        for number in range(start + 1, end):
            if pattern.match(self.lines[number - 1]):
                return number
        return start

    def top(self, field: str) -> Optional[int]:
        pattern = re.compile(rf"^\s*{re.escape(field)}\s*=")
        for number, line in enumerate(self.lines, start=1):
            if pattern.match(line):
                return number
        return None


class _DepParser:
    """Validates one [[datadep]] table, collecting issues"""

    def __init__(self, index: int, table: Dict[str, Any], lines: _Lines):
        self.index = index
        self.table = table
        self.lines = lines
        self.issues: List[ManifestIssue] = []
        name = table.get("name")
        self.label = name if isinstance(name, str) and name else f"datadep #{index + 1}"

    def issue(self, kind: str, field: Optional[str], message: str) -> None:
        self.issues.append(
            ManifestIssue(kind, message, self.lines.field(self.index, field), field, self.label)
        )

    def string(self, field: str, required: bool = False) -> Optional[str]:
        if field not in self.table:
            if required:
                self.issue(MISSING_FIELD, field, "required field is missing")
            return None
        value = self.table[field]
        if not isinstance(value, str):
            self.issue(INVALID_VALUE, field, f"expected a string, got {type(value).__name__}")
            return None
        return value

    def string_list(self, field: str) -> Optional[List[str]]:
        value = self.table.get(field)
        if isinstance(value, str):
            return [value]
        if isinstance(value, list) and all(isinstance(v, str) for v in value):
            return list(value)
        self.issue(INVALID_VALUE, field, "expected a string or an array of strings")
        return None

    def parse(self) -> Optional[DataDepSpec]:
        for key in self.table:
            if key not in DEP_FIELDS:
                close = difflib.get_close_matches(key, DEP_FIELDS, n=1)
                hint = f" (did you mean {close[0]!r}?)" if close else ""
                self.issue(UNKNOWN_FIELD, key, f"unknown field {key!r}{hint}")

        name = self.string("name", required=True)
        if name is not None:
            try:
                validate_name(name)
            except InvalidNameError as e:
                self.issue(INVALID_VALUE, "name", str(e))
                name = None

        message = self.string("message", required=True)
        provenance = {field: self.string(field) for field in PROVENANCE_FIELDS}

        manual = self.table.get("manual", False)
        if not isinstance(manual, bool):
            self.issue(INVALID_VALUE, "manual", "expected true or false")
            manual = False

        urls = self._urls(manual)
        filenames = self._filenames(urls)
        checksum = self._checksum(manual, urls)
        post_fetch = self._post_fetch()
        timeout = self._timeout()

        if self.issues or name is None or message is None:
            return None

        spec = DataDepSpec(
            name=name,
            message=message,
            remote_sources=tuple(
                RemoteFile(url, filename) for url, filename in zip(urls, filenames)
            ),
            checksum=checksum,
            post_fetch=post_fetch,
            kind=DepKind.MANUAL if manual else DepKind.MANAGED,
            timeout_secs=timeout,
            **provenance,
        )
        for problem in check_spec(spec):
            self.issue(INVALID_VALUE, None, problem)
        return None if self.issues else spec

    def _urls(self, manual: bool) -> List[str]:
        if "urls" not in self.table:
            if not manual:
                self.issue(MISSING_FIELD, "urls", "required unless manual = true")
            return []
        if manual:
            self.issue(INVALID_VALUE, "urls", "manual dependencies are never downloaded")
            return []
        value = self.table["urls"]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            self.issue(INVALID_VALUE, "urls", "expected an array of strings")
            return []
        if not value:
            self.issue(INVALID_VALUE, "urls", "at least one URL is required")
        for url in value:
            if not re.match(r"^https?://[^/\s]+", url):
                self.issue(INVALID_VALUE, "urls", f"not an absolute http(s) URL: {url!r}")
        return list(value)

    def _filenames(self, urls: List[str]) -> List[Optional[str]]:
        if "filename" not in self.table:
            return [None] * len(urls)
        names = self.string_list("filename")
        if names is None:
            return [None] * len(urls)
        if len(names) != len(urls):
            self.issue(
                INVALID_VALUE,
                "filename",
                f"{len(names)} filename(s) for {len(urls)} URL(s)",
            )
            return [None] * len(urls)
        result = []
        for name in names:
            if name == "":
                result.append(None)
            elif name in (".", "..") or any(c in name for c in "/\\\x00"):
                self.issue(INVALID_VALUE, "filename", f"not a plain file name: {name!r}")
                result.append(None)
            else:
                result.append(name)
        return result

    def _checksum(self, manual: bool, urls: List[str]) -> ChecksumSpec:
        if "sha256" not in self.table:
            return ChecksumSpec.absent()
        if manual:
            self.issue(INVALID_VALUE, "sha256", "manual dependencies are not checksummed")
            return ChecksumSpec.absent()
        if self.table["sha256"] == IGNORE_CHECKSUM:
            return ChecksumSpec.ignore()

        values = self.string_list("sha256")
        if values is None:
            return ChecksumSpec.absent()

        digests = []
        for value in values:
            algorithm, sep, digest = value.rpartition(":")
            if sep and algorithm.lower() != ChecksumAlgorithm.SHA256.value:
                self.issue(
                    INVALID_VALUE, "sha256", f"unsupported checksum algorithm {algorithm!r}"
                )
                continue
            if not _HEX64.fullmatch(digest):
                self.issue(
                    INVALID_VALUE, "sha256", f"not a 64 character hex digest: {value!r}"
                )
                continue
            digests.append(digest.lower())

        if len(values) != len(urls):
            self.issue(
                INVALID_VALUE, "sha256", f"{len(values)} digest(s) for {len(urls)} URL(s)"
            )
        return ChecksumSpec.enforce(digests)

    def _post_fetch(self) -> PostFetchAction:
        value = self.table.get("post_fetch", PostFetchAction.NONE.value)
        try:
            return PostFetchAction(value)
        except ValueError:
            allowed = ", ".join(repr(a.value) for a in PostFetchAction)
            self.issue(INVALID_VALUE, "post_fetch", f"{value!r} is not one of {allowed}")
            return PostFetchAction.NONE

    def _timeout(self) -> Optional[int]:
        if "timeout_secs" not in self.table:
            return None
        value = self.table["timeout_secs"]
        if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
            self.issue(INVALID_VALUE, "timeout_secs", "expected a positive integer")
            return None
        return value


def parse_manifest(text: str, source: str = "<manifest>") -> Manifest:
    """
    Parse DataDeps.toml text

    Every problem is collected before failing, each with its line and field.

    Args:
        text: File content
        source: Name used in error messages

    Returns:
        Manifest whose specs pass check_spec

    Raises:
        ManifestParseError: carrying the list of ManifestIssue
    """
    try:
        document = tomllib.loads(text)
    except (tomllib.TOMLDecodeError, RecursionError, ValueError, TypeError) as e:
        match = _TOML_LINE.search(str(e))
        line = int(match.group(1)) if match else None
        raise ManifestParseError([ManifestIssue(SYNTAX, str(e), line)], source) from e

    lines = _Lines(text)
    issues: List[ManifestIssue] = []

    for key in document:
        if key not in TOP_LEVEL_FIELDS:
            issues.append(
                ManifestIssue(UNKNOWN_FIELD, f"unknown top-level field {key!r}", lines.top(key), key)
            )

    if "version" not in document:
        issues.append(ManifestIssue(MISSING_FIELD, "add `version = 1`", None, "version"))
    else:
        version = document["version"]
        if isinstance(version, bool) or not isinstance(version, int):
            issues.append(
                ManifestIssue(INVALID_VALUE, "expected an integer", lines.top("version"), "version")
            )
        elif version != FORMAT_VERSION:
            issues.append(
                ManifestIssue(
                    UNSUPPORTED_VERSION,
                    f"format version {version} is not supported (expected {FORMAT_VERSION})",
                    lines.top("version"),
                    "version",
                )
            )

    tables = document.get("datadep", [])
    if not isinstance(tables, list) or not all(isinstance(t, dict) for t in tables):
        issues.append(
            ManifestIssue(INVALID_VALUE, "expected [[datadep]] tables", lines.top("datadep"), "datadep")
        )
        tables = []

    specs = []
    seen: Dict[str, str] = {}
    for index, table in enumerate(tables):
        parser = _DepParser(index, table, lines)
        spec = parser.parse()
        issues.extend(parser.issues)

        name = table.get("name")
        if isinstance(name, str) and name:
            folded = name.casefold()
            if folded in seen:
                issues.append(
                    ManifestIssue(
                        DUPLICATE_NAME,
                        f"{name!r} is already declared as {seen[folded]!r}",
                        lines.field(index, "name"),
                        "name",
                        name,
                    )
                )
                continue
            seen[folded] = name
        if spec is not None:
            specs.append(spec)

    if issues:
        raise ManifestParseError(issues, source)
    return Manifest(tuple(specs))


def load_manifest(path: str) -> Manifest:
    """
    Read and parse a manifest file

    Args:
        path: Path to DataDeps.toml

    Returns:
        Manifest
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise DataDepError(f"Cannot read manifest {path}: {e.strerror or e}") from e
    except UnicodeDecodeError as e:
        raise ManifestParseError([ManifestIssue(SYNTAX, f"not UTF-8: {e}")], path) from e
    return parse_manifest(text, source=path)


def _dep_table(spec: DataDepSpec) -> Dict[str, Any]:
    table: Dict[str, Any] = {"name": spec.name, "message": spec.message}
    for field in PROVENANCE_FIELDS:
        value = getattr(spec, field)
        if value is not None:
            table[field] = value

    if spec.kind is DepKind.MANUAL:
        table["manual"] = True
    else:
        table["urls"] = spec.urls
        overrides = [r.filename_override for r in spec.remote_sources]
        if any(o is not None for o in overrides):
            table["filename"] = [o or "" for o in overrides]

    if spec.checksum.mode is ChecksumMode.IGNORE:
        table["sha256"] = IGNORE_CHECKSUM
    elif spec.checksum.mode is ChecksumMode.ENFORCE:
        digests = list(spec.checksum.digests)
        table["sha256"] = digests[0] if len(digests) == 1 else digests

    if spec.post_fetch is not PostFetchAction.NONE:
        table["post_fetch"] = spec.post_fetch.value
    if spec.timeout_secs is not None:
        table["timeout_secs"] = spec.timeout_secs

    return {key: table[key] for key in DEP_FIELDS if key in table}


def write_manifest(manifest: Manifest) -> str:
    """
    Serialize a manifest canonically

    Optional fields at their defaults are omitted; output is byte-identical
    for equal manifests.

    Args:
        manifest: Valid manifest

    Returns:
        DataDeps.toml text
    """
    document: Dict[str, Any] = {"version": manifest.format_version}
    if manifest.deps:
        document["datadep"] = [_dep_table(spec) for spec in manifest.deps]
    return tomli_w.dumps(document)


def manifest_snippet(spec: DataDepSpec, digests: Sequence[str]) -> str:
    """
    A [[datadep]] block pinning ``digests``, ready to paste into DataDeps.toml

    Args:
        spec: Spec that was fetched without checksums
        digests: Computed digests in remote-source order

    Returns:
        TOML text
    """
    pinned = replace(spec, checksum=ChecksumSpec.enforce(digests))
    return tomli_w.dumps({"datadep": [_dep_table(pinned)]})
