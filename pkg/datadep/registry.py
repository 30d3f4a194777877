"""
Data Dependency Registry
Declaration types and the immutable name -> spec lookup table
"""

import re
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Iterator, List, Optional, Tuple
from urllib.parse import urlparse

from .errors import InvalidNameError, NotRegisteredError, RegistrationError

MAX_NAME_LENGTH = 128

_FIRST_CHAR = re.compile(r"[A-Za-z0-9_]")
_OTHER_CHAR = re.compile(r"[A-Za-z0-9_ .\-]")
_HEX_DIGEST = re.compile(r"[0-9a-f]{64}")
_WINDOWS_DEVICES = {"CON", "PRN", "AUX", "NUL"} | {
    f"{prefix}{n}" for prefix in ("COM", "LPT") for n in range(1, 10)
}


class ChecksumAlgorithm(str, Enum):
    SHA256 = "sha256"


class ChecksumMode(str, Enum):
    ENFORCE = "enforce"
    IGNORE = "ignore"
    ABSENT = "absent"


class PostFetchAction(str, Enum):
    NONE = "none"
    UNPACK_AUTO = "unpack"
    UNPACK_THEN_DELETE = "unpack-delete"


class DepKind(str, Enum):
    MANAGED = "managed"
    MANUAL = "manual"


@dataclass(frozen=True)
class ChecksumSpec:
    mode: ChecksumMode = ChecksumMode.ABSENT
    digests: Tuple[str, ...] = ()
    algorithm: ChecksumAlgorithm = ChecksumAlgorithm.SHA256

    @classmethod
    def enforce(cls, digests: Iterable[str]) -> "ChecksumSpec":
        return cls(ChecksumMode.ENFORCE, tuple(d.lower() for d in digests))

    @classmethod
    def ignore(cls) -> "ChecksumSpec":
        return cls(ChecksumMode.IGNORE)

    @classmethod
    def absent(cls) -> "ChecksumSpec":
        return cls(ChecksumMode.ABSENT)


@dataclass(frozen=True)
class RemoteFile:
    url: str
    filename_override: Optional[str] = None


@dataclass(frozen=True)
class DataDepSpec:
    """
    A declared data dependency

    ``message`` is the free-text provenance shown before download; the
    optional author/license/citation/website fields are appended to it
    by ``display_message``.
    """

    name: str
    message: str
    remote_sources: Tuple[RemoteFile, ...] = ()
    checksum: ChecksumSpec = field(default_factory=ChecksumSpec.absent)
    post_fetch: PostFetchAction = PostFetchAction.NONE
    kind: DepKind = DepKind.MANAGED
    timeout_secs: Optional[int] = None
    author: Optional[str] = None
    license: Optional[str] = None
    citation: Optional[str] = None
    website: Optional[str] = None

    @property
    def urls(self) -> List[str]:
        return [remote.url for remote in self.remote_sources]

    @property
    def display_message(self) -> str:
        parts = [self.message.rstrip()]
        for label, value in (
            ("Author", self.author),
            ("License", self.license),
            ("Please cite", self.citation),
            ("Website", self.website),
        ):
            if value:
                parts.append(f"{label}: {value}")
        return "\n".join(parts)


def validate_name(name: str) -> None:
    """
    Check that ``name`` can be used verbatim as one directory component

    Args:
        name: Candidate dependency name

    Raises:
        InvalidNameError: with reason empty, illegal-char, too-long or reserved
    """
    if not name:
        raise InvalidNameError(name, InvalidNameError.EMPTY)
    if name in (".", ".."):
        raise InvalidNameError(name, InvalidNameError.RESERVED)
    if len(name) > MAX_NAME_LENGTH:
        raise InvalidNameError(name, InvalidNameError.TOO_LONG)

    if not _FIRST_CHAR.fullmatch(name[0]):
        raise InvalidNameError(name, InvalidNameError.ILLEGAL_CHAR, 0)
    for position, char in enumerate(name[1:], start=1):
        if not _OTHER_CHAR.fullmatch(char):
            raise InvalidNameError(name, InvalidNameError.ILLEGAL_CHAR, position)

    # Windows silently drops trailing dots and spaces
    if name[-1] in ". ":
        raise InvalidNameError(name, InvalidNameError.ILLEGAL_CHAR, len(name) - 1)
    if name.split(".", 1)[0].rstrip(" ").upper() in _WINDOWS_DEVICES:
        raise InvalidNameError(name, InvalidNameError.RESERVED)


def is_valid_name(name: str) -> bool:
    try:
        validate_name(name)
    except InvalidNameError:
        return False
    return True


def _is_http_url(url: str) -> bool:
    try:
        parsed = urlparse(url)
    except ValueError:
        return False
    return parsed.scheme in ("http", "https") and bool(parsed.netloc)


def _is_single_segment(filename: str) -> bool:
    return (
        bool(filename)
        and filename not in (".", "..")
        and "/" not in filename
        and "\\" not in filename
        and "\x00" not in filename
    )


def check_spec(spec: DataDepSpec) -> List[str]:
    """
    List every rule a spec breaks

    Args:
        spec: Spec to check

    Returns:
        Human readable violations, empty when the spec is valid
    """
    problems = []

    try:
        validate_name(spec.name)
    except InvalidNameError as e:
        problems.append(str(e))

    if spec.kind is DepKind.MANUAL:
        if spec.remote_sources:
            problems.append("manual dependency must not have remote sources")
        if spec.checksum.mode is not ChecksumMode.ABSENT:
            problems.append("manual dependency must not declare a checksum")
    elif not spec.remote_sources:
        problems.append("managed dependency needs at least one remote source")

    for remote in spec.remote_sources:
        if not _is_http_url(remote.url):
            problems.append(f"not an absolute http(s) URL: {remote.url!r}")
        if remote.filename_override is not None and not _is_single_segment(
            remote.filename_override
        ):
            problems.append(
                f"filename must be a single path segment: {remote.filename_override!r}"
            )

    if spec.checksum.mode is ChecksumMode.ENFORCE:
        if len(spec.checksum.digests) != len(spec.remote_sources):
            problems.append(
                f"{len(spec.checksum.digests)} digest(s) for "
                f"{len(spec.remote_sources)} remote source(s)"
            )
        for digest in spec.checksum.digests:
            if not _HEX_DIGEST.fullmatch(digest):
                problems.append(f"not a lowercase sha256 hex digest: {digest!r}")
    elif spec.checksum.digests:
        problems.append(f"checksum mode {spec.checksum.mode.value} carries digests")

    if spec.timeout_secs is not None and spec.timeout_secs <= 0:
        problems.append("timeout_secs must be positive")

    return problems


def edit_distance(a: str, b: str) -> int:
    """Levenshtein distance between two strings"""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(
                min(
                    previous[j] + 1,
                    current[j - 1] + 1,
                    previous[j - 1] + (ca != cb),
                )
            )
        previous = current
    return previous[-1]


class Registry:
    """
    Immutable mapping of dependency name to DataDepSpec

    ``register`` returns a new registry; the receiver is never modified,
    so a published registry can be shared between threads.
    """

    def __init__(self, specs: Iterable[DataDepSpec] = ()):
        registry_map = {}
        for spec in specs:
            _admit(registry_map, spec)
        self._specs = MappingProxyType(registry_map)

    def register(self, spec: DataDepSpec) -> "Registry":
        """
        Add a spec, returning a new registry

        Args:
            spec: Spec to add

        Returns:
            Registry containing all prior entries plus ``spec``

        Raises:
            RegistrationError: duplicate (or case-aliased) name, or invalid spec
        """
        registry_map = dict(self._specs)
        _admit(registry_map, spec)
        new = Registry()
        new._specs = MappingProxyType(registry_map)
        return new

    def lookup(self, name: str) -> DataDepSpec:
        """
        Find the spec registered under exactly ``name``

        Raises:
            NotRegisteredError: with the closest name within edit distance 2
        """
        try:
            return self._specs[name]
        except KeyError:
            raise NotRegisteredError(name, self.suggest(name)) from None

    def suggest(self, name: str, max_distance: int = 2) -> Optional[str]:
        best = None
        best_distance = max_distance + 1
        for candidate in self._specs:
            distance = edit_distance(name, candidate)
            if distance < best_distance:
                best, best_distance = candidate, distance
        return best

    def names(self) -> List[str]:
        return list(self._specs)

    def __contains__(self, name: object) -> bool:
        return name in self._specs

    def __iter__(self) -> Iterator[DataDepSpec]:
        return iter(list(self._specs.values()))

    def __len__(self) -> int:
        return len(self._specs)

    def __repr__(self) -> str:
        return f"Registry({self.names()!r})"


def _admit(registry_map: dict, spec: DataDepSpec) -> None:
    problems = check_spec(spec)
    if problems:
        raise RegistrationError(
            spec.name, RegistrationError.INVALID_SPEC, "; ".join(problems)
        )
    if spec.name in registry_map:
        raise RegistrationError(spec.name, RegistrationError.DUPLICATE_NAME)
    folded = spec.name.casefold()
    for existing in registry_map:
        if existing.casefold() == folded:
            raise RegistrationError(
                spec.name,
                RegistrationError.DUPLICATE_NAME,
                f"differs from {existing!r} only by case",
            )
    registry_map[spec.name] = spec


def register(registry: Registry, spec: DataDepSpec) -> Registry:
    return registry.register(spec)


def lookup(registry: Registry, name: str) -> DataDepSpec:
    return registry.lookup(name)
