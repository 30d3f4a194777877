"""
Text Cleaning Utilities for datadep
Makes manifest-supplied text safe for terminals and file systems
"""

import re
import unicodedata
from typing import Optional

FALLBACK_FILENAME = "download"

_KEEP_CONTROLS = {"\n", "\t"}


def strip_control_chars(text: str) -> str:
    """
    Remove control characters except newline and tab

    Args:
        text: Untrusted text, e.g. a provenance message

    Returns:
        Text without escape sequences' introducers or other controls
    """
    # \r\n line endings become \n rather than losing the break
    text = text.replace("\r\n", "\n")
    return "".join(
        ch
        for ch in text
        if ch in _KEEP_CONTROLS or unicodedata.category(ch) != "Cc"
    )


def sanitize_filename(name: Optional[str]) -> str:
    """
    Turn a server- or URL-supplied name into a safe single path segment

    Args:
        name: Candidate filename, may be None

    Returns:
        Sanitized filename, never empty
    """
    if not name:
        return FALLBACK_FILENAME

    name = re.sub(r"[/\\\x00]", "_", name)
    name = name.lstrip(".")
    name = name.strip()

    return name or FALLBACK_FILENAME


def format_size(num_bytes: Optional[int]) -> str:
    """
    Human readable byte count

    Args:
        num_bytes: Size in bytes

    Returns:
        String like "4.2 MiB"
    """
    if num_bytes is None:
        return "unknown"
    size = float(num_bytes)
    for unit in ("bytes", "KiB", "MiB", "GiB"):
        if size < 1024 or unit == "GiB":
            if unit == "bytes":
                return f"{int(size)} bytes"
            return f"{size:.1f} {unit}"
        size /= 1024
    return f"{size:.1f} TiB"


def truncate_text(text: str, max_length: int = 60, add_ellipsis: bool = True) -> str:
    """
    Truncate text to maximum length

    Args:
        text: Input text
        max_length: Maximum character length
        add_ellipsis: Whether to add ... at the end

    Returns:
        Truncated text
    """
    if len(text) <= max_length:
        return text

    if add_ellipsis and max_length > 3:
        return text[: max_length - 3] + "..."
    return text[:max_length]
