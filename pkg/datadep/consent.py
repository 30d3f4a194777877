"""
Consent Prompt for datadep
Shows provenance before a download and decides Accept/Decline
"""

import sys
import threading
from dataclasses import dataclass
from enum import Enum
from typing import IO, Mapping, Optional

from .config import ENV_ALWAYS_ACCEPT
from .logging_utils import get_logger
from .registry import DataDepSpec
from .text_cleaner import format_size, strip_control_chars

log = get_logger(__name__)

QUESTION = "Download now? [y/N]"

_AFFIRMATIVE = {"y", "yes"}

# one question on screen at a time per process
_PROMPT_LOCK = threading.Lock()


class AcceptPolicy(str, Enum):
    INTERACTIVE = "interactive"
    ALWAYS_ACCEPT = "always-accept"
    ALWAYS_DECLINE = "always-decline"


class Answer(str, Enum):
    ACCEPT = "accept"
    DECLINE = "decline"


def policy_from_env(env: Mapping[str, str]) -> AcceptPolicy:
    value = env.get(ENV_ALWAYS_ACCEPT)
    if value == "true":
        return AcceptPolicy.ALWAYS_ACCEPT
    if value == "false":
        return AcceptPolicy.ALWAYS_DECLINE
    return AcceptPolicy.INTERACTIVE


@dataclass
class PromptIO:
    """
    Where questions are written and answers read

    ``interactive`` defaults to whether ``stdin`` is a terminal.
    """

    stdin: IO[str]
    stdout: IO[str]
    interactive: Optional[bool] = None

    @classmethod
    def from_sys(cls) -> "PromptIO":
        # questions go to stderr so stdout stays parseable
        return cls(sys.stdin, sys.stderr)

    def is_interactive(self) -> bool:
        if self.interactive is not None:
            return self.interactive
        try:
            return bool(self.stdin.isatty())
        except (AttributeError, ValueError, OSError):
            return False


def render_prompt(
    spec: DataDepSpec, dest: str, total_size_hint: Optional[int] = None
) -> str:
    """
    Build the pre-download question

    Args:
        spec: Managed dependency about to be fetched
        dest: Absolute install path
        total_size_hint: Total bytes, if known

    Returns:
        Prompt text with name, provenance, sources, destination, size and question
    """
    lines = [
        f"This program has requested access to the data dependency {spec.name}.",
        "It is not currently installed and can be downloaded automatically.",
        "",
        strip_control_chars(spec.display_message),
        "",
        "Source(s):",
    ]
    lines.extend(f"  {strip_control_chars(url)}" for url in spec.urls)
    lines.append(f"Destination: {dest}")
    if total_size_hint is not None:
        lines.append(f"Size: {format_size(total_size_hint)}")
    lines.append(QUESTION)
    return "\n".join(lines)


def ask(prompt_io: PromptIO, policy: AcceptPolicy, rendered: str) -> Answer:
    """
    Apply the accept policy, asking on the terminal when interactive

    Args:
        prompt_io: Streams to talk on
        policy: Interactive, AlwaysAccept or AlwaysDecline
        rendered: Text from ``render_prompt``

    Returns:
        Answer.ACCEPT only for an explicit yes or the AlwaysAccept policy
    """
    if policy is AcceptPolicy.ALWAYS_ACCEPT:
        return Answer.ACCEPT
    if policy is AcceptPolicy.ALWAYS_DECLINE:
        return Answer.DECLINE

    if not prompt_io.is_interactive():
        log.warning(
            "Not asking for download consent: stdin is not a terminal. "
            f"Set {ENV_ALWAYS_ACCEPT}=true to accept downloads non-interactively."
        )
        return Answer.DECLINE

    with _PROMPT_LOCK:
        try:
            prompt_io.stdout.write(rendered + " ")
            prompt_io.stdout.flush()
            line = prompt_io.stdin.readline()
        except (OSError, ValueError) as e:
            log.warning(f"Could not read an answer: {e}")
            return Answer.DECLINE

    if line.rstrip("\r\n").lower() in _AFFIRMATIVE:
        return Answer.ACCEPT
    return Answer.DECLINE
