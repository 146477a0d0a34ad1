"""Prompt templates and placeholder rendering.

Templates live as text assets under ``caafc/templates``. A placeholder is an
identifier wrapped in single braces (``{claim}``); any other brace, such as
the literal JSON examples embedded in several prompts, is left untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from typing import Mapping

from .errors import MissingPlaceholder, UnknownPlaceholder

PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

TEMPLATE_VERSION = "1"

TEMPLATE_NAMES = (
    "segment",
    "primary_sources",
    "fact_check",
    "justify",
    "revise",
    "compare",
    "judge",
)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    system: str | None = None
    version: str = TEMPLATE_VERSION
    required_placeholders: frozenset[str] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.required_placeholders is None:
            names = frozenset(PLACEHOLDER.findall(self.body))
            object.__setattr__(self, "required_placeholders", names)

    def render(self, bindings: Mapping[str, str] | None = None) -> str:
        return render(self, bindings or {})


def render(template: PromptTemplate, bindings: Mapping[str, str]) -> str:
    """Substitute every placeholder of ``template`` in a single pass.

    Binding values are inserted verbatim and never re-scanned, so a value that
    itself looks like ``{claim}`` survives unchanged.
    """
    required = template.required_placeholders
    for name in bindings:
        if name not in required:
            raise UnknownPlaceholder(name)
    for name in sorted(required):
        if name not in bindings:
            raise MissingPlaceholder(name)

    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name in required:
            return str(bindings[name])
        return match.group(0)

    return PLACEHOLDER.sub(substitute, template.body)


def _read_asset(filename: str) -> str | None:
    path = resources.files("caafc").joinpath("templates", filename)
    if not path.is_file():
        return None
    text = path.read_text(encoding="utf-8")
    # assets are stored with a trailing newline
    return text[:-1] if text.endswith("\n") else text


@lru_cache(maxsize=None)
def load_template(name: str) -> PromptTemplate:
    body = _read_asset(f"{name}.txt")
    if body is None:
        raise KeyError(f"no template named {name!r}")
    return PromptTemplate(name=name, body=body, system=_read_asset(f"{name}.system.txt"))
