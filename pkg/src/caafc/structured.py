"""Locating, validating and normalising JSON emitted by language models."""

from __future__ import annotations

import ast
import json
import re
from typing import Any, Callable

import jsonschema

from .errors import NoJsonFound, SchemaViolation

_FENCE = re.compile(r"```[A-Za-z0-9_-]*\s*\n?(.*?)```", re.DOTALL)
_decoder = json.JSONDecoder()

LABELS = ["true", "false", "unverifiable"]

_string_or_text = {
    "anyOf": [
        {"type": "string"},
        {"type": "object", "required": ["text"], "properties": {"text": {"type": "string"}}},
    ]
}

_subclaim_array = {"type": "array", "items": _string_or_text}

_source_item = {
    "anyOf": [
        {"type": "string", "minLength": 1},
        {
            "type": "object",
            "properties": {
                "source": {"type": "string"},
                "name": {"type": "string"},
                "descriptor": {"type": "string"},
            },
            "anyOf": [
                {"required": ["source"]},
                {"required": ["name"]},
                {"required": ["descriptor"]},
            ],
        },
    ]
}

SCHEMAS: dict[str, dict] = {
    "subclaim_list": {
        "anyOf": [
            _subclaim_array,
            {"type": "object", "required": ["subclaims"], "properties": {"subclaims": _subclaim_array}},
        ]
    },
    "verdict_object": {
        "type": "object",
        "required": ["subclaims"],
        "properties": {
            "subclaims": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["text", "label", "justification"],
                    "properties": {
                        "text": {"type": "string", "minLength": 1},
                        "label": {"enum": LABELS},
                        "justification": {"type": "string", "minLength": 1},
                    },
                },
            }
        },
    },
    "justification_object": {
        "type": "object",
        "required": ["justification"],
        "properties": {
            "justification": {"type": "string", "minLength": 1},
            "corrected_claim": {"type": ["string", "null"]},
        },
    },
    "comparison_object": {
        "type": "object",
        "required": ["better_evidence", "reason_category", "reason"],
        "properties": {
            "better_evidence": {"enum": ["evidence_1", "evidence_2", "tie"]},
            "reason_category": {"enum": ["more_context", "more_updated_information", "other"]},
            "reason": {"type": "string"},
        },
    },
    "source_list": {
        "anyOf": [
            {"type": "array", "items": _source_item},
            {
                "type": "object",
                "required": ["sources"],
                "properties": {"sources": {"type": "array", "items": _source_item}},
            },
        ]
    },
    "judge_object": {
        "type": "object",
        "required": [
            "error_detection",
            "error_correction",
            "links_relevant",
            "links_supportive",
        ],
        "properties": {
            "error_detection": {"type": "integer", "minimum": 0, "maximum": 2},
            "error_correction": {"type": "integer", "minimum": 0, "maximum": 2},
            "links_relevant": {"type": "boolean"},
            "links_supportive": {"type": "boolean"},
            "error_detection_rationale": {"type": "string"},
            "error_correction_rationale": {"type": "string"},
            "links_rationale": {"type": "string"},
        },
    },
    "any": {},
}


def _lower_key_aliases(value: Any, aliases: dict[str, str]) -> Any:
    if not isinstance(value, dict):
        return value
    out = {}
    for key, item in value.items():
        canon = aliases.get(key.lower().replace("-", "_"), key) if isinstance(key, str) else key
        out.setdefault(canon, item)
    return out


def _coerce_verdicts(value: Any) -> Any:
    value = _lower_key_aliases(value, {"subclaims": "subclaims", "sub_claims": "subclaims"})
    if isinstance(value, dict) and isinstance(value.get("subclaims"), list):
        items = []
        for item in value["subclaims"]:
            if isinstance(item, dict):
                item = _lower_key_aliases(item, {"explanation": "justification", "subclaim": "text"})
                if isinstance(item.get("label"), str):
                    item = {**item, "label": item["label"].strip().strip(".").lower()}
            items.append(item)
        value = {**value, "subclaims": items}
    return value


def _coerce_sources(value: Any) -> Any:
    return _lower_key_aliases(value, {"primary_sources": "sources", "sources": "sources"})


def _coerce_subclaims(value: Any) -> Any:
    return _lower_key_aliases(value, {"sub_claims": "subclaims", "subclaims": "subclaims", "claims": "subclaims"})


def _coerce_comparison(value: Any) -> Any:
    if isinstance(value, dict):
        value = dict(value)
        for key in ("better_evidence", "reason_category"):
            if isinstance(value.get(key), str):
                value[key] = value[key].strip().lower().replace(" ", "_")
    return value


_COERCE: dict[str, Callable[[Any], Any]] = {
    "subclaim_list": _coerce_subclaims,
    "verdict_object": _coerce_verdicts,
    "source_list": _coerce_sources,
    "comparison_object": _coerce_comparison,
}


def validate(value: Any, schema_name: str) -> Any:
    """Validate ``value`` against a registered schema, returning the coerced value."""
    if schema_name not in SCHEMAS:
        raise KeyError(f"unknown output schema {schema_name!r}")
    value = _COERCE.get(schema_name, lambda v: v)(value)
    validator = jsonschema.Draft7Validator(SCHEMAS[schema_name])
    error = jsonschema.exceptions.best_match(validator.iter_errors(value))
    if error is not None:
        path = "/".join(str(p) for p in error.absolute_path) or "<root>"
        raise SchemaViolation(path, error.message)
    return value


def _balanced_end(text: str, start: int) -> int | None:
    """Index one past the bracket closing ``text[start]``, honouring quotes."""
    pairs = {"{": "}", "[": "]"}
    stack = [pairs[text[start]]]
    quote = None
    i = start + 1
    while i < len(text):
        ch = text[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif ch in pairs:
            stack.append(pairs[ch])
        elif ch in "}]":
            if ch != stack[-1]:
                return None
            stack.pop()
            if not stack:
                return i + 1
        i += 1
    return None


def _candidates(text: str):
    """Yield every JSON-like value found in ``text``, left to right."""
    i = 0
    while i < len(text):
        if text[i] not in "{[":
            i += 1
            continue
        try:
            value, end = _decoder.raw_decode(text, i)
        except json.JSONDecodeError:
            end = _balanced_end(text, i)
            value = None
            if end is not None:
                try:
                    # models sometimes answer with python-style quoting
                    value = ast.literal_eval(text[i:end])
                except (ValueError, SyntaxError, MemoryError, RecursionError):
                    end = None
            if end is None or not isinstance(value, (dict, list)):
                i += 1
                continue
        yield value
        i = end


def extract_json(raw_text: str, schema_name: str) -> Any:
    """Return the first JSON value in ``raw_text`` that satisfies ``schema_name``.

    Fenced code blocks are searched before the surrounding prose. When values
    are found but none validates, the violation of the first one is raised.
    """
    if schema_name not in SCHEMAS:
        raise KeyError(f"unknown output schema {schema_name!r}")
    regions = [m.group(1) for m in _FENCE.finditer(raw_text)]
    regions.append(raw_text)
    first_error: SchemaViolation | None = None
    for region in regions:
        for value in _candidates(region):
            try:
                return validate(value, schema_name)
            except SchemaViolation as exc:
                first_error = first_error or exc
    if first_error is not None:
        raise first_error
    raise NoJsonFound(f"no JSON value in model output: {raw_text[:80]!r}")
