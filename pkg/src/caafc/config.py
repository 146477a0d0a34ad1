"""Run configuration, manifests and backend construction.

A config is one JSON document. Scalar fields can be overridden with
``CAAFC_<FIELD>`` environment variables (``CAAFC_THRESHOLD=5``) and stage
models with ``CAAFC_MODEL_<STAGE>`` (``CAAFC_MODEL_JUDGE=big-judge``).
Relative paths are resolved against the config file's directory.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

from . import __version__
from .actionability import LinkProber, ReplayProber, static_transport
from .errors import ConfigError
from .gateway import FixtureBackend, Gateway, HttpChatBackend, ReplayBackend, Transcript, sha16
from .pipeline import STAGES, Pipeline
from .retrieval import EvidenceRetriever, FixtureRetrievalBackend, HttpSearchBackend, ReplayRetrievalBackend

_PATH_KEYS = ("directory", "cache_dir", "transcript", "fixture_dir")


@dataclass
class RunConfig:
    models: dict[str, str] = field(default_factory=lambda: {"default": "fixture"})
    backends: dict[str, dict] = field(default_factory=dict)
    retrieval: dict[str, dict] = field(default_factory=dict)
    retrieval_backend: str = "default"
    prober: dict | None = None
    threshold: int = 4
    max_revisions: int = 3
    parallel: int = 1
    call_budget: int | None = 64
    repair_budget: int = 1
    max_retries: int = 3
    unverifiable_as: str = "false"
    cache_dir: str | None = None
    transcript: str | None = None
    fixture_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0 <= self.threshold <= 7:
            raise ConfigError("threshold must lie in 0..7")
        if self.max_revisions < 0:
            raise ConfigError("max_revisions must be >= 0")
        if self.parallel < 1:
            raise ConfigError("parallel must be >= 1")
        if self.call_budget is not None and self.call_budget < 1:
            raise ConfigError("call_budget must be >= 1 or null")
        if self.repair_budget < 0:
            raise ConfigError("repair_budget must be >= 0")
        if self.unverifiable_as not in ("false", "abstain"):
            raise ConfigError("unverifiable_as must be 'false' or 'abstain'")
        unknown = set(self.models) - set(STAGES) - {"default"}
        if unknown:
            raise ConfigError(f"unknown stages in models: {sorted(unknown)}")

    def model_for(self, stage: str) -> str | None:
        return self.models.get(stage) or self.models.get("default")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], base_dir: str | Path | None = None) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        data = json.loads(json.dumps(data))  # deep copy
        if base_dir is not None:
            data = _resolve_paths(data, Path(base_dir))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


def _resolve_paths(value: Any, base: Path, key: str | None = None) -> Any:
    if isinstance(value, dict):
        return {k: _resolve_paths(v, base, k) for k, v in value.items()}
    if isinstance(value, list):
        return [_resolve_paths(v, base) for v in value]
    if key in _PATH_KEYS and isinstance(value, str) and not os.path.isabs(value):
        return str(base / value)
    return value


def _coerce(raw: str, current: Any) -> Any:
    if raw.lower() in ("null", "none"):
        return None
    if isinstance(current, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(current, int) or current is None and raw.lstrip("-").isdigit():
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}") from None
    return raw


def apply_env(config: RunConfig, env: Mapping[str, str] | None = None) -> RunConfig:
    env = os.environ if env is None else env
    data = config.to_dict()
    for f in fields(RunConfig):
        name = f"CAAFC_{f.name.upper()}"
        if name in env and not isinstance(data[f.name], (dict, list)):
            data[f.name] = _coerce(env[name], data[f.name])
    for stage in (*STAGES, "default"):
        name = f"CAAFC_MODEL_{stage.upper()}"
        if name in env:
            data["models"][stage] = env[name]
    return RunConfig.from_dict(data)


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> RunConfig:
    """Read a JSON config (``None`` gives the defaults) and apply environment overrides."""
    if path is None:
        return apply_env(RunConfig(), env)
    path = Path(path)
    try:
        data = json.loads(path.read_text("utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return apply_env(RunConfig.from_dict(data, base_dir=path.parent), env)


def parse_model_overrides(items) -> dict[str, str]:
    """``["judge=m1", "segmenter=m2"]`` → mapping; stage ``*`` means default."""
    out = {}
    for item in items or ():
        stage, sep, model = item.partition("=")
        if not sep or not stage or not model:
            raise ConfigError(f"--models expects stage=model, got {item!r}")
        out["default" if stage == "*" else stage] = model
    return out


# -- manifests -------------------------------------------------------------------


@dataclass
class RunManifest:
    config: dict
    dataset_hash: str | None = None
    started_at: str | None = None
    ended_at: str | None = None
    calls_by_stage: dict[str, int] = field(default_factory=dict)
    version: str = __version__

    @property
    def manifest_id(self) -> str:
        """Content id over everything but the timestamps and call counts."""
        return sha16(json.dumps({"config": self.config, "dataset": self.dataset_hash, "version": self.version},
                                sort_keys=True))

    def start(self) -> "RunManifest":
        self.started_at = _now()
        return self

    def finish(self, calls_by_stage: Mapping[str, int]) -> "RunManifest":
        self.ended_at = _now()
        self.calls_by_stage = dict(sorted(calls_by_stage.items()))
        return self

    def to_dict(self) -> dict:
        return {"manifest_id": self.manifest_id, **asdict(self)}

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", "utf-8")


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


# -- construction --------------------------------------------------------------


def _model_backend(model_id: str, spec: Mapping, config: RunConfig):
    kind = spec.get("type", "fixture")
    if kind == "fixture":
        return FixtureBackend(spec.get("directory") or config.fixture_dir, spec.get("rules"))
    if kind == "http":
        key = os.environ.get(spec["api_key_env"]) if spec.get("api_key_env") else None
        return HttpChatBackend(
            spec["endpoint"],
            spec.get("model", model_id),
            api_key=key,
            auth_header=spec.get("auth_header", "Authorization"),
            timeout=spec.get("timeout", 60.0),
            max_in_flight=spec.get("max_in_flight", 4),
        )
    raise ConfigError(f"backend for {model_id!r}: unknown type {kind!r}")


def _retrieval_backend(spec: Mapping, config: RunConfig):
    kind = spec.get("type", "fixture")
    if kind == "fixture":
        return FixtureRetrievalBackend(spec.get("narratives"), spec.get("directory"), spec.get("rules", ()), spec.get("default"))
    if kind == "http":
        key = os.environ.get(spec["api_key_env"]) if spec.get("api_key_env") else None
        return HttpSearchBackend(spec["endpoint"], api_key=key, auth_header=spec.get("auth_header", "Authorization"),
                                 timeout=spec.get("timeout", 30.0))
    raise ConfigError(f"unknown retrieval backend type {kind!r}")


def _prober(spec: Mapping | None, config: RunConfig):
    if spec is None:
        return None
    kind = spec.get("type", "http")
    cache = spec.get("cache_dir") or (str(Path(config.cache_dir) / "probes") if config.cache_dir else None)
    if kind == "static":
        return LinkProber(transport=static_transport(spec.get("statuses", {}), spec.get("default", 404)))
    if kind == "http":
        return LinkProber(timeout=spec.get("timeout", 10.0), max_redirects=spec.get("max_redirects", 5),
                          concurrency=spec.get("concurrency", 8), cache_dir=cache)
    raise ConfigError(f"unknown prober type {kind!r}")


def model_ids(config: RunConfig, extra=()) -> list[str]:
    ids = set(config.models.values()) | set(config.backends) | set(extra)
    return sorted(i for i in ids if i)


def build_gateway(config: RunConfig, replay: str | Path | None = None, extra_models=()) -> Gateway:
    transcript = Transcript(config.transcript if replay is None else None)
    gateway = Gateway(max_retries=config.max_retries, call_budget=config.call_budget,
                      repair_budget=config.repair_budget, transcript=transcript)
    if replay is not None:
        backend = ReplayBackend.from_transcript(replay)
        for model in model_ids(config, extra_models):
            gateway.register(model, backend)
        return gateway
    for model in model_ids(config, extra_models):
        spec = config.backends.get(model, {"type": "fixture"})
        gateway.register(model, _model_backend(model, spec, config))
    return gateway


def build_pipeline(config: RunConfig, replay: str | Path | None = None, extra_models=()) -> Pipeline:
    """Gateway, retriever and prober wired from ``config`` (or from a transcript when replaying)."""
    gateway = build_gateway(config, replay, extra_models)
    retriever = EvidenceRetriever(
        cache_dir=None if replay is not None else (str(Path(config.cache_dir) / "evidence") if config.cache_dir else None),
        transcript=gateway.transcript,
    )
    if replay is not None:
        retriever.register(config.retrieval_backend, ReplayRetrievalBackend.from_transcript(replay))
        prober = ReplayProber.from_transcript(replay) if config.prober is not None else None
    else:
        for backend_id, spec in config.retrieval.items():
            retriever.register(backend_id, _retrieval_backend(spec, config))
        prober = _prober(config.prober, config)
    models = {stage: config.model_for(stage) for stage in STAGES if config.model_for(stage)}
    return Pipeline(
        gateway,
        models,
        retriever=retriever,
        retrieval_backend=config.retrieval_backend,
        prober=prober,
        threshold=config.threshold,
        max_revisions=config.max_revisions,
        repair_budget=config.repair_budget,
        call_budget=config.call_budget,
        unverifiable_as=config.unverifiable_as,
    )
