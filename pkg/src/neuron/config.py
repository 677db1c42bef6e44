"""Layered run configuration: file < NEURON_* environment < explicit flags."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .clients import CLIENT_KINDS, HttpChatClient, ScriptedClient
from .embedding import EMBEDDER_KINDS, EmbedderConfig
from .errors import ConfigError
from .feedback import LOOP_MODES, LoopConfig
from .synthetic import ProblemInstance, TemplateOracleClient

# Config file keys and the RunConfig attributes they set.
KEY_MAP: dict[str, tuple[str, type]] = {
    "embedder.kind": ("embedder_kind", str),
    "embedder.dim": ("embedder_dim", int),
    "loop.mode": ("loop_mode", str),
    "loop.max_refiner_attempts": ("loop_max_refiner_attempts", int),
    "client.kind": ("client_kind", str),
    "client.endpoint": ("client_endpoint", str),
    "client.solver_model": ("client_solver_model", str),
    "client.refiner_model": ("client_refiner_model", str),
    "client.script": ("client_script", str),
    "store.path": ("store_path", str),
    "seed": ("seed", int),
}


def env_name(key: str) -> str:
    return "NEURON_" + key.replace(".", "_").upper()


@dataclass
class RunConfig:
    embedder_kind: str = "deterministic-hash"
    embedder_dim: int = 256
    loop_mode: str = "auto-then-human"
    loop_max_refiner_attempts: int = 2
    client_kind: str = "template-oracle"
    client_endpoint: str = ""
    client_solver_model: str = ""
    client_refiner_model: str = ""
    client_script: str = ""
    store_path: str = ""
    seed: int = 0

    def embedder_config(self) -> EmbedderConfig:
        return EmbedderConfig(kind=self.embedder_kind, dim=self.embedder_dim, endpoint=self.client_endpoint if self.embedder_kind == "remote" else "")

    def loop_config(self) -> LoopConfig:
        return LoopConfig(mode=self.loop_mode, max_refiner_attempts=self.loop_max_refiner_attempts)


def _set(config: RunConfig, key: str, raw: str, origin: str) -> None:
    if key not in KEY_MAP:
        raise ConfigError(f"unknown config key {key!r} ({origin})")
    attr, typ = KEY_MAP[key]
    try:
        value = typ(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key!r}: {raw!r} ({origin})") from exc
    setattr(config, attr, value)


def parse_config_file(path: str | Path) -> dict[str, str]:
    """key = value lines; blank lines and # comments ignored."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_run_config(
    path: str | Path | None = None,
    *,
    env: Mapping[str, str] | None = None,
    overrides: Mapping[str, object] | None = None,
) -> RunConfig:
    """Resolve config with flags beating environment beating file."""
    env = os.environ if env is None else env
    config = RunConfig()
    if path is not None:
        for key, value in parse_config_file(path).items():
            _set(config, key, value, f"file {path}")
    for key in KEY_MAP:
        value = env.get(env_name(key))
        if value is not None:
            _set(config, key, value, f"env {env_name(key)}")
    for attr, value in (overrides or {}).items():
        if value is not None:
            setattr(config, attr, value)
    _validate(config)
    return config


def _validate(config: RunConfig) -> None:
    if config.embedder_kind not in EMBEDDER_KINDS:
        raise ConfigError(f"unknown embedder kind {config.embedder_kind!r}")
    if config.loop_mode not in LOOP_MODES:
        raise ConfigError(f"unknown loop mode {config.loop_mode!r}")
    if config.client_kind not in CLIENT_KINDS:
        raise ConfigError(f"unknown client kind {config.client_kind!r}")
    if config.embedder_dim < 8:
        raise ConfigError("embedder.dim must be >= 8")
    if config.loop_max_refiner_attempts < 0:
        raise ConfigError("loop.max_refiner_attempts must be >= 0")


def build_clients(
    config: RunConfig,
    dataset: Sequence[ProblemInstance] | None = None,
):
    """Solver and refiner clients for the configured kind.

    The template oracle needs the dataset it is keyed to; scripted clients
    read their canned responses from the JSON file at client.script (a flat
    list for the solver, or {"solver": [...], "refiner": [...]}).
    """
    kind = config.client_kind
    if kind == "template-oracle":
        if dataset is None:
            return None, None
        solver = TemplateOracleClient(dataset, seed=config.seed)
        refiner = TemplateOracleClient(dataset, seed=config.seed)
        return solver, refiner
    if kind == "scripted":
        if not config.client_script:
            raise ConfigError("scripted client needs client.script pointing at a JSON file")
        try:
            payload = json.loads(Path(config.client_script).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read script file {config.client_script}: {exc}") from exc
        if isinstance(payload, list):
            return ScriptedClient([str(r) for r in payload]), None
        if isinstance(payload, dict):
            solver = ScriptedClient([str(r) for r in payload.get("solver", [])])
            refiner_list = payload.get("refiner")
            refiner = ScriptedClient([str(r) for r in refiner_list]) if refiner_list else None
            return solver, refiner
        raise ConfigError("script file must hold a list or an object")
    # live-http
    if not config.client_endpoint:
        raise ConfigError("live-http client needs client.endpoint")
    if not config.client_solver_model:
        raise ConfigError("live-http client needs client.solver_model")
    solver = HttpChatClient(config.client_endpoint, model=config.client_solver_model)
    refiner = HttpChatClient(
        config.client_endpoint,
        model=config.client_refiner_model or config.client_solver_model,
    )
    return solver, refiner
