import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Mapping

from ..errors import ConfigError


def reject_unknown_keys(json_object: Mapping[str, Any], allowed: type | set[str], where: str):
    if not isinstance(json_object, Mapping):
        raise ConfigError(f"{where}: expected an object, got {type(json_object).__name__}")

    allowed_keys = allowed if isinstance(allowed, set) else {f.name for f in fields(allowed)}
    unknown = sorted(set(json_object) - allowed_keys)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def dataclass_kwargs(json_object: Mapping[str, Any], cls: type, where: str) -> dict[str, Any]:
    """Plain-valued dataclass fields from a JSON object, lists turned into tuples"""
    reject_unknown_keys(json_object, cls, where)
    return {key: tuple(value) if isinstance(value, list) else value for key, value in json_object.items()}


def read_json_document(path: str | Path) -> Any:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as error:
        raise ConfigError(f"{path}: invalid JSON ({error})") from None


def canonical_json(json_object: Any) -> str:
    return json.dumps(json_object, sort_keys=True, separators=(",", ":"))
