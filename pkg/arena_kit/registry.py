"""String-driven construction of arenas, agents and observation transforms.

Domain strings follow ``base|key:value,key:value``. A value may carry one
parenthesized group, e.g. ``action:pixel-pick-and-place(1)``, whose content
is kept verbatim and interpreted by the builder. Agent strings are
``base`` or ``base|variant``.
"""

import re
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Tuple

from .config import Config, config_root, load_config_file
from .errors import ConfigNotFoundError, DomainStringError, RegistryError

_KEY_RE = re.compile(r"[A-Za-z0-9_.\-]")
_CALL_RE = re.compile(r"^([A-Za-z0-9_.\-]+)(?:\((.*)\))?$")

_ARENA_REGISTRY: Dict[str, Callable[[Dict[str, str]], Any]] = {}
_AGENT_REGISTRY: Dict[str, type] = {}
_TRANSFORM_REGISTRY: Dict[str, Callable[[Optional[str]], Callable]] = {}
_BUILTINS_LOADED = False


@dataclass
class DomainSpec:
    base: str
    params: Dict[str, str] = field(default_factory=dict)


@dataclass
class AgentSpec:
    base: str
    variant: Optional[str] = None


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------

def _scan_key(s: str, pos: int, what: str) -> Tuple[str, int]:
    start = pos
    while pos < len(s) and _KEY_RE.match(s[pos]):
        pos += 1
    if pos == start:
        raise DomainStringError(f"Expected {what}", start)
    return s[start:pos], pos


def _scan_value(s: str, pos: int) -> Tuple[str, int]:
    start = pos
    seen_group = False
    while pos < len(s) and s[pos] != ",":
        ch = s[pos]
        if ch == "|":
            raise DomainStringError("Unexpected '|' inside parameter list", pos)
        if ch == ")":
            raise DomainStringError("Unbalanced ')'", pos)
        if ch == "(":
            if seen_group:
                raise DomainStringError("A value may hold only one parenthesized group", pos)
            close = s.find(")", pos + 1)
            if close < 0:
                raise DomainStringError("Unclosed '('", pos)
            if "(" in s[pos + 1:close]:
                raise DomainStringError("Nested '(' is not allowed", s.index("(", pos + 1))
            seen_group = True
            pos = close + 1
            continue
        pos += 1
    return s[start:pos], pos


def parse_domain_string(s: str) -> DomainSpec:
    """Parse ``base[|key:value(,key:value)*]``; later duplicate keys win."""
    if not isinstance(s, str) or not s:
        raise DomainStringError("Domain string is empty", 0)
    base, pos = _scan_key(s, 0, "arena base name")
    params: Dict[str, str] = {}
    if pos == len(s):
        return DomainSpec(base, params)
    if s[pos] != "|":
        raise DomainStringError(f"Expected '|' after base '{base}', found '{s[pos]}'", pos)
    pos += 1
    while True:
        key, pos = _scan_key(s, pos, "parameter key")
        if pos >= len(s) or s[pos] != ":":
            raise DomainStringError(f"Expected ':' after key '{key}'", pos)
        value, pos = _scan_value(s, pos + 1)
        params[key] = value
        if pos == len(s):
            break
        pos += 1  # ','
        if pos == len(s):
            raise DomainStringError("Trailing ',' with no parameter", pos)
    return DomainSpec(base, params)


def unparse_domain_string(spec: DomainSpec) -> str:
    if not spec.params:
        return spec.base
    return spec.base + "|" + ",".join(f"{k}:{v}" for k, v in spec.params.items())


def parse_agent_string(s: str) -> AgentSpec:
    if not isinstance(s, str) or not s:
        raise DomainStringError("Agent string is empty", 0)
    base, _, variant = s.partition("|")
    if not base:
        raise DomainStringError("Agent string has an empty base", 0)
    return AgentSpec(base, variant or None)


def split_call(value: str) -> Tuple[str, Optional[str]]:
    """Split ``name(arg)`` into ``("name", "arg")``; plain names give ``(name, None)``."""
    m = _CALL_RE.match(value.strip())
    if not m:
        raise RegistryError(f"Cannot read '{value}' as name or name(argument)")
    return m.group(1), m.group(2)


def parse_flag(value: str, key: str) -> bool:
    lowered = str(value).strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise RegistryError(f"Parameter '{key}' expects a boolean, got '{value}'")


def parse_int(value: str, key: str) -> int:
    try:
        return int(str(value).strip())
    except ValueError:
        raise RegistryError(f"Parameter '{key}' expects an integer, got '{value}'") from None


def parse_float(value: str, key: str) -> float:
    try:
        return float(str(value).strip())
    except ValueError:
        raise RegistryError(f"Parameter '{key}' expects a number, got '{value}'") from None


# ---------------------------------------------------------------------------
# Registration
# ---------------------------------------------------------------------------

def register_arena(base: str):
    """Decorator registering an arena factory taking the domain-string params.

    Usage:
        @register_arena("toy")
        def build_toy(params): ...
    """
    def decorator(factory):
        _ARENA_REGISTRY[base] = factory
        return factory
    return decorator


def register_agent(base: str):
    def decorator(cls):
        _AGENT_REGISTRY[base] = cls
        return cls
    return decorator


def register_transform(name: str):
    """Decorator registering a transform factory called with the optional argument."""
    def decorator(factory):
        _TRANSFORM_REGISTRY[name] = factory
        return factory
    return decorator


def _ensure_builtins() -> None:
    global _BUILTINS_LOADED
    if _BUILTINS_LOADED:
        return
    _BUILTINS_LOADED = True
    from . import builtin, transforms  # noqa: F401


def list_arenas() -> List[str]:
    _ensure_builtins()
    return sorted(_ARENA_REGISTRY)


def list_agents() -> List[str]:
    _ensure_builtins()
    return sorted(_AGENT_REGISTRY)


def list_transforms() -> List[str]:
    _ensure_builtins()
    return sorted(_TRANSFORM_REGISTRY)


def _unknown(kind: str, name: str, available: List[str]) -> RegistryError:
    return RegistryError(f"Unknown {kind} '{name}'. Registered: {', '.join(available) or '(none)'}")


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------

def build_arena(s: str):
    spec = parse_domain_string(s)
    _ensure_builtins()
    factory = _ARENA_REGISTRY.get(spec.base)
    if factory is None:
        raise _unknown("arena", spec.base, list_arenas())
    params = dict(spec.params)
    disp = parse_flag(params.pop("disp"), "disp") if "disp" in params else False
    arena = factory(params)
    arena.set_disp(disp)
    return arena


def build_agent(s: str, config: Optional[Any] = None):
    spec = parse_agent_string(s)
    _ensure_builtins()
    cls = _AGENT_REGISTRY.get(spec.base)
    if cls is None:
        raise _unknown("agent", spec.base, list_agents())
    config = Config(config)
    if spec.variant:
        config = config.merged({"variant": spec.variant})
    return cls(config)


def build_transform(name: str) -> Callable[[Dict[str, Any]], Dict[str, Any]]:
    _ensure_builtins()
    base, arg = split_call(name)
    factory = _TRANSFORM_REGISTRY.get(base)
    if factory is None:
        raise _unknown("transform", name, list_transforms())
    return factory(arg)


def retrieve_config(agent_name: str, arena_name: str, config_name: str = "default") -> Config:
    """Load ``<config root>/<agent base>/<arena base>/<config_name>.yaml``.

    Only base names key the lookup; an empty *config_name* gives an empty config.
    """
    if not config_name:
        return Config()
    agent_base = parse_agent_string(agent_name).base
    arena_base = parse_domain_string(arena_name).base
    root = config_root()
    if root is None:
        raise ConfigNotFoundError(f"<no config root>/{agent_base}/{arena_base}/{config_name}.yaml")
    path = root / agent_base / arena_base / f"{config_name}.yaml"
    if not path.is_file():
        raise ConfigNotFoundError(str(path))
    return load_config_file(path)
