"""Configuration trees and config-root resolution."""

import os
import sys
from pathlib import Path
from typing import Any, Dict, Iterator, Optional

from omegaconf import DictConfig, ListConfig, OmegaConf
from omegaconf.errors import OmegaConfBaseException

from .errors import RegistryError

CONFIG_DIR_ENV = "ARENA_KIT_CONFIG_DIR"

_MISSING = object()


def _plain(value: Any) -> Any:
    if isinstance(value, (DictConfig, ListConfig)):
        return OmegaConf.to_container(value, resolve=True)
    return value


class Config:
    """A YAML-backed tree of settings with dotted-path access.

    Backed by an OmegaConf ``DictConfig``; values come back as plain Python
    containers. Unknown keys are kept untouched and top-level keys are also
    reachable as attributes (``config.alpha``).
    """

    def __init__(self, tree: Optional[Any] = None):
        if isinstance(tree, Config):
            tree = tree.to_dict()
        elif isinstance(tree, DictConfig):
            tree = OmegaConf.to_container(tree, resolve=True)
        if tree is None:
            tree = {}
        if not isinstance(tree, dict):
            raise TypeError(f"Config root must be a mapping, got {type(tree).__name__}")
        try:
            self._cfg: DictConfig = OmegaConf.create(tree)
        except OmegaConfBaseException as e:
            raise RegistryError(f"Config values must be plain YAML data: {e}") from None

    def get(self, path: str, default: Any = None) -> Any:
        try:
            value = OmegaConf.select(self._cfg, path, default=_MISSING)
        except OmegaConfBaseException:
            return default
        return default if value is _MISSING else _plain(value)

    def set(self, path: str, value: Any) -> None:
        OmegaConf.update(self._cfg, path, value, merge=False)

    def merged(self, overrides: Optional[Dict[str, Any]]) -> "Config":
        """Return a copy with *overrides* (dotted paths allowed) applied."""
        out = Config(self)
        for path, value in (overrides or {}).items():
            out.set(path, value)
        return out

    def to_dict(self) -> Dict[str, Any]:
        return OmegaConf.to_container(self._cfg, resolve=True)

    def __getattr__(self, name: str) -> Any:
        cfg = self.__dict__.get("_cfg")
        if cfg is not None and name in cfg:
            return _plain(cfg[name])
        raise AttributeError(name)

    def __contains__(self, key: str) -> bool:
        return self.get(key, _MISSING) is not _MISSING

    def __iter__(self) -> Iterator[str]:
        return iter(self.to_dict())

    def __len__(self) -> int:
        return len(self._cfg)

    def __eq__(self, other) -> bool:
        if isinstance(other, Config):
            return self.to_dict() == other.to_dict()
        return NotImplemented

    def __repr__(self):
        return f"Config({self.to_dict()!r})"


def bundled_config_dir() -> Optional[Path]:
    """Find the configs directory shipped with the package.

    Supports both normal installs (``Path(__file__).parent / "configs"``)
    and PyInstaller frozen binaries (``sys._MEIPASS / "configs"``).
    """
    meipass = getattr(sys, "_MEIPASS", None)
    if meipass:
        cp = Path(meipass) / "configs"
        if cp.is_dir():
            return cp

    cp = Path(__file__).parent / "configs"
    if cp.is_dir():
        return cp

    return None


def config_root() -> Optional[Path]:
    override = os.environ.get(CONFIG_DIR_ENV)
    if override:
        return Path(override)
    return bundled_config_dir()


def load_config_file(path: Path) -> Config:
    """Parse one YAML config; an empty document is an empty config."""
    import yaml

    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise RegistryError(f"Config {path} is not valid YAML: {e}") from None
    if data is not None and not isinstance(data, dict):
        raise RegistryError(f"Config {path} must hold a mapping, got {type(data).__name__}")
    return Config(data or {})
