"""Console output and per-component step loggers."""

import json
import os
import sys
import threading
from pathlib import Path
from typing import Any, Dict, List, Optional

import colorama
from colorama import Fore, Style

from .utils import to_jsonable

_PATH_LOCKS: Dict[Path, threading.Lock] = {}
_PATH_LOCKS_GUARD = threading.Lock()


def _path_lock(path: Path) -> threading.Lock:
    with _PATH_LOCKS_GUARD:
        return _PATH_LOCKS.setdefault(path, threading.Lock())


colorama.init(strip=not sys.stderr.isatty())

# Matched anywhere in a message
_STATUS_COLORS: dict = {
    "[ERROR]": Fore.RED + Style.BRIGHT,
    "[CANCELLED]": Fore.RED,
    "[WARNING]": Fore.YELLOW,
    "[SUCCESS]": Fore.GREEN + Style.BRIGHT,
    "[OK]": Fore.GREEN,
    "[INFO]": Fore.CYAN,
}

# Matched only as the leading tag
_PHASE_TAGS = (
    "[SETUP]", "[RUN]", "[TRAIN]", "[VALIDATE]", "[EVAL]", "[CHECKPOINT]",
    "[COLLECT]", "[DATASET]", "[REPORT]", "[OUTPUT]", "[STATS]",
)


def _colorize(msg: str) -> str:
    body = msg.strip()
    if body and set(body) <= {"=", "-"}:
        return Style.DIM + msg + Style.RESET_ALL
    color = next((c for tag, c in _STATUS_COLORS.items() if tag in msg), None)
    if color is None and body.startswith(_PHASE_TAGS):
        color = Fore.BLUE + Style.BRIGHT
    return msg if color is None else color + msg + Style.RESET_ALL


def make_printer(stream=None):
    """Return a log callable that prints colorized output (stderr by default)."""

    def _printer(msg: str) -> None:
        print(_colorize(msg), file=stream or sys.stderr)

    return _printer


# ---------------------------------------------------------------------------
# Component loggers
# ---------------------------------------------------------------------------

class StepLogger:
    """JSON-lines logger owned by one agent or arena.

    Without a log directory the logger is a dummy: every call is accepted and
    nothing touches the filesystem. Records land in
    ``<log_dir>/<component>/steps.jsonl``.
    """

    def __init__(self, component: str, log_dir: Optional[str] = None):
        self.component = component
        self._root: Optional[Path] = None
        self._handle = None
        self._lock = threading.Lock()
        if log_dir is not None:
            self.set_log_dir(log_dir)

    @property
    def kind(self) -> str:
        return "dummy" if self._root is None else "file"

    @property
    def log_dir(self) -> Optional[Path]:
        return self._root

    @property
    def component_dir(self) -> Optional[Path]:
        return None if self._root is None else self._root / self.component

    def set_log_dir(self, path: str) -> None:
        root = Path(path).resolve()
        (root / self.component).mkdir(parents=True, exist_ok=True)
        with self._lock:
            self._close_handle()
            self._root = root

    def log_step(self, record: Dict[str, Any]) -> None:
        if self._root is None:
            return
        entry = {
            "eid": int(record["eid"]),
            "step": int(record["step"]),
            "payload": to_jsonable(record.get("payload", {}), "$.payload"),
        }
        if record.get("arena_id") is not None:
            entry["arena_id"] = int(record["arena_id"])
        line = json.dumps(entry, sort_keys=True)
        path = self._root / self.component / "steps.jsonl"
        # loggers of several arenas may share one file
        with self._lock, _path_lock(path):
            if self._handle is None:
                self._handle = open(path, "a", encoding="utf-8")
            self._handle.write(line + "\n")
            self._handle.flush()

    def save_frames(self, eid: int, frames: List[Any]) -> int:
        """Dump episode frames as numbered PNG files; returns how many were written."""
        if self._root is None or not frames:
            return 0
        from .visual import save_image

        frame_dir = self._root / self.component / "frames" / f"ep{int(eid)}"
        frame_dir.mkdir(parents=True, exist_ok=True)
        for step, frame in enumerate(frames):
            save_image(frame_dir / f"{step}.png", frame)
        return len(frames)

    def write_json(self, name: str, data: Dict[str, Any]) -> Optional[Path]:
        """Atomically write *data* as ``<log_dir>/<name>``."""
        if self._root is None:
            return None
        return write_json_atomic(self._root / name, data)

    def close(self) -> None:
        with self._lock:
            self._close_handle()

    def _close_handle(self):
        if self._handle is not None:
            self._handle.close()
            self._handle = None


def write_json_atomic(path: Path, data: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    os.replace(tmp, path)
    return path


def read_jsonl(path: Path) -> List[Dict[str, Any]]:
    records = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records
