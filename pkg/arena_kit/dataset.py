"""Chunked trajectory dataset.

Layout of a store directory::

    manifest.json
    obs/<saved_key>/t<index>.bin
    act/<saved_key>/t<index>.bin
    goal/<saved_key>/t<index>.bin

Every chunk holds one trajectory's stacked array for one key. A chunk file
is ``AKT1`` + little-endian u32 header length + JSON header
``{dtype, shape, codec, nbytes}`` + payload. The payload is crc32-framed
(numcodecs ``crc32``) over the raw bytes, deflated first when the store is
compressed. ``manifest.json`` is the commit point: a trajectory exists once
the manifest lists it.
"""

import copy
import hashlib
import json
import os
import shutil
import struct
import threading
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numcodecs
import numpy as np
from numcodecs.compat import ensure_bytes

from .errors import SchemaError, StoreCorruptError, StoreModeError, StoreVersionError, UsageError
from .logger import write_json_atomic
from .models import new_store_manifest
from .types import make_rng

MAGIC = b"AKT1"
FORMAT_VERSION = 1
GROUPS = ("obs", "act", "goal")
SPLITS = ("train", "val", "eval")
SAMPLE_MODES = ("step", "trajectory", "sequence")
COMPRESSIONS = ("none", "deflate")

_DTYPE_ALIASES = {
    "u8": "uint8",
    "i64": "int64",
    "f32": "float32",
    "f64": "float64",
    "i32": "int32",
    "bool": "bool",
}

SchemaLike = Mapping[str, Mapping[str, Any]]


def parse_dtype(name: Any) -> np.dtype:
    try:
        return np.dtype(_DTYPE_ALIASES.get(str(name), name))
    except TypeError:
        raise SchemaError(f"Unknown dtype '{name}'") from None


# ---------------------------------------------------------------------------
# Chunk files
# ---------------------------------------------------------------------------

def _codecs(codec: str) -> List[Any]:
    chain = [numcodecs.get_codec({"id": "zlib", "level": 5})] if codec == "deflate" else []
    return chain + [numcodecs.get_codec({"id": "crc32"})]


def encode_chunk(arr: np.ndarray, codec: str = "deflate") -> bytes:
    if codec not in COMPRESSIONS:
        raise SchemaError(f"Unknown compression '{codec}'. Must be one of: {', '.join(COMPRESSIONS)}")
    arr = np.ascontiguousarray(arr)
    payload = arr.tobytes()
    for c in _codecs(codec):
        payload = ensure_bytes(c.encode(payload))
    header = json.dumps(
        {"dtype": arr.dtype.str, "shape": list(arr.shape), "codec": codec, "nbytes": len(payload)},
        sort_keys=True,
    ).encode("utf-8")
    return MAGIC + struct.pack("<I", len(header)) + header + payload


def read_chunk_header(path: Path) -> Tuple[Dict[str, Any], int]:
    """Return the chunk header and the payload offset; incomplete files raise."""
    path = Path(path)
    size = path.stat().st_size
    with open(path, "rb") as f:
        lead = f.read(8)
        if len(lead) < 8 or lead[:4] != MAGIC:
            raise StoreCorruptError(f"{path} is not a chunk file")
        (hlen,) = struct.unpack("<I", lead[4:])
        raw = f.read(hlen)
    if len(raw) < hlen:
        raise StoreCorruptError(f"{path} has a truncated header")
    try:
        header = json.loads(raw.decode("utf-8"))
    except ValueError:
        raise StoreCorruptError(f"{path} has an unreadable header") from None
    offset = 8 + hlen
    if size != offset + int(header.get("nbytes", -1)):
        raise StoreCorruptError(f"{path} is incomplete: {size} bytes, header announces {offset + header.get('nbytes', 0)}")
    return header, offset


def read_chunk(path: Path) -> np.ndarray:
    header, offset = read_chunk_header(path)
    with open(path, "rb") as f:
        f.seek(offset)
        payload = f.read()
    try:
        for c in reversed(_codecs(header["codec"])):
            payload = ensure_bytes(c.decode(payload))
        arr = np.frombuffer(payload, dtype=np.dtype(header["dtype"]))
        return arr.reshape(header["shape"]).copy()
    except Exception as e:
        raise StoreCorruptError(f"{path} failed to decode: {e}") from None


def write_chunk(path: Path, arr: np.ndarray, codec: str = "deflate") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(encode_chunk(arr, codec))
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Schemas and splits
# ---------------------------------------------------------------------------

def normalize_schema(config: Optional[SchemaLike], group: str) -> Dict[str, Dict[str, Any]]:
    """Bring a schema mapping into ``{saved_key: {shape, dtype, output_key}}`` form."""
    out: Dict[str, Dict[str, Any]] = {}
    for saved_key, entry in (config or {}).items():
        if not saved_key or "/" in saved_key or saved_key.startswith("."):
            raise SchemaError(f"Invalid saved key '{saved_key}' in {group}_config")
        if "shape" not in entry:
            raise SchemaError(f"{group}_config['{saved_key}'] needs a 'shape'")
        shape = [int(d) for d in entry["shape"]]
        if any(d < 0 for d in shape):
            raise SchemaError(f"{group}_config['{saved_key}'] has a negative dimension: {shape}")
        out[saved_key] = {
            "shape": shape,
            "dtype": parse_dtype(entry.get("dtype", "float32")).name,
            "output_key": str(entry.get("output_key") or saved_key),
        }
    return out


def normalize_ratios(ratios: Union[Mapping[str, float], Sequence[float]]) -> Dict[str, float]:
    if isinstance(ratios, Mapping):
        if set(ratios) != set(SPLITS):
            raise UsageError(f"Split ratios need exactly the keys {', '.join(SPLITS)}")
        values = [float(ratios[s]) for s in SPLITS]
    else:
        values = [float(r) for r in ratios]
        if len(values) != len(SPLITS):
            raise UsageError(f"Split ratios need {len(SPLITS)} values, got {len(values)}")
    if any(v < 0 for v in values) or abs(sum(values) - 1.0) > 1e-9:
        raise UsageError(f"Split ratios must be non-negative and sum to 1, got {values}")
    return dict(zip(SPLITS, values))


def split_sizes(n: int, ratios: Mapping[str, float]) -> Dict[str, int]:
    """Floor each ratio·n, then hand the remainder to the largest fractional parts."""
    raw = [ratios[s] * n for s in SPLITS]
    sizes = [int(np.floor(r)) for r in raw]
    order = sorted(range(len(SPLITS)), key=lambda i: (-(raw[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return dict(zip(SPLITS, sizes))


def _split_key(seed: int, index: int) -> str:
    return hashlib.sha256(f"{seed}:{index}".encode("ascii")).hexdigest()


# ---------------------------------------------------------------------------
# Dataset
# ---------------------------------------------------------------------------

class TrajectoryDataset:
    """Append-only store of trajectories with splits and three sampling modes.

    Open with ``io_mode`` ``r`` (existing store, read only), ``w`` (fresh
    store, replacing any previous one) or ``a`` (create or resume appending).
    One writer or many readers may use a store at a time.
    """

    def __init__(
        self,
        data_path: str,
        io_mode: str = "r",
        obs_config: Optional[SchemaLike] = None,
        act_config: Optional[SchemaLike] = None,
        goal_config: Optional[SchemaLike] = None,
        compression: str = "deflate",
        split_ratios: Union[Mapping[str, float], Sequence[float], None] = None,
        terminal_observation: bool = False,
        split_seed: int = 0,
        whole_trajectory: bool = False,
        log=None,
    ):
        if io_mode not in ("r", "w", "a"):
            raise StoreModeError(f"Unknown io_mode '{io_mode}'. Must be one of: r, w, a")
        if compression not in COMPRESSIONS:
            raise SchemaError(f"Unknown compression '{compression}'. Must be one of: {', '.join(COMPRESSIONS)}")
        self.data_path = Path(data_path)
        self.io_mode = io_mode
        self.whole_trajectory = whole_trajectory
        self._log = log or (lambda msg: None)
        self._lock = threading.Lock()

        requested = {
            "obs_config": normalize_schema(obs_config, "obs"),
            "act_config": normalize_schema(act_config, "act"),
            "goal_config": normalize_schema(goal_config, "goal"),
        }
        exists = self._manifest_path.is_file()

        if io_mode == "r" and not exists:
            raise StoreModeError(f"No trajectory store at {self.data_path}")
        if io_mode == "w" and exists:
            self._wipe()
            exists = False

        if exists:
            self._manifest = self._read_manifest()
            for key, schema in requested.items():
                if schema and schema != self._manifest[key]:
                    raise SchemaError(
                        f"{key} does not match the store at {self.data_path}: "
                        f"requested {schema}, stored {self._manifest[key]}"
                    )
            if io_mode == "a":
                self._recover()
        else:
            self._manifest = new_store_manifest()
            self._manifest.update(requested)
            self._manifest["compression"] = compression
            self._manifest["terminal_observation"] = bool(terminal_observation)
            self._manifest["split_seed"] = int(split_seed)
            if split_ratios is not None:
                self._manifest["split_ratios"] = normalize_ratios(split_ratios)
            self._check_output_keys()
            self.data_path.mkdir(parents=True, exist_ok=True)
            self._write_manifest()

        self._rng = make_rng(self._manifest["split_seed"])

    # -- manifest --

    @property
    def _manifest_path(self) -> Path:
        return self.data_path / "manifest.json"

    def _read_manifest(self) -> Dict[str, Any]:
        try:
            with open(self._manifest_path, "r", encoding="utf-8") as f:
                manifest = json.load(f)
        except ValueError:
            raise StoreCorruptError(f"Unreadable manifest at {self._manifest_path}") from None
        if manifest.get("format_version") != FORMAT_VERSION:
            raise StoreVersionError(
                f"Store format version {manifest.get('format_version')} at {self.data_path} "
                f"is not supported (expected {FORMAT_VERSION})"
            )
        if len(manifest["lengths"]) != manifest["num_trajectories"]:
            raise StoreCorruptError(f"Manifest at {self.data_path} lists {len(manifest['lengths'])} lengths "
                                    f"for {manifest['num_trajectories']} trajectories")
        return manifest

    def _write_manifest(self) -> None:
        write_json_atomic(self._manifest_path, self._manifest)

    def _check_output_keys(self) -> None:
        seen: Dict[str, str] = {}
        for group in GROUPS:
            for saved_key, entry in self._manifest[f"{group}_config"].items():
                out = entry["output_key"]
                if out in seen:
                    raise SchemaError(f"Output key '{out}' is used by both {seen[out]} and {group}/{saved_key}")
                seen[out] = f"{group}/{saved_key}"

    def _wipe(self) -> None:
        for group in GROUPS:
            shutil.rmtree(self.data_path / group, ignore_errors=True)
        self._manifest_path.unlink()

    def _chunk_path(self, group: str, saved_key: str, index: int) -> Path:
        return self.data_path / group / saved_key / f"t{index}.bin"

    def _chunk_paths(self, index: int) -> List[Path]:
        return [
            self._chunk_path(group, key, index)
            for group in GROUPS
            for key in self._manifest[f"{group}_config"]
        ]

    def _recover(self) -> None:
        """Truncate at the first trajectory with a missing or incomplete chunk
        and drop chunk files the manifest does not list."""
        keep = self._manifest["num_trajectories"]
        for index in range(keep):
            try:
                for path in self._chunk_paths(index):
                    read_chunk_header(path)
            except (OSError, StoreCorruptError):
                keep = index
                break
        if keep < self._manifest["num_trajectories"]:
            self._log(f"[WARNING] Truncating store at trajectory {keep} of {self._manifest['num_trajectories']}")
            self._manifest["num_trajectories"] = keep
            self._manifest["lengths"] = self._manifest["lengths"][:keep]
            self._write_manifest()
        for group in GROUPS:
            for key in self._manifest[f"{group}_config"]:
                folder = self.data_path / group / key
                if not folder.is_dir():
                    continue
                for item in list(folder.iterdir()):
                    stem = item.name.split(".")[0]
                    if not stem.startswith("t") or not stem[1:].isdigit() or int(stem[1:]) >= keep \
                            or item.name.endswith(".tmp"):
                        item.unlink()

    # -- metadata --

    def manifest(self) -> Dict[str, Any]:
        return copy.deepcopy(self._manifest)

    def num_trajectories(self) -> int:
        return int(self._manifest["num_trajectories"])

    def __len__(self) -> int:
        return self.num_trajectories()

    def trajectory_length(self, index: int) -> int:
        self._check_index(index)
        return int(self._manifest["lengths"][index])

    def _check_index(self, index: int) -> None:
        n = self.num_trajectories()
        if not isinstance(index, (int, np.integer)) or not 0 <= index < n:
            raise IndexError(f"Trajectory index {index} is out of range [0, {n})")

    def validate(self) -> Dict[str, Any]:
        from .validator import TrajectoryStoreValidator

        return TrajectoryStoreValidator(str(self.data_path), log=self._log).validate()

    # -- writing --

    def _stack(self, group: str, values: Mapping[str, Sequence[Any]], expected: Optional[int]) -> Tuple[Dict[str, np.ndarray], Optional[int]]:
        schema = self._manifest[f"{group}_config"]
        if set(values) != set(schema):
            raise SchemaError(
                f"{group} keys {sorted(values)} do not match the schema keys {sorted(schema)}"
            )
        out = {}
        for key, entry in schema.items():
            items = list(values[key])
            if expected is not None and len(items) != expected:
                raise SchemaError(f"{group}['{key}'] has {len(items)} entries, expected {expected}")
            expected = len(items)
            shape, dtype = tuple(entry["shape"]), np.dtype(entry["dtype"])
            stacked = np.empty((len(items),) + shape, dtype=dtype)
            for t, item in enumerate(items):
                arr = np.asarray(item)
                if arr.shape != shape:
                    raise SchemaError(f"{group}['{key}'][{t}] has shape {arr.shape}, schema says {shape}")
                stacked[t] = arr.astype(dtype, copy=False)
            out[key] = stacked
        return out, expected

    def add_trajectory(
        self,
        observations: Mapping[str, Sequence[Any]],
        actions: Mapping[str, Sequence[Any]],
        goals: Optional[Mapping[str, Any]] = None,
    ) -> int:
        """Append one trajectory; returns its index once it is durable."""
        if self.io_mode == "r":
            raise StoreModeError(f"Store at {self.data_path} is open read-only")
        extra = 1 if self._manifest["terminal_observation"] else 0

        act, length = self._stack("act", actions, None)
        obs, n_obs = self._stack("obs", observations, None if length is None else length + extra)
        if length is None:
            length = 0 if n_obs is None else max(n_obs - extra, 0)
            if n_obs is not None and n_obs != length + extra:
                raise SchemaError(f"Got {n_obs} observations; this store keeps T{'+1' if extra else ''} per trajectory")

        goal_schema = self._manifest["goal_config"]
        goal_arrays: Dict[str, np.ndarray] = {}
        if goal_schema or goals:
            if set(goals or {}) != set(goal_schema):
                raise SchemaError(f"goal keys {sorted(goals or {})} do not match the schema keys {sorted(goal_schema)}")
            for key, entry in goal_schema.items():
                arr = np.asarray(goals[key])
                if arr.shape != tuple(entry["shape"]):
                    raise SchemaError(f"goal['{key}'] has shape {arr.shape}, schema says {tuple(entry['shape'])}")
                goal_arrays[key] = arr.astype(entry["dtype"], copy=False)

        codec = self._manifest["compression"]
        with self._lock:
            index = self.num_trajectories()
            for group, arrays in (("obs", obs), ("act", act), ("goal", goal_arrays)):
                for key, arr in arrays.items():
                    write_chunk(self._chunk_path(group, key, index), arr, codec)
            self._manifest["num_trajectories"] = index + 1
            self._manifest["lengths"].append(int(length))
            self._write_manifest()
        return index

    # -- reading --

    def _read_group(self, group: str, index: int) -> Dict[str, np.ndarray]:
        out = {}
        for key, entry in self._manifest[f"{group}_config"].items():
            path = self._chunk_path(group, key, index)
            try:
                out[entry["output_key"]] = read_chunk(path)
            except FileNotFoundError:
                raise StoreCorruptError(f"Missing chunk {path}", index) from None
            except StoreCorruptError as e:
                raise StoreCorruptError(str(e), index) from None
        return out

    def get_trajectory(self, index: int) -> Dict[str, np.ndarray]:
        """Arrays of trajectory *index* keyed by output key; goals keep their per-trajectory shape."""
        self._check_index(index)
        out = {}
        for group in GROUPS:
            out.update(self._read_group(group, index))
        return out

    def _output_keys(self, group: str) -> List[str]:
        return [entry["output_key"] for entry in self._manifest[f"{group}_config"].values()]

    # -- splits --

    def split_assign(self, ratios: Union[Mapping[str, float], Sequence[float]]) -> None:
        if self.io_mode == "r":
            raise StoreModeError(f"Store at {self.data_path} is open read-only")
        with self._lock:
            self._manifest["split_ratios"] = normalize_ratios(ratios)
            self._write_manifest()

    def split_indices(self, split: str = "all") -> List[int]:
        n = self.num_trajectories()
        if split == "all":
            return list(range(n))
        if split not in SPLITS:
            raise UsageError(f"Unknown split '{split}'. Must be one of: all, {', '.join(SPLITS)}")
        seed = self._manifest["split_seed"]
        order = sorted(range(n), key=lambda i: _split_key(seed, i))
        sizes = split_sizes(n, self._manifest["split_ratios"])
        start = 0
        for name in SPLITS:
            if name == split:
                return sorted(order[start:start + sizes[name]])
            start += sizes[name]
        return []

    # -- sampling --

    def windows(self, sequence_length: int, split: str = "all") -> List[Tuple[int, int]]:
        """Every within-trajectory window ``(index, start)`` of *sequence_length* steps."""
        if sequence_length < 1:
            raise UsageError(f"sequence_length must be at least 1, got {sequence_length}")
        out = []
        for i in self.split_indices(split):
            out.extend((i, t) for t in range(self._manifest["lengths"][i] - sequence_length + 1))
        return out

    def transitions(self, split: str = "all") -> List[Tuple[int, int]]:
        """Every ``(index, t)`` with both an observation at t and at t + 1."""
        extra = 1 if self._manifest["terminal_observation"] else 0
        out = []
        for i in self.split_indices(split):
            out.extend((i, t) for t in range(self._manifest["lengths"][i] - 1 + extra))
        return out

    def sample(
        self,
        mode: Optional[str] = None,
        sequence_length: Optional[int] = None,
        split: str = "all",
        cross_trial: bool = False,
        rng: Optional[np.random.Generator] = None,
    ) -> Dict[str, Any]:
        """Draw one item: a transition, a whole trajectory or a window of steps."""
        mode = mode or ("trajectory" if self.whole_trajectory else "step")
        if mode not in SAMPLE_MODES:
            raise UsageError(f"Unknown sample mode '{mode}'. Must be one of: {', '.join(SAMPLE_MODES)}")
        rng = rng if rng is not None else self._rng
        indices = self.split_indices(split)
        if not indices:
            raise UsageError(f"Split '{split}' is empty")

        if mode == "trajectory":
            index = indices[int(rng.integers(len(indices)))]
            item = self.get_trajectory(index)
            item["trajectory_index"] = index
            return item

        if mode == "step":
            candidates = self.transitions(split)
            if not candidates:
                raise UsageError(f"No transitions in split '{split}'")
            index, t = candidates[int(rng.integers(len(candidates)))]
            traj = self.get_trajectory(index)
            item: Dict[str, Any] = {}
            for key in self._output_keys("obs"):
                item[key] = traj[key][t]
                item[f"next_{key}"] = traj[key][t + 1]
            for key in self._output_keys("act"):
                item[key] = traj[key][t]
            for key in self._output_keys("goal"):
                item[key] = traj[key]
            item["trajectory_index"], item["step"] = index, t
            return item

        if sequence_length is None or sequence_length < 1:
            raise UsageError("Sequence sampling needs sequence_length >= 1")
        if cross_trial:
            return self._sample_cross_trial(indices, sequence_length, rng)
        candidates = self.windows(sequence_length, split)
        if not candidates:
            raise UsageError(f"sequence_length {sequence_length} is longer than every trajectory in split '{split}'")
        index, start = candidates[int(rng.integers(len(candidates)))]
        traj = self.get_trajectory(index)
        item = {}
        for key in self._output_keys("obs") + self._output_keys("act"):
            item[key] = traj[key][start:start + sequence_length]
        for key in self._output_keys("goal"):
            item[key] = traj[key]
        item["trajectory_index"], item["step"] = index, start
        return item

    def _sample_cross_trial(self, indices: List[int], length: int, rng: np.random.Generator) -> Dict[str, Any]:
        lengths = [self._manifest["lengths"][i] for i in indices]
        total = sum(lengths)
        if total < length:
            raise UsageError(f"sequence_length {length} exceeds the {total} steps in the split")
        start = int(rng.integers(total - length + 1))
        keys = self._output_keys("obs") + self._output_keys("act")
        parts: Dict[str, List[np.ndarray]] = {k: [] for k in keys}
        is_first: List[bool] = []
        offset = 0
        for index, n in zip(indices, lengths):
            lo, hi = max(start, offset), min(start + length, offset + n)
            if lo < hi:
                traj = self.get_trajectory(index)
                for key in keys:
                    parts[key].append(traj[key][lo - offset:hi - offset])
                is_first.extend(t == 0 for t in range(lo - offset, hi - offset))
            offset += n
            if offset >= start + length:
                break
        item: Dict[str, Any] = {key: np.concatenate(parts[key], axis=0) for key in keys}
        item["is_first"] = np.array(is_first, dtype=bool)
        item["step"] = start
        return item
