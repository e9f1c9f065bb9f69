"""Validates a trajectory store on disk by decoding every chunk."""

import json
from pathlib import Path
from typing import Any, Dict

from .dataset import FORMAT_VERSION, GROUPS, SPLITS, read_chunk
from .errors import StoreCorruptError
from .models import new_store_validation_result

REQUIRED_MANIFEST_KEYS = [
    "format_version", "obs_config", "act_config", "goal_config",
    "num_trajectories", "lengths", "split_ratios", "compression",
]


class StoreValidationError(Exception):
    pass


class TrajectoryStoreValidator:
    """Full integrity check of a trajectory store.

    Every chunk the manifest implies is read, crc-checked, decoded and
    compared against the schema shape and the recorded trajectory length.
    """

    def __init__(self, data_path: str, log=None):
        self._path = Path(data_path).resolve()
        self._log = log or (lambda msg: None)

    # -- public --

    def validate(self) -> Dict[str, Any]:
        result = new_store_validation_result()
        result["path"] = str(self._path)

        try:
            # Step 1: store directory and manifest exist
            manifest = self._load_manifest()

            # Step 2: manifest fields
            self._validate_manifest(manifest, result)
            result["num_trajectories"] = int(manifest["num_trajectories"])

            # Step 3: every chunk decodes and matches its schema
            self._validate_chunks(manifest, result)

            # Step 4: stray files (informational)
            self._check_orphans(manifest, result)

            result["is_valid"] = len(result["errors"]) == 0
        except StoreValidationError as e:
            result["errors"].append(str(e))
            result["is_valid"] = False

        return result

    # -- private --

    def _load_manifest(self) -> Dict[str, Any]:
        if not self._path.is_dir():
            raise StoreValidationError(f"Store directory not found: {self._path}")
        manifest_path = self._path / "manifest.json"
        if not manifest_path.is_file():
            raise StoreValidationError(f"manifest.json not found in {self._path}")
        self._log(f"[INFO] Validating trajectory store: {self._path}")
        try:
            with open(manifest_path, "r", encoding="utf-8") as f:
                return json.load(f)
        except ValueError as e:
            raise StoreValidationError(f"manifest.json is not valid JSON: {e}") from None

    def _validate_manifest(self, manifest: Dict[str, Any], result: Dict[str, Any]) -> None:
        missing = [k for k in REQUIRED_MANIFEST_KEYS if k not in manifest]
        if missing:
            raise StoreValidationError(f"manifest.json is missing: {', '.join(missing)}")
        if manifest["format_version"] != FORMAT_VERSION:
            raise StoreValidationError(
                f"Unsupported format_version {manifest['format_version']} (expected {FORMAT_VERSION})"
            )
        if len(manifest["lengths"]) != manifest["num_trajectories"]:
            raise StoreValidationError(
                f"manifest lists {len(manifest['lengths'])} lengths for {manifest['num_trajectories']} trajectories"
            )
        if any(int(n) < 0 for n in manifest["lengths"]):
            result["errors"].append("manifest has a negative trajectory length")
        ratios = manifest["split_ratios"]
        if set(ratios) != set(SPLITS) or abs(sum(float(v) for v in ratios.values()) - 1.0) > 1e-9:
            result["errors"].append(f"split_ratios {ratios} do not cover {', '.join(SPLITS)} with sum 1")
        self._log("[OK] Manifest fields present")

    def _validate_chunks(self, manifest: Dict[str, Any], result: Dict[str, Any]) -> None:
        extra = 1 if manifest.get("terminal_observation") else 0
        for index in range(int(manifest["num_trajectories"])):
            length = int(manifest["lengths"][index])
            for group in GROUPS:
                for key, entry in manifest[f"{group}_config"].items():
                    path = self._path / group / key / f"t{index}.bin"
                    if group == "goal":
                        expected = tuple(entry["shape"])
                    else:
                        expected = (length + (extra if group == "obs" else 0),) + tuple(entry["shape"])
                    try:
                        arr = read_chunk(path)
                    except FileNotFoundError:
                        self._fail(result, index, f"trajectory {index}: missing chunk {group}/{key}")
                        return
                    except StoreCorruptError as e:
                        self._fail(result, index, f"trajectory {index}: {e}")
                        return
                    result["chunks_checked"] += 1
                    if arr.shape != expected or arr.dtype.name != entry["dtype"]:
                        self._fail(
                            result, index,
                            f"trajectory {index}: {group}/{key} is {arr.dtype.name}{list(arr.shape)}, "
                            f"expected {entry['dtype']}{list(expected)}",
                        )
                        return
        self._log(f"[OK] {result['chunks_checked']} chunk(s) decoded")

    def _fail(self, result: Dict[str, Any], index: int, message: str) -> None:
        result["bad_index"] = index
        result["errors"].append(message)
        self._log(f"[ERROR] {message}")

    def _check_orphans(self, manifest: Dict[str, Any], result: Dict[str, Any]) -> None:
        n = int(manifest["num_trajectories"])
        for group in GROUPS:
            for key in manifest[f"{group}_config"]:
                folder = self._path / group / key
                if not folder.is_dir():
                    continue
                for item in sorted(folder.iterdir()):
                    stem = item.name.split(".")[0]
                    if not (stem.startswith("t") and stem[1:].isdigit() and int(stem[1:]) < n):
                        result["warnings"].append(f"Unlisted file {group}/{key}/{item.name}")
