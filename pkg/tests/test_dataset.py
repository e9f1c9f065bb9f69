import json

import numpy as np
import pytest

from arena_kit.dataset import (
    TrajectoryDataset,
    encode_chunk,
    normalize_schema,
    read_chunk,
    split_sizes,
    write_chunk,
)
from arena_kit.errors import SchemaError, StoreCorruptError, StoreModeError, StoreVersionError, UsageError
from arena_kit.types import make_rng
from arena_kit.validator import TrajectoryStoreValidator

DTYPES = ("uint8", "float32", "int64")
POS = {"pos": {"shape": [1], "dtype": "u8"}}
MOVE = {"move": {"shape": [], "dtype": "i64"}}


def random_values(rng, shape, dtype):
    if dtype == "float32":
        return rng.standard_normal(shape).astype(np.float32)
    if dtype == "uint8":
        return rng.integers(0, 256, size=shape, dtype=np.uint8)
    return rng.integers(-(2 ** 40), 2 ** 40, size=shape, dtype=np.int64)


def random_shape(rng):
    limits = (8, 8, 3)[: int(rng.integers(0, 4))]
    return [int(rng.integers(1, hi + 1)) for hi in limits]


def small_store(path, lengths, compression="none", terminal_observation=False):
    store = TrajectoryDataset(path, "w", obs_config=POS, act_config=MOVE,
                              compression=compression, terminal_observation=terminal_observation)
    for n in lengths:
        extra = 1 if terminal_observation else 0
        store.add_trajectory(
            {"pos": [np.array([t], dtype=np.uint8) for t in range(n + extra)]},
            {"move": list(range(n))},
        )
    return store


class TestChunks:
    def test_round_trip(self, tmp_path):
        arr = np.arange(24, dtype=np.float32).reshape(2, 3, 4)
        for codec in ("none", "deflate"):
            write_chunk(tmp_path / f"{codec}.bin", arr, codec)
            out = read_chunk(tmp_path / f"{codec}.bin")
            assert out.dtype == arr.dtype and out.tobytes() == arr.tobytes()

    def test_truncated_chunk(self, tmp_path):
        path = tmp_path / "c.bin"
        path.write_bytes(encode_chunk(np.ones(10, dtype=np.int64))[:-3])
        with pytest.raises(StoreCorruptError):
            read_chunk(path)

    def test_flipped_byte_fails_checksum(self, tmp_path):
        data = bytearray(encode_chunk(np.arange(32, dtype=np.uint8), "none"))
        data[-10] ^= 0xFF
        path = tmp_path / "c.bin"
        path.write_bytes(bytes(data))
        with pytest.raises(StoreCorruptError):
            read_chunk(path)

    def test_unknown_codec(self):
        with pytest.raises(SchemaError):
            encode_chunk(np.zeros(1), "lz4")


class TestSchema:
    def test_aliases_and_defaults(self):
        schema = normalize_schema({"rgb": {"shape": (4, 4, 3), "dtype": "u8"}, "x": {"shape": [2]}}, "obs")
        assert schema == {
            "rgb": {"shape": [4, 4, 3], "dtype": "uint8", "output_key": "rgb"},
            "x": {"shape": [2], "dtype": "float32", "output_key": "x"},
        }

    @pytest.mark.parametrize("config", [
        {"a/b": {"shape": [1]}},
        {"a": {"dtype": "u8"}},
        {"a": {"shape": [-1]}},
        {"a": {"shape": [1], "dtype": "complex-ish"}},
    ])
    def test_rejected(self, config):
        with pytest.raises(SchemaError):
            normalize_schema(config, "obs")

    def test_output_keys_must_be_unique(self, tmp_path):
        with pytest.raises(SchemaError):
            TrajectoryDataset(tmp_path / "s", "w",
                              obs_config={"a": {"shape": [1], "output_key": "x"}},
                              act_config={"b": {"shape": [1], "output_key": "x"}})


class TestStore:
    def test_random_round_trips(self, tmp_path):
        rng = make_rng(11)
        for trial in range(200):
            obs_config, act_config = {}, {}
            for i in range(int(rng.integers(1, 3))):
                obs_config[f"o{i}"] = {"shape": random_shape(rng), "dtype": DTYPES[int(rng.integers(3))]}
            for i in range(int(rng.integers(0, 2))):
                act_config[f"a{i}"] = {"shape": random_shape(rng), "dtype": DTYPES[int(rng.integers(3))]}
            compression = ("none", "deflate")[trial % 2]
            store = TrajectoryDataset(tmp_path / f"s{trial}", "w", obs_config=obs_config,
                                      act_config=act_config, compression=compression)
            length = int(rng.integers(1, 6))
            obs = {k: random_values(rng, [length] + v["shape"], v["dtype"]) for k, v in obs_config.items()}
            act = {k: random_values(rng, [length] + v["shape"], v["dtype"]) for k, v in act_config.items()}
            index = store.add_trajectory({k: list(v) for k, v in obs.items()}, {k: list(v) for k, v in act.items()})

            reread = TrajectoryDataset(tmp_path / f"s{trial}", "r").get_trajectory(index)
            for key, arr in {**obs, **act}.items():
                assert reread[key].dtype == arr.dtype
                assert reread[key].shape == arr.shape
                assert reread[key].tobytes() == arr.tobytes()

    def test_output_key_rename_and_goals(self, tmp_path):
        store = TrajectoryDataset(
            tmp_path / "s", "w",
            obs_config={"rgb": {"shape": [2, 2, 3], "dtype": "u8", "output_key": "image"}},
            act_config={"pnp": {"shape": [2, 2], "dtype": "f32", "output_key": "default"}},
            goal_config={"mask": {"shape": [2, 2], "dtype": "bool"}},
        )
        store.add_trajectory(
            {"rgb": [np.zeros((2, 2, 3), dtype=np.uint8)] * 3},
            {"pnp": [np.full((2, 2), 0.5, dtype=np.float32)] * 3},
            {"mask": np.eye(2, dtype=bool)},
        )
        traj = store.get_trajectory(0)
        assert set(traj) == {"image", "default", "mask"}
        assert traj["image"].shape == (3, 2, 2, 3)
        assert traj["mask"].tolist() == [[True, False], [False, True]]

    def test_observation_count_rule(self, tmp_path):
        plain = small_store(tmp_path / "a", [])
        with pytest.raises(SchemaError):
            plain.add_trajectory({"pos": [np.zeros(1, dtype=np.uint8)] * 4}, {"move": [0, 1, 2]})

        terminal = small_store(tmp_path / "b", [], terminal_observation=True)
        terminal.add_trajectory({"pos": [np.zeros(1, dtype=np.uint8)] * 4}, {"move": [0, 1, 2]})
        assert terminal.trajectory_length(0) == 3
        assert terminal.get_trajectory(0)["pos"].shape == (4, 1)

    def test_shape_mismatch(self, tmp_path):
        store = small_store(tmp_path / "s", [])
        with pytest.raises(SchemaError):
            store.add_trajectory({"pos": [np.zeros(2, dtype=np.uint8)]}, {"move": [0]})
        with pytest.raises(SchemaError):
            store.add_trajectory({"position": [np.zeros(1, dtype=np.uint8)]}, {"move": [0]})

    def test_modes(self, tmp_path):
        with pytest.raises(StoreModeError):
            TrajectoryDataset(tmp_path / "missing", "r")
        small_store(tmp_path / "s", [2, 3])
        reader = TrajectoryDataset(tmp_path / "s", "r")
        assert len(reader) == 2
        with pytest.raises(StoreModeError):
            reader.add_trajectory({"pos": [np.zeros(1, dtype=np.uint8)]}, {"move": [0]})
        assert TrajectoryDataset(tmp_path / "s", "a").num_trajectories() == 2
        assert TrajectoryDataset(tmp_path / "s", "w", obs_config=POS, act_config=MOVE).num_trajectories() == 0

    def test_reopen_with_other_schema(self, tmp_path):
        small_store(tmp_path / "s", [1])
        with pytest.raises(SchemaError):
            TrajectoryDataset(tmp_path / "s", "a", obs_config={"pos": {"shape": [2], "dtype": "u8"}})

    def test_version_mismatch(self, tmp_path):
        small_store(tmp_path / "s", [1])
        manifest_path = tmp_path / "s" / "manifest.json"
        manifest = json.loads(manifest_path.read_text())
        manifest["format_version"] = 2
        manifest_path.write_text(json.dumps(manifest))
        with pytest.raises(StoreVersionError):
            TrajectoryDataset(tmp_path / "s", "r")

    def test_index_out_of_range(self, tmp_path):
        store = small_store(tmp_path / "s", [1])
        with pytest.raises(IndexError):
            store.get_trajectory(1)
        with pytest.raises(IndexError):
            store.trajectory_length(-1)


class TestSplits:
    def test_partitions(self, tmp_path):
        store = small_store(tmp_path / "s", [])
        for n in range(1, 51):
            store.add_trajectory({"pos": [np.zeros(1, dtype=np.uint8)]}, {"move": [0]})
            parts = {name: store.split_indices(name) for name in ("train", "val", "eval")}
            flat = sorted(i for part in parts.values() for i in part)
            assert flat == list(range(n))
            for name, ratio in (("train", 0.8), ("val", 0.1), ("eval", 0.1)):
                assert abs(len(parts[name]) - ratio * n) <= 1

    def test_split_is_stable_across_reopen(self, tmp_path):
        small_store(tmp_path / "s", [1] * 20)
        a = TrajectoryDataset(tmp_path / "s", "r").split_indices("val")
        b = TrajectoryDataset(tmp_path / "s", "r").split_indices("val")
        assert a == b

    def test_split_assign(self, tmp_path):
        store = small_store(tmp_path / "s", [1] * 10)
        store.split_assign([0.5, 0.5, 0.0])
        assert len(store.split_indices("train")) == 5
        assert store.split_indices("eval") == []
        assert TrajectoryDataset(tmp_path / "s", "r").manifest()["split_ratios"]["val"] == 0.5

    @pytest.mark.parametrize("ratios", [[0.5, 0.5], [0.5, 0.6, -0.1], {"train": 1.0}, [0.3, 0.3, 0.3]])
    def test_bad_ratios(self, tmp_path, ratios):
        store = small_store(tmp_path / "s", [1])
        with pytest.raises(UsageError):
            store.split_assign(ratios)

    def test_sizes_sum(self):
        for n in range(0, 40):
            assert sum(split_sizes(n, {"train": 0.8, "val": 0.1, "eval": 0.1}).values()) == n


class TestSampling:
    def test_window_support_matches_enumeration(self, tmp_path):
        rng = make_rng(5)
        for trial in range(50):
            lengths = [int(n) for n in rng.integers(1, 5, size=int(rng.integers(1, 4)))]
            store = small_store(tmp_path / f"s{trial}", lengths)
            length = int(rng.integers(1, max(lengths) + 1))
            expected = {(i, t) for i, n in enumerate(lengths) for t in range(n - length + 1)}
            assert set(store.windows(length)) == expected

            drawn = set()
            for _ in range(300):
                item = store.sample("sequence", sequence_length=length, rng=rng)
                assert item["pos"].shape == (length, 1)
                drawn.add((item["trajectory_index"], int(item["step"])))
            assert drawn == expected

    def test_window_contents(self, tmp_path):
        store = small_store(tmp_path / "s", [5])
        item = store.sample("sequence", sequence_length=3, rng=make_rng(0))
        start = item["step"]
        assert item["pos"][:, 0].tolist() == list(range(start, start + 3))

    def test_sequence_longer_than_every_trajectory(self, tmp_path):
        store = small_store(tmp_path / "s", [2, 2])
        with pytest.raises(UsageError):
            store.sample("sequence", sequence_length=3)

    def test_cross_trial_window(self, tmp_path):
        store = small_store(tmp_path / "s", [2, 3, 2])
        item = store.sample("sequence", sequence_length=7, cross_trial=True, rng=make_rng(1))
        assert item["is_first"].tolist() == [True, False, True, False, False, True, False]
        assert item["pos"][:, 0].tolist() == [0, 1, 0, 1, 2, 0, 1]
        with pytest.raises(UsageError):
            store.sample("sequence", sequence_length=8, cross_trial=True)

    def test_step_sample_pairs_consecutive_observations(self, tmp_path):
        store = small_store(tmp_path / "s", [4, 4])
        for seed in range(10):
            item = store.sample("step", rng=make_rng(seed))
            assert int(item["next_pos"][0]) == int(item["pos"][0]) + 1
            assert int(item["step"]) == item["step"]

    def test_terminal_observation_adds_last_transition(self, tmp_path):
        plain = small_store(tmp_path / "a", [3])
        terminal = small_store(tmp_path / "b", [3], terminal_observation=True)
        assert len(plain.transitions()) == 2
        assert len(terminal.transitions()) == 3

    def test_whole_trajectory_default(self, tmp_path):
        small_store(tmp_path / "s", [3])
        store = TrajectoryDataset(tmp_path / "s", "r", whole_trajectory=True)
        item = store.sample(rng=make_rng(0))
        assert item["pos"].shape == (3, 1) and item["trajectory_index"] == 0

    def test_empty_split(self, tmp_path):
        store = small_store(tmp_path / "s", [1])
        with pytest.raises(UsageError):
            store.sample("trajectory", split="eval")

    def test_unknown_mode(self, tmp_path):
        with pytest.raises(UsageError):
            small_store(tmp_path / "s", [1]).sample("episode")


class TestDurability:
    @pytest.mark.parametrize("k", [0, 1, 4])
    def test_truncated_tail_is_dropped_on_append(self, tmp_path, k):
        small_store(tmp_path / "s", [3] * (k + 1), compression="deflate")
        chunk = tmp_path / "s" / "act" / "move" / f"t{k}.bin"
        chunk.write_bytes(chunk.read_bytes()[:-5])

        store = TrajectoryDataset(tmp_path / "s", "a")
        assert store.num_trajectories() == k
        assert not chunk.exists()
        store.add_trajectory({"pos": [np.zeros(1, dtype=np.uint8)] * 2}, {"move": [0, 1]})
        assert store.validate()["is_valid"]

    def test_stray_tmp_files_removed(self, tmp_path):
        small_store(tmp_path / "s", [1])
        leftover = tmp_path / "s" / "obs" / "pos" / "t1.bin.tmp"
        leftover.write_bytes(b"partial")
        TrajectoryDataset(tmp_path / "s", "a")
        assert not leftover.exists()


class TestValidator:
    def test_valid_store(self, tmp_path):
        small_store(tmp_path / "s", [2, 3], compression="deflate")
        result = TrajectoryStoreValidator(str(tmp_path / "s")).validate()
        assert result["is_valid"]
        assert result["num_trajectories"] == 2
        assert result["chunks_checked"] == 4

    def test_truncated_chunk_names_index(self, tmp_path):
        small_store(tmp_path / "s", [2, 2, 2])
        chunk = tmp_path / "s" / "obs" / "pos" / "t1.bin"
        chunk.write_bytes(chunk.read_bytes()[:-1])
        result = TrajectoryStoreValidator(str(tmp_path / "s")).validate()
        assert not result["is_valid"]
        assert result["bad_index"] == 1
        assert "trajectory 1" in result["errors"][0]

    def test_missing_store(self, tmp_path):
        result = TrajectoryStoreValidator(str(tmp_path / "nowhere")).validate()
        assert not result["is_valid"]
        assert "not found" in result["errors"][0]

    def test_unlisted_files_warn(self, tmp_path):
        small_store(tmp_path / "s", [1])
        (tmp_path / "s" / "obs" / "pos" / "t9.bin").write_bytes(b"")
        result = TrajectoryStoreValidator(str(tmp_path / "s")).validate()
        assert result["is_valid"]
        assert any("t9.bin" in w for w in result["warnings"])
