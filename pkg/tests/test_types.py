import numpy as np
import pytest

from arena_kit.errors import ArenaConfigError
from arena_kit.types import Box, Composite, Discrete, EpisodeConfig, make_rng, space_sample, value_get
from arena_kit.utils import strip_local, to_jsonable, trees_equal


class TestValueGet:
    def test_nested_lookup(self):
        root = {"observation": {"rgb": {"depth": 3}}}
        assert value_get(root, ["observation", "rgb", "depth"]) == 3

    def test_missing_segment_gives_none(self):
        assert value_get({"a": {"b": 1}}, ["a", "c"]) is None
        assert value_get({"a": 1}, ["a", "b"]) is None

    def test_empty_path_rejected(self):
        with pytest.raises(ValueError):
            value_get({"a": 1}, [])


class TestMakeRng:
    def test_equal_keys_equal_streams(self):
        a = make_rng(7, 1, 42).random(16)
        b = make_rng(7, 1, 42).random(16)
        assert a.tobytes() == b.tobytes()

    def test_different_keys_differ(self):
        assert make_rng(7, 1, 42).random() != make_rng(7, 2, 42).random()

    def test_negative_keys_accepted(self):
        assert make_rng(0, -1).integers(10) == make_rng(0, -1).integers(10)


class TestSpaces:
    def test_box_sample_inside(self):
        box = Box([0.0, 0.0], [1.0, 1.0])
        rng = make_rng(3)
        for _ in range(50):
            sample = box.sample(rng)
            assert sample.dtype == np.float32
            assert box.contains(sample)

    def test_box_rejects(self):
        box = Box([-1.0], [1.0])
        assert not box.contains(np.array([1.5], dtype=np.float32))
        assert not box.contains(np.array([np.nan], dtype=np.float32))
        assert not box.contains(np.zeros(2, dtype=np.float32))
        assert not box.contains({"velocity": 0.0})

    def test_box_bounds_checked(self):
        with pytest.raises(ValueError):
            Box([1.0], [0.0])

    def test_discrete(self):
        space = Discrete(3)
        assert space.contains(2)
        assert space.contains(np.int64(0))
        assert not space.contains(3)
        assert not space.contains(True)
        assert not space.contains(1.0)

    def test_composite(self):
        space = Composite({"pick_0": Box([0, 0], [1, 1]), "place_0": Box([0, 0], [1, 1])})
        action = space.sample(make_rng(1))
        assert set(action) == {"pick_0", "place_0"}
        assert space.contains(action)
        del action["place_0"]
        assert not space.contains(action)

    def test_degenerate_spaces(self):
        assert space_sample(Discrete(1), make_rng(0)) == 0
        assert space_sample(Box([0.0, 0.0], [0.0, 0.0]), make_rng(0)).tolist() == [0.0, 0.0]

    def test_discrete_frequencies(self):
        rng = make_rng(7)
        draws = np.array([space_sample(Discrete(4), rng) for _ in range(100_000)])
        freqs = np.bincount(draws, minlength=4) / draws.size
        assert np.all(np.abs(freqs - 0.25) < 0.015)

    @pytest.mark.parametrize("space", [
        Discrete(5),
        Composite({"pick_0": Box([0, 0], [1, 1]), "n": Discrete(9), "inner": Composite({"v": Box([-1], [1])})}),
    ])
    def test_sampling_is_seeded(self, space):
        a = [space_sample(space, rng) for rng in [make_rng(11)] for _ in range(20)]
        b = [space_sample(space, rng) for rng in [make_rng(11)] for _ in range(20)]
        assert all(trees_equal(x, y) for x, y in zip(a, b))
        assert to_jsonable(a) == to_jsonable(b)

    def test_to_dict(self):
        space = Composite({"n": Discrete(4)})
        assert space.to_dict() == {"type": "composite", "spaces": {"n": {"type": "discrete", "n": 4}}}


class TestEpisodeConfig:
    def test_defaults(self):
        config = EpisodeConfig()
        assert config.to_dict() == {"eid": None, "save_video": False, "mode": "train"}

    def test_from_dict_uses_fallback_mode(self):
        config = EpisodeConfig.from_dict({"eid": 3}, mode="eval")
        assert config.eid == 3 and config.mode == "eval"

    def test_bad_mode(self):
        with pytest.raises(ArenaConfigError):
            EpisodeConfig(mode="test")

    def test_negative_eid(self):
        with pytest.raises(ArenaConfigError):
            EpisodeConfig(eid=-1)


class TestJsonable:
    def test_small_tensor_inlined(self):
        out = to_jsonable({"x": np.arange(4, dtype=np.int64)})
        assert out == {"x": [0, 1, 2, 3]}

    def test_large_tensor_summarized(self):
        out = to_jsonable(np.zeros((8, 8), dtype=np.uint8))
        assert out["dtype"] == "uint8"
        assert out["shape"] == [8, 8]
        assert len(out["sha256"]) == 64

    def test_local_handles_dropped(self):
        info = {"arena_id": 0, "arena": object(), "action_space": Discrete(2)}
        assert to_jsonable(info) == {"arena_id": 0}
        assert set(strip_local(info)) == {"arena_id"}

    def test_numpy_scalars(self):
        assert to_jsonable({"a": np.float32(0.5), "b": np.bool_(True), "c": np.int64(2)}) == {
            "a": 0.5, "b": True, "c": 2,
        }

    def test_unsupported_value_names_path(self):
        with pytest.raises(TypeError, match=r"\$\.payload\.bad"):
            to_jsonable({"bad": object()}, "$.payload")


class TestTreesEqual:
    def test_dtype_matters(self):
        assert not trees_equal(np.zeros(2, dtype=np.float32), np.zeros(2, dtype=np.float64))

    def test_nested(self):
        a = {"x": [np.ones(3, dtype=np.uint8), 1.0], "y": "s"}
        b = {"x": [np.ones(3, dtype=np.uint8), 1.0], "y": "s"}
        assert trees_equal(a, b)
        b["x"][1] = 2.0
        assert not trees_equal(a, b)
