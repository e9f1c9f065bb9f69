import json
import time

import pytest

from arena_kit.agent import Agent
from arena_kit.errors import ArenaConfigError, ProtocolError, UsageError
from arena_kit.logger import read_jsonl
from arena_kit.registry import build_agent, build_arena
from arena_kit.runner import (
    aggregate_metrics,
    evaluate,
    perform_parallel,
    perform_single,
    run,
    train_and_evaluate,
    validate,
)
from arena_kit.types import EpisodeConfig
from arena_kit.utils import trees_equal

from conftest import LINE_WALKER, TILE_WORLD


class SilentAgent(Agent):
    def act(self, informations, update=False):
        return []


def test_parallel_matches_single(tile_arenas, oracle):
    start = time.monotonic()
    configs = [EpisodeConfig(eid=e) for e in range(4)]
    parallel = perform_parallel(tile_arenas(4), oracle, configs, mode="train")

    singles = [
        perform_single(arena, build_agent("oracle-tile"), mode="train", episode_config=config)
        for arena, config in zip(tile_arenas(4), configs)
    ]
    assert time.monotonic() - start < 5.0
    for p, s in zip(parallel, singles):
        assert set(p) == set(s)
        for field in p:
            assert trees_equal(p[field], s[field]), field


def test_results_keep_input_order(tile_arenas, oracle):
    configs = [EpisodeConfig(eid=e) for e in (7, 3, 5)]
    results = perform_parallel(tile_arenas(3), oracle, configs, workers=2)
    assert [r["eid"] for r in results] == [7, 3, 5]
    assert [r["arena_id"] for r in results] == [0, 1, 2]


def test_trial_result_shape(tile_arenas, oracle):
    res = perform_single(tile_arenas()[0], oracle, episode_config={"eid": 0})
    assert len(res["information"]) == len(res["actions"]) + 1
    assert len(res["internal_states"]) == len(res["information"])
    assert all("arena" not in info and "action_space" not in info for info in res["information"])
    assert res["information"][-1]["done"] is True
    assert res["evaluation"]["coverage"] == 1.0


def test_max_steps_caps_the_trial(line_arena):
    res = perform_single(line_arena, build_agent("random"), max_steps=2, episode_config={"eid": 0})
    assert len(res["actions"]) <= 2


def _tile_arenas_with(misplaced):
    arenas = []
    for i, count in enumerate(misplaced):
        arena = build_arena(f"toy|domain:tile-world,task:flattening,misplaced:{count},horizon:5")
        arena.setup_ray(i)
        arenas.append(arena)
    return arenas


def test_parallel_matches_single_for_uneven_trials(oracle):
    misplaced = [1, 3, 2, 4]
    configs = [EpisodeConfig(eid=e) for e in (10, 11, 12, 13)]
    parallel = perform_parallel(_tile_arenas_with(misplaced), oracle, configs, mode="train", workers=2)
    assert [len(r["actions"]) for r in parallel] == misplaced

    for p, arena, config in zip(parallel, _tile_arenas_with(misplaced), configs):
        s = perform_single(arena, build_agent("oracle-tile"), mode="train", episode_config=config)
        assert set(p) == set(s)
        for field in p:
            assert trees_equal(p[field], s[field]), field


def test_zero_max_steps_takes_no_action():
    res = perform_single(build_arena(TILE_WORLD), build_agent("oracle-tile"), mode="eval",
                         max_steps=0, episode_config={"eid": 100})
    assert res["actions"] == []
    assert len(res["information"]) == 1
    assert len(res["internal_states"]) == 1


def test_negative_max_steps(line_arena):
    with pytest.raises(UsageError):
        perform_single(line_arena, build_agent("random"), max_steps=-1, episode_config={"eid": 0})


def test_agent_termination_stops_early(oracle):
    arena = build_arena("toy|domain:tile-world,task:flattening,horizon:10")
    res = perform_single(arena, oracle, episode_config={"eid": 1})
    assert len(res["actions"]) == 3


def test_mode_from_episode_config(line_arena):
    res = run(build_agent("random"), line_arena, {"eid": 105, "mode": "eval"})
    assert res["eid"] == 105
    assert line_arena.mode == "eval"


def test_config_count_mismatch(tile_arenas, oracle):
    with pytest.raises(UsageError):
        perform_parallel(tile_arenas(2), oracle, [EpisodeConfig(eid=0)])


def test_duplicate_arena_ids(oracle):
    arenas = [build_arena("toy|domain:tile-world,task:flattening") for _ in range(2)]
    with pytest.raises(ArenaConfigError):
        perform_parallel(arenas, oracle, [EpisodeConfig(eid=0), EpisodeConfig(eid=1)])


def test_wrong_action_count(line_arena):
    with pytest.raises(ProtocolError):
        perform_single(line_arena, SilentAgent(), episode_config={"eid": 0})


def test_one_agent_per_arena(tile_arenas):
    agents = [build_agent("oracle-tile") for _ in range(2)]
    results = perform_parallel(tile_arenas(2), agents, [{"eid": 0}, {"eid": 1}])
    assert [r["evaluation"]["coverage"] for r in results] == [1.0, 1.0]


def test_save_video_dumps_frames(tmp_path, tile_arenas, oracle):
    arena = tile_arenas()[0]
    arena.set_log_dir(str(tmp_path))
    res = perform_single(arena, oracle, episode_config={"eid": 2, "save_video": True})
    assert len(res["frames"]) == len(res["actions"]) + 1
    pngs = sorted((tmp_path / "arena" / "frames" / "ep2").glob("*.png"))
    assert len(pngs) == len(res["frames"])


def test_step_logs(tmp_path, tile_arenas, oracle):
    arena = tile_arenas()[0]
    arena.set_log_dir(str(tmp_path))
    oracle.set_log_dir(str(tmp_path))
    perform_single(arena, oracle, episode_config={"eid": 0})
    arena_records = read_jsonl(tmp_path / "arena" / "steps.jsonl")
    agent_records = read_jsonl(tmp_path / "agent" / "steps.jsonl")
    assert [r["step"] for r in arena_records] == [1, 2, 3]
    assert [r["step"] for r in agent_records] == [0, 1, 2, 3]
    assert "internal_state" in agent_records[0]["payload"]


def test_shared_logs_name_their_arena(tmp_path, tile_arenas, oracle):
    arenas = tile_arenas(2)
    for arena in arenas:
        arena.set_log_dir(str(tmp_path))
    oracle.set_log_dir(str(tmp_path))
    perform_parallel(arenas, oracle, [{"eid": 4}, {"eid": 4}])
    for component in ("arena", "agent"):
        records = read_jsonl(tmp_path / component / "steps.jsonl")
        assert {r["arena_id"] for r in records} == {0, 1}
        for arena_id in (0, 1):
            steps = [r["step"] for r in records if r["arena_id"] == arena_id]
            assert steps == sorted(steps)


def test_aggregate_metrics():
    trials = [{"metrics": {"x": 1.0}}, {"metrics": {"x": 3.0, "y": 2.0}}]
    assert aggregate_metrics(trials) == {"x": {"mean": 2.0, "std": 1.0}, "y": {"mean": 2.0, "std": 0.0}}


def test_validate_writes_report(tmp_path, tile_arenas, oracle):
    report = validate(oracle, tile_arenas(2), log_dir=str(tmp_path))
    assert report["kind"] == "val"
    assert [t["eid"] for t in report["trials"]] == list(range(120, 130))
    stored = json.loads((tmp_path / "val_0.json").read_text())
    assert stored["aggregate"] == report["aggregate"]
    assert stored["created_at"]


def test_evaluate_without_episodes(oracle):
    arena = build_arena("toy|domain:tile-world,task:flattening")
    arena.eid_ranges = None
    with pytest.raises(ArenaConfigError):
        evaluate(oracle, arena)


class TestTrainAndEvaluate:
    def test_requires_trainable_agent(self, tile_arenas, oracle):
        with pytest.raises(UsageError):
            train_and_evaluate(oracle, tile_arenas())

    def test_requires_step_budget(self, tmp_path, line_arena):
        agent = build_agent("tabular-q")
        with pytest.raises(UsageError):
            train_and_evaluate(agent, line_arena, str(tmp_path))

    def test_checkpoints_and_reports(self, tmp_path, line_arena):
        agent = build_agent("tabular-q", {"total_update_steps": 200, "validation_interval": 100})
        report = train_and_evaluate(agent, line_arena, str(tmp_path))
        assert report["kind"] == "eval" and report["checkpoint"] == 200
        assert agent.list_checkpoints() == [100, 200]
        assert (tmp_path / "val_100.json").is_file()
        assert (tmp_path / "val_200.json").is_file()
        assert (tmp_path / "eval_200.json").is_file()
        assert (tmp_path / "agent" / "train_log.jsonl").is_file()

    def test_resumes_from_latest_checkpoint(self, tmp_path, line_arena):
        first = build_agent("tabular-q", {"total_update_steps": 200, "validation_interval": 100})
        train_and_evaluate(first, line_arena, str(tmp_path))

        second = build_agent("tabular-q", {"total_update_steps": 300, "validation_interval": 100})
        messages = []
        train_and_evaluate(second, build_arena(LINE_WALKER), str(tmp_path), log=messages.append)
        assert any("Resumed from update step 200" in m for m in messages)
        assert second.list_checkpoints() == [100, 200, 300]
        assert second.update_steps == 300
