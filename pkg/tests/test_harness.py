import re
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from ptflab.agents import Policy
from ptflab.envs import load_env_spec, parse_env_config
from ptflab.errors import ConfigurationError, ParseError, PolicyFileError
from ptflab.harness.cli import main
from ptflab.harness.config import ExperimentConfig, load_config, parse_config
from ptflab.harness.curves import aggregate, emit_curves, mean_band, smooth, trend_slope
from ptflab.harness.metrics import MetricsRecord, read_metrics, write_metrics
from ptflab.harness.policyfile import (encode_policy, load_manifest, load_policy,
                                       save_policy)
from ptflab.harness.runner import (evaluate_policy, grid_greedy_ratio, run_training,
                                   train_source_policies)

ERROR_LINE = re.compile(r"^error: [\w-]+: \S.*$")


def _write(path, text):
    path.write_text(text)
    return path


def _a3c_cfg(tmp_path, **extra):
    lines = {"env": "open5", "algorithm": "a3c", "seeds": "0,1", "episodes": "15",
             "workers": "2"}
    lines.update({k: str(v) for k, v in extra.items()})
    return _write(tmp_path / "run.cfg", "".join(f"{k} = {v}\n" for k, v in lines.items()))


# ------------------------------------------------------------------ policy files

@pytest.mark.parametrize("space", [("discrete", 4), ("continuous", 2)])
def test_policy_round_trip(tmp_path, rng, space):
    p = Policy.create(10, space, rng, (7, 5))
    if space[0] == "continuous":
        p.params.set("log_std", np.array([-0.3, 0.2]))
    path = tmp_path / "p.ptfpol"
    save_policy(path, p)
    q = load_policy(path)
    assert np.array_equal(p.params.flat, q.params.flat)
    assert q.action_space == space and tuple(q.spec.dims) == tuple(p.spec.dims)
    for s in rng.normal(size=(100, 10)):
        a, b = p.dist(s), q.dist(s)
        if space[0] == "discrete":
            assert np.array_equal(a, b)
        else:
            assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    assert encode_policy(q) == path.read_bytes()


def _saved(tmp_path, rng):
    path = tmp_path / "p.ptfpol"
    save_policy(path, Policy.create(3, ("discrete", 2), rng, (4,)))
    return path, bytearray(path.read_bytes())


def test_corrupted_payload_fails_checksum(tmp_path, rng):
    path, data = _saved(tmp_path, rng)
    data[data.index(b"\n") + 5] ^= 0x01
    path.write_bytes(bytes(data))
    with pytest.raises(PolicyFileError, match="checksum"):
        load_policy(path)


def test_wrong_version_is_explicit(tmp_path, rng):
    path, data = _saved(tmp_path, rng)
    path.write_bytes(bytes(data).replace(b"PTFPOL 1", b"PTFPOL 2", 1))
    with pytest.raises(PolicyFileError, match="version 2"):
        load_policy(path)


@pytest.mark.parametrize("mutate,pattern", [
    (lambda d: d[:-3], "truncated"),
    (lambda d: d + b"\0", "trailing"),
    (lambda d: b"NOTPOL" + d[6:], "header"),
    (lambda d: d.replace(b"discrete:2", b"discrete:3", 1), "do not fit"),
])
def test_malformed_policy_files(tmp_path, rng, mutate, pattern):
    path, data = _saved(tmp_path, rng)
    path.write_bytes(mutate(bytes(data)))
    with pytest.raises(PolicyFileError, match=pattern):
        load_policy(path)


def test_manifest(tmp_path):
    _write(tmp_path / "m.txt", "# sources\na.ptfpol\n\n/abs/b.ptfpol\n")
    assert load_manifest(tmp_path / "m.txt") == [tmp_path / "a.ptfpol", Path("/abs/b.ptfpol")]
    _write(tmp_path / "empty.txt", "# nothing\n")
    with pytest.raises(PolicyFileError):
        load_manifest(tmp_path / "empty.txt")


# ------------------------------------------------------------------ config

def test_config_defaults_match_hyperparameter_tables():
    c = ExperimentConfig()
    assert (c.gamma, c.actor_lr, c.option_lr, c.option_batch, c.xi, c.target_sync) == \
        (0.99, 3e-4, 1e-3, 32, 1e-3, 1000)
    assert (c.epsilon_start, c.epsilon_end, c.epsilon_decrement) == (1.0, 0.05, 1e-3)
    assert c.resolved_entropy == 1e-4
    assert c.with_overrides(algorithm="ppo").resolved_entropy == 0.005
    assert c.option_hidden == (32, 32)


def test_config_parses_and_echoes():
    c = parse_config("env = open5\nalgorithm = ptf-a3c\nsources = m.txt\n"
                     "seeds = 3, 4\nsource_goals = 1,2; 3,4\ndeterministic = no\n")
    assert c.seeds == (3, 4) and c.source_goals == ((1.0, 2.0), (3.0, 4.0))
    assert not c.deterministic
    again = parse_config("\n".join(c.describe()))
    assert again == c.with_overrides(entropy_coef=c.resolved_entropy)


@pytest.mark.parametrize("text,rule", [
    ("env = a\nlearning_rate = 1\n", "unknown key"),
    ("env = a\nenv = b\n", "duplicate key"),
    ("env a\n", "key = value"),
    ("episodes = many\n", "value of episodes"),
    ("algorithm = dqn\n", "config invariant"),
    ("algorithm = ptf-a3c\n", "config invariant"),
    ("seeds = \n", "config invariant"),
    ("transfer = sometimes\n", "config invariant"),
])
def test_config_errors(text, rule):
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert info.value.rule == rule


def test_bundled_configs_load():
    cfgs = sorted((Path(__file__).parent.parent / "configs").glob("*.cfg"))
    assert len(cfgs) >= 5
    for path in cfgs:
        c = load_config(path)
        assert c.env and c.seeds


# ------------------------------------------------------------------ curves

def test_smooth_trailing_average():
    np.testing.assert_allclose(smooth([1, 2, 3, 4], 2), [1, 1.5, 2.5, 3.5])
    np.testing.assert_array_equal(smooth([1.0, 5.0], 1), [1.0, 5.0])


def test_band_examples():
    mean, half = mean_band([[1.0, 2.0, 3.0]])
    assert np.array_equal(mean, [1, 2, 3]) and np.all(half == 0)
    mean, half = mean_band(np.full((20, 5), 2.5))
    assert np.allclose(mean, 2.5) and np.all(half == 0)
    # two rows: t(0.975, 1) * sd / sqrt(2)
    _, half = mean_band([[0.0], [2.0]])
    assert half[0] == pytest.approx(12.706204736 * np.sqrt(2) / np.sqrt(2), rel=1e-9)


def test_trend_slope_matches_least_squares():
    series = [10, 8, 7, 5, 4, 2, 1]
    assert trend_slope(series) == pytest.approx(np.polyfit(np.arange(7), series, 1)[0])
    assert trend_slope(series) < 0
    assert trend_slope([3.0]) == 0.0


def _records(seed, n, ret=1.0, switches=0):
    return [MetricsRecord(seed, i + 1, 10 * (i + 1), ret, ret, 10, (5, 5), switches, 0.5, 0.1)
            for i in range(n)]


def test_aggregate_truncates_with_warning():
    with pytest.warns(UserWarning, match="truncating to 3"):
        c = aggregate({0: _records(0, 5), 1: _records(1, 3)}, window=1)
    assert c.episodes == 3


def test_metrics_round_trip(tmp_path):
    recs = _records(4, 6, ret=0.123456789012345, switches=2)
    write_metrics(tmp_path / "m.csv", recs, ["hello = 1"])
    header, back = read_metrics(tmp_path / "m.csv")
    assert header == ["hello = 1"] and back == recs
    _write(tmp_path / "bad.csv", "a,b\n1,2\n")
    with pytest.raises(ConfigurationError):
        read_metrics(tmp_path / "bad.csv")


# ------------------------------------------------------------------ training runs

def test_run_training_outputs_and_determinism(tmp_path):
    cfg = load_config(_a3c_cfg(tmp_path))
    a = run_training(cfg, tmp_path / "a")
    b = run_training(cfg, tmp_path / "b")
    for ra, rb in zip(a, b):
        assert ra.metrics_path.read_bytes() == rb.metrics_path.read_bytes()
        assert ra.policy_path.read_bytes() == rb.policy_path.read_bytes()
    header, recs = read_metrics(a[0].metrics_path)
    assert "algorithm = a3c" in header and "run_seed = 0" in header
    assert [r.episode for r in recs] == list(range(1, 16))
    steps = [r.steps for r in recs]
    assert all(x < y for x, y in zip(steps, steps[1:]))
    assert a[0].metrics_path.read_bytes() != a[1].metrics_path.read_bytes()


def test_aggregation_order_independent(tmp_path):
    cfg = load_config(_a3c_cfg(tmp_path, seeds="0,1,2", episodes=8))
    run_training(cfg, tmp_path / "runs")
    shuffled = tmp_path / "shuffled"
    shuffled.mkdir()
    for i, seed in enumerate((2, 0, 1)):
        shutil.copy(tmp_path / "runs" / f"metrics_seed{seed}.csv",
                    shuffled / f"metrics_{i}.csv")
    c1, p1, _ = emit_curves(tmp_path / "runs", tmp_path / "one.csv", window=3)
    c2, p2, _ = emit_curves(shuffled, tmp_path / "two.csv", window=3)
    assert c1.read_bytes() == c2.read_bytes()
    assert p1.read_bytes() == p2.read_bytes()
    assert "# smoothing_window = 3" in c1.read_text()


def test_ptf_run_records_option_histogram(tmp_path, rng):
    src_dir = tmp_path / "src"
    src_dir.mkdir()
    names = []
    for i in range(4):
        save_policy(src_dir / f"s{i}.ptfpol", Policy.create(10, ("discrete", 4), rng, (8,)))
        names.append(f"s{i}.ptfpol")
    _write(src_dir / "manifest.txt", "\n".join(names) + "\n")
    cfg = load_config(_a3c_cfg(tmp_path, algorithm="ptf-a3c", sources="src/manifest.txt",
                               seeds=0, episodes=10))
    res = run_training(cfg, tmp_path / "out")[0]
    _, recs = read_metrics(res.metrics_path)
    assert all(len(r.option_hist) == 4 and sum(r.option_hist) == r.length for r in recs)


def test_source_width_mismatch_is_startup_error(tmp_path, rng):
    save_policy(tmp_path / "s.ptfpol", Policy.create(3, ("discrete", 4), rng, (8,)))
    _write(tmp_path / "m.txt", "s.ptfpol\n")
    cfg = load_config(_a3c_cfg(tmp_path, algorithm="ptf-a3c", sources="m.txt"))
    with pytest.raises(ConfigurationError, match="width"):
        run_training(cfg, tmp_path / "out")


def test_train_sources_and_imperfect(tmp_path):
    cfg = load_config(_a3c_cfg(tmp_path, source_goals="0,0; 4,0", source_episodes=1500,
                               source_check_every=100, workers=1))
    results = train_source_policies(cfg, tmp_path / "ok")
    assert [r.status for r in results] == ["ok", "ok"]
    assert (tmp_path / "ok" / "manifest.txt").read_text() == "source_0.ptfpol\nsource_1.ptfpol\n"
    spec = load_env_spec("open5")
    for r, goal in zip(results, [(0, 0), (4, 0)]):
        pol = load_policy(r.path)
        assert grid_greedy_ratio(pol, spec.with_goal(goal)) >= 0.9
    early = train_source_policies(cfg, tmp_path / "early", imperfect=0.5)
    assert all(r.status == "imperfect" for r in early)
    assert all(e.episodes <= r.episodes + 1500 for e, r in zip(early, results))


def test_train_sources_budget_warning(tmp_path):
    cfg = load_config(_a3c_cfg(tmp_path, source_goals="0,0", source_episodes=2,
                               source_check_every=2, workers=1))
    with pytest.warns(UserWarning, match="below threshold"):
        res = train_source_policies(cfg, tmp_path / "out")
    assert res[0].status == "below-threshold" and res[0].path.exists()


# ------------------------------------------------------------------ evaluation

class _ShortestPath:
    """Greedy oracle for an open grid with the goal in the bottom-right corner."""
    obs_width = 10
    action_space = ("discrete", 4)

    def __init__(self, w, h):
        self.w, self.h = w, h

    def greedy(self, obs):
        x, y = round(obs[0] * (self.w - 1)), round(obs[1] * (self.h - 1))
        return 3 if x < self.w - 1 else 1


def test_evaluate_optimal_policy_exact():
    spec = parse_env_config("grid 5 5\nS....\n.....\n.....\n.....\n....G\n")
    mean, std, _ = evaluate_policy(_ShortestPath(5, 5), spec, 3)
    assert mean == 5 * 0.99 ** 7 and std == 0.0


def test_evaluate_random_policy_near_zero(rng):
    spec = load_env_spec("grid_w")
    pol = Policy.create(10, ("discrete", 4), rng, (8,))
    mean, _, _ = evaluate_policy(pol, spec, 20)
    assert mean < 0.5


def test_evaluate_contract(rng):
    spec = load_env_spec("open5")
    with pytest.raises(ConfigurationError):
        evaluate_policy(_ShortestPath(5, 5), spec, 0)
    with pytest.raises(ConfigurationError):
        evaluate_policy(Policy.create(4, ("discrete", 4), rng, (8,)), spec, 1)


# ------------------------------------------------------------------ CLI

def _cli(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_train_eval_plot(tmp_path, capsys):
    cfg = _a3c_cfg(tmp_path)
    code, out, _ = _cli(capsys, "train", "--config", cfg, "--seed", 1, "--deterministic",
                        "--transfer", "off", "--out", tmp_path / "runs")
    assert code == 0 and "seed=1 episodes=15" in out
    code, out, _ = _cli(capsys, "eval", "--policy", tmp_path / "runs" / "policy_seed1.ptfpol",
                        "--env", "open5", "--episodes", 3)
    assert code == 0 and out.startswith("mean=")
    code, out, _ = _cli(capsys, "plot", "--in", tmp_path / "runs", "--out", tmp_path / "c.png")
    assert code == 0 and (tmp_path / "c.png").exists() and (tmp_path / "c.csv").exists()


def test_cli_train_sources(tmp_path, capsys):
    cfg = _a3c_cfg(tmp_path, source_goals="0,0", source_episodes=4, source_check_every=2,
                   workers=1)
    code, out, err = _cli(capsys, "train-sources", "--config", cfg, "--imperfect", 0.5,
                          "--out", tmp_path / "src")
    assert code == 0 and "status=" in out
    assert (tmp_path / "src" / "manifest.txt").exists()


@pytest.mark.parametrize("argv_fn,kind", [
    (lambda p: ["train", "--config", p / "missing.cfg", "--out", p], "ConfigurationError"),
    (lambda p: ["train", "--config", _write(p / "bad.cfg", "lr = 3\n"), "--out", p],
     "ParseError"),
    (lambda p: ["eval", "--policy", _write(p / "junk.ptfpol", "junk"), "--env", "open5",
                "--episodes", "2"], "PolicyFileError"),
    (lambda p: ["eval", "--policy", p / "x", "--env", "open5", "--episodes", "0"], "contract"),
    (lambda p: ["plot", "--in", p, "--out", p / "x.png"], "ConfigurationError"),
    (lambda p: ["train", "--config", "x", "--transfer", "maybe", "--out", p], "usage"),
    (lambda p: ["frobnicate"], "usage"),
])
def test_cli_errors_single_line(tmp_path, capsys, argv_fn, kind):
    code, out, err = _cli(capsys, *argv_fn(tmp_path))
    assert code != 0
    lines = err.strip().splitlines()
    assert len(lines) == 1 and ERROR_LINE.match(lines[0])
    assert lines[0].startswith(f"error: {kind}: ")


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "ptflab", "eval", "--policy",
                           str(tmp_path / "nope"), "--env", "open5", "--episodes", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert proc.stderr.startswith("error: PolicyFileError: cannot read")
