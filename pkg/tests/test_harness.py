import numpy as np
import pytest
from hypothesis import given, strategies as st

from signdescent import __version__
from signdescent.harness import cli
from signdescent.harness.config import ConfigError, ExperimentConfig, load_config, save_config
from signdescent.harness.registry import (
    NOISE_SWEEP_THRESHOLDS,
    REGISTRY,
    experiment_ids,
    get_experiment,
    list_experiments,
)
from signdescent.harness.runner import (
    AGGREGATE_COLUMNS,
    CSV_COLUMNS,
    OUTPUT_ENV,
    read_csv,
    run_experiment,
    run_once,
)
from signdescent.harness.tables import bound_table_rows, emit_bound_tables, bound_validation_rows


def small_config(**kw):
    base = dict(experiment="t/quad", problem="quadratic", optimizer="signsgd-1", K=200, gamma=0.05, dim=3,
                noise_sigma=0.5, repetitions=3, checkpoint_stride=50, probe_samples=50)
    base.update(kw)
    return ExperimentConfig(**base)


configs = st.builds(
    ExperimentConfig,
    experiment=st.text("abcxyz-/=0123", min_size=1, max_size=12).filter(lambda s: s.strip("/")),
    problem=st.just("rosenbrock"),
    optimizer=st.sampled_from(["signsgd-1", "signsgd-2", "sgd"]),
    K=st.integers(1, 10**6),
    gamma=st.floats(1e-6, 10.0),
    schedule=st.sampled_from(["constant", "inverse-sqrt"]),
    dim=st.just(3),
    tau=st.integers(1, 64),
    nu=st.floats(0.0, 5.0),
    repetitions=st.integers(1, 50),
    base_seed=st.integers(0, 2**63),
    x0=st.lists(st.floats(-3, 3), min_size=3, max_size=3) | st.just([]),
    description=st.text(max_size=20),
)


@given(configs)
def test_config_round_trip(cfg):
    again = ExperimentConfig.loads(cfg.dumps())
    assert again == cfg
    assert again.dumps() == cfg.dumps()


def test_config_file_round_trip(tmp_path):
    cfg = small_config(optimizer="ssdm", gamma=None, beta=0.9, problem="partitioned-quadratic", M=2,
                       node_weights=[2.0, 0.5])
    path = tmp_path / "c.toml"
    save_config(cfg, path)
    assert load_config(path) == cfg
    assert "beta = 0.9" in path.read_text()
    assert "gamma" not in path.read_text()


@pytest.mark.parametrize("text, message", [
    ('experiment = "a"\nproblem = "quadratic"\noptimizer = "sgd"\nK = 5\ngamma = 0.1\nbogus = 1\n', "unknown"),
    ('experiment = "a"\nproblem = "quadratic"\noptimizer = "sgd"\ngamma = 0.1\n', "missing"),
    ('experiment = "a"\nproblem = "quadratic"\noptimizer = "sgd"\nK = 5.0\ngamma = 0.1\n', "integer"),
    ('experiment = "a"\nproblem = "cubic"\noptimizer = "sgd"\nK = 5\ngamma = 0.1\n', "problem"),
    ('experiment = "a"\nproblem = "quadratic"\noptimizer = "sgd"\nK = 5\n', "gamma"),
    ('experiment = "a"\nproblem = "quadratic"\noptimizer = "sgd"\nK = 5\ngamma = 0.1\nM = 3\n', "single-node"),
    ('experiment = "a"\nproblem = "counterexample"\noptimizer = "sgd"\nK = 5\ngamma = 0.1\n', "dim = 2"),
    ('experiment = "a"\nproblem = "quadratic"\noptimizer = "sgd"\nK = 5\ngamma = -1.0\n', "positive"),
    ('[table]\nK = 1\n', "flat"),
    ('K = = 1', "TOML"),
])
def test_config_errors(text, message):
    with pytest.raises(ConfigError, match=message):
        ExperimentConfig.loads(text)


def test_registry_contents():
    ids = experiment_ids()
    for required in ("fig2-const-lr", "fig2-var-lr", "fig3-const-lr", "fig4-var-lr", "fig5-step-sizes",
                     "counterexample", "ssdm-partitioned", "ssdm-vs-majority-vote", "bound-validation",
                     "norm-table", "majority-vote", "rosenbrock-noise-sweep"):
        assert required in ids
    assert [row[0] for row in list_experiments()].count("fig3-const-lr") == 1
    assert get_experiment("rosenbrock-noise-sweep") is REGISTRY["fig3-const-lr"]
    with pytest.raises(ConfigError, match="valid ids: .*fig3-const-lr"):
        get_experiment("fig9")
    fig3 = get_experiment("fig3-const-lr")
    assert [v.tau for v in fig3.variants] == [1, 2, 5, 8]
    assert all(v.gamma == 0.25 and v.K == 10_000 and v.repetitions == 10 for v in fig3.variants)
    assert [v.tau for v in get_experiment("fig4-var-lr").variants] == [1, 2, 5, 7]
    assert [v.gamma for v in get_experiment("fig5-step-sizes").variants] == [0.25, 0.1, 0.05, 0.01]
    assert [v.M for v in get_experiment("majority-vote").variants] == [1, 3, 4, 15, 16]
    assert get_experiment("counterexample").variants[0].K == 1000


def test_run_experiment_outputs(tmp_path):
    cfg = small_config()
    res = run_experiment(cfg, tmp_path)
    assert len(res.run_paths) == 3
    text = res.run_paths[0].read_text().splitlines()
    assert text[0] == f"# signdescent {__version__}"
    assert '# experiment = "t/quad"' in text
    header = [ln for ln in text if not ln.startswith("#")][0]
    assert tuple(header.split(",")) == CSV_COLUMNS
    cols, data = read_csv(res.run_paths[1])
    assert data[:, 0].tolist() == [0, 50, 100, 150, 200]
    assert np.all(data[:, cols.index("rep")] == 1) and np.all(data[:, cols.index("seed")] == 1)
    assert np.all(np.isfinite(data[:, cols.index("rho_norm_hat")]))
    assert data[-1, cols.index("bits_up")] == 200 * 3
    # the CSV carries the full-precision transcript
    rec = run_once(cfg, 1)
    assert np.array_equal(data[:, cols.index("f")], rec.f[[0, 50, 100, 150, 200]])
    acols, agg = read_csv(res.aggregate_path)
    assert acols == AGGREGATE_COLUMNS
    fs = np.stack([read_csv(p)[1][:, cols.index("f")] for p in res.run_paths])
    assert np.array_equal(agg[:, acols.index("f_mean")], fs.mean(axis=0))
    assert np.allclose(agg[:, acols.index("f_std")], fs.std(axis=0, ddof=1), rtol=0, atol=0)
    assert np.all(agg[:, acols.index("reps")] == 3)
    assert "R - 1" in res.aggregate_path.read_text()
    assert res.final_values.tolist() == fs[:, -1].tolist()


def test_reruns_are_byte_identical_for_any_worker_count(tmp_path):
    cfg = small_config(optimizer="majority-vote", M=3, problem="rosenbrock", nu=1.0, gamma=0.02, K=300)
    a = run_experiment(cfg, tmp_path / "a")
    b = run_experiment(cfg, tmp_path / "b")
    c = run_experiment(cfg, tmp_path / "c", workers=2)
    for pa, pb, pc in zip(a.run_paths + [a.aggregate_path], b.run_paths + [b.aggregate_path],
                          c.run_paths + [c.aggregate_path]):
        assert pa.read_bytes() == pb.read_bytes() == pc.read_bytes()


def test_single_repetition_std_is_nan(tmp_path):
    res = run_experiment(small_config(repetitions=1, probe_samples=0), tmp_path)
    cols, agg = read_csv(res.aggregate_path)
    assert np.all(np.isnan(agg[:, cols.index("f_std")]))


def test_every_optimizer_and_problem_runs(tmp_path):
    cases = [
        dict(problem="rosenbrock", optimizer="signsgd-2", dim=4),
        dict(problem="counterexample", optimizer="sgd", dim=2, gamma=0.01),
        dict(problem="partitioned-quadratic", optimizer="ssdm", gamma=None, M=3),
        dict(problem="partitioned-quadratic", optimizer="majority-vote", M=2, node_weights=[3.0, 1.0]),
        dict(problem="quadratic", optimizer="ssdm", gamma=None, M=2, tau=4, curvature=[1.0, 2.0, 3.0]),
    ]
    for j, kw in enumerate(cases):
        res = run_experiment(small_config(experiment=f"case{j}", repetitions=2, **kw), tmp_path)
        assert np.all(np.isfinite(res.final_values))


def test_canned_counterexample_stays_on_line():
    exp = get_experiment("counterexample")
    for cfg in exp.variants[:2]:
        for seed in range(3):
            rec = run_once(cfg, seed)
            assert np.max(np.abs(rec.iterates.sum(axis=1) - 2.0)) <= 1e-12
            assert rec.f.min() >= 1.0 - 1e-12  # the line never reaches the minimum value 0
    ssdm = run_once(exp.variants[2], 0)
    assert ssdm.final_value < 0.1


def test_canned_majority_vote_claims(tmp_path):
    results = {cfg.M: run_experiment(cfg, tmp_path) for cfg in get_experiment("majority-vote").variants}
    mean = {m: r.final_mean for m, r in results.items()}
    std = {m: r.final_std for m, r in results.items()}
    assert mean[1] >= mean[3] >= mean[15]
    for odd, even in ((3, 4), (15, 16)):
        assert abs(mean[odd] - mean[even]) <= std[odd] + std[even]


def test_canned_noise_sweep_thresholds(tmp_path):
    t = NOISE_SWEEP_THRESHOLDS
    variants = {cfg.tau: cfg.replace(probe_samples=0) for cfg in get_experiment("rosenbrock-noise-sweep").variants}
    low = run_experiment(variants[1], tmp_path).final_values
    high = run_experiment(variants[8], tmp_path).final_values
    assert np.median(low) > t["tau1_min_median_final_f"]
    assert np.mean(high < t["tau8_max_final_f"]) >= t["tau8_min_fraction_below"]


def test_bound_tables(tmp_path):
    rows = bound_table_rows()
    sandwich = [r for r in rows if r["table"] == "sandwich"]
    assert sandwich and all(r["lower"] <= r["value"] <= r["upper"] for r in sandwich)
    assert all(r["value"] == pytest.approx(1.0, abs=1e-15) for r in sandwich if r["rho"] == 1.0)
    cell = [r for r in rows if r["table"] == "beta" and r["p"] == 0.6 and r["l"] == 2]
    assert len(cell) == 1 and cell[0]["value"] == pytest.approx(0.648, abs=1e-15)
    path = emit_bound_tables(tmp_path / "b.csv")
    text = path.read_text()
    assert text.startswith(f"# signdescent {__version__}")
    assert {r["table"] for r in rows} == {"gauss", "gauss-improved", "chebyshev", "clt", "required-minibatch",
                                          "beta", "hoeffding", "sandwich"}


def test_bound_validation_rows():
    rows = bound_validation_rows(samples=20_000)
    informative = [r for r in rows if r["informative"]]
    assert informative and all(r["passed"] for r in informative)


# ---- command line -----------------------------------------------------------

def test_cli_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "fig3-const-lr" in out and "ssdm-partitioned" in out


def test_cli_run_config_file_and_env_default(tmp_path, monkeypatch, capsys):
    path = tmp_path / "exp.toml"
    save_config(small_config(repetitions=2), path)
    monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env-out"))
    assert cli.main(["run", str(path)]) == 0
    assert (tmp_path / "env-out" / "t" / "quad" / "aggregate.csv").exists()
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o"), "--seed", "5", "--reps", "1"]) == 0
    cols, data = read_csv(tmp_path / "o" / "t" / "quad" / "rep-000.csv")
    assert data[0, cols.index("seed")] == 5
    assert not (tmp_path / "o" / "t" / "quad" / "rep-001.csv").exists()


def test_cli_run_canned_tables(tmp_path, capsys):
    assert cli.main(["run", "--id", "norm-table", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "norm-table" / "bound-tables.csv").exists()
    assert cli.main(["bounds", "--out", str(tmp_path / "x.csv")]) == 0


def test_cli_run_canned_counterexample(tmp_path, capsys):
    assert cli.main(["run", "--id", "counterexample", "--reps", "2", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "counterexample" / "ssdm" / "rep-001.csv").exists()


def test_cli_probe(capsys):
    assert cli.main(["probe", "--id", "quadratic", "--point", "0.5,-1,2", "--samples", "2000"]) == 0
    out = capsys.readouterr().out
    assert "gauss" in out and "rho_hat" in out


@pytest.mark.parametrize("argv", [
    ["run", "--id", "no-such-experiment"],
    ["run"],
    ["run", "missing-file.toml"],
    ["probe", "--id", "rosenbrock", "--point", "a,b", "--samples", "10"],
    ["probe", "--id", "counterexample", "--point", "1,2,3", "--samples", "10"],
    ["nonsense"],
])
def test_cli_config_errors_exit_1(argv, capsys):
    assert cli.main(argv) == 1
    assert capsys.readouterr().err


def test_cli_runtime_error_exit_2(tmp_path, capsys):
    path = tmp_path / "diverge.toml"
    save_config(small_config(optimizer="sgd", gamma=1e300, repetitions=1, probe_samples=0), path)
    assert cli.main(["run", str(path), "--out", str(tmp_path)]) == 2
    assert "diverged" in capsys.readouterr().err
    assert cli.main(["probe", "--id", "quadratic", "--point", "nan,1", "--samples", "10"]) == 2
