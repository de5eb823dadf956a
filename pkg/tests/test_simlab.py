import math

import pytest

from nactree.simlab import ExperimentConfig, ExperimentError, ResultRow, rows_to_csv, run_experiment, run_replication

MODEL = {
    "tree": "(U1,(U2,U3))",
    "family": "clayton",
    "generators": [{"node": ["U1", "U2", "U3"], "tau": 0.2}, {"node": ["U2", "U3"], "tau": 0.8}],
}


def config(**kw):
    d = {"model": MODEL, "sample_sizes": [30, 60], "replications": 6, "bootstrap": 40, "seed": 5}
    d.update(kw)
    return ExperimentConfig.from_dict(d)


def test_config_defaults():
    cfg = ExperimentConfig.from_dict({"model": MODEL, "seed": 1})
    assert cfg.sample_sizes == (50, 100, 200, 500)
    assert cfg.replications == 100
    assert cfg.alpha == 0.10
    assert cfg.bootstrap == 200


@pytest.mark.parametrize(
    "patch",
    [
        {"replications": 0},
        {"sample_sizes": [5]},
        {"bogus": 1},
        {"model": {**MODEL, "tree": "(U1,U2)"}},
    ],
)
def test_config_errors(patch):
    with pytest.raises((ValueError, KeyError)):
        config(**patch)


def test_config_requires_seed():
    with pytest.raises(ValueError, match="seed"):
        ExperimentConfig.from_dict({"model": MODEL})


def test_run_is_deterministic():
    a = run_experiment(config())
    b = run_experiment(config())
    assert rows_to_csv(a) == rows_to_csv(b)
    assert [r.outcomes for r in a] == [r.outcomes for r in b]


def test_rows():
    rows = run_experiment(config())
    assert [r.n for r in rows] == [30, 60]
    for r in rows:
        assert r.replications == 6 == len(r.outcomes)
        assert r.correct_fraction == sum(r.outcomes) / 6
        assert r.se == pytest.approx(math.sqrt(r.correct_fraction * (1 - r.correct_fraction) / 6))


def test_progress_callback():
    seen = []
    run_experiment(config(sample_sizes=[30]), progress=seen.append)
    assert len(seen) == 1 and isinstance(seen[0], ResultRow)


def test_replication_matches_experiment():
    cfg = config(sample_sizes=[30], replications=3)
    rows = run_experiment(cfg)
    assert rows[0].outcomes == [run_replication(cfg, 30, r) for r in range(3)]


def test_csv_format():
    text = rows_to_csv([ResultRow(50, 0.9, 0.03, 100), ResultRow(100, 1.0, 0.0, 100)])
    assert text == "n,correct_fraction,se,replications\n50,0.9,0.03,100\n100,1.0,0.0,100\n"


def test_errors_carry_replication(monkeypatch):
    import nactree.simlab as simlab

    def boom(*a, **k):
        raise RuntimeError("kaputt")

    monkeypatch.setattr(simlab, "estimate_structure", boom)
    with pytest.raises(ExperimentError, match="replication 0 at n=30"):
        run_experiment(config(sample_sizes=[30]))


def test_shipped_configs_parse():
    import json
    from pathlib import Path

    from nactree.sampler import NacModel

    root = Path(__file__).resolve().parent.parent / "configs"
    files = sorted(root.glob("*.json"))
    assert files
    for f in files:
        d = json.loads(f.read_text())
        if "model" in d:
            ExperimentConfig.from_dict(d)
        elif "tree" in d:
            NacModel.from_dict(d)
        else:
            assert d["columns"] == ["ANF", "AMZN", "ChM", "PCh", "GBLB", "KBC"]
