import math

import pytest

from cobrawalk import experiments, graphs
from cobrawalk.experiments import ExperimentSpec, phase_bounds, phase_trace, summarize
from cobrawalk.process import BranchingSpec, TrialRecord


def test_run_trials_fixed_start(petersen):
    recs = experiments.run_trials(ExperimentSpec(petersen, trials=10, seed=4))
    assert len(recs) == 10
    assert len({tuple(r.seed) for r in recs}) == 10
    assert recs == experiments.run_trials(ExperimentSpec(petersen, trials=10, seed=4))


def test_run_trials_all_starts():
    recs = experiments.run_trials(ExperimentSpec(graphs.gen_complete(4), start_policy="all",
                                                 trials=2))
    assert len(recs) == 8
    assert sorted({r.start for r in recs}) == [0, 1, 2, 3]


def test_run_trials_sample_starts(petersen):
    spec = ExperimentSpec(petersen, "bips", start_policy="sample", sample_size=3, trials=2, seed=1)
    recs = experiments.run_trials(spec)
    assert len(recs) == 6 and len({r.start for r in recs}) == 3


def test_run_trials_worker_independent(petersen):
    one = experiments.run_trials(ExperimentSpec(petersen, trials=6, seed=2, workers=1))
    two = experiments.run_trials(ExperimentSpec(petersen, trials=6, seed=2, workers=2))
    assert one == two


def test_spec_validation():
    with pytest.raises(ValueError):
        ExperimentSpec("petersen", trials=0)
    with pytest.raises(ValueError):
        ExperimentSpec("petersen", process="sir")
    with pytest.raises(ValueError):
        ExperimentSpec("petersen", start=10).starts(10)


def test_summarize():
    s = summarize([1, 2, 3])
    assert (s.mean, s.median, s.count, s.censored) == (2, 2, 3, 0)
    s = summarize([5, 5, 5, 5])
    assert s.q05 == s.q95 == 5 and s.stderr == 0
    s = summarize([None, None])
    assert s.count == 0 and s.censored == 2 and s.any_censored and math.isnan(s.mean)
    s = summarize([4, None, 6])
    assert s.mean == 5 and s.censored == 1 and s.any_censored
    with pytest.raises(ValueError):
        summarize([])


def test_check_censoring():
    experiments.check_censoring(summarize([1] * 100 + [None]))
    with pytest.raises(experiments.CensoringError):
        experiments.check_censoring(summarize([1] * 98 + [None] * 2))


def test_phase_bounds():
    b = phase_bounds(1024, 0.5, C=3, K=4000)
    ln = math.log(1024)
    assert b.T2 == pytest.approx(46 * ln)
    assert b.T3 == pytest.approx(8 * ln / 0.5)
    assert b.m == pytest.approx(4000 * ln / 0.25)
    assert b.T1 == pytest.approx(13 * b.m / 0.5 + 24 * 3 * ln / 0.25)
    prev = None
    for lam in (0.1, 0.5, 0.9, 0.99, 0.999):
        cur = phase_bounds(1024, lam)
        if prev:
            assert cur.T1 > prev.T1 and cur.T2 > prev.T2 and cur.T3 > prev.T3 and cur.m > prev.m
        prev = cur
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ValueError):
            phase_bounds(100, bad)


def _bips_record(sizes, n, time):
    return TrialRecord("bips", "g", n, 0, {}, [0], len(sizes) - 1, time, size_trajectory=sizes)


def test_phase_trace_jump():
    rep = phase_trace(_bips_record([1, 100], 100, 1), phase_bounds(100, 0.5))
    assert (rep.t_a, rep.t_b, rep.t_c) == (1, 1, 1)
    assert rep.phase1_ok and rep.phase2_ok and rep.phase3_ok and not rep.violated


def test_phase_trace_censored():
    rep = phase_trace(_bips_record([1, 2, 3, 60], 100, None), phase_bounds(100, 0.5))
    assert rep.t_a == 3 and rep.t_b is None and rep.t_c is None
    assert rep.phase2_ok is None and rep.phase3_ok is None


def test_phase_trace_violation_detected():
    b = phase_bounds(100, 0.5)
    sizes = [1] + [2] * int(b.T1 + 5) + [100]
    rep = phase_trace(_bips_record(sizes, 100, len(sizes) - 1), b)
    assert rep.violated and rep.phase1_ok is False


def test_phase_trace_needs_trajectory():
    rec = _bips_record([1, 2], 2, 1)
    rec.size_trajectory = None
    with pytest.raises(ValueError):
        phase_trace(rec, phase_bounds(2, 0.5))


def test_phase_milestones_ordered():
    g = graphs.gen_random_regular(512, 3, 3)
    rows, bounds, lam = experiments.phase_study(512, 3, trials=5, seed=3)
    assert bounds.phase1_threshold <= 0.9 * 512
    for r in rows:
        assert r["t_a"] <= r["t_b"] <= r["t_c"] == r["infec"]


def test_scaling_study_row():
    rows = experiments.scaling_study([64], 3, BranchingSpec.integer(2), trials=1, seed=0)
    assert len(rows) == 1
    row = rows[0]
    assert all(row[c] is not None for c in experiments.SCALING_COLUMNS)
    assert row["ratio"] == pytest.approx(row["median"] * (1 - row["lambda"]) ** 3 / math.log(64))


def test_complete_graph_cover_is_logarithmic():
    # K_n: lambda = 1/(n-1); cover time grows like log n
    meds = []
    for n in (16, 64, 256):
        g = graphs.gen_complete(n)
        recs = experiments.run_trials(ExperimentSpec(g, trials=30, seed=1, max_steps=10_000))
        meds.append(summarize(recs).median / math.log(n))
    assert max(meds) / min(meds) < 2


def test_csv_and_metadata():
    text = experiments.rows_to_csv([{"a": 1, "b": 0.5, "c": None, "d": True}], ["a", "b", "c", "d"])
    assert text == "a,b,c,d\n1,0.5,,true\n"
    assert '"log_base": "e"' in experiments.metadata(seed=0)


def test_parse_spec_file():
    assert experiments.parse_spec_file("# x\nsizes = 1,2\ntrials=3  # c\n") == {
        "sizes": "1,2", "trials": "3"}
    with pytest.raises(ValueError):
        experiments.parse_spec_file("nonsense")
