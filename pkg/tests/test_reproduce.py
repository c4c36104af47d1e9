import hashlib
import json
from importlib import resources

import jsonschema
import numpy as np
import pytest

from wijsman_lab.reproduce import (
    THEOREMS,
    RunConfig,
    random_control_gaps,
    random_control_sequence,
    reproduce,
)

SCHEMA = json.loads(resources.files("wijsman_lab").joinpath(
    "schemas/reproduction_report.schema.json").read_text())


@pytest.fixture(scope="module")
def reports(tmp_path_factory):
    out = tmp_path_factory.mktemp("rep")
    cfg = RunConfig(N=20_000, traces=4)
    return out, {t: reproduce(t, RunConfig(**{**cfg.__dict__, "out": str(out / t)})) for t in THEOREMS}


@pytest.mark.parametrize("theorem", THEOREMS)
def test_suite_passes(reports, theorem):
    rep = reports[1][theorem]
    failed = [a for a in rep.assertions if not a.passed]
    assert rep.status == "ok" and not failed, failed
    assert any(a.name == "identity_reduction_exact" for a in rep.assertions)


@pytest.mark.parametrize("theorem", THEOREMS)
def test_report_validates_and_traces_written(reports, theorem):
    out, reps = reports
    d = json.loads((out / theorem / f"{theorem}_report.json").read_text())
    jsonschema.validate(d, SCHEMA)
    assert d["seed"] == 1
    assert list((out / theorem).glob("*.csv"))


def digests(path):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(path.glob("*"))}


def test_rerun_bit_identical(tmp_path):
    for t in ("th1compatible", "converse1"):
        a = reproduce(t, RunConfig(N=5000, out=str(tmp_path / "a")))
        b = reproduce(t, RunConfig(N=5000, out=str(tmp_path / "b")))
        assert a.passed and b.passed
    assert digests(tmp_path / "a") == digests(tmp_path / "b")


def test_seed_changes_random_control():
    a = random_control_gaps(1000, 0.1, np.random.default_rng(1))
    b = random_control_gaps(1000, 0.1, np.random.default_rng(2))
    assert not np.array_equal(a, b)
    assert np.all((a >= 0) & (a <= 1))
    seq = random_control_sequence(100, 0.5, 3)
    assert seq.meta["seed"] == 3 and len(seq) == 100


def test_construction_failure_report():
    rep = reproduce("converse1", RunConfig(fn="identity", c=0.9))
    assert rep.status == "construction-failure"
    assert not rep.passed
    assert rep.failing_step == 1
    jsonschema.validate(rep.as_dict(), SCHEMA)


def test_wrong_tolerance_fails_assertion():
    rep = reproduce("converse1", RunConfig(delta=0.9))
    assert rep.status == "ok" and not rep.passed
    assert [a.name for a in rep.assertions if not a.passed] == ["WSf_not_converged_at_scale"]


def test_non_compatible_modulus_fails_positive_control():
    rep = reproduce("th1compatible", RunConfig(fn="log1p", N=5000))
    names = {a.name for a in rep.assertions if not a.passed}
    assert "modulus_is_compatible" in names


def test_unknown_theorem():
    with pytest.raises(ValueError):
        reproduce("th9")


def test_schedule_recorded():
    rep = reproduce("reciprocolacunary-a")
    sched = rep.as_dict()["params"]["schedule"]
    assert sched["r"] == [11, 21, 31, 41, 51, 61]
    assert sched["theta"] == "pow2:62"
