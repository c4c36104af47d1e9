import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wijsman_lab.diagnostics import (
    DiagnosticError,
    GapTrace,
    WitnessSet,
    assess,
    build_trace,
    cesaro_trace,
    chebyshev_violations,
    density_trace,
    f_cesaro_trace,
    f_density_trace,
    lacunary_f_cesaro_trace,
    lacunary_f_density_trace,
    lacunary_ui_diag,
    normalize_mode,
    uniform_integrability_diag,
)
from wijsman_lab.lacunary import LacunarySchedule
from wijsman_lab.metric_sets import Ball, SetSequence, Singleton
from wijsman_lab.modulus import make_builtin
from wijsman_lab.reproduce import builtin_zoo

gap_lists = st.lists(st.floats(0, 3, allow_nan=False), min_size=1, max_size=60)
run_lists = st.lists(st.tuples(st.integers(1, 9), st.floats(0, 3, allow_nan=False)),
                     min_size=1, max_size=15)


def runs_trace(runs):
    starts, vals, pos = [], [], 1
    for length, v in runs:
        starts.append(pos)
        vals.append(v)
        pos += length
    return GapTrace(np.zeros(1), starts, vals, pos - 1)


# ---- oracles in plain python ----------------------------------------------

def py_count(g, eps, n):
    return sum(1 for v in g[:n] if v > eps)


def py_sum(g, n):
    return math.fsum(g[:n])


def py_ui(g, c):
    return max(math.fsum(v for v in g[:n] if v >= c) / n for n in range(1, len(g) + 1))


# ---- tests ------------------------------------------------------------------

@settings(max_examples=150)
@given(run_lists, st.sampled_from([0.0, 0.25, 0.5, 1.0, 2.0]))
def test_rle_aggregates_match_dense(runs, eps):
    tr = runs_trace(runs)
    g = list(tr.dense())
    n = np.arange(0, tr.length + 1)
    assert tr.prefix_count(eps, n).tolist() == [py_count(g, eps, k) for k in n]
    np.testing.assert_allclose(tr.prefix_sum(n), [py_sum(g, k) for k in n], rtol=1e-12, atol=1e-12)
    above = [math.fsum(v for v in g[:k] if v >= eps) for k in n]
    np.testing.assert_allclose(tr.prefix_sum_above(eps, n), above, rtol=1e-12, atol=1e-12)


@settings(max_examples=150)
@given(run_lists, st.sampled_from([0.1, 0.5, 1.0, 1.5]))
def test_ui_sup_at_breakpoints_equals_full_sup(runs, c):
    tr = runs_trace(runs)
    g = list(tr.dense())
    ((cc, ui),) = uniform_integrability_diag(tr, [c])
    assert cc == c
    assert ui == pytest.approx(py_ui(g, c), rel=1e-12, abs=1e-15)


def test_density_and_cesaro_small_example():
    tr = GapTrace.from_gaps([1.0, 0.0, 1.0])
    assert density_trace(tr, 0.5).tolist() == [1.0, 0.5, 2 / 3]
    assert len(density_trace(tr, 0.5)) == 3
    np.testing.assert_allclose(cesaro_trace(tr), [1.0, 0.5, 2 / 3])
    f = make_builtin("log1p")
    np.testing.assert_allclose(f_density_trace(tr, 0.5, f), np.log1p([1, 1, 2]) / np.log1p([1, 2, 3]))
    np.testing.assert_allclose(f_cesaro_trace(tr, f, [3]), [math.log(3) / math.log(4)])


def test_trace_validation():
    with pytest.raises(DiagnosticError):
        GapTrace.from_gaps([])
    with pytest.raises(DiagnosticError):
        GapTrace.from_gaps([-1.0])
    with pytest.raises(DiagnosticError):
        GapTrace(np.zeros(1), [2], [0.0], 3)
    tr = GapTrace.from_gaps([0.0, 1.0])
    with pytest.raises(DiagnosticError):
        tr.prefix_count(0.5, [3])
    with pytest.raises(DiagnosticError):
        density_trace(tr, 0.5, [0])


@settings(max_examples=200)
@given(gap_lists, st.sampled_from([2.0**-i for i in range(1, 7)]),
       st.sampled_from(range(8)))
def test_density_le_twice_f_density(g, eps, which):
    # for any modulus: m/n <= 2 f(m)/f(n), m <= n
    f = builtin_zoo()[which]
    tr = GapTrace.from_gaps(g)
    d = density_trace(tr, eps)
    fd = f_density_trace(tr, eps, f)
    assert np.all(d <= 2 * fd + 1e-12)


@settings(max_examples=200)
@given(gap_lists, st.sampled_from(range(8)))
def test_chebyshev_domination(g, which):
    tr = GapTrace.from_gaps(g)
    assert chebyshev_violations(tr, builtin_zoo()[which], [2.0**-i for i in range(1, 7)]) == 0


def test_chebyshev_catches_non_subadditive():
    from wijsman_lab.modulus import ModulusFunction

    # f(count) for t^3 outruns 2 f(sum) when gaps are just above eps
    cube = ModulusFunction("cube", lambda t: np.asarray(t, dtype=float) ** 3)
    tr = GapTrace.from_gaps([0.51] * 50)
    assert chebyshev_violations(tr, cube, [0.5]) > 0


@settings(max_examples=100)
@given(gap_lists, st.integers(1, 8))
def test_identity_reduction_exact(g, horizon):
    tr = GapTrace.from_gaps(g)
    ident = make_builtin("identity")
    for eps in (0.5, 0.125):
        assert np.array_equal(f_density_trace(tr, eps, ident), density_trace(tr, eps))
    assert np.array_equal(f_cesaro_trace(tr, ident), cesaro_trace(tr))
    theta = LacunarySchedule.pow2(horizon)
    if theta.complete_blocks(tr.length)[0] > 0:
        a = lacunary_f_density_trace(tr, 0.5, ident, theta).ratios
        b = lacunary_f_density_trace(tr, 0.5, None, theta).ratios
        assert np.array_equal(a, b)


@settings(max_examples=100)
@given(st.lists(st.floats(0, 2, allow_nan=False), min_size=2, max_size=70))
def test_block_aggregates_brute_force(g):
    theta = LacunarySchedule((0, 2, 5, 9, 20, 40, 70))
    tr = GapTrace.from_gaps(g)
    R, partial = theta.complete_blocks(len(g))
    if R == 0:
        with pytest.raises(DiagnosticError):
            lacunary_f_cesaro_trace(tr, None, theta)
        return
    f = make_builtin("power_sum", p=0.5, q=1)
    dens = lacunary_f_density_trace(tr, 0.25, f, theta)
    ces = lacunary_f_cesaro_trace(tr, None, theta)
    assert dens.blocks.tolist() == list(range(1, R + 1))
    assert dens.excluded_partial == partial
    for r in range(1, R + 1):
        lo, hi = theta.block(r)
        block = g[lo - 1 : hi]
        h = hi - lo + 1
        cnt = sum(1 for v in block if v > 0.25)
        assert dens.ratios[r - 1] == pytest.approx(f(cnt) / f(h), rel=1e-12)
        assert ces.ratios[r - 1] == pytest.approx(math.fsum(block) / h, rel=1e-12, abs=1e-15)
    lui = dict(lacunary_ui_diag(tr, theta, [0.5]))[0.5]
    brute = max(math.fsum(v for v in g[theta.k[r - 1]:theta.k[r]] if v >= 0.5) / theta.h(r)
                for r in range(1, R + 1))
    assert lui == pytest.approx(brute, rel=1e-12, abs=1e-15)
    raw = dict(lacunary_ui_diag(tr, theta, [0.5], normalized=False))[0.5]
    assert raw >= lui - 1e-15


def test_build_trace_paths_agree():
    rng = np.random.default_rng(4)
    vals = rng.random(200)
    items = [Singleton([v]) for v in vals]
    limit = Singleton([0.0])
    fast = build_trace(SetSequence.from_items(items, limit), 0.3)
    slow_seq = SetSequence.from_items(items[:-1] + [Ball([vals[-1]], 0.0)], limit)
    slow = build_trace(slow_seq, 0.3)
    np.testing.assert_array_equal(fast.values, slow.values)
    np.testing.assert_allclose(fast.values, np.abs(np.abs(vals - 0.3) - 0.3))


def test_witness_set():
    W = WitnessSet.default()
    assert len(W) == 6
    assert WitnessSet.label(np.array([0.25])) == "0.25"
    with pytest.raises(DiagnosticError):
        WitnessSet(())
    with pytest.raises(DiagnosticError):
        WitnessSet(([0.0], [0.0, 1.0]))


@pytest.mark.parametrize("alias,mode", [
    ("WS", "WS"), ("WSf", "WS_f"), ("WS_f", "WS_f"), ("WSθ", "WS_theta"),
    ("WSθf", "WS_theta_f"), ("WN^f", "WN_f"), ("WNtheta_f", "WN_theta_f"),
    ("WIθ", "WI_theta"), ("wi", "WI"),
])
def test_mode_aliases(alias, mode):
    assert normalize_mode(alias) == mode


def test_mode_unknown():
    with pytest.raises(DiagnosticError):
        normalize_mode("WX")


def indicator_seq(bits):
    return SetSequence.from_items([Singleton([float(b)]) for b in bits], Singleton([0.0]))


def test_assess_verdicts():
    bits = [1 if k % 10 == 0 else 0 for k in range(1, 1001)]
    seq = indicator_seq(bits)
    v = assess(seq, mode="WS", delta=0.1)
    assert v.converged and v.decision == "converged-at-scale"
    assert v.ratios["0.0"] == pytest.approx(0.1)
    assert v.ratios["0.5"] == 0.0
    v = assess(seq, mode="WS", delta=0.05)
    assert not v.converged
    vf = assess(seq, mode="WSf", f=make_builtin("log1p"), delta=0.5)
    assert not vf.converged
    assert vf.ratios["0.0"] == pytest.approx(math.log1p(100) / math.log1p(1000))
    assert assess(seq, mode="WS", N=9, delta=0.0).converged
    d = v.as_dict()
    assert d["mode"] == "WS" and d["scale"] == 1000 and d["decision"] == "not-converged-at-scale"


def test_assess_block_and_ui_modes():
    bits = [0] * 64
    bits[40] = 1
    seq = indicator_seq(bits)
    th = LacunarySchedule.pow2(6)
    v = assess(seq, mode="WSθ", theta=th, delta=0.05)
    assert v.converged
    v = assess(seq, mode="WSθ", theta=th, delta=0.01)
    assert v.ratios["0.0"] == pytest.approx(1 / 32)
    ui = assess(seq, mode="WI", c_grid=[0.5], delta=0.0)
    assert ui.ratios["0.0"] == pytest.approx(1 / 41)
    uit = assess(seq, mode="WIθ", theta=th, c_grid=[0.5], delta=0.0)
    assert uit.ratios["0.0"] == pytest.approx(1 / 32)


def test_assess_argument_errors():
    seq = indicator_seq([0, 1, 0, 1])
    with pytest.raises(DiagnosticError):
        assess(seq, mode="WSf")
    with pytest.raises(DiagnosticError):
        assess(seq, mode="WNθ")
    with pytest.raises(DiagnosticError):
        assess(seq, N=5)
    with pytest.raises(DiagnosticError):
        assess(seq, eps_grid=())
