import math
import warnings
from fractions import Fraction

import numpy as np
import pytest

from wijsman_lab import constructions as cons
from wijsman_lab.diagnostics import (
    build_trace,
    cesaro_trace,
    density_trace,
    f_cesaro_trace,
    f_density_trace,
    lacunary_f_cesaro_trace,
    lacunary_f_density_trace,
)
from wijsman_lab.lacunary import LacunarySchedule
from wijsman_lab.metric_sets import Singleton, gap
from wijsman_lab.modulus import make_builtin

LOG = make_builtin("log1p")


def scan_schedule(f, c, eps, K, ui=False, limit=10**6):
    """Linear-scan oracle: the least m above the last checkpoint meeting every constraint."""
    ms, m_prev, n_prev, e_prev = [], 0, 0, Fraction(1)
    for k in range(K):
        e, e_next = Fraction(eps[k]), Fraction(eps[k + 1])  # floats convert exactly
        for m in range(m_prev + 1, limit):
            n = math.floor(m * e) + 1
            if not m - m * e - 1 > (1 - e_prev) * m_prev:
                continue
            if n <= n_prev:
                continue
            if ui and not (m * e - m_prev * e_prev) > e_next * (m - m_prev):
                continue
            if f(float(m * e)) >= c * f(float(m)):
                break
        else:
            raise AssertionError("oracle found nothing")
        ms.append(m)
        m_prev, n_prev, e_prev = m, n, e
    return ms


@pytest.mark.parametrize("rule", ["pow2", "harmonic"])
def test_stat_checkpoints_minimal(rule):
    s = cons.build_stat_separation(LOG, 0.5, rule, K=6, warn=False)
    # exact rationals: the oracle must not inherit float rounding of 1/(k+1)
    exact = {"pow2": lambda k: Fraction(1, 2**k), "harmonic": lambda k: Fraction(1, k + 1)}[rule]
    el = [exact(k) for k in range(1, 8)]
    assert list(s.checkpoints) == scan_schedule(LOG, 0.5, el, 6)


def test_stat_known_schedule():
    s = cons.build_stat_separation(LOG, 0.5, "pow2", K=8, warn=False)
    el = [2.0**-k for k in range(1, 10)]
    assert list(s.checkpoints) == scan_schedule(LOG, 0.5, el, 8)
    assert s.counts == (2, 3, 7, 15, 31, 63, 127, 255)
    assert all(n == math.floor(m * e) + 1 for m, e, n in zip(s.checkpoints, s.eps, s.counts))


def test_ui_checkpoints_minimal():
    s = cons.build_ui_separation(LOG, 0.5, "pow2", K=5, warn=False)
    el = [2.0**-k for k in range(1, 8)]
    assert list(s.checkpoints) == scan_schedule(LOG, 0.5, el, 5, ui=True)


def test_stat_block_structure():
    s = cons.build_stat_separation(LOG, 0.5, "pow2", K=8, warn=False)
    seq = cons.sequence_for(s)
    tr = build_trace(seq, 0.0)
    ms = np.asarray(s.checkpoints)
    # the union of blocks meets [1, m_k] in exactly n_k indices
    assert tr.prefix_count(0.5, ms).tolist() == list(s.counts)
    assert s.union_size() == s.counts[-1]
    bounds = (0,) + s.checkpoints
    for k, (lo, hi) in enumerate(s.blocks):
        assert bounds[k] <= lo < hi <= bounds[k + 1]
    assert np.all(f_density_trace(tr, 0.5, LOG, ms) >= 0.5 - 1e-9)
    assert density_trace(tr, 0.5, ms)[-1] <= 2 * s.counts[-1] / ms[-1]
    assert gap(0.0, s.blocks[-1][1], seq) == 1.0
    assert gap(0.0, s.blocks[-1][0], seq) == 0.0


def test_cesaro_schedule_same_as_stat():
    a = cons.build_stat_separation(LOG, 0.5, K=6, warn=False)
    b = cons.build_cesaro_separation(LOG, 0.5, K=6, warn=False)
    assert a.checkpoints == b.checkpoints and a.blocks == b.blocks
    tr = build_trace(cons.sequence_for(b), 0.0)
    ms = np.asarray(b.checkpoints)
    assert np.array_equal(cesaro_trace(tr, ms), density_trace(tr, 0.5, ms))


def test_ui_construction_properties():
    s = cons.build_ui_separation(LOG, 0.5, K=6, warn=False)
    r = np.asarray(s.values)
    assert np.all(r > 0) and np.all(np.diff(r) < 0)
    tr = build_trace(cons.sequence_for(s), 0.0)
    ms = np.asarray(s.checkpoints)
    # sums telescope to m_k eps_k
    np.testing.assert_allclose(tr.prefix_sum(ms), ms * np.asarray(s.eps), rtol=1e-12)
    assert np.all(f_cesaro_trace(tr, LOG, ms) >= 0.5 * (1 - 1e-6))
    assert s.blocks[0][0] == 0 and all(a[1] == b[0] for a, b in zip(s.blocks, s.blocks[1:]))


def test_identity_fails_with_step():
    with pytest.raises(cons.ConstructionError) as exc:
        cons.build_stat_separation(make_builtin("identity"), 0.9, K=4, search_cap=10**6, warn=False)
    assert exc.value.step == 1


def test_compatible_modulus_warns():
    with pytest.warns(UserWarning):
        try:
            cons.build_stat_separation(make_builtin("power_sum", p=0.5, q=0.5), 0.3, K=2)
        except cons.ConstructionError:
            pass


def test_non_compatible_does_not_warn():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        cons.build_stat_separation(LOG, 0.5, K=3)


def test_eps_rule_errors():
    with pytest.raises(cons.ConstructionError):
        cons.eps_rule("fib")
    with pytest.raises(cons.ConstructionError):
        cons.build_stat_separation(LOG, 0.5, lambda k: 0.5, K=3, warn=False)
    with pytest.raises(cons.ConstructionError):
        cons.build_stat_separation(LOG, 0.0, K=3, warn=False)


def test_check_step_inequality():
    assert cons.check_step_inequality(3, 0.5, 0.25, 8)
    # 8 - 2 - 1 = 5 > 1.5 holds; 2 - 0.5 - 1 = 0.5 > 1.5 fails
    assert not cons.check_step_inequality(3, 0.5, 0.25, 2)


def test_find_minimal():
    assert cons.find_minimal(lambda m: m >= 37, 0, 1000) == 37
    assert cons.find_minimal(lambda m: m >= 37, 36, 1000) == 37
    assert cons.find_minimal(lambda m: m >= 5000, 0, 1000) is None
    assert cons.find_minimal(lambda m: True, 10, 1000) == 11


def scan_lacunary(f, theta, c, eps, K):
    rs, r_prev = [], 0
    for k in range(K):
        e = eps[k]
        for r in range(r_prev + 1, theta.horizon + 1):
            h = theta.h(r)
            if h * (1 - e) - 1 > 0 and f(h * e) >= c * f(float(h)):
                break
        rs.append(r)
        r_prev = r
    return rs


def test_lacunary_blocks_minimal_and_placed():
    th = LacunarySchedule.pow2(62)
    s = cons.build_lacunary_separation(LOG, th, 0.9, K=6, warn=False)
    el = [2.0**-k for k in range(1, 7)]
    assert list(s.checkpoints) == scan_lacunary(LOG, th, 0.9, el, 6)
    for r, n, (lo, hi) in zip(s.checkpoints, s.counts, s.blocks):
        assert hi == th.k[r] and hi - lo == n
        assert lo >= th.k[r - 1]
    assert s.length == th.k[s.checkpoints[-1]]
    assert s.length < 2**63
    tr = build_trace(cons.sequence_for(s), 0.0)
    bt = lacunary_f_density_trace(tr, 0.5, LOG, th)
    rk = np.asarray(s.checkpoints) - 1
    assert np.all(bt.ratios[rk] >= 0.9 - 1e-9)
    mask = np.ones(bt.ratios.size, bool)
    mask[rk] = False
    assert np.all(bt.ratios[mask] == 0)


def test_lacunary_ui_blocks():
    th = LacunarySchedule.pow2(62)
    s = cons.build_lacunary_ui_separation(LOG, th, 0.9, K=6, warn=False)
    tr = build_trace(cons.sequence_for(s), 0.0)
    bt = lacunary_f_cesaro_trace(tr, LOG, th)
    rk = np.asarray(s.checkpoints) - 1
    assert np.all(bt.ratios[rk] >= 0.9 - 1e-9)
    assert s.values == s.eps


def test_lacunary_horizon_exhausted():
    with pytest.raises(cons.ConstructionError) as exc:
        cons.build_lacunary_separation(LOG, LacunarySchedule.pow2(62), 0.9, K=6,
                                       search_cap=20, warn=False)
    assert exc.value.step is not None


def test_build_dispatch():
    th = LacunarySchedule.pow2(62)
    assert cons.build("stat", LOG, K=3, warn=False).kind == "stat_separation"
    assert cons.build("lacunary-ui", LOG, th, K=2, warn=False).kind == "lacunary_ui_separation"
    with pytest.raises(cons.ConstructionError):
        cons.build("lacunary", LOG, K=2, warn=False)
    with pytest.raises(cons.ConstructionError):
        cons.build("spiral", LOG)


def test_schedule_as_dict_keys():
    d = cons.build_stat_separation(LOG, 0.5, K=3, warn=False).as_dict()
    assert {"kind", "c", "eps", "m", "n", "blocks", "values"} <= set(d)
    d = cons.build_lacunary_separation(LOG, LacunarySchedule.pow2(62), 0.9, K=2, warn=False).as_dict()
    assert {"r", "h", "theta"} <= set(d)


def test_indicator_sequence_custom_sets():
    seq = cons.indicator_sequence([(2, 4)], 6, hi=Singleton([3.0]), lo=Singleton([0.0]))
    assert [gap(0.0, k, seq) for k in range(1, 7)] == [0, 0, 3, 3, 0, 0]
    with pytest.raises(cons.ConstructionError):
        cons.indicator_sequence([(2, 4), (3, 5)], 6)
