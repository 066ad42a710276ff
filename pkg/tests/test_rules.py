import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from misconfig_lab.errors import EmptyDelta
from misconfig_lab.experiments import rb_timing
from misconfig_lab.faults import FAULTS, FaultClass, inject_config_fault, sample_true_config
from misconfig_lab.graph import PRESETS, generate_synthetic
from misconfig_lab.protocol import prot
from misconfig_lab.rules import (
    DEFAULT_WEIGHTS,
    WeightTable,
    default_weight_table,
    rb_classify,
    rb_complexity_estimate,
)
from misconfig_lab.specs import DeltaS, SpecificationSet, diff_specs, generate_queries


def _table(rows):
    w = {f: (0.1, 0.1, 0.1) for f in FAULTS}
    w.update(rows)
    return WeightTable(w)


def _delta(fwd=0, reach=0, iso=0):
    ids = iter(range(fwd + reach + iso))
    parts = [frozenset(next(ids) for _ in range(n)) for n in (fwd, reach, iso)]
    return DeltaS(frozenset().union(*parts), tuple(parts))


def test_single_kind_example():
    w = _table({FaultClass.F1: (0.9, 0.4, 0.2), FaultClass.F2: (0.3, 0.8, 0.5)})
    v = rb_classify(_delta(fwd=4), w)
    assert v.scores[FaultClass.F1] == pytest.approx(0.9)
    assert v.scores[FaultClass.F2] == pytest.approx(0.3)
    assert v.f_hat == FaultClass.F1 and not v.tie


def test_convex_combination_example():
    w = _table({FaultClass.F3: (0.5, 0.2, 0.5)})
    assert rb_classify(_delta(fwd=2, iso=2), w).scores[FaultClass.F3] == pytest.approx(0.5)


def test_count_triple_accepted():
    d = _delta(fwd=3, reach=1)
    assert rb_classify(d).scores == rb_classify((3, 1, 0)).scores


def test_empty_delta():
    with pytest.raises(EmptyDelta):
        rb_classify(_delta())
    with pytest.raises(EmptyDelta):
        rb_classify((0, 0, 0))


def test_tie_keeps_smallest_class():
    w = WeightTable({f: (0.5, 0.5, 0.5) for f in FAULTS})
    v = rb_classify(_delta(reach=3), w)
    assert v.f_hat == FaultClass.F1 and v.tie


def _brute(counts, rows):
    # direct transcription of the weighted sum, one violation at a time
    total = sum(counts)
    scores = []
    for row in rows:
        s = 0.0
        for kind, n in enumerate(counts):
            for _ in range(n):
                s += row[kind] / total
        scores.append(s)
    return scores


def test_brute_force_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10**4):
        counts = rng.integers(0, 6, size=3)
        if counts.sum() == 0:
            counts[rng.integers(3)] = 1
        rows = np.round(rng.random((7, 3)), 3)
        w = WeightTable({f: tuple(rows[i]) for i, f in enumerate(FAULTS)})
        v = rb_classify(_delta(*map(int, counts)), w)
        expect = _brute(counts, rows)
        got = [v.scores[f] for f in FAULTS]
        np.testing.assert_allclose(got, expect, rtol=1e-12, atol=1e-15)
        assert v.scores[v.f_hat] == max(got)


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.integers(0, 50)] * 3).filter(lambda c: sum(c) > 0),
       st.floats(0.01, 1.0))
def test_scale_invariance_and_bounds(counts, c):
    base = default_weight_table()
    v = rb_classify(counts, base)
    scaled = rb_classify(counts, base.scaled(c))
    assert scaled.f_hat == v.f_hat
    for f in FAULTS:
        assert scaled.scores[f] == pytest.approx(c * v.scores[f])
        row = base.w[f]
        assert min(row) - 1e-12 <= v.scores[f] <= max(row) + 1e-12
        assert 0.0 <= v.scores[f] <= 1.0


def test_permutation_invariance():
    for seed in range(20):
        rng = np.random.default_rng(seed)
        g = generate_synthetic(PRESETS["baseline"], rng)
        cfg = sample_true_config(g, rng)
        specs = generate_queries(g, cfg, (10, 5, 20), rng)
        bad = inject_config_fault(cfg, FaultClass.F1, delta=4)
        obs = prot(g, bad, specs)
        if not any(s.expected != o for s, o in zip(specs.specs, obs.values)):
            continue
        v = rb_classify(diff_specs(specs, obs))
        perm = rng.permutation(len(specs))
        shuffled = SpecificationSet(tuple(specs.specs[i] for i in perm))
        v2 = rb_classify(diff_specs(shuffled, prot(g, bad, shuffled)))
        assert v2.f_hat == v.f_hat
        assert v2.scores == pytest.approx(v.scores)


def test_default_table():
    w = default_weight_table()
    assert w.w[FaultClass.F1][0] == 0.9 and w.w[FaultClass.F1][0] > w.w[FaultClass.F1][1]
    assert w.w[FaultClass.F2][1] == 0.8 and w.w[FaultClass.F2][1] > w.w[FaultClass.F2][0]
    for f in FAULTS[1:]:
        assert all(abs(x - b) <= 0.05 + 1e-12 for x, b in zip(w.w[f], (0.4, 0.8, 0.3)))
    assert default_weight_table() == w
    assert w.as_array().shape == (7, 3)


def test_weight_table_validation():
    with pytest.raises(ValueError):
        WeightTable({FaultClass.F1: (0.1, 0.2, 0.3)})
    rows = dict(DEFAULT_WEIGHTS)
    rows[FaultClass.F2] = (1.5, 0.2, 0.3)
    with pytest.raises(ValueError):
        WeightTable(rows)
    with pytest.raises(ValueError):
        WeightTable.from_dict({"g1": {"fwd": 1, "reach": 1, "iso": 1}})


def test_json_round_trip(tmp_path):
    w = default_weight_table()
    path = tmp_path / "w.json"
    path.write_text(w.to_json())
    assert WeightTable.load(path) == w
    assert w.to_dict()["f1"] == {"fwd": 0.9, "reach": 0.5, "iso": 0.4}


def test_verdict_dict():
    d = rb_classify((4, 0, 0)).to_dict()
    assert d["f_hat"] == "f1" and set(d["scores"]) == {f"f{i}" for i in range(1, 8)}


def test_complexity_estimate():
    assert rb_complexity_estimate(7, 20) == 140
    assert rb_complexity_estimate(0, 9) == 0
    with pytest.raises(ValueError):
        rb_complexity_estimate(-1, 3)


def test_timing_grows_at_most_linearly():
    t = rb_timing((100, 1000, 10000))
    sizes = sorted(t)
    for a, b in zip(sizes, sizes[1:]):
        assert t[b] / t[a] <= 1.5 * (b / a), t
