import json

import numpy as np
import pytest

from misconfig_lab.errors import BadDelta, InfeasibleParams
from misconfig_lab.faults import (
    FAULTS,
    N_FEATURES,
    Dataset,
    FaultClass,
    build_sample,
    generate_sample,
    inject_config_fault,
    make_dataset,
    perturb_features,
    sample_true_config,
)
from misconfig_lab.graph import PRESETS, EdgeType, generate_synthetic
from misconfig_lab.protocol import Configuration

from conftest import line_config


def _graph(seed=0, preset="baseline"):
    rng = np.random.default_rng(seed)
    return generate_synthetic(PRESETS[preset], rng), rng


def test_ospf_weights_bounded_and_symmetric():
    seen = []
    for seed in range(60):
        g, rng = _graph(seed)
        cfg = sample_true_config(g, rng)
        for (u, v), w in cfg.ospf_weights.items():
            assert cfg.ospf_weights[(v, u)] == w
        seen += list(cfg.ospf_weights.values())
    assert len(seen) >= 10**4 / 5
    assert min(seen) >= 1 and max(seen) <= 32
    assert max(seen) == 32  # the full range is used


def test_true_config_is_seeded():
    g, _ = _graph(1)
    assert sample_true_config(g, 5) == sample_true_config(g, 5)
    assert sample_true_config(g, 5) != sample_true_config(g, 6)


def test_bgp_attrs_cover_exactly_the_attachments():
    g, rng = _graph(2)
    cfg = sample_true_config(g, rng)
    expected = {(m, k) for k, ms in g.dst_attachment.items() for m in ms}
    assert set(cfg.bgp_attrs) == expected
    for k, ms in g.dst_attachment.items():
        assert sorted(cfg.bgp_attrs[(m, k)][5] for m in ms) == list(range(len(ms)))
        # ordered like the node ids
        assert [cfg.bgp_attrs[(m, k)][5] for m in sorted(ms)] == list(range(len(ms)))


def test_exas_index_column_does_not_grow_with_network_size():
    means = {}
    for preset in ("baseline", "larger-scale"):
        vals = []
        for seed in range(100):
            g, rng = _graph(seed, preset)
            vals += [a[5] for a in sample_true_config(g, rng).bgp_attrs.values()]
        means[preset] = np.mean(vals)
    assert abs(means["baseline"] - means["larger-scale"]) < 0.1


def test_ospf_fault_arithmetic_and_clamp():
    cfg = Configuration({(0, 1): 1, (1, 0): 1, (1, 2): 3, (2, 1): 3, (2, 3): 31, (3, 2): 31}, {})
    out = inject_config_fault(cfg, FaultClass.F1, delta=2)
    assert [out.ospf_weights[e] for e in [(0, 1), (1, 2), (2, 3)]] == [3, 5, 32]


def test_config_fault_touches_exactly_one_template():
    for seed in range(30):
        g, rng = _graph(seed)
        cfg = sample_true_config(g, rng)
        for f in FAULTS:
            out = inject_config_fault(cfg, f, rng)
            changed_ospf = out.ospf_weights != cfg.ospf_weights
            changed_cols = {n for key in cfg.bgp_attrs for n in range(6)
                            if out.bgp_attrs[key][n] != cfg.bgp_attrs[key][n]}
            if f == FaultClass.F1:
                # clamping can only make a few weights stick at the cap
                assert changed_ospf and not changed_cols
            else:
                assert not changed_ospf and changed_cols == {int(f) - 2}
                deltas = {out.bgp_attrs[k][int(f) - 2] - cfg.bgp_attrs[k][int(f) - 2] for k in cfg.bgp_attrs}
                assert len(deltas) == 1 and 1 <= deltas.pop() <= 4


def test_ospf_fault_preserves_pairwise_differences_below_cap():
    g, rng = _graph(3)
    cfg = sample_true_config(g, rng)
    out = inject_config_fault(cfg, FaultClass.F1, delta=3)
    below = [e for e, w in cfg.ospf_weights.items() if w + 3 <= 32]
    for a in below:
        for b in below:
            assert out.ospf_weights[a] - out.ospf_weights[b] == cfg.ospf_weights[a] - cfg.ospf_weights[b]


def test_feature_layout(minimal_graph):
    cfg = line_config(minimal_graph, {(0, 1): 3})
    s = build_sample(minimal_graph, cfg)
    assert s.features.shape == (4, N_FEATURES)
    np.testing.assert_array_equal(s.features[:, :3].sum(axis=1), 1)
    assert s.features[0, 3] == 3.0 and s.features[2, 3] == 0.0


def test_router_mean_incident_weight():
    from misconfig_lab.graph import DST, EXAS, GATEWAY, ROUTER, build_graph

    g = build_graph([GATEWAY, ROUTER, ROUTER, EXAS, DST],
                    [(0, 1, EdgeType.OSPF), (0, 2, EdgeType.OSPF), (0, 3, EdgeType.EBGP)], {4: [3]})
    s = build_sample(g, line_config(g, {(0, 1): 2, (0, 2): 4}))
    assert s.features[0, 3] == 3.0


def test_config_injection_shifts_only_its_column():
    for seed in range(100):
        g, rng = _graph(seed)
        cfg = sample_true_config(g, rng)
        f = FAULTS[seed % 6 + 1]  # BGP classes only: OSPF shifts are clamped
        delta = int(rng.integers(1, 5))
        a = build_sample(g, cfg).features
        b = build_sample(g, inject_config_fault(cfg, f, delta=delta)).features
        diff = b - a
        col = 3 + int(f) - 1
        np.testing.assert_allclose(diff[:, col], delta, atol=1e-9)
        np.testing.assert_allclose(np.delete(diff, col, axis=1), 0, atol=1e-12)


def test_perturb_matches_inject_then_rebuild():
    for seed in range(40):
        g, rng = _graph(seed)
        cfg = sample_true_config(g, rng)
        clean = build_sample(g, cfg)
        for f in FAULTS[1:]:
            d = int(rng.integers(1, 5))
            fast = perturb_features(clean, f, d).features
            slow = build_sample(g, inject_config_fault(cfg, f, delta=d)).features
            np.testing.assert_allclose(fast[:, 4:], slow[:, 4:], atol=1e-9)


def test_perturb_examples():
    g, rng = _graph(4)
    clean = build_sample(g, sample_true_config(g, rng))
    out = perturb_features(clean, FaultClass.F1, 1)
    np.testing.assert_allclose(out.features[:, 3], clean.features[:, 3] + 1, atol=1e-12)
    assert out.label == FaultClass.F1 and out.meta["delta"] == 1
    back = out.features.copy()
    back[:, 3] -= 1
    np.testing.assert_allclose(back, clean.features, atol=1e-12)
    for bad in (0, 5, 2.5):
        with pytest.raises(BadDelta):
            perturb_features(clean, FaultClass.F2, bad)


def test_column_argmax_detector_recovers_labels():
    g, rng = _graph(5)
    clean = build_sample(g, sample_true_config(g, rng))
    base = clean.features.mean(axis=0)
    for i in range(70):
        f = FAULTS[i % 7]
        s = perturb_features(clean, f, int(rng.integers(1, 5)))
        dev = np.abs(s.features.mean(axis=0) - base)
        assert int(np.argmax(dev)) == f.column


def test_dataset_stratification():
    ds = make_dataset(PRESETS["baseline"], 7, seed=1)
    assert sorted(int(s.label) for s in ds) == list(range(1, 8))
    ds = make_dataset(PRESETS["baseline"], 1024, seed=7)
    hist = ds.class_histogram
    assert sum(hist.values()) == 1024
    assert max(hist.values()) - min(hist.values()) <= 1
    assert max(hist.values()) / min(hist.values()) <= 1.25


def test_larger_scale_test_split_router_counts():
    ds = make_dataset(PRESETS["larger-scale"], 100, seed=3)
    for s in ds:
        n_routers = int(s.features[:, 0].sum())
        assert 24 <= n_routers <= 31


def test_dataset_files_are_byte_identical(tmp_path):
    a = make_dataset(PRESETS["baseline"], 30, seed=9).save(tmp_path / "a.jsonl")
    b = make_dataset(PRESETS["baseline"], 30, seed=9).save(tmp_path / "b.jsonl")
    assert a == b
    assert (tmp_path / "a.jsonl").read_bytes() == (tmp_path / "b.jsonl").read_bytes()
    loaded = Dataset.load(tmp_path / "a.jsonl")
    assert len(loaded) == 30 and loaded.header["n_samples"] == 30
    first = json.loads((tmp_path / "a.jsonl").read_text().splitlines()[0])
    assert "index" in first


def test_streaming_equals_pregenerated():
    pre = make_dataset(PRESETS["baseline"], 14, seed=2)
    stream = make_dataset(PRESETS["baseline"], 14, mode="on_the_fly", seed=2)
    for a, b in zip(pre, stream):
        np.testing.assert_array_equal(a.features, b.features)
        assert a.label == b.label


def test_sample_order_independence():
    # per-sample randomness derives from (seed, index) only
    a = generate_sample(PRESETS["baseline"], 5, FaultClass.F3, 11)
    _ = generate_sample(PRESETS["baseline"], 4, FaultClass.F2, 11)
    b = generate_sample(PRESETS["baseline"], 5, FaultClass.F3, 11)
    np.testing.assert_array_equal(a.features, b.features)


def test_config_level_samples_record_the_check():
    ds = make_dataset(PRESETS["baseline"], 14, seed=4, level="config")
    for s in ds:
        assert s.meta["f_check"] in (0, 1) and s.meta["n_specs"] > 0


def test_infeasible_dataset():
    with pytest.raises(InfeasibleParams):
        make_dataset(PRESETS["baseline"], 0)
