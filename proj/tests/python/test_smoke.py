import numpy as np
import pytest

import cnet


def small_cfg(seed=0):
    cfg = cnet.GrowthConfig()
    cfg.train.seed = seed
    cfg.train.max_epochs = 30
    cfg.train.batch_size = 64
    cfg.train.learning_rate = 0.01
    return cfg


def test_dataset_round_trip(tmp_path):
    x = np.arange(12, dtype=float).reshape(4, 3)
    ds = cnet.Dataset(x, [0, 1, 0, 1], ["a", "b", "c"])
    assert ds.rows == 4 and ds.cols == 3
    np.testing.assert_array_equal(ds.x, x)
    path = tmp_path / "d.json"
    cnet.save_dataset(ds, path)
    assert cnet.load_dataset(path) == ds
    with pytest.raises(cnet.DataError):
        cnet.Dataset(x, [0, 1], ["a", "b", "c"])


def test_prediction_matches_numpy_forward():
    net = cnet.new_network(3, [4], seed=3)
    x = np.random.default_rng(0).normal(size=(5, 3))
    ds = cnet.Dataset(x, [0] * 5)
    p = net.parameters()
    w1, b1 = p[:12].reshape(4, 3), p[12:16]
    w2, b2 = p[16:20], p[20]
    h = np.maximum(x @ w1.T + b1, 0)
    expected = 1 / (1 + np.exp(-(h @ w2 + b2)))
    np.testing.assert_allclose(cnet.predict(net, ds), expected, rtol=1e-12)


def test_growth_solves_xor():
    data = cnet.synthetic.xor_blobs(800, 0.1, 1)
    split = cnet.stratified_split(data, [("train", 0.8), ("valid", 0.2)], True, 1)
    net = cnet.new_network(2, [2], seed=1)
    cfg = cnet.GrowthConfig()
    cfg.train.seed = 1
    trace = cnet.grow(net, split["train"], split["valid"], cfg)
    assert trace.final_units >= 2
    assert cnet.score(net, split["valid"]).accuracy > 0.95


def test_feature_groups_and_transfer():
    c1, c2 = cnet.synthetic.drift_chunks(600, 4, seed=2)
    plan = cnet.make_groups(cnet.relevancy_scores(c1), 2)
    net, traces = cnet.ifl_feature_groups(c1, None, plan, small_cfg())
    assert len(traces) == 2

    parts = cnet.stratified_split(c2, [("train", 0.7), ("valid", 0.3)], True, 0)
    tc = cnet.TransferConfig()
    tc.initial_widths = [8, 4]
    tc.growth = small_cfg()
    result = cnet.ifl_transfer(c1, parts["train"], parts["valid"], tc)
    assert result.t_subset.cols == 4
    assert len(result.traces) == 2
    # Frozen initial layers survive transfer untouched.
    assert result.net.block_units[:2] == [8, 4]
    reloaded = cnet.NetworkGraph.from_json(result.net.to_json())
    assert reloaded == result.net


def test_refit_with_no_epochs_is_identity():
    c1, c2 = cnet.synthetic.drift_chunks(200, 4, seed=3)
    initial = cnet.new_network(4, [6], seed=0)
    cfg = cnet.TrainConfig()
    cfg.max_epochs = 0
    np.testing.assert_array_equal(cnet.refit(initial, c2, None, cfg).parameters(), initial.parameters())


def test_reports_and_comparison():
    ds = cnet.synthetic.linear_blobs(200, 0.2, 0)
    net = cnet.new_network(2, [3], seed=0)
    cnet.train(net, ds, None, cnet.TrainConfig())
    r = cnet.score(net, ds)
    assert r.counts["tp"] + r.counts["fp"] + r.counts["tn"] + r.counts["fn"] == 200
    back = cnet.MetricsReport.from_json(r.to_json("m"))
    assert back.f1 == r.f1
    text = cnet.compare_text([("a", r), ("b", r)])
    assert "f1" in text
    avg = cnet.multi_run(lambda s: r, cnet.default_seeds(3))
    assert avg.runs == 3 and avg.f1 == pytest.approx(r.f1)


def test_errors_map_to_python_exceptions(tmp_path):
    with pytest.raises(cnet.InputError):
        cnet.load_csv(tmp_path / "missing.csv")
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    with pytest.raises(cnet.FormatError):
        cnet.NetworkGraph.load(bad)
    assert issubclass(cnet.DimensionError, cnet.InputError)
    assert issubclass(cnet.ContractError, cnet.Error)
