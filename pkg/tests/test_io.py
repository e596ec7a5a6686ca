import json

import numpy as np
import pytest
from hypothesis import given, settings

from netgp.graph import Graph
from netgp.io import (
    Dataset,
    DatasetError,
    load_dataset,
    parse_config,
    read_config,
    read_graph,
    save_dataset,
    substream,
    threshold_binarize,
    write_graph,
)

from conftest import weighted_graphs


@given(weighted_graphs(signed=True))
@settings(max_examples=25, deadline=None)
def test_graph_round_trip_bitwise(g):
    import tempfile
    with tempfile.TemporaryDirectory() as d:
        write_graph(g, f"{d}/g.txt")
        h = read_graph(f"{d}/g.txt")
    assert np.array_equal(g.weights, h.weights)


def test_read_graph_errors(tmp_path):
    p = tmp_path / "g.txt"
    p.write_text("2\n0 1\n2 0\n")
    with pytest.raises(DatasetError, match=r"\(\d, \d\)"):
        read_graph(p)
    p.write_text("3\n0 1 0\n1 0 0\n")
    with pytest.raises(DatasetError, match="header says 3"):
        read_graph(p)
    p.write_text("2\n0 x\n1 0\n")
    with pytest.raises(DatasetError, match="g.txt:2"):
        read_graph(p)


def test_threshold_binarize():
    g = Graph([[0, 0.3, -0.5], [0.3, 0, 0.0], [-0.5, 0, 0]])
    b = threshold_binarize(g, 0.45)
    assert b.weights.tolist() == [[0, 0, 1], [0, 0, 0], [1, 0, 0]]


def _ds():
    rng = np.random.default_rng(0)
    ups = [np.triu(rng.random((4, 4)), 1) for _ in range(3)]
    return [Graph(u + u.T) for u in ups]


def test_dataset_round_trip(tmp_path):
    graphs = _ds()
    ds = Dataset(graphs, labels=np.array([1, -1, 1]), times=np.array([0.5, 1.25, 3.0]),
                 groups=np.array([0, 1, 0]), covariates=np.array([[1.0], [2.5], [-1.0]]))
    save_dataset(ds, tmp_path, {"seed": 4})
    back = load_dataset(tmp_path)
    assert all(a == b for a, b in zip(graphs, back.graphs))
    assert back.labels.tolist() == [1, -1, 1]
    assert np.array_equal(back.times, ds.times) and back.groups.tolist() == [0, 1, 0]
    assert np.array_equal(back.covariates, ds.covariates)
    assert back.manifest == {"m": 3, "n": 4, "seed": 4}


def test_dataset_validation(tmp_path):
    save_dataset(Dataset(_ds(), labels=np.array([1, -1, 1])), tmp_path)
    lab = tmp_path / "labels.csv"
    lab.write_text("index,label\n0,1\n1,-1\n")
    with pytest.raises(DatasetError, match="2 label rows for 3"):
        load_dataset(tmp_path)
    lab.write_text("index,label\n0,1\n1,0\n2,1\n")
    with pytest.raises(DatasetError, match="labels.csv:3"):
        load_dataset(tmp_path)
    lab.unlink()
    (tmp_path / "times.csv").write_text("index,time\n0,1.0\n1,-2\n2,1\n")
    with pytest.raises(DatasetError, match="times.csv:3.*positive"):
        load_dataset(tmp_path)
    (tmp_path / "times.csv").unlink()
    with pytest.raises(DatasetError, match="need labels"):
        load_dataset(tmp_path)
    (tmp_path / "manifest.json").write_text(json.dumps({"m": 5}))
    with pytest.raises(DatasetError, match="m=5"):
        load_dataset(tmp_path)
    with pytest.raises(DatasetError, match="manifest"):
        load_dataset(tmp_path / "missing")


def test_parse_config(tmp_path):
    cfg = parse_config("ns = 100  # sweeps\nburn-in=20\nkind = frobenius\n\nflag = true\nx = 1e-3\nb = none\n")
    assert cfg == {"ns": 100, "burn_in": 20, "kind": "frobenius", "flag": True, "x": 1e-3, "b": None}
    with pytest.raises(ValueError, match="cfg:2"):
        parse_config("a = 1\noops\n", "cfg")
    p = tmp_path / "c.cfg"
    p.write_text("seed = 3\n")
    assert read_config(p) == {"seed": 3}


def test_substreams():
    a = substream(1, "split").random(5)
    assert np.array_equal(a, substream(1, "split").random(5))
    assert not np.array_equal(a, substream(1, "sampler").random(5))
    assert not np.array_equal(a, substream(2, "split").random(5))
    x = substream(0, "a").standard_normal(20000)
    y = substream(0, "b").standard_normal(20000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.03
