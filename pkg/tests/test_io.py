import json

import numpy as np
import pytest

from knnanomaly.density import estimate_density
from knnanomaly.io import OutputSet, density_csv, density_sidecar, points_csv, read_column, read_points


def test_points_round_trip_full_precision(tmp_path):
    pts = np.random.default_rng(0).normal(size=(50, 3)) * 1e3
    p = tmp_path / "pts.csv"
    p.write_text(points_csv(pts))
    np.testing.assert_array_equal(read_points(p).points, pts)
    p.write_text(points_csv(pts, ["a", "b", "c"]))
    np.testing.assert_array_equal(read_points(p, header=True).points, pts)


def test_read_points_errors(tmp_path):
    p = tmp_path / "ragged.csv"
    p.write_text("1,2\n3\n")
    with pytest.raises(ValueError):
        read_points(p)
    q = tmp_path / "two.csv"
    q.write_text("1,2\n3,4\n")
    with pytest.raises(ValueError, match="one column"):
        read_column(q)


def test_density_csv_and_sidecar():
    est = estimate_density([[0.5, 0.5]], [[0, 0], [1, 0], [0, 1], [1, 1]], 2)
    text = density_csv(est, header=True)
    assert text.splitlines()[0] == "x0,x1,pdf"
    assert float(text.splitlines()[1].split(",")[2]) == est.values[0]
    meta = density_sidecar(est, normalizer=1.0)
    assert (meta["k"], meta["M"], meta["dim"]) == (2, 4, 2)


def test_output_set_writes_everything(tmp_path):
    out = OutputSet()
    out.add_text(tmp_path / "a.txt", "hello\n")
    out.add_json(tmp_path / "sub" / "b.json", {"x": 1})
    written = out.commit()
    assert sorted(p.name for p in written) == ["a.txt", "b.json"]
    assert json.loads((tmp_path / "sub" / "b.json").read_text()) == {"x": 1}
    assert not [p for p in tmp_path.rglob("*.tmp")]


def test_output_set_leaves_nothing_on_failure(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("a file where a directory is needed")
    out = OutputSet()
    out.add_text(tmp_path / "first.txt", "x")
    out.add_text(blocker / "second.txt", "y")
    with pytest.raises(OSError):
        out.commit()
    assert sorted(p.name for p in tmp_path.iterdir()) == ["blocker"]
