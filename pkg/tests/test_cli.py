import numpy as np
import pytest

from volgeom.arrayfile import write_array
from volgeom.cli import main


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def _kv(out):
    return dict(line.split("=", 1) for line in out.split() if "=" in line)


@pytest.fixture
def fig5_file(tmp_path, capsys):
    path = tmp_path / "fig5.arr"
    assert run(capsys, "fixture", "fig5", path)[0] == 0
    return path


def test_fixture_shapes(tmp_path, capsys):
    code, out, _ = run(capsys, "fixture", "random50", tmp_path / "r.arr")
    assert code == 0 and out.strip() == "shape=50 50 50"
    code, _, err = run(capsys, "fixture", "random50", tmp_path / "r.arr")
    assert code == 2 and "exists" in err


def test_extract_and_queries(tmp_path, capsys, fig5_file):
    grid, geom = tmp_path / "grid", tmp_path / "geom"
    code, out, err = run(capsys, "extract", fig5_file, "--blocks", 2, 2, 2, "--out", grid,
                         "--geometry", geom, "--workers", 2)
    assert code == 0
    kv = _kv(out)
    assert (kv["3-components"], kv["2-components"], kv["1-components"], kv["0-components"]) == ("6", "7", "2", "0")
    assert "took" in err and "took" not in out

    assert run(capsys, "query", grid, 3, 3, 1)[1].strip() == "order=3 label=2"
    assert run(capsys, "query", grid, 2, 2, 1)[1].strip() == "order=1 label=0"
    assert run(capsys, "query", grid, 9, 9, 9)[0] == 2

    code, out, _ = run(capsys, "component", geom, 3, 5)
    assert code == 0 and out.strip() == "3 3 3"
    curve = run(capsys, "query", grid, 4, 5, 2)[1].split("label=")[1].strip()
    blue = 3 - int(curve)
    code, out, _ = run(capsys, "component", geom, 1, blue)
    assert len(out.strip().splitlines()) == 4
    assert run(capsys, "component", geom, 2, 99)[0] == 1

    code, out, _ = run(capsys, "neighbors", grid, 1, curve)
    assert code == 0 and len(out.split()) == 4
    assert run(capsys, "neighbors", grid, 1, 7)[0] == 1

    code, out, _ = run(capsys, "stats", grid, "--geometry", geom)
    kv = _kv(out)
    assert kv["blocks"] == "4" and kv["finalized"] == "1" and int(kv["geometry-bytes"]) > 0


def test_extract_refuses_overwrite(tmp_path, capsys, fig5_file):
    args = ("extract", fig5_file, "--blocks", 2, 2, 2, "--out", tmp_path / "grid")
    assert run(capsys, *args)[0] == 0
    code, _, err = run(capsys, *args)
    assert code == 2 and "force" in err
    assert run(capsys, *args, "--force")[0] == 0


def test_skip_step_4(tmp_path, capsys, fig5_file):
    code, out, err = run(capsys, "extract", fig5_file, "--blocks", 2, 2, 2,
                         "--out", tmp_path / "grid", "--skip-step-4")
    assert code == 0 and "warning" in err
    kv = _kv(out)
    assert kv["1-components"] == "3" and kv["0-components"] == "1"


def test_geometry_command(tmp_path, capsys, fig5_file):
    run(capsys, "extract", fig5_file, "--blocks", 2, 2, 2, "--out", tmp_path / "grid")
    code, out, _ = run(capsys, "geometry", tmp_path / "grid", tmp_path / "geom", "--bins", 2)
    assert code == 0
    assert _kv(out) == {"segment-lists": "6", "face-lists": "7", "curve-lists": "2", "points": "0"}


def test_verify_command(capsys, fig5_file):
    code, out, _ = run(capsys, "verify", fig5_file, "--blocks", 2, 2, 2)
    assert code == 0 and out.startswith("isomorphic")
    code, out, _ = run(capsys, "verify", fig5_file, "--blocks", 2, 2, 2, "--skip-step-4")
    assert code == 1 and "NOT isomorphic" in out


def test_raw_input(tmp_path, capsys, fig5):
    raw = tmp_path / "seg.raw"
    raw.write_bytes(fig5.astype("<u2").tobytes())
    code, out, _ = run(capsys, "extract", raw, "--shape", 3, 3, 2, "--element-width", 2,
                       "--blocks", 2, 2, 2, "--out", tmp_path / "grid")
    assert code == 0 and _kv(out)["2-components"] == "7"
    code, _, err = run(capsys, "extract", raw, "--shape", 3, 3, 2, "--blocks", 2, 2, 2,
                       "--out", tmp_path / "g2")
    assert code == 2 and "element-width" in err


def test_validate_warns(tmp_path, capsys):
    path = tmp_path / "s.arr"
    write_array(path, np.array([1, 2, 1], np.uint32).reshape(3, 1, 1))
    code, _, err = run(capsys, "extract", path, "--blocks", 2, 1, 1, "--out", tmp_path / "g", "--validate")
    assert code == 0 and "not connected" in err


def test_bad_usage(tmp_path, capsys, fig5_file):
    assert run(capsys, "extract", tmp_path / "missing.arr", "--blocks", 2, 2, 2, "--out", tmp_path / "g")[0] == 2
    assert run(capsys, "extract", fig5_file, "--blocks", 1, 2, 2, "--out", tmp_path / "g")[0] == 2
    assert run(capsys, "extract", fig5_file, "--blocks", 2, 2, 2, "--out", tmp_path / "g2", "--workers", 0)[0] == 2
    with pytest.raises(SystemExit):
        main(["bogus"])


def test_unfinalized_geometry(tmp_path, capsys):
    from volgeom.blockwise import BlockSpec
    from volgeom.store import GridStore
    from volgeom.topogrid import GridShape

    GridStore.create(tmp_path / "g", BlockSpec((2, 2, 2), GridShape(3, 3, 3)))
    code, _, err = run(capsys, "geometry", tmp_path / "g", tmp_path / "geom")
    assert code == 2 and "finalized" in err
