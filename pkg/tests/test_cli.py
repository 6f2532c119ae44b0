import json

import pytest

from qdlab.cli import main


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_domain_manifest(tmp_path, capsys):
    code, out = run(["domain", "cardioid", "--out", str(tmp_path)], capsys)
    assert code == 0
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert doc["schema"] == 1 and doc["data"]["order"] == 2
    assert (tmp_path / "domain.svg").exists()


def test_check_passes(capsys):
    code, out = run(["check", "poly3"], capsys)
    assert code == 0 and json.loads(out.out)["passed"]


def test_bad_json_exit_two(capsys):
    code, out = run(["check", "{bad"], capsys)
    assert code == 2 and "domain:1:2" in out.err


def test_bad_scenario_schema(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text('{"schema": 7, "builder": "disc"}')
    code, out = run(["chain", "--scenario", str(p)], capsys)
    assert code == 2 and "unsupported schema" in out.err


def test_unknown_preset(capsys):
    code, out = run(["run", "nope"], capsys)
    assert code == 2


def test_topo_concentric(capsys):
    code, out = run(["topo", "concentric-circles:4"], capsys)
    doc = json.loads(out.out)
    assert code == 0 and doc["verdicts"][0]["check"]["lhs"] == 10


def test_dyn_seed(tmp_path, capsys):
    code, out = run(["dyn", "--seed", "3", "--degree", "3", "--out", str(tmp_path)], capsys)
    assert code == 0 and (tmp_path / "orbits.svg").exists()


def test_dyn_map(capsys):
    code, out = run(["dyn", "--map", '{"num": [[0,0],[0,0],[1,0]], "den": [[1,0]]}'], capsys)
    assert code == 0


def test_chain_scenario_file_is_reproducible(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"schema": 1, "builder": "disc", "times": [0.2, 0.4]}))
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        code, _ = run(["chain", "--scenario", str(p), "--grid", "48", "--out", str(d)], capsys)
        assert code == 0
        outs.append((d / "manifest.json").read_text())
    assert outs[0] == outs[1]


def test_render_mask(tmp_path, capsys):
    from qdlab.raster import disc_raster

    disc_raster(0, 0.5, 1 / 32).save(tmp_path / "m")
    code, out = run(["render", str(tmp_path / "m")], capsys)
    assert code == 0 and out.out.startswith("<?xml")


@pytest.mark.slow
def test_fig1_gallery(tmp_path, capsys):
    code, out = run(["run", "fig1-gallery", "--out", str(tmp_path)], capsys)
    assert code == 0 and (tmp_path / "cardioid.svg").exists()


@pytest.mark.slow
def test_sharp_bqd(capsys):
    code, out = run(["run", "sharp-bqd-order3"], capsys)
    assert code == 0
