import json
import os

import pytest

from planspot.cli import main
from planspot.manifest import load_manifest


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    out = root / "corpus"
    assert run("synth", "--out", out, "--plans", "2", "--width", "640", "--height", "640", "--seed", "40") == 0
    return out


def test_synth_outputs(corpus):
    assert (corpus / "plan_000.pgm").exists()
    assert (corpus / "plan_001.pgm").exists()
    assert (corpus / "config_used.json").exists()
    manifest = load_manifest(corpus / "manifest.json")
    assert manifest.images() == ["plan_000.pgm", "plan_001.pgm"]
    assert len(manifest.annotations) > 0


def test_synth_deterministic(corpus, tmp_path):
    again = tmp_path / "again"
    assert run("synth", "--out", again, "--plans", "2", "--width", "640", "--height", "640", "--seed", "40") == 0
    assert (again / "plan_000.pgm").read_bytes() == (corpus / "plan_000.pgm").read_bytes()
    assert (again / "manifest.json").read_text() == (corpus / "manifest.json").read_text()


def test_anchors_command(corpus, tmp_path):
    out = tmp_path / "anchors.json"
    assert run("anchors", "--manifest", corpus / "manifest.json", "--out", out, "-k", "5", "--seed", "1") == 0
    pairs = json.loads(out.read_text())
    assert len(pairs) == 5
    assert all(len(p) == 2 and p[0] > 0 and p[1] > 0 for p in pairs)


def test_prepare_tiles(corpus, tmp_path):
    out = tmp_path / "tiles"
    assert run(
        "prepare-tiles", "--manifest", corpus / "manifest.json", "--images", corpus,
        "--out", out, "--hflip", "--seed", "3",
    ) == 0
    tiles = load_manifest(out / "manifest.json")
    assert tiles.classes == load_manifest(corpus / "manifest.json").classes
    names = tiles.images()
    assert names and all((out / n).exists() for n in names)
    assert any(n.endswith("_h.pgm") for n in names)
    # every tile keeps at least one full symbol
    for image, anns in tiles.by_image().items():
        assert any(not a.ignore for a in anns)


def test_detect_and_eval_perfect(corpus, tmp_path):
    det_out = tmp_path / "det"
    assert run("detect", "--manifest", corpus / "manifest.json", "--images", corpus, "--out", det_out) == 0
    records = json.loads((det_out / "detections.json").read_text())
    manifest = load_manifest(corpus / "manifest.json")
    assert len(records) == len(manifest.annotations)
    for rec in records:
        assert set(rec) == {"image", "class_id", "class_name", "x", "y", "w", "h", "score"}
    got = sorted((r["image"], r["class_id"], r["x"], r["y"], r["w"], r["h"]) for r in records)
    want = sorted(
        (img, a.class_id, a.box.x, a.box.y, a.box.w, a.box.h) for img, a in manifest.annotations
    )
    assert got == want  # box set equals the manifest exactly

    eval_out = tmp_path / "ev"
    assert run(
        "eval", "--manifest", corpus / "manifest.json", "--images", corpus,
        "--detections", det_out / "detections.json", "--out", eval_out,
    ) == 0
    report = json.loads((eval_out / "report.json").read_text())
    assert report["aggregate"] == {"ap50": 1.0, "ap75": 1.0, "map": 1.0}
    assert report["instance"]["f_score"] == 1.0
    assert report["pixel"]["f_score"] == 1.0
    assert (eval_out / "report.txt").read_text().startswith("Symbol")


def test_config_echo_reproduces_run(corpus, tmp_path):
    first = tmp_path / "d1"
    second = tmp_path / "d2"
    assert run("detect", "--manifest", corpus / "manifest.json", "--images", corpus, "--out", first) == 0
    assert run("detect", "--config", first / "config_used.json", "--out", second) == 0
    assert (first / "detections.json").read_text() == (second / "detections.json").read_text()


def test_detect_flag_overrides_config(corpus, tmp_path):
    base = tmp_path / "b"
    assert run("detect", "--manifest", corpus / "manifest.json", "--images", corpus, "--out", base) == 0
    echo = json.loads((base / "config_used.json").read_text())
    assert echo["tiling"]["stride"] == 50
    strided = tmp_path / "s"
    assert run(
        "detect", "--config", base / "config_used.json", "--out", strided, "--stride", "100",
    ) == 0
    echo2 = json.loads((strided / "config_used.json").read_text())
    assert echo2["tiling"]["stride"] == 100


def test_detect_jobs_flag_is_deterministic(corpus, tmp_path):
    serial = tmp_path / "j1"
    threaded = tmp_path / "j4"
    assert run("detect", "--manifest", corpus / "manifest.json", "--images", corpus, "--out", serial) == 0
    assert run(
        "detect", "--manifest", corpus / "manifest.json", "--images", corpus, "--out", threaded, "--jobs", "4",
    ) == 0
    assert (serial / "detections.json").read_text() == (threaded / "detections.json").read_text()


def test_detect_missing_tensor_dir(corpus, tmp_path, capsys):
    rc = run(
        "detect", "--manifest", corpus / "manifest.json", "--images", corpus,
        "--out", tmp_path / "x", "--tensors", tmp_path / "empty",
    )
    assert rc == 1
    assert "no prediction tensor" in capsys.readouterr().err


def test_detect_annotated_output(corpus, tmp_path):
    out = tmp_path / "ann"
    assert run(
        "detect", "--manifest", corpus / "manifest.json", "--images", corpus, "--out", out, "--annotate",
    ) == 0
    assert (out / "annotated" / "plan_000.pgm").exists()


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["detect", "--no-such-flag"])
    assert exc.value.code == 2


def test_missing_required_path(tmp_path, capsys):
    assert main(["detect", "--out", str(tmp_path / "o")]) == 1
    assert "missing required path" in capsys.readouterr().err


def test_selftest_passes_and_is_reproducible(tmp_path):
    out = tmp_path / "st"
    assert run("selftest", "--out", out, "--seed", "9") == 0
    snapshot = {}
    for root, _, files in os.walk(out):
        for name in files:
            path = os.path.join(root, name)
            snapshot[os.path.relpath(path, out)] = open(path, "rb").read()
    assert run("selftest", "--out", out, "--seed", "9") == 0
    for rel, data in snapshot.items():
        assert open(os.path.join(out, rel), "rb").read() == data, rel
