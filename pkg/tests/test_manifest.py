import pytest

from planspot.geometry import BBox
from planspot.manifest import Manifest, load_manifest, save_manifest
from planspot.tiling import Annotation


def test_round_trip(tmp_path):
    m = Manifest(classes=["door", "sink"])
    m.add("a.pgm", Annotation(0, BBox(1, 2, 3, 4)))
    m.add("a.pgm", Annotation(1, BBox(10, 20, 30, 40), ignore=True))
    m.add("b.pgm", Annotation(1, BBox(5, 5, 6, 6)))
    path = tmp_path / "manifest.json"
    save_manifest(path, m)
    back = load_manifest(path)
    assert back.classes == ["door", "sink"]
    assert back.images() == ["a.pgm", "b.pgm"]
    by_image = back.by_image()
    assert len(by_image["a.pgm"]) == 2
    assert by_image["a.pgm"][0].class_name == "door"
    assert by_image["a.pgm"][1].ignore
    assert by_image["b.pgm"][0].box == BBox(5, 5, 6, 6)


def test_class_id_out_of_range():
    m = Manifest(classes=["only"])
    with pytest.raises(ValueError, match="class_id 3"):
        m.add("x.pgm", Annotation(3, BBox(0, 0, 1, 1)))


def test_empty_classes_rejected():
    with pytest.raises(ValueError):
        Manifest(classes=[])


def test_load_rejects_other_documents(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text('{"something": "else"}')
    with pytest.raises(ValueError, match="manifest"):
        load_manifest(path)


def test_add_fills_class_name():
    m = Manifest(classes=["door"])
    m.add("x.pgm", Annotation(0, BBox(0, 0, 2, 2)))
    assert m.annotations[0][1].class_name == "door"
