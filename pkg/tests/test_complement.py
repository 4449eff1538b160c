import numpy as np
import pytest

from testdrive.complement import (ComplementSet, average_box, build_complement,
                                  save_complement)
from testdrive.core import BoundingBox, Detection, intersection_area
from testdrive.errors import DataError
from testdrive.ingest import DatasetManifest, ManifestEntry


def manifest_of(sizes, tmp_path=None):
    from pathlib import Path
    entries = tuple(ManifestEntry(f"i{k}", Path(f"/na/i{k}.png"), w, h)
                    for k, (w, h) in enumerate(sizes))
    return DatasetManifest(Path("/na"), entries)


def det(x, y, w, h, image_id="i0", score=0.9):
    return Detection(image_id, BoundingBox(x, y, w, h), score)


class TestAverageBox:
    def test_mean_of_two(self):
        assert average_box([det(0, 0, 50, 100), det(0, 0, 70, 140)]) == (60, 120)

    def test_single_box(self):
        assert average_box([det(0, 0, 33, 47)]) == (33, 47)

    def test_rounding(self):
        assert average_box([det(0, 0, 10, 10), det(0, 0, 11, 11)]) == (11, 11)

    def test_floor_at_8px(self):
        assert average_box([det(0, 0, 0.4, 0.4)]) == (8, 8)

    def test_empty_rejected(self):
        with pytest.raises(DataError, match="tile size"):
            average_box([])


class TestBuildComplement:
    def test_spec_hand_case(self):
        # 100x100 image, 50x50 tiles, one detection covering the top-left
        # tile exactly: 3 of the 4 grid tiles survive.
        m = manifest_of([(100, 100)])
        cs = build_complement(m, [det(0, 0, 50, 50)], (50, 50), 0.2)
        assert len(cs) == 3
        assert all(b != BoundingBox(0, 0, 50, 50) for _, b in cs.patches)

    def test_no_detections_full_grid(self):
        m = manifest_of([(100, 100)])
        cs = build_complement(m, [], (30, 30), 0.2)
        # floor(100/30) = 3 per axis; the 10px remainder is under half a tile.
        assert len(cs) == 9

    def test_remainder_strip_kept_when_half_tile(self):
        m = manifest_of([(130, 100)])
        cs = build_complement(m, [], (50, 50), 0.2)
        # Columns [0,50) [50,100) [100,130): 30px remainder >= 25 kept.
        assert len(cs) == 6
        assert any(b.w == 30 for _, b in cs.patches)

    def test_detection_covering_image_removes_all(self):
        m = manifest_of([(100, 100)])
        cs = build_complement(m, [det(0, 0, 100, 100)], (50, 50), 0.2)
        assert len(cs) == 0

    def test_grazing_detection_below_threshold_kept(self):
        m = manifest_of([(100, 100)])
        # 15x15 corner graze of a 50x50 tile: 225/2500 = 9% < 20%.
        cs = build_complement(m, [det(40, 40, 20, 20)], (50, 50), 0.2)
        assert len(cs) == 4

    def test_exclusion_respects_threshold(self):
        m = manifest_of([(120, 90)])
        rng = np.random.default_rng(0)
        dets = [det(float(rng.integers(0, 90)), float(rng.integers(0, 60)),
                    20, 20) for _ in range(6)]
        cs = build_complement(m, dets, (30, 30), 0.2)
        for _, patch in cs.patches:
            for d in dets:
                assert intersection_area(patch, d.box) <= 0.2 * patch.area + 1e-9

    def test_patches_pairwise_disjoint(self):
        m = manifest_of([(130, 130)])
        cs = build_complement(m, [], (40, 40), 0.2)
        boxes = [b for _, b in cs.patches]
        for i, a in enumerate(boxes):
            for b in boxes[i + 1:]:
                assert intersection_area(a, b) == 0.0

    def test_count_monotone_in_detections(self):
        m = manifest_of([(200, 200)])
        rng = np.random.default_rng(1)
        dets = [det(float(rng.integers(0, 170)), float(rng.integers(0, 170)),
                    30, 30, score=s) for s in np.linspace(0.1, 0.9, 12)]
        tile = (25, 25)
        prev = None
        for gamma in (0.0, 0.3, 0.6, 0.95):
            kept = [d for d in dets if d.score >= gamma]
            n = len(build_complement(m, kept, tile, 0.2))
            if prev is not None:
                assert n >= prev
            prev = n

    def test_small_image_skipped_with_warning(self, caplog):
        m = manifest_of([(20, 20), (100, 100)])
        with caplog.at_level("WARNING"):
            cs = build_complement(m, [], (50, 50), 0.2)
        assert all(img == "i1" for img, _ in cs.patches)
        assert any("smaller than tile" in r.message for r in caplog.records)

    def test_bad_tile_rejected(self):
        with pytest.raises(DataError):
            build_complement(manifest_of([(50, 50)]), [], (0, 10), 0.2)


def test_save_complement_csv(tmp_path):
    cs = ComplementSet((("i0", BoundingBox(0, 0, 10, 20)),
                        ("i1", BoundingBox(5, 5, 10, 20))), (10, 20), 0.2)
    path = tmp_path / "comp.csv"
    save_complement(cs, path)
    lines = path.read_text().strip().splitlines()
    assert lines[0] == "image_id,x,y,w,h"
    assert lines[1] == "i0,0,0,10,20"
    assert len(lines) == 3
