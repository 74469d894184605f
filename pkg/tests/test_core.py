"""Labels, parameters, and pixel indexing."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flowmatte.core import (BACKGROUND, FOREGROUND, UNKNOWN, Params,
                            check_same_size, pixel_coords, pixel_index,
                            region_masks)


class TestPixelIndex:
    def test_origin(self):
        assert pixel_index(0, 0, 64) == 0

    def test_interior(self):
        assert pixel_index(2, 3, 10) == 23

    def test_last(self):
        assert pixel_index(9, 9, 10) == 99

    @given(st.integers(1, 200), st.data())
    def test_round_trip(self, width, data):
        row = data.draw(st.integers(0, 199))
        col = data.draw(st.integers(0, width - 1))
        index = pixel_index(row, col, width)
        back_row, back_col = pixel_coords(index, width)
        assert (back_row, back_col) == (row, col)


class TestRegionMasks:
    def test_all_foreground(self):
        trimap = np.full((4, 4), FOREGROUND, dtype=np.uint8)
        fg, bg, unk = region_masks(trimap)
        assert fg.size == 16 and bg.size == 0 and unk.size == 0

    def test_checkerboard(self):
        trimap = np.indices((6, 6)).sum(axis=0) % 2
        trimap = np.where(trimap == 0, FOREGROUND, BACKGROUND)
        fg, bg, unk = region_masks(trimap)
        assert unk.size == 0
        assert fg.size + bg.size == 36
        assert np.intersect1d(fg, bg).size == 0

    def test_band_counts(self):
        trimap = np.full((10, 10), FOREGROUND, dtype=np.uint8)
        trimap[:, 3:7] = UNKNOWN
        trimap[:, 7:] = BACKGROUND
        fg, bg, unk = region_masks(trimap)
        assert unk.size == 40
        assert fg.size + bg.size == 60

    def test_partition_and_sorted(self):
        rng = np.random.default_rng(11)
        trimap = rng.integers(0, 3, size=(9, 13)).astype(np.uint8)
        fg, bg, unk = region_masks(trimap)
        merged = np.concatenate([fg, bg, unk])
        assert np.array_equal(np.sort(merged), np.arange(trimap.size))
        for part in (fg, bg, unk):
            assert np.array_equal(part, np.sort(part))


class TestParams:
    def test_published_defaults(self):
        p = Params()
        assert p.cm_neighbors == 20
        assert p.ku_neighbors == 7
        assert p.uu_neighbors == 5
        assert p.ku_strength == 0.05
        assert p.uu_strength == 0.01
        assert p.local_strength == 1.0
        assert p.known_weight == 100.0
        assert p.loyalty_strength == 0.05
        assert p.mixture_reg == 1e-3
        assert p.cm_coord_scale == 1.0
        assert p.ku_coord_scale == 10.0
        assert p.uu_coord_scale == 1.0 / 20.0
        assert p.patch_strong_match == 0.25
        assert p.patch_no_match == 0.9

    def test_validation(self):
        with pytest.raises(ValueError):
            Params(cm_neighbors=0)
        with pytest.raises(ValueError):
            Params(known_weight=0.0)
        with pytest.raises(ValueError):
            Params(mixture_reg=-1e-3)
        with pytest.raises(ValueError):
            Params(patch_strong_match=0.95)  # above patch_no_match
        # Zero term strengths are legitimate (they drop the term).
        Params(ku_strength=0.0, uu_strength=0.0)

    def test_replace(self):
        p = Params().replace(cm_neighbors=5)
        assert p.cm_neighbors == 5
        assert Params().cm_neighbors == 20

    def test_from_mapping_types_and_unknown_keys(self):
        p = Params.from_mapping({"cm_neighbors": "7", "cg_tol": "1e-8"})
        assert p.cm_neighbors == 7 and p.cg_tol == 1e-8
        with pytest.raises(ValueError):
            Params.from_mapping({"no_such_knob": "1"})
        with pytest.raises(ValueError):
            Params.from_mapping({"cm_neighbors": "seven"})

    def test_from_file(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text(
            "# tuned for the regression suite\n"
            "cm_neighbors = 9\n"
            "\n"
            "uu_strength=0.5   # heavier smoothing\n")
        p = Params.from_file(config)
        assert p.cm_neighbors == 9
        assert p.uu_strength == 0.5
        assert p.ku_neighbors == Params().ku_neighbors

    def test_from_file_rejects_junk(self, tmp_path):
        config = tmp_path / "bad.cfg"
        config.write_text("cm_neighbors\n")
        with pytest.raises(ValueError):
            Params.from_file(config)


def test_check_same_size_message():
    image = np.zeros((4, 6, 3))
    trimap = np.zeros((5, 6), dtype=np.uint8)
    with pytest.raises(ValueError, match=r"6x4.*6x5"):
        check_same_size(image, trimap)


def test_labels_are_distinct():
    assert len({BACKGROUND, UNKNOWN, FOREGROUND}) == 3
