import numpy as np
import pytest

import belief_opacity as bo
from conftest import random_mdp


def two_state_model(secret_first=True, lam=0.8, pi0=(0.75, 0.25)):
    return bo.Mdp(
        states=("sA", "sB"),
        pi0=np.array(pi0),
        actions=("a",),
        trans={"a": np.array([[0.6, 0.4], [0.4, 0.6]])},
        secret=frozenset({0} if secret_first else {1}),
        threshold=lam,
    )


class TestBuildGrid:
    def test_three_state_counts(self, partition3):
        counts = partition3.counts()
        assert len(partition3.cells) == 25
        assert counts == {"safe": 6, "bad": 9, "excluded": 10}

    def test_single_cell_two_state_model(self):
        p = bo.build_grid(1.0, two_state_model(lam=1.0))
        assert len(p.cells) == 1
        assert p.cells[0].status == bo.SAFE
        np.testing.assert_array_equal(p.cells[0].box.lo, [0.0])
        np.testing.assert_array_equal(p.cells[0].box.hi, [1.0])

    def test_zero_threshold_marks_positive_corners_bad(self, mdp3):
        from dataclasses import replace

        p = bo.build_grid(0.2, replace(mdp3, threshold=0.0))
        counts = p.counts()
        assert counts["safe"] == 0
        assert counts["bad"] == 15

    def test_non_dividing_width_truncates(self, mdp3):
        p = bo.build_grid([0.3, 0.5], mdp3)
        lo0 = sorted({float(c.box.lo[0]) for c in p.cells})
        hi0 = sorted({float(c.box.hi[0]) for c in p.cells})
        assert lo0 == [i * 0.3 for i in range(4)]  # last cell truncated at 1
        assert hi0[-1] == 1.0

    def test_bad_widths_rejected(self, mdp3):
        with pytest.raises(ValueError):
            bo.build_grid(-0.1, mdp3)
        with pytest.raises(ValueError):
            bo.build_grid([0.2], mdp3)  # needs one width per dimension


class TestClassifyCell:
    def test_shaded_cell_is_bad(self, mdp3):
        box = bo.IntervalBox(lo=np.array([0.0, 0.6]), hi=np.array([0.2, 0.8]))
        assert bo.classify_cell(box, mdp3) == bo.BAD

    def test_initial_cell_is_safe(self, mdp3):
        box = bo.IntervalBox(lo=np.array([0.2, 0.0]), hi=np.array([0.4, 0.2]))
        assert bo.classify_cell(box, mdp3) == bo.SAFE

    def test_outside_simplex_is_excluded(self, mdp3):
        box = bo.IntervalBox(lo=np.array([0.8, 0.2]), hi=np.array([1.0, 0.4]))
        assert bo.classify_cell(box, mdp3) == bo.EXCLUDED

    def test_corner_mass_exactly_at_threshold_is_safe(self, mdp3):
        box = bo.IntervalBox(lo=np.array([0.3, 0.3]), hi=np.array([0.4, 0.4]))
        assert bo.classify_cell(box, mdp3) == bo.SAFE  # 0.8 is not > 0.8

    def test_requires_canonical_order(self):
        m = bo.Mdp(states=("x", "y"), pi0=np.array([0.5, 0.5]), actions=("a",),
                   trans={"a": np.eye(2)}, secret=frozenset({1}), threshold=0.5)
        with pytest.raises(ValueError, match="canonically ordered"):
            bo.classify_cell(bo.IntervalBox(lo=np.zeros(1), hi=np.ones(1)), m)

    def test_enlarging_never_flips_bad_to_safe(self, mdp3):
        rng = np.random.default_rng(31)
        for _ in range(200):
            p1, p2 = rng.uniform(size=2), rng.uniform(size=2)
            box = bo.IntervalBox(lo=np.minimum(p1, p2), hi=np.maximum(p1, p2))
            grow = rng.uniform(0, 0.2, size=2)
            bigger = bo.IntervalBox(
                lo=np.maximum(box.lo - grow, 0.0), hi=np.minimum(box.hi + grow, 1.0)
            )
            if bo.classify_cell(box, mdp3) == bo.BAD:
                assert bo.classify_cell(bigger, mdp3) != bo.SAFE

    def test_non_excluded_cells_touch_the_domain(self, partition3):
        for c in partition3.cells:
            if c.status != bo.EXCLUDED:
                assert float(c.box.lo.sum()) < 1.0  # the lower corner lies inside


class TestLocateCell:
    def test_initial_belief_cell(self, mdp3, partition3):
        cid = bo.locate_cell(bo.reduce_belief(mdp3.pi0), partition3)
        cell = partition3.cell(cid)
        np.testing.assert_array_equal(cell.box.lo, [0.2, 0.0])
        safe_ids = sorted(c.id for c in partition3.safe_cells())
        assert safe_ids.index(cid) == 3  # fourth safe cell, counting from zero

    def test_origin(self, partition3):
        cid = bo.locate_cell(np.zeros(2), partition3)
        np.testing.assert_array_equal(partition3.cell(cid).box.lo, [0.0, 0.0])

    def test_grid_corner_goes_to_upper_cell(self, partition3):
        cid = bo.locate_cell(np.array([0.2, 0.2]), partition3)
        np.testing.assert_array_equal(partition3.cell(cid).box.lo, [0.2, 0.2])

    def test_outer_boundary_falls_back_to_last_cell(self, partition3):
        cid = bo.locate_cell(np.array([1.0, 0.0]), partition3)
        np.testing.assert_array_equal(partition3.cell(cid).box.lo, [0.8, 0.0])

    def test_simplex_boundary_corner_is_not_excluded(self, partition3):
        cid = bo.locate_cell(np.array([0.6, 0.4]), partition3)
        assert partition3.cell(cid).status != bo.EXCLUDED

    def test_rejects_points_outside_unit_box(self, partition3):
        with pytest.raises(ValueError):
            bo.locate_cell(np.array([1.2, 0.0]), partition3)

    def test_rejects_points_outside_domain(self, partition3):
        with pytest.raises(ValueError):
            bo.locate_cell(np.array([0.9, 0.9]), partition3)

    def test_total_on_domain_and_agrees_with_membership(self, partition3):
        rng = np.random.default_rng(7)
        pts = rng.dirichlet(np.ones(3), size=3000)[:, :2]
        located = 0
        for x in pts:
            cid = bo.locate_cell(x, partition3)
            cell = partition3.cell(cid)
            assert cell.box.contains(x)
            assert cell.status != bo.EXCLUDED
            located += 1
        assert located / len(pts) >= 0.999  # safe+bad cells cover the domain


class TestRefineInitial:
    def test_safe_initial_cell_is_untouched(self, mdp3, partition3):
        p = bo.refine_initial(partition3, bo.reduce_belief(mdp3.pi0), mdp3)
        assert p is partition3

    def test_one_dimensional_bisection_matches_oracle(self):
        m = two_state_model(lam=0.8, pi0=(0.75, 0.25))
        p = bo.build_grid(0.9, m)
        x0 = np.array([0.75])
        assert p.cell(bo.locate_cell(x0, p)).status == bo.BAD

        # brute-force midpoint bisection oracle on the interval [0, 0.9]
        lo, hi = 0.0, 0.9
        while hi > 0.8:  # the cell corner is its upper bound here
            mid = 0.5 * (lo + hi)
            if 0.75 >= mid:
                lo = mid
            else:
                hi = mid
        refined = bo.refine_initial(p, x0, m)
        cell = refined.cell(bo.locate_cell(x0, refined))
        assert cell.status == bo.SAFE
        assert float(cell.box.lo[0]) == lo
        assert float(cell.box.hi[0]) == hi

    def test_zero_budget_raises(self):
        m = two_state_model(lam=0.8, pi0=(0.75, 0.25))
        p = bo.build_grid(0.9, m)
        with pytest.raises(bo.RefinementFailedError):
            bo.refine_initial(p, np.array([0.75]), m, max_depth=0)

    def test_refined_partition_still_locates_everywhere(self, mdp3):
        from dataclasses import replace

        # a coarse grid whose initial cell is bad, forcing a few bisections
        m = replace(mdp3, threshold=0.45)
        p = bo.build_grid(0.5, m)
        x0 = bo.reduce_belief(m.pi0)
        refined = bo.refine_initial(p, x0, m)
        assert refined.cell(bo.locate_cell(x0, refined)).status == bo.SAFE
        rng = np.random.default_rng(2)
        for x in rng.dirichlet(np.ones(3), size=500)[:, :2]:
            cell = refined.cell(bo.locate_cell(x, refined))
            assert cell.box.contains(x)

    def test_interiors_stay_disjoint_after_refining(self, mdp3):
        from dataclasses import replace

        m = replace(mdp3, threshold=0.45)
        p = bo.refine_initial(bo.build_grid(0.5, m), bo.reduce_belief(m.pi0), m)
        cells = list(p.cells)
        for i, c1 in enumerate(cells):
            for c2 in cells[i + 1:]:
                inter_lo = np.maximum(c1.box.lo, c2.box.lo)
                inter_hi = np.minimum(c1.box.hi, c2.box.hi)
                assert not np.all(inter_lo < inter_hi)


class TestExports:
    def test_csv_lists_every_cell(self, partition3):
        text = bo.partition_to_csv(partition3)
        lines = text.strip().split("\n")
        assert lines[0] == "id,lo0,lo1,hi0,hi1,status"
        assert len(lines) == 26
        assert lines[1].startswith("0,0.0,0.0,")

    def test_svg_renders_two_dimensional_partitions(self, mdp3, partition3):
        svg = bo.partition_to_svg(partition3, mdp3, initial=np.array([0.3, 0.1]))
        assert svg.startswith("<svg")
        assert svg.count("<rect") == 16  # frame plus the 15 usable cells
        assert "<circle" in svg

    def test_svg_rejects_other_dimensions(self):
        m = two_state_model()
        p = bo.build_grid(0.5, m)
        with pytest.raises(ValueError):
            bo.partition_to_svg(p, m)
