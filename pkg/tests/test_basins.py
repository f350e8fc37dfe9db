import math

import numpy as np
import pytest

from inmux import basins
from inmux.mpc import MpcConfig
from conftest import SETPOINT


def make_spec(box, res, targets, max_steps=500, slice_kind="u",
              fixed=(0.3, 0.5)):
    return basins.SweepSpec(slice_kind=slice_kind, fixed=fixed, box=box,
                            resolution=res, setpoint=tuple(SETPOINT),
                            targets=tuple(map(tuple, targets)),
                            max_steps=max_steps)


def synthetic_grid(labels, box=((0.0, 1.0), (0.0, 1.0))):
    """BasinGrid carrying fabricated labels, for geometry-only helpers."""
    n1, n2 = labels.shape
    spec = basins.SweepSpec(slice_kind="u", fixed=(0.3, 0.5), box=box,
                            resolution=(n1, n2), setpoint=(0.49, 0.37),
                            targets=((1.0, 0.5),))
    return basins.BasinGrid(
        spec=spec, mpc=MpcConfig(), params_vec=np.zeros(12), level=0,
        ax1=np.linspace(*box[0], n1), ax2=np.linspace(*box[1], n2),
        labels=labels.astype(np.int16), steps=np.zeros((n1, n2), np.int32),
        computed=np.ones((n1, n2), bool))


@pytest.fixture(scope="module")
def fast_grid(params, u_instances):
    # window straddling the quick basin-2 core; unconverged cells label 0
    spec = make_spec(((1.0, 1.1), (0.25, 0.40)), (6, 6), u_instances,
                     max_steps=500)
    return basins.sweep(params, MpcConfig(), spec, threads=1)


class TestSweep:
    def test_window_contains_boundary(self, fast_grid):
        labs = set(np.unique(fast_grid.labels).tolist())
        assert 2 in labs
        assert len(labs) >= 2
        assert basins.mixed_mask(fast_grid.labels).sum() > 0

    def test_cells_reproduce_standalone(self, fast_grid):
        n1, n2 = fast_grid.labels.shape
        for i, j in ((0, 0), (n1 - 1, n2 - 1), (2, 3)):
            label, steps = basins.evaluate_cell(fast_grid, i, j)
            assert label == fast_grid.labels[i, j]
            assert steps == fast_grid.steps[i, j]

    def test_worker_count_invariance(self, params, u_instances, fast_grid):
        spec = make_spec(((1.0, 1.1), (0.25, 0.40)), (6, 6), u_instances,
                         max_steps=500)
        g2 = basins.sweep(params, MpcConfig(), spec, threads=2)
        assert np.array_equal(g2.labels, fast_grid.labels)
        assert np.array_equal(g2.steps, fast_grid.steps)

    def test_instance_cells_with_setpoint_start(self, params, u_instances):
        # x0 = r and u0 = the instance: immediate fixed points, labeled 1..3
        for i, u in enumerate(u_instances):
            eps = 1e-6
            spec = make_spec(((u[0] - eps, u[0] + eps), (u[1] - eps, u[1] + eps)),
                             (2, 2), u_instances, max_steps=60,
                             fixed=tuple(SETPOINT))
            g = basins.sweep(params, MpcConfig(), spec, threads=1)
            assert np.all(g.labels == i + 1)

    def test_validation(self, u_instances):
        with pytest.raises(ValueError):
            make_spec(((0.9, 1.0), (0.4, 0.5)), (1, 4), u_instances)
        with pytest.raises(ValueError):
            basins.SweepSpec(slice_kind="z", fixed=(0.3, 0.5),
                             box=((0, 1), (0, 1)), resolution=(4, 4),
                             setpoint=(0.49, 0.37), targets=((1, 0.5),))


class TestRefine:
    def test_refinement_tracks_boundary(self, fast_grid):
        children = basins.refine_boundary(fast_grid, levels=1, threads=1)
        child = children[0]
        assert child.labels.shape == (12, 12)
        assert child.level == 1
        # only children of mixed-neighborhood parents were re-simulated
        mixed = basins.mixed_mask(fast_grid.labels)
        for i in range(12):
            for j in range(12):
                if child.computed[i, j]:
                    assert mixed[i // 2, j // 2]
        assert 0.0 <= child.changed_fraction <= 1.0

    def test_interior_labels_inherited(self, fast_grid):
        child = basins.refine_boundary(fast_grid, levels=1, threads=1)[0]
        for i in range(12):
            for j in range(12):
                if not child.computed[i, j]:
                    assert child.labels[i, j] == fast_grid.labels[i // 2, j // 2]

    def test_single_label_region_stays_clean(self, params, u_instances):
        # deep inside the fast basin: no boundary, nothing re-simulated
        spec = make_spec(((1.07, 1.10), (0.26, 0.30)), (4, 4), u_instances,
                         max_steps=800)
        g = basins.sweep(params, MpcConfig(), spec, threads=1)
        assert np.all(g.labels == 2)
        child = basins.refine_boundary(g, levels=1, threads=1)[0]
        assert basins.mixed_mask(child.labels).sum() == 0
        assert child.changed_fraction == 0.0
        assert not child.computed.any()


class TestBoundaryDimension:
    def test_straight_line_boundary_has_dimension_one(self):
        grids = []
        for n in (32, 64, 128):
            ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            labels = 1 + (jj > 0.6 * ii + 0.2 * n).astype(int)
            grids.append(synthetic_grid(labels))
        dim = basins.boundary_dimension(grids)
        assert dim.ok
        assert dim.slope == pytest.approx(1.0, abs=0.1)

    def test_checkerboard_is_space_filling(self):
        grids = []
        for n in (32, 64, 128):
            ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
            grids.append(synthetic_grid(((ii + jj) % 2).astype(int)))
        dim = basins.boundary_dimension(grids)
        assert dim.ok
        assert dim.slope == pytest.approx(2.0, abs=0.05)

    def test_insufficient_data_flagged(self):
        grids = [synthetic_grid(np.ones((n, n), int)) for n in (8, 16, 32)]
        dim = basins.boundary_dimension(grids)
        assert not dim.ok
        assert math.isnan(dim.slope)
        assert basins.boundary_dimension(grids[:2]).ok is False


class TestExports:
    def test_pgm_layout(self, fast_grid):
        data = basins.pgm_bytes(fast_grid)
        assert data.startswith(b"P5\n6 6\n255\n")
        body = data[len(b"P5\n6 6\n255\n"):]
        assert len(body) == 36
        values = set(body)
        assert values <= {0, 20, 40, 90, 170, 250}

    def test_rows_cover_grid(self, fast_grid):
        rows = list(basins.grid_rows(fast_grid))
        assert len(rows) == 36
        i, j, c1, c2, label, steps = rows[0]
        assert (i, j) == (0, 0)
        assert c1 == pytest.approx(fast_grid.ax1[0])
        assert label == fast_grid.labels[0, 0]
