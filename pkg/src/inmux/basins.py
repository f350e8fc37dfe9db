"""Basins of attraction of the closed-loop MPC system.

A sweep grids one 2D slice of initial conditions (input space with the
outputs fixed, or output space with the inputs fixed), classifies every
cell by the fixed point its closed loop reaches, and records step counts.
Refinement re-simulates only cells bordering a label change at doubled
resolution, which both sharpens the boundary picture and yields the
box-counting data used to judge whether the boundary is smooth or fractal.

Cells are independent: each carries enough metadata (via the grid's spec
and packed plant parameters) to be reproduced standalone, labels are
deterministic, and sweeps parallelize over rows without affecting results.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from ._kernels import kernels
from .mpc import MpcConfig

LABEL_UNRESOLVED = 0
LABEL_ERROR = -2


@dataclass(frozen=True)
class SweepSpec:
    """Everything needed to reproduce any cell of a basin sweep."""
    slice_kind: str                  # "u": vary u0 at fixed y0; "y": vary y0
    fixed: tuple                     # the held pair (y0 for "u", u0 for "y")
    box: tuple                       # ((lo1, hi1), (lo2, hi2)) for the slice
    resolution: tuple                # (n1, n2) cells
    setpoint: tuple
    targets: tuple                   # input instances, ((u1, u2), ...)
    max_steps: int = 2000
    y_tol: float = 1.0e-4
    u_tol: float = 1.0e-3
    hold_steps: int = 20

    def __post_init__(self):
        if self.slice_kind not in ("u", "y"):
            raise ValueError("slice_kind must be 'u' or 'y'")
        if min(self.resolution) < 2:
            raise ValueError("resolution must be at least 2x2")


@dataclass
class BasinGrid:
    spec: SweepSpec
    mpc: MpcConfig
    params_vec: np.ndarray
    level: int
    ax1: np.ndarray                  # cell centers along the fast axis
    ax2: np.ndarray
    labels: np.ndarray               # (n1, n2) int16
    steps: np.ndarray                # (n1, n2) int32
    computed: np.ndarray             # True where the cell was simulated
    changed_fraction: float = math.nan

    def cell_size(self):
        """Geometric-mean cell edge, the box-counting length scale."""
        (lo1, hi1), (lo2, hi2) = self.spec.box
        n1, n2 = self.labels.shape
        return math.sqrt((hi1 - lo1) / n1 * (hi2 - lo2) / n2)


def _centers(box, n):
    lo, hi = box
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5)


def _run_cell(p, spec, mpc_cfg, c1, c2):
    if spec.slice_kind == "u":
        x0 = np.asarray(spec.fixed, dtype=float)
        u0 = np.array([c1, c2])
    else:
        x0 = np.array([c1, c2])
        u0 = np.asarray(spec.fixed, dtype=float)
    try:
        _, label, steps = kernels.mpc_sim(
            p, x0, u0, np.asarray(spec.setpoint, dtype=float),
            mpc_cfg.ky, mpc_cfg.ku, mpc_cfg.horizon, mpc_cfg.dt,
            mpc_cfg.substeps, mpc_cfg.u_box, mpc_cfg.gtol, mpc_cfg.max_iter,
            spec.max_steps, np.asarray(spec.targets, dtype=float),
            spec.y_tol, spec.u_tol, spec.hold_steps)
        return label, steps
    except Exception:
        return LABEL_ERROR, 0


_CTX = {}


def _init_worker(payload):
    _CTX["payload"] = payload


def _row_worker(task):
    i, cells = task
    p, spec, mpc_cfg, ax2 = _CTX["payload"]
    out = []
    for j, c1 in cells:
        label, steps = _run_cell(p, spec, mpc_cfg, c1, ax2[j])
        out.append((j, label, steps))
    return i, out


def _run_cells(params_vec, spec, mpc_cfg, ax2, tasks, threads):
    """tasks: list of (row_index, [(col_index, coord1), ...])."""
    if threads <= 1:
        _init_worker((params_vec, spec, mpc_cfg, ax2))
        return [_row_worker(t) for t in tasks]
    payload = (params_vec, spec, mpc_cfg, ax2)
    with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                             initargs=(payload,)) as pool:
        return list(pool.map(_row_worker, tasks))


def evaluate_cell(grid, i, j):
    """Reproduce a single cell of a grid standalone; returns (label, steps)."""
    return _run_cell(grid.params_vec, grid.spec, grid.mpc,
                     grid.ax1[i], grid.ax2[j])


def sweep(params, mpc_cfg, spec, threads=1):
    """Classify every cell of the slice; deterministic and row-parallel."""
    p = params.as_array()
    n1, n2 = spec.resolution
    ax1 = _centers(spec.box[0], n1)
    ax2 = _centers(spec.box[1], n2)
    labels = np.zeros((n1, n2), dtype=np.int16)
    steps = np.zeros((n1, n2), dtype=np.int32)
    tasks = [(i, [(j, ax1[i]) for j in range(n2)]) for i in range(n1)]
    for i, row in _run_cells(p, spec, mpc_cfg, ax2, tasks, threads):
        for j, label, ns in row:
            labels[i, j] = label
            steps[i, j] = ns
    return BasinGrid(spec=spec, mpc=mpc_cfg, params_vec=p, level=0,
                     ax1=ax1, ax2=ax2, labels=labels, steps=steps,
                     computed=np.ones((n1, n2), dtype=bool))


def mixed_mask(labels):
    """Cells whose 4-neighborhood (incl. self) carries more than one label."""
    m = np.zeros(labels.shape, dtype=bool)
    d = labels[:-1, :] != labels[1:, :]
    m[:-1, :] |= d
    m[1:, :] |= d
    d = labels[:, :-1] != labels[:, 1:]
    m[:, :-1] |= d
    m[:, 1:] |= d
    return m


def refine_boundary(grid, levels=1, threads=1):
    """Nested 2x grids re-simulated near label changes.

    Children of boundary (mixed-neighborhood) cells are simulated at their
    own centers; interior children inherit the parent label.  Each level
    records the fraction of re-simulated cells whose label changed, a
    smooth-boundary consistency diagnostic.
    """
    out = []
    cur = grid
    for _ in range(levels):
        n1, n2 = cur.labels.shape
        spec = replace(cur.spec, resolution=(2 * n1, 2 * n2))
        ax1 = _centers(spec.box[0], 2 * n1)
        ax2 = _centers(spec.box[1], 2 * n2)
        labels = np.repeat(np.repeat(cur.labels, 2, axis=0), 2, axis=1).copy()
        steps = np.repeat(np.repeat(cur.steps, 2, axis=0), 2, axis=1).copy()
        computed = np.zeros_like(labels, dtype=bool)
        mixed = mixed_mask(cur.labels)
        tasks = []
        for i in range(2 * n1):
            cols = [(j, ax1[i]) for j in range(2 * n2) if mixed[i // 2, j // 2]]
            if cols:
                tasks.append((i, cols))
        changed = 0
        total = 0
        for i, row in _run_cells(cur.params_vec, spec, cur.mpc, ax2, tasks,
                                 threads):
            for j, label, ns in row:
                total += 1
                if label != labels[i, j]:
                    changed += 1
                labels[i, j] = label
                steps[i, j] = ns
                computed[i, j] = True
        child = BasinGrid(spec=spec, mpc=cur.mpc, params_vec=cur.params_vec,
                          level=cur.level + 1, ax1=ax1, ax2=ax2,
                          labels=labels, steps=steps, computed=computed,
                          changed_fraction=(changed / total if total else 0.0))
        out.append(child)
        cur = child
    return out


@dataclass
class BoundaryDimension:
    slope: float
    counts: list = field(default_factory=list)
    cell_sizes: list = field(default_factory=list)
    ok: bool = True
    message: str = ""


def boundary_dimension(grids):
    """Box-counting estimate: slope of log(mixed cells) vs log(1/cell size).

    Needs at least 3 grid levels and at least 10 mixed cells per level;
    otherwise returns an insufficient-data result (ok=False).  A smooth
    boundary curve in a 2D slice gives a slope near 1; space-filling label
    noise gives a slope near 2.
    """
    if len(grids) < 3:
        return BoundaryDimension(math.nan, ok=False,
                                 message="need at least 3 refinement levels")
    counts = [int(np.count_nonzero(mixed_mask(g.labels))) for g in grids]
    sizes = [g.cell_size() for g in grids]
    if min(counts) < 10:
        return BoundaryDimension(math.nan, counts, sizes, ok=False,
                                 message="fewer than 10 mixed cells at some level")
    x = np.log(1.0 / np.asarray(sizes))
    y = np.log(np.asarray(counts, dtype=float))
    slope = float(np.polyfit(x, y, 1)[0])
    return BoundaryDimension(slope, counts, sizes)


def pgm_bytes(grid):
    """P5 image of the label grid, one byte per cell.

    Gray levels: unresolved 0, error 20, domain-exit 40, then instance
    labels 1..N mapped to 90, 170, 250 (wrapping by +80 steps).  Rows of
    the image run along axis 2 so the file matches the CSV orientation.
    """
    n1, n2 = grid.labels.shape
    img = np.zeros((n1, n2), dtype=np.uint8)
    img[grid.labels == LABEL_ERROR] = 20
    img[grid.labels == -1] = 40
    for lab in range(1, int(grid.labels.max()) + 1):
        img[grid.labels == lab] = min(255, 90 + 80 * (lab - 1))
    header = f"P5\n{n2} {n1}\n255\n".encode("ascii")
    return header + img.tobytes()


def grid_rows(grid):
    """Rows (i, j, coord1, coord2, label, steps) for CSV export."""
    n1, n2 = grid.labels.shape
    for i in range(n1):
        for j in range(n2):
            yield (i, j, grid.ax1[i], grid.ax2[j],
                   int(grid.labels[i, j]), int(grid.steps[i, j]))
