"""Grid partition of the reduced belief domain and its cell classification.

The reduced beliefs live in X = {x >= 0, sum(x) <= 1}.  We cover [0, 1]^d
with axis-aligned cells and classify each one:

* ``excluded``: the cell's lower corner already sums to >= 1, so the cell
  meets X at most in a measure-zero set and can never contain a belief;
* ``bad``: the secret mass at the cell's upper corner exceeds the threshold
  (the secret mass is a nondecreasing linear form of the reduced
  coordinates, so the upper corner attains the cell maximum);
* ``safe``: everything else.

The upper-corner test is exact for cells fully inside X and conservative for
cells straddling the simplex boundary; we accept the conservatism.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .dynamics import IntervalBox
from .model import Mdp

__all__ = [
    "SAFE",
    "BAD",
    "EXCLUDED",
    "PartitionCell",
    "Partition",
    "RefinementFailedError",
    "build_grid",
    "classify_cell",
    "locate_cell",
    "refine_initial",
    "partition_to_csv",
    "partition_to_svg",
]

SAFE = "safe"
BAD = "bad"
EXCLUDED = "excluded"


class RefinementFailedError(RuntimeError):
    """Bisection budget exhausted with the initial cell still bad."""


@dataclass(frozen=True)
class PartitionCell:
    id: int
    box: IntervalBox
    status: str


@dataclass(frozen=True)
class Partition:
    """Interval cells covering [0, 1]^dim, listed in ascending id order.

    ``grid_edges`` is set only for unrefined grids (cells in row-major order
    over the per-axis edges); it enables a fast point-location path and is
    dropped by refinement.
    """

    cells: tuple[PartitionCell, ...]
    widths: tuple[float, ...]
    dim: int
    grid_edges: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "widths", tuple(self.widths))

    @cached_property
    def _by_id(self) -> dict[int, PartitionCell]:
        return {c.id: c for c in self.cells}

    @cached_property
    def _los(self) -> np.ndarray:
        return np.array([c.box.lo for c in self.cells])

    @cached_property
    def _his(self) -> np.ndarray:
        return np.array([c.box.hi for c in self.cells])

    @cached_property
    def _usable(self) -> np.ndarray:
        return np.array([c.status != EXCLUDED for c in self.cells])

    def cell(self, cell_id: int) -> PartitionCell:
        return self._by_id[cell_id]

    def safe_cells(self) -> tuple[PartitionCell, ...]:
        return tuple(c for c in self.cells if c.status == SAFE)

    def counts(self) -> dict[str, int]:
        out = {SAFE: 0, BAD: 0, EXCLUDED: 0}
        for c in self.cells:
            out[c.status] += 1
        return out


def classify_cell(box: IntervalBox, m: Mdp) -> str:
    """Classify one cell against the bad belief region.

    Requires the canonical state order (all secret indices within the
    reduced coordinates); the bad test compares the secret mass of the upper
    corner against the threshold, strictly.
    """
    if len(m.secret) and max(m.secret) >= m.n - 1:
        raise ValueError("model must be canonically ordered (last state non-secret)")
    if float(box.lo.sum()) >= 1.0:
        return EXCLUDED
    if float(box.hi[m.secret_indices].sum()) > m.threshold:
        return BAD
    return SAFE


def _axis_edges(width: float) -> np.ndarray:
    if width <= 0:
        raise ValueError("grid widths must be positive")
    inv = 1.0 / width
    count = round(inv) if abs(inv - round(inv)) <= 1e-9 * inv else math.ceil(inv)
    count = max(count, 1)
    edges = [min(i * width, 1.0) for i in range(count + 1)]
    edges[-1] = 1.0
    return np.array(edges)


def build_grid(widths, m: Mdp) -> Partition:
    """Axis-aligned grid over [0, 1]^(N-1), each cell classified.

    ``widths`` is one value per reduced dimension (a scalar is broadcast).
    A width that does not divide 1 gets a truncated final cell.  Excluded
    cells are kept in the listing for plotting but never become abstraction
    states.
    """
    dim = m.n - 1
    if np.isscalar(widths):
        widths = [float(widths)] * dim
    widths = [float(w) for w in widths]
    if len(widths) != dim:
        raise ValueError(f"expected {dim} grid widths, got {len(widths)}")
    edges = [_axis_edges(w) for w in widths]
    shape = [len(e) - 1 for e in edges]

    cells = []
    cell_id = 0
    for multi in np.ndindex(*shape):
        lo = np.array([edges[k][i] for k, i in enumerate(multi)])
        hi = np.array([edges[k][i + 1] for k, i in enumerate(multi)])
        box = IntervalBox(lo=lo, hi=hi)
        cells.append(PartitionCell(id=cell_id, box=box, status=classify_cell(box, m)))
        cell_id += 1
    return Partition(
        cells=tuple(cells),
        widths=tuple(widths),
        dim=dim,
        grid_edges=tuple(tuple(float(v) for v in e) for e in edges),
    )


def locate_cell(x: np.ndarray, p: Partition) -> int:
    """Id of the cell owning ``x``.

    Ownership follows the half-open convention (a point on a shared face
    belongs to the cell whose lower corner touches it), except that points
    on the outer boundary of the belief domain fall back to the adjacent
    non-excluded cell.  Both rules collapse to one deterministic pick: among
    non-excluded cells whose closed box contains x, take the one with the
    lexicographically largest lower corner.
    """
    xs = [float(v) for v in x]
    if len(xs) != p.dim:
        raise ValueError(f"expected a point of dimension {p.dim}")
    for v in xs:
        if v < -1e-9 or v > 1.0 + 1e-9:
            raise ValueError(f"point {xs!r} outside the unit box")
    xs = [min(max(v, 0.0), 1.0) for v in xs]

    if p.grid_edges is not None:
        idx = 0
        for k, edges in enumerate(p.grid_edges):
            n_k = len(edges) - 1
            i = bisect_right(edges, xs[k]) - 1
            if i >= n_k:  # coordinate exactly 1.0 belongs to the last cell
                i = n_k - 1
            idx = idx * n_k + i
        cell = p.cells[idx]
        if cell.status != EXCLUDED:
            return cell.id
        # lower corner on the simplex boundary; use the generic fallback

    point = np.array(xs)
    mask = p._usable & np.all(p._los <= point, axis=1) & np.all(point <= p._his, axis=1)
    hits = np.nonzero(mask)[0]
    if hits.size == 0:
        raise ValueError(f"point {xs!r} outside the belief domain")
    best = max(hits, key=lambda i: (tuple(p._los[i]), p.cells[i].id))
    return p.cells[best].id


def refine_initial(p: Partition, x0: np.ndarray, m: Mdp, max_depth: int = 32) -> Partition:
    """Bisect the cell containing ``x0`` until that cell is safe.

    ``x0`` itself must satisfy the opacity bound; the loop splits along the
    secret dimension with the most room between x0 and the cell's upper
    face (ties to the lowest dimension), reclassifies both halves, and stops
    once x0's cell is safe.  Raises :class:`RefinementFailedError` after
    ``max_depth`` bisections.
    """
    x0 = np.asarray(x0, dtype=float)
    secret_dims = [k for k in sorted(m.secret) if k < p.dim]
    for _ in range(max_depth):
        cell = p.cell(locate_cell(x0, p))
        if cell.status != BAD:
            return p
        if not secret_dims:
            break
        room = [(float(cell.box.hi[k] - x0[k]), k) for k in secret_dims]
        _, axis = max(room, key=lambda t: (t[0], -t[1]))
        mid = 0.5 * (cell.box.lo[axis] + cell.box.hi[axis])
        lo_half_hi = cell.box.hi.copy()
        lo_half_hi[axis] = mid
        hi_half_lo = cell.box.lo.copy()
        hi_half_lo[axis] = mid
        next_id = max(c.id for c in p.cells) + 1
        halves = []
        for box in (
            IntervalBox(lo=cell.box.lo, hi=lo_half_hi),
            IntervalBox(lo=hi_half_lo, hi=cell.box.hi),
        ):
            halves.append(PartitionCell(id=next_id, box=box, status=classify_cell(box, m)))
            next_id += 1
        cells = tuple(c for c in p.cells if c.id != cell.id) + tuple(halves)
        p = Partition(cells=cells, widths=p.widths, dim=p.dim)
    cell = p.cell(locate_cell(x0, p))
    if cell.status == BAD:
        raise RefinementFailedError(
            f"initial cell still bad after {max_depth} bisections; "
            "the opacity threshold may be too tight around the initial belief"
        )
    return p


def partition_to_csv(p: Partition) -> str:
    """One row per cell: id, lower corner, upper corner, status."""
    header = ["id"]
    header += [f"lo{k}" for k in range(p.dim)]
    header += [f"hi{k}" for k in range(p.dim)]
    header += ["status"]
    lines = [",".join(header)]
    for c in p.cells:
        row = [str(c.id)]
        row += [repr(float(v)) for v in c.box.lo]
        row += [repr(float(v)) for v in c.box.hi]
        row += [c.status]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def partition_to_svg(p: Partition, m: Mdp, initial: np.ndarray | None = None) -> str:
    """Plot a two-dimensional partition: shaded bad cells, safe-cell ids,
    the simplex boundary, the threshold line, and optionally the initial
    belief."""
    if p.dim != 2:
        raise ValueError("SVG export is only available for two reduced dimensions")
    size, margin = 500.0, 40.0

    def sx(v: float) -> str:
        return f"{margin + v * size:.2f}"

    def sy(v: float) -> str:
        return f"{margin + (1.0 - v) * size:.2f}"

    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{int(size + 2 * margin)}" height="{int(size + 2 * margin)}" '
        f'viewBox="0 0 {int(size + 2 * margin)} {int(size + 2 * margin)}">',
        f'<rect x="{sx(0)}" y="{sy(1)}" width="{size:.2f}" height="{size:.2f}" '
        'fill="white" stroke="black"/>',
    ]
    for c in p.cells:
        if c.status == EXCLUDED:
            continue
        lo, hi = c.box.lo, c.box.hi
        w = (hi[0] - lo[0]) * size
        h = (hi[1] - lo[1]) * size
        fill = "#d98c8c" if c.status == BAD else "none"
        out.append(
            f'<rect x="{sx(lo[0])}" y="{sy(hi[1])}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{fill}" fill-opacity="0.6" stroke="#999999" stroke-width="0.5"/>'
        )
        if c.status == SAFE:
            cx = 0.5 * (lo[0] + hi[0])
            cy = 0.5 * (lo[1] + hi[1])
            out.append(
                f'<text x="{sx(cx)}" y="{sy(cy)}" font-size="12" text-anchor="middle" '
                f'dominant-baseline="middle" fill="#333333">{c.id}</text>'
            )
    # simplex boundary x0 + x1 = 1
    out.append(
        f'<line x1="{sx(0)}" y1="{sy(1)}" x2="{sx(1)}" y2="{sy(0)}" '
        'stroke="#2b6cb0" stroke-width="1.5"/>'
    )
    # threshold boundary on the secret mass
    lam = m.threshold
    secret_dims = [k for k in sorted(m.secret) if k < 2]
    if len(secret_dims) == 2 and 0.0 <= lam <= 1.0:
        out.append(
            f'<line x1="{sx(0)}" y1="{sy(lam)}" x2="{sx(lam)}" y2="{sy(0)}" '
            'stroke="#b03030" stroke-width="1.5" stroke-dasharray="6,3"/>'
        )
    elif len(secret_dims) == 1 and 0.0 <= lam <= 1.0:
        k = secret_dims[0]
        if k == 0:
            out.append(
                f'<line x1="{sx(lam)}" y1="{sy(0)}" x2="{sx(lam)}" y2="{sy(1)}" '
                'stroke="#b03030" stroke-width="1.5" stroke-dasharray="6,3"/>'
            )
        else:
            out.append(
                f'<line x1="{sx(0)}" y1="{sy(lam)}" x2="{sx(1)}" y2="{sy(lam)}" '
                'stroke="#b03030" stroke-width="1.5" stroke-dasharray="6,3"/>'
            )
    if initial is not None:
        initial = np.asarray(initial, dtype=float)
        out.append(
            f'<circle cx="{sx(initial[0])}" cy="{sy(initial[1])}" r="5" fill="black"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
