"""Coarse localization from the per-interval jump set.

The jumping pairs' cells should outline one contiguous patch of the
grid, but noise and multipath tear it into pieces.  Selection rule:
a single component is kept as is; of exactly two, the larger survives
and the other is discarded as noise; three or more are assumed to be
fragments of one region and are re-joined into the smallest connected
superset (a hub cell plus shortest paths to every fragment, which is
exact for three fragments).  The position estimate is the centroid of
the pair positions inside the selected region.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

from .env import TwinsGrid

Cell = tuple[int, int]


@dataclass(frozen=True)
class ActiveRegion:
    cells: frozenset[Cell]
    centroid: tuple[float, float]
    component_count: int


def connected_components(cells: set[Cell]) -> list[set[Cell]]:
    """4-connected components of a cell set, largest first (ties: lower min cell)."""
    remaining = set(cells)
    comps = []
    while remaining:
        seed = min(remaining)
        comp = {seed}
        queue = deque([seed])
        remaining.discard(seed)
        while queue:
            ix, iy = queue.popleft()
            for nb in ((ix - 1, iy), (ix + 1, iy), (ix, iy - 1), (ix, iy + 1)):
                if nb in remaining:
                    remaining.discard(nb)
                    comp.add(nb)
                    queue.append(nb)
        comps.append(comp)
    comps.sort(key=lambda c: (-len(c), min(c)))
    return comps


def _weighted_field(grid: TwinsGrid, sources: set[Cell], free: set[Cell]):
    """0-1 BFS from a cell group: cost of reaching each lattice cell.

    Cells already in the jump set (``free``) cost nothing to traverse,
    every other cell costs one addition.  A cell's own weight is included
    in its distance.  Returns (dist, parent).
    """
    dist: dict[Cell, int] = {}
    parent: dict[Cell, Cell | None] = {}
    queue = deque()
    for c in sorted(sources):
        dist[c] = 0
        parent[c] = None
        queue.append(c)
    while queue:
        cell = queue.popleft()
        for nb in grid.adjacent_cells(cell):
            w = 0 if nb in free else 1
            nd = dist[cell] + w
            if nb not in dist or nd < dist[nb]:
                dist[nb] = nd
                parent[nb] = cell
                if w == 0:
                    queue.appendleft(nb)
                else:
                    queue.append(nb)
    return dist, parent


def _join_components(grid: TwinsGrid, comps: list[set[Cell]]) -> set[Cell]:
    """Smallest connected superset of all components (hub construction).

    Chooses the lattice cell minimizing the total number of *added* cells
    on shortest paths to every component (existing jump cells are free),
    then unions one cheapest path per component.  Exact for three
    components: any minimal connected superset, contracted over the
    components, is three paths meeting at one center.  Applied unchanged
    as a heuristic beyond three.
    """
    union = set().union(*comps)
    fields = [_weighted_field(grid, comp, union) for comp in comps]
    best_hub = None
    best_cost = math.inf
    for iy in range(grid.ny):
        for ix in range(grid.nx):
            cell = (ix, iy)
            cost = 0
            for dist, _ in fields:
                d = dist.get(cell)
                if d is None:
                    cost = math.inf
                    break
                cost += d
            if cost < math.inf:
                # the hub itself is counted once, not once per path
                cost -= (len(fields) - 1) * (0 if cell in union else 1)
            if cost < best_cost or (cost == best_cost and cell < best_hub):
                best_cost = cost
                best_hub = cell
    if best_hub is None:
        # lattice disconnected (cannot happen on a rectangle, kept for safety)
        return union
    joined = set(union)
    for _, parent in fields:
        cell = best_hub
        while cell is not None:
            joined.add(cell)
            cell = parent[cell]
    return joined


def select_subgraph(jumping_twins, grid: TwinsGrid,
                    prev_estimate: tuple[float, float] | None = None
                    ) -> ActiveRegion | None:
    """Active region for one interval's jump set; None when the set is empty."""
    if not jumping_twins:
        return None
    cells = {grid.twin_cell[tid] for tid in jumping_twins}
    comps = connected_components(cells)
    n = len(comps)
    if n == 1:
        selected = comps[0]
    elif n == 2:
        if len(comps[0]) > len(comps[1]):
            selected = comps[0]
        else:
            # equal sizes: prefer temporal coherence, then lower min cell
            if prev_estimate is not None:
                def gap(comp):
                    cx, cy = _twin_centroid(comp, grid)
                    return math.hypot(cx - prev_estimate[0], cy - prev_estimate[1])
                selected = min(comps, key=lambda c: (gap(c), min(c)))
            else:
                selected = min(comps, key=lambda c: min(c))
    else:
        selected = _join_components(grid, comps)
    cx, cy = _twin_centroid(selected, grid)
    return ActiveRegion(frozenset(selected), (cx, cy), n)


def _twin_centroid(cells, grid: TwinsGrid) -> tuple[float, float]:
    xs, ys = [], []
    for cell in cells:
        tid = grid.cell_to_twin.get(cell)
        if tid is not None:
            xs.append(grid.twins[tid].x)
            ys.append(grid.twins[tid].y)
    if not xs:
        raise ValueError("region contains no pairs")
    return sum(xs) / len(xs), sum(ys) / len(ys)


def centroid(cells, grid: TwinsGrid) -> tuple[float, float] | None:
    """Mean position of the pairs inside the cells; None for an empty set."""
    if not cells:
        return None
    return _twin_centroid(cells, grid)


def is_connected(cells: set[Cell]) -> bool:
    if not cells:
        return True
    return len(connected_components(set(cells))[0]) == len(cells)


def minimal_connected_superset_exhaustive(grid: TwinsGrid,
                                          cells: set[Cell]) -> set[Cell]:
    """Brute-force smallest connected superset; oracle for small grids.

    Tries all ways of adding k = 0, 1, 2, ... free lattice cells until a
    connected superset appears.  Exponential; intended for <= 5x5 grids.
    """
    from itertools import combinations

    if is_connected(cells):
        return set(cells)
    free = [(ix, iy) for iy in range(grid.ny) for ix in range(grid.nx)
            if (ix, iy) not in cells]
    for k in range(1, len(free) + 1):
        best = None
        for extra in combinations(free, k):
            cand = cells | set(extra)
            if is_connected(cand):
                if best is None or sorted(cand) < sorted(best):
                    best = cand
        if best is not None:
            return set(best)
    return set(cells)
