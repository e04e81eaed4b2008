"""Independent reference implementations used by the tests."""

import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from tcsim.gridmap import GridMap
from tcsim.mapfilter import TRAVERSABILITY


def make_map(trav, elev=None, res=0.1, origin=(0.0, 0.0)):
    trav = np.asarray(trav, dtype=float)
    elev = np.zeros_like(trav) if elev is None else np.asarray(elev, dtype=float)
    return GridMap(res, origin, trav.shape, {"elevation": elev.copy(), TRAVERSABILITY: trav.copy()})


def formula_costs(trav, elev, w):
    """Per-cell cost straight from the definition, one cell at a time."""
    valid_e = elev[~np.isnan(elev) & ~np.isnan(trav)]
    base = valid_e.min() if valid_e.size else 0.0
    out = np.empty(trav.shape)
    for idx in np.ndindex(trav.shape):
        t, e = trav[idx], elev[idx]
        if math.isnan(t) or math.isnan(e):
            out[idx] = w.w_nan
        else:
            out[idx] = w.w_t / (t + w.eps_t) + w.w_e * (e - base)
    return out


def dijkstra_costs(costs, start):
    """Shortest entering-cost distances from ``start`` on the 8-connected grid."""
    rows, cols = costs.shape
    ids = np.arange(rows * cols).reshape(rows, cols)
    src, dst, wt = [], [], []
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == dc == 0:
                continue
            # cells (r, c) whose neighbor (r + dr, c + dc) lies inside the grid
            r0, r1 = max(0, -dr), rows - max(0, dr)
            c0, c1 = max(0, -dc), cols - max(0, dc)
            a = ids[r0:r1, c0:c1].ravel()
            b = ids[r0 + dr:r1 + dr, c0 + dc:c1 + dc].ravel()
            w = costs.ravel()[b]
            keep = np.isfinite(w)
            src.append(a[keep])
            dst.append(b[keep])
            wt.append(w[keep])
    graph = coo_matrix((np.concatenate(wt), (np.concatenate(src), np.concatenate(dst))),
                       shape=(rows * cols, rows * cols)).tocsr()
    return dijkstra(graph, directed=True, indices=start[0] * cols + start[1]).reshape(rows, cols)
