"""Nodal topology of sampled fields on periodic grids.

Domains are face-connected sets of same-sign vertices; the zero set is
tracked through mixed cells (grid hypercubes whose 2^d corners carry both
signs).  Both are labeled with periodic wrap handling: patches from a
non-periodic sweep are merged across the seam with an offset-tracking
union-find, which simultaneously lifts each component to Z^d coordinates
(for bounding-box diameters) and detects components that wind around the
torus (inconsistent lift).

Counting on a grid is a discretization heuristic: two features closer than
one cell can merge.  The `certified` flag combines a conservative
analytic margin test with agreement of the counts under grid doubling,
which is the operational stand-in for continuum counting.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, special
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components as _sparse_components

from . import rng
from .errors import MemoryBudgetExceeded, PerturbationTooLarge, Uncertified
from .field import FieldGrid, WaveSample, eval_grid, sample_from_arrays


@dataclass(frozen=True)
class SignGrid:
    """Vertex signs of a value grid; exact zeros count as + and are tallied.

    `center_plus` carries the sign of the cell-center value of the
    multilinear interpolant (the corner mean), which resolves the
    checkerboard ambiguity of saddle-straddling cells consistently for
    both domain and component connectivity.
    """

    d: int
    M: int
    signs: np.ndarray = field(repr=False)  # True where f >= 0
    center_plus: np.ndarray = field(repr=False)
    zero_hits: int = 0


def sign_grid(grid: FieldGrid) -> SignGrid:
    if grid.derivative_tag != ():
        raise ValueError("sign_grid expects a value grid")
    values = grid.values
    if not np.all(np.isfinite(values)):
        raise ValueError("grid contains non-finite values")
    signs = values >= 0.0
    signs.setflags(write=False)
    center = values.copy()
    for axis in range(grid.d):
        center = center + np.roll(center, -1, axis=axis)
    center_plus = center >= 0.0
    center_plus.setflags(write=False)
    return SignGrid(
        d=grid.d,
        M=grid.M,
        signs=signs,
        center_plus=center_plus,
        zero_hits=int(np.count_nonzero(values == 0.0)),
    )


class _OffsetUnionFind:
    """Union-find over patches carrying integer lift offsets to the root.

    `lift(x) = lift(parent(x)) + offset[x]`.  A union closing a cycle with
    a mismatched offset marks the root as wrapping (the component winds
    around the torus).
    """

    def __init__(self, count: int, d: int):
        self.parent = list(range(count))
        self.offset = np.zeros((count, d), dtype=np.int64)
        self.wrapped: set[int] = set()

    def find(self, x: int) -> tuple[int, np.ndarray]:
        root = x
        total = np.zeros(self.offset.shape[1], dtype=np.int64)
        while self.parent[root] != root:
            total += self.offset[root]
            root = self.parent[root]
        node = x
        acc = total.copy()
        while self.parent[node] != node:
            nxt = self.parent[node]
            step = self.offset[node].copy()
            self.offset[node] = acc
            self.parent[node] = root
            acc = acc - step
            node = nxt
        return root, total

    def union(self, x: int, y: int, rel: np.ndarray) -> None:
        """Declare lift(y) = lift(x) + rel."""
        rx, ox = self.find(x)
        ry, oy = self.find(y)
        if rx == ry:
            if not np.array_equal(oy, ox + rel):
                self.wrapped.add(rx)
            return
        self.parent[ry] = rx
        self.offset[ry] = ox + rel - oy
        if ry in self.wrapped:
            self.wrapped.discard(ry)
            self.wrapped.add(rx)


@dataclass(frozen=True)
class PeriodicLabeling:
    """Components of a boolean mask on the periodic grid.

    `labels` assigns 1-based component ids in order of first raster-scan
    occurrence (0 = background), so labeling is independent of visitation
    order.  `widths[c]` is the lifted bounding-box extent in cells per
    axis; `wraps[c]` marks components with no consistent lift.
    """

    count: int
    labels: np.ndarray = field(repr=False)
    cells: np.ndarray = field(repr=False)
    widths: np.ndarray = field(repr=False)
    wraps: np.ndarray = field(repr=False)


def periodic_label(mask: np.ndarray, extra_edges=None) -> PeriodicLabeling:
    """Components of `mask` under face adjacency with periodic wrap.

    `extra_edges`, when given, is (coords_a, coords_b, rel): arrays of
    native vertex coordinates (N, d) plus the Euclidean displacement from
    a to b in the lift (N, d); both endpoints must lie in the mask.  Used
    to resolve saddle cells with a diagonal connection.
    """
    d = mask.ndim
    structure = ndimage.generate_binary_structure(d, 1)
    labels0, npatch = ndimage.label(mask, structure=structure)
    if npatch == 0:
        return PeriodicLabeling(
            count=0,
            labels=np.zeros_like(labels0),
            cells=np.zeros(0, dtype=np.int64),
            widths=np.zeros((0, d), dtype=np.int64),
            wraps=np.zeros(0, dtype=bool),
        )
    uf = _OffsetUnionFind(npatch + 1, d)
    for axis in range(d):
        size = mask.shape[axis]
        lo = np.take(labels0, 0, axis=axis).ravel()
        hi = np.take(labels0, size - 1, axis=axis).ravel()
        sel = (lo > 0) & (hi > 0)
        if not np.any(sel):
            continue
        rel = np.zeros(d, dtype=np.int64)
        rel[axis] = size
        pairs = np.unique(np.stack([hi[sel], lo[sel]], axis=1), axis=0)
        for hp, lp in pairs:
            uf.union(int(hp), int(lp), rel)
    if extra_edges is not None:
        coords_a, coords_b, rels = extra_edges
        for va, vb, rel_ab in zip(coords_a, coords_b, rels):
            pa = int(labels0[tuple(va)])
            pb = int(labels0[tuple(vb)])
            if pa == 0 or pb == 0:
                raise ValueError("extra edge endpoint outside the mask")
            # lift(patch of b) - lift(patch of a), including seam wraps
            uf.union(pa, pb, np.asarray(va, dtype=np.int64) + rel_ab - vb)

    objects = ndimage.find_objects(labels0)
    patch_cells = np.bincount(labels0.ravel(), minlength=npatch + 1)[1:]

    groups: dict[int, list[int]] = {}
    offsets: dict[int, np.ndarray] = {}
    for p in range(1, npatch + 1):
        root, off = uf.find(p)
        groups.setdefault(root, []).append(p)
        offsets[p] = off
    # canonical order: scipy labels patches in raster order, so the group
    # containing the smallest patch id starts at the smallest linear index
    roots = sorted(groups, key=lambda r: min(groups[r]))

    count = len(roots)
    cells = np.zeros(count, dtype=np.int64)
    widths = np.zeros((count, d), dtype=np.int64)
    wraps = np.zeros(count, dtype=bool)
    table = np.zeros(npatch + 1, dtype=np.int32)
    for ci, root in enumerate(roots):
        members = groups[root]
        cells[ci] = int(patch_cells[np.array(members) - 1].sum())
        lo = np.full(d, np.iinfo(np.int64).max)
        hi = np.full(d, np.iinfo(np.int64).min)
        for p in members:
            off = offsets[p]
            for a in range(d):
                sl = objects[p - 1][a]
                lo[a] = min(lo[a], sl.start + off[a])
                hi[a] = max(hi[a], sl.stop + off[a])
        widths[ci] = hi - lo
        wraps[ci] = root in uf.wrapped
        for p in members:
            table[p] = ci + 1
    labels = table[labels0]
    return PeriodicLabeling(count=count, labels=labels, cells=cells, widths=widths, wraps=wraps)


def _ambiguous_cells(signs: np.ndarray) -> np.ndarray:
    """d=2 checkerboard cells: equal diagonals, the two diagonals opposite."""
    s00 = signs
    s10 = np.roll(signs, -1, 0)
    s01 = np.roll(signs, -1, 1)
    s11 = np.roll(s10, -1, 1)
    return (s00 == s11) & (s10 == s01) & (s00 != s10)


def _diagonal_edges(sg: SignGrid, positive: bool):
    """Diagonal domain connections through saddle cells whose center sign
    matches `positive`; the connected diagonal is the one carrying that
    sign.  d=2 only; higher dimensions keep plain face adjacency."""
    if sg.d != 2:
        return None
    amb = _ambiguous_cells(sg.signs)
    take = amb & (sg.center_plus == positive)
    if not np.any(take):
        return None
    cells = np.argwhere(take)
    # sign of the main diagonal (v00); connect it when it matches `positive`
    main = sg.signs[take] == positive
    M = sg.M
    a_list, b_list, rel_list = [], [], []
    main_cells = cells[main]
    if len(main_cells):
        a_list.append(main_cells)
        b_list.append((main_cells + 1) % M)
        rel_list.append(np.tile([1, 1], (len(main_cells), 1)))
    anti_cells = cells[~main]
    if len(anti_cells):
        va = anti_cells.copy()
        va[:, 0] = (va[:, 0] + 1) % M  # v10
        vb = anti_cells.copy()
        vb[:, 1] = (vb[:, 1] + 1) % M  # v01
        a_list.append(va)
        b_list.append(vb)
        rel_list.append(np.tile([-1, 1], (len(anti_cells), 1)))
    return (
        np.concatenate(a_list),
        np.concatenate(b_list),
        np.concatenate(rel_list).astype(np.int64),
    )


def count_domains(sg: SignGrid) -> tuple[int, np.ndarray, np.ndarray]:
    """Face-connected same-sign regions with periodic wrap.

    In d=2, saddle cells additionally connect the diagonal that matches
    the cell-center sign, so a domain is not split by a neck narrower
    than one cell when the interpolant keeps it connected.  Returns
    (r, volumes, labels); labels are 1-based in order of first raster
    occurrence across both signs, volumes are cell counts * h^d.
    """
    pos = periodic_label(sg.signs, extra_edges=_diagonal_edges(sg, True))
    neg = periodic_label(~sg.signs, extra_edges=_diagonal_edges(sg, False))
    combined = pos.labels.astype(np.int64)
    combined[neg.labels > 0] = neg.labels[neg.labels > 0].astype(np.int64) + pos.count
    flat = combined.ravel()
    uniq, first_idx = np.unique(flat, return_index=True)
    order = np.argsort(np.argsort(first_idx))
    table = np.zeros(pos.count + neg.count + 1, dtype=np.int32)
    table[uniq] = order + 1
    labels = table[combined]
    r = pos.count + neg.count
    cells = np.bincount(labels.ravel(), minlength=r + 1)[1:]
    volumes = cells.astype(float) / float(sg.M**sg.d)
    return r, volumes, labels


def _mixed_cells_and_faces(signs: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Mixed-cell mask and, per axis, the mask of mixed shared faces.

    Cell j spans vertices j + {0,1}^d (periodic).  `faces[a][j]` is True
    when the face between cell j and cell j + e_a (the 2^(d-1) vertices at
    offset e_a) carries both signs, i.e. the zero set crosses it.
    """
    d = signs.ndim
    all_pos = signs.copy()
    all_neg = ~signs
    for axis in range(d):
        all_pos &= np.roll(all_pos, -1, axis=axis)
        all_neg &= np.roll(all_neg, -1, axis=axis)
    mixed = ~(all_pos | all_neg)

    faces: list[np.ndarray] = []
    for axis in range(d):
        face_pos = np.roll(signs, -1, axis=axis)
        face_neg = ~face_pos
        for other in range(d):
            if other == axis:
                continue
            face_pos = face_pos & np.roll(face_pos, -1, axis=other)
            face_neg = face_neg & np.roll(face_neg, -1, axis=other)
        faces.append(~(face_pos | face_neg))
    return mixed, faces


def _label_zero_set(signs: np.ndarray) -> PeriodicLabeling:
    """Label mixed cells, gluing across a shared face only when the face
    itself is sign-mixed (the zero set crosses it); a merely adjacent pair
    of mixed cells separated by a sign-pure face stays separate.  Periodic
    seams are merged with lift tracking as in `periodic_label`."""
    d = signs.ndim
    shape = signs.shape
    mixed, faces = _mixed_cells_and_faces(signs)
    total = int(np.count_nonzero(mixed))
    if total == 0:
        return PeriodicLabeling(
            count=0,
            labels=np.zeros(shape, dtype=np.int32),
            cells=np.zeros(0, dtype=np.int64),
            widths=np.zeros((0, d), dtype=np.int64),
            wraps=np.zeros(0, dtype=bool),
        )
    flat_mixed = mixed.ravel()
    node_of_flat = np.cumsum(flat_mixed) - 1  # dense node ids for mixed cells

    # in-grid edges per axis (seam column handled in the merge stage)
    edge_rows: list[np.ndarray] = []
    edge_cols: list[np.ndarray] = []
    seam_edges: list[tuple[np.ndarray, np.ndarray]] = []
    for axis in range(d):
        glue = mixed & np.roll(mixed, -1, axis=axis) & faces[axis]
        interior = glue.copy()
        seam_index = [slice(None)] * d
        seam_index[axis] = shape[axis] - 1
        interior[tuple(seam_index)] = False
        src = np.flatnonzero(interior.ravel())
        if src.size:
            stride = int(np.prod(shape[axis + 1 :], dtype=np.int64))
            edge_rows.append(node_of_flat[src])
            edge_cols.append(node_of_flat[src + stride])
        seam = np.zeros_like(glue)
        seam[tuple(seam_index)] = glue[tuple(seam_index)]
        src = np.flatnonzero(seam.ravel())
        if src.size:
            span = int(np.prod(shape[axis:], dtype=np.int64))
            stride = int(np.prod(shape[axis + 1 :], dtype=np.int64))
            seam_edges.append((src, src + stride - span))
        else:
            seam_edges.append((np.zeros(0, dtype=np.int64),) * 2)

    if edge_rows:
        rows = np.concatenate(edge_rows)
        cols = np.concatenate(edge_cols)
        graph = coo_matrix(
            (np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(total, total)
        )
        npatch, patch_of_node = _sparse_components(graph, directed=False)
    else:
        npatch, patch_of_node = total, np.arange(total, dtype=np.int64)

    # canonicalize patches by first raster occurrence
    first = np.full(npatch, np.iinfo(np.int64).max)
    np.minimum.at(first, patch_of_node, np.flatnonzero(flat_mixed))
    rank = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    patch_of_node = rank[patch_of_node]

    labels0 = np.zeros(signs.size, dtype=np.int32)
    labels0[flat_mixed] = patch_of_node + 1
    labels0 = labels0.reshape(shape)

    uf = _OffsetUnionFind(npatch + 1, d)
    for axis in range(d):
        src, dst = seam_edges[axis]
        if not src.size:
            continue
        rel = np.zeros(d, dtype=np.int64)
        rel[axis] = shape[axis]
        flat_labels = labels0.ravel()
        pairs = np.unique(
            np.stack([flat_labels[src], flat_labels[dst]], axis=1), axis=0
        )
        for hp, lp in pairs:
            uf.union(int(hp), int(lp), rel)

    coords = np.stack(np.unravel_index(np.flatnonzero(flat_mixed), shape), axis=1)
    patch_lo = np.full((npatch, d), np.iinfo(np.int64).max)
    patch_hi = np.full((npatch, d), np.iinfo(np.int64).min)
    np.minimum.at(patch_lo, patch_of_node, coords)
    np.maximum.at(patch_hi, patch_of_node, coords)
    patch_cells = np.bincount(patch_of_node, minlength=npatch)

    count, cells, widths, wraps, table = _group_patches(
        uf, npatch, d, patch_cells, patch_lo, patch_hi + 1
    )
    labels = table[labels0]
    return PeriodicLabeling(count=count, labels=labels, cells=cells, widths=widths, wraps=wraps)


def _group_patches(
    uf: _OffsetUnionFind,
    npatch: int,
    d: int,
    patch_cells: np.ndarray,
    patch_lo: np.ndarray,
    patch_hi: np.ndarray,
) -> tuple[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Merge patch data along union-find roots into canonical components.

    patch arrays are 0-based (patch p -> row p-1); returns
    (count, cells, widths, wraps, table) with table mapping patch id to
    1-based component id.
    """
    groups: dict[int, list[int]] = {}
    offsets: dict[int, np.ndarray] = {}
    for p in range(1, npatch + 1):
        root, off = uf.find(p)
        groups.setdefault(root, []).append(p)
        offsets[p] = off
    roots = sorted(groups, key=lambda r: min(groups[r]))
    count = len(roots)
    cells = np.zeros(count, dtype=np.int64)
    widths = np.zeros((count, d), dtype=np.int64)
    wraps = np.zeros(count, dtype=bool)
    table = np.zeros(npatch + 1, dtype=np.int32)
    for ci, root in enumerate(roots):
        members = groups[root]
        idx = np.array(members) - 1
        off = np.stack([offsets[p] for p in members])
        cells[ci] = int(patch_cells[idx].sum())
        lo = np.min(patch_lo[idx] + off, axis=0)
        hi = np.max(patch_hi[idx] + off, axis=0)
        widths[ci] = hi - lo
        wraps[ci] = root in uf.wrapped
        table[idx + 1] = ci + 1
    return count, cells, widths, wraps, table


def _label_zero_set_2d(sg: SignGrid) -> PeriodicLabeling:
    """Marching-squares segment topology of the discrete zero set (d=2).

    Every mixed cell carries one zero-curve segment, except checkerboard
    cells, which carry two; the center sign decides which pairs of crossed
    faces the two segments join.  Segments connect across a shared face
    exactly when the face is crossed.  This separates zero curves that
    pass within one cell of each other without touching.
    """
    signs = sg.signs
    M0, M1 = signs.shape
    s00 = signs
    s10 = np.roll(signs, -1, 0)
    s01 = np.roll(signs, -1, 1)
    s11 = np.roll(s10, -1, 1)
    mixed = ~((s00 & s10 & s01 & s11) | ~(s00 | s10 | s01 | s11))
    if not np.any(mixed):
        return PeriodicLabeling(
            count=0,
            labels=np.zeros(signs.shape, dtype=np.int32),
            cells=np.zeros(0, dtype=np.int64),
            widths=np.zeros((0, 2), dtype=np.int64),
            wraps=np.zeros(0, dtype=bool),
        )
    amb = (s00 == s11) & (s10 == s01) & (s00 != s10)
    # crossed faces: E = {v10, v11} (shared with cell + e0), N = {v01, v11}
    fE = s10 != s11
    fN = s01 != s11
    fW = s00 != s01  # E face of the -x neighbor
    fS = s00 != s10  # N face of the -y neighbor

    # segment index (0/1) incident to each face of a cell; single-segment
    # cells use 0.  For checkerboard cells, center sign on the main
    # diagonal isolates corners v10 (faces S, E -> segment 0) and
    # v01 (faces W, N -> segment 1); otherwise corners v00 (W, S -> 0)
    # and v11 (E, N -> 1).
    segE = np.zeros(signs.shape, dtype=np.int8)
    segN = np.zeros_like(segE)
    segW = np.zeros_like(segE)
    segS = np.zeros_like(segE)
    diag_main = amb & (sg.center_plus == s00)
    diag_anti = amb & (sg.center_plus != s00)
    segW[diag_main] = 1
    segN[diag_main] = 1
    segE[diag_anti] = 1
    segN[diag_anti] = 1

    flat_mixed = mixed.ravel()
    flat_amb = amb.ravel()
    n_mixed = int(flat_mixed.sum())
    n_amb = int(flat_amb.sum())
    node0 = np.cumsum(flat_mixed) - 1
    node1 = n_mixed + np.cumsum(flat_amb) - 1
    total = n_mixed + n_amb

    def seg_nodes(cells_flat: np.ndarray, seg: np.ndarray) -> np.ndarray:
        return np.where(seg == 0, node0[cells_flat], node1[cells_flat])

    idx = np.arange(signs.size).reshape(signs.shape)
    nb0 = np.roll(idx, -1, 0)
    nb1 = np.roll(idx, -1, 1)

    rows_list, cols_list = [], []
    seam_unions: list[tuple[np.ndarray, np.ndarray, np.ndarray]] = []
    for axis, (crossed, seg_out, seg_in, nb) in enumerate(
        ((fE, segE, segW, nb0), (fN, segN, segS, nb1))
    ):
        interior = crossed.copy()
        seam_index = [slice(None), slice(None)]
        seam_index[axis] = signs.shape[axis] - 1
        seam = np.zeros_like(crossed)
        seam[tuple(seam_index)] = crossed[tuple(seam_index)]
        interior[tuple(seam_index)] = False
        for part, is_seam in ((interior, False), (seam, True)):
            src = np.flatnonzero(part.ravel())
            if not src.size:
                continue
            dst = nb.ravel()[src]
            a = seg_nodes(src, seg_out.ravel()[src])
            b = seg_nodes(dst, seg_in.ravel()[dst])
            if is_seam:
                rel = np.zeros(2, dtype=np.int64)
                rel[axis] = signs.shape[axis]
                seam_unions.append((a, b, rel))
            else:
                rows_list.append(a)
                cols_list.append(b)

    if rows_list:
        rows = np.concatenate(rows_list)
        cols = np.concatenate(cols_list)
        graph = coo_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(total, total))
        npatch, patch_of_node = _sparse_components(graph, directed=False)
    else:
        npatch, patch_of_node = total, np.arange(total, dtype=np.int64)

    # canonical patch order by first raster occurrence (segment 0 of a cell
    # precedes segment 1)
    order_key = np.empty(total, dtype=np.int64)
    mixed_flat_idx = np.flatnonzero(flat_mixed)
    amb_flat_idx = np.flatnonzero(flat_amb)
    order_key[:n_mixed] = 2 * mixed_flat_idx
    order_key[n_mixed:] = 2 * amb_flat_idx + 1
    first = np.full(npatch, np.iinfo(np.int64).max)
    np.minimum.at(first, patch_of_node, order_key)
    rank = np.argsort(np.argsort(first, kind="stable"), kind="stable")
    patch_of_node = rank[patch_of_node]

    node_cells = np.concatenate([mixed_flat_idx, amb_flat_idx])
    node_coords = np.stack(np.unravel_index(node_cells, signs.shape), axis=1)
    patch_lo = np.full((npatch, 2), np.iinfo(np.int64).max)
    patch_hi = np.full((npatch, 2), np.iinfo(np.int64).min)
    np.minimum.at(patch_lo, patch_of_node, node_coords)
    np.maximum.at(patch_hi, patch_of_node, node_coords)
    patch_cells = np.bincount(patch_of_node, minlength=npatch)

    uf = _OffsetUnionFind(npatch + 1, 2)
    for a, b, rel in seam_unions:
        pa = patch_of_node[a] + 1
        pb = patch_of_node[b] + 1
        pairs = np.unique(np.stack([pa, pb], axis=1), axis=0)
        for pi, pj in pairs:
            uf.union(int(pi), int(pj), rel)

    count, cells, widths, wraps, table = _group_patches(
        uf, npatch, 2, patch_cells, patch_lo, patch_hi + 1
    )
    labels0 = np.zeros(signs.size, dtype=np.int32)
    labels0[flat_mixed] = patch_of_node[node0[flat_mixed]] + 1
    labels = table[labels0].reshape(signs.shape)
    return PeriodicLabeling(count=count, labels=labels, cells=cells, widths=widths, wraps=wraps)


def count_components(
    sg: SignGrid,
) -> tuple[int, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Components of the mixed-cell set (discrete zero set).

    A cell is mixed iff its 2^d corner vertices carry both signs; mixed
    cells belong to the same component when the zero set crosses their
    shared face (the face is itself sign-mixed).  In d=2, checkerboard
    cells are resolved into two separate zero-curve segments by the
    center sign (marching-squares disambiguation).  Returns
    (k, cells, diameters, wraps, labels); diameters are lifted
    bounding-box diagonals in torus units, with wrapping components
    assigned the lower bound 1/2.
    """
    lab = _label_zero_set_2d(sg) if sg.d == 2 else _label_zero_set(sg.signs)
    h = 1.0 / sg.M
    diameters = h * np.sqrt(np.sum(lab.widths.astype(float) ** 2, axis=1))
    diameters[lab.wraps] = 0.5
    return lab.count, lab.cells, diameters, lab.wraps, lab.labels


@dataclass(frozen=True)
class Margins:
    """Vertex dichotomy margins and the conservative certificate.

    mu is the vertex margin min over vertices of max(|f|, |grad f|/(2 pi L));
    alpha/beta split it so every vertex has |f| > alpha or |grad f| > beta*L
    with slack mu/2.  `certified` additionally demands that the analytic
    coefficient bound on between-vertex variation cannot close the gap.
    """

    alpha: float
    beta: float
    certified: bool
    mu: float


def gradient_norm_grid(sample: WaveSample, M: int) -> np.ndarray:
    total = None
    for axis in range(sample.shell.d):
        g = eval_grid(sample, M, (axis,)).values
        total = g * g if total is None else total + g * g
    return np.sqrt(total)


def stability_margins(
    sample: WaveSample,
    grid_value: FieldGrid,
    grid_gradnorm: np.ndarray,
    guard: float = 0.5,
) -> Margins:
    """Margins (alpha, beta) and the analytic between-vertex certificate.

    The variation budget uses the l1 coefficient bound rho_c: B1 = 2*pi*L*rho_c
    bounds |grad f|, B2 = (2*pi*L)^2*rho_c bounds the Hessian norm, and the
    guard factor accounts for the nearest-vertex distance being half the
    cell diagonal.  Conservative but sound; random fields at practical
    resolutions are instead certified through refinement agreement (see
    `analyze`).
    """
    if grid_value.derivative_tag != ():
        raise ValueError("stability_margins expects a value grid")
    shell = sample.shell
    L = shell.L
    scaled_grad = grid_gradnorm / (2.0 * np.pi * L)
    mu = float(np.min(np.maximum(np.abs(grid_value.values), scaled_grad)))
    rho_c = sample.coeff_l1_bound()
    b1 = 2.0 * np.pi * L * rho_c
    b2 = (2.0 * np.pi * L) ** 2 * rho_c
    s = math.sqrt(shell.d) / grid_value.M
    certified = mu - b2 * s * s / 2.0 - b1 * s * guard > 0.0
    return Margins(alpha=mu / 2.0, beta=np.pi * mu, certified=bool(certified), mu=mu)


@dataclass(frozen=True)
class NodalSummary:
    """Counts and geometry of one field's nodal picture on its finest grid."""

    k: int
    r: int
    domain_volumes: np.ndarray = field(repr=False)
    component_diameters: np.ndarray = field(repr=False)
    component_wraps: np.ndarray = field(repr=False)
    alpha: float = 0.0
    beta: float = 0.0
    certified: bool = False
    refinement_levels: int = 0
    zero_hits: int = 0
    M: int = 0
    mu: float = 0.0
    sup_certified: bool = False


@dataclass(frozen=True)
class _Bundle:
    M: int
    k: int
    r: int
    volumes: np.ndarray
    comp_cells: np.ndarray
    diameters: np.ndarray
    wraps: np.ndarray
    comp_labels: np.ndarray
    margins: Margins
    zero_hits: int


def _evaluate(sample: WaveSample, M: int, guard: float) -> _Bundle:
    value = eval_grid(sample, M)
    gradnorm = gradient_norm_grid(sample, M)
    sg = sign_grid(value)
    r, volumes, _ = count_domains(sg)
    k, comp_cells, diameters, wraps, comp_labels = count_components(sg)
    margins = stability_margins(sample, value, gradnorm, guard=guard)
    return _Bundle(
        M=M,
        k=k,
        r=r,
        volumes=volumes,
        comp_cells=comp_cells,
        diameters=diameters,
        wraps=wraps,
        comp_labels=comp_labels,
        margins=margins,
        zero_hits=sg.zero_hits,
    )


def _mu_floor(sample: WaveSample) -> float:
    # FFT noise scale: treat vertex margins at rounding level as zero
    b1 = 2.0 * np.pi * sample.shell.L * sample.coeff_l1_bound()
    return 1e-10 * max(1.0, b1)


def _drift_ok(prev: _Bundle, cur: _Bundle, tolerance: float) -> bool:
    budget = max(1, math.ceil(tolerance * max(cur.k, cur.r)))
    return abs(cur.k - prev.k) <= budget and abs(cur.r - prev.r) <= budget


def analyze(
    sample: WaveSample,
    M: int,
    auto_refine: bool = False,
    *,
    refine_check: bool = True,
    guard: float = 0.5,
    drift_tolerance: float = 0.02,
) -> NodalSummary:
    """Full nodal pipeline: signs, domains, components, margins.

    With `auto_refine`, the grid is doubled until (k, r) are unchanged for
    two consecutive refinements (or the memory budget is hit).  Otherwise a
    single doubling cross-check runs when `refine_check` is set.  The
    summary reports the finest grid computed.

    Certification is heuristic, not a proof.  A summary is certified when
    either the conservative analytic margin certificate fires, or all of:
    the vertex margin is positive (above FFT noise), the component/domain
    counts satisfy the consistency gate r - 1 <= k <= r + d - 1, and the
    counts moved by at most max(1, drift_tolerance * count) across the
    last grid doubling.  Degenerate fields yield certified=False, never an
    error.
    """
    summary, _ = _analyze_core(
        sample,
        M,
        auto_refine,
        refine_check=refine_check,
        guard=guard,
        drift_tolerance=drift_tolerance,
    )
    return summary


def _analyze_core(
    sample: WaveSample,
    M: int,
    auto_refine: bool = False,
    *,
    refine_check: bool = True,
    guard: float = 0.5,
    drift_tolerance: float = 0.02,
) -> tuple[NodalSummary, _Bundle]:
    bundle = _evaluate(sample, M, guard)
    levels = 0
    stabilized = False
    if auto_refine:
        history = [(bundle.k, bundle.r)]
        while True:
            try:
                nxt = _evaluate(sample, bundle.M * 2, guard)
            except MemoryBudgetExceeded:
                break
            bundle = nxt
            levels += 1
            history.append((bundle.k, bundle.r))
            if len(history) >= 3 and history[-1] == history[-2] == history[-3]:
                stabilized = True
                break
    elif refine_check:
        try:
            nxt = _evaluate(sample, bundle.M * 2, guard)
            stabilized = _drift_ok(bundle, nxt, drift_tolerance)
            bundle = nxt
            levels = 1
        except MemoryBudgetExceeded:
            stabilized = False

    d = sample.shell.d
    margins = bundle.margins
    gate = bundle.r - 1 <= bundle.k <= bundle.r + d - 1
    certified = gate and (
        margins.certified or (stabilized and margins.mu > _mu_floor(sample))
    )
    summary = NodalSummary(
        k=bundle.k,
        r=bundle.r,
        domain_volumes=bundle.volumes,
        component_diameters=bundle.diameters,
        component_wraps=bundle.wraps,
        alpha=margins.alpha,
        beta=margins.beta,
        certified=bool(certified),
        refinement_levels=levels,
        zero_hits=bundle.zero_hits,
        M=bundle.M,
        mu=margins.mu,
        sup_certified=margins.certified,
    )
    return summary, bundle


def bessel_first_zero(nu: float, xtol: float = 1e-12) -> float:
    """First positive zero of the Bessel function J_nu, by bracketed
    root-finding (J_nu is positive on (0, j_{nu,1}))."""
    x = max(nu, 0.0) + 0.5
    step = 0.5
    while special.jv(nu, x) > 0:
        x += step
    return float(brentq(lambda t: special.jv(nu, t), x - step, x, xtol=xtol))


def faber_krahn_constant(d: int) -> float:
    """c_d = vol(unit ball) * (j_{d/2-1,1} / (2 pi))^d: the volume of the
    ball whose first Dirichlet eigenvalue is 4 pi^2."""
    j1 = bessel_first_zero(d / 2.0 - 1.0)
    ball = math.pi ** (d / 2.0) / math.gamma(d / 2.0 + 1.0)
    return ball * (j1 / (2.0 * math.pi)) ** d


def faber_krahn_check(summary: NodalSummary, d: int, n: int) -> tuple[float, float, bool]:
    """Smallest domain volume against the eigenvalue ball bound c_d * n^(-d/2);
    the 0.8 factor absorbs grid discretization."""
    if not summary.certified:
        raise Uncertified("faber_krahn_check requires a certified summary")
    bound = faber_krahn_constant(d) * float(n) ** (-d / 2.0)
    min_vol = float(np.min(summary.domain_volumes))
    return min_vol, bound, bool(min_vol >= 0.8 * bound)


@dataclass(frozen=True)
class PerturbationResult:
    n_before: int
    n_after: int
    diam_shifts: np.ndarray  # diam_before - diam_after per matched component
    matched: int
    alpha: float
    beta: float
    grid_slack: float  # 2 h sqrt(d) at the matching grid


def perturb_and_compare(
    sample: WaveSample,
    perturbation_scale: float,
    perturb_seed: int,
    M: int,
    *,
    guard: float = 0.5,
) -> PerturbationResult:
    """Add a small random perturbation from the same eigenspace and compare
    nodal components.

    The perturbation g is drawn from the (perturb_seed, trial_index)
    stream and rescaled to L2 norm `perturbation_scale`; its sup norms are
    verified on the grid against alpha/2 and beta*L/2 before comparing.
    Components are matched by overlap of their mixed-cell sets.
    """
    base_summary, base_bundle = _analyze_core(sample, M, guard=guard)
    if not base_summary.certified:
        raise Uncertified("base sample is not certified")
    alpha, beta = base_summary.alpha, base_summary.beta
    shell = sample.shell
    L = shell.L

    ga, gb = rng.normal_pairs(perturb_seed, sample.trial_index, shell.half_points.shape[0])
    raw = sample_from_arrays(shell, ga, gb)
    raw_norm = raw.coef_norm()
    scale = perturbation_scale / raw_norm if (perturbation_scale > 0 and raw_norm > 0) else 0.0
    g = sample_from_arrays(shell, ga * scale, gb * scale)

    Mf = base_bundle.M
    g_val = eval_grid(g, Mf)
    g_gradnorm = gradient_norm_grid(g, Mf)
    sup_g = float(np.max(np.abs(g_val.values)))
    sup_grad_g = float(np.max(g_gradnorm))
    if sup_g >= alpha / 2.0 or sup_grad_g >= beta * L / 2.0:
        raise PerturbationTooLarge(
            f"sup|g|={sup_g:.3g} vs alpha/2={alpha / 2:.3g}, "
            f"sup|grad g|={sup_grad_g:.3g} vs beta*L/2={beta * L / 2:.3g}"
        )

    perturbed = sample_from_arrays(
        shell, np.asarray(sample.a) + ga * scale, np.asarray(sample.b) + gb * scale
    )
    _, pert_bundle = _analyze_core(perturbed, M, guard=guard)
    if pert_bundle.M != base_bundle.M:
        # memory budget intervened asymmetrically; match at the coarser grid
        coarse = min(pert_bundle.M, base_bundle.M)
        base_bundle = _evaluate(sample, coarse, guard)
        pert_bundle = _evaluate(perturbed, coarse, guard)

    lab_b = base_bundle.comp_labels.ravel()
    lab_a = pert_bundle.comp_labels.ravel()
    both = (lab_b > 0) & (lab_a > 0)
    shifts = []
    matched = 0
    if np.any(both):
        pair_ids = lab_b[both].astype(np.int64) * (pert_bundle.k + 1) + lab_a[both]
        uniq, counts = np.unique(pair_ids, return_counts=True)
        overlap_b = uniq // (pert_bundle.k + 1)
        overlap_a = uniq % (pert_bundle.k + 1)
        best: dict[int, tuple[int, int]] = {}
        for bid, aid, cnt in zip(overlap_b, overlap_a, counts):
            cur = best.get(int(bid))
            if cur is None or cnt > cur[1] or (cnt == cur[1] and aid < cur[0]):
                best[int(bid)] = (int(aid), int(cnt))
        for bid, (aid, _) in sorted(best.items()):
            shifts.append(
                float(base_bundle.diameters[bid - 1] - pert_bundle.diameters[aid - 1])
            )
            matched += 1
    h = 1.0 / base_bundle.M
    return PerturbationResult(
        n_before=base_bundle.k,
        n_after=pert_bundle.k,
        diam_shifts=np.asarray(shifts, dtype=float),
        matched=matched,
        alpha=alpha,
        beta=beta,
        grid_slack=2.0 * h * math.sqrt(shell.d),
    )
