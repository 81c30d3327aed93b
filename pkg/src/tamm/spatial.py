"""Packed (Sort-Tile-Recursive) R-tree over polylines with exact k-NN refinement."""
from __future__ import annotations

import heapq
import math

import numpy as np

from . import kernels


class PackedRTree:
    """Static R-tree bulk-loaded with STR packing.

    Leaves hold up to ``capacity`` polylines; their sub-segments are stored
    contiguously so one kernel call refines a whole leaf.  ``visits`` counts
    index nodes expanded over the lifetime of the tree.
    """

    def __init__(self, ids, polylines, capacity: int = 16):
        if capacity < 2:
            raise ValueError("capacity must be >= 2")
        self.capacity = capacity
        self.visits = 0
        n = len(ids)
        self.size = n
        if n == 0:
            self.levels = []
            return

        boxes = np.array(
            [
                (min(p[0] for p in pl), min(p[1] for p in pl), max(p[0] for p in pl), max(p[1] for p in pl))
                for pl in polylines
            ],
            dtype=float,
        )
        order = _str_order(boxes, capacity)
        self.ids = np.asarray(ids, dtype=np.int64)[order]

        ax, ay, bx, by, offsets = [], [], [], [], [0]
        for i in order:
            pl = polylines[i]
            for (x0, y0), (x1, y1) in zip(pl, pl[1:]):
                # endpoint order is irrelevant to distance; canonical order makes a
                # street and its reverse twin bit-identical, so their tie falls to the id
                if (x1, y1) < (x0, y0):
                    x0, y0, x1, y1 = x1, y1, x0, y0
                ax.append(x0)
                ay.append(y0)
                bx.append(x1)
                by.append(y1)
            offsets.append(len(ax))
        self.ax = np.array(ax)
        self.ay = np.array(ay)
        self.bx = np.array(bx)
        self.by = np.array(by)
        self.offsets = np.array(offsets, dtype=np.int64)

        # levels[0] = leaves; each level: (boxes, child_start, child_stop)
        leaf_boxes = boxes[order]
        level_boxes, starts, stops = _group(leaf_boxes, np.arange(n), capacity)
        self.levels = [(level_boxes, starts, stops)]
        while len(level_boxes) > 1:
            child_boxes = level_boxes
            order2 = _str_order(child_boxes, capacity)
            if not np.array_equal(order2, np.arange(len(order2))):
                # keep children of a parent contiguous
                self._reorder_level(order2)
                child_boxes = self.levels[-1][0]
            level_boxes, starts, stops = _group(child_boxes, np.arange(len(child_boxes)), capacity)
            self.levels.append((level_boxes, starts, stops))

    def _reorder_level(self, order):
        boxes, starts, stops = self.levels[-1]
        self.levels[-1] = (boxes[order], starts[order], stops[order])

    def nearest(self, x: float, y: float, k: int):
        """The ``k`` nearest polylines to (x, y) as ``[(id, distance), ...]``.

        Ordered by distance, ties by ascending id.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if self.size == 0:
            raise ValueError("empty index")
        k = min(k, self.size)
        top = len(self.levels) - 1
        # entries: (dist, kind, key, level, node); kind 0 = index node, 1 = polyline
        heap = [(0.0, 0, 0, top, 0)]
        out = []
        while heap and len(out) < k:
            d, kind, key, level, node = heapq.heappop(heap)
            if kind == 1:
                out.append((key, d))
                continue
            self.visits += 1
            boxes, starts, stops = self.levels[level]
            lo, hi = starts[node], stops[node]
            if level == 0:
                offs = self.offsets[lo : hi + 1]
                a, b = offs[0], offs[-1]
                dists = kernels.segment_min_distances(
                    x, y, self.ax[a:b], self.ay[a:b], self.bx[a:b], self.by[a:b], offs - a
                )
                for j in range(hi - lo):
                    heapq.heappush(heap, (float(dists[j]), 1, int(self.ids[lo + j]), -1, -1))
            else:
                child = self.levels[level - 1][0][lo:hi]
                dx = np.maximum(np.maximum(child[:, 0] - x, x - child[:, 2]), 0.0)
                dy = np.maximum(np.maximum(child[:, 1] - y, y - child[:, 3]), 0.0)
                md = np.hypot(dx, dy)
                for j in range(hi - lo):
                    heapq.heappush(heap, (float(md[j]), 0, lo + j, level - 1, lo + j))
        return out


    def scan(self, xs, ys, k: int):
        """Exhaustive k-NN for a batch of points, bypassing the tree.

        Same ordering as :meth:`nearest`; returns one ``[(id, distance), ...]``
        list per point.
        """
        if self.size == 0:
            raise ValueError("empty index")
        xs = np.ascontiguousarray(xs, dtype=float)
        ys = np.ascontiguousarray(ys, dtype=float)
        # tree order is not id order; scan in id order so ties resolve by id
        order = np.argsort(self.ids, kind="stable")
        ax, ay, bx, by, offs = self._flat_in(order)
        idx, dist = kernels.nearest_scan(xs, ys, ax, ay, bx, by, offs, k)
        ids = self.ids[order]
        return [[(int(ids[j]), float(d)) for j, d in zip(row_i, row_d)] for row_i, row_d in zip(idx, dist)]

    def _flat_in(self, order):
        parts = [np.arange(self.offsets[i], self.offsets[i + 1]) for i in order]
        sel = np.concatenate(parts)
        offs = np.zeros(len(order) + 1, dtype=np.int64)
        offs[1:] = np.cumsum([len(p) for p in parts])
        return self.ax[sel], self.ay[sel], self.bx[sel], self.by[sel], offs


def _str_order(boxes, capacity):
    """Sort-Tile-Recursive ordering of box centres."""
    n = len(boxes)
    cx = (boxes[:, 0] + boxes[:, 2]) / 2.0
    cy = (boxes[:, 1] + boxes[:, 3]) / 2.0
    n_leaves = math.ceil(n / capacity)
    n_slices = max(1, math.ceil(math.sqrt(n_leaves)))
    per_slice = n_slices * capacity
    by_x = np.lexsort((cy, cx))
    order = []
    for s in range(0, n, per_slice):
        chunk = by_x[s : s + per_slice]
        order.extend(chunk[np.lexsort((cx[chunk], cy[chunk]))])
    return np.asarray(order, dtype=np.int64)


def _group(boxes, idx, capacity):
    starts = np.arange(0, len(idx), capacity, dtype=np.int64)
    stops = np.minimum(starts + capacity, len(idx))
    out = np.empty((len(starts), 4))
    for g, (a, b) in enumerate(zip(starts, stops)):
        chunk = boxes[a:b]
        out[g] = (chunk[:, 0].min(), chunk[:, 1].min(), chunk[:, 2].max(), chunk[:, 3].max())
    return out, starts, stops
