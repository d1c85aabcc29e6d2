# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled worst-case classifier kernels; mirrors ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int64_t, uint64_t

cnp.import_array()

cdef enum:
    CONSTANT_WRONG = 0
    REGION_HASH = 1


cdef inline int64_t _max(int64_t a, int64_t b) noexcept nogil:
    return a if a > b else b


cdef inline int64_t _min(int64_t a, int64_t b) noexcept nogil:
    return a if a < b else b


cdef inline int64_t _overlap(int64_t ax1, int64_t ay1, int64_t ax2, int64_t ay2,
                             int64_t bx1, int64_t by1, int64_t bx2, int64_t by2) noexcept nogil:
    cdef int64_t w = _min(ax2, bx2) - _max(ax1, bx1) + 1
    cdef int64_t h = _min(ay2, by2) - _max(ay1, by1) + 1
    if w <= 0 or h <= 0:
        return 0
    return w * h


cdef class WorstCaseKernel:
    cdef public int width, height
    cdef public bint has_patch
    cdef int64_t px1, py1, px2, py2
    cdef int64_t ox1, oy1, ox2, oy2, obj_area
    cdef public double tau
    cdef public int policy
    cdef public int64_t true_label, distractor, num_classes
    cdef uint64_t patch_key
    cdef const uint64_t[:, ::1] table
    cdef object _table_ref

    def __init__(self, width, height, patch, obj, tau, policy, true_label,
                 distractor, num_classes, table):
        self.width = width
        self.height = height
        self.has_patch = patch is not None
        if patch is not None:
            self.px1, self.py1, self.px2, self.py2 = [int(v) for v in patch]
        else:
            self.px1, self.py1, self.px2, self.py2 = 0, 0, -1, -1
        self.ox1, self.oy1, self.ox2, self.oy2 = [int(v) for v in obj]
        self.obj_area = (self.ox2 - self.ox1 + 1) * (self.oy2 - self.oy1 + 1)
        self.tau = float(tau)
        self.policy = int(policy)
        self.true_label = int(true_label)
        self.distractor = int(distractor)
        self.num_classes = int(num_classes)
        self._table_ref = np.ascontiguousarray(table, dtype=np.uint64)
        self.table = self._table_ref
        if self.has_patch:
            self.patch_key = self._rect_xor(self.px1, self.py1, self.px2, self.py2)

    @property
    def patch(self):
        return (self.px1, self.py1, self.px2, self.py2)

    @property
    def obj(self):
        return (self.ox1, self.oy1, self.ox2, self.oy2)

    cdef inline uint64_t _rect_xor(self, int64_t x1, int64_t y1, int64_t x2, int64_t y2) noexcept nogil:
        if x1 > x2 or y1 > y2:
            return 0
        return (self.table[y2 + 1, x2 + 1] ^ self.table[y1, x2 + 1]
                ^ self.table[y2 + 1, x1] ^ self.table[y1, x1])

    cdef inline int64_t _wrong(self, uint64_t h) noexcept nogil:
        cdef int64_t idx = <int64_t>(h % <uint64_t>(self.num_classes - 1))
        if idx >= self.true_label:
            return idx + 1
        return idx

    cdef int64_t _pair(self, int64_t bx1, int64_t by1, int64_t bx2, int64_t by2,
                       int64_t cx1, int64_t cy1, int64_t cx2, int64_t cy2,
                       bint u_empty, int64_t ux1, int64_t uy1, int64_t ux2, int64_t uy2) noexcept nogil:
        cdef uint64_t h
        cdef int64_t ax1, ay1, ax2, ay2, visible
        cdef bint covered = True
        if self.has_patch and not u_empty:
            covered = cx1 <= ux1 and cy1 <= uy1 and cx2 >= ux2 and cy2 >= uy2
        if not covered:
            if self.policy == CONSTANT_WRONG:
                return self.distractor
            ax1 = _max(self.px1, bx1); ay1 = _max(self.py1, by1)
            ax2 = _min(self.px2, bx2); ay2 = _min(self.py2, by2)
            h = self.patch_key ^ self._rect_xor(ax1, ay1, ax2, ay2)
            h ^= self._rect_xor(_max(self.px1, cx1), _max(self.py1, cy1),
                                _min(self.px2, cx2), _min(self.py2, cy2))
            h ^= self._rect_xor(_max(ax1, cx1), _max(ay1, cy1),
                                _min(ax2, cx2), _min(ay2, cy2))
            return self._wrong(h)
        visible = (self.obj_area
                   - _overlap(self.ox1, self.oy1, self.ox2, self.oy2, bx1, by1, bx2, by2)
                   - _overlap(self.ox1, self.oy1, self.ox2, self.oy2, cx1, cy1, cx2, cy2)
                   + _overlap(_max(self.ox1, bx1), _max(self.oy1, by1),
                              _min(self.ox2, bx2), _min(self.oy2, by2),
                              cx1, cy1, cx2, cy2))
        if <double>visible >= self.tau * self.obj_area:
            return self.true_label
        return self.distractor

    def label_pairs(self, base, cands):
        cdef const int64_t[:, ::1] c = np.ascontiguousarray(cands, dtype=np.int64).reshape(-1, 4)
        cdef Py_ssize_t n = c.shape[0], i
        cdef int64_t bx1 = 0, by1 = 0, bx2 = -1, by2 = -1
        cdef int64_t ux1 = 0, uy1 = 0, ux2 = -1, uy2 = -1
        cdef bint u_empty = False
        out = np.empty(n, dtype=np.int64)
        cdef int64_t[::1] o = out
        if base is not None:
            bx1, by1, bx2, by2 = [int(v) for v in base]
        if self.has_patch:
            u_empty = _residual_bbox(self.px1, self.py1, self.px2, self.py2,
                                     bx1, by1, bx2, by2, &ux1, &uy1, &ux2, &uy2)
        with nogil:
            for i in range(n):
                o[i] = self._pair(bx1, by1, bx2, by2, c[i, 0], c[i, 1], c[i, 2], c[i, 3],
                                  u_empty, ux1, uy1, ux2, uy2)
        return out

    def label_masks(self, rects):
        cdef const int64_t[:, ::1] r = np.ascontiguousarray(rects, dtype=np.int64).reshape(-1, 4)
        cdef Py_ssize_t k = r.shape[0], i
        cdef int64_t x, y
        cdef uint64_t h = 0, key
        cdef bint exposed = False
        cdef int64_t visible = 0
        occ = np.zeros((self.height, self.width), dtype=np.uint8)
        cdef cnp.uint8_t[:, ::1] o = occ
        for i in range(k):
            for y in range(r[i, 1], r[i, 3] + 1):
                for x in range(r[i, 0], r[i, 2] + 1):
                    o[y, x] = 1
        if self.has_patch:
            for y in range(self.py1, self.py2 + 1):
                for x in range(self.px1, self.px2 + 1):
                    if not o[y, x]:
                        exposed = True
                        key = (self.table[y + 1, x + 1] ^ self.table[y, x + 1]
                               ^ self.table[y + 1, x] ^ self.table[y, x])
                        h ^= key
            if exposed:
                if self.policy == CONSTANT_WRONG:
                    return self.distractor
                return self._wrong(h)
        for y in range(self.oy1, self.oy2 + 1):
            for x in range(self.ox1, self.ox2 + 1):
                if not o[y, x]:
                    visible += 1
        if <double>visible >= self.tau * self.obj_area:
            return self.true_label
        return self.distractor


cdef bint _residual_bbox(int64_t px1, int64_t py1, int64_t px2, int64_t py2,
                         int64_t ax1, int64_t ay1, int64_t ax2, int64_t ay2,
                         int64_t* ux1, int64_t* uy1, int64_t* ux2, int64_t* uy2) noexcept nogil:
    """Bounding box of p minus a; returns True when nothing is left."""
    if ax1 > px2 or ax2 < px1 or ay1 > py2 or ay2 < py1:
        ux1[0] = px1; uy1[0] = py1; ux2[0] = px2; uy2[0] = py2
        return False
    if ax1 <= px1 and ay1 <= py1 and ax2 >= px2 and ay2 >= py2:
        return True
    cdef int64_t x1 = px2 + 1, y1 = py2 + 1, x2 = px1 - 1, y2 = py1 - 1
    if ax1 > px1:
        x1 = _min(x1, px1); y1 = _min(y1, py1); x2 = _max(x2, ax1 - 1); y2 = _max(y2, py2)
    if ax2 < px2:
        x1 = _min(x1, ax2 + 1); y1 = _min(y1, py1); x2 = _max(x2, px2); y2 = _max(y2, py2)
    if ay1 > py1:
        x1 = _min(x1, px1); y1 = _min(y1, py1); x2 = _max(x2, px2); y2 = _max(y2, ay1 - 1)
    if ay2 < py2:
        x1 = _min(x1, px1); y1 = _min(y1, ay2 + 1); x2 = _max(x2, px2); y2 = _max(y2, py2)
    ux1[0] = x1; uy1[0] = y1; ux2[0] = x2; uy2[0] = y2
    return False
