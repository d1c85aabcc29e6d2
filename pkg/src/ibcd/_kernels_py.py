"""Pure numpy implementation of the worst-case classifier kernels.

This is the fallback used when the compiled ``_kernels`` extension is not
available, and the reference the extension is tested against. Both share the
pixel-key table built by :func:`pixel_key_table`.
"""
import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF
CONSTANT_WRONG = 0
REGION_HASH = 1


def splitmix64(x):
    """Vectorised splitmix64 finaliser on uint64 arrays."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def pixel_key_table(width, height):
    """2-D prefix-XOR table of per-pixel keys, shape (H+1, W+1).

    ``T[y, x]`` is the XOR of the keys of all pixels in rows ``< y`` and
    columns ``< x``, so the XOR over any rectangle costs four lookups.
    """
    idx = np.arange(width * height, dtype=np.uint64).reshape(height, width)
    keys = splitmix64(idx + np.uint64(1))
    table = np.zeros((height + 1, width + 1), dtype=np.uint64)
    table[1:, 1:] = np.bitwise_xor.accumulate(np.bitwise_xor.accumulate(keys, axis=0), axis=1)
    return table


def wrong_label(h, true_label, num_classes):
    idx = int(h) % (num_classes - 1)
    return idx + 1 if idx >= true_label else idx


class WorstCaseKernel:
    """Label computation for one scene under the any-visible-pixel attacker.

    ``patch`` is ``(x1, y1, x2, y2)`` or None for a clean scene.
    """

    def __init__(self, width, height, patch, obj, tau, policy, true_label,
                 distractor, num_classes, table):
        self.width = width
        self.height = height
        self.has_patch = patch is not None
        self.patch = tuple(int(v) for v in patch) if patch is not None else (0, 0, -1, -1)
        self.obj = tuple(int(v) for v in obj)
        self.obj_area = (self.obj[2] - self.obj[0] + 1) * (self.obj[3] - self.obj[1] + 1)
        self.tau = float(tau)
        self.policy = int(policy)
        self.true_label = int(true_label)
        self.distractor = int(distractor)
        self.num_classes = int(num_classes)
        self.table = table
        if self.has_patch:
            self.patch_key = self._rect_xor(*self.patch)

    def _rect_xor(self, x1, y1, x2, y2):
        t = self.table
        return int(t[y2 + 1, x2 + 1] ^ t[y1, x2 + 1] ^ t[y2 + 1, x1] ^ t[y1, x1])

    def _rect_xor_vec(self, x1, y1, x2, y2, valid):
        # rows where ``valid`` is False contribute 0
        t = self.table
        x1 = np.where(valid, x1, 0)
        y1 = np.where(valid, y1, 0)
        x2 = np.where(valid, x2, -1)
        y2 = np.where(valid, y2, -1)
        out = t[y2 + 1, x2 + 1] ^ t[y1, x2 + 1] ^ t[y2 + 1, x1] ^ t[y1, x1]
        return np.where(valid, out, np.uint64(0))

    def _adversarial(self, h):
        if self.policy == CONSTANT_WRONG:
            return self.distractor
        return wrong_label(h, self.true_label, self.num_classes)

    def label_pairs(self, base, cands):
        """Labels for the mask lists ``[base, c]`` for every row ``c`` of ``cands``.

        ``base`` may be None, in which case each candidate is applied alone.
        """
        cands = np.asarray(cands, dtype=np.int64).reshape(-1, 4)
        n = len(cands)
        bx1, by1, bx2, by2 = (base if base is not None else (0, 0, -1, -1))
        cx1, cy1, cx2, cy2 = cands.T
        labels = np.empty(n, dtype=np.int64)

        if self.has_patch:
            px1, py1, px2, py2 = self.patch
            # bounding box of the patch part the base mask leaves visible
            ux1, uy1, ux2, uy2, u_empty = _residual_bbox(self.patch, (bx1, by1, bx2, by2))
            if u_empty:
                covered = np.ones(n, dtype=bool)
            else:
                covered = (cx1 <= ux1) & (cy1 <= uy1) & (cx2 >= ux2) & (cy2 >= uy2)
        else:
            covered = np.ones(n, dtype=bool)

        exposed = ~covered
        if exposed.any():
            if self.policy == CONSTANT_WRONG:
                labels[exposed] = self.distractor
            else:
                px1, py1, px2, py2 = self.patch
                e = cands[exposed]
                # patch ∩ base
                ax1, ay1, ax2, ay2 = max(px1, bx1), max(py1, by1), min(px2, bx2), min(py2, by2)
                a_ok = ax1 <= ax2 and ay1 <= ay2
                h_a = self._rect_xor(ax1, ay1, ax2, ay2) if a_ok else 0
                # patch ∩ cand
                qx1 = np.maximum(px1, e[:, 0]); qy1 = np.maximum(py1, e[:, 1])
                qx2 = np.minimum(px2, e[:, 2]); qy2 = np.minimum(py2, e[:, 3])
                q_ok = (qx1 <= qx2) & (qy1 <= qy2)
                h_b = self._rect_xor_vec(qx1, qy1, qx2, qy2, q_ok)
                # patch ∩ base ∩ cand
                if a_ok:
                    rx1 = np.maximum(ax1, e[:, 0]); ry1 = np.maximum(ay1, e[:, 1])
                    rx2 = np.minimum(ax2, e[:, 2]); ry2 = np.minimum(ay2, e[:, 3])
                    r_ok = (rx1 <= rx2) & (ry1 <= ry2)
                    h_ab = self._rect_xor_vec(rx1, ry1, rx2, ry2, r_ok)
                else:
                    h_ab = np.zeros(len(e), dtype=np.uint64)
                h = np.uint64(self.patch_key ^ h_a) ^ h_b ^ h_ab
                m = np.uint64(self.num_classes - 1)
                idx = (h % m).astype(np.int64)
                labels[exposed] = idx + (idx >= self.true_label)

        if covered.any():
            ox1, oy1, ox2, oy2 = self.obj
            c = cands[covered]
            hid_a = _overlap(self.obj, (bx1, by1, bx2, by2))
            ix1 = np.maximum(ox1, c[:, 0]); iy1 = np.maximum(oy1, c[:, 1])
            ix2 = np.minimum(ox2, c[:, 2]); iy2 = np.minimum(oy2, c[:, 3])
            hid_b = np.clip(ix2 - ix1 + 1, 0, None) * np.clip(iy2 - iy1 + 1, 0, None)
            jx1 = np.maximum(ix1, bx1); jy1 = np.maximum(iy1, by1)
            jx2 = np.minimum(ix2, bx2); jy2 = np.minimum(iy2, by2)
            hid_ab = np.clip(jx2 - jx1 + 1, 0, None) * np.clip(jy2 - jy1 + 1, 0, None)
            visible = self.obj_area - hid_a - hid_b + hid_ab
            ok = visible.astype(np.float64) >= self.tau * self.obj_area
            labels[covered] = np.where(ok, self.true_label, self.distractor)
        return labels

    def label_masks(self, rects):
        """Label for an arbitrary list of applied masks, by pixel bitmap."""
        rects = np.asarray(rects, dtype=np.int64).reshape(-1, 4)
        occluded = np.zeros((self.height, self.width), dtype=bool)
        for x1, y1, x2, y2 in rects:
            occluded[y1:y2 + 1, x1:x2 + 1] = True
        if self.has_patch:
            px1, py1, px2, py2 = self.patch
            region = occluded[py1:py2 + 1, px1:px2 + 1]
            if not region.all():
                h = 0
                if self.policy == REGION_HASH:
                    t = self.table
                    keys = (t[1:, 1:] ^ t[:-1, 1:] ^ t[1:, :-1] ^ t[:-1, :-1])
                    vis = keys[py1:py2 + 1, px1:px2 + 1][~region]
                    h = int(np.bitwise_xor.reduce(vis))
                return self._adversarial(h)
        ox1, oy1, ox2, oy2 = self.obj
        visible = int((~occluded[oy1:oy2 + 1, ox1:ox2 + 1]).sum())
        if float(visible) >= self.tau * self.obj_area:
            return self.true_label
        return self.distractor


def _overlap(a, b):
    w = min(a[2], b[2]) - max(a[0], b[0]) + 1
    h = min(a[3], b[3]) - max(a[1], b[1]) + 1
    return w * h if w > 0 and h > 0 else 0


def _residual_bbox(p, a):
    """Bounding box of ``p`` minus ``a``; last item is True when nothing is left."""
    px1, py1, px2, py2 = p
    ax1, ay1, ax2, ay2 = a
    if ax1 > px2 or ax2 < px1 or ay1 > py2 or ay2 < py1:
        return px1, py1, px2, py2, False
    if ax1 <= px1 and ay1 <= py1 and ax2 >= px2 and ay2 >= py2:
        return 0, 0, -1, -1, True
    x1, y1, x2, y2 = px2 + 1, py2 + 1, px1 - 1, py1 - 1
    # each strip of p outside a, clipped to p
    strips = []
    if ax1 > px1:
        strips.append((px1, py1, ax1 - 1, py2))
    if ax2 < px2:
        strips.append((ax2 + 1, py1, px2, py2))
    if ay1 > py1:
        strips.append((px1, py1, px2, ay1 - 1))
    if ay2 < py2:
        strips.append((px1, ay2 + 1, px2, py2))
    for sx1, sy1, sx2, sy2 in strips:
        x1, y1 = min(x1, sx1), min(y1, sy1)
        x2, y2 = max(x2, sx2), max(y2, sy2)
    return x1, y1, x2, y2, False
