"""Slow, obviously-correct reference implementations used by the tests."""
import numpy as np


def conv2d_loop(x, w, b=None, stride=1, padding=0, dilation=1, groups=1):
    """Direct summation cross-correlation."""
    n, c, h, wd = x.shape
    o, cg, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    out_h = (h + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    out_w = (wd + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((n, o, out_h, out_w))
    per_group = o // groups
    for b_ in range(n):
        for oc in range(o):
            g = oc // per_group
            for i in range(out_h):
                for j in range(out_w):
                    total = 0.0
                    for ic in range(cg):
                        for u in range(kh):
                            for v in range(kw):
                                total += (
                                    xp[b_, g * cg + ic, i * stride + u * dilation, j * stride + v * dilation]
                                    * w[oc, ic, u, v]
                                )
                    out[b_, oc, i, j] = total + (b[oc] if b is not None else 0.0)
    return out


def bilinear_scalar(row, scale):
    """Half-pixel-centre linear interpolation of one row, evaluated point by point."""
    size = len(row)
    out = []
    for k in range(size * scale):
        src = (k + 0.5) / scale - 0.5
        src = min(max(src, 0.0), size - 1)
        lo = int(np.floor(src))
        hi = min(lo + 1, size - 1)
        frac = src - lo
        out.append(row[lo] * (1 - frac) + row[hi] * frac)
    return np.array(out)


def boundary_loop(mask):
    """Foreground pixels with a 4-neighbour outside the mask or the image."""
    h, w = mask.shape
    points = []
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                a, b = i + di, j + dj
                if a < 0 or b < 0 or a >= h or b >= w or not mask[a, b]:
                    points.append((i, j))
                    break
    return np.array(points, dtype=np.float64).reshape(-1, 2)


def hd95_brute_force(pred, gt, class_id):
    """All-pairs 95th-percentile Hausdorff distance between class boundaries."""
    p = boundary_loop(pred == class_id)
    g = boundary_loop(gt == class_id)
    if len(p) == 0 and len(g) == 0:
        return 0.0
    if len(p) == 0 or len(g) == 0:
        return float(np.hypot(*pred.shape))
    dists = np.sqrt(((p[:, None, :] - g[None, :, :]) ** 2).sum(-1))
    return float(max(np.percentile(dists.min(axis=1), 95), np.percentile(dists.min(axis=0), 95)))


def same_region(height, width, window, shift):
    """Brute-force region id per pixel of the cyclically shifted map, then pairwise same-region flags per window."""
    def band(coord, extent):
        if coord < extent - window:
            return 0
        if coord < extent - shift:
            return 1
        return 2

    ids = np.array([[band(i, height) * 3 + band(j, width) for j in range(width)] for i in range(height)])
    windows = []
    for wi in range(0, height, window):
        for wj in range(0, width, window):
            flat = ids[wi : wi + window, wj : wj + window].reshape(-1)
            windows.append(flat[:, None] == flat[None, :])
    return np.stack(windows)


def aci_naive(x):
    """Channel affinity attention with explicit loops over channel pairs."""
    n, c, h, w = x.shape
    out = np.empty_like(x)
    for b in range(n):
        flat = x[b].reshape(c, -1)
        affinity = np.array([[flat[i] @ flat[j] for j in range(c)] for i in range(c)])
        weights = np.exp(affinity - affinity.max(axis=1, keepdims=True))
        weights /= weights.sum(axis=1, keepdims=True)
        out[b] = (weights @ flat).reshape(c, h, w)
    return out
