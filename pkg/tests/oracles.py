"""Independent oracles used to freeze expected values.

Each oracle is a deliberately naive, loop-level implementation kept separate
from the library code paths it checks.
"""

import numpy as np


def naive_matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    vector = b.ndim == 1
    bm = b[:, None] if vector else b
    out = np.zeros((a.shape[0], bm.shape[1]))
    for i in range(a.shape[0]):
        for j in range(bm.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * bm[k, j]
            out[i, j] = acc
    return out[:, 0] if vector else out


def eig_singular_values(m):
    """All singular values via eigen-decomposition of M^T M."""
    m = np.asarray(m, dtype=np.float64)
    gram = m.T @ m if m.shape[0] >= m.shape[1] else m @ m.T
    eig = np.linalg.eigvalsh(gram)
    return np.sqrt(np.clip(eig, 0.0, None))[::-1]


def naive_conv2d(x, w, stride=(1, 1), padding="same"):
    """Direct sliding-window convolution, channels last."""
    h, ww, ci = x.shape
    kh, kw, _, co = w.shape
    sy, sx = stride
    if padding == "same":
        oh = -(-h // sy)
        ow = -(-ww // sx)
        pt = max(0, (oh - 1) * sy + kh - h) // 2
        pl = max(0, (ow - 1) * sx + kw - ww) // 2
    else:
        oh = (h - kh) // sy + 1
        ow = (ww - kw) // sx + 1
        pt = pl = 0
    out = np.zeros((oh, ow, co))
    for oy in range(oh):
        for ox in range(ow):
            for f in range(co):
                acc = 0.0
                for ky in range(kh):
                    for kx in range(kw):
                        y = oy * sy - pt + ky
                        xx = ox * sx - pl + kx
                        if 0 <= y < h and 0 <= xx < ww:
                            for c in range(ci):
                                acc += x[y, xx, c] * w[ky, kx, c, f]
                out[oy, ox, f] = acc
    return out


def ssim_direct(a, b, k1=0.01, k2=0.03, sigma=1.5, window=11, dynamic_range=1.0):
    """Direct evaluation of the windowed SSIM formula with explicit loops."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    win = min(window, a.shape[0], a.shape[1])
    if win % 2 == 0:
        win -= 1
    win = max(win, 1)
    half = (win - 1) / 2.0
    coords = np.arange(win) - half
    g1 = np.exp(-(coords**2) / (2.0 * sigma**2))
    g = np.outer(g1, g1)
    g = g / g.sum()
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    values = []
    for y in range(a.shape[0] - win + 1):
        for x in range(a.shape[1] - win + 1):
            pa = a[y : y + win, x : x + win]
            pb = b[y : y + win, x : x + win]
            mu_a = float((g * pa).sum())
            mu_b = float((g * pb).sum())
            var_a = float((g * pa * pa).sum()) - mu_a**2
            var_b = float((g * pb * pb).sum()) - mu_b**2
            cov = float((g * pa * pb).sum()) - mu_a * mu_b
            values.append(
                ((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))
            )
    return float(np.mean(values))


def nearest_rank_percentile(values, q):
    s = sorted(values)
    rank = int(np.ceil(q / 100.0 * len(s)))
    rank = min(max(rank, 1), len(s))
    return s[rank - 1]


def finite_diff_gradient(f, x, step=1e-3):
    """Central finite differences of a scalar function on a flat copy of x."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat = grad.reshape(-1)
    xf = x.reshape(-1)
    for i in range(xf.size):
        bump = np.zeros_like(xf)
        bump[i] = step
        flat[i] = (f((xf + bump).reshape(x.shape)) - f((xf - bump).reshape(x.shape))) / (2 * step)
    return grad


def zplus_matrix(w, h, bias=None):
    """Explicit Z+ backward matrix (in x out) for a dense layer."""
    contrib = np.maximum(w * h[None, :], 0.0)
    denom = contrib.sum(axis=1)
    if bias is not None:
        denom = denom + np.maximum(bias, 0.0)
    cols = np.zeros_like(contrib)
    np.divide(contrib, denom[:, None], out=cols, where=denom[:, None] != 0.0)
    return cols.T  # maps output relevance to input relevance


def alphabeta_dense_direct(w, h, r, alpha, beta, bias=None):
    """Per-entry evaluation of the alpha/beta rule for a dense layer."""
    n_out, n_in = w.shape
    out = np.zeros(n_in)
    pos = np.maximum(w * h[None, :], 0.0)
    neg = np.minimum(w * h[None, :], 0.0)
    dp = pos.sum(axis=1) + (np.maximum(bias, 0.0) if bias is not None else 0.0)
    dn = neg.sum(axis=1) + (np.minimum(bias, 0.0) if bias is not None else 0.0)
    for j in range(n_in):
        acc = 0.0
        for i in range(n_out):
            if dp[i] != 0.0:
                acc += alpha * r[i] * pos[i, j] / dp[i]
            if dn[i] != 0.0:
                acc -= beta * r[i] * neg[i, j] / dn[i]
        out[j] = acc
    return out
