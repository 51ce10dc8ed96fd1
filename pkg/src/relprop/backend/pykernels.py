"""Pure-numpy kernels, the fallback when the compiled extension is absent.

All kernels take channels-last float64 arrays and pre-resolved padding
offsets; the dispatch wrappers in ``relprop.backend`` own the padding
arithmetic so both implementations see identical raw arguments.
"""

import numpy as np


def conv2d_forward(x, w, sy, sx, pt, pl, oh, ow):
    h, ww, _ = x.shape
    kh, kw, _, _ = w.shape
    pb = max(0, (oh - 1) * sy + kh - (h + pt))
    pr = max(0, (ow - 1) * sx + kw - (ww + pl))
    xp = np.pad(x, ((pt, pb), (pl, pr), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))
    win = win[::sy, ::sx][:oh, :ow]  # (oh, ow, ci, kh, kw)
    return np.tensordot(win, w, axes=([3, 4, 2], [0, 1, 2]))


def conv2d_input_adjoint(g, w, sy, sx, pt, pl, h, ww):
    """Adjoint of conv2d_forward in the input argument (transposed conv)."""
    kh, kw, ci, co = w.shape
    oh, ow = g.shape[0], g.shape[1]
    out = np.zeros((h, ww, ci))
    gw = np.tensordot(g, w, axes=([2], [3]))  # (oh, ow, kh, kw, ci)
    for ky in range(kh):
        y = np.arange(oh) * sy - pt + ky
        ymask = (y >= 0) & (y < h)
        if not ymask.any():
            continue
        for kx in range(kw):
            x = np.arange(ow) * sx - pl + kx
            xmask = (x >= 0) & (x < ww)
            if not xmask.any():
                continue
            out[np.ix_(y[ymask], x[xmask])] += gw[np.ix_(ymask, xmask)][:, :, ky, kx]
    return out


def maxpool_forward(x, ph, pw):
    h, w, c = x.shape
    oh, ow = h // ph, w // pw
    win = x[: oh * ph, : ow * pw].reshape(oh, ph, ow, pw, c)
    win = win.transpose(0, 2, 4, 1, 3).reshape(oh, ow, c, ph * pw)
    idx = np.argmax(win, axis=-1)
    y = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return y, idx.astype(np.int64)


def maxpool_scatter(r, idx, ph, pw, h, w):
    oh, ow, c = r.shape
    slots = np.zeros((oh, ow, c, ph * pw))
    np.put_along_axis(slots, idx[..., None], r[..., None], axis=-1)
    block = slots.reshape(oh, ow, c, ph, pw).transpose(0, 3, 1, 4, 2).reshape(oh * ph, ow * pw, c)
    out = np.zeros((h, w, c))
    out[: oh * ph, : ow * pw] = block
    return out
