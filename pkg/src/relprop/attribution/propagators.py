"""Per-layer relevance propagation rules.

Sign conventions used throughout: for an array ``a``, the positive part is
``max(a, 0)`` and the negative part ``min(a, 0)``; the elementwise identity
``[w*h]+ = w+*h+ + w-*h-`` (and its mirror for the negative part) turns the
per-entry contribution sums of the propagation rules into forward/adjoint
convolutions, which is how the conv variants below stay off the explicit
lowered matrices.

Bias treatment: bias terms enter the denominators as the contribution of a
constant-1 input and the relevance share falling on them is dropped, so
per-layer sums are conserved exactly only for zero-bias layers.
"""

import numpy as np

from .. import backend
from ..errors import ContractViolationError
from ..numerics import percentile


def _split(a):
    return np.maximum(a, 0.0), np.minimum(a, 0.0)


def _safe_div(r, z):
    # Zero denominators distribute nothing: the output neuron's column is
    # treated as zero rather than producing NaN.
    out = np.zeros_like(r)
    np.divide(r, z, out=out, where=z != 0.0)
    return out


def _stabilized_div(r, z, eps):
    if eps == 0.0:
        return _safe_div(r, z)
    return _safe_div(r, z + eps * np.sign(z))


# --- dense layers -----------------------------------------------------------


def dense_alphabeta(w, b, h, r, alpha, beta):
    """LRP alpha/beta for a dense layer; alpha=1, beta=0 is the z+ rule."""
    wp, wn = _split(w)
    hp, hn = _split(h)
    zp = wp @ hp + wn @ hn
    if b is not None:
        zp = zp + np.maximum(b, 0.0)
    sp = _safe_div(r, zp)
    out = alpha * (hp * (wp.T @ sp) + hn * (wn.T @ sp))
    if beta != 0.0:
        zn = wp @ hn + wn @ hp
        if b is not None:
            zn = zn + np.minimum(b, 0.0)
        sn = _safe_div(r, zn)
        out = out - beta * (hn * (wp.T @ sn) + hp * (wn.T @ sn))
    return out


def dense_zplus(w, b, h, r):
    return dense_alphabeta(w, b, h, r, 1.0, 0.0)


def dense_lrpz(w, b, h, r, eps):
    z = w @ h
    if b is not None:
        z = z + b
    s = _stabilized_div(r, z, eps)
    return h * (w.T @ s)


def dense_w2(w, r):
    w2 = w * w
    s = _safe_div(r, w2.sum(axis=1))
    return w2.T @ s


def dense_wbox(w, x, lower, upper, r):
    if np.any(x < lower) or np.any(x > upper):
        raise ContractViolationError("wB rule requires the input inside its [lower, upper] box")
    wp, wn = _split(w)
    l = np.full_like(x, lower)
    u = np.full_like(x, upper)
    z = w @ x - wp @ l - wn @ u
    s = _safe_div(r, z)
    return x * (w.T @ s) - l * (wp.T @ s) - u * (wn.T @ s)


def dense_pattern(w, a, r, mode):
    if mode == "net":
        return a.T @ r
    return (w * a).T @ r


def dense_deeplift(w, dh_in, p_out, n_out, ablation):
    """DeepLIFT linear rule on the (positive, negative) multiplier pair.

    The pair entering a linear layer carries the pool multipliers; under the
    Rescale rule both pools share one multiplier, so the backward collapses
    to the plain transpose on the pair total.  The ablation variant drops the
    cross terms, leaving a W+ chain for the positive slot and a W- chain for
    the negative slot.  The result is re-partitioned by the sign of the
    input-side delta.
    """
    if ablation:
        wp, wn = _split(w)
        tp = wp.T @ p_out
        tn = wn.T @ n_out
    else:
        tp = tn = w.T @ (p_out + n_out)
    return np.where(dh_in > 0, tp, 0.0), np.where(dh_in < 0, tn, 0.0)


# --- conv layers ------------------------------------------------------------


def conv_alphabeta(w, b, h, r, stride, padding, alpha, beta):
    wp, wn = _split(w)
    hp, hn = _split(h)
    zp = backend.conv2d(hp, wp, stride, padding) + backend.conv2d(hn, wn, stride, padding)
    if b is not None:
        zp = zp + np.maximum(b, 0.0)
    sp = _safe_div(r, zp)
    shape = h.shape
    out = alpha * (
        hp * backend.conv2d_adjoint(sp, wp, stride, padding, shape)
        + hn * backend.conv2d_adjoint(sp, wn, stride, padding, shape)
    )
    if beta != 0.0:
        zn = backend.conv2d(hp, wn, stride, padding) + backend.conv2d(hn, wp, stride, padding)
        if b is not None:
            zn = zn + np.minimum(b, 0.0)
        sn = _safe_div(r, zn)
        out = out - beta * (
            hn * backend.conv2d_adjoint(sn, wp, stride, padding, shape)
            + hp * backend.conv2d_adjoint(sn, wn, stride, padding, shape)
        )
    return out


def conv_zplus(w, b, h, r, stride, padding):
    return conv_alphabeta(w, b, h, r, stride, padding, 1.0, 0.0)


def conv_lrpz(w, b, h, r, stride, padding, eps):
    z = backend.conv2d(h, w, stride, padding)
    if b is not None:
        z = z + b
    s = _stabilized_div(r, z, eps)
    return h * backend.conv2d_adjoint(s, w, stride, padding, h.shape)


def conv_w2(w, x_shape, r, stride, padding):
    w2 = w * w
    ones = np.ones(x_shape)
    s = _safe_div(r, backend.conv2d(ones, w2, stride, padding))
    return backend.conv2d_adjoint(s, w2, stride, padding, x_shape)


def conv_wbox(w, x, lower, upper, r, stride, padding):
    if np.any(x < lower) or np.any(x > upper):
        raise ContractViolationError("wB rule requires the input inside its [lower, upper] box")
    wp, wn = _split(w)
    l = np.full_like(x, lower)
    u = np.full_like(x, upper)
    z = (
        backend.conv2d(x, w, stride, padding)
        - backend.conv2d(l, wp, stride, padding)
        - backend.conv2d(u, wn, stride, padding)
    )
    s = _safe_div(r, z)
    return (
        x * backend.conv2d_adjoint(s, w, stride, padding, x.shape)
        - l * backend.conv2d_adjoint(s, wp, stride, padding, x.shape)
        - u * backend.conv2d_adjoint(s, wn, stride, padding, x.shape)
    )


def conv_pattern(w, a, r, stride, padding, x_shape, mode):
    kernel = a if mode == "net" else w * a
    return backend.conv2d_adjoint(r, kernel, stride, padding, x_shape)


def conv_deeplift(w, dh_in, p_out, n_out, stride, padding, ablation):
    shape = dh_in.shape
    if ablation:
        wp, wn = _split(w)
        tp = backend.conv2d_adjoint(p_out, wp, stride, padding, shape)
        tn = backend.conv2d_adjoint(n_out, wn, stride, padding, shape)
    else:
        tp = tn = backend.conv2d_adjoint(p_out + n_out, w, stride, padding, shape)
    return np.where(dh_in > 0, tp, 0.0), np.where(dh_in < 0, tn, 0.0)


# --- non-linear and structural layers ---------------------------------------


def relu_gradient(mask, r):
    return mask * r


def relu_modified(mask, r, variant, q=98.0):
    """Rectified-backward ReLU variants (Guided BP, Deconv, RectGrad)."""
    if variant == "guidedbp":
        return np.maximum(mask * r, 0.0)
    if variant == "deconv":
        return np.maximum(r, 0.0)
    if variant == "rectgrad":
        v = mask * r
        threshold = percentile(v.ravel(), q)
        return np.where(v > threshold, v, 0.0)
    raise ContractViolationError(f"unknown relu variant {variant!r}")


def deeplift_rescale(z, dz, dh_out, p, n, delta_floor=1e-7):
    """Rescale rule: multipliers scale by delta-out over delta-in, falling
    back to the gradient mask where the input delta is below the floor."""
    slope = np.where(np.abs(dz) >= delta_floor, _safe_div(dh_out, dz), (z > 0).astype(np.float64))
    return p * slope, n * slope


def pool_gather(x, idx, pool):
    """Value of each pooling window at its stored argmax."""
    ph, pw = pool
    oh, ow, c = idx.shape
    win = x[: oh * ph, : ow * pw].reshape(oh, ph, ow, pw, c)
    win = win.transpose(0, 2, 4, 1, 3).reshape(oh, ow, c, ph * pw)
    return np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]


def deeplift_pool(dx_in, dh_out, idx, pool, in_shape, p, n, delta_floor=1e-7):
    """Winner-take-all routing with a rescale factor at the argmax.

    The reference pool may select a different winner, so the routed
    multiplier is scaled by delta-out over delta-at-argmax to keep the
    summation-to-delta bookkeeping exact (factor 1 below the floor).
    """
    d_at_arg = pool_gather(dx_in, idx, pool)
    factor = np.where(np.abs(d_at_arg) >= delta_floor, _safe_div(dh_out, d_at_arg), 1.0)
    return (
        backend.maxpool_scatter(p * factor, idx, pool, in_shape),
        backend.maxpool_scatter(n * factor, idx, pool, in_shape),
    )


def gap_backward(r, in_shape):
    h, w, _ = in_shape
    return np.broadcast_to(r / (h * w), in_shape).copy()


def two_branch_alphabeta(a, b, r, alpha, beta):
    """Relevance split across a two-branch sum (residual skip + body) under
    the alpha/beta contribution rule; returns (r_a, r_b)."""
    ap, an = _split(a)
    bp, bn = _split(b)
    sp = _safe_div(r, ap + bp)
    ra = alpha * ap * sp
    rb = alpha * bp * sp
    if beta != 0.0:
        sn = _safe_div(r, an + bn)
        ra = ra - beta * an * sn
        rb = rb - beta * bn * sn
    return ra, rb


def two_branch_signed(a, b, r, eps):
    """Signed proportional split of a two-branch sum (LRP_z style)."""
    s = _stabilized_div(r, a + b, eps)
    return a * s, b * s
