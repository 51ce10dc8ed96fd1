# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the convolution and pooling hot loops."""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def conv2d_forward(double[:, :, ::1] x, double[:, :, :, ::1] w,
                   int sy, int sx, int pt, int pl, int oh, int ow):
    cdef int h = x.shape[0], ww = x.shape[1], ci = x.shape[2]
    cdef int kh = w.shape[0], kw = w.shape[1], co = w.shape[3]
    cdef cnp.ndarray[double, ndim=3] out = np.zeros((oh, ow, co))
    cdef double[:, :, ::1] o = out
    cdef int oy, ox, ky, kx, c, f, y, xx
    cdef double v
    for oy in range(oh):
        for ox in range(ow):
            for ky in range(kh):
                y = oy * sy - pt + ky
                if y < 0 or y >= h:
                    continue
                for kx in range(kw):
                    xx = ox * sx - pl + kx
                    if xx < 0 or xx >= ww:
                        continue
                    for c in range(ci):
                        v = x[y, xx, c]
                        if v == 0.0:
                            continue
                        for f in range(co):
                            o[oy, ox, f] += v * w[ky, kx, c, f]
    return out


def conv2d_input_adjoint(double[:, :, ::1] g, double[:, :, :, ::1] w,
                         int sy, int sx, int pt, int pl, int h, int ww):
    cdef int oh = g.shape[0], ow = g.shape[1], co = g.shape[2]
    cdef int kh = w.shape[0], kw = w.shape[1], ci = w.shape[2]
    cdef cnp.ndarray[double, ndim=3] out = np.zeros((h, ww, ci))
    cdef double[:, :, ::1] o = out
    cdef int oy, ox, ky, kx, c, f, y, xx
    cdef double v
    for oy in range(oh):
        for ox in range(ow):
            for ky in range(kh):
                y = oy * sy - pt + ky
                if y < 0 or y >= h:
                    continue
                for kx in range(kw):
                    xx = ox * sx - pl + kx
                    if xx < 0 or xx >= ww:
                        continue
                    for f in range(co):
                        v = g[oy, ox, f]
                        if v == 0.0:
                            continue
                        for c in range(ci):
                            o[y, xx, c] += v * w[ky, kx, c, f]
    return out


def maxpool_forward(double[:, :, ::1] x, int ph, int pw):
    cdef int h = x.shape[0], w = x.shape[1], c = x.shape[2]
    cdef int oh = h // ph, ow = w // pw
    cdef cnp.ndarray[double, ndim=3] out = np.empty((oh, ow, c))
    cdef cnp.ndarray[long, ndim=3] arg = np.zeros((oh, ow, c), dtype=np.int64)
    cdef double[:, :, ::1] o = out
    cdef long[:, :, ::1] a = arg
    cdef int oy, ox, ch, iy, ix, best
    cdef double v, bv
    for oy in range(oh):
        for ox in range(ow):
            for ch in range(c):
                best = 0
                bv = x[oy * ph, ox * pw, ch]
                for iy in range(ph):
                    for ix in range(pw):
                        v = x[oy * ph + iy, ox * pw + ix, ch]
                        if v > bv:
                            bv = v
                            best = iy * pw + ix
                o[oy, ox, ch] = bv
                a[oy, ox, ch] = best
    return out, arg


def maxpool_scatter(double[:, :, ::1] r, long[:, :, ::1] idx,
                    int ph, int pw, int h, int w):
    cdef int oh = r.shape[0], ow = r.shape[1], c = r.shape[2]
    cdef cnp.ndarray[double, ndim=3] out = np.zeros((h, w, c))
    cdef double[:, :, ::1] o = out
    cdef int oy, ox, ch
    cdef long k
    for oy in range(oh):
        for ox in range(ow):
            for ch in range(c):
                k = idx[oy, ox, ch]
                o[oy * ph + k // pw, ox * pw + k % pw, ch] = r[oy, ox, ch]
    return out
