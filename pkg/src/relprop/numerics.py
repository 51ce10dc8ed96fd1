"""Dense-array metrics: cosines, top singular values, SSIM, percentiles.

Arrays are plain float64 ``numpy.ndarray`` throughout; matrices are 2-D with
rows indexing the output dimension and columns the input dimension.
"""

import numpy as np

from . import rng
from .errors import ContractViolationError, NumericalFailureError, UndefinedAngleError

_TINY = 1e-300


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim not in (1, 2):
        raise ContractViolationError(f"matmul expects 2-D x (1|2)-D, got {a.ndim}-D x {b.ndim}-D")
    if a.shape[1] != b.shape[0]:
        raise ContractViolationError(f"inner dimensions disagree: {a.shape} x {b.shape}")
    return a @ b


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """a.b / (|a||b|), clamped to [-1, 1] against round-off.

    Raises UndefinedAngleError for zero-norm inputs; callers that can tolerate
    missing angles (e.g. the CSC harness) catch it.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ContractViolationError(f"shape mismatch: {a.shape} vs {b.shape}")
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise UndefinedAngleError("cosine undefined for zero-norm vector")
    ua = a / na
    ub = b / nb
    if np.array_equal(ua, ub):
        return 1.0
    if np.array_equal(ua, -ub):
        return -1.0
    return float(np.clip(np.dot(ua, ub), -1.0, 1.0))


def pairwise_column_cosines(m: np.ndarray) -> np.ndarray:
    """Cosines of all unordered column pairs (condensed order, i < j)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] < 2:
        raise ContractViolationError("need a matrix with at least 2 columns")
    norms = np.linalg.norm(m, axis=0)
    if np.any(norms == 0.0):
        raise UndefinedAngleError("zero column has no defined angle")
    unit = m / norms
    gram = np.clip(unit.T @ unit, -1.0, 1.0)
    iu = np.triu_indices(m.shape[1], k=1)
    return gram[iu]


def max_pairwise_column_cosine(m: np.ndarray) -> float:
    """Cosine of the widest angle between columns (minimum pairwise cosine)."""
    return float(pairwise_column_cosines(m).min())


def percentile(values, q: float) -> float:
    """Nearest-rank percentile: the ceil(q/100 * n)-th order statistic."""
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise ContractViolationError("percentile of empty input")
    if not 0.0 <= q <= 100.0:
        raise ContractViolationError(f"q must be in [0, 100], got {q}")
    rank = int(np.ceil(q / 100.0 * arr.size))
    rank = min(max(rank, 1), arr.size)
    return float(np.partition(arr, rank - 1)[rank - 1])


def _power_iterate_top(b: np.ndarray, v0: np.ndarray, max_iter: int, rtol: float):
    """Dominant eigenpair of a symmetric PSD matrix via power iteration.

    Convergence: successive Rayleigh quotients agree to ``rtol`` relative.
    """
    v = v0 / np.linalg.norm(v0)
    lam_prev = None
    lam = 0.0
    for _ in range(max_iter):
        w = b @ v
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw <= _TINY:
            return 0.0, v
        v = w / nw
        if lam_prev is not None and abs(lam - lam_prev) <= rtol * max(abs(lam), _TINY):
            return lam, v
        lam_prev = lam
    residual = abs(lam - lam_prev) if lam_prev is not None else float("inf")
    raise NumericalFailureError(
        f"power iteration did not converge in {max_iter} steps", residual=residual
    )


def _start_vector(n: int) -> np.ndarray:
    # Fixed pseudo-random direction; no ambient entropy.
    return rng.normal(0, rng.INTERNAL, n, 0, n)


def _top_singular_triplet(m: np.ndarray, max_iter: int, rtol: float):
    """(s, u, v) of the dominant singular component via power iteration on
    the smaller Gram matrix."""
    tall = m.shape[0] >= m.shape[1]
    gram = m.T @ m if tall else m @ m.T
    lam, x = _power_iterate_top(gram, _start_vector(gram.shape[0]), max_iter, rtol)
    s = float(np.sqrt(max(lam, 0.0)))
    if s <= _TINY:
        return 0.0, np.zeros(m.shape[0]), np.zeros(m.shape[1])
    if tall:
        v = x
        u = m @ v / s
    else:
        u = x
        v = m.T @ u / s
    return s, u, v


def top2_singular_values(m: np.ndarray, max_iter: int = 10000, rtol: float = 1e-12):
    """Two largest singular values via power iteration with deflation.

    The dominant component is removed from the matrix itself before the
    second pass, keeping the noise floor of s2 at eps * s1.  Returns
    (s1, s2) with s1 >= s2 >= 0; s2 is 0 for single-column/row inputs.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ContractViolationError("need a non-empty matrix")
    s1, u1, v1 = _top_singular_triplet(m, max_iter, rtol)
    if min(m.shape) < 2 or s1 == 0.0:
        return s1, 0.0
    s2, _, _ = _top_singular_triplet(m - s1 * np.outer(u1, v1), max_iter, rtol)
    return s1, min(s1, s2)


def svd_deflated(m: np.ndarray, k: int | None = None, max_iter: int = 10000, rtol: float = 1e-12):
    """Deflated power-iteration SVD: (U, s, Vt) with the k leading components.

    Accuracy degrades on the trailing components; intended for the alignment
    reports, not as a general-purpose decomposition.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.size == 0:
        raise ContractViolationError("need a non-empty matrix")
    rank_cap = min(m.shape)
    k = rank_cap if k is None else min(k, rank_cap)
    residual = m.copy()
    us, ss, vs = [], [], []
    for _ in range(k):
        s, u, v = _top_singular_triplet(residual, max_iter, rtol)
        if s <= 1e-14 * (ss[0] if ss else 1.0):
            break
        us.append(u)
        ss.append(s)
        vs.append(v)
        residual = residual - s * np.outer(u, v)
    u_mat = np.stack(us, axis=1) if us else np.zeros((m.shape[0], 0))
    v_mat = np.stack(vs, axis=0) if vs else np.zeros((0, m.shape[1]))
    return u_mat, np.asarray(ss), v_mat


def gaussian_window(size: int, sigma: float) -> np.ndarray:
    """2-D Gaussian window normalized to sum 1."""
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g1 = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g1, g1)
    return win / win.sum()


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    k1: float = 0.01,
    k2: float = 0.03,
    sigma: float = 1.5,
    window: int = 11,
    dynamic_range: float = 1.0,
) -> float:
    """Mean local structural similarity over a sliding Gaussian window.

    Constants and window follow the published defaults (K1=0.01, K2=0.03,
    11x11 Gaussian with sigma 1.5, L=1 on normalized inputs). For images
    smaller than the window, the window shrinks to the largest odd size that
    fits; callers comparing maps must normalize them to the documented
    dynamic range first.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2:
        raise ContractViolationError(f"ssim needs equal 2-D shapes, got {a.shape} vs {b.shape}")
    win = min(window, a.shape[0], a.shape[1])
    if win % 2 == 0:
        win -= 1
    win = max(win, 1)
    g = gaussian_window(win, sigma)

    def local_mean(img):
        v = np.lib.stride_tricks.sliding_window_view(img, (win, win))
        return np.tensordot(v, g, axes=([2, 3], [0, 1]))

    mu_a = local_mean(a)
    mu_b = local_mean(b)
    var_a = local_mean(a * a) - mu_a * mu_a
    var_b = local_mean(b * b) - mu_b * mu_b
    cov = local_mean(a * b) - mu_a * mu_b
    c1 = (k1 * dynamic_range) ** 2
    c2 = (k2 * dynamic_range) ** 2
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
