"""Leja points on [-1, 1], hierarchical Lagrange polynomials and their norms."""

import numpy as np

#: Two grid objective values closer than this (relative to the maximum) tie.
_TIE_TOL = 1e-13


def _golden_max(fun, lo, hi, tol=1e-15, max_iter=200):
    """Golden-section maximization of a unimodal function on [lo, hi]."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    candidates = [(fun(x), x), (fc, c), (fd, d), (fun(lo), lo), (fun(hi), hi)]
    return max(candidates)[1]


class LejaSequence:
    """Greedily grown sequence of points on [-1, 1] starting at 0.

    Each new point maximizes the product of distances to all previous
    points.  The argmax is located on a dense uniform grid and refined by
    golden-section search on the bracketing interval; grid ties are broken
    toward the larger point.
    """

    def __init__(self, grid_size=20001):
        self.grid_size = int(grid_size)
        self.points = [0.0]

    def __len__(self):
        return len(self.points)

    def _objective(self, beta):
        pts = np.asarray(self.points)
        return np.abs(np.asarray(beta)[..., None] - pts).prod(axis=-1)

    def extend(self, depth):
        """Grow the sequence to at least `depth` points (prefix-stable)."""
        grid = np.linspace(-1.0, 1.0, self.grid_size)
        while len(self.points) < depth:
            vals = self._objective(grid)
            vmax = vals.max()
            ties = np.nonzero(vals >= vmax - _TIE_TOL * max(vmax, 1.0))[0]
            k = ties.max()
            lo = grid[max(k - 1, 0)]
            hi = grid[min(k + 1, self.grid_size - 1)]
            beta = _golden_max(lambda b: self._objective(b), lo, hi)
            self.points.append(float(min(1.0, max(-1.0, beta))))
        return self

    def point(self, k):
        if k >= len(self.points):
            self.extend(k + 1)
        return self.points[k]

    def as_array(self, depth=None):
        if depth is not None:
            self.extend(depth)
        return np.asarray(self.points if depth is None else self.points[:depth])


class UnivariateBasis:
    """Hierarchical Lagrange polynomials l_k on a Leja sequence.

    l_0 is identically 1 and l_k is the degree-k product
    prod_{m<k} (beta - beta_m) / (beta_k - beta_m), so l_k(beta_k) = 1 and
    l_k vanishes at all earlier points.
    """

    def __init__(self, sequence=None):
        self.sequence = sequence if sequence is not None else LejaSequence()
        self._norms = {}

    def eval(self, k, beta):
        """Evaluate l_k at scalar or array `beta`."""
        if k == 0:
            return np.ones_like(np.asarray(beta, dtype=float))[()] if np.ndim(beta) else 1.0
        self.sequence.extend(k + 1)
        pts = np.asarray(self.sequence.points[:k])
        bk = self.sequence.points[k]
        beta = np.asarray(beta, dtype=float)
        return np.prod((beta[..., None] - pts) / (bk - pts), axis=-1)

    def norm(self, k):
        """L2 norm of l_k on [-1, 1] under the uniform probability weight.

        Gauss-Legendre with k + 2 nodes, exact for the degree-2k integrand
        with margin; values are cached.
        """
        if k not in self._norms:
            nodes, weights = np.polynomial.legendre.leggauss(k + 2)
            vals = self.eval(k, nodes)
            self._norms[k] = float(np.sqrt(np.sum(weights * vals**2) / 2.0))
        return self._norms[k]


def lebesgue_constant(sequence, k, probe_resolution=20001):
    """Estimate the Lebesgue constant of interpolation on the first k+1 points.

    Uses standard Lagrange cardinal polynomials (not the hierarchical
    basis) and a sup over a uniform probe grid; diagnostic only.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    pts = sequence.as_array(k + 1)
    probe = np.linspace(-1.0, 1.0, probe_resolution)
    total = np.zeros_like(probe)
    for m in range(k + 1):
        others = np.delete(pts, m)
        total += np.abs(np.prod((probe[:, None] - others) / (pts[m] - others), axis=1))
    return float(total.max())
