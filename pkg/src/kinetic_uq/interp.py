"""Progressive multivariate interpolation on tensorized hierarchical bases.

The collocation matrix of a downward-closed selection is unit lower
triangular in selection order, so the interpolant grows one surplus at a
time and its inverse collocation matrix grows one row per step without any
re-factorization.
"""

import os

import numpy as np

from .leja import LejaSequence, UnivariateBasis
from .multi_index import MultiIndex

FLOAT_FMT = "%.17g"


class HierarchicalInterpolant:
    """Interpolant I(z) = sum_nu alpha_nu H_nu(z) over a growing index set.

    Payloads (model outputs and surpluses alpha_nu) are opaque fixed-length
    float vectors; the spatial discretization they come from is irrelevant
    here.
    """

    def __init__(self, basis=None, dim=1):
        self.basis = basis if basis is not None else UnivariateBasis()
        self.dim = int(dim)
        self.indices = []
        self._index_set = set()
        self._nodes = []
        self._alphas = []
        self._inv = np.zeros((0, 0))
        self._tensor_norms = {}

    def __len__(self):
        return len(self.indices)

    @property
    def payload_size(self):
        return self._alphas[0].shape[0] if self._alphas else None

    @property
    def inverse(self):
        """Inverse of the unit-lower-triangular collocation matrix."""
        return self._inv

    @property
    def alphas(self):
        return np.vstack(self._alphas) if self._alphas else np.zeros((0, 0))

    def node_of(self, nu):
        """Collocation point z_nu: coordinate j carries the nu_j-th Leja point."""
        z = np.zeros(self.dim)
        for j, m in nu.entries:
            if j > self.dim:
                raise ValueError(f"{nu!r} exceeds dimension budget {self.dim}")
            z[j - 1] = self.basis.sequence.point(m)
        return z

    def eval_H(self, nu, z):
        """Tensor basis value H_nu(z); factors with nu_j = 0 are 1."""
        out = 1.0
        for j, m in nu.entries:
            out *= self.basis.eval(m, z[j - 1])
        return out

    def basis_row(self, z):
        """Row vector [H_{nu_1}(z), ..., H_{nu_n}(z)] in selection order."""
        return np.array([self.eval_H(nu, z) for nu in self.indices])

    def tensor_norm(self, nu):
        """Product of univariate basis norms over the support of nu."""
        if nu not in self._tensor_norms:
            out = 1.0
            for _, m in nu.entries:
                out *= self.basis.norm(m)
            self._tensor_norms[nu] = out
        return self._tensor_norms[nu]

    def add_node(self, nu, data):
        """Append index nu with model output `data` observed at z_nu.

        The new surplus is the defect of the current interpolant at the new
        node, and the inverse collocation matrix gains the row
        [-gamma_old(z_nu), 1].
        """
        if nu in self._index_set:
            raise ValueError(f"{nu!r} already selected")
        for j in nu.support:
            if nu.minus(j) not in self._index_set:
                raise ValueError(f"adding {nu!r} would break downward-closedness")
        data = np.asarray(data, dtype=float)
        if data.ndim != 1:
            raise ValueError("payloads must be 1-D vectors")
        if self._alphas and data.shape[0] != self.payload_size:
            raise ValueError("payload length changed between nodes")

        z = self.node_of(nu)
        if self.indices:
            alpha = data - self.basis_row(z) @ self.alphas
        else:
            alpha = data.copy()
        self._append(nu, z, alpha)

    def _append(self, nu, z, alpha):
        """Register a surplus and grow the inverse by [-gamma_old(z), 1]."""
        n = len(self.indices)
        if n == 0:
            self._inv = np.ones((1, 1))
        else:
            gamma_old = self.basis_row(z) @ self._inv
            inv = np.zeros((n + 1, n + 1))
            inv[:n, :n] = self._inv
            inv[n, :n] = -gamma_old
            inv[n, n] = 1.0
            self._inv = inv
        self.indices.append(nu)
        self._index_set.add(nu)
        self._nodes.append(z)
        self._alphas.append(alpha)

    def eval(self, z):
        """Interpolant value at parameter point z."""
        if not self.indices:
            raise ValueError("empty interpolant")
        return self.basis_row(z) @ self.alphas

    __call__ = eval

    def gamma(self, z):
        """Collocation weights: I(z) = sum_k gamma_k(z) * data_k."""
        if not self.indices:
            return np.zeros(0)
        return self.basis_row(z) @ self._inv

    def node_values(self):
        """Stored model outputs recovered from surpluses (collocation matrix
        times the surplus stack)."""
        rows = np.vstack([self.basis_row(z) for z in self._nodes])
        return rows @ self.alphas

    def save(self, directory):
        """Write indices.csv, alphas.bin (row-major little-endian float64)
        and leja.csv."""
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "indices.csv"), "w") as fh:
            fh.write("# index\n")
            for nu in self.indices:
                fh.write(nu.format() + "\n")
        with open(os.path.join(directory, "alphas.bin"), "wb") as fh:
            fh.write(np.ascontiguousarray(self.alphas, dtype="<f8").tobytes())
        with open(os.path.join(directory, "leja.csv"), "w") as fh:
            fh.write("k,beta_k\n")
            for k, beta in enumerate(self.basis.sequence.points):
                fh.write(f"{k},{FLOAT_FMT % beta}\n")

    @classmethod
    def load(cls, directory, dim=None):
        with open(os.path.join(directory, "indices.csv")) as fh:
            lines = fh.read().splitlines()
        indices = [MultiIndex.parse(line) for line in lines[1:]]
        with open(os.path.join(directory, "leja.csv")) as fh:
            betas = [float(line.split(",")[1]) for line in fh.read().splitlines()[1:]]
        seq = LejaSequence()
        seq.points = betas
        if dim is None:
            dim = max((nu.max_dim for nu in indices), default=1)
        interp = cls(UnivariateBasis(seq), dim=dim)
        raw = np.fromfile(os.path.join(directory, "alphas.bin"), dtype="<f8")
        if indices:
            # Surpluses come back verbatim; only the inverse collocation
            # matrix (a function of indices and points alone) is regrown.
            for nu, alpha in zip(indices, raw.reshape(len(indices), -1)):
                interp._append(nu, interp.node_of(nu), alpha.copy())
        return interp
