"""Parametric electric fields E(t, x, z) and their limiting potentials.

All built-in families share the mean field sin(x)/2 and cosine components
cos(jx) scaled by a per-dimension amplitude 1/c_j; the three stock choices
of c_j are 2^j, j^2 and j.  Time-dependent variants add a (1+t)^-2 term
inside each component, which vanishes in the long-time limit.
"""

import numpy as np

FAMILIES = ("exp2", "invsq", "inv")


def _denominators(family, dim, amplitudes=None):
    j = np.arange(1, dim + 1, dtype=float)
    if amplitudes is not None:
        amp = np.asarray(amplitudes, dtype=float)
        if amp.shape != (dim,):
            raise ValueError("amplitude table must have one entry per dimension")
        return 1.0 / amp
    if family == "exp2":
        return 2.0**j
    if family == "invsq":
        return j**2
    if family == "inv":
        return j
    raise ValueError(f"unknown field family {family!r}; expected one of {FAMILIES}")


class ParametricFieldSpec:
    """A field family: mean field, per-dimension components and limits.

    Parameters
    ----------
    family : str
        One of "exp2", "invsq", "inv" (component amplitudes 2^-j, j^-2,
        j^-1), or "custom" with an explicit amplitude table.
    dim : int
        Truncation of the nominally infinite parameter vector.
    time_dependent : bool
        Adds the decaying (1+t)^-2 term inside every component.
    amplitudes : sequence of float, optional
        Custom amplitude table a_j for components a_j cos(jx).
    """

    def __init__(self, family="exp2", dim=100, time_dependent=False, amplitudes=None):
        self.family = family
        self.dim = int(dim)
        self.time_dependent = bool(time_dependent)
        self.denominators = _denominators(family, self.dim, amplitudes)
        self._j = np.arange(1, self.dim + 1, dtype=float)

    def mean_field(self, t, x):
        """The expectation of E; independent of t for all built-in families."""
        return 0.5 * np.sin(x)

    def components(self, t, x):
        """Stack of E_j(t, x) with shape (dim,) + shape(x)."""
        x = np.asarray(x, dtype=float)
        base = np.cos(np.multiply.outer(self._j, x))
        if self.time_dependent:
            base = base + 1.0 / (1.0 + t) ** 2
        return base / self.denominators.reshape((-1,) + (1,) * x.ndim)

    def eval_E(self, t, x, z):
        """E(t, x, z) = mean field plus the z-weighted component sum."""
        z = np.asarray(z, dtype=float)
        if z.shape != (self.dim,):
            raise ValueError(f"parameter point must have dimension {self.dim}")
        return self.mean_field(t, x) + np.tensordot(z, self.components(t, x), axes=1)

    def eval_E_inf(self, x, z):
        """Long-time limit of the field (the matching time-independent family)."""
        z = np.asarray(z, dtype=float)
        x = np.asarray(x, dtype=float)
        comp = np.cos(np.multiply.outer(self._j, x)) / self.denominators.reshape(
            (-1,) + (1,) * x.ndim
        )
        return 0.5 * np.sin(x) + np.tensordot(z, comp, axes=1)

    def eval_phi_inf(self, x, z):
        """Limiting potential with E_inf = -d/dx phi_inf; integration constant 0."""
        z = np.asarray(z, dtype=float)
        x = np.asarray(x, dtype=float)
        comp = np.sin(np.multiply.outer(self._j, x)) / (
            self._j * self.denominators
        ).reshape((-1,) + (1,) * x.ndim)
        return 0.5 * np.cos(x) - np.tensordot(z, comp, axes=1)

    def component_norms(self):
        """Analytic sup bounds C_j on the W^{1,inf} size of each component."""
        extra = 1.0 if self.time_dependent else 0.0
        return (1.0 + self._j + extra) / self.denominators

    def tail_decay_exponent(self):
        """Fitted power-law exponent of C_j over the trailing half of dimensions."""
        c = self.component_norms()
        j = self._j
        half = max(self.dim // 2, 1)
        lj, lc = np.log(j[half - 1 :]), np.log(c[half - 1 :])
        if lj.size < 2:
            return -np.inf
        return float(np.polyfit(lj, lc, 1)[0])

    def summable_tail(self):
        """False when the component bounds decay too slowly for a summable tail
        (power-law exponent >= -1); reported as a diagnostic flag."""
        return self.tail_decay_exponent() < -1.0
