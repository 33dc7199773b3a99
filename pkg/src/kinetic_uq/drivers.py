"""Greedy sampling drivers over the anchored-neighbor pool.

Three strategies share the bookkeeping: surplus-greedy (solves the model
at every new pool candidate and ranks hierarchical surpluses), residual
greedy (ranks cheap scheme residuals and solves only the winner), and
seeded uniform random selection.  All three keep the index set monotone
and downward closed and maintain monotone cost counters.
"""

import logging
import time

import numpy as np

from .interp import FLOAT_FMT, HierarchicalInterpolant
from .leja import UnivariateBasis
from .multi_index import IndexSet, pool_size_bound_check

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("step", "selected_index", "criterion_value",
               "model_solves_total", "operator_applies_total", "wall_ms")


def _norm_of(model, vec, kind):
    fn = getattr(model, "norm", None)
    if fn is None:
        return float(np.linalg.norm(vec))
    return float(fn(vec, kind))


class Driver:
    """Shared state: interpolant, index set with pool, history, counters."""

    def __init__(self, model, norm_kind="l2", basis=None):
        self.model = model
        self.norm_kind = norm_kind
        self.interpolant = HierarchicalInterpolant(
            basis if basis is not None else UnivariateBasis(), dim=model.dim
        )
        self.index_set = IndexSet(d_max=model.dim)
        self.model_solves = 0
        self.operator_applies = 0
        self.history = []
        root = self.index_set.selected[0]
        t0 = time.perf_counter()
        data = self._solve(root)
        self.interpolant.add_node(root, data)
        self._after_add(root, data)
        self._record(root, float("nan"), t0)

    def __len__(self):
        return len(self.interpolant)

    def _solve(self, nu):
        z = self.interpolant.node_of(nu)
        try:
            data = np.asarray(self.model.solve(z), dtype=float)
        except Exception as exc:
            raise RuntimeError(f"model solve failed at index {nu!r}") from exc
        self.model_solves += 1
        return data

    def _after_add(self, nu, data):
        pass

    def criterion_norm(self, vec):
        return _norm_of(self.model, vec, self.norm_kind)

    def _record(self, nu, value, t0):
        self.history.append({
            "step": len(self.interpolant),
            "selected_index": nu.format(),
            "criterion_value": value,
            "model_solves_total": self.model_solves,
            "operator_applies_total": self.operator_applies,
            "wall_ms": (time.perf_counter() - t0) * 1e3,
        })

    def _argmax(self, scored):
        """Largest criterion wins; exact ties fall to multi-index order.

        `scored` pairs iterate in the pool's deterministic order, so keeping
        strict improvements selects the order-smallest maximizer.
        """
        best = None
        for nu, value in scored:
            if best is None or value > best[1]:
                best = (nu, value)
        return best

    def step(self):
        raise NotImplementedError

    def run(self, budget, callback=None):
        """Grow the selection to `budget` nodes; `callback(driver)` fires
        after every step (including the initial node)."""
        if callback is not None and len(self) == 1:
            callback(self)
        while len(self) < budget:
            self.step()
            if not pool_size_bound_check(self.index_set):
                raise AssertionError("anchored-neighbor pool outgrew its bound")
            if callback is not None:
                callback(self)
        return self

    def write_csv(self, fh, header_comment=None):
        if header_comment:
            fh.write(f"# {header_comment}\n")
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for row in self.history:
            cells = []
            for col in CSV_COLUMNS:
                val = row[col]
                if col == "selected_index":
                    # Sparse index text contains commas; quote the field.
                    cells.append(f'"{val}"')
                else:
                    cells.append(FLOAT_FMT % val if isinstance(val, float) else str(val))
            fh.write(",".join(cells) + "\n")


class SurplusGreedyDriver(Driver):
    """Surplus-greedy selection.

    Every pool candidate is solved once and its model output cached; the
    surplus against the current interpolant is refreshed each step (the
    cached output makes that refresh a cheap interpolant evaluation).
    """

    def __init__(self, model, norm_kind="l2", basis=None):
        self._outputs = {}
        super().__init__(model, norm_kind=norm_kind, basis=basis)

    def step(self):
        t0 = time.perf_counter()
        pool = self.index_set.pool
        if not pool:
            raise RuntimeError("empty candidate pool")
        scored = []
        for nu in pool:
            if nu not in self._outputs:
                self._outputs[nu] = self._solve(nu)
            surplus = self._outputs[nu] - self.interpolant.eval(self.interpolant.node_of(nu))
            scored.append((nu, self.criterion_norm(surplus) * self.interpolant.tensor_norm(nu)))
        nu, value = self._argmax(scored)
        data = self._outputs.pop(nu)
        self.index_set.promote(nu)
        self.interpolant.add_node(nu, data)
        self._record(nu, value, t0)
        return nu


class ResidualGreedyDriver(Driver):
    """Residual-greedy selection.

    Ranks pool candidates by the norm of the interpolation residual of the
    implicit scheme, assembled from per-node operator applications; only
    the winning candidate triggers a model solve.  Collocation weights for
    pool members are maintained by the incremental block-inverse update.
    """

    def __init__(self, model, norm_kind="l2", basis=None):
        if not hasattr(model, "operator_apply"):
            raise TypeError("residual-based driver needs model.operator_apply")
        self._node_outputs = []
        self._node_ops = []
        self._gammas = {}
        super().__init__(model, norm_kind=norm_kind, basis=basis)

    @property
    def eps(self):
        return float(getattr(self.model, "eps", 1.0))

    def _apply_operator(self, nu, vec):
        z = self.interpolant.node_of(nu)
        out = np.asarray(self.model.operator_apply(z, vec), dtype=float)
        self.operator_applies += 1
        return out

    def _after_add(self, nu, data):
        self._node_outputs.append(data)
        self._node_ops.append(self._apply_operator(nu, data))
        n = len(self.interpolant)
        stale = set(self._gammas) - set(self.index_set.pool)
        gamma_win = self._gammas.pop(nu, None)
        for dead in stale:
            self._gammas.pop(dead, None)
        for cand in self.index_set.pool:
            z = self.interpolant.node_of(cand)
            h = self.interpolant.eval_H(nu, z)
            old = self._gammas.get(cand)
            if old is None:
                # Fresh pool member: weights against the previous set come
                # from the direct product with the retained inverse block.
                row = np.array([
                    self.interpolant.eval_H(prev, z)
                    for prev in self.interpolant.indices[: n - 1]
                ])
                old = row @ self.interpolant.inverse[: n - 1, : n - 1]
            if n == 1:
                self._gammas[cand] = np.array([h])
            else:
                self._gammas[cand] = np.concatenate([old - h * gamma_win, [h]])

    def residual(self, nu, gamma=None):
        """Scheme residual at the candidate node from cached node data.

        S = (1/eps) * sum_k gamma_k (B_k f_k - B_nu f_k); the per-node
        differences cancel exactly when the operator ignores z.
        """
        if gamma is None:
            gamma = self.interpolant.gamma(self.interpolant.node_of(nu))
        out = np.zeros_like(self._node_outputs[0])
        for k, g in enumerate(gamma):
            diff = self._node_ops[k] - self._apply_operator(nu, self._node_outputs[k])
            out += g * diff
        return out / self.eps

    def step(self):
        t0 = time.perf_counter()
        pool = self.index_set.pool
        if not pool:
            raise RuntimeError("empty candidate pool")
        scored = [
            (nu, self.criterion_norm(self.residual(nu, self._gammas[nu])))
            for nu in pool
        ]
        top = max(v for _, v in scored)
        scale = max((self.criterion_norm(op) for op in self._node_ops), default=0.0)
        if top <= 1e-12 * max(scale, 1e-300):
            logger.warning("all residuals vanish: operator appears z-independent")
        nu, value = self._argmax(scored)
        data = self._solve(nu)
        self.index_set.promote(nu)
        self.interpolant.add_node(nu, data)
        self._after_add(nu, data)
        self._record(nu, value, t0)
        return nu


class RandomPoolDriver(Driver):
    """Uniform random selection from the anchored-neighbor pool (seeded)."""

    def __init__(self, model, seed=0, norm_kind="l2", basis=None):
        self.rng = np.random.default_rng(seed)
        super().__init__(model, norm_kind=norm_kind, basis=basis)

    def step(self):
        t0 = time.perf_counter()
        pool = self.index_set.pool
        if not pool:
            raise RuntimeError("empty candidate pool")
        nu = pool[int(self.rng.integers(len(pool)))]
        data = self._solve(nu)
        self.index_set.promote(nu)
        self.interpolant.add_node(nu, data)
        self._record(nu, float("nan"), t0)
        return nu
