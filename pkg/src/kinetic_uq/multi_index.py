"""Multi-index arithmetic and downward-closed index sets with anchored-neighbor pools."""

import logging

logger = logging.getLogger(__name__)


class MultiIndex:
    """A finitely supported sequence of nonnegative integers.

    Entries are stored sparsely as (dimension, multiplicity) pairs with
    1-based dimensions and strictly positive multiplicities, so equal
    indices always share the same representation.
    """

    __slots__ = ("_entries", "_hash")

    def __init__(self, entries=()):
        pairs = tuple(sorted((int(j), int(m)) for j, m in dict(entries).items() if m != 0))
        for j, m in pairs:
            if j < 1 or m < 0:
                raise ValueError(f"invalid entry {j}:{m}")
        self._entries = pairs
        self._hash = hash(pairs)

    @classmethod
    def zero(cls):
        return cls()

    @classmethod
    def unit(cls, j):
        """The index e_j."""
        return cls({j: 1})

    @classmethod
    def from_dense(cls, values):
        """Build from a dense tuple, e.g. (2, 0, 1) -> {1: 2, 3: 1}."""
        return cls({j + 1: m for j, m in enumerate(values) if m})

    @property
    def entries(self):
        return self._entries

    @property
    def support(self):
        """Dimensions with nonzero multiplicity, ascending."""
        return tuple(j for j, _ in self._entries)

    @property
    def total(self):
        """|nu|, the sum of all multiplicities."""
        return sum(m for _, m in self._entries)

    @property
    def max_dim(self):
        """J(nu): the largest active dimension, 0 for the null index."""
        return self._entries[-1][0] if self._entries else 0

    def get(self, j):
        for jj, m in self._entries:
            if jj == j:
                return m
        return 0

    def plus(self, j):
        """nu + e_j."""
        d = dict(self._entries)
        d[j] = d.get(j, 0) + 1
        return MultiIndex(d)

    def minus(self, j):
        """nu - e_j; requires nu_j > 0."""
        d = dict(self._entries)
        if d.get(j, 0) < 1:
            raise ValueError(f"cannot decrement dimension {j} of {self}")
        d[j] -= 1
        return MultiIndex(d)

    def dominates(self, other):
        """True iff other <= self componentwise."""
        mine = dict(self._entries)
        return all(mine.get(j, 0) >= m for j, m in other._entries)

    def dense(self, length=None):
        """Dense tuple of the first `length` components (default max_dim)."""
        n = self.max_dim if length is None else length
        out = [0] * n
        for j, m in self._entries:
            if j <= n:
                out[j - 1] = m
        return tuple(out)

    def sort_key(self):
        """Deterministic total order: (|nu|, J(nu), dense entries)."""
        return (self.total, self.max_dim, self.dense())

    def format(self):
        """Sparse text form, e.g. '1:2,3:1' for (2,0,1); '' for the null index."""
        return ",".join(f"{j}:{m}" for j, m in self._entries)

    @classmethod
    def parse(cls, text):
        text = text.strip()
        if not text:
            return cls.zero()
        return cls(dict(tuple(int(t) for t in part.split(":")) for part in text.split(",")))

    def __eq__(self, other):
        return isinstance(other, MultiIndex) and self._entries == other._entries

    def __hash__(self):
        return self._hash

    def __lt__(self, other):
        return self.sort_key() < other.sort_key()

    def __repr__(self):
        return f"MultiIndex({self.format() or '0'})"


def is_downward_closed(indices):
    """True iff every member keeps all its componentwise-smaller predecessors inside.

    It suffices to scan single decrements: for each nu and each j in its
    support, nu - e_j must also be a member.
    """
    members = set(indices)
    for nu in members:
        for j in nu.support:
            if nu.minus(j) not in members:
                return False
    return True


class IndexSet:
    """Ordered, monotone, downward-closed set of multi-indices plus its
    anchored-neighbor pool.

    The pool is grown constructively on each promotion: the step proposes
    the first index of the next inactive dimension together with all
    single-increments of the promoted index inside its own support, drops
    proposals already pooled, violating downward-closedness, or beyond the
    dimension budget, and removes the promoted index itself.
    """

    def __init__(self, d_max):
        if d_max < 1:
            raise ValueError("dimension budget must be >= 1")
        self.d_max = int(d_max)
        self.selected = []
        self.rejected = set()
        self.pool_size_history = []
        self._pool_set = set()
        self._pool_sorted = []
        self._members = set()
        self._warned_budget = False
        self.promote(MultiIndex.zero())

    def __len__(self):
        return len(self.selected)

    def __contains__(self, nu):
        return nu in self._members

    @property
    def pool(self):
        """Current anchored neighbors in deterministic order."""
        return tuple(self._pool_sorted)

    @property
    def j_active(self):
        """j(Lambda): the largest dimension active in the selected set."""
        return max((nu.max_dim for nu in self.selected), default=0)

    def admissible(self, nu):
        """True iff the selected set stays downward closed after adding nu."""
        return all(nu.minus(j) in self._members for j in nu.support)

    def promote(self, nu):
        """Move `nu` from the pool into the selected set and refresh the pool.

        The first promotion must be the null index; afterwards only current
        pool members are promotable.
        """
        if self.selected:
            if nu not in self._pool_set:
                raise ValueError(f"{nu!r} is not in the anchored-neighbor pool")
            self._pool_set.discard(nu)
            self._pool_sorted.remove(nu)
        elif nu != MultiIndex.zero():
            raise ValueError("the first selected index must be the null index")
        self.selected.append(nu)
        self._members.add(nu)

        j_lambda = self.j_active
        proposals = [nu.plus(j) for j in range(1, nu.max_dim + 1)]
        if j_lambda + 1 <= self.d_max:
            proposals.append(MultiIndex.unit(j_lambda + 1))
        elif not self._warned_budget:
            logger.warning(
                "dimension budget d_max=%d reached; not activating dimension %d",
                self.d_max, j_lambda + 1,
            )
            self._warned_budget = True

        for cand in proposals:
            if cand in self._pool_set or cand in self._members:
                continue
            if cand.max_dim > self.d_max:
                continue
            if not self.admissible(cand):
                self.rejected.add(cand)
                continue
            self.rejected.discard(cand)
            self._pool_set.add(cand)
            self._pool_sorted.append(cand)
        self._pool_sorted.sort(key=MultiIndex.sort_key)
        self.pool_size_history.append(len(self._pool_set))


def pool_size_bound_check(index_set):
    """Check the per-step pool growth bound: each promotion may enlarge the
    pool by at most the current selection count.

    The printed global n(n-1)/2 bound is off by a small constant for tiny n,
    so only the step recursion is asserted.
    """
    sizes = index_set.pool_size_history
    prev = 0
    for n, size in enumerate(sizes, start=1):
        if size > prev + n:
            return False
        prev = size
    return True
