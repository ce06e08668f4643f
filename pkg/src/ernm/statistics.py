"""Sufficient statistics for the simple homophily model.

Terms: edge count, per-level group counts, and regularized homophily
h(y, x) = sum_i [ sqrt(d_i) - E(sqrt(D_i)) ], where d_i counts edges
between node i and nodes sharing its group, and the centering expectation
holds the graph and the group sizes fixed, assumes attribute/graph
independence, and conditions on node i's own group membership.  The
centering makes h average to zero exactly over all label assignments with
the given group sizes.

For binary edge multiplicity (undirected graphs) the same-group partner
count is hypergeometric and the expectation is summed exactly.  For
directed graphs a partner can contribute two edges (one each way); the
count is then a sum over a bivariate hypergeometric draw, also summed
exactly.  A Monte Carlo permutation estimate of the centering is available
as an alternative evaluation mode for cross-checking.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.special import gammaln

from .network import ConfigurationError, Network

__all__ = [
    "EdgeCountTerm",
    "GroupCountTerm",
    "RegularizedHomophilyTerm",
    "ModelSpec",
    "DyadToggle",
    "AttrChange",
    "compute_statistics",
    "change_statistics",
    "regularized_homophily",
    "simple_homophily_spec",
]


# ---------------------------------------------------------------------------
# statistic terms


@dataclass(frozen=True)
class EdgeCountTerm:
    dim = 1

    def label(self, net):
        return ("edges",)


@dataclass(frozen=True)
class GroupCountTerm:
    variable: int
    level: int
    dim = 1

    def label(self, net):
        return (f"count.{net.variables[self.variable].name}.{self.level}",)


@dataclass(frozen=True)
class RegularizedHomophilyTerm:
    variable: int
    # "exact": hypergeometric summation of the centering term (default).
    # "mc": frozen-permutation Monte Carlo estimate (see HomophilyContext).
    method: str = "exact"
    dim = 1

    def label(self, net):
        return (f"homophily.{net.variables[self.variable].name}",)


@dataclass(frozen=True)
class ModelSpec:
    """Ordered statistic terms plus natural parameters."""

    terms: tuple
    eta: np.ndarray

    def __post_init__(self):
        terms = tuple(self.terms)
        eta = np.asarray(self.eta, dtype=np.float64)
        q = sum(t.dim for t in terms)
        if eta.shape != (q,):
            raise ConfigurationError(f"eta has length {eta.size}, expected q={q}")
        eta = np.ascontiguousarray(eta)
        eta.flags.writeable = False
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "eta", eta)

    @property
    def q(self):
        return sum(t.dim for t in self.terms)

    def with_eta(self, eta):
        return replace(self, eta=np.asarray(eta, dtype=np.float64))

    def labels(self, net):
        out = []
        for t in self.terms:
            out.extend(t.label(net))
        return out

    def validate_for(self, net: Network):
        """Check term references against a network's attribute schema."""
        gc_levels = {}
        for t in self.terms:
            if isinstance(t, (GroupCountTerm, RegularizedHomophilyTerm)):
                if not 0 <= t.variable < net.n_variables:
                    raise ConfigurationError(f"term references missing variable {t.variable}")
            if isinstance(t, GroupCountTerm):
                m = net.variables[t.variable].levels
                if not 0 <= t.level < m:
                    raise ConfigurationError(
                        f"group-count level {t.level} out of range for "
                        f"{net.variables[t.variable].name!r} ({m} levels)"
                    )
                gc_levels.setdefault(t.variable, []).append(t.level)
        for var, levels in gc_levels.items():
            m = net.variables[var].levels
            if sorted(levels) != list(range(m - 1)):
                raise ConfigurationError(
                    f"group-count block on variable {var} must cover levels 0..{m - 2} "
                    f"exactly once (last level dropped); got {sorted(levels)}"
                )

    def homophily_variables(self):
        return sorted({t.variable for t in self.terms if isinstance(t, RegularizedHomophilyTerm)})

    def active_variables(self):
        """Variables referenced by any term."""
        out = set()
        for t in self.terms:
            if isinstance(t, (GroupCountTerm, RegularizedHomophilyTerm)):
                out.add(t.variable)
        return sorted(out)


def simple_homophily_spec(net, variable, eta=None):
    """Edges + homophily on ``variable`` + group counts for levels 0..m-2."""
    k = net.variable_index(variable)
    m = net.variables[k].levels
    terms = [EdgeCountTerm(), RegularizedHomophilyTerm(k)]
    terms += [GroupCountTerm(k, l) for l in range(m - 1)]
    if eta is None:
        eta = np.zeros(len(terms))
    return ModelSpec(tuple(terms), eta)


# ---------------------------------------------------------------------------
# moves


@dataclass(frozen=True)
class DyadToggle:
    i: int
    j: int


@dataclass(frozen=True)
class AttrChange:
    node: int
    variable: int
    level: int


# ---------------------------------------------------------------------------
# centering expectations

def _log_choose(lgam, a, b):
    return lgam[a] - lgam[b] - lgam[a - b]


def expected_sqrt_hypergeometric(n_pop, n_success, n_draw):
    """E[sqrt(A)] for A ~ Hypergeometric(n_pop, n_success, n_draw), exactly."""
    if n_draw <= 0 or n_success <= 0:
        return 0.0
    lgam = gammaln(np.arange(n_pop + 2) + 1.0)
    lo = max(0, n_draw + n_success - n_pop)
    hi = min(n_success, n_draw)
    a = np.arange(lo, hi + 1)
    logp = (
        _log_choose(lgam, n_success, a)
        + _log_choose(lgam, n_pop - n_success, n_draw - a)
        - _log_choose(lgam, n_pop, n_draw)
    )
    return float(np.sum(np.exp(logp) * np.sqrt(a)))


def expected_sqrt_bivariate(n_pop, n_two, n_one, n_draw):
    """E[sqrt(2A + B)] where (A, B) counts how many of ``n_draw`` unordered
    draws (without replacement, from a population of ``n_pop``) land on the
    ``n_two`` items of weight two and the ``n_one`` items of weight one."""
    if n_draw <= 0 or (n_two + n_one) == 0:
        return 0.0
    lgam = gammaln(np.arange(n_pop + 2) + 1.0)
    rest = n_pop - n_two - n_one
    denom = _log_choose(lgam, n_pop, n_draw)
    total = 0.0
    for a in range(0, min(n_two, n_draw) + 1):
        for b in range(0, min(n_one, n_draw - a) + 1):
            c = n_draw - a - b
            if c > rest:
                continue
            logp = (
                _log_choose(lgam, n_two, a)
                + _log_choose(lgam, n_one, b)
                + _log_choose(lgam, rest, c)
                - denom
            )
            total += np.exp(logp) * np.sqrt(2 * a + b)
    return float(total)


def _edge_multiplicity(net):
    """Per-pair edge multiplicity matrix: y_ij + y_ji (directed) or y_ij."""
    adj = net.adjacency.astype(np.int64)
    return adj + adj.T if net.directed else adj


def _partner_counts(mult, x, m):
    """cnt[i, k] = total edge multiplicity between i and nodes with label k."""
    n = mult.shape[0]
    cnt = np.zeros((n, m), dtype=np.int64)
    for k in range(m):
        cnt[:, k] = mult[:, x == k].sum(axis=1)
    return cnt


def _centering_exact(net, mult, node, k, group_sizes):
    """E(sqrt(d_{node,k})) given the graph, group sizes, and X_node = k."""
    n = net.n
    draw = group_sizes[k] - 1
    if net.directed:
        row = mult[node]
        d2 = int(np.count_nonzero(row == 2))
        d1 = int(np.count_nonzero(row == 1))
        return expected_sqrt_bivariate(n - 1, d2, d1, draw)
    d = int(mult[node].sum())
    return expected_sqrt_hypergeometric(n - 1, d, draw)


@dataclass(frozen=True)
class HomophilyContext:
    """Evaluation context for the Monte Carlo centering path.

    The permutation draws come from a dedicated seeded stream and are fixed
    for the lifetime of the context, so repeated evaluations within one fit
    see one deterministic statistic.
    """

    seed: int = 0
    permutations: int = 2000


def _centering_mc_all(net, mult, x, m, ctx: HomophilyContext):
    """MC estimate of E(sqrt(d_{i,k}) | X_i = k) for every (i, k).

    Uses label permutations with the observed group sizes; draws for (i, k)
    are the permutations that assign label k to node i.
    """
    rng = np.random.default_rng(np.random.SeedSequence([0x68F7, ctx.seed]))
    n = net.n
    sums = np.zeros((n, m))
    hits = np.zeros((n, m), dtype=np.int64)
    labels = np.array(x)
    for _ in range(ctx.permutations):
        perm = rng.permutation(labels)
        cnt = _partner_counts(mult, perm, m)
        for i in range(n):
            k = perm[i]
            sums[i, k] += np.sqrt(cnt[i, k])
            hits[i, k] += 1
    with np.errstate(invalid="ignore"):
        est = sums / hits
    return np.nan_to_num(est, nan=0.0)


def regularized_homophily(net, variable, method="exact", context=None):
    """h(y, x) for one categorical variable."""
    k = net.variable_index(variable)
    m = net.variables[k].levels
    x = net.attributes[:, k]
    mult = _edge_multiplicity(net)
    group_sizes = np.bincount(x, minlength=m)
    d_same = np.array([mult[i, x == x[i]].sum() for i in range(net.n)], dtype=np.int64)
    total = float(np.sqrt(d_same).sum())
    if method == "exact":
        for i in range(net.n):
            total -= _centering_exact(net, mult, i, x[i], group_sizes)
    elif method == "mc":
        ctx = context or HomophilyContext()
        est = _centering_mc_all(net, mult, x, m, ctx)
        total -= float(est[np.arange(net.n), x].sum())
    else:
        raise ConfigurationError(f"unknown homophily method {method!r}")
    return total


# ---------------------------------------------------------------------------
# statistic evaluation


def compute_statistics(net: Network, spec: ModelSpec, context=None):
    """Evaluate the statistic vector g(t)."""
    spec.validate_for(net)
    out = np.empty(spec.q)
    pos = 0
    for t in spec.terms:
        if isinstance(t, EdgeCountTerm):
            out[pos] = net.edge_count
        elif isinstance(t, GroupCountTerm):
            out[pos] = net.group_count(t.variable, t.level)
        elif isinstance(t, RegularizedHomophilyTerm):
            out[pos] = regularized_homophily(net, t.variable, t.method, context)
        else:
            raise ConfigurationError(f"unknown term {t!r}")
        pos += t.dim
    return out


def _homophily_delta_exact(net, var, move):
    """Incremental change of the exact-centering homophily term."""
    m = net.variables[var].levels
    x = net.attributes[:, var]
    mult = _edge_multiplicity(net)
    sizes = np.bincount(x, minlength=m)
    n = net.n

    def node_term(mult_, sizes_, x_, i):
        d_same = int(mult_[i, x_ == x_[i]].sum())
        e = _centering_exact(net, mult_, i, x_[i], sizes_)
        return np.sqrt(d_same) - e

    if isinstance(move, DyadToggle):
        i, j = move.i, move.j
        delta_m = -1 if net.has_edge(i, j) else 1
        mult2 = np.array(mult)
        mult2[i, j] += delta_m
        mult2[j, i] += delta_m
        out = 0.0
        for node in (i, j):
            out += node_term(mult2, sizes, x, node) - node_term(mult, sizes, x, node)
        return out

    node, lnew = move.node, move.level
    lold = x[node]
    if lnew == lold:
        return 0.0
    x2 = np.array(x)
    x2[node] = lnew
    sizes2 = np.array(sizes)
    sizes2[lold] -= 1
    sizes2[lnew] += 1
    out = node_term(mult, sizes2, x2, node) - node_term(mult, sizes, x, node)
    for other in range(n):
        if other == node or x[other] not in (lold, lnew):
            continue
        out += node_term(mult, sizes2, x2, other) - node_term(mult, sizes, x, other)
    return out


def change_statistics(net: Network, spec: ModelSpec, move):
    """g(t_after) - g(t_before) for a dyad toggle or attribute change.

    Computed incrementally; agrees exactly with applying the move and
    re-evaluating.  Requires exact-centering homophily terms.
    """
    spec.validate_for(net)
    if isinstance(move, DyadToggle):
        i, j = move.i, move.j
        if not (0 <= i < net.n and 0 <= j < net.n) or i == j:
            raise ConfigurationError(f"invalid dyad toggle ({i}, {j})")
    elif isinstance(move, AttrChange):
        k = net.variable_index(move.variable)
        if not 0 <= move.node < net.n:
            raise ConfigurationError(f"invalid node {move.node}")
        if not 0 <= move.level < net.variables[k].levels:
            raise ConfigurationError(f"invalid level {move.level}")
        if move.level == net.attributes[move.node, k]:
            raise ConfigurationError("attribute change must pick a new level")
        move = AttrChange(move.node, k, move.level)
    else:
        raise ConfigurationError(f"unknown move {move!r}")

    out = np.zeros(spec.q)
    pos = 0
    for t in spec.terms:
        if isinstance(t, EdgeCountTerm):
            if isinstance(move, DyadToggle):
                out[pos] = -1.0 if net.has_edge(move.i, move.j) else 1.0
        elif isinstance(t, GroupCountTerm):
            if isinstance(move, AttrChange) and t.variable == move.variable:
                lold = net.attributes[move.node, t.variable]
                if t.level == move.level:
                    out[pos] = 1.0
                elif t.level == lold:
                    out[pos] = -1.0
        elif isinstance(t, RegularizedHomophilyTerm):
            if t.method != "exact":
                raise ConfigurationError(
                    "change statistics require exact-centering homophily terms"
                )
            relevant = isinstance(move, DyadToggle) or t.variable == move.variable
            if relevant:
                out[pos] = _homophily_delta_exact(net, t.variable, move)
        pos += t.dim
    return out


def apply_move(net: Network, move):
    """Return the network with the move applied."""
    if isinstance(move, DyadToggle):
        return net.with_toggled_dyad(move.i, move.j)
    if isinstance(move, AttrChange):
        return net.with_attribute(move.node, move.variable, move.level)
    raise ConfigurationError(f"unknown move {move!r}")
