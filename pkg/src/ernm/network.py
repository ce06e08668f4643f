"""Network data model: graphs with categorical nodal attributes, and
observation patterns describing which parts of a network were sampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Variable", "Network", "ObservationPattern", "TraceEntry"]


class ConfigurationError(ValueError):
    """Raised when a network, model, or pattern is internally inconsistent."""


@dataclass(frozen=True)
class Variable:
    """A categorical nodal attribute with levels 0..levels-1."""

    name: str
    levels: int

    def __post_init__(self):
        if self.levels < 1:
            raise ConfigurationError(f"variable {self.name!r} needs >= 1 level")


def _as_locked(a):
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Network:
    """An immutable network: adjacency plus categorical nodal attributes.

    The adjacency is stored dense (n x n, uint8).  Undirected networks keep
    the matrix symmetric; queries of (j, i) and (i, j) agree by construction.
    Self-loops are forbidden.  ``attributes`` is an (n, K) integer matrix,
    column k holding values in [0, variables[k].levels).
    """

    n: int
    directed: bool
    adjacency: np.ndarray
    attributes: np.ndarray
    variables: tuple[Variable, ...]

    @classmethod
    def from_edges(cls, n, directed, edges=(), attributes=None, variables=()):
        """Build a network from an iterable of (i, j) node-index pairs."""
        variables = tuple(variables)
        adj = np.zeros((n, n), dtype=np.uint8)
        for i, j in edges:
            if not (0 <= i < n and 0 <= j < n):
                raise ConfigurationError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise ConfigurationError(f"self-loop ({i}, {i}) not allowed")
            adj[i, j] = 1
            if not directed:
                adj[j, i] = 1
        if attributes is None:
            attributes = np.zeros((n, len(variables)), dtype=np.int64)
        attributes = np.asarray(attributes, dtype=np.int64)
        if attributes.ndim == 1:
            attributes = attributes[:, None]
        return cls(n, directed, adj, attributes, variables)

    def __post_init__(self):
        adj = np.asarray(self.adjacency, dtype=np.uint8)
        attrs = np.asarray(self.attributes, dtype=np.int64)
        if attrs.ndim == 1:
            attrs = attrs[:, None]
        if adj.shape != (self.n, self.n):
            raise ConfigurationError(f"adjacency shape {adj.shape} != ({self.n}, {self.n})")
        if np.any(np.diag(adj)):
            raise ConfigurationError("self-loops present on the diagonal")
        if not self.directed and not np.array_equal(adj, adj.T):
            raise ConfigurationError("undirected adjacency must be symmetric")
        if attrs.shape[0] != self.n or attrs.shape[1] != len(self.variables):
            raise ConfigurationError(
                f"attribute matrix shape {attrs.shape} does not match "
                f"n={self.n}, K={len(self.variables)}"
            )
        for k, var in enumerate(self.variables):
            col = attrs[:, k]
            if col.size and (col.min() < 0 or col.max() >= var.levels):
                raise ConfigurationError(
                    f"attribute {var.name!r} has values outside [0, {var.levels - 1}]"
                )
        object.__setattr__(self, "adjacency", _as_locked(adj))
        object.__setattr__(self, "attributes", _as_locked(attrs))

    # -- queries ---------------------------------------------------------

    @property
    def n_variables(self):
        return len(self.variables)

    @property
    def dyad_count(self):
        """Number of dyads in the sample space."""
        return self.n * (self.n - 1) if self.directed else self.n * (self.n - 1) // 2

    @property
    def edge_count(self):
        s = int(self.adjacency.sum())
        return s if self.directed else s // 2

    def has_edge(self, i, j):
        return bool(self.adjacency[i, j])

    def edge_set(self):
        """Edges as a set of pairs; canonical (i < j) for undirected networks."""
        ii, jj = np.nonzero(self.adjacency)
        if self.directed:
            return {(int(i), int(j)) for i, j in zip(ii, jj)}
        return {(int(i), int(j)) for i, j in zip(ii, jj) if i < j}

    def dyads(self):
        """All dyads of the sample space, in canonical order."""
        if self.directed:
            return [(i, j) for i in range(self.n) for j in range(self.n) if i != j]
        return [(i, j) for i in range(self.n) for j in range(i + 1, self.n)]

    def variable_index(self, variable):
        if isinstance(variable, str):
            for k, v in enumerate(self.variables):
                if v.name == variable:
                    return k
            raise ConfigurationError(f"no variable named {variable!r}")
        k = int(variable)
        if not 0 <= k < len(self.variables):
            raise ConfigurationError(f"variable index {k} out of range")
        return k

    def group_count(self, variable, level):
        k = self.variable_index(variable)
        return int(np.count_nonzero(self.attributes[:, k] == level))

    # -- copy-on-write edits (return new networks) -----------------------

    def with_toggled_dyad(self, i, j):
        adj = np.array(self.adjacency)
        adj[i, j] ^= 1
        if not self.directed:
            adj[j, i] ^= 1
        return Network(self.n, self.directed, adj, self.attributes, self.variables)

    def with_attribute(self, node, variable, level):
        k = self.variable_index(variable)
        attrs = np.array(self.attributes)
        attrs[node, k] = level
        return Network(self.n, self.directed, self.adjacency, attrs, self.variables)

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (
            self.n == other.n
            and self.directed == other.directed
            and self.variables == other.variables
            and np.array_equal(self.adjacency, other.adjacency)
            and np.array_equal(self.attributes, other.attributes)
        )


@dataclass(frozen=True)
class TraceEntry:
    """One sampled unit in a link-tracing record.

    ``kind`` is "node" or "dyad"; ``target`` is a node index or an (i, j)
    pair; ``time`` is the global sample-time index of the observation.
    """

    kind: str
    target: object
    time: int


@dataclass(frozen=True)
class ObservationPattern:
    """Which dyads and attribute entries of a network were observed.

    ``dyad_observed`` is an (n, n) boolean matrix (diagonal ignored,
    symmetric for undirected networks); ``attr_observed`` is (n, K).
    ``trace`` optionally records an ordered link-tracing history as a tuple
    of waves, each wave a tuple of :class:`TraceEntry`.
    """

    dyad_observed: np.ndarray
    attr_observed: np.ndarray
    trace: tuple = None

    @classmethod
    def fully_observed(cls, n, n_variables, directed=True):
        return cls(
            np.ones((n, n), dtype=bool),
            np.ones((n, n_variables), dtype=bool),
        )

    @classmethod
    def all_attrs_missing(cls, n, n_variables, variable=None):
        """Graph fully observed, attribute values missing.

        With ``variable`` given, only that column is missing; otherwise all.
        """
        attr_obs = np.zeros((n, n_variables), dtype=bool) if variable is None else None
        if variable is not None:
            attr_obs = np.ones((n, n_variables), dtype=bool)
            attr_obs[:, variable] = False
        return cls(np.ones((n, n), dtype=bool), attr_obs)

    def __post_init__(self):
        dy = np.asarray(self.dyad_observed, dtype=bool)
        at = np.asarray(self.attr_observed, dtype=bool)
        if at.ndim == 1:
            at = at[:, None]
        if dy.ndim != 2 or dy.shape[0] != dy.shape[1]:
            raise ConfigurationError("dyad mask must be square")
        if at.shape[0] != dy.shape[0]:
            raise ConfigurationError("attribute mask rows must match node count")
        object.__setattr__(self, "dyad_observed", _as_locked(dy))
        object.__setattr__(self, "attr_observed", _as_locked(at))
        if self.trace is not None:
            trace = tuple(tuple(wave) for wave in self.trace)
            object.__setattr__(self, "trace", trace)
            self._check_trace()

    def _check_trace(self):
        for wave in self.trace:
            for entry in wave:
                if entry.kind == "node":
                    if not self.attr_observed[entry.target].all():
                        raise ConfigurationError(
                            f"trace references node {entry.target} with unobserved attributes"
                        )
                elif entry.kind == "dyad":
                    i, j = entry.target
                    if not self.dyad_observed[i, j]:
                        raise ConfigurationError(
                            f"trace references unobserved dyad ({i}, {j})"
                        )
                else:
                    raise ConfigurationError(f"unknown trace entry kind {entry.kind!r}")

    @property
    def n(self):
        return self.dyad_observed.shape[0]

    def validate_for(self, net: Network):
        if self.dyad_observed.shape != (net.n, net.n):
            raise ConfigurationError("dyad mask does not match network size")
        if self.attr_observed.shape != (net.n, net.n_variables):
            raise ConfigurationError("attribute mask does not match network attributes")
        if not net.directed:
            if not np.array_equal(self.dyad_observed, self.dyad_observed.T):
                raise ConfigurationError("undirected dyad mask must be symmetric")

    def unobserved_dyads(self, directed):
        """Unobserved dyads in canonical order (i < j when undirected)."""
        n = self.n
        out = []
        for i in range(n):
            for j in range(n):
                if i == j or (not directed and j < i):
                    continue
                if not self.dyad_observed[i, j]:
                    out.append((i, j))
        return out

    def unobserved_attrs(self):
        ii, kk = np.nonzero(~self.attr_observed)
        return list(zip(ii.tolist(), kk.tolist()))

    def n_unobserved(self, directed):
        return len(self.unobserved_dyads(directed)) + len(self.unobserved_attrs())

    def is_fully_observed(self, directed):
        return self.n_unobserved(directed) == 0
