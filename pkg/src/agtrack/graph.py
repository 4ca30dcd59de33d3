"""Graph schedules, Metropolis mixing matrices, and spectral mixing constants.

A network of ``m`` agents communicates through a (possibly time-varying)
sequence of undirected graphs.  Each instant ``k`` contributes an edge set
``E^k`` from which a doubly stochastic mixing matrix ``W^k`` is built with the
Metropolis rule

    W_ij = 1 / (1 + max(d_i, d_j))   for (i, j) in E^k,
    W_ii = 1 - sum_{j in N_i} W_ij.

Mixing quality is measured by the deflated spectral norm
``sigma = ||W - (1/m) 1 1^T||_2`` and, for time-varying schedules, by its
``gamma``-step analogue ``sigma_gamma = sup_k ||W^{k,gamma} - (1/m) 1 1^T||_2``
where ``W^{k,gamma} = W^k W^{k-1} ... W^{k-gamma+1}``.  Consensus is possible
whenever the union of any ``gamma`` consecutive edge sets is connected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Double-stochasticity tolerances: tight for matrices we build ourselves,
# looser when accepting user-supplied matrices.
DS_BUILD_TOL = 1e-12
DS_INPUT_TOL = 1e-9

EdgeSet = tuple[tuple[int, int], ...]


def _canonical_edges(edges, m: int) -> EdgeSet:
    """Validate, orient as (min, max), and deduplicate an undirected edge set."""
    canon = set()
    for edge in edges:
        i, j = int(edge[0]), int(edge[1])
        if i == j:
            raise ValueError(f"self-loop ({i}, {j}) not allowed; self-weights are implicit")
        if not (0 <= i < m and 0 <= j < m):
            raise ValueError(f"edge ({i}, {j}) out of range for {m} agents")
        canon.add((min(i, j), max(i, j)))
    return tuple(sorted(canon))


@dataclass(frozen=True)
class GraphSchedule:
    """A total function ``k -> E^k`` over m agents with a replay rule.

    ``schedule_kind`` is one of ``static`` (one edge set forever), ``cyclic``
    (a finite list replayed with its period), or ``seeded_random`` (each
    instant draws an Erdos-Renyi edge set reproducibly from ``(seed, k)``).
    """

    agent_count: int
    schedule_kind: str
    edge_sets: tuple[EdgeSet, ...] | None = None
    edge_probability: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.agent_count <= 0:
            raise ValueError("agent_count must be positive")
        if self.schedule_kind not in ("static", "cyclic", "seeded_random"):
            raise ValueError(f"unknown schedule_kind {self.schedule_kind!r}")
        if self.schedule_kind in ("static", "cyclic"):
            if not self.edge_sets:
                raise ValueError(f"{self.schedule_kind} schedule requires explicit edge sets")
            if self.schedule_kind == "static" and len(self.edge_sets) != 1:
                raise ValueError("static schedule takes exactly one edge set")
        else:
            if self.edge_probability is None or not (0.0 <= self.edge_probability <= 1.0):
                raise ValueError("seeded_random schedule requires edge_probability in [0, 1]")
            if self.seed is None:
                raise ValueError("seeded_random schedule requires a seed")

    @classmethod
    def static(cls, m: int, edges) -> "GraphSchedule":
        return cls(m, "static", ( _canonical_edges(edges, m), ))

    @classmethod
    def cyclic(cls, m: int, edge_sets) -> "GraphSchedule":
        sets = tuple(_canonical_edges(e, m) for e in edge_sets)
        return cls(m, "cyclic", sets)

    @classmethod
    def seeded_random(cls, m: int, edge_probability: float, seed: int) -> "GraphSchedule":
        return cls(m, "seeded_random", None, edge_probability, seed)

    @property
    def period(self) -> int | None:
        """Replay period: 1 for static, len(edge_sets) for cyclic, None for random."""
        if self.schedule_kind == "static":
            return 1
        if self.schedule_kind == "cyclic":
            return len(self.edge_sets)
        return None

    def edge_set(self, k: int) -> EdgeSet:
        """The edge set active at instant k (total for all k >= 0)."""
        if k < 0:
            raise ValueError("instant index must be nonnegative")
        if self.schedule_kind == "static":
            return self.edge_sets[0]
        if self.schedule_kind == "cyclic":
            return self.edge_sets[k % len(self.edge_sets)]
        # Reproducible per-instant draw: the stream is keyed by (seed, k) so
        # edge_set(k) never depends on evaluation order.
        rng = np.random.default_rng((self.seed, k))
        m = self.agent_count
        iu, ju = np.triu_indices(m, 1)
        mask = rng.random(iu.shape[0]) < self.edge_probability
        return tuple(zip(iu[mask].tolist(), ju[mask].tolist()))


@dataclass(frozen=True)
class MixingMatrix:
    """A doubly stochastic m-by-m matrix tied to the edge set it was built from."""

    entries: np.ndarray
    source_edge_set: EdgeSet | None = None

    @property
    def m(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class SpectralReport:
    """Computed mixing constants for a schedule.

    ``sigma`` is the single-step constant (max over the examined instants);
    ``sigma_gamma`` the gamma-step product constant.  ``is_estimate`` flags a
    finite-horizon sample of a supremum that is exact only for periodic
    schedules.
    """

    sigma: float
    sigma_gamma: float
    gamma: int
    horizon_used: int
    is_estimate: bool


def _entries(W) -> np.ndarray:
    return W.entries if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)


def _check_doubly_stochastic(W: np.ndarray, tol: float):
    m = W.shape[0]
    if W.shape != (m, m):
        raise ValueError("mixing matrix must be square")
    dev = max(np.abs(W.sum(axis=0) - 1.0).max(), np.abs(W.sum(axis=1) - 1.0).max())
    if dev > tol:
        raise ValueError(f"matrix is not doubly stochastic (max row/col sum deviation {dev:.3e})")


def metropolis_weights(edge_set, m: int) -> MixingMatrix:
    """Build the Metropolis mixing matrix for one edge set.

    Off-diagonal weights are ``1 / (1 + max(d_i, d_j))`` for neighbors and the
    diagonal absorbs the remainder, which yields a symmetric doubly stochastic
    matrix with positive diagonal for any undirected graph.
    """
    if m <= 0:
        raise ValueError("m must be positive")
    edges = _canonical_edges(edge_set, m)
    deg = np.zeros(m, dtype=int)
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    W = np.zeros((m, m))
    for i, j in edges:
        w = 1.0 / (1.0 + max(deg[i], deg[j]))
        W[i, j] = w
        W[j, i] = w
    for i in range(m):
        W[i, i] = 1.0 - W[i].sum()
    _check_doubly_stochastic(W, DS_BUILD_TOL)
    return MixingMatrix(W, edges)


def sigma(W) -> float:
    """Deflated spectral norm ``||W - (1/m) 1 1^T||_2`` of a doubly stochastic W.

    Equals the second largest singular value of W; strictly below 1 exactly
    when one round of gossip contracts disagreement.
    """
    M = _entries(W)
    _check_doubly_stochastic(M, DS_INPUT_TOL)
    m = M.shape[0]
    val = np.linalg.norm(M - np.ones((m, m)) / m, 2)
    # Doubly stochastic matrices have singular values at most 1; trim rounding.
    return float(min(max(val, 0.0), 1.0))


def matrix_product_window(schedule: GraphSchedule, weight_rule, k: int, gamma: int) -> MixingMatrix:
    """Ordered product ``W^k W^{k-1} ... W^{k-gamma+1}`` of schedule matrices.

    ``gamma = 0`` returns the identity.  ``weight_rule`` maps
    ``(edge_set, m)`` to a MixingMatrix; None selects Metropolis weights.
    """
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if k < gamma - 1:
        raise ValueError(f"need k >= gamma - 1 (got k={k}, gamma={gamma})")
    rule = weight_rule if weight_rule is not None else metropolis_weights
    m = schedule.agent_count
    P = np.eye(m)
    for r in range(k - gamma + 1, k + 1):
        P = _entries(rule(schedule.edge_set(r), m)) @ P
    return MixingMatrix(P, schedule.edge_set(k) if gamma > 0 else ())


def _union_connected(edge_sets, m: int) -> bool:
    """Breadth-first connectivity of the union graph over the given edge sets."""
    if m == 1:
        return True
    adj = [[] for _ in range(m)]
    for edges in edge_sets:
        for i, j in edges:
            adj[i].append(j)
            adj[j].append(i)
    seen = np.zeros(m, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    return bool(seen.all())


def gamma_connectivity(schedule: GraphSchedule, gamma: int, horizon: int | None = None) -> bool:
    """Whether the union of every gamma consecutive edge sets is connected.

    For static and cyclic schedules one period of window starts is checked and
    the verdict is exact; for seeded_random schedules window starts up to
    ``horizon - gamma`` are sampled (default horizon 1000).
    """
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    period = schedule.period
    if horizon is None:
        horizon = gamma + (period - 1 if period is not None else 1000 - gamma)
    if horizon < gamma:
        raise ValueError("horizon must be at least gamma")
    last_start = horizon - gamma
    if period is not None:
        last_start = min(last_start, period - 1)
    for k in range(last_start + 1):
        window = [schedule.edge_set(r) for r in range(k, k + gamma)]
        if not _union_connected(window, schedule.agent_count):
            return False
    return True


def sigma_gamma(schedule: GraphSchedule, gamma: int, weight_rule=None,
                horizon: int | None = None) -> SpectralReport:
    """Gamma-step mixing constant ``sup_k ||W^{k,gamma} - (1/m) 1 1^T||_2``.

    Static schedules give the exact ``||W^gamma - J/m||_2``; cyclic schedules
    take the exact max over one full period of start instants; seeded_random
    schedules sample ``k in [gamma-1, horizon]`` and flag the result as an
    estimate.
    """
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    rule = weight_rule if weight_rule is not None else metropolis_weights
    m = schedule.agent_count
    J = np.ones((m, m)) / m
    period = schedule.period

    if schedule.schedule_kind == "static":
        W = _entries(rule(schedule.edge_set(0), m))
        sig_g = np.linalg.norm(np.linalg.matrix_power(W, gamma) - J, 2)
        sig_1 = sigma(W)
        return SpectralReport(sig_1, float(min(max(sig_g, 0.0), 1.0)), gamma,
                              horizon_used=gamma - 1, is_estimate=False)

    if schedule.schedule_kind == "cyclic":
        ks = range(gamma - 1, gamma - 1 + period)
        is_estimate = False
        horizon_used = gamma - 2 + period
    else:
        if horizon is None:
            horizon = 1000
        if horizon < gamma:
            raise ValueError("horizon must be at least gamma")
        ks = range(gamma - 1, horizon + 1)
        is_estimate = True
        horizon_used = horizon

    sig_g = 0.0
    sig_1 = 0.0
    for k in ks:
        P = matrix_product_window(schedule, rule, k, gamma).entries
        sig_g = max(sig_g, np.linalg.norm(P - J, 2))
        sig_1 = max(sig_1, sigma(rule(schedule.edge_set(k), m)))
    return SpectralReport(float(min(sig_1, 1.0)), float(min(max(sig_g, 0.0), 1.0)),
                          gamma, horizon_used, is_estimate)
