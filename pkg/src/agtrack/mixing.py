"""Mixing operators for aggregate states: gossip, Chebyshev acceleration, multiple consensus.

One gossip round replaces each agent's row by a weighted neighbor average,
``x <- W x``.  Two accelerated wrappers trade extra rounds per call for a much
smaller effective contraction constant:

* Chebyshev acceleration (static symmetric W only) applies a degree-t
  Chebyshev polynomial of the Laplacian ``L = I - W`` so that
  ``t = ceil(1/sqrt(nu))`` rounds contract disagreement to a constant factor
  at most 0.65 independent of how close sigma is to 1.
* Multiple consensus (time-varying schedules) chains ``zeta`` consecutive
  schedule matrices; with ``zeta = ceil(gamma / (1 - sigma_gamma))`` the
  disagreement shrinks by at least 1/e per call.

Communication is accounted through a caller-owned RoundCounter so the
operators themselves stay pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .graph import GraphSchedule, MixingMatrix, metropolis_weights, sigma as sigma_of

SYMMETRY_TOL = 1e-12
# sigma below this is treated as exact consensus in one round: the Chebyshev
# constants degenerate (nu = 1 makes c2 blow up) and acceleration is pointless.
SIGMA_BYPASS_TOL = 1e-12


@dataclass
class RoundCounter:
    """Cumulative communication / gradient round counters owned by a run."""

    comm_rounds: int = 0
    grad_rounds: int = 0

    def add_comm(self, rounds: int = 1):
        self.comm_rounds += rounds

    def add_grad(self, rounds: int = 1):
        self.grad_rounds += rounds


@dataclass(frozen=True)
class ChebyshevOperator:
    """Degree-t Chebyshev polynomial accelerator for a symmetric mixing matrix.

    With ``L = I - W``, ``lambda1`` its largest eigenvalue, and
    ``nu = (1 - sigma) / lambda1``, the constants are

        c1 = (1 - sqrt(nu)) / (1 + sqrt(nu)),
        c2 = (1 + nu) / (1 - nu),
        c3 = 2 / (lambda1 + 1 - sigma),

    and applying the operator computes ``(I - P_t(c3 L)) x`` whose restriction
    to the disagreement subspace has norm at most ``2 c1^t / (1 + c1^(2t))``.
    ``bypass`` marks the degenerate sigma = 0 case where plain gossip with W
    already achieves consensus in a single round.
    """

    base_matrix: np.ndarray
    t: int
    nu: float
    c1: float
    c2: float
    c3: float
    lambda1: float
    bypass: bool = False


def chebyshev_operator(W, t: int | None = None) -> ChebyshevOperator:
    """Construct a ChebyshevOperator; t defaults to ``ceil(1/sqrt(nu))``."""
    M = W.entries if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    asym = np.abs(M - M.T).max()
    if asym > SYMMETRY_TOL:
        raise ValueError(f"Chebyshev acceleration needs a symmetric matrix (asymmetry {asym:.3e})")
    sig = sigma_of(M)
    lam = np.linalg.eigvalsh(np.eye(M.shape[0]) - M)
    # lambda1 <= 2 for doubly stochastic W; clip rounding overshoot.
    lambda1 = float(min(lam[-1], 2.0))
    if sig <= SIGMA_BYPASS_TOL:
        return ChebyshevOperator(M, 1, 1.0, 0.0, float("inf"), 1.0, lambda1, bypass=True)
    nu = (1.0 - sig) / lambda1
    if t is None:
        t = math.ceil(1.0 / math.sqrt(nu))
    if t < 1:
        raise ValueError("t must be at least 1")
    c1 = (1.0 - math.sqrt(nu)) / (1.0 + math.sqrt(nu))
    c2 = (1.0 + nu) / (1.0 - nu)
    c3 = 2.0 / (lambda1 + 1.0 - sig)
    return ChebyshevOperator(M, int(t), nu, c1, c2, c3, lambda1)


def gossip(W, x: np.ndarray, counter: RoundCounter | None = None) -> np.ndarray:
    """One communication round: returns W x."""
    M = W.entries if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    x = np.asarray(x, dtype=float)
    if M.shape[1] != x.shape[0]:
        raise ValueError(f"shape mismatch: W is {M.shape}, state has {x.shape[0]} rows")
    if counter is not None:
        counter.add_comm(1)
    return M @ x


def chebyshev_apply(op: ChebyshevOperator, x: np.ndarray,
                    counter: RoundCounter | None = None) -> np.ndarray:
    """Apply ``(I - P_t(c3 L)) x`` via the three-term Chebyshev recurrence.

    Runs ``a0 = 1, a1 = c2, z0 = x, z1 = c2 (I - c3 L) x`` and then
    ``a_{s+1} = 2 c2 a_s - a_{s-1}``, ``z^{s+1} = 2 c2 (I - c3 L) z^s - z^{s-1}``
    for s = 1..t-1, returning ``z^t / a_t``.  Costs t communication rounds and
    preserves the column means of x exactly.
    """
    x = np.asarray(x, dtype=float)
    if op.base_matrix.shape[1] != x.shape[0]:
        raise ValueError("state row count does not match the operator")
    if counter is not None:
        counter.add_comm(op.t)
    if op.bypass:
        return op.base_matrix @ x

    def damped(v):
        # (I - c3 L) v = v - c3 (v - W v); one neighbor exchange per call.
        return v - op.c3 * (v - op.base_matrix @ v)

    a_prev, a_cur = 1.0, op.c2
    z_prev, z_cur = x, op.c2 * damped(x)
    for _ in range(1, op.t):
        a_prev, a_cur = a_cur, 2.0 * op.c2 * a_cur - a_prev
        z_prev, z_cur = z_cur, 2.0 * op.c2 * damped(z_cur) - z_prev
    return z_cur / a_cur


def default_zeta(gamma: int, sigma_gamma: float) -> int:
    """Rounds per multiple-consensus call: ``ceil(gamma / (1 - sigma_gamma))``."""
    if not (0.0 <= sigma_gamma < 1.0):
        raise ValueError("sigma_gamma must lie in [0, 1)")
    return math.ceil(gamma / (1.0 - sigma_gamma))


def multiple_consensus(schedule: GraphSchedule, weight_rule, start_round: int,
                       zeta: int, x: np.ndarray,
                       counter: RoundCounter | None = None) -> tuple[np.ndarray, int]:
    """Chain zeta gossip rounds ``u^{t+1} = W^{start_round + t} u^t``.

    Returns ``(u^zeta, zeta)``.  With ``zeta = ceil(gamma / (1 - sigma_gamma))``
    on a gamma-connected schedule the disagreement norm contracts by at least
    a factor 1/e per call.
    """
    if zeta < 1:
        raise ValueError("zeta must be at least 1")
    rule = weight_rule if weight_rule is not None else metropolis_weights
    m = schedule.agent_count
    u = np.asarray(x, dtype=float)
    for t in range(zeta):
        W = rule(schedule.edge_set(start_round + t), m)
        u = (W.entries if isinstance(W, MixingMatrix) else np.asarray(W)) @ u
    if counter is not None:
        counter.add_comm(zeta)
    return u, zeta
