"""Local objectives, aggregate states, and the quantities measured on them.

The global objective is ``F(x) = (1/m) sum_i f_(i)(x)`` where agent i privately
holds ``f_(i)``, assumed L_i-smooth and mu_i-strongly convex (mu_i = 0
allowed).  Aggregate matrices stack one row per agent, so a state is m-by-n
and the consensus violation of x is measured through the projector
``Pi = I - (1/m) 1 1^T`` as ``||Pi x||^2``.

Besides values and gradients this module provides the first-order quantities
used by the verification harness: the Bregman distance

    D_f(x, y) = (1/m) sum_i [ f_(i)(x) - f_(i)(y_i) - <grad f_(i)(y_i), x - y_i> ],

the inexact value ``f(ybar, y) = (1/m) sum_i [ f_(i)(y_i) +
<grad f_(i)(y_i), ybar - y_i> ]`` with its two-sided bounds on F, and a
high-precision optimum oracle.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .mixing import RoundCounter

OPTIMUM_TOL_QUADRATIC = 1e-12
OPTIMUM_TOL_LOGISTIC = 1e-10
OPTIMUM_RESIDUAL = 1e-10


@dataclass(frozen=True)
class LocalObjective:
    """One agent's private objective with cached curvature constants.

    ``kind`` is ``quadratic`` (f(x) = 0.5 x'Ax + b'x) or ``logistic``
    (mean log-loss over labeled rows plus a ridge term).  ``L_i`` and ``mu_i``
    are the largest / smallest curvature: the extreme eigenvalues of A for
    quadratics, and ``lam_max(X'X)/(4p) + ridge`` / ``ridge`` for logistic.
    """

    kind: str
    L_i: float
    mu_i: float
    quad_A: np.ndarray | None = None
    quad_b: np.ndarray | None = None
    data: np.ndarray | None = None
    labels: np.ndarray | None = None
    ridge: float = 0.0

    def value(self, x: np.ndarray) -> float:
        return float(self.value_many(np.asarray(x, dtype=float)[None, :])[0])

    def value_many(self, X: np.ndarray) -> np.ndarray:
        """Objective values at each row of X (P-by-n) -> (P,)."""
        X = np.asarray(X, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * np.einsum("pi,ij,pj->p", X, self.quad_A, X) + X @ self.quad_b
        margins = self.labels[:, None] * (self.data @ X.T)  # (p, P)
        loss = np.logaddexp(0.0, -margins).mean(axis=0)
        return loss + 0.5 * self.ridge * (X * X).sum(axis=1)

    def grad(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return self.quad_A @ x + self.quad_b
        margins = self.labels * (self.data @ x)  # (p,)
        # d/dm log(1+e^{-m}) = -sigmoid(-m)
        coeff = -self.labels / (1.0 + np.exp(margins))
        return self.data.T @ coeff / self.labels.shape[0] + self.ridge * x


def quadratic_objective(A: np.ndarray, b: np.ndarray) -> LocalObjective:
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    eigs = np.linalg.eigvalsh((A + A.T) / 2.0)
    return LocalObjective("quadratic", float(eigs[-1]), float(eigs[0]), quad_A=A, quad_b=b)


def logistic_objective(data: np.ndarray, labels: np.ndarray, ridge: float = 0.0) -> LocalObjective:
    data = np.asarray(data, dtype=float)
    labels = np.asarray(labels, dtype=float)
    p = data.shape[0]
    top = float(np.linalg.eigvalsh(data.T @ data)[-1])
    return LocalObjective("logistic", top / (4.0 * p) + ridge, float(ridge),
                          data=data, labels=labels, ridge=ridge)


@dataclass(frozen=True)
class ProblemInstance:
    """m local objectives with instance-level constants and the optimum oracle.

    ``L = max_i L_i`` and ``mu = min_i mu_i`` are the constants the step-size
    rules and theorem certificates use; ``x_star``/``F_star`` satisfy
    ``||(1/m) sum_i grad f_(i)(x_star)|| <= 1e-10``.
    """

    locals: tuple[LocalObjective, ...]
    n: int
    L: float
    mu: float
    x_star: np.ndarray | None = None
    F_star: float | None = None

    @property
    def m(self) -> int:
        return len(self.locals)

    def value(self, w: np.ndarray) -> float:
        return float(np.mean([f.value(w) for f in self.locals]))

    def value_many(self, X: np.ndarray) -> np.ndarray:
        """F at each row of X -> (P,)."""
        return np.mean([f.value_many(X) for f in self.locals], axis=0)

    def mean_gradient(self, w: np.ndarray) -> np.ndarray:
        return np.mean([f.grad(w) for f in self.locals], axis=0)


@dataclass(frozen=True)
class AggregateState:
    """Row-stacked m-by-n variables (x, y, z, s) of one algorithm instant.

    ``grad`` caches the aggregate gradient at the points that produced s (the
    tracking recursion needs the previous gradient each step).
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray

    grad: np.ndarray | None = None

    def __post_init__(self):
        shape = self.x.shape
        for name in ("y", "z", "s"):
            if getattr(self, name).shape != shape:
                raise ValueError(f"state field {name} has shape {getattr(self, name).shape}, expected {shape}")


def aggregate_gradient(problem: ProblemInstance, y: np.ndarray,
                       counter: RoundCounter | None = None) -> np.ndarray:
    """Row i = grad f_(i)(y_i); one parallel gradient round."""
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.m, problem.n):
        raise ValueError(f"state shape {y.shape} does not match problem ({problem.m}, {problem.n})")
    if counter is not None:
        counter.add_grad(1)
    return np.stack([f.grad(y[i]) for i, f in enumerate(problem.locals)])


def averages(state: AggregateState):
    """Column means (xbar, ybar, zbar, sbar) of the four aggregate matrices."""
    return (state.x.mean(axis=0), state.y.mean(axis=0),
            state.z.mean(axis=0), state.s.mean(axis=0))


def consensus_error(x: np.ndarray) -> float:
    """Squared disagreement ``||Pi x||^2`` (Frobenius, rows demeaned)."""
    x = np.asarray(x, dtype=float)
    centered = x - x.mean(axis=0, keepdims=True)
    return float((centered * centered).sum())


def bregman_distance(problem: ProblemInstance, x: np.ndarray, y: np.ndarray) -> float:
    """Averaged first-order residual D_f(x, y); nonnegative by convexity."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    for i, f in enumerate(problem.locals):
        gi = f.grad(y[i])
        total += f.value(x) - f.value(y[i]) - gi @ (x - y[i])
    return total / problem.m


def inexact_value(problem: ProblemInstance, ybar: np.ndarray, y: np.ndarray) -> float:
    """Linearized surrogate value ``(1/m) sum_i [f_(i)(y_i) + <grad_i, ybar - y_i>]``."""
    ybar = np.asarray(ybar, dtype=float)
    y = np.asarray(y, dtype=float)
    total = 0.0
    for i, f in enumerate(problem.locals):
        total += f.value(y[i]) + f.grad(y[i]) @ (ybar - y[i])
    return total / problem.m


def solve_optimum(problem: ProblemInstance, tol: float | None = None):
    """High-precision minimizer of F: direct solve for quadratic sums,
    accelerated gradient descent for logistic.

    Returns ``(x_star, F_star)`` with mean-gradient norm at most 1e-10;
    raises RuntimeError when the iterative path fails to reach ``tol``.
    """
    kinds = {f.kind for f in problem.locals}
    if kinds == {"quadratic"}:
        if tol is None:
            tol = OPTIMUM_TOL_QUADRATIC
        A_avg = np.mean([f.quad_A for f in problem.locals], axis=0)
        b_avg = np.mean([f.quad_b for f in problem.locals], axis=0)
        x_star = np.linalg.solve(A_avg, -b_avg)
    else:
        if tol is None:
            tol = OPTIMUM_TOL_LOGISTIC
        x_star = _agd_minimize(problem, tol)
    resid = float(np.linalg.norm(problem.mean_gradient(x_star)))
    if resid > OPTIMUM_RESIDUAL:
        raise RuntimeError(f"optimum residual {resid:.3e} exceeds {OPTIMUM_RESIDUAL:.0e}; "
                           "instance may be ill-conditioned")
    return x_star, problem.value(x_star)


def _agd_minimize(problem: ProblemInstance, tol: float, max_iters: int = 1_000_000) -> np.ndarray:
    """Centralized Nesterov descent on F until the gradient norm reaches tol."""
    L = problem.L
    mu = problem.mu
    x = np.zeros(problem.n)
    v = x.copy()
    if mu > 0:
        beta = (np.sqrt(L) - np.sqrt(mu)) / (np.sqrt(L) + np.sqrt(mu))
    theta = 1.0
    for _ in range(max_iters):
        g = problem.mean_gradient(v)
        if np.linalg.norm(g) <= tol:
            return v
        x_next = v - g / L
        if mu > 0:
            v = x_next + beta * (x_next - x)
        else:
            theta_next = theta * (np.sqrt(theta**2 + 4.0) - theta) / 2.0
            v = x_next + theta_next * (1.0 / theta - 1.0) * (x_next - x)
            theta = theta_next
        x = x_next
    raise RuntimeError(f"optimum solver did not reach tolerance {tol:.0e} "
                       f"within {max_iters} iterations")


def make_problem(locals_list, tol: float | None = None) -> ProblemInstance:
    """Assemble a ProblemInstance and fill in its optimum oracle."""
    locs = tuple(locals_list)
    if not locs:
        raise ValueError("need at least one local objective")
    n = (locs[0].quad_b if locs[0].kind == "quadratic" else locs[0].data[0]).shape[0]
    inst = ProblemInstance(locs, n, max(f.L_i for f in locs), min(f.mu_i for f in locs))
    x_star, F_star = solve_optimum(inst, tol)
    return dataclasses.replace(inst, x_star=x_star, F_star=F_star)


def random_quadratic_problem(m: int, n: int, L: float = 1.0, mu: float = 0.0,
                             seed: int = 0, shared_basis: bool = False) -> ProblemInstance:
    """Seeded random quadratic instance with exact global constants.

    Per-agent spectra are drawn and affinely mapped so that ``max_i L_i = L``
    and ``min_i mu_i = mu`` hold exactly.  ``shared_basis=True`` rotates every
    agent by the same orthogonal matrix, which keeps the averaged objective as
    ill-conditioned as the per-agent constants say (independent rotations
    average out toward isotropy); with ``mu = 0`` the smallest drawn eigenvalue
    maps to zero, making that agent's Hessian rank-deficient while the average
    stays invertible.
    """
    rng = np.random.default_rng(seed)
    base = np.geomspace(1.0, 100.0, n)
    spectra = np.stack([base * rng.uniform(0.3, 1.7, n) for _ in range(m)])
    lo, hi = spectra.min(), spectra.max()
    spectra = mu + (spectra - lo) * (L - mu) / (hi - lo)
    if shared_basis:
        Q = np.linalg.qr(rng.standard_normal((n, n)))[0]
        bases = [Q] * m
    else:
        bases = [np.linalg.qr(rng.standard_normal((n, n)))[0] for _ in range(m)]
    locs = []
    for i in range(m):
        A = bases[i] @ np.diag(spectra[i]) @ bases[i].T
        b = rng.standard_normal(n)
        locs.append(LocalObjective("quadratic", float(spectra[i].max()),
                                   float(spectra[i].min()), quad_A=A, quad_b=b))
    return make_problem(locs)


def random_logistic_problem(m: int, n: int, samples_per_agent: int = 20,
                            ridge: float = 0.0, seed: int = 0) -> ProblemInstance:
    """Two-class logistic instance on synthetic Gaussian blobs."""
    rng = np.random.default_rng(seed)
    center = rng.standard_normal(n)
    center *= 1.5 / np.linalg.norm(center)
    locs = []
    for _ in range(m):
        labels = np.where(rng.random(samples_per_agent) < 0.5, -1.0, 1.0)
        data = labels[:, None] * center + rng.standard_normal((samples_per_agent, n))
        locs.append(logistic_objective(data, labels, ridge))
    return make_problem(locs)
