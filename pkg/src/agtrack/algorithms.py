"""Gradient tracking, accelerated gradient tracking, and the run orchestrator.

Plain gradient tracking keeps, next to the decision rows x, an auxiliary
aggregate s whose rows track the average gradient:

    s^k = W s^{k-1} + grad f(x^k) - grad f(x^{k-1}),
    x^{k+1} = W x^k - alpha s^k.

The accelerated variant interleaves the tracking recursion with a Nesterov
three-point scheme (rows y, z, x; W1/W2/W3 may differ per instant on
time-varying schedules):

    y^k     = theta_k z^k + (1 - theta_k) x^k,
    s^k     = W1^k s^{k-1} + grad f(y^k) - grad f(y^{k-1}),
    z^{k+1} = (1 + mu alpha / theta_k)^{-1}
              (W2^k (mu alpha / theta_k y^k + z^k) - alpha / theta_k s^k),
    x^{k+1} = theta_k z^{k+1} + (1 - theta_k) W3^k x^k,

initialized at a consensual x^0 = y^0 = z^0 with s^0 = grad f(y^0).  The
generic k = 0 step then already reproduces the special-cased first iterates
z^1 = W z^0 - alpha/(theta_0 + mu alpha) s^0, so the loop is uniform.

For mu = 0 the momentum sequence follows theta_0 = 1 and
(1 - theta_k)/theta_k^2 = 1/theta_{k-1}^2, giving F(xbar^K) - F* = O(1/K^2);
for mu > 0 a constant theta = sqrt(mu alpha)/2 gives a linear rate.  The
step-size rules proved for the four settings are exposed as
``default_alpha``; column means of the distributed iterates follow the
inexact centralized accelerated recursion ``averaged_reference_step``.

The runner records one TraceRow per instant, counting communication and
gradient rounds actually consumed up to that instant, and (optionally) the
inexact-bound and master-inequality diagnostic margins.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import GraphSchedule, gamma_connectivity, metropolis_weights, sigma as sigma_of, sigma_gamma as sigma_gamma_of
from .mixing import RoundCounter, chebyshev_apply, chebyshev_operator, default_zeta, gossip, multiple_consensus
from .problems import (AggregateState, ProblemInstance, aggregate_gradient,
                       bregman_distance, consensus_error, inexact_value)

VARIANTS = ("gt", "acc_gt_static", "acc_gt_tv", "acc_gt_chebyshev", "acc_gt_multiconsensus")

# Effective contraction constants the accelerated wrappers guarantee,
# used by their step-size rules in place of sigma / sigma_gamma.
CHEBYSHEV_EFFECTIVE_SIGMA = 0.65
MULTICONSENSUS_EFFECTIVE_SIGMA = 1.0 / math.e

CSV_COLUMNS = ("k", "gap", "per_agent_gap_max", "cons_x", "cons_y", "cons_s",
               "zbar_dist", "comm_rounds", "grad_rounds", "lemma4_margin",
               "lemma1_lower_margin", "lemma1_upper_margin")


class DivergenceError(RuntimeError):
    """Raised when an iterate turns non-finite (step size too large)."""

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration


def theta_next(theta_prev: float) -> float:
    """Next momentum parameter: the positive root of (1 - t)/t^2 = 1/theta_prev^2.

    Explicitly ``t = theta_prev (sqrt(theta_prev^2 + 4) - theta_prev) / 2``,
    which always lies in (0, theta_prev).
    """
    if theta_prev <= 0.0:
        raise ValueError("theta_prev must be positive")
    return theta_prev * (math.sqrt(theta_prev * theta_prev + 4.0) - theta_prev) / 2.0


class ThetaSchedule:
    """Momentum sequence: decreasing recursion for mu = 0, constant for mu > 0.

    ``mode`` is ``nonstrongly_convex`` (theta_0 = 1, then theta_next) or
    ``strongly_convex`` (theta = sqrt(mu alpha)/2, which requires
    alpha mu <= 1).  ``history`` records theta_0..theta_k as queried.
    """

    def __init__(self, mode: str, alpha: float | None = None, mu: float | None = None):
        if mode not in ("nonstrongly_convex", "strongly_convex"):
            raise ValueError(f"unknown theta mode {mode!r}")
        self.mode = mode
        if mode == "strongly_convex":
            if alpha is None or mu is None or mu <= 0.0:
                raise ValueError("strongly_convex schedule needs alpha and mu > 0")
            if alpha * mu > 1.0:
                raise ValueError("strongly_convex schedule requires alpha * mu <= 1")
            self._constant = math.sqrt(mu * alpha) / 2.0
            self.history = []
        else:
            self._constant = None
            self.history = [1.0]

    def theta(self, k: int) -> float:
        if k < 0:
            raise ValueError("iteration index must be nonnegative")
        if self.mode == "strongly_convex":
            while len(self.history) <= k:
                self.history.append(self._constant)
            return self._constant
        while len(self.history) <= k:
            nxt = theta_next(self.history[-1])
            # The analysis needs theta monotonically nonincreasing in (0, 1].
            assert 0.0 < nxt <= self.history[-1] <= 1.0
            self.history.append(nxt)
        return self.history[k]


@dataclass(frozen=True)
class AlgorithmConfig:
    """Which variant to run, with what step size, momentum mode, and budget."""

    variant: str
    alpha: float | str = "theorem_default"
    mu_mode: str = "zero"
    max_iterations: int = 100
    zeta: int | None = None
    seeds: tuple[int, ...] = (0,)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.mu_mode not in ("zero", "strongly_convex"):
            raise ValueError(f"unknown mu_mode {self.mu_mode!r}")
        if isinstance(self.alpha, str):
            if self.alpha != "theorem_default":
                raise ValueError(f"alpha must be positive or 'theorem_default', got {self.alpha!r}")
        elif self.alpha <= 0.0:
            raise ValueError("alpha must be positive")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be nonnegative")
        if self.zeta is not None and self.zeta < 1:
            raise ValueError("zeta must be at least 1")
        if not self.seeds:
            raise ValueError("at least one seed is required")


def default_alpha(variant: str, L: float, sigma_or_sigma_gamma: float,
                  gamma: int = 1, mu_mode: str = "zero") -> float:
    """The proved step-size upper bound for each variant, taken with equality.

    static:          (1-sigma)^4 / (537 L)            [mu = 0]
                     (1-sigma)^3 / (119 L)            [mu > 0]
    time-varying:    (1-sigma_gamma)^4 / (21675 L gamma^4)   [mu = 0]
                     (1-sigma_gamma)^3 / (4244 L gamma^3)    [mu > 0]

    The Chebyshev and multiple-consensus wrappers use the same rules with
    sigma replaced by their guaranteed effective contraction (0.65 and 1/e,
    with gamma = 1 for multiple consensus, since every wrapped call contracts
    regardless of the underlying graph).
    """
    if variant == "gt":
        raise ValueError("no default step-size rule is defined for the gt variant; "
                         "pass alpha explicitly")
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if L <= 0.0:
        raise ValueError("L must be positive")
    if gamma < 1:
        raise ValueError("gamma must be at least 1")
    sc = mu_mode == "strongly_convex"
    if variant == "acc_gt_chebyshev":
        sig = CHEBYSHEV_EFFECTIVE_SIGMA
    elif variant == "acc_gt_multiconsensus":
        sig, gamma = MULTICONSENSUS_EFFECTIVE_SIGMA, 1
    else:
        sig = sigma_or_sigma_gamma
    if not (0.0 <= sig < 1.0):
        raise ValueError(f"mixing constant must lie in [0, 1), got {sig}; "
                         "the schedule does not mix in the required sense")
    if variant in ("acc_gt_static", "acc_gt_chebyshev"):
        if sc:
            return (1.0 - sig) ** 3 / (119.0 * L)
        return (1.0 - sig) ** 4 / (537.0 * L)
    if sc:
        return (1.0 - sig) ** 3 / (4244.0 * L * gamma ** 3)
    return (1.0 - sig) ** 4 / (21675.0 * L * gamma ** 4)


def _apply_op(W, v: np.ndarray, counter: RoundCounter | None) -> np.ndarray:
    """Apply one mixing slot: a matrix(-like) gossip or a counting callable."""
    if callable(W):
        return W(v, counter)
    return gossip(W, v, counter)


def gt_init(problem: ProblemInstance, x0_row: np.ndarray,
            counter: RoundCounter | None = None) -> AggregateState:
    """Consensual start for gradient tracking: x^0 = 1 x0^T, s^0 = grad f(x^0)."""
    x0 = np.tile(np.asarray(x0_row, dtype=float), (problem.m, 1))
    g0 = aggregate_gradient(problem, x0, counter)
    return AggregateState(x0, x0, x0, g0.copy(), grad=g0)


def gt_step(state: AggregateState, W, alpha: float, problem: ProblemInstance,
            counter: RoundCounter | None = None) -> AggregateState:
    """One gradient-tracking step (2 communication rounds, 1 gradient round).

    Requires ``state.s`` to track from ``s^0 = grad f(x^0)``; y and z mirror x
    since the baseline method has no momentum rows.
    """
    x_next = _apply_op(W, state.x, counter) - alpha * state.s
    g_next = aggregate_gradient(problem, x_next, counter)
    s_next = _apply_op(W, state.s, counter) + g_next - state.grad
    if not (np.isfinite(x_next).all() and np.isfinite(s_next).all()):
        raise DivergenceError("gradient-tracking iterate turned non-finite")
    return AggregateState(x_next, x_next, x_next, s_next, grad=g_next)


def acc_gt_init(problem: ProblemInstance, x0_row: np.ndarray, alpha: float,
                theta0: float, mu: float,
                counter: RoundCounter | None = None) -> AggregateState:
    """Consensual start x^0 = y^0 = z^0 = 1 x0^T with s^0 = grad f(y^0).

    The consensual start makes Pi x^0 = 0, and feeding this state to the
    generic step at k = 0 reproduces the special-cased first iterates
    z^1 = W z^0 - alpha/(theta_0 + mu alpha) s^0 and x^1.
    """
    if not np.isfinite(x0_row).all():
        raise ValueError("x0_row must be finite")
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    if not (0.0 < theta0 <= 1.0):
        raise ValueError("theta0 must lie in (0, 1]")
    if mu < 0.0 or mu * alpha > 1.0:
        raise ValueError("need mu >= 0 and alpha * mu <= 1")
    x0 = np.tile(np.asarray(x0_row, dtype=float), (problem.m, 1))
    g0 = aggregate_gradient(problem, x0, counter)
    return AggregateState(x0, x0.copy(), x0.copy(), g0.copy(), grad=g0)


def _tracking_half(state: AggregateState, W1, theta_k: float, problem: ProblemInstance,
                   counter: RoundCounter | None, fresh: bool):
    """Materialize instant k: y^k and the tracked s^k (skipped when s is fresh
    from initialization, where s^0 = grad f(y^0) holds by construction)."""
    y_k = theta_k * state.z + (1.0 - theta_k) * state.x
    if fresh:
        return y_k, state.s, state.grad
    g_k = aggregate_gradient(problem, y_k, counter)
    s_k = _apply_op(W1, state.s, counter) + g_k - state.grad
    return y_k, s_k, g_k


def _propagate_half(state: AggregateState, y_k, s_k, g_k, W2, W3, alpha: float,
                    theta_k: float, mu: float,
                    counter: RoundCounter | None) -> AggregateState:
    """Finish the step: z^{k+1} and x^{k+1} from instant-k quantities."""
    ratio = mu * alpha / theta_k
    z_next = (_apply_op(W2, ratio * y_k + state.z, counter) - (alpha / theta_k) * s_k) / (1.0 + ratio)
    x_next = theta_k * z_next + (1.0 - theta_k) * _apply_op(W3, state.x, counter)
    return AggregateState(x_next, y_k, z_next, s_k, grad=g_k)


def acc_gt_step(state: AggregateState, W1, W2, W3, alpha: float, theta_k: float,
                mu: float, problem: ProblemInstance,
                counter: RoundCounter | None = None,
                refresh_tracking: bool = True) -> AggregateState:
    """One accelerated step (3 communication rounds, 1 gradient round).

    On entry ``state`` holds x^k and z^k together with the previous instant's
    y, s, and gradient; on exit those fields hold x^{k+1}, z^{k+1}, y^k, s^k,
    grad f(y^k).  ``refresh_tracking=False`` is for k = 0, where s^0 comes from
    the initialization and the tracking update (with its communication and
    gradient rounds) must be skipped.
    """
    if not (0.0 < theta_k <= 1.0):
        raise ValueError("theta_k must lie in (0, 1]")
    if mu < 0.0:
        raise ValueError("mu must be nonnegative")
    y_k, s_k, g_k = _tracking_half(state, W1, theta_k, problem, counter, not refresh_tracking)
    new = _propagate_half(state, y_k, s_k, g_k, W2, W3, alpha, theta_k, mu, counter)
    if not (np.isfinite(new.x).all() and np.isfinite(new.z).all() and np.isfinite(new.s).all()):
        raise DivergenceError("accelerated iterate turned non-finite")
    return new


@dataclass(frozen=True)
class AveragedState:
    """Column means (xbar, ybar, zbar) evolved by the reference recursion."""

    xbar: np.ndarray
    ybar: np.ndarray
    zbar: np.ndarray


def averaged_reference_step(avg_state: AveragedState, alpha: float, theta_k: float,
                            mu: float, sbar_k: np.ndarray) -> AveragedState:
    """Inexact centralized accelerated step driven by the supplied mean sbar^k.

    Multiplying the distributed updates by (1/m) 1^T removes every W (column
    means are gossip-invariant), leaving

        ybar = theta zbar + (1 - theta) xbar,
        zbar' = (1 + mu alpha/theta)^{-1} (mu alpha/theta ybar + zbar - alpha/theta sbar),
        xbar' = theta zbar' + (1 - theta) xbar.

    Co-running this recursion on the distributed run's sbar^k sequence
    reproduces the distributed column means exactly.
    """
    ybar = theta_k * avg_state.zbar + (1.0 - theta_k) * avg_state.xbar
    ratio = mu * alpha / theta_k
    zbar_next = (ratio * ybar + avg_state.zbar - (alpha / theta_k) * np.asarray(sbar_k)) / (1.0 + ratio)
    xbar_next = theta_k * zbar_next + (1.0 - theta_k) * avg_state.xbar
    return AveragedState(xbar_next, ybar, zbar_next)


@dataclass(frozen=True)
class TraceRow:
    """One recorded instant.  Error quantities:

    gap = F(xbar^k) - F*; per_agent_gap_max = max_i F(x_i^k) - F*;
    cons_* = ||Pi (.)^k||^2 / m; zbar_dist = ||zbar^k - x*||^2.  Round counters
    are cumulative through instant k.  Margin columns are inequality slack
    (bound side minus checked side) normalized by max(1, |checked side|);
    nonnegative means the inequality held.  NaN marks a margin that is not
    defined at this row (no successor iterate yet, or not applicable).
    """

    k: int
    gap: float
    per_agent_gap_max: float
    cons_x: float
    cons_y: float
    cons_s: float
    zbar_dist: float
    comm_rounds: int
    grad_rounds: int
    lemma4_margin: float
    lemma1_lower_margin: float
    lemma1_upper_margin: float
    cons_z: float = float("nan")
    theta: float = float("nan")


@dataclass
class RunTrace:
    """Per-iteration records plus run metadata (constants the certificates need)."""

    rows: list[TraceRow] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self, path, timestamp: str | None = None):
        """Write the fixed 12-column CSV; floats carry 17 significant digits."""
        with open(path, "w", newline="") as fh:
            if timestamp is not None:
                fh.write(f"# generated {timestamp}\n")
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.rows:
                writer.writerow([
                    r.k,
                    *(format(getattr(r, c), ".17g") for c in CSV_COLUMNS[1:7]),
                    r.comm_rounds, r.grad_rounds,
                    *(format(getattr(r, c), ".17g") for c in CSV_COLUMNS[9:]),
                ])


def resolve_gamma(schedule: GraphSchedule, max_gamma: int = 50) -> int:
    """Smallest gamma for which the schedule is gamma-connected."""
    for g in range(1, max_gamma + 1):
        if gamma_connectivity(schedule, g):
            return g
    raise ValueError(f"schedule is not gamma-connected for any gamma <= {max_gamma}")


def _first_schedule(schedule) -> GraphSchedule:
    return schedule[0] if isinstance(schedule, (tuple, list)) else schedule


def resolve_constants(config: AlgorithmConfig, problem: ProblemInstance,
                      schedule, weight_rule=None) -> dict:
    """Mixing constants, step size, and wrapper parameters for one run.

    Returns a dict with sigma / sigma_gamma / gamma as applicable, the
    resolved alpha (theorem default or explicit), and zeta / t for the
    wrapped variants.
    """
    rule = weight_rule if weight_rule is not None else metropolis_weights
    sched = _first_schedule(schedule)
    out: dict = {"variant": config.variant, "mu_mode": config.mu_mode}

    if config.variant in ("acc_gt_static", "acc_gt_chebyshev"):
        if sched.schedule_kind != "static":
            raise ValueError(f"variant {config.variant} requires a static schedule")
        out["sigma"] = sigma_of(rule(sched.edge_set(0), sched.agent_count))
        out["gamma"] = 1
        sig_for_alpha = out["sigma"]
    elif config.variant in ("acc_gt_tv", "acc_gt_multiconsensus"):
        gamma = resolve_gamma(sched)
        report = sigma_gamma_of(sched, gamma, rule)
        out["sigma"] = report.sigma
        out["sigma_gamma"] = report.sigma_gamma
        out["gamma"] = gamma
        sig_for_alpha = report.sigma_gamma
    else:  # gt
        out["gamma"] = 1
        sig_for_alpha = None

    if config.alpha == "theorem_default":
        out["alpha"] = default_alpha(config.variant, problem.L, sig_for_alpha,
                                     out["gamma"], config.mu_mode)
    else:
        out["alpha"] = float(config.alpha)

    if config.variant == "acc_gt_multiconsensus":
        out["zeta"] = config.zeta if config.zeta is not None else default_zeta(
            out["gamma"], out["sigma_gamma"])
    return out


def run(config: AlgorithmConfig, problem: ProblemInstance, schedule,
        weight_rule=None, diagnostics: bool = True,
        x0_row: np.ndarray | None = None, probe=None) -> RunTrace:
    """Execute a configured run and record its trace.

    ``schedule`` is one GraphSchedule, or a triple of them to drive the three
    mixing slots of the accelerated recursion independently.  Deterministic:
    the initial row x^0 is drawn from seeds[0], and everything else is pure.
    Raises DivergenceError (with the iteration index) if an iterate turns
    non-finite.

    ``probe``, if given, is called as ``probe(k, x, y, z, s)`` with the
    aggregate matrices of instant k (read-only), once per recorded row --
    an observation hook for property checks that need more than the trace
    columns (e.g. the mean of s against the mean gradient).
    """
    if config.mu_mode == "strongly_convex" and problem.mu <= 0.0:
        raise ValueError("strongly_convex mode requires a problem with mu > 0")
    rule = weight_rule if weight_rule is not None else metropolis_weights

    consts = resolve_constants(config, problem, schedule, rule)
    alpha = consts["alpha"]
    mu_used = problem.mu if config.mu_mode == "strongly_convex" else 0.0
    m, n = problem.m, problem.n

    if x0_row is None:
        x0_row = np.random.default_rng(config.seeds[0]).standard_normal(n)

    schedules = (schedule if isinstance(schedule, (tuple, list)) else (schedule,) * 3)
    counter = RoundCounter()

    # Per-slot mixing application for instant k.
    if config.variant == "acc_gt_chebyshev":
        op = chebyshev_operator(rule(schedules[0].edge_set(0), m))
        consts["t"] = op.t

        def slot(which, k):
            return lambda v, c: chebyshev_apply(op, v, c)
    elif config.variant == "acc_gt_multiconsensus":
        zeta = consts["zeta"]
        pointer = {"round": 0}

        def slot(which, k):
            def apply_mc(v, c):
                out, used = multiple_consensus(schedules[which], rule,
                                               pointer["round"], zeta, v, c)
                pointer["round"] += used
                return out
            return apply_mc
    elif config.variant in ("gt", "acc_gt_tv"):
        def slot(which, k):
            return rule(schedules[which].edge_set(k), m)
    else:  # acc_gt_static
        W_static = [rule(s.edge_set(0), m) for s in schedules]

        def slot(which, k):
            return W_static[which]

    trace = RunTrace(meta={**consts, "m": m, "n": n,
                           "max_iterations": config.max_iterations,
                           "seeds": tuple(config.seeds),
                           "mu_used": mu_used, "diagnostics": diagnostics})

    if config.variant == "gt":
        _run_gt(config, problem, slot, alpha, counter, x0_row, trace,
                diagnostics, probe)
    else:
        _run_acc(config, problem, slot, alpha, mu_used, counter, x0_row, trace,
                 diagnostics, probe)
    return trace


def _lemma1_margins(problem, mu_used, y_k, s_k, diagnostics):
    """Lower-bound margin at w = x*, and a closure for the upper margin at a
    later-supplied w (the next mean iterate); both normalized."""
    if not diagnostics:
        return float("nan"), None, None
    ybar = y_k.mean(axis=0)
    sbar = s_k.mean(axis=0)
    fhat = inexact_value(problem, ybar, y_k)
    cons_y_raw = consensus_error(y_k)
    dstar = problem.x_star - ybar
    lower_side = fhat + sbar @ dstar + 0.5 * mu_used * (dstar @ dstar)
    lower = (problem.F_star - lower_side) / max(1.0, abs(problem.F_star))

    def upper_at(w):
        d = w - ybar
        bound = fhat + sbar @ d + 0.5 * problem.L * (d @ d) + problem.L / (2.0 * problem.m) * cons_y_raw
        Fw = problem.value(w)
        return (bound - Fw) / max(1.0, abs(Fw))

    return float(lower), upper_at, fhat


def _measure(problem, k, x, y, z, s, comm, grad, theta_k, lemma4, lower, upper):
    m = problem.m
    xbar = x.mean(axis=0)
    gap = problem.value(xbar) - problem.F_star
    per_agent = float((problem.value_many(x) - problem.F_star).max())
    zbar = z.mean(axis=0)
    return TraceRow(
        k=k, gap=float(gap), per_agent_gap_max=per_agent,
        cons_x=consensus_error(x) / m, cons_y=consensus_error(y) / m,
        cons_s=consensus_error(s) / m,
        zbar_dist=float(np.sum((zbar - problem.x_star) ** 2)),
        comm_rounds=comm, grad_rounds=grad,
        lemma4_margin=lemma4, lemma1_lower_margin=lower, lemma1_upper_margin=upper,
        cons_z=consensus_error(z) / m, theta=theta_k)


def _check_row_finite(row: TraceRow, variant: str):
    """Divergence can hide from iterate checks (e.g. the mean stays bounded
    while squared norms overflow), so the recorded metrics are the last word.
    """
    if not all(math.isfinite(v) for v in (row.gap, row.per_agent_gap_max,
                                          row.cons_x, row.cons_y, row.cons_s,
                                          row.zbar_dist)):
        raise DivergenceError(f"{variant} diverged at iteration {row.k}",
                              iteration=row.k)


def _run_gt(config, problem, slot, alpha, counter, x0_row, trace, diagnostics,
            probe=None):
    state = gt_init(problem, x0_row, counter)
    K = config.max_iterations
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K + 1):
            comm, grad = counter.comm_rounds, counter.grad_rounds
            lower, upper_at, _ = _lemma1_margins(problem, 0.0, state.x, state.s,
                                                 diagnostics)
            prev = state
            if probe is not None:
                probe(k, prev.x, prev.x, prev.x, prev.s)
            if k < K:
                try:
                    state = gt_step(state, slot(0, k), alpha, problem, counter)
                except DivergenceError as err:
                    raise DivergenceError(f"gt diverged at iteration {k}",
                                          iteration=k) from err
                upper = upper_at(state.x.mean(axis=0)) if upper_at else float("nan")
            else:
                upper = float("nan")
            row = _measure(problem, k, prev.x, prev.x, prev.x, prev.s,
                           comm, grad, float("nan"), float("nan"), lower, upper)
            _check_row_finite(row, "gt")
            trace.rows.append(row)


def _run_acc(config, problem, slot, alpha, mu_used, counter, x0_row, trace,
             diagnostics, probe=None):
    sc = config.mu_mode == "strongly_convex"
    thetas = (ThetaSchedule("strongly_convex", alpha, mu_used) if sc
              else ThetaSchedule("nonstrongly_convex"))
    state = acc_gt_init(problem, x0_row, alpha,
                        1.0 if not sc else thetas.theta(0), mu_used, counter)
    K = config.max_iterations
    L, m = problem.L, problem.m

    # Master-inequality accumulators in damped form (multiplied through by
    # theta_K^2, resp. (1-theta)^{K+1}, so nothing overflows on long runs).
    acc_y = 0.0        # damped sum of (L/2m)||Pi y^k||^2 weights
    acc_drop = 0.0     # damped sum of the dropped (nonnegative) terms
    sum_dz = 0.0       # plain sum (1/2a - L/2)||dzbar||^2 (mu = 0 form only)
    base_sc = float("nan")
    if sc:
        theta = thetas.theta(0)
        coeff = theta * theta / (2.0 * alpha) + mu_used * theta / 2.0
        # (1-theta)^{K+1} (gap(0) + coeff ||zbar^0 - x*||^2), updated multiplicatively.
        zbar0 = state.z.mean(axis=0)
        base_sc = problem.value(state.x.mean(axis=0)) - problem.F_star \
            + coeff * float(np.sum((zbar0 - problem.x_star) ** 2))
    zbar0_dist = float(np.sum((state.z.mean(axis=0) - problem.x_star) ** 2))

    lemma4 = float("nan")
    # Overflow while diverging is reported as DivergenceError; numpy warnings
    # about it on the way there would only be noise.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(K + 1):
            theta_k = thetas.theta(k)
            y_k, s_k, g_k = _tracking_half(state, slot(0, k), theta_k, problem,
                                           counter, fresh=(k == 0))
            if not (np.isfinite(y_k).all() and np.isfinite(s_k).all()):
                raise DivergenceError(f"{config.variant} diverged at iteration {k}",
                                      iteration=k)
            comm, grad = counter.comm_rounds, counter.grad_rounds
            lower, upper_at, _ = _lemma1_margins(problem, mu_used, y_k, s_k,
                                                 diagnostics)
            prev_x, prev_z = state.x, state.z
            if probe is not None:
                probe(k, prev_x, y_k, prev_z, s_k)
            if k < K:
                state = _propagate_half(state, y_k, s_k, g_k, slot(1, k), slot(2, k),
                                        alpha, theta_k, mu_used, counter)
                if not (np.isfinite(state.x).all() and np.isfinite(state.z).all()):
                    raise DivergenceError(
                        f"{config.variant} diverged at iteration {k}", iteration=k)
                upper = upper_at(state.x.mean(axis=0)) if upper_at else float("nan")
            else:
                upper = float("nan")
            row = _measure(problem, k, prev_x, y_k, prev_z, s_k,
                           comm, grad, theta_k, lemma4, lower, upper)
            _check_row_finite(row, config.variant)
            trace.rows.append(row)
            if k == K:
                break

            # Advance the master-inequality margin to be stored on row k+1.
            if diagnostics:
                xbar_k = prev_x.mean(axis=0)
                dzbar = state.z.mean(axis=0) - prev_z.mean(axis=0)
                breg = bregman_distance(problem, xbar_k, y_k)
                piy = consensus_error(y_k)
                if sc:
                    theta = theta_k
                    acc_y = (1.0 - theta) * acc_y + (L / (2.0 * m)) * piy
                    acc_drop = (1.0 - theta) * acc_drop \
                        + (theta * theta / (2.0 * alpha)
                           - L * theta * theta / 2.0) * float(dzbar @ dzbar) \
                        + (1.0 - theta) * breg
                    base_sc *= (1.0 - theta)
                    coeff = theta * theta / (2.0 * alpha) + mu_used * theta / 2.0
                    lhs = (problem.value(state.x.mean(axis=0)) - problem.F_star
                           + coeff * float(np.sum((state.z.mean(axis=0)
                                                   - problem.x_star) ** 2)))
                    rhs = base_sc + acc_y - acc_drop
                else:
                    # theta_k^2 / theta_{k-1}^2 = 1 - theta_k telescopes the weights.
                    acc_y = (1.0 - theta_k) * acc_y + (L / (2.0 * m)) * piy
                    acc_drop = (1.0 - theta_k) * (acc_drop + breg)
                    sum_dz += (1.0 / (2.0 * alpha) - L / 2.0) * float(dzbar @ dzbar)
                    th2 = theta_k * theta_k
                    lhs = (problem.value(state.x.mean(axis=0)) - problem.F_star
                           + th2 / (2.0 * alpha) * float(np.sum((state.z.mean(axis=0)
                                                                 - problem.x_star) ** 2)))
                    rhs = th2 / (2.0 * alpha) * zbar0_dist + acc_y - th2 * sum_dz - acc_drop
                lemma4 = (rhs - lhs) / max(1.0, abs(lhs))
