"""Post-run verification: executable certificates for the convergence bounds.

Each certificate replays one proved bound against a recorded trace.  With a
consensual start (Pi x^0 = 0) and the theorem's step size the bounds are

T1 (mu = 0, static):
    gap(K+1) <= (1/(K+1)^2) [ (2/a)||zbar0 - x*||^2 + ((1-s)/2L) S0 ]
    cons_x(K) <= (1/(K+1)^2) [ (5/La)||zbar0 - x*||^2 + (9(1-s)/4L^2) S0 ]
    with S0 = (1/m) sum_i ||s_i^0 - sbar^0||^2.

T2 (mu > 0, static), theta = sqrt(mu a)/2, c = theta^2/2a + mu theta/2:
    gap(K+1) + c ||zbar^{K+1} - x*||^2 <= (1-theta)^{K+1} C
    cons_x(K) <= (1-theta)^{K+1} 4C/L
    with C = gap(0) + c ||zbar0 - x*||^2 + (4(1-s)/(59L(1-theta))) S0.

T3 / T4 are the gamma-step analogues checked at instants K = T gamma, with
initialization maxima taken over the first gamma(+1) recorded iterates
(the z-maximum weighted by theta^2 per its definition).

Margins are evaluated pointwise with a relative tolerance of
1e-7 * max(1, |checked side|): the inequalities are exact in real arithmetic,
so only rounding may intrude.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import ProblemInstance
from .algorithms import RunTrace

REL_TOL = 1e-7

THEOREM_IDS = ("T1_gap", "T1_consensus", "T2_gap", "T2_consensus",
               "T3_gap", "T3_consensus", "T4_gap", "T4_consensus")


@dataclass(frozen=True)
class BoundCertificate:
    """Verdict of one bound over a whole trace.

    ``worst_margin`` is the minimum of (bound - checked value) over the
    examined instants; ``holds`` applies the relative tolerance pointwise;
    ``first_violation_k`` is the first instant that failed, if any.
    """

    theorem_id: str
    holds: bool
    worst_margin: float
    first_violation_k: int | None = None


def _certify(theorem_id: str, points) -> BoundCertificate:
    worst = float("inf")
    first_violation = None
    for k, lhs, rhs in points:
        margin = rhs - lhs
        worst = min(worst, margin)
        if margin < -REL_TOL * max(1.0, abs(lhs)) and first_violation is None:
            first_violation = k
    if worst == float("inf"):
        raise ValueError(f"no instants to check for {theorem_id}")
    return BoundCertificate(theorem_id, first_violation is None, float(worst), first_violation)


def _require_mode(trace: RunTrace, mode: str, theorem: str):
    got = trace.meta.get("mu_mode")
    if got is not None and got != mode:
        raise ValueError(f"{theorem} applies to mu_mode={mode!r} runs, trace has {got!r}")
    if not trace.rows:
        raise ValueError("empty trace")


def certify_theorem1(trace: RunTrace, problem: ProblemInstance, alpha: float,
                     sigma: float):
    """Sublinear bounds for the static mu = 0 setting; returns (gap, consensus)."""
    _require_mode(trace, "zero", "the static mu=0 bound")
    L = problem.L
    zbar0 = trace.rows[0].zbar_dist
    s0 = trace.rows[0].cons_s
    b_gap = (2.0 / alpha) * zbar0 + (1.0 - sigma) / (2.0 * L) * s0
    b_cons = 5.0 / (L * alpha) * zbar0 + 9.0 * (1.0 - sigma) / (4.0 * L * L) * s0
    gap_cert = _certify("T1_gap", ((r.k, r.gap, b_gap / r.k ** 2)
                                   for r in trace.rows if r.k >= 1))
    cons_cert = _certify("T1_consensus", ((r.k, r.cons_x, b_cons / (r.k + 1) ** 2)
                                          for r in trace.rows))
    return gap_cert, cons_cert


def certify_theorem2(trace: RunTrace, problem: ProblemInstance, alpha: float,
                     sigma: float):
    """Linear-rate bounds for the static mu > 0 setting; returns (gap, consensus)."""
    _require_mode(trace, "strongly_convex", "the static mu>0 bound")
    L, mu = problem.L, problem.mu
    theta = np.sqrt(mu * alpha) / 2.0
    coeff = theta * theta / (2.0 * alpha) + mu * theta / 2.0
    r0 = trace.rows[0]
    C = r0.gap + coeff * r0.zbar_dist + 4.0 * (1.0 - sigma) / (59.0 * L * (1.0 - theta)) * r0.cons_s
    decay = 1.0 - theta
    gap_cert = _certify("T2_gap", ((r.k, r.gap + coeff * r.zbar_dist, decay ** r.k * C)
                                   for r in trace.rows))
    cons_cert = _certify("T2_consensus", ((r.k, r.cons_x, decay ** (r.k + 1) * 4.0 * C / L)
                                          for r in trace.rows))
    return gap_cert, cons_cert


def certify_theorem3(trace: RunTrace, problem: ProblemInstance, alpha: float,
                     sigma_gamma: float, gamma: int):
    """Sublinear bounds for the time-varying mu = 0 setting, checked at the
    gamma-grid instants K = T gamma; returns (gap, consensus)."""
    _require_mode(trace, "zero", "the time-varying mu=0 bound")
    if len(trace.rows) - 1 < gamma:
        raise ValueError(f"trace too short: the initialization maximum needs the "
                         f"first {gamma} iterates beyond row 0")
    L, m = problem.L, problem.m
    zbar0 = trace.rows[0].zbar_dist
    max_s = m * max(r.cons_s for r in trace.rows[:gamma + 1])
    bracket = (2.0 / alpha) * zbar0 + (1.0 - sigma_gamma) / (5.0 * m * L * gamma) * max_s
    last = len(trace.rows) - 1
    gap_points = [(t * gamma + 1,
                   trace.rows[t * gamma + 1].gap,
                   bracket / (t * gamma + 1) ** 2)
                  for t in range(0, (last - 1) // gamma + 1)]
    cons_points = [(t * gamma,
                    trace.rows[t * gamma].cons_x,
                    9.0 * bracket / (2.0 * L * (t * gamma + 1) ** 2))
                   for t in range(0, last // gamma + 1)]
    return _certify("T3_gap", gap_points), _certify("T3_consensus", cons_points)


def certify_theorem4(trace: RunTrace, problem: ProblemInstance, alpha: float,
                     sigma_gamma: float, gamma: int):
    """Linear-rate bounds for the time-varying mu > 0 setting; returns
    (gap, consensus).  The constant C uses the trajectory maxima over the
    first gamma iterates: raw ||Pi s^r||^2 and ||Pi x^r||^2, and the
    theta^2-weighted ||Pi z^r||^2."""
    _require_mode(trace, "strongly_convex", "the time-varying mu>0 bound")
    if len(trace.rows) - 1 < gamma:
        raise ValueError(f"trace too short: the initialization maxima need the "
                         f"first {gamma} iterates beyond row 0")
    L, mu, m = problem.L, problem.mu, problem.m
    theta = np.sqrt(mu * alpha) / 2.0
    coeff = theta * theta / (2.0 * alpha) + mu * theta / 2.0
    r0 = trace.rows[0]
    head = trace.rows[1:gamma + 1]
    max_s = m * max(r.cons_s for r in head)
    max_x = m * max(r.cons_x for r in head)
    max_z = theta * theta * m * max(r.cons_z for r in head)
    one = 1.0 - sigma_gamma
    C = (r0.gap + coeff * r0.zbar_dist
         + one / (49.0 * m * L * gamma * (1.0 - theta)) * max_s
         + 1459.0 * L * gamma ** 3 / (m * (1.0 - theta) * one ** 3) * max_z
         + 6.6 * L * gamma / (m * (1.0 - theta) * one) * max_x)
    decay = 1.0 - theta
    last = len(trace.rows) - 1
    gap_points = [(t * gamma + 1,
                   trace.rows[t * gamma + 1].gap + coeff * trace.rows[t * gamma + 1].zbar_dist,
                   decay ** (t * gamma + 1) * C)
                  for t in range(0, (last - 1) // gamma + 1)]
    cons_points = [(t * gamma,
                    trace.rows[t * gamma].cons_x,
                    decay ** (t * gamma + 1) * 4.0 * C / L)
                   for t in range(0, last // gamma + 1)]
    return _certify("T4_gap", gap_points), _certify("T4_consensus", cons_points)


def fit_rate(trace: RunTrace, window: tuple[int, int] | None = None) -> float:
    """Least-squares slope of the empirical gap decay.

    For mu = 0 runs: slope of log(gap) against log(k) (about -2 when the
    O(1/K^2) rate is achieved).  For mu > 0 runs: slope of log(gap) against k
    (at most log(1-theta) when the linear rate is achieved).  The default
    window drops the first 10% of iterations as transient; gaps at or below
    1e-14 truncate the window.
    """
    if not trace.rows:
        raise ValueError("empty trace")
    last = trace.rows[-1].k
    if window is None:
        window = (max(1, int(np.ceil(0.1 * last))), last)
    lo, hi = window
    sc = trace.meta.get("mu_mode") == "strongly_convex"
    if not sc:
        lo = max(lo, 1)  # log k needs k >= 1
    ks, gaps = [], []
    for r in trace.rows:
        if r.k < lo or r.k > hi:
            continue
        if r.gap <= 1e-14:
            break  # underflow truncates the window
        ks.append(r.k)
        gaps.append(r.gap)
    if len(ks) < 2:
        raise ValueError("window too small (or gap underflowed immediately)")
    xs = np.array(ks, dtype=float) if sc else np.log(np.array(ks, dtype=float))
    return float(np.polyfit(xs, np.log(np.array(gaps)), 1)[0])


def certificates_to_report(certs) -> list[dict]:
    """JSON-ready rows (theorem id, verdict, worst margin, first violation)."""
    return [{"theorem_id": c.theorem_id, "holds": c.holds,
             "worst_margin": c.worst_margin,
             "first_violation_k": c.first_violation_k} for c in certs]
