"""Exact and relaxed optimizers for reward-rate maximal RB allocation.

`solve_ilp_subset` finds the best 0/1 allocation for a fixed packet set
(every packet must reach its minimum rate, one packet per RB).
`enumerate_subsets_pruned` lifts it to subset selection with
infeasible-superset pruning. `solve_lp2` solves the two-packet time-sharing
relaxation where the pair splits every RB fractionally. The *_oracle
functions are brute-force ground truth for tests and `verify`; they stay
independent of the fast paths they check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

# Exactness contract: objectives to 1e-9 relative, constraint slack 1e-6.
OBJ_RTOL = 1e-9
FEAS_TOL = 1e-6
_EPS = 1e-9


class InstanceTooLargeError(ValueError):
    """Brute-force oracle asked to enumerate more states than its bound allows."""


class OddSumError(ValueError):
    """Integer set with an odd total cannot be split into two equal halves."""


@dataclass
class ProblemPacket:
    """Solver-side view of one packet: reward, length, rates and rate floor."""

    id: int
    reward: float
    length_bits: float
    rates: np.ndarray
    min_rate: float

    def __post_init__(self):
        self.rates = np.asarray(self.rates, dtype=float)

    @property
    def coef(self) -> np.ndarray:
        """Per-RB objective coefficients (w/l) * r."""
        return (self.reward / self.length_bits) * self.rates


@dataclass
class AllocationProblem:
    packets: list[ProblemPacket]
    n_rbs: int

    def __post_init__(self):
        for p in self.packets:
            if p.rates.shape != (self.n_rbs,):
                raise ValueError(f"packet {p.id}: rate vector length != {self.n_rbs}")
            if p.min_rate <= 0:
                raise ValueError(f"packet {p.id}: rate floor must be positive")


@dataclass
class FeasibilityQuery:
    """Is there an allocation with total reward rate >= alpha?"""

    problem: AllocationProblem
    alpha: float

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("threshold must be nonnegative")


@dataclass
class SolveResult:
    feasible: bool
    allocations: dict[int, np.ndarray] = field(default_factory=dict)
    total_rr: float = 0.0
    chosen: tuple[int, ...] = ()

    @classmethod
    def infeasible(cls) -> "SolveResult":
        return cls(feasible=False)


def _validate(problem: AllocationProblem, result: SolveResult, integral: bool) -> SolveResult:
    """Every feasible result must satisfy the rate floors and RB exclusivity."""
    if not result.feasible:
        return result
    load = np.zeros(problem.n_rbs)
    tol = _EPS if integral else FEAS_TOL
    for p in problem.packets:
        x = result.allocations[p.id]
        if integral and not np.all((x == 0) | (x == 1)):
            raise AssertionError("integral solver produced fractional allocation")
        got = float(x @ p.rates)
        if got < p.min_rate * (1 - 1e-12) - tol:
            raise AssertionError(f"packet {p.id} allocated below its rate floor")
        load += x
    if np.any(load > 1 + tol):
        raise AssertionError("an RB was allocated more than once")
    return result


# below this many per-RB assignment vectors the vectorized sweep beats
# branch and bound
_ENUM_LIMIT = 4096


def solve_ilp_subset(problem: AllocationProblem) -> SolveResult:
    """Best 0/1 allocation serving *every* packet of the problem.

    Small instances are swept exactly by enumerating every per-RB assignment
    (each RB to one packet or idle) in one vectorized pass; larger ones go
    through depth-first branch and bound with rate-reachability and
    optimistic-bound pruning. Both are exact.
    """
    pkts = problem.packets
    if not pkts:
        raise ValueError("need at least one packet")
    n, K = len(pkts), problem.n_rbs
    if (n + 1) ** K <= _ENUM_LIMIT:
        best = _assignment_sweep(problem)
    else:
        best = _branch_and_bound(problem)
    if best is None:
        return SolveResult.infeasible()
    best_obj, best_assign = best
    allocs = {p.id: np.zeros(K) for p in pkts}
    for k, i in enumerate(best_assign):
        if i >= 0:
            allocs[pkts[i].id][k] = 1.0
    result = SolveResult(True, allocs, best_obj, tuple(p.id for p in pkts))
    return _validate(problem, result, integral=True)


def _assignment_sweep(problem: AllocationProblem):
    n, K = len(problem.packets), problem.n_rbs
    base = n + 1
    codes = np.arange(base ** K)
    digits = (codes[:, None] // base ** np.arange(K)[None, :]) % base  # (N, K)
    obj = np.zeros(len(codes))
    feasible = np.ones(len(codes), dtype=bool)
    for i, p in enumerate(problem.packets):
        mask = digits == i + 1
        feasible &= mask @ p.rates >= p.min_rate - _EPS
        obj += mask @ p.coef
    if not feasible.any():
        return None
    obj[~feasible] = -np.inf
    winner = int(np.argmax(obj))
    return float(obj[winner]), [int(d) - 1 for d in digits[winner]]


def _branch_and_bound(problem: AllocationProblem):
    pkts = problem.packets
    n, K = len(pkts), problem.n_rbs
    rates = [[float(r) for r in p.rates] for p in pkts]
    coef = [[float(c) for c in p.coef] for p in pkts]
    rmin = [p.min_rate - _EPS for p in pkts]

    # suffix_rate[i][k] = rate packet i could still gain from RBs k..K-1
    suffix_rate = [[0.0] * (K + 1) for _ in range(n)]
    for i in range(n):
        for k in range(K - 1, -1, -1):
            suffix_rate[i][k] = suffix_rate[i][k + 1] + rates[i][k]
    suffix_best = [0.0] * (K + 1)
    for k in range(K - 1, -1, -1):
        suffix_best[k] = suffix_best[k + 1] + max(coef[i][k] for i in range(n))
    # branch order per RB: highest objective gain first, idle last
    order = [sorted(range(n), key=lambda i: -coef[i][k]) for k in range(K)]

    if any(suffix_rate[i][0] < rmin[i] for i in range(n)):
        return None

    best_obj = -1.0
    best_assign: list[int] | None = None
    assign = [-1] * K
    acc = [0.0] * n

    def dfs(k: int, obj: float) -> None:
        nonlocal best_obj, best_assign
        for i in range(n):
            if acc[i] + suffix_rate[i][k] < rmin[i]:
                return
        if best_assign is not None and obj + suffix_best[k] <= best_obj + _EPS:
            return
        if k == K:
            # reachability guard above already ensured every floor is met
            best_obj = obj
            best_assign = assign.copy()
            return
        for i in order[k]:
            assign[k] = i
            acc[i] += rates[i][k]
            dfs(k + 1, obj + coef[i][k])
            acc[i] -= rates[i][k]
        assign[k] = -1
        dfs(k + 1, obj)

    dfs(0, 0.0)
    if best_assign is None:
        return None
    return best_obj, best_assign


def ilp_exhaustive_oracle(problem: AllocationProblem) -> SolveResult:
    """Exact optimum by enumerating all 2^(K*n) 0/1 assignment matrices."""
    pkts = problem.packets
    n, K = len(pkts), problem.n_rbs
    nk = n * K
    if nk > 16:
        raise InstanceTooLargeError(f"{nk} binary variables exceeds the 16-bit bound")
    rates = np.array([p.rates for p in pkts])
    coef = np.array([p.coef for p in pkts])
    rmin = np.array([p.min_rate for p in pkts])

    codes = np.arange(1 << nk, dtype=np.uint32)
    bits = ((codes[:, None] >> np.arange(nk, dtype=np.uint32)[None, :]) & 1).astype(float)
    X = bits.reshape(-1, n, K)
    exclusive = (X.sum(axis=1) <= 1.0).all(axis=1)
    per_pkt = np.einsum("cpk,pk->cp", X, rates)
    floors = (per_pkt >= rmin[None, :] - _EPS).all(axis=1)
    feas = exclusive & floors
    if not feas.any():
        return SolveResult.infeasible()
    obj = np.einsum("cpk,pk->c", X, coef)
    obj[~feas] = -np.inf
    winner = int(np.argmax(obj))
    allocs = {p.id: X[winner, i].copy() for i, p in enumerate(pkts)}
    result = SolveResult(True, allocs, float(obj[winner]), tuple(p.id for p in pkts))
    return _validate(problem, result, integral=True)


def enumerate_subsets_pruned(eligible, p, solver, n_rbs=None):
    """Best feasible subset of size <= p under infeasible-superset pruning.

    Subsets are visited in ascending size, skipping any superset of a subset
    the solver already declared infeasible. Reward-rate ties go to the
    lexicographically smallest id tuple (which also prefers fewer packets).
    Returns the empty result when not even a singleton is feasible.
    """
    if p < 1:
        raise ValueError("subset size bound must be >= 1")
    if not eligible:
        return SolveResult.infeasible()
    if n_rbs is None:
        n_rbs = len(eligible[0].rates)
    by_id = {pkt.id: pkt for pkt in eligible}
    ids = sorted(by_id)
    max_size = min(p, len(ids))
    best: SolveResult | None = None
    best_key: tuple[int, ...] = ()
    infeasible_sets: list[frozenset] = []
    for size in range(1, max_size + 1):
        for combo in itertools.combinations(ids, size):
            cset = frozenset(combo)
            if any(bad <= cset for bad in infeasible_sets):
                continue
            if best is not None:
                bound = float(np.maximum.reduce([by_id[i].coef for i in combo]).sum())
                # a strictly lower bound can never win; an exact tie must
                # still be solved when the id set would win the tie-break
                if bound < best.total_rr * (1 - 1e-12) - 1e-12:
                    continue
                if bound <= best.total_rr + _EPS and combo > best_key:
                    continue
            res = solver(AllocationProblem([by_id[i] for i in combo], n_rbs))
            if not res.feasible:
                infeasible_sets.append(cset)
                continue
            if (
                best is None
                or res.total_rr > best.total_rr
                or (res.total_rr == best.total_rr and combo < best_key)
            ):
                best, best_key = res, combo
    return best if best is not None else SolveResult.infeasible()


# ---------------------------------------------------------------------------
# Two-packet time-sharing relaxation: maximize c1'x + c2'(1-x) over x in
# [0,1]^K subject to r1'x >= m1 and r2'(1-x) >= m2. Solved exactly via the
# two-multiplier dual whose optimum sits on an intersection of breakpoint
# lines; the recovered vertex is verified against the dual value and falls
# back to scipy's LP on any degeneracy.
# ---------------------------------------------------------------------------


def _knapsack_max(a: np.ndarray, b: np.ndarray, budget: float) -> float:
    """max a'x s.t. b'x <= budget, x in [0,1]^K (a, b >= 0). Exact greedy."""
    if budget < -_EPS:
        return -math.inf
    gain = float(a[(b <= _EPS) & (a > 0)].sum())
    take = (b > _EPS) & (a > 0)
    av, bv = a[take], b[take]
    order = np.argsort(-av / bv, kind="stable")
    remaining = budget
    for i in order:
        if remaining <= 0:
            break
        frac = min(1.0, remaining / bv[i])
        gain += frac * av[i]
        remaining -= frac * bv[i]
    return gain


def _dual_candidates(c, a, b):
    """(lambda, mu) points where the piecewise-linear dual can attain its min."""
    K = len(c)
    pts = [(0.0, 0.0)]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = c / b
        lam0 = -c / a
    for k in range(K):
        if b[k] > _EPS and mu0[k] >= 0:
            pts.append((0.0, float(mu0[k])))
        if a[k] > _EPS and lam0[k] >= 0:
            pts.append((float(lam0[k]), 0.0))
    for k, j in itertools.combinations(range(K), 2):
        det = b[k] * a[j] - a[k] * b[j]
        if abs(det) <= _EPS * max(1.0, abs(b[k] * a[j]), abs(a[k] * b[j])):
            continue
        lam = (c[k] * b[j] - b[k] * c[j]) / det
        mu = (c[k] * a[j] - a[k] * c[j]) / det
        if lam >= -_EPS and mu >= -_EPS:
            pts.append((max(lam, 0.0), max(mu, 0.0)))
    return np.array(pts)


def _recover_primal(c, a, b, alpha, beta, lam, mu, scale):
    s = c + lam * a - mu * b
    ztol = 1e-9 * scale
    x = np.where(s > ztol, 1.0, 0.0)
    zero = np.flatnonzero(np.abs(s) <= ztol)
    rows, rhs = [], []
    if lam > 1e-9 * max(1.0, scale):
        rows.append(a)
        rhs.append(alpha)
    if mu > 1e-9 * max(1.0, scale):
        rows.append(b)
        rhs.append(beta)
    if len(zero) > 2 or (rows and len(zero) > len(rows)):
        return None
    if zero.size:
        x[zero] = 0.0
        if not rows:
            # multipliers inactive: any completion keeps the value; fill the
            # zero-coefficient coordinates just enough to cover the floor
            need = alpha - float(a @ x)
            room = beta - float(b @ x)
            if need > 0:
                got = 0.0
                for k in sorted(zero, key=lambda k: -(a[k] / b[k] if b[k] > _EPS else math.inf)):
                    if got >= need:
                        break
                    frac = 1.0 if a[k] <= _EPS else min(1.0, (need - got) / a[k])
                    if b[k] > _EPS:
                        frac = min(frac, max(0.0, room) / b[k]) if b[k] * frac > room else frac
                    x[k] = frac
                    got += frac * a[k]
                    room -= frac * b[k]
        else:
            A = np.array([[row[k] for k in zero] for row in rows])
            r = np.array(rhs) - np.array([float(row @ x) for row in rows])
            if len(zero) == len(rows):
                try:
                    sol = np.linalg.solve(A, r)
                except np.linalg.LinAlgError:
                    return None
            else:  # one unknown, two equations: must agree
                sol, *_ = np.linalg.lstsq(A, r, rcond=None)
                if np.max(np.abs(A @ sol - r)) > FEAS_TOL * scale:
                    return None
            if np.any(sol < -FEAS_TOL) or np.any(sol > 1 + FEAS_TOL):
                return None
            x[zero] = np.clip(sol, 0.0, 1.0)
    return x


def _box_lp2(c, a, b, alpha, beta):
    """max c'x over the unit box with a'x >= alpha, b'x <= beta. None if empty."""
    scale = max(1.0, float(np.abs(c).max(initial=0.0)), float(a.max(initial=0.0)),
                float(b.max(initial=0.0)), abs(alpha), abs(beta))
    if _knapsack_max(a, b, beta) < alpha - 1e-9 * scale:
        return None
    cands = _dual_candidates(c, a, b)
    S = c[None, :] + cands[:, :1] * a[None, :] - cands[:, 1:] * b[None, :]
    g = -cands[:, 0] * alpha + cands[:, 1] * beta + np.maximum(S, 0.0).sum(axis=1)
    i = int(np.argmin(g))
    lam, mu, vstar = cands[i, 0], cands[i, 1], float(g[i])
    x = _recover_primal(c, a, b, alpha, beta, lam, mu, scale)
    if x is not None:
        ok = (
            float(a @ x) >= alpha - FEAS_TOL * scale
            and float(b @ x) <= beta + FEAS_TOL * scale
            and float(c @ x) >= vstar - max(OBJ_RTOL * scale, OBJ_RTOL * abs(vstar))
        )
        if ok:
            return np.clip(x, 0.0, 1.0)
    # degenerate geometry: hand the instance to a general LP solver
    res = linprog(-c, A_ub=np.vstack([-a, b]), b_ub=np.array([-alpha, beta]),
                  bounds=[(0.0, 1.0)] * len(c), method="highs")
    if res.status != 0:
        return None
    return np.clip(res.x, 0.0, 1.0)


def solve_lp2(p1: ProblemPacket, p2: ProblemPacket, n_rbs: int) -> SolveResult:
    """Optimal fractional time split of all RBs between two packets.

    The second packet receives the complement 1-x of the first packet's
    share, so a single K-vector decides both. Exact to 1e-9 relative.
    """
    if p1.rates.shape != (n_rbs,) or p2.rates.shape != (n_rbs,):
        raise ValueError("rate vectors must have one entry per RB")
    c1, c2 = p1.coef, p2.coef
    beta = float(p2.rates.sum()) - p2.min_rate
    x = _box_lp2(c1 - c2, p1.rates, p2.rates, p1.min_rate, beta)
    if x is None:
        return SolveResult.infeasible()
    total = float(c1 @ x + c2 @ (1.0 - x))
    result = SolveResult(
        True,
        {p1.id: x, p2.id: 1.0 - x},
        total,
        tuple(sorted((p1.id, p2.id))),
    )
    return _validate(AllocationProblem([p1, p2], n_rbs), result, integral=False)


def lp2_grid_oracle(p1: ProblemPacket, p2: ProblemPacket, n_rbs: int, step: float) -> SolveResult:
    """Best point of the uniform grid over [0,1]^K meeting both rate floors.

    Plain enumeration, chunked so K=4..5 stays within memory at coarse steps.
    """
    if n_rbs > 5:
        raise InstanceTooLargeError("grid oracle supports at most 5 RBs")
    if step < 0.01 - 1e-12:
        raise ValueError("grid resolution below 0.01 is not supported")
    levels = np.linspace(0.0, 1.0, round(1.0 / step) + 1)
    c1, c2 = p1.coef, p2.coef
    tail_dims = min(n_rbs, 3)
    tail = np.stack(
        [g.ravel() for g in np.meshgrid(*([levels] * tail_dims), indexing="ij")], axis=1
    )
    head_iter = itertools.product(levels, repeat=n_rbs - tail_dims)
    best_obj, best_x = -np.inf, None
    for head in head_iter:
        X = np.hstack([np.broadcast_to(head, (tail.shape[0], len(head))), tail]) \
            if head else tail
        r1x = X @ p1.rates
        r2x = (1.0 - X) @ p2.rates
        feas = (r1x >= p1.min_rate - FEAS_TOL) & (r2x >= p2.min_rate - FEAS_TOL)
        if not feas.any():
            continue
        obj = X @ c1 + (1.0 - X) @ c2
        obj[~feas] = -np.inf
        i = int(np.argmax(obj))
        if obj[i] > best_obj:
            best_obj, best_x = float(obj[i]), X[i].copy()
    if best_x is None:
        return SolveResult.infeasible()
    return SolveResult(
        True,
        {p1.id: best_x, p2.id: 1.0 - best_x},
        best_obj,
        tuple(sorted((p1.id, p2.id))),
    )


def meets_threshold(query: FeasibilityQuery) -> bool:
    """Whether some allocation reaches total reward rate alpha (Theorem-style query)."""
    res = solve_ilp_subset(query.problem)
    return res.feasible and res.total_rr >= query.alpha - _EPS


def partition_feasibility(values) -> bool:
    """Decide equal-sum two-way partition via the two-packet allocation instance.

    Each integer becomes one RB's rate, both packets demand half the total,
    and RB exclusivity forces the split; the instance is feasible exactly
    when the partition exists.
    """
    values = list(values)
    total = sum(values)
    if total % 2 != 0:
        raise OddSumError("integer set with odd sum has no equal partition")
    if any(v <= 0 for v in values):
        raise ValueError("partition values must be positive integers")
    rates = np.array(values, dtype=float)
    half = total / 2.0
    pkts = [
        ProblemPacket(id=i, reward=1.0, length_bits=1.0, rates=rates.copy(), min_rate=half)
        for i in (1, 2)
    ]
    return solve_ilp_subset(AllocationProblem(pkts, len(values))).feasible
