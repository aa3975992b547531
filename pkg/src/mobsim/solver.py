"""Least-cost transformation between two mobility tableaus.

Two exact solvers share one contract:

* :func:`solve_km` -- Kuhn-Munkres with vertex multiplicities on the
  bipartite graph of origin/destination vector types plus one zero vertex
  per side (the production path).
* :func:`solve_oracle` -- successive shortest paths with Bellman-Ford on the
  equivalent transportation network (the reference).

Both run on the tableaus after common flows are cancelled, and both return a
:class:`TransportPlan` in cell units.
"""
from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError, SolverFailureError
from .tableau import FlowVector, MobilityTableau, reduce_common

log = logging.getLogger(__name__)

TieBreak = Literal["prefer_shift", "prefer_add_delete"]


@dataclass(frozen=True)
class SolverConfig:
    cost_tolerance: float = 1e-9
    tie_break: TieBreak = "prefer_shift"
    # largest (I+1)*(J+1) weight table held in memory; rows are recomputed beyond it
    dense_budget: int = 10**8
    max_augmentations: int | None = None
    # "auto" uses the compiled kernel whenever the weight table fits the dense budget
    backend: Literal["auto", "compiled", "python"] = "auto"

    def __post_init__(self):
        if not self.cost_tolerance >= 0:
            raise InvalidParameterError("cost_tolerance must be non-negative")
        if self.tie_break not in ("prefer_shift", "prefer_add_delete"):
            raise InvalidParameterError(f"unknown tie_break {self.tie_break!r}")
        if self.backend not in ("auto", "compiled", "python"):
            raise InvalidParameterError(f"unknown backend {self.backend!r}")


@dataclass(frozen=True)
class TransportPlan:
    """An optimal transformation, expressed on the reduced vector types.

    ``deletes[v]`` counts origin vectors removed, ``adds[v]`` destination
    vectors created and ``shifts[(v, v2)]`` origin vectors moved onto
    destination vectors.  Costs are in cell units.
    """

    deletes: dict[FlowVector, float]
    adds: dict[FlowVector, float]
    shifts: dict[tuple[FlowVector, FlowVector], float]
    total_cost: float
    shift_cost_total: float
    add_delete_cost_total: float
    stats: dict = field(default_factory=dict, compare=False)

    @property
    def is_empty(self) -> bool:
        return not (self.deletes or self.adds or self.shifts)


class _Problem:
    """Reduced origin/destination vector types with their costs."""

    def __init__(self, X: MobilityTableau, Y: MobilityTableau):
        if not X.grid.same_geometry(Y.grid):
            raise DimensionMismatchError(f"grids differ: {X.grid} vs {Y.grid}")
        self.n_types_before = (len(X), len(Y))
        Xr, Yr = reduce_common(X, Y)
        self.origins = list(Xr.flows.keys())
        self.dests = list(Yr.flows.keys())
        self.xc, self.M = Xr.arrays()
        self.yc, self.N = Yr.arrays()
        self.alpha = np.abs(self.xc[:, 2] - self.xc[:, 0]) + np.abs(self.xc[:, 3] - self.xc[:, 1])
        self.beta = np.abs(self.yc[:, 2] - self.yc[:, 0]) + np.abs(self.yc[:, 3] - self.yc[:, 1])
        self.I, self.J = len(self.origins), len(self.dests)
        self.scale = max(float(self.M.sum()), float(self.N.sum()), 1.0)

    def gamma_row(self, i: int) -> np.ndarray:
        return np.abs(self.yc - self.xc[i]).sum(axis=1)

    def gamma(self) -> np.ndarray:
        return np.abs(self.xc[:, None, :] - self.yc[None, :, :]).sum(axis=2)

    def build_plan(self, D, A, T: dict, cfg: SolverConfig, stats: dict) -> TransportPlan:
        """Canonicalise ties, drop numerical dust and assemble the plan."""
        eps = 1e-12 * self.scale
        D = np.where(D > eps, D, 0.0)
        A = np.where(A > eps, A, 0.0)
        T = {k: t for k, t in T.items() if t > eps}
        tol = cfg.cost_tolerance
        if cfg.tie_break == "prefer_shift":
            for i in np.flatnonzero(D):
                if D[i] <= 0:
                    continue
                row = self.gamma_row(i)
                for j in np.flatnonzero(A):
                    if D[i] <= 0:
                        break
                    if A[j] > 0 and row[j] <= self.alpha[i] + self.beta[j] + tol:
                        t = min(D[i], A[j])
                        D[i] -= t
                        A[j] -= t
                        T[(i, j)] = T.get((i, j), 0.0) + t
        else:
            for (i, j), t in sorted(T.items()):
                g = abs(self.xc[i] - self.yc[j]).sum()
                if g >= self.alpha[i] + self.beta[j] - tol:
                    D[i] += t
                    A[j] += t
                    del T[(i, j)]
        D = np.where(D > eps, D, 0.0)
        A = np.where(A > eps, A, 0.0)
        T = {k: t for k, t in sorted(T.items()) if t > eps}

        shift_terms = []
        shifts = {}
        for (i, j), t in T.items():
            shift_terms.append(t * float(np.abs(self.xc[i] - self.yc[j]).sum()))
            shifts[(self.origins[i], self.dests[j])] = float(t)
        shift_total = math.fsum(shift_terms)
        ad_total = math.fsum(np.concatenate([D * self.alpha, A * self.beta]))
        stats = dict(stats)
        stats.update(
            origin_types_before=self.n_types_before[0],
            dest_types_before=self.n_types_before[1],
            origin_types_after=self.I,
            dest_types_after=self.J,
        )
        return TransportPlan(
            deletes={self.origins[i]: float(D[i]) for i in np.flatnonzero(D)},
            adds={self.dests[j]: float(A[j]) for j in np.flatnonzero(A)},
            shifts=shifts,
            total_cost=float(shift_total + ad_total),
            shift_cost_total=float(shift_total),
            add_delete_cost_total=ad_total,
            stats=stats,
        )


def solve_oracle(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None) -> TransportPlan:
    """Reference solver: successive shortest paths (Bellman-Ford) on the transportation network.

    Network: source -> origin type i (capacity M_i) and source -> add-pool
    (capacity sum N); i -> destination type j at shift cost, i -> delete-pool
    at length(i), add-pool -> j at length(j), add-pool -> delete-pool at 0;
    j -> sink (capacity N_j), delete-pool -> sink (capacity sum M).
    """
    cfg = cfg or SolverConfig()
    P = _Problem(X, Y)
    I, J = P.I, P.J
    if I == 0 and J == 0:
        return P.build_plan(np.zeros(0), np.zeros(0), {}, cfg, {"augmentations": 0})

    src, add_pool = 0, I + 1
    dst0 = I + 2
    del_pool, sink = I + J + 2, I + J + 3
    n_nodes = I + J + 4
    # edge arrays: to, cap, cost, rev index
    adj: list[list[int]] = [[] for _ in range(n_nodes)]
    to, cap, cost = [], [], []

    def add_edge(u, v, c, w):
        adj[u].append(len(to))
        to.append(v), cap.append(c), cost.append(w)
        adj[v].append(len(to))
        to.append(u), cap.append(0.0), cost.append(-w)

    inf = float("inf")
    sumM, sumN = float(P.M.sum()), float(P.N.sum())
    for i in range(I):
        add_edge(src, 1 + i, float(P.M[i]), 0.0)
    add_edge(src, add_pool, sumN, 0.0)
    gamma = P.gamma() if I and J else np.zeros((I, J))
    shift_edge = {}
    for i in range(I):
        for j in range(J):
            shift_edge[(i, j)] = len(to)
            add_edge(1 + i, dst0 + j, inf, float(gamma[i, j]))
        add_edge(1 + i, del_pool, inf, float(P.alpha[i]))
    del_edge = [adj[1 + i][-1] for i in range(I)]
    for j in range(J):
        add_edge(add_pool, dst0 + j, inf, float(P.beta[j]))
    add_edges = [adj[add_pool][1 + j] for j in range(J)]
    add_edge(add_pool, del_pool, inf, 0.0)
    for j in range(J):
        add_edge(dst0 + j, sink, float(P.N[j]), 0.0)
    add_edge(del_pool, sink, sumM, 0.0)

    eps = 1e-12 * P.scale
    required = sumM + sumN
    sent = 0.0
    n_aug = 0
    while required - sent > eps:
        dist = [inf] * n_nodes
        prev_edge = [-1] * n_nodes
        in_queue = [False] * n_nodes
        dist[src] = 0.0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            in_queue[u] = False
            for e in adj[u]:
                if cap[e] > eps and dist[u] + cost[e] < dist[to[e]] - 1e-12:
                    dist[to[e]] = dist[u] + cost[e]
                    prev_edge[to[e]] = e
                    if not in_queue[to[e]]:
                        in_queue[to[e]] = True
                        queue.append(to[e])
        if dist[sink] == inf:
            raise SolverFailureError("transportation network has no augmenting path")
        push = required - sent
        v = sink
        while v != src:
            e = prev_edge[v]
            push = min(push, cap[e])
            v = to[e ^ 1]
        v = sink
        while v != src:
            e = prev_edge[v]
            cap[e] -= push
            cap[e ^ 1] += push
            v = to[e ^ 1]
        sent += push
        n_aug += 1

    def flow(e):
        return cap[e ^ 1]

    D = np.array([flow(e) for e in del_edge]) if I else np.zeros(0)
    A = np.array([flow(e) for e in add_edges]) if J else np.zeros(0)
    T = {k: flow(e) for k, e in shift_edge.items() if flow(e) > 0}
    return P.build_plan(D, A, T, cfg, {"augmentations": n_aug})


class _PointSetKM:
    """Maximum-weight perfect matching where every vertex carries a multiplicity.

    Left vertices are the origin types plus the zero vertex (index ``I``);
    right vertices are the destination types plus the zero vertex (index ``J``).
    Weights are negated costs, labels satisfy ``lx[i] + ly[j] >= w(i, j)``
    and flow only ever sits on tight edges.
    """

    def __init__(self, P: _Problem, cfg: SolverConfig, refine=None):
        self.P = P
        self.cfg = cfg
        # (lx, ly, sign): re-solve on the edges tight under labels (lx, ly),
        # weighting shifts by sign * cost and everything else by 0
        self.refine = refine
        I, J = P.I, P.J
        self.nL, self.nR = I + 1, J + 1
        self.pL = np.concatenate([P.M, [P.N.sum()]])
        self.pR = np.concatenate([P.N, [P.M.sum()]])
        self.eps = 1e-12 * P.scale
        self.tol = max(cfg.cost_tolerance, 1e-12)
        self._dense = None
        if self.nL * self.nR <= cfg.dense_budget:
            W = np.zeros((self.nL, self.nR))
            W[:I, :J] = -P.gamma()
            W[:I, J] = -P.alpha
            W[I, :J] = -P.beta
            if refine is not None:
                lx, ly, sign = refine
                bonus = np.zeros_like(W)
                bonus[:I, :J] = -sign * W[:I, :J]
                W = np.where(lx[:, None] + ly[None, :] - W < 0.5, bonus, -np.inf)
            self._dense = W
        # flow[k][j] for positive flows, mirrored by column
        self.row_flow: list[dict[int, float]] = [{} for _ in range(self.nL)]
        self.col_flow: list[dict[int, float]] = [{} for _ in range(self.nR)]
        self.augmentations = 0
        self.label_updates = 0

    def _compute_row(self, k: int) -> np.ndarray:
        P = self.P
        if k == P.I:
            w = np.concatenate([-P.beta.astype(float), [0.0]])
        else:
            w = np.concatenate([-P.gamma_row(k).astype(float), [-float(P.alpha[k])]])
        if self.refine is None:
            return w
        lx, ly, sign = self.refine
        bonus = np.zeros_like(w)
        if k < P.I:
            bonus[:-1] = -sign * w[:-1]
        return np.where(lx[k] + ly - w < 0.5, bonus, -np.inf)

    def row(self, k: int) -> np.ndarray:
        if self._dense is not None:
            return self._dense[k]
        return self._compute_row(k)

    def _push(self, k: int, j: int, amount: float):
        f = self.row_flow[k].get(j, 0.0) + amount
        if f > self.eps:
            self.row_flow[k][j] = f
            self.col_flow[j][k] = f
        else:
            self.row_flow[k].pop(j, None)
            self.col_flow[j].pop(k, None)

    def _initial(self):
        # starting labels: each left vertex takes its best edge, right labels zero
        self.lx = np.array([self.row(k).max() for k in range(self.nL)])
        self.ly = np.zeros(self.nR)
        for k in range(self.nL):
            if self.pL[k] <= self.eps:
                continue
            tight = np.flatnonzero(self.lx[k] + self.ly - self.row(k) <= self.tol)
            for j in tight:
                if self.pR[j] <= self.eps:
                    continue
                t = min(self.pL[k], self.pR[j])
                self._push(k, int(j), t)
                self.pL[k] -= t
                self.pR[j] -= t
                self._zero_small(k, int(j))
                if self.pL[k] <= 0:
                    break

    def _zero_small(self, k, j):
        if self.pL[k] <= self.eps:
            self.pL[k] = 0.0
        if self.pR[j] <= self.eps:
            self.pR[j] = 0.0

    def _augment_from(self, root: int):
        """Grow an alternating tree from ``root`` and push flow along the path found."""
        nR = self.nR
        in_S = np.zeros(self.nL, dtype=bool)
        in_T = np.zeros(nR, dtype=bool)
        in_S[root] = True
        slack = self.lx[root] + self.ly - self.row(root)
        slack_from = np.full(nR, root)
        reached_via: dict[int, int] = {}
        while True:
            cand = np.where(in_T, np.inf, slack)
            j = int(np.argmin(cand))
            g = cand[j]
            if g == np.inf:
                raise SolverFailureError("no augmenting path among the admissible edges")
            if g > self.tol:
                # no tight edge leaves the tree: shift labels so one appears
                self.lx[in_S] -= g
                self.ly[in_T] += g
                slack[~in_T] -= g
                self.label_updates += 1
            if self.pR[j] > self.eps:
                break
            in_T[j] = True
            for k in sorted(self.col_flow[j]):
                if in_S[k]:
                    continue
                in_S[k] = True
                reached_via[k] = j
                new = self.lx[k] + self.ly - self.row(k)
                better = (new < slack) & ~in_T
                slack[better] = new[better]
                slack_from[better] = k

        # walk back to the root: forward edges (k -> j) gain flow, backward lose it
        path = []
        jj = j
        while True:
            k = int(slack_from[jj])
            path.append((k, jj, +1))
            if k == root:
                break
            jb = reached_via[k]
            path.append((k, jb, -1))
            jj = jb
        amount = min(self.pL[root], self.pR[j])
        for k, jb, sign in path:
            if sign < 0:
                amount = min(amount, self.row_flow[k][jb])
        for k, jb, sign in path:
            self._push(k, jb, sign * amount)
        self.pL[root] -= amount
        self.pR[j] -= amount
        self._zero_small(root, j)
        self.augmentations += 1

    def budget(self) -> int:
        if self.cfg.max_augmentations is not None:
            return self.cfg.max_augmentations
        return 50 * (self.nL + self.nR) ** 2 + 1000

    def run_compiled(self):
        from ._kernel import km_dense

        W = self._dense if self._dense is not None else np.vstack([self._compute_row(k) for k in range(self.nL)])
        F, self.lx, self.ly, self.augmentations, self.label_updates, ok = km_dense(
            np.ascontiguousarray(W, dtype=float), self.pL, self.pR, self.tol, self.eps, self.budget()
        )
        if not ok:
            raise SolverFailureError(
                f"point-set Kuhn-Munkres did not converge within {self.budget()} augmentations"
            )
        I, J = self.P.I, self.P.J
        T = {(int(i), int(j)): float(F[i, j]) for i, j in zip(*np.nonzero(F[:I, :J]))}
        return F[:I, J].copy(), F[I, :J].copy(), T

    def run(self):
        self._initial()
        budget = self.budget()
        root = 0
        while True:
            while root < self.nL and self.pL[root] <= self.eps:
                root += 1
            if root == self.nL:
                break
            if self.augmentations >= budget:
                raise SolverFailureError(
                    f"point-set Kuhn-Munkres did not converge within {budget} augmentations"
                )
            self._augment_from(root)
        I, J = self.P.I, self.P.J
        D = np.array([self.row_flow[i].get(J, 0.0) for i in range(I)])
        A = np.array([self.row_flow[I].get(j, 0.0) for j in range(J)])
        T = {(i, j): f for i in range(I) for j, f in self.row_flow[i].items() if j != J}
        return D, A, T


def solve_km(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None) -> TransportPlan:
    """Optimal plan via Kuhn-Munkres with vertex multiplicities."""
    cfg = cfg or SolverConfig()
    P = _Problem(X, Y)
    if P.I == 0 and P.J == 0:
        return P.build_plan(np.zeros(0), np.zeros(0), {}, cfg, {"augmentations": 0, "label_updates": 0})
    km = _PointSetKM(P, cfg)
    compiled = cfg.backend == "compiled" or (cfg.backend == "auto" and km._dense is not None)
    D, A, T = km.run_compiled() if compiled else km.run()
    log.debug("km solved %dx%d types in %d augmentations", P.I, P.J, km.augmentations)
    stats = {"augmentations": km.augmentations, "label_updates": km.label_updates}
    if P.I and P.J:
        # Optimal plans can differ in how much of the cost is shifting.  Every
        # optimal plan lives on the edges tight under the final labels (which
        # are integers, as all weights are), so a second pass over those edges
        # picks the plan with the most (or least) shift cost.
        sign = 1.0 if cfg.tie_break == "prefer_shift" else -1.0
        km2 = _PointSetKM(P, cfg, refine=(km.lx, km.ly, sign))
        D, A, T = km2.run_compiled() if compiled else km2.run()
        stats.update(refine_augmentations=km2.augmentations, refine_label_updates=km2.label_updates)
    D, A = _conserve(P, T)
    return P.build_plan(D, A, T, cfg, stats)


def _conserve(P: _Problem, T: dict):
    """Deletes and adds read off as what the shifts leave of each multiplicity.

    The zero vertices carry the whole mass, so the flows on their edges pick up
    round-off of order ulp(total) per augmentation; the residual form is exact
    when nothing is shifted.
    """
    out = np.zeros(P.I)
    into = np.zeros(P.J)
    for (i, j), t in T.items():
        out[i] += t
        into[j] += t
    return np.maximum(P.M - out, 0.0), np.maximum(P.N - into, 0.0)


def min_cost(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None) -> float:
    """Least transformation cost from ``X`` to ``Y`` in cell units."""
    return solve_km(X, Y, cfg).total_cost


def plan_residuals(plan: TransportPlan, X: MobilityTableau, Y: MobilityTableau) -> tuple[float, float]:
    """Largest violation of flow conservation on each side of ``plan``."""
    Xr, Yr = reduce_common(X, Y)
    out_x = {v: plan.deletes.get(v, 0.0) for v in Xr.flows}
    in_y = {v: plan.adds.get(v, 0.0) for v in Yr.flows}
    for (v, v2), t in plan.shifts.items():
        out_x[v] = out_x.get(v, 0.0) + t
        in_y[v2] = in_y.get(v2, 0.0) + t
    rx = max((abs(out_x.get(v, 0.0) - Xr.get(v)) for v in set(out_x) | set(Xr.flows)), default=0.0)
    ry = max((abs(in_y.get(v, 0.0) - Yr.get(v)) for v in set(in_y) | set(Yr.flows)), default=0.0)
    return rx, ry
