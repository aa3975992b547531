"""Synthetic sensitivity scenarios and cross-city slice matching.

Every scenario returns a list of :class:`TrialResult` rows.  Randomness is
derived from ``(seed, scenario, parameter index, trial)`` so serial and
parallel runs give identical tables.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatchError, InvalidParameterError, UndefinedMetricError
from .metrics import (
    DEFAULT_MU,
    baseline_r2,
    baseline_rmse,
    nma_from_costs,
    nmd_from_costs,
    nsa,
    rrnsa_from_nsa,
    sp,
)
from .solver import SolverConfig, solve_km
from .tableau import (
    CellCoord,
    Dihedral,
    FlowVector,
    GridSpec,
    MobilityTableau,
    apply_permutation,
    dihedral_transform,
    extract_slice,
    slice_origins,
    swap_permutation,
    total_mass_cost,
)

SCENARIOS = (
    "uniform_scaling",
    "random_scaling",
    "spatial_exchange",
    "data_source",
    "mu_determination",
    "slice_match",
)

UNIFORM_PHIS = tuple(round(0.1 * i, 1) for i in range(1, 21))
RANDOM_PHIS = (0.6, 0.8, 1.05)
RANDOM_OMEGAS = (0.05, 0.1, 0.15, 0.2)

_SCENARIO_TAG = {name: i for i, name in enumerate(SCENARIOS)}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    grid: GridSpec = field(default_factory=lambda: GridSpec(20, 20))
    trials: int = 100
    seed: int = 0
    n_vectors: int = 2000
    mu: float = DEFAULT_MU
    phis: tuple[float, ...] | None = None
    omegas: tuple[float, ...] = RANDOM_OMEGAS
    ks: tuple[int, ...] | None = None
    n_exchanges: int = 5
    n_individuals: int = 1000
    trips_per_individual: int = 10
    replace_step: int | None = None
    slice_size: int = 5
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidParameterError(f"unknown scenario {self.scenario!r}; expected one of {SCENARIOS}")
        if self.trials < 1:
            raise InvalidParameterError("trials must be at least 1")
        if self.n_vectors < 1:
            raise InvalidParameterError("n_vectors must be at least 1")
        if self.phis is not None and any(not p > 0 for p in self.phis):
            raise InvalidParameterError("every phi must be positive")
        if any(not w >= 0 for w in self.omegas):
            raise InvalidParameterError("every omega must be non-negative")
        if self.n_individuals < 1 or self.trips_per_individual < 1:
            raise InvalidParameterError("individual and trip counts must be positive")
        if self.ks is not None:
            top = self.n_exchanges if self.scenario == "spatial_exchange" else self.max_k
            if any(k < 0 or k > top for k in self.ks):
                raise InvalidParameterError(f"k must lie in [0, {top}]")

    @property
    def step(self) -> int:
        return self.replace_step if self.replace_step is not None else max(1, self.n_individuals // 10)

    @property
    def max_k(self) -> int:
        return self.n_individuals // self.step

    def phi_values(self) -> tuple[float, ...]:
        if self.phis is not None:
            return tuple(self.phis)
        return RANDOM_PHIS if self.scenario == "random_scaling" else UNIFORM_PHIS

    def k_values(self) -> tuple[int, ...]:
        if self.ks is not None:
            return tuple(self.ks)
        if self.scenario == "spatial_exchange":
            return tuple(range(self.n_exchanges + 1))
        return tuple(range(self.max_k + 1))


@dataclass(frozen=True)
class TrialResult:
    scenario: str
    trial: int
    seed: int
    params: dict
    metrics: dict

    def row(self) -> dict:
        return {"scenario": self.scenario, "trial": self.trial, "seed": self.seed, **self.params, **self.metrics}


@dataclass(frozen=True)
class IndividualTripSet:
    individual: int
    trips: tuple[FlowVector, ...]


def _rng(seed, *stream) -> np.random.Generator:
    return np.random.default_rng([int(seed), *(int(s) for s in stream)])


def worker_count(workers: int | None = None) -> int:
    """Explicit count, else ``MOBSIM_THREADS``, else 1."""
    if workers is None:
        raw = os.environ.get("MOBSIM_THREADS")
        if raw is None:
            return 1
        try:
            workers = int(raw)
        except ValueError:
            raise InvalidParameterError(f"MOBSIM_THREADS must be a positive integer, got {raw!r}") from None
    if workers < 1:
        raise InvalidParameterError("worker count must be a positive integer")
    return workers


def _map(fn: Callable, tasks: Sequence, workers: int | None):
    n = worker_count(workers)
    if n == 1 or len(tasks) < 2:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, tasks))


def gen_random_tableau(grid: GridSpec, n_vectors: int, seed) -> MobilityTableau:
    """``n_vectors`` unit flows with endpoints drawn uniformly over the grid cells."""
    if n_vectors < 1:
        raise InvalidParameterError("n_vectors must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    m, n = grid.shape
    xs = rng.integers(1, m + 1, size=(n_vectors, 2))
    ys = rng.integers(1, n + 1, size=(n_vectors, 2))
    return MobilityTableau.from_records(
        grid, ((xs[i, 0], ys[i, 0], xs[i, 1], ys[i, 1], 1.0) for i in range(n_vectors))
    )


def reference_tableau(cfg: ScenarioConfig) -> MobilityTableau:
    return gen_random_tableau(cfg.grid, cfg.n_vectors, cfg.seed)


def _or_none(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def _nsa_value(X, Y, solver):
    return _or_none(nsa, X, Y, solver)


# -- uniform scaling ---------------------------------------------------------

def uniform_scaling_experiment(cfg: ScenarioConfig, X: MobilityTableau | None = None) -> list[TrialResult]:
    """Compare the reference against ``phi * X`` for every phi."""
    X = reference_tableau(cfg) if X is None else X
    a = total_mass_cost(X)
    rows = []
    for phi in cfg.phi_values():
        Y = X.scaled(phi)
        c = solve_km(X, Y, cfg.solver).total_cost
        value = _nsa_value(X, Y, cfg.solver)
        rows.append(TrialResult(
            "uniform_scaling", 0, cfg.seed, {"phi": phi},
            {
                "md": c * X.grid.cell_width,
                "nmd": _or_none(nmd_from_costs, a, total_mass_cost(Y), c),
                "nsa": value,
                "rrnsa": None if value is None else rrnsa_from_nsa(value, cfg.mu),
            },
        ))
    return rows


# -- random scaling ----------------------------------------------------------

def random_scale(X: MobilityTableau, phi: float, omega: float, rng: np.random.Generator) -> MobilityTableau:
    """Multiply every flow by its own draw of ``phi + omega * U(0, 1)``."""
    factors = phi + omega * rng.random(len(X))
    return X.with_flows({v: w * f for (v, w), f in zip(X.flows.items(), factors)})


def _random_scaling_trial(task):
    cfg, X, pi, wi, trial = task
    phi, omega = cfg.phi_values()[pi], cfg.omegas[wi]
    Y = random_scale(X, phi, omega, _rng(cfg.seed, _SCENARIO_TAG["random_scaling"], pi, wi, trial))
    value = _nsa_value(X, Y, cfg.solver)
    return TrialResult(
        "random_scaling", trial, cfg.seed, {"phi": phi, "omega": omega},
        {"nsa": value, "rrnsa": None if value is None else rrnsa_from_nsa(value, cfg.mu)},
    )


def random_scaling_experiment(cfg: ScenarioConfig, X: MobilityTableau | None = None,
                              workers: int | None = None) -> list[TrialResult]:
    X = reference_tableau(cfg) if X is None else X
    tasks = [
        (cfg, X, pi, wi, t)
        for pi in range(len(cfg.phi_values()))
        for wi in range(len(cfg.omegas))
        for t in range(cfg.trials)
    ]
    return _map(_random_scaling_trial, tasks, workers)


# -- spatial exchange --------------------------------------------------------

def _neighbours(c: CellCoord, grid: GridSpec) -> list[CellCoord]:
    out = []
    for dx, dy in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        if grid.contains(c.x + dx, c.y + dy):
            out.append(CellCoord(c.x + dx, c.y + dy))
    return out


def sample_exchanges(grid: GridSpec, n_neighbour: int, n_random: int, rng: np.random.Generator):
    """Disjoint cell swaps: ``n_neighbour`` 4-adjacent pairs then ``n_random`` arbitrary pairs."""
    cells = grid.cells()
    if 2 * (n_neighbour + n_random) > len(cells):
        raise DimensionMismatchError("grid too small for the requested number of disjoint exchanges")
    used: set[CellCoord] = set()
    swaps = []
    attempts = 0
    while len(swaps) < n_neighbour:
        attempts += 1
        if attempts > 10_000:
            raise DimensionMismatchError("could not place disjoint neighbourhood exchanges")
        c = cells[rng.integers(len(cells))]
        if c in used:
            continue
        options = [d for d in _neighbours(c, grid) if d not in used]
        if not options:
            continue
        d = options[rng.integers(len(options))]
        used.update((c, d))
        swaps.append((c, d))
    free = [c for c in cells if c not in used]
    picks = rng.choice(len(free), size=2 * n_random, replace=False)
    for i in range(n_random):
        swaps.append((free[picks[2 * i]], free[picks[2 * i + 1]]))
    return swaps


def _spatial_exchange_trial(task):
    cfg, X, ki, trial = task
    k = cfg.k_values()[ki]
    rng = _rng(cfg.seed, _SCENARIO_TAG["spatial_exchange"], ki, trial)
    swaps = sample_exchanges(X.grid, k, cfg.n_exchanges - k, rng)
    Y = apply_permutation(X, swap_permutation(swaps))
    plan = solve_km(X, Y, cfg.solver)
    return TrialResult("spatial_exchange", trial, cfg.seed, {"k": k}, {"sp": _or_none(sp, plan)})


def spatial_exchange_experiment(cfg: ScenarioConfig, X: MobilityTableau | None = None,
                                workers: int | None = None) -> list[TrialResult]:
    X = reference_tableau(cfg) if X is None else X
    tasks = [(cfg, X, ki, t) for ki in range(len(cfg.k_values())) for t in range(cfg.trials)]
    return _map(_spatial_exchange_trial, tasks, workers)


# -- data source -------------------------------------------------------------

def gen_individuals(grid: GridSpec, count: int, trips: int, rng: np.random.Generator,
                    first_id: int = 0) -> list[IndividualTripSet]:
    m, n = grid.shape
    xs = rng.integers(1, m + 1, size=(count, trips, 2))
    ys = rng.integers(1, n + 1, size=(count, trips, 2))
    return [
        IndividualTripSet(
            first_id + i,
            tuple(FlowVector(int(xs[i, t, 0]), int(ys[i, t, 0]), int(xs[i, t, 1]), int(ys[i, t, 1]))
                  for t in range(trips)),
        )
        for i in range(count)
    ]


def aggregate(grid: GridSpec, people: Sequence[IndividualTripSet]) -> MobilityTableau:
    return MobilityTableau.from_records(grid, ((*v, 1.0) for p in people for v in p.trips))


def population(cfg: ScenarioConfig) -> list[IndividualTripSet]:
    return gen_individuals(cfg.grid, cfg.n_individuals, cfg.trips_per_individual,
                           _rng(cfg.seed, _SCENARIO_TAG["data_source"]))


def _data_source_trial(task):
    cfg, U, X, ki, trial = task
    k = cfg.k_values()[ki]
    rng = _rng(cfg.seed, _SCENARIO_TAG["data_source"], ki, trial)
    n_fresh = k * cfg.step
    keep = rng.choice(len(U), size=len(U) - n_fresh, replace=False)
    fresh = gen_individuals(cfg.grid, n_fresh, cfg.trips_per_individual, rng, first_id=len(U))
    Y = aggregate(cfg.grid, [U[i] for i in sorted(keep)] + fresh)
    c = solve_km(X, Y, cfg.solver).total_cost
    return TrialResult(
        "data_source", trial, cfg.seed, {"k": k, "replaced": n_fresh},
        {"nma": _or_none(nma_from_costs, total_mass_cost(X), total_mass_cost(Y), c)},
    )


def data_source_experiment(cfg: ScenarioConfig, workers: int | None = None) -> list[TrialResult]:
    U = population(cfg)
    X = aggregate(cfg.grid, U)
    tasks = [(cfg, U, X, ki, t) for ki in range(len(cfg.k_values())) for t in range(cfg.trials)]
    return _map(_data_source_trial, tasks, workers)


# -- mu determination --------------------------------------------------------

def _mu_trial(task):
    from .metrics import random_cell_permutation

    cfg, X, trial = task
    rng = _rng(cfg.seed, _SCENARIO_TAG["mu_determination"], trial)
    Y = apply_permutation(X, random_cell_permutation(X.grid, rng))
    return TrialResult("mu_determination", trial, cfg.seed, {}, {"nsa": _nsa_value(X, Y, cfg.solver)})


def mu_determination_experiment(cfg: ScenarioConfig, X: MobilityTableau | None = None,
                                workers: int | None = None) -> list[TrialResult]:
    """NSA between the reference and independently region-shuffled copies."""
    X = reference_tableau(cfg) if X is None else X
    return _map(_mu_trial, [(cfg, X, t) for t in range(cfg.trials)], workers)


# -- slice matching ----------------------------------------------------------

@dataclass(frozen=True)
class SliceScore:
    window: CellCoord
    element: Dihedral
    rrnsa: float | None
    nsa: float | None
    r2: float | None
    rmse: float | None

    def row(self) -> dict:
        return {
            "window_x": self.window.x,
            "window_y": self.window.y,
            "element": self.element.value,
            "rrnsa": self.rrnsa,
            "nsa": self.nsa,
            "r2": self.r2,
            "rmse": self.rmse,
        }


@dataclass(frozen=True)
class SliceMatchResult:
    source_anchor: CellCoord
    slice_size: int
    scores: list[SliceScore]
    best: SliceScore | None

    def ranked(self) -> list[SliceScore]:
        """Scores by descending RRNSA; undefined scores last, original order on ties."""
        return sorted(self.scores, key=lambda s: -s.rrnsa if s.rrnsa is not None else np.inf)

    def heatmap(self, grid: GridSpec, metric: str = "rrnsa", best: str = "max") -> np.ndarray:
        """Per-window score under the most favourable element, NaN where undefined."""
        rows, cols = grid.rows_m - self.slice_size + 1, grid.cols_n - self.slice_size + 1
        out = np.full((rows, cols), np.nan)
        pick = max if best == "max" else min
        for s in self.scores:
            value = getattr(s, metric)
            if value is None:
                continue
            cur = out[s.window.x - 1, s.window.y - 1]
            out[s.window.x - 1, s.window.y - 1] = value if np.isnan(cur) else pick(cur, value)
        return out


def window_flow_totals(S: MobilityTableau, size: int) -> np.ndarray:
    """Total flow of intra-window vectors for every stride-1 window, indexed ``[x-1, y-1]``."""
    m, n = S.grid.shape
    if size > m or size > n:
        raise DimensionMismatchError(f"slice size {size} exceeds the {m}x{n} grid")
    out = np.zeros((m - size + 1, n - size + 1))
    if not S.flows:
        return out
    c, w = S.arrays()
    lo_x, hi_x = np.minimum(c[:, 0], c[:, 2]), np.maximum(c[:, 0], c[:, 2])
    lo_y, hi_y = np.minimum(c[:, 1], c[:, 3]), np.maximum(c[:, 1], c[:, 3])
    for x0 in range(1, m - size + 2):
        in_x = (lo_x >= x0) & (hi_x <= x0 + size - 1)
        for y0 in range(1, n - size + 2):
            mask = in_x & (lo_y >= y0) & (hi_y <= y0 + size - 1)
            out[x0 - 1, y0 - 1] = w[mask].sum()
    return out


def max_flow_window(S: MobilityTableau, size: int) -> CellCoord:
    """Top-left corner of the window carrying the most intra-window flow (first on ties)."""
    totals = window_flow_totals(S, size)
    x, y = np.unravel_index(int(np.argmax(totals)), totals.shape)
    return CellCoord(int(x) + 1, int(y) + 1)


def _score(src, cand, mu, solver, window, element):
    value = _nsa_value(src, cand, solver)
    return SliceScore(
        window,
        element,
        None if value is None else rrnsa_from_nsa(value, mu),
        value,
        _or_none(baseline_r2, src, cand),
        _or_none(baseline_rmse, src, cand),
    )


def _slice_task(task):
    src, target, size, window, mu, solver = task
    piece = extract_slice(target, window, size)
    return [_score(src, dihedral_transform(piece, g), mu, solver, window, g) for g in Dihedral]


def slice_match_search(source: MobilityTableau, target: MobilityTableau, slice_size: int,
                       source_anchor=None, mu: float = DEFAULT_MU, cfg: SolverConfig | None = None,
                       workers: int | None = None) -> SliceMatchResult:
    """Score every target window under all eight symmetries against one source slice.

    ``source_anchor`` defaults to the source window with the largest total flow.
    R^2 takes the source slice as the reference.
    """
    for g in (source.grid, target.grid):
        if slice_size > g.rows_m or slice_size > g.cols_n:
            raise DimensionMismatchError(f"slice size {slice_size} exceeds a {g.rows_m}x{g.cols_n} grid")
    cfg = cfg or SolverConfig()
    anchor = max_flow_window(source, slice_size) if source_anchor is None else CellCoord(*source_anchor)
    src = extract_slice(source, anchor, slice_size)
    # windows are scored against a slice on the source's cell width
    target = MobilityTableau(replace(target.grid, cell_width=source.grid.cell_width), target.flows)
    tasks = [(src, target, slice_size, w, mu, cfg) for w in slice_origins(target.grid, slice_size)]
    scores = [s for chunk in _map(_slice_task, tasks, workers) for s in chunk]
    best = None
    for s in scores:
        if s.rrnsa is not None and (best is None or s.rrnsa > best.rrnsa):
            best = s
    return SliceMatchResult(anchor, slice_size, scores, best)


# -- summaries ---------------------------------------------------------------

def summarize(results: Sequence[TrialResult], metric: str) -> list[dict]:
    """Mean and variance of ``metric`` per parameter combination, undefined values skipped."""
    groups: dict[tuple, list] = {}
    order: list[tuple] = []
    for r in results:
        key = tuple(sorted(r.params.items()))
        if key not in groups:
            groups[key] = []
            order.append(key)
        value = r.metrics.get(metric)
        if value is not None:
            groups[key].append(value)
    out = []
    for key in order:
        vals = np.array(groups[key], dtype=float)
        out.append({
            **dict(key),
            "metric": metric,
            "n": len(vals),
            "mean": float(vals.mean()) if len(vals) else None,
            "var": float(vals.var()) if len(vals) else None,
        })
    return out


def run_scenario(cfg: ScenarioConfig, workers: int | None = None) -> list[TrialResult]:
    """Dispatch on ``cfg.scenario`` (slice matching has its own entry point)."""
    if cfg.scenario == "uniform_scaling":
        return uniform_scaling_experiment(cfg)
    if cfg.scenario == "random_scaling":
        return random_scaling_experiment(cfg, workers=workers)
    if cfg.scenario == "spatial_exchange":
        return spatial_exchange_experiment(cfg, workers=workers)
    if cfg.scenario == "data_source":
        return data_source_experiment(cfg, workers=workers)
    if cfg.scenario == "mu_determination":
        return mu_determination_experiment(cfg, workers=workers)
    raise InvalidParameterError("slice_match runs through slice_match_search, not run_scenario")
