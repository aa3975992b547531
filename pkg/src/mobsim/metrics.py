"""Similarity metrics built on the least transformation cost.

Volume: :func:`md`, :func:`nmd`.  Spatial: :func:`sp`.  Mass inclusiveness:
:func:`nma`.  Structure: :func:`nsa`, :func:`rrnsa`.  Traditional
baselines :func:`baseline_rmse` and :func:`baseline_r2` are provided for
side-by-side reporting.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    InvalidParameterError,
    SolverFailureError,
    UndefinedMetricError,
)
from .solver import SolverConfig, TransportPlan, min_cost, solve_km
from .tableau import GridSpec, MobilityTableau, apply_permutation, normalize, total_mass_cost

log = logging.getLogger(__name__)

#: default random-structure baseline for RRNSA (mean NSA of region-shuffled tableaus)
DEFAULT_MU = 0.7522

# tolerated excess of the raw law-of-cosines argument beyond [-1, 1]
ANGLE_ALARM = 1e-6
ANGLE_SNAP = 1e-12


def _check_grids(X: MobilityTableau, Y: MobilityTableau):
    if not X.grid.same_geometry(Y.grid):
        raise DimensionMismatchError(f"grids differ: {X.grid} vs {Y.grid}")


def md(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None) -> float:
    """Manhattan distance between tableaus, in kilometres."""
    _check_grids(X, Y)
    return min_cost(X, Y, cfg) * X.grid.cell_width


def nmd_from_costs(a: float, b: float, c: float) -> float:
    if not a + b > 0:
        raise UndefinedMetricError("NMD is undefined when both tableaus have zero mass cost")
    return min(1.0, max(0.0, 1.0 - c / (a + b)))


def nmd(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None) -> float:
    """Normalized Manhattan distance: 1 for identical tableaus, 0 for nothing in common."""
    _check_grids(X, Y)
    return nmd_from_costs(total_mass_cost(X), total_mass_cost(Y), min_cost(X, Y, cfg))


def sp(plan: TransportPlan, tol: float = 1e-12) -> float:
    """Share of the optimal cost spent on shifts."""
    total = plan.shift_cost_total + plan.add_delete_cost_total
    if not total > tol:
        raise UndefinedMetricError("SP is undefined for a zero-cost transformation")
    return plan.shift_cost_total / total


def mass_angle_cosine(a: float, b: float, c: float) -> float:
    """Raw law-of-cosines argument for the angle at the empty set (unclamped)."""
    return (a * a + b * b - c * c) / (2 * a * b)


def mass_angle(a: float, b: float, c: float) -> float:
    """Angle opposite side ``c`` in the triangle (a, b, c), in radians.

    Evaluated through the half-angle form ``sin(C/2)^2 = (c^2 - (a-b)^2) / 4ab``,
    which equals the law-of-cosines angle but keeps full precision near 0.
    """
    if not (a > 0 and b > 0):
        raise UndefinedMetricError("mass angle needs two tableaus with positive mass cost")
    raw = mass_angle_cosine(a, b, c)
    if raw > 1 + ANGLE_ALARM or raw < -1 - ANGLE_ALARM:
        raise SolverFailureError(
            f"cost triangle ({a}, {b}, {c}) violates the triangle inequality: cos = {raw}"
        )
    lo, hi = sorted((a, b))
    # the angle is a square root of c - (hi - lo), so round-off in c would be
    # amplified to ~1e-8; snap factors below the cost resolution to zero
    snap = ANGLE_SNAP * (a + b)
    near = c - hi + lo
    if near <= snap:
        return 0.0
    if a + b - c <= snap:
        return math.pi
    h = near * (c + hi - lo) / (4 * a * b)
    return 2 * math.asin(math.sqrt(min(1.0, h)))


def nma_from_costs(a: float, b: float, c: float) -> float:
    return 1.0 - mass_angle(a, b, c) / math.pi


def nma(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None) -> float:
    """Normalized mass angle: 1 when one tableau covers the other, 0 when they exclude each other."""
    _check_grids(X, Y)
    return nma_from_costs(total_mass_cost(X), total_mass_cost(Y), min_cost(X, Y, cfg))


def _normalized_pair(X, Y):
    try:
        return normalize(X), normalize(Y)
    except DegenerateInputError as exc:
        raise UndefinedMetricError("NSA is undefined for a tableau with zero total flow") from exc


def nsa(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None) -> float:
    """Normalized structural angle: the mass angle of the unit-total versions of X and Y."""
    _check_grids(X, Y)
    Xn, Yn = _normalized_pair(X, Y)
    return nma(Xn, Yn, cfg)


def rrnsa_from_nsa(value: float, mu: float) -> float:
    if not 0 <= mu < 1:
        raise InvalidParameterError(f"mu must lie in [0, 1), got {mu}")
    return max(0.0, (value - mu) / (1 - mu))


def rrnsa(X: MobilityTableau, Y: MobilityTableau, mu: float = DEFAULT_MU,
          cfg: SolverConfig | None = None) -> float:
    """NSA with the random-structure baseline ``mu`` removed, clamped at 0."""
    if not 0 <= mu < 1:
        raise InvalidParameterError(f"mu must lie in [0, 1), got {mu}")
    return rrnsa_from_nsa(nsa(X, Y, cfg), mu)


def _dense_residuals(X: MobilityTableau, Y: MobilityTableau):
    """Normalized X and Y values over the union support plus the full pair count."""
    _check_grids(X, Y)
    Xn, Yn = _normalized_pair(X, Y)
    keys = sorted(set(Xn.flows) | set(Yn.flows))
    x = np.array([Xn.get(k) for k in keys])
    y = np.array([Yn.get(k) for k in keys])
    return x, y, X.grid.n_cells ** 2


def baseline_rmse(X: MobilityTableau, Y: MobilityTableau) -> float:
    """Root mean squared difference over all OD pairs of the normalized tableaus."""
    x, y, n = _dense_residuals(X, Y)
    return math.sqrt(float(np.sum((x - y) ** 2)) / n)


def baseline_r2(X: MobilityTableau, Y: MobilityTableau) -> float:
    """Coefficient of determination of Y's values taking X as the reference.

    Directional: ``baseline_r2(X, Y) != baseline_r2(Y, X)`` in general.
    """
    x, y, n = _dense_residuals(X, Y)
    mean = float(x.sum()) / n
    # pairs outside the union support contribute (0 - mean)^2 each
    ss_tot = float(np.sum((x - mean) ** 2)) + (n - len(x)) * mean * mean
    if not ss_tot > 1e-300:
        raise UndefinedMetricError("R^2 is undefined when the reference has zero variance")
    return 1.0 - float(np.sum((x - y) ** 2)) / ss_tot


@dataclass(frozen=True)
class SimilarityReport:
    """All metrics for one tableau pair; ``None`` marks an undefined metric."""

    md: float
    nmd: float | None
    sp: float | None
    nma: float | None
    nsa: float | None
    rrnsa: float | None
    baseline_rmse: float | None
    baseline_r2: float | None
    mu_used: float
    cost: float
    mass_x: float
    mass_y: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class MuEstimate:
    mean_nsa: float
    std_nsa: float
    trials: int
    seed: int
    samples: tuple = ()


def _maybe(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetricError:
        return None


def compare_with_plans(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None,
                       mu: float = DEFAULT_MU):
    """Like :func:`compare`, also returning the raw and normalized plans."""
    _check_grids(X, Y)
    if not 0 <= mu < 1:
        raise InvalidParameterError(f"mu must lie in [0, 1), got {mu}")
    cfg = cfg or SolverConfig()
    plan = solve_km(X, Y, cfg)
    a, b, c = total_mass_cost(X), total_mass_cost(Y), plan.total_cost
    nplan = None
    nsa_value = None
    if X.total_flow > 0 and Y.total_flow > 0:
        Xn, Yn = normalize(X), normalize(Y)
        nplan = solve_km(Xn, Yn, cfg)
        nsa_value = _maybe(nma_from_costs, total_mass_cost(Xn), total_mass_cost(Yn), nplan.total_cost)
    report = SimilarityReport(
        md=c * X.grid.cell_width,
        nmd=_maybe(nmd_from_costs, a, b, c),
        sp=_maybe(sp, plan),
        nma=_maybe(nma_from_costs, a, b, c),
        nsa=nsa_value,
        rrnsa=None if nsa_value is None else rrnsa_from_nsa(nsa_value, mu),
        baseline_rmse=_maybe(baseline_rmse, X, Y),
        baseline_r2=_maybe(baseline_r2, X, Y),
        mu_used=mu,
        cost=c,
        mass_x=a,
        mass_y=b,
    )
    return report, plan, nplan


def compare(X: MobilityTableau, Y: MobilityTableau, cfg: SolverConfig | None = None,
            mu: float = DEFAULT_MU) -> SimilarityReport:
    """Every metric for the pair, with undefined values reported as ``None``."""
    return compare_with_plans(X, Y, cfg, mu)[0]


def random_cell_permutation(grid: GridSpec, rng: np.random.Generator) -> dict:
    cells = grid.cells()
    order = rng.permutation(len(cells))
    return {cells[i]: cells[order[i]] for i in range(len(cells))}


def estimate_mu(X: MobilityTableau, trials: int = 100, seed: int = 0,
                cfg: SolverConfig | None = None) -> MuEstimate:
    """Mean and spread of NSA between ``X`` and region-shuffled copies of it."""
    if trials < 1:
        raise InvalidParameterError("trials must be at least 1")
    if not total_mass_cost(X) > 0:
        raise DegenerateInputError("estimate_mu needs a tableau with positive mass cost")
    rng = np.random.default_rng(seed)
    values = []
    for _ in range(trials):
        Y = apply_permutation(X, random_cell_permutation(X.grid, rng))
        values.append(nsa(X, Y, cfg))
    arr = np.array(values)
    return MuEstimate(float(arr.mean()), float(arr.std()), trials, seed, tuple(values))
