"""
Transforming one tableau into another
=====================================

Flows are positioned origin-destination vectors on a grid.  Turning one
tableau into another costs a Manhattan length per vector added or deleted,
and a Manhattan shift per vector moved.
"""

from mobsim import FlowVector, GridSpec, MobilityTableau, solve_km

grid = GridSpec(3, 3)
a = FlowVector(1, 2, 2, 1)
b = FlowVector(2, 3, 3, 2)
c = FlowVector(3, 1, 3, 3)

# adding one vector of length 2
plan = solve_km(MobilityTableau(grid, {a: 1}), MobilityTableau(grid, {a: 1, c: 1}))
print("add:", plan.total_cost, plan.adds)

# moving a to b: both endpoints shift by 2 cells
plan = solve_km(MobilityTableau(grid, {a: 1}), MobilityTableau(grid, {b: 1}))
print("shift:", plan.total_cost, plan.shifts)

# deleting c again
plan = solve_km(MobilityTableau(grid, {a: 1, c: 1}), MobilityTableau(grid, {a: 1}))
print("delete:", plan.total_cost, plan.deletes)

# flows need not be integers; common parts cancel before solving
X = MobilityTableau(grid, {a: 2.5, c: 1.0})
Y = MobilityTableau(grid, {a: 1.0, b: 0.5})
plan = solve_km(X, Y)
print("mixed:", plan.total_cost, "of which shifting", plan.shift_cost_total)
