"""
Finding a slice in another city
===============================

A 5x5 slice of one tableau is searched over every window of another, under
all eight rotations and reflections.  Here the target hides a rotated copy.
"""

from mobsim import Dihedral, GridSpec, dihedral_transform, extract_slice
from mobsim.experiments import gen_random_tableau, slice_match_search
from mobsim.tableau import embed

source = gen_random_tableau(GridSpec(10, 10), 1200, seed=3)
piece = extract_slice(source, (4, 4), 5)

# background traffic with the rotated slice laid over window (6, 2)
target = gen_random_tableau(GridSpec(15, 15), 1500, seed=4)
planted = embed(dihedral_transform(piece, Dihedral.ROT90), target.grid, (5, 1))
target = target.with_flows({**target.flows, **planted.flows})

# the planted flows mix with the background, so the best score stays below 1;
# the winning element is the inverse rotation, rot270
result = slice_match_search(source, target, 5, source_anchor=(4, 4))
print(len(result.scores), "window/element pairs scored")
for s in result.ranked()[:5]:
    print(tuple(s.window), s.element.value, "rrnsa=%.3f r2=%.3f" % (s.rrnsa, s.r2))

# best RRNSA per window, as a grid
heat = result.heatmap(target.grid)
print(heat.round(2))
