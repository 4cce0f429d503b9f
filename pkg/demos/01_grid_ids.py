"""Grid identifiers: planar cells, MGRS ids, offsets and prefix stripping.

Positions never travel as coordinates. A node names a cell, and cells are
moved around by integer offsets, so two nodes only need to agree on the
lettering of the grid, not on an origin.
"""
from gridbp.grid import (MgrsGrid, PlanarGrid, PlanarId, center_of, common_prefix_strip,
                         format_mgrs, id_of, offset_id, parse_mgrs)

planar = PlanarGrid(cell_size=1.0)
cell = id_of((12.7, 3.2), planar)
print("point (12.7, 3.2) falls in", cell, "whose center is", center_of(cell, planar))
print("three cells east, one south:", offset_id(cell, 3, -1, planar))

# An MGRS id at 10 m precision. Offsets roll over digits and 100 km squares.
grid = MgrsGrid(gzd="10Q", origin_square="CG", cell_size=10.0)
start = parse_mgrs("10QCG99995678")
print(format_mgrs(start), "+1 east ->", format_mgrs(offset_id(start, 1, 0, grid)))

# Neighbouring ids share a long prefix, which messages only send once.
ids = [offset_id(start, k, 0, grid) for k in range(-2, 1)]
prefix, tails = common_prefix_strip(ids)
print("prefix", prefix, "tails", tails)
print("planar ids strip too:", common_prefix_strip([PlanarId(4, 5), PlanarId(4, 6)]))
