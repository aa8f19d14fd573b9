from .grids import geometric_grid, t_grid, r_grid, ahlfors_radii
from .rng import generator
from .parallel import parallel_map, chunks

__all__ = [
    "geometric_grid",
    "t_grid",
    "r_grid",
    "ahlfors_radii",
    "generator",
    "parallel_map",
    "chunks",
]
