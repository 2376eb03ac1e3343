from .mms import Ball, DiscreteMMS, ball, build_space
from .generators import cycle, from_generator_string, generate_space, grid, horn, path, random_graph, star
from .parser import parse_space, read_space, serialize_space
from .doubling import DoublingReport, doubling_estimates

__all__ = [
    "Ball", "DiscreteMMS", "ball", "build_space",
    "cycle", "from_generator_string", "generate_space", "grid", "horn", "path", "random_graph", "star",
    "parse_space", "read_space", "serialize_space",
    "DoublingReport", "doubling_estimates",
]
