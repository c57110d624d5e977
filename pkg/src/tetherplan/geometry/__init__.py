"""Triangle meshes, STL ingestion, BVH construction and mesh intersection."""

from .bvh import BvhTree, build_bvh, candidate_pairs, meshes_intersect, meshes_intersect_brute
from .intersect import tri_tri_intersect
from .mesh import (
    TriMesh,
    box_mesh,
    is_closed_oriented,
    point_triangle_distance,
    points_inside,
    signed_volume,
)
from .stl import dump_stl_ascii, dump_stl_binary, load_stl, read_stl

__all__ = [
    "BvhTree", "TriMesh", "box_mesh", "build_bvh", "candidate_pairs", "dump_stl_ascii",
    "dump_stl_binary", "is_closed_oriented", "load_stl", "meshes_intersect",
    "meshes_intersect_brute", "point_triangle_distance", "points_inside", "read_stl",
    "signed_volume", "tri_tri_intersect",
]
