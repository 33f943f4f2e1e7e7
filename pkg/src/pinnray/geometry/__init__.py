from .finray import (
    Domain2D,
    FinRayParams,
    build_finray,
    forced_point,
    marker_locations,
    polygon_area,
    rectangle,
)
from .mesh import TriangleMesh, parse_mesh, read_mesh, save_mesh, write_mesh
from .meshing import structured_rectangle, triangulate
from .sampling import sample_boundary, sample_collocation, sample_polyline

__all__ = [
    "Domain2D",
    "FinRayParams",
    "TriangleMesh",
    "build_finray",
    "forced_point",
    "marker_locations",
    "parse_mesh",
    "polygon_area",
    "read_mesh",
    "rectangle",
    "sample_boundary",
    "sample_collocation",
    "sample_polyline",
    "save_mesh",
    "structured_rectangle",
    "triangulate",
    "write_mesh",
]
