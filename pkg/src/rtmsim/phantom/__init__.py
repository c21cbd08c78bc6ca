"""Procedural breast phantoms, tissue properties and tetrahedral meshes."""

from .geometry import BreastPhantom, PhantomSpec, TumorSpec, build_phantom, measurement_points
from .mesh import BoundaryKind, Mesh, box_mesh, mesh_quality, tetrahedralize
from .tissues import TissueProperties, TissueType, default_property_map
from .vtk import export_vtk, read_vtk

__all__ = ["BreastPhantom", "PhantomSpec", "TumorSpec", "build_phantom", "measurement_points",
           "BoundaryKind", "Mesh", "box_mesh", "mesh_quality", "tetrahedralize", "TissueProperties",
           "TissueType", "default_property_map", "export_vtk", "read_vtk"]
