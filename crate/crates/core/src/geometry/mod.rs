//! Ambient geometry, bridges, the glued initial surface and its mesh.

pub mod bridge;
pub mod curvature;
pub mod fermi;
pub mod jet;
pub mod mesh;
pub mod residual;
pub mod surface;

pub use bridge::{bridge_weighted_curvature, catenoid_graph, catenoid_point, BridgeSpec};
pub use curvature::{graph_weighted_mean_curvature, weighted_mean_curvature, Patch};
pub use fermi::{christoffel, fermi_map, fermi_map_detailed, gaussian_weight, AmbientPoint};
pub use mesh::{build_initial_surface, RegionTag, SurfaceMesh, SymmetryGroup, TopologyReport};
pub use surface::{cone_slopes, ConeSlope, GeometryMode, InitialSurface};
