//! Warped-product model manifolds with conical ends, their measures, and
//! the computational grids laid over them.

mod grid;
mod model;

pub use grid::{build_grid, DomainSpec, Grid, GridSpec, QuadPoint, RadialSpacing};
pub use model::{
    make_model, make_model_with_floor, unit_ball_volume, unit_sphere_area, End, EndDescriptor, EndId, LinkSpec,
    ManifoldModel, Topology, WarpProfile,
};
