//! Integer-lattice geometry: boxes, site sets, distances and the multiscale hierarchy.

mod hierarchy;
mod region;

pub use hierarchy::{
    box_scale, chambers, minimal_edge_for_levels, next_edge, on_walls, spacing_constant, walls,
    Hierarchy,
};
pub use region::{
    add, build_box, l1_distance, l1_norm, unit, unit_steps, BoxRegion, Site, SiteSet,
};
