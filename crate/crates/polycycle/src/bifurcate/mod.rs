//! Perturbation of a built polycycle: displacement along each connection,
//! breaking one connection while keeping the rest, return-map fixed points,
//! trapping curves and the nested-power model map.

mod breaking;
mod cycles;
mod displacement;
mod geometry;
mod modelmap;

pub use breaking::{solve_connection_break, BreakOptions, BreakResult, BreakStep};
pub use cycles::{detect_cycles, CycleOptions, CycleRecord, CycleScan};
pub use displacement::{
    bypass_decomposition, bypass_displacement, circuit, detect_sigma0, detect_sigma0_at,
    displacement_vector, saddles_at, BypassCase, BypassDisplacement, ConnectionDisplacement,
    DisplacementVector, Regime, ReturnSide, Side,
};
pub use geometry::{
    check_without_contact, hausdorff_distance, hausdorff_distance_with, inward_offset,
    point_to_polyline, polygon_contains, trapping_curve, ContactDirection, ContactVerdict,
    TrappingCurve, TrappingMethod, TrappingOptions,
};
pub use modelmap::{
    model_map_eval, model_map_roots, search_offsets, ModelMapSpec, OffsetSearch, RootScan,
};
