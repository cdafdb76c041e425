//! Spatial effect fields: tile binning, thin-plate spline smoothing with
//! GCV-selected smoothing, unit-integral normalization, and export.

pub mod court;
pub mod field;
pub mod io;
pub mod player;
pub mod tps;

pub use court::{tile_counts, CourtLocation, TileGrid, N_TILES};
pub use field::{
    default_lambda_grid, evaluate_field, fit_field, gcv_scores, gcv_select, normalize_field, select_knots, tps_fit,
    LambdaChoice, SpatialField,
};
pub use io::{FieldHeader, FieldKind, FieldTable};
pub use player::{build_player_fields, FieldStore, LocatedPass, PlayerFields};
pub use tps::{tps_kernel, ThinPlateSpline, TpsFit, TpsProblem};
