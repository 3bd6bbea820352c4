//! A single Yoccoz cell map up close: boundary interpolation stages,
//! pointwise dilatation, the sup-dilatation report, analytic-vs-numeric
//! agreement and edge compatibility across neighboring cells.
//!
//! Run with `cargo run --release --example cell_extension`.

use num_complex::Complex64 as C64;
use yoccoz_lab::analysis::{
    analytic_numeric_agreement, edge_compatibility_report, parabolic_grid, synthetic_tier,
};
use yoccoz_lab::basemap::PFast;
use yoccoz_lab::cellmap::{cell_sup_dilatation, yoccoz_cell_map, DilatationMode};
use yoccoz_lab::cf::ContinuedFraction;
use yoccoz_lab::grid::{grid_from_rotation, GridPair};

fn main() -> yoccoz_lab::Result<()> {
    let cf = ContinuedFraction::from_terms(&[4, 3, 4, 3, 4, 3, 4, 3]);
    let base = PFast::new();

    // Pick a representative stratum from the synthetic tier and extend.
    let tier = synthetic_tier(&cf, 4)?;
    let stratum = &tier.levels[2].strata[0];
    let map = yoccoz_cell_map(&stratum.source, &stratum.target, &base)?;

    // Evaluate the extension and its dilatation at an interior point.
    let c = &map.source;
    let z = C64::new(
        0.5 * (c.t0 + c.tk),
        0.5 * (c.y_top.0.max(c.y_top.1) + c.bottom.iter().map(|p| p.1).fold(0.0, f64::max)),
    );
    let w = map.apply(z)?;
    let k = map.dilatation_at(z, DilatationMode::Analytic)?;
    println!("z = {z:.4} maps to {w:.4} with K = {k:.4}");

    // Sup dilatation over the whole cell.
    let sup = cell_sup_dilatation(&map, 3, 3000, 2.0)?;
    println!(
        "sup K = {:.3}, median {:.3}, fraction above threshold {:.2}",
        sup.k_sup, sup.k_median, sup.area_fraction_above
    );

    // Analytic Jacobian vs finite differences across the tier.
    let agree = analytic_numeric_agreement(&tier, &base, 12, 3)?;
    println!(
        "analytic vs numeric: {:.1}% of {} points within 1% (worst {:.2e})",
        100.0 * agree.fraction_within_1pct,
        agree.n_points,
        agree.worst_relative_error
    );

    // Neighboring cell maps agree on shared edges of the materialized grids.
    let pair = GridPair::new(grid_from_rotation(&cf, 3, 1 << 20)?, parabolic_grid(&cf, 3, 1 << 20)?)?;
    let rep = edge_compatibility_report(&pair, &base, 9, 200)?;
    println!(
        "edge compatibility: {} vertical + {} horizontal edges, max mismatch {:.2e}",
        rep.n_vertical_edges, rep.n_horizontal_edges, rep.max_mismatch
    );
    Ok(())
}
