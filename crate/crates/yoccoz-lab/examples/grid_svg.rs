//! Building the half-plane grids over the dynamical partitions and
//! rendering them as SVG: the rotation-side grid (vertical slices over the
//! rotation partition) and the parabolic grid that carries the Yoccoz
//! extension.
//!
//! Run with `cargo run --example grid_svg`. Writes two SVG files to the
//! current directory.

use std::fs;
use yoccoz_lab::analysis::parabolic_grid;
use yoccoz_lab::cf::ContinuedFraction;
use yoccoz_lab::grid::{grid_from_rotation, grid_geometry_report, render_svg, GridPair};

fn main() -> yoccoz_lab::Result<()> {
    let cf = ContinuedFraction::from_terms(&[3, 2, 4, 2, 3, 2, 4, 2]);

    let rot = grid_from_rotation(&cf, 4, 1 << 20)?;
    let par = parabolic_grid(&cf, 4, 1 << 20)?;

    let geo = grid_geometry_report(&rot)?;
    let n_cells: usize = (0..rot.n_levels() - 1).map(|n| rot.n_cells_at(n)).sum();
    println!(
        "rotation grid: {} cells over {} levels, worst corner angle {:.1} deg",
        n_cells,
        rot.n_levels(),
        geo.per_level_min_angle.iter().fold(f64::MAX, |a, &b| a.min(b)).to_degrees()
    );

    // The two grids are combinatorially identical: same point counts per
    // level, so cells correspond one-to-one.
    let pair = GridPair::new(rot, par)?;
    let (a, b) = pair.correspond(2, 0)?;
    println!(
        "cell (2,0): {} children on both sides, widths {:.4e} vs {:.4e}",
        a.k(),
        a.base_len(),
        b.base_len()
    );

    fs::write("grid_rotation.svg", render_svg(&pair.gamma, 4, None)?)?;
    fs::write("grid_parabolic.svg", render_svg(&pair.gamma_p, 4, None)?)?;
    println!("wrote grid_rotation.svg and grid_parabolic.svg");
    Ok(())
}
