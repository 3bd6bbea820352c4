//! The per-cell distortion law: the sup dilatation of a Yoccoz cell map
//! over a k-to-uniform parabolic cell grows like log^2 k. Also shows the
//! quasisymmetric witness on spiked rotation numbers and the comparison
//! against the Beurling-Ahlfors extension.
//!
//! Run with `cargo run --release --example distortion_sweep`.

use yoccoz_lab::analysis::{
    approximant_qs, calibrate_cells, distortion_law_sweep, extension_comparison_report,
};
use yoccoz_lab::cf::ContinuedFraction;

fn main() -> yoccoz_lab::Result<()> {
    // Calibrate the constant c_hat on moderate cells first.
    let cal = calibrate_cells(11)?;
    println!("calibration: c_hat = {:.3}, lambda_hat = {:.3}", cal.c_hat, cal.lambda_hat);

    // Sweep cell sizes a = 10^1..10^4; sup K / log^2 a should stabilize.
    let rows = distortion_law_sweep(&[10, 100, 1000, 10000], 4000, cal.c_hat, 11)?;
    println!("{:>7} {:>10} {:>10} {:>10}", "a", "sup K", "K/log^2 a", "stage K");
    for r in &rows {
        println!("{:>7} {:>10.2} {:>10.3} {:>10.2}", r.a, r.k_sup, r.ratio, r.stage_k);
    }

    // Quasisymmetric witness: a spike a_m = s in an otherwise golden tail
    // forces a boundary qs-ratio of order s.
    for spike in [8u128, 32, 128] {
        let mut terms = vec![1u128; 12];
        terms[3] = spike;
        let cf = ContinuedFraction::from_terms(&terms);
        let qs = approximant_qs(&cf, 8)?;
        println!(
            "spike {spike:>4}: rho_hat = {:>8.2} at level {}, rho/a_max = {:.3}",
            qs.rho_hat, qs.best_m, qs.ratio
        );
    }

    // Yoccoz vs Beurling-Ahlfors: the BA dilatation bound grows linearly in
    // the witness ratio while the Yoccoz stage grows like log^2.
    let cmp = extension_comparison_report(&[16, 64, 256, 1024], 3)?;
    for r in &cmp {
        println!(
            "spike {:>5}: BA bound {:>9.1}  Yoccoz stage {:>7.2}",
            r.spike, r.ba_bound, r.yoccoz_stage
        );
    }
    Ok(())
}
