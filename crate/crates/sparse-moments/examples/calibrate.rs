//! Regenerates the pinned calibration constants. Run with
//! `cargo run --release --example calibrate` and copy the table into
//! `src/calibration.rs` when the corpora change.

use sparse_moments::calibration;

fn main() {
    let t0 = std::time::Instant::now();
    let one_d = calibration::sweep_1d();
    println!("ERROR_RATE_1D        = {:.6e}", one_d.max_error_rate);
    println!("CHAR_COEFF_NORM      = {:.6e}", one_d.max_char_norm);
    println!("ROOT_PRODUCT         = {:.6e}", one_d.max_root_product);
    let deg1 = calibration::sweep_degenerate_1d();
    println!("MOMENT_CONSISTENCY_1D = {:.6e}", deg1);
    let (rate2, cons2) = calibration::sweep_2d();
    println!("ERROR_RATE_2D        = {:.6e}", rate2);
    println!("MOMENT_CONSISTENCY_2D = {:.6e}", cons2);
    let deg2 = calibration::sweep_degenerate_2d();
    println!("MOMENT_CONSISTENCY_2D (degenerate corpus) = {:.6e}", deg2);
    let (exponent, successes, seeds) = calibration::sweep_highdim();
    println!("HIGHDIM_EXPONENT     = {:.6}", exponent);
    println!("highdim successes at 1e-2: {successes}/{seeds}");
    println!("elapsed: {:?}", t0.elapsed());
}
