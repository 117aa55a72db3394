//! Central finite-difference gradient checks used to validate the
//! closed-form gradients of the training objectives.

use crate::mat::{fro_norm, Mat};

/// Central-difference gradient of `f` at `x` with step `h` per entry.
pub fn central_diff_grad<F: Fn(&Mat) -> f64>(f: F, x: &Mat, h: f64) -> Mat {
    let mut g = Mat::zeros(x.dim());
    let mut probe = x.clone();
    for i in 0..x.nrows() {
        for j in 0..x.ncols() {
            let orig = probe[[i, j]];
            probe[[i, j]] = orig + h;
            let fp = f(&probe);
            probe[[i, j]] = orig - h;
            let fm = f(&probe);
            probe[[i, j]] = orig;
            g[[i, j]] = (fp - fm) / (2.0 * h);
        }
    }
    g
}

/// Relative error `‖numeric − analytic‖_F / max(1, ‖analytic‖_F)`.
pub fn gradient_rel_error<F: Fn(&Mat) -> f64>(f: F, analytic: &Mat, x: &Mat, h: f64) -> f64 {
    let numeric = central_diff_grad(f, x, h);
    fro_norm(&(&numeric - analytic)) / fro_norm(analytic).max(1.0)
}
