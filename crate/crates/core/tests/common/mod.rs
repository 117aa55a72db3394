//! Independent oracles for the integration tests. Everything here is
//! deliberately written against the mathematical definitions rather than the
//! library's solvers so a bug cannot hide on both sides of a comparison.

#![allow(dead_code)]

use dictlearn::mat::Mat;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let mut m = Mat::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = gauss.sample(rng);
        }
    }
    m
}

pub fn rand_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let a = rand_mat(rng, n, n);
    0.5 * (&a + &a.t())
}

pub fn rand_psd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let a = rand_mat(rng, n, n);
    a.t().dot(&a) / n as f64
}

pub fn rand_unit_columns(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    dictlearn::mat::normalize_columns(&rand_mat(rng, rows, cols))
}

pub fn fro_sq(a: &Mat) -> f64 {
    a.iter().map(|v| v * v).sum()
}

pub fn l1(a: &Mat) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues ascending with matching eigenvectors in columns.
pub fn jacobi_eigh(s: &Mat) -> (Vec<f64>, Mat) {
    let n = s.nrows();
    assert_eq!(n, s.ncols());
    let mut a = s.clone();
    let mut v = Mat::eye(n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[[p, q]] * a[[p, q]];
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + fro_sq(&a).sqrt()) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() < 1e-300 {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[[k, p]];
                    let akq = a[[k, q]];
                    a[[k, p]] = c * akp - sn * akq;
                    a[[k, q]] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[[p, k]];
                    let aqk = a[[q, k]];
                    a[[p, k]] = c * apk - sn * aqk;
                    a[[q, k]] = sn * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[[k, p]];
                    let vkq = v[[k, q]];
                    v[[k, p]] = c * vkp - sn * vkq;
                    v[[k, q]] = sn * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].partial_cmp(&a[[j, j]]).unwrap());
    let vals: Vec<f64> = order.iter().map(|&i| a[[i, i]]).collect();
    let mut vecs = Mat::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        vecs.column_mut(new_col).assign(&v.column(old_col));
    }
    (vals, vecs)
}

/// Singular values (descending) via the Jacobi eigendecomposition of the
/// smaller Gram matrix.
pub fn jacobi_singular_values(a: &Mat) -> Vec<f64> {
    let gram = if a.nrows() >= a.ncols() {
        a.t().dot(a)
    } else {
        a.dot(&a.t())
    };
    let (vals, _) = jacobi_eigh(&gram);
    let mut svals: Vec<f64> = vals.iter().map(|&l| l.max(0.0).sqrt()).collect();
    svals.sort_by(|x, y| y.partial_cmp(x).unwrap());
    svals
}

/// Nuclear norm from the Jacobi route.
pub fn jacobi_nuclear_norm(a: &Mat) -> f64 {
    jacobi_singular_values(a).iter().sum()
}

/// Cyclic coordinate descent on `½‖y − Dx‖² + λ‖x‖₁`, one sample per
/// column, run to a fixed (large) sweep budget.
pub fn lasso_cd_oracle(y: &Mat, d: &Mat, lambda: f64, sweeps: usize) -> Mat {
    let k = d.ncols();
    let n = y.ncols();
    let gram = d.t().dot(d);
    let dty = d.t().dot(y);
    let mut x = Mat::zeros((k, n));
    for col in 0..n {
        for _ in 0..sweeps {
            let mut change = 0.0f64;
            for j in 0..k {
                let gjj = gram[[j, j]];
                if gjj < 1e-14 {
                    continue;
                }
                let mut rho = dty[[j, col]];
                for i in 0..k {
                    if i != j {
                        rho -= gram[[j, i]] * x[[i, col]];
                    }
                }
                let old = x[[j, col]];
                let new = soft(rho, lambda) / gjj;
                change = change.max((new - old).abs());
                x[[j, col]] = new;
            }
            if change < 1e-13 {
                break;
            }
        }
    }
    x
}

fn soft(v: f64, a: f64) -> f64 {
    if v > a {
        v - a
    } else if v < -a {
        v + a
    } else {
        0.0
    }
}

/// Projected gradient descent on `tr(DFDᵀ) − 2tr(DᵀE)` with unit-ball
/// columns, small fixed step, run long.
pub fn projected_gradient_dict_oracle(
    e: &Mat,
    f: &Mat,
    d0: &Mat,
    steps: usize,
) -> Mat {
    let lip = 2.0 * jacobi_eigh(f).0.iter().cloned().fold(0.0f64, f64::max) + 1e-12;
    let step = 1.0 / lip;
    let mut d = d0.clone();
    for _ in 0..steps {
        let grad = 2.0 * (&d.dot(f) - e);
        d = &d - &(step * &grad);
        for mut col in d.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 1.0 {
                col.mapv_inplace(|v| v / norm);
            }
        }
    }
    d
}

/// Projected subgradient descent on `‖V − D X0‖² + η‖D‖_*` with unit-ball
/// columns and diminishing steps; a slow but assumption-free baseline.
pub fn nuclear_subgradient_oracle(
    v: &Mat,
    x0: &Mat,
    eta: f64,
    d_init: &Mat,
    steps: usize,
) -> Mat {
    let mut d = d_init.clone();
    let mut best = d.clone();
    let mut best_obj = f64::INFINITY;
    let lip = 2.0 * jacobi_eigh(&x0.dot(&x0.t())).0.iter().cloned().fold(0.0f64, f64::max);
    let base_step = 1.0 / (lip + 1.0);
    for k in 0..steps {
        let obj = fro_sq(&(v - &d.dot(x0))) + eta * jacobi_nuclear_norm(&d);
        if obj < best_obj {
            best_obj = obj;
            best = d.clone();
        }
        // subgradient: 2(D X0 − V)X0ᵀ + η U Vᵀ from any SVD of D
        let mut g = 2.0 * (&d.dot(x0) - v).dot(&x0.t());
        g = &g + &(eta * &nuclear_subgradient(&d));
        let step = base_step / (1.0 + (k as f64).sqrt());
        d = &d - &(step * &g);
        for mut col in d.columns_mut() {
            let norm = col.dot(&col).sqrt();
            if norm > 1.0 {
                col.mapv_inplace(|v| v / norm);
            }
        }
    }
    best
}

/// A subgradient of the nuclear norm at `a`, built from the Jacobi
/// eigendecomposition of the Gram matrix.
fn nuclear_subgradient(a: &Mat) -> Mat {
    // a = U Σ Vᵀ; U Vᵀ = a V Σ⁻¹ Vᵀ on the positive spectrum
    let gram = a.t().dot(a);
    let (vals, vecs) = jacobi_eigh(&gram);
    let mut out = Mat::zeros(a.dim());
    for (i, &l) in vals.iter().enumerate() {
        let sigma = l.max(0.0).sqrt();
        if sigma > 1e-10 {
            let vi = vecs.column(i).to_owned();
            let avi = a.dot(&vi);
            let uvt = outer(&(avi / sigma), &vi);
            out = &out + &uvt;
        }
    }
    out
}

fn outer(u: &Array1<f64>, v: &Array1<f64>) -> Mat {
    let mut m = Mat::zeros((u.len(), v.len()));
    for i in 0..u.len() {
        for j in 0..v.len() {
            m[[i, j]] = u[i] * v[j];
        }
    }
    m
}

/// Golden-section search for the scalar `s ∈ [0, 1]` minimizing
/// `½‖s·u − u‖² + eta·s·‖u‖` per group; the group prox solution must be a
/// rescaling of the input, so a 1-D search certifies the closed form.
pub fn group_prox_scale_oracle(group_norm: f64, eta: f64) -> f64 {
    if group_norm == 0.0 {
        return 0.0;
    }
    let objective = |s: f64| {
        0.5 * (s - 1.0) * (s - 1.0) * group_norm * group_norm + eta * s * group_norm
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        if objective(m1) <= objective(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    0.5 * (lo + hi)
}

/// Flood-fill recount of the largest 4-connected component.
pub fn flood_fill_largest(grid: &Array2<bool>) -> usize {
    let (rows, cols) = grid.dim();
    let mut seen = Array2::<bool>::from_elem((rows, cols), false);
    let mut best = 0;
    for r in 0..rows {
        for c in 0..cols {
            if !grid[[r, c]] || seen[[r, c]] {
                continue;
            }
            let mut queue = std::collections::VecDeque::new();
            queue.push_back((r, c));
            seen[[r, c]] = true;
            let mut size = 0;
            while let Some((i, j)) = queue.pop_front() {
                size += 1;
                let neighbors = [
                    (i.wrapping_sub(1), j),
                    (i + 1, j),
                    (i, j.wrapping_sub(1)),
                    (i, j + 1),
                ];
                for (a, b) in neighbors {
                    if a < rows && b < cols && grid[[a, b]] && !seen[[a, b]] {
                        seen[[a, b]] = true;
                        queue.push_back((a, b));
                    }
                }
            }
            best = best.max(size);
        }
    }
    best
}

/// Random boolean grid with the given fill probability.
pub fn rand_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize, p: f64) -> Array2<bool> {
    let mut g = Array2::from_elem((rows, cols), false);
    for i in 0..rows {
        for j in 0..cols {
            g[[i, j]] = rng.gen_bool(p);
        }
    }
    g
}
