//! Small dense-matrix helpers: a one-sided Jacobi SVD used to project
//! matrices onto the orthogonal group, plus orthogonality diagnostics.

use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 60;
const ROTATION_TOL: f64 = 1e-14;
const RANK_TOL: f64 = 1e-12;

/// Nearest orthogonal matrix to `m` in Frobenius norm: UVᵀ from the SVD
/// M = UΣVᵀ, computed by one-sided Jacobi. Errors when `m` is not square,
/// not finite, or numerically rank-deficient.
pub fn orthogonal_factor(m: &Array2<f64>) -> Result<Array2<f64>> {
    let d = m.nrows();
    if m.ncols() != d || d == 0 {
        return Err(Error::Numerical(format!(
            "orthogonal factor needs a square matrix, got {}×{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(
            "orthogonal factor of a non-finite matrix".into(),
        ));
    }

    // Column-major working copies: W starts as M, V as I. Jacobi rotations
    // are applied to column pairs of both until W's columns are orthogonal,
    // at which point W = UΣ and the accumulated V is the right factor.
    let mut w: Vec<f64> = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            w[j * d + i] = m[(i, j)];
        }
    }
    let mut v = vec![0.0; d * d];
    for j in 0..d {
        v[j * d + j] = 1.0;
    }

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..d {
            for q in (p + 1)..d {
                let (head, tail) = w.split_at_mut(q * d);
                let col_p = &mut head[p * d..(p + 1) * d];
                let col_q = &mut tail[..d];
                let mut a = 0.0;
                let mut b = 0.0;
                let mut c = 0.0;
                for i in 0..d {
                    a += col_p[i] * col_p[i];
                    b += col_q[i] * col_q[i];
                    c += col_p[i] * col_q[i];
                }
                if c.abs() <= ROTATION_TOL * (a * b).sqrt() {
                    continue;
                }
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..d {
                    let wp = col_p[i];
                    let wq = col_q[i];
                    col_p[i] = cs * wp - sn * wq;
                    col_q[i] = sn * wp + cs * wq;
                }
                let (vh, vt) = v.split_at_mut(q * d);
                let vcol_p = &mut vh[p * d..(p + 1) * d];
                let vcol_q = &mut vt[..d];
                for i in 0..d {
                    let vp = vcol_p[i];
                    let vq = vcol_q[i];
                    vcol_p[i] = cs * vp - sn * vq;
                    vcol_q[i] = sn * vp + cs * vq;
                }
                rotated = true;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "jacobi svd did not converge within {MAX_SWEEPS} sweeps"
        )));
    }

    let norms: Vec<f64> = (0..d)
        .map(|j| {
            w[j * d..(j + 1) * d]
                .iter()
                .map(|x| x * x)
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let sigma_max = norms.iter().cloned().fold(0.0, f64::max);
    let sigma_min = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    if sigma_min <= RANK_TOL * sigma_max.max(1.0) {
        return Err(Error::Numerical(format!(
            "matrix is numerically rank-deficient (σ_min = {sigma_min:.3e}, σ_max = {sigma_max:.3e})"
        )));
    }

    // Q = UVᵀ with U = W·diag(1/σ): Q_ij = Σ_k u_k[i]·v_k[j].
    let mut q = Array2::zeros((d, d));
    for k in 0..d {
        let inv = 1.0 / norms[k];
        for i in 0..d {
            let u_ik = w[k * d + i] * inv;
            for j in 0..d {
                q[(i, j)] += u_ik * v[k * d + j];
            }
        }
    }
    Ok(q)
}

/// ‖QᵀQ − I‖_max: the largest absolute deviation from orthonormality.
pub fn max_orthogonality_deviation(q: &Array2<f64>) -> f64 {
    let d = q.nrows();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            let dot = q.column(i).dot(&q.column(j));
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((dot - target).abs());
        }
    }
    worst
}

/// ‖A − B‖_F.
pub fn frobenius_distance(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// A random orthogonal matrix: the orthogonal factor of a Gaussian matrix.
pub fn random_orthogonal<R: Rng>(dim: usize, rng: &mut R) -> Array2<f64> {
    loop {
        let g = Array2::from_shape_fn((dim, dim), |_| rng.sample(StandardNormal));
        if let Ok(q) = orthogonal_factor(&g) {
            return q;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn orthogonal_input_is_returned_unchanged() {
        let theta = 0.3f64;
        let m = array![
            [theta.cos(), -theta.sin()],
            [theta.sin(), theta.cos()]
        ];
        let q = orthogonal_factor(&m).unwrap();
        assert!(frobenius_distance(&q, &m) < 1e-8);
    }

    #[test]
    fn positive_diagonal_maps_to_identity() {
        let m = array![[2.0, 0.0], [0.0, 0.5]];
        let q = orthogonal_factor(&m).unwrap();
        assert!(frobenius_distance(&q, &Array2::<f64>::eye(2)) < 1e-12);
    }

    #[test]
    fn result_is_orthogonal_for_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = Array2::from_shape_fn((7, 7), |_| rng.sample::<f64, _>(StandardNormal));
            let q = orthogonal_factor(&m).unwrap();
            assert!(max_orthogonality_deviation(&q) < 1e-10);
        }
    }

    #[test]
    fn rank_deficient_matrix_is_an_error() {
        let m = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(matches!(
            orthogonal_factor(&m),
            Err(Error::Numerical(_))
        ));
    }

    #[test]
    fn beats_random_orthogonal_candidates_in_frobenius_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = Array2::from_shape_fn((4, 4), |_| rng.sample::<f64, _>(StandardNormal));
        let q = orthogonal_factor(&m).unwrap();
        let best = frobenius_distance(&m, &q);
        for _ in 0..10_000 {
            let candidate = random_orthogonal(4, &mut rng);
            assert!(frobenius_distance(&m, &candidate) >= best - 1e-9);
        }
    }

    #[test]
    fn random_orthogonal_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = random_orthogonal(5, &mut rng);
        assert!(max_orthogonality_deviation(&q) < 1e-10);
    }
}
