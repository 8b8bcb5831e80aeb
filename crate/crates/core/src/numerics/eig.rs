use nalgebra::{DMatrix, DVector};

use super::SymMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 100;

/// Eigendecomposition `M = T diag(σ) Tᵀ` of a symmetric matrix by cyclic
/// Jacobi rotations.
///
/// Eigenvalues come back sorted non-increasing. Inside a cluster of
/// (numerically) equal eigenvalues the basis is canonicalized: canonical
/// vectors `e_0, e_1, ...` are projected onto the cluster's eigenspace in
/// index order and orthonormalized, so `M = I` yields `T = I`. Every column is
/// signed so that its largest-magnitude entry is positive.
pub fn sym_eig_desc(m: &SymMatrix) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let n = m.dim();
    if m.as_matrix().iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(
            "eigendecomposition of a matrix with non-finite entries".into(),
        ));
    }
    let mut a = m.as_matrix().clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    jacobi_sweeps(&mut a, &mut v)?;

    let mut order: Vec<usize> = (0..n).collect();
    // stable sort keeps index order among exact ties
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let sigma = DVector::from_iterator(n, order.iter().map(|&i| a[(i, i)]));
    let mut t = DMatrix::<f64>::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        t.set_column(col, &v.column(i));
    }

    canonicalize_clusters(&mut t, &sigma);
    for j in 0..n {
        fix_sign(&mut t, j);
    }
    Ok((t, sigma))
}

fn jacobi_sweeps(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>) -> Result<()> {
    let n = a.nrows();
    let scale = a.norm();
    if scale == 0.0 {
        return Ok(());
    }
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for q in 0..n {
            for p in 0..q {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-16 * scale {
            return Ok(());
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 || apq.abs() <= 1e-18 * scale {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[(r, p)];
                    let arq = a[(r, q)];
                    let nrp = c * arp - s * arq;
                    let nrq = s * arp + c * arq;
                    a[(r, p)] = nrp;
                    a[(p, r)] = nrp;
                    a[(r, q)] = nrq;
                    a[(q, r)] = nrq;
                }
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = c * vrp - s * vrq;
                    v[(r, q)] = s * vrp + c * vrq;
                }
            }
        }
    }
    Err(Error::Divergence {
        what: "Jacobi eigenvalue sweeps",
        cap: MAX_SWEEPS,
    })
}

fn canonicalize_clusters(t: &mut DMatrix<f64>, sigma: &DVector<f64>) {
    let n = sigma.len();
    let scale = sigma.iter().fold(0.0_f64, |acc, s| acc.max(s.abs()));
    // ties up to rounding only; rotating inside a wider cluster would cost
    // reconstruction accuracy of the order of its spread
    let tol = 8.0 * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (sigma[start] - sigma[end]).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            canonical_basis(t, start, end);
        }
        start = end;
    }
}

/// Replace columns `start..end` of `t` by the canonical-aligned orthonormal
/// basis of the same span.
fn canonical_basis(t: &mut DMatrix<f64>, start: usize, end: usize) {
    let n = t.nrows();
    let k = end - start;
    let cluster = t.columns(start, k).into_owned();
    let mut chosen: Vec<DVector<f64>> = Vec::with_capacity(k);
    for threshold in [1e-3, 1e-8] {
        for j in 0..n {
            if chosen.len() == k {
                break;
            }
            // projection of e_j onto the cluster span
            let coeffs = cluster.row(j).transpose();
            let mut w = &cluster * coeffs;
            for _ in 0..2 {
                for c in &chosen {
                    let d = c.dot(&w);
                    w.axpy(-d, c, 1.0);
                }
            }
            let nrm = w.norm();
            if nrm > threshold {
                w /= nrm;
                chosen.push(w);
            }
        }
        if chosen.len() == k {
            break;
        }
    }
    if chosen.len() < k {
        // numerically degenerate span; keep the Jacobi basis
        return;
    }
    // Re-express the picks in the (orthonormal) Jacobi basis of the cluster
    // and orthonormalize there, so the result stays inside the span and
    // orthogonal to the other clusters even when a pick had a tiny norm.
    let coeffs = DMatrix::from_fn(k, k, |i, c| cluster.column(i).dot(&chosen[c]));
    let basis = &cluster * coeffs.qr().q();
    t.columns_mut(start, k).copy_from(&basis);
}

fn fix_sign(t: &mut DMatrix<f64>, j: usize) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for i in 0..t.nrows() {
        let v = t[(i, j)].abs();
        if v > best_abs + 1e-14 {
            best_abs = v;
            best = i;
        }
    }
    if t[(best, j)] < 0.0 {
        let mut col = t.column_mut(j);
        col.neg_mut();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{max_abs, orthonormality_defect};
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn reconstruct(t: &DMatrix<f64>, s: &DVector<f64>) -> DMatrix<f64> {
        t * DMatrix::from_diagonal(s) * t.transpose()
    }

    #[test]
    fn identity_is_returned_unchanged() {
        let (t, s) = sym_eig_desc(&SymMatrix::identity(4)).unwrap();
        assert_eq!(t, DMatrix::identity(4, 4));
        assert_eq!(s, DVector::from_element(4, 1.0));
    }

    #[test]
    fn diagonal_is_permuted_descending() {
        let m = SymMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0, 1.0])))
            .unwrap();
        let (t, s) = sym_eig_desc(&m).unwrap();
        assert_eq!(s.as_slice(), &[5.0, 2.0, 1.0]);
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(3, 3, &[
            0.0, 1.0, 0.0,
            1.0, 0.0, 0.0,
            0.0, 0.0, 1.0,
        ]);
        assert_eq!(t, expected);
    }

    /// Numerical rank by Gaussian elimination with complete pivoting.
    fn pivoted_rank(m: &DMatrix<f64>, tol: f64) -> usize {
        let mut a = m.clone();
        let (r, c) = a.shape();
        let mut rank = 0;
        for step in 0..r.min(c) {
            let mut best = (step, step, 0.0);
            for i in step..r {
                for j in step..c {
                    if a[(i, j)].abs() > best.2 {
                        best = (i, j, a[(i, j)].abs());
                    }
                }
            }
            if best.2 <= tol {
                break;
            }
            a.swap_rows(step, best.0);
            a.swap_columns(step, best.1);
            for i in (step + 1)..r {
                let f = a[(i, step)] / a[(step, step)];
                for j in step..c {
                    let v = a[(step, j)];
                    a[(i, j)] -= f * v;
                }
            }
            rank += 1;
        }
        rank
    }

    #[test]
    fn large_null_cluster_stays_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = DMatrix::from_fn(120, 37, |i, _| rng.random_range(-1.0..1.0) * 10f64.powi((i % 7) as i32));
        let m = &g * g.transpose() / 37.0;
        let (t, s) = sym_eig_desc(&SymMatrix::new(m.clone()).unwrap()).unwrap();
        assert!(orthonormality_defect(&t) <= 1e-12, "defect {:e}", orthonormality_defect(&t));
        assert!(max_abs(&(reconstruct(&t, &s) - &m)) <= 1e-12 * max_abs(&m));
    }

    #[test]
    fn low_rank_gram_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = DMatrix::from_fn(6, 3, |_, _| rng.random_range(-1.0..1.0));
        let m = &g * g.transpose();
        let (t, s) = sym_eig_desc(&SymMatrix::new(m.clone()).unwrap()).unwrap();
        assert!(max_abs(&(reconstruct(&t, &s) - &m)) <= 1e-9);
        let oracle_rank = pivoted_rank(&g, 1e-12);
        assert_eq!(oracle_rank, 3);
        assert_eq!(s.iter().filter(|v| **v > 1e-10).count(), oracle_rank);
        assert!(orthonormality_defect(&t) <= 1e-10);
    }

    #[test]
    fn agrees_with_library_eigenvalues() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = DMatrix::from_fn(12, 12, |_, _| rng.random_range(-1.0..1.0));
        let m = &g + g.transpose();
        let (_, s) = sym_eig_desc(&SymMatrix::new(m.clone()).unwrap()).unwrap();
        let mut lib: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
        lib.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (a, b) in s.iter().zip(lib.iter()) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn non_finite_entries_are_rejected() {
        let mut m = DMatrix::identity(3, 3);
        m[(1, 2)] = f64::NAN;
        assert!(sym_eig_desc(&SymMatrix::new(m).unwrap()).is_err());
    }

    #[test]
    fn repeated_block_is_canonicalized() {
        // diag(3, 1, 1) rotated in the last two coordinates keeps a repeated
        // eigenvalue whose eigenspace is span(e1, e2)
        let m = SymMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 1.0])))
            .unwrap();
        let (t, s) = sym_eig_desc(&m).unwrap();
        assert_eq!(s.as_slice(), &[3.0, 1.0, 1.0]);
        assert_eq!(t.column(1).as_slice(), &[1.0, 0.0, 0.0]);
        assert_eq!(t.column(2).as_slice(), &[0.0, 0.0, 1.0]);
    }

    proptest::proptest! {
        #[test]
        fn orthonormal_and_sorted(seed in 0u64..500, n in 1usize..9) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-2.0..2.0));
            let m = &g * g.transpose();
            let (t, s) = sym_eig_desc(&SymMatrix::new(m.clone()).unwrap()).unwrap();
            proptest::prop_assert!(orthonormality_defect(&t) <= 1e-10);
            proptest::prop_assert!(s.as_slice().windows(2).all(|w| w[0] >= w[1]));
            let rel = max_abs(&(reconstruct(&t, &s) - &m)) / max_abs(&m).max(1.0);
            proptest::prop_assert!(rel <= 1e-9);
        }
    }
}
