//! Hermitian eigensolver wrapper and Krylov propagation of `exp(-i H t) v`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::operator::{LinearOp, C64};

/// Eigenpairs with eigenvalues ascending; column `k` of `vectors` belongs to
/// `values[k]`.
#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<C64>,
}

impl Eigen {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn vector(&self, k: usize) -> Vec<C64> {
        self.vectors.column(k).iter().copied().collect()
    }

    /// `c_k = <E_k|psi>`
    pub fn coefficients(&self, psi: &[C64]) -> Vec<C64> {
        let v = DVector::from_column_slice(psi);
        (self.vectors.adjoint() * v).iter().copied().collect()
    }

    /// `exp(-i H t)` applied to the state with eigenbasis coefficients `c`.
    pub fn propagate(&self, c: &[C64], t: f64) -> Vec<C64> {
        let phased = DVector::from_iterator(
            c.len(),
            c.iter().zip(&self.values).map(|(c, e)| c * C64::from_polar(1.0, -e * t)),
        );
        (&self.vectors * phased).iter().copied().collect()
    }
}

/// Full diagonalization of a Hermitian matrix. Purely real input goes through
/// the real symmetric solver.
pub fn eigh(m: &DMatrix<C64>) -> Eigen {
    let n = m.nrows();
    let real = m.iter().all(|z| z.im == 0.0);
    let (values, vectors) = if real {
        let r = m.map(|z| z.re);
        let e = SymmetricEigen::new(r);
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors.map(|x| C64::new(x, 0.0)))
    } else {
        let e = SymmetricEigen::new(m.clone());
        (e.eigenvalues.iter().copied().collect::<Vec<_>>(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_vals = order.iter().map(|&k| values[k]).collect();
    let mut sorted_vecs = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_vecs.set_column(dst, &vectors.column(src));
    }
    Eigen {
        values: sorted_vals,
        vectors: sorted_vecs,
    }
}

pub fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Settings for [`expm_multiply`].
#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    pub max_dim: usize,
    /// Bound on the accumulated error estimate over the full interval.
    pub tol: f64,
    pub max_substeps: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            max_dim: 40,
            tol: 1e-10,
            max_substeps: 100_000,
        }
    }
}

/// Diagnostics of one propagation.
#[derive(Debug, Clone, Copy, Default)]
pub struct KrylovReport {
    pub substeps: usize,
    pub error_estimate: f64,
}

/// `exp(-i t H) v` by adaptive Lanczos steps with full reorthogonalization.
pub fn expm_multiply(op: &dyn LinearOp, v: &[C64], t: f64, opts: &KrylovOptions) -> Result<(Vec<C64>, KrylovReport)> {
    let dim = op.dim();
    if v.len() != dim {
        return Err(Error::LengthMismatch { left: v.len(), right: dim });
    }
    let mut report = KrylovReport::default();
    let mut w = v.to_vec();
    if t == 0.0 || norm(v) == 0.0 {
        return Ok((w, report));
    }
    let total = t.abs();
    let sign = t.signum();
    let mut done = 0.0;
    let mut tau = total;
    let m_max = opts.max_dim.min(dim).max(1);
    while done < total * (1.0 - 1e-15) {
        if report.substeps >= opts.max_substeps {
            return Err(Error::Convergence(format!("{} substeps without covering t = {t}", report.substeps)));
        }
        tau = tau.min(total - done);
        let beta0 = norm(&w);
        let lz = lanczos(op, &w, beta0, m_max);
        loop {
            let (coef, err) = small_exp(&lz, sign * tau);
            let err = err * beta0;
            // Tolerance allotted to this substep in proportion to its length.
            let budget = opts.tol * tau / total;
            if err <= budget || lz.breakdown {
                let mut out = vec![C64::new(0.0, 0.0); dim];
                for (k, q) in lz.basis.iter().enumerate() {
                    let c = coef[k] * beta0;
                    for (o, x) in out.iter_mut().zip(q) {
                        *o += c * x;
                    }
                }
                w = out;
                done += tau;
                report.substeps += 1;
                report.error_estimate += err;
                if err < 0.1 * budget {
                    tau *= 1.5;
                }
                break;
            }
            tau *= 0.5;
            if tau < total * 1e-12 {
                return Err(Error::Convergence("Krylov step collapsed".into()));
            }
        }
    }
    Ok((w, report))
}

struct Lanczos {
    basis: Vec<Vec<C64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `beta_m`, coupling the last basis vector to the next one.
    beta_next: f64,
    breakdown: bool,
}

fn lanczos(op: &dyn LinearOp, v: &[C64], beta0: f64, m_max: usize) -> Lanczos {
    let dim = v.len();
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m_max);
    basis.push(v.iter().map(|z| z / beta0).collect());
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta = Vec::with_capacity(m_max);
    let mut y = vec![C64::new(0.0, 0.0); dim];
    let scale = {
        op.apply(&basis[0], &mut y);
        norm(&y).max(1e-300)
    };
    let mut first = true;
    loop {
        let j = basis.len() - 1;
        if !first {
            op.apply(&basis[j], &mut y);
        }
        first = false;
        let a = dot(&basis[j], &y).re;
        alpha.push(a);
        // Two passes of classical Gram-Schmidt against the whole basis.
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &y);
                for (yi, qi) in y.iter_mut().zip(q) {
                    *yi -= c * qi;
                }
            }
        }
        let b = norm(&y);
        if b <= 1e-13 * scale {
            return Lanczos {
                basis,
                alpha,
                beta,
                beta_next: 0.0,
                breakdown: true,
            };
        }
        if basis.len() == m_max {
            return Lanczos {
                basis,
                alpha,
                beta,
                beta_next: b,
                breakdown: false,
            };
        }
        beta.push(b);
        basis.push(y.iter().map(|z| z / b).collect());
    }
}

/// `exp(-i tau T) e_1` for the tridiagonal `T`, and the error estimate
/// `beta_m |[exp(-i tau T) e_1]_m|`.
fn small_exp(lz: &Lanczos, tau: f64) -> (Vec<C64>, f64) {
    let m = lz.alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = lz.alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = lz.beta[i];
            t[(i + 1, i)] = lz.beta[i];
        }
    }
    let e = SymmetricEigen::new(t);
    let coef: Vec<C64> = (0..m)
        .map(|i| {
            (0..m)
                .map(|k| {
                    let u = e.eigenvectors[(i, k)] * e.eigenvectors[(0, k)];
                    C64::from_polar(u, -tau * e.eigenvalues[k])
                })
                .sum()
        })
        .collect();
    let err = lz.beta_next * coef[m - 1].norm();
    (coef, err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::Csr;

    fn random_hermitian(n: usize, seed: u64) -> Csr {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        let mut rows = vec![Vec::new(); n];
        for i in 0..n {
            rows[i].push((i, C64::new(next() * 4.0, 0.0)));
            for j in i + 1..n {
                if next() > 0.2 {
                    continue;
                }
                let z = C64::new(next(), next());
                rows[i].push((j, z));
                rows[j].push((i, z.conj()));
            }
        }
        Csr::from_rows(n, rows)
    }

    #[test]
    fn eigh_reconstructs() {
        let h = random_hermitian(30, 3).to_dense();
        let e = eigh(&h);
        assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let d = DMatrix::from_diagonal(&DVector::from_iterator(30, e.values.iter().map(|&x| C64::new(x, 0.0))));
        let rec = &e.vectors * d * e.vectors.adjoint();
        assert!((rec - h).norm() < 1e-10);
    }

    #[test]
    fn krylov_matches_eigen_propagation() {
        let h = random_hermitian(120, 7);
        let e = eigh(&h.to_dense());
        let mut v = vec![C64::new(0.0, 0.0); 120];
        v[0] = C64::new(0.6, 0.0);
        v[5] = C64::new(0.0, 0.8);
        for &t in &[0.3, 2.0, 17.0, -4.0] {
            let exact = e.propagate(&e.coefficients(&v), t);
            let (k, rep) = expm_multiply(&h, &v, t, &KrylovOptions::default()).unwrap();
            let diff: f64 = exact.iter().zip(&k).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            assert!(diff < 1e-8, "t={t} diff={diff}");
            assert!(rep.substeps >= 1);
            assert!((norm(&k) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn krylov_small_dimension_breakdown() {
        let h = Csr::diagonal(&[1.0, -2.0]);
        let v = [C64::new(1.0, 0.0), C64::new(1.0, 0.0)];
        let (w, _) = expm_multiply(&h, &v, 1.0, &KrylovOptions::default()).unwrap();
        assert!((w[0] - C64::from_polar(1.0, -1.0)).norm() < 1e-12);
        assert!((w[1] - C64::from_polar(1.0, 2.0)).norm() < 1e-12);
    }
}
