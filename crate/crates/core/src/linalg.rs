//! Small dense linear algebra helpers shared by the metric and geodesic code.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x/|x|`, or `None` at the origin.
pub fn unit(x: &[f64]) -> Option<Vec<f64>> {
    let r = norm(x);
    if r == 0.0 {
        return None;
    }
    Some(x.iter().map(|c| c / r).collect())
}

/// Radial projector `W = ω ⊗ ω`.
pub fn radial_projector(omega: &[f64]) -> DMatrix<f64> {
    let n = omega.len();
    DMatrix::from_fn(n, n, |i, j| omega[i] * omega[j])
}

/// Tangential projector `I - ω ⊗ ω`.
pub fn tangential_projector(omega: &[f64]) -> DMatrix<f64> {
    let n = omega.len();
    DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - omega[i] * omega[j]
    })
}

pub fn quad_form(m: &DMatrix<f64>, v: &[f64]) -> f64 {
    let n = v.len();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += v[i] * m[(i, j)] * v[j];
        }
    }
    acc
}

pub fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Euclidean orthonormal frame of the tangent space of the sphere through `x`.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub base: Vec<f64>,
    pub radial: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

impl TangentFrame {
    pub fn at(x: &[f64]) -> Result<Self> {
        let radial = unit(x).ok_or_else(|| Error::param("tangent frame undefined at the origin"))?;
        let n = x.len();
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(n - 1);
        if n == 2 {
            basis.push(vec![-radial[1], radial[0]]);
        } else {
            // Gram-Schmidt over the coordinate axes, skipping the one closest to ω.
            let skip = (0..n)
                .max_by(|&a, &b| radial[a].abs().total_cmp(&radial[b].abs()))
                .unwrap_or(0);
            for axis in (0..n).filter(|&k| k != skip) {
                let mut e = vec![0.0; n];
                e[axis] = 1.0;
                for _ in 0..2 {
                    let c = dot(&e, &radial);
                    e.iter_mut().zip(&radial).for_each(|(ei, wi)| *ei -= c * wi);
                    for b in &basis {
                        let c = dot(&e, b);
                        e.iter_mut().zip(b).for_each(|(ei, bi)| *ei -= c * bi);
                    }
                }
                let len = norm(&e);
                e.iter_mut().for_each(|c| *c /= len);
                basis.push(e);
            }
        }
        Ok(Self {
            base: x.to_vec(),
            radial,
            basis,
        })
    }

    /// `n × (n-1)` matrix whose columns are the frame vectors.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.base.len();
        DMatrix::from_fn(n, self.basis.len(), |i, k| self.basis[k][i])
    }
}

/// Eigenvalues (ascending) of the symmetric-definite pencil `B v = λ T v`, `T` SPD.
pub fn generalized_eigenvalues(b: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = t
        .clone()
        .cholesky()
        .ok_or_else(|| Error::param("generalized eigenproblem: right-hand matrix is not positive definite"))?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::param("generalized eigenproblem: singular Cholesky factor"))?;
    let mut c = &l_inv * b * l_inv.transpose();
    symmetrize(&mut c);
    let mut eig: Vec<f64> = c.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut s = m.clone();
    symmetrize(&mut s);
    s.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
}

pub fn to_dvector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_orthonormal_and_tangent() {
        for x in [vec![2.0, 0.0], vec![0.3, -1.1, 2.0], vec![1.0, 2.0, 3.0, -4.0]] {
            let f = TangentFrame::at(&x).unwrap();
            assert_eq!(f.basis.len(), x.len() - 1);
            for (k, b) in f.basis.iter().enumerate() {
                assert!(dot(b, &f.radial).abs() < 1e-12);
                assert!((norm(b) - 1.0).abs() < 1e-12);
                for c in &f.basis[..k] {
                    assert!(dot(b, c).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pencil_with_identity_reduces_to_symmetric_eigenproblem() {
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let eig = generalized_eigenvalues(&b, &DMatrix::identity(2, 2)).unwrap();
        assert!((eig[0] - 1.0).abs() < 1e-12 && (eig[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pencil_scaling() {
        // B = 3 T  =>  every eigenvalue is 3.
        let t = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let eig = generalized_eigenvalues(&(&t * 3.0), &t).unwrap();
        assert!(eig.iter().all(|l| (l - 3.0).abs() < 1e-12));
    }

    #[test]
    fn origin_has_no_frame() {
        assert!(TangentFrame::at(&[0.0, 0.0]).is_err());
    }
}
