//! Dense kernels shared by the solver code: symmetric eigen utilities, the
//! `(J, R, P)` triple and its assembly into `(J - R) P⁻¹`.

pub mod io;

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Relative symmetry slack accepted on inputs that must be symmetric.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Decision variables of the parametrization: `J` skew, `R` symmetric and
/// `P` symmetric PSD, standing for the matrix `(J - R) P⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DhTriple {
    #[serde(with = "io::mat_serde")]
    pub j: Mat,
    #[serde(with = "io::mat_serde")]
    pub r: Mat,
    #[serde(with = "io::mat_serde")]
    pub p: Mat,
}

impl DhTriple {
    pub fn new(j: Mat, r: Mat, p: Mat) -> Self {
        Self { j, r, p }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(Mat::zeros(n, n), Mat::zeros(n, n), Mat::zeros(n, n))
    }

    pub fn n(&self) -> usize {
        self.j.nrows()
    }

    /// `J - R`.
    pub fn w(&self) -> Mat {
        &self.j - &self.r
    }

    /// Frobenius norm of the stacked triple.
    pub fn norm(&self) -> f64 {
        (self.j.norm_squared() + self.r.norm_squared() + self.p.norm_squared()).sqrt()
    }

    pub fn dot(&self, other: &DhTriple) -> f64 {
        self.j.dot(&other.j) + self.r.dot(&other.r) + self.p.dot(&other.p)
    }

    pub fn dist(&self, other: &DhTriple) -> f64 {
        ((&self.j - &other.j).norm_squared()
            + (&self.r - &other.r).norm_squared()
            + (&self.p - &other.p).norm_squared())
        .sqrt()
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &DhTriple, s: f64) -> DhTriple {
        DhTriple::new(
            &self.j + &other.j * s,
            &self.r + &other.r * s,
            &self.p + &other.p * s,
        )
    }

    pub fn scale(&self, s: f64) -> DhTriple {
        DhTriple::new(&self.j * s, &self.r * s, &self.p * s)
    }

    /// Projects each block back onto its structure (skew, symmetric, symmetric).
    pub fn restructure(&mut self) {
        self.j = skew(&self.j);
        self.r = symmetrize(&self.r);
        self.p = symmetrize(&self.p);
    }

    /// Shape, skew/symmetry and `λ_min(P) ≥ 0` checks.
    pub fn check(&self, tol: f64) -> Result<()> {
        let n = self.n();
        for (name, m) in [("J", &self.j), ("R", &self.r), ("P", &self.p)] {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "{name} is {}x{}, expected {n}x{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        let bound = |m: &Mat| 1e-12 * m.norm().max(1.0);
        let jt = (&self.j + self.j.transpose()).norm();
        if jt > bound(&self.j) {
            return Err(Error::InvalidParameter(format!("J is not skew ({jt:.3e})")));
        }
        for m in [&self.r, &self.p] {
            let a = asymmetry(m);
            if a > bound(m) {
                return Err(Error::NotSymmetric { asymmetry: a });
            }
        }
        let lmin = lambda_min(&self.p);
        if lmin < -tol {
            return Err(Error::InvalidParameter(format!(
                "P has negative eigenvalue {lmin:.3e}"
            )));
        }
        Ok(())
    }
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn skew(m: &Mat) -> Mat {
    (m - m.transpose()) * 0.5
}

/// Splits `m` into its symmetric and skew-symmetric parts.
pub fn sym_skew_split(m: &Mat) -> (Mat, Mat) {
    (symmetrize(m), skew(m))
}

pub fn asymmetry(m: &Mat) -> f64 {
    (m - m.transpose()).norm()
}

fn check_symmetric(s: &Mat) -> Result<()> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "expected a square matrix, got {}x{}",
            s.nrows(),
            s.ncols()
        )));
    }
    let a = asymmetry(s);
    if a > SYMMETRY_TOL * s.norm().max(1.0) {
        return Err(Error::NotSymmetric { asymmetry: a });
    }
    Ok(())
}

/// Eigendecomposition of the symmetric part of `s`.
pub fn sym_eigen(s: &Mat) -> SymmetricEigen<f64, nalgebra::Dyn> {
    SymmetricEigen::new(symmetrize(s))
}

/// `V f(Λ) Vᵀ`, symmetrized.
pub fn spectral_map(eig: &SymmetricEigen<f64, nalgebra::Dyn>, f: impl Fn(f64) -> f64) -> Mat {
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        let fk = f(lam);
        scaled.column_mut(k).scale_mut(fk);
    }
    symmetrize(&(scaled * v.transpose()))
}

pub fn lambda_min(s: &Mat) -> f64 {
    if s.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(s).eigenvalues.min()
}

/// Frobenius-nearest PSD matrix: negative eigenvalues clipped to zero.
pub fn psd_project(s: &Mat) -> Result<Mat> {
    check_symmetric(s)?;
    Ok(psd_project_sym(s))
}

/// [`psd_project`] without the symmetry check; the input is symmetrized.
pub(crate) fn psd_project_sym(s: &Mat) -> Mat {
    let eig = sym_eigen(s);
    if eig.eigenvalues.min() >= 0.0 {
        return symmetrize(s);
    }
    spectral_map(&eig, |l| l.max(0.0))
}

/// Inverse of `P` with eigenvalues floored at `mu`; exact when `λ_min(P) ≥ mu`.
pub fn regularized_inverse(p: &Mat, mu: f64) -> Mat {
    spectral_map(&sym_eigen(p), |l| 1.0 / l.max(mu))
}

/// `P` with eigenvalues floored at `mu`.
pub fn floor_eigenvalues(p: &Mat, mu: f64) -> Mat {
    let eig = sym_eigen(p);
    if eig.eigenvalues.min() >= mu {
        return symmetrize(p);
    }
    spectral_map(&eig, |l| l.max(mu))
}

/// Default inversion floor `1e-9 · tr(P) / n`, never below `1e-300`.
pub fn default_mu(p: &Mat) -> f64 {
    let n = p.nrows().max(1) as f64;
    (1e-9 * p.trace() / n).max(1e-300)
}

/// `(J - R) · P⁻¹` with the inverse floored at `mu`.
pub fn dh_assemble(t: &DhTriple, mu: f64) -> Mat {
    t.w() * regularized_inverse(&t.p, mu)
}

/// Triple reproducing `a` from a symmetric positive definite `x`:
/// `P = X`, `R = -(AX + XAᵀ)/2`, `J = (AX - XAᵀ)/2`.
pub fn dh_from_x(a: &Mat, x: &Mat) -> Result<DhTriple> {
    if !a.is_square() || a.shape() != x.shape() {
        return Err(Error::DimensionMismatch(format!(
            "A is {:?}, X is {:?}",
            a.shape(),
            x.shape()
        )));
    }
    check_symmetric(x)?;
    let x = symmetrize(x);
    let lmin = lambda_min(&x);
    if lmin <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            min_eigenvalue: lmin,
        });
    }
    let ax = a * &x;
    let (sym, skw) = sym_skew_split(&ax);
    Ok(DhTriple::new(skw, -sym, x))
}

/// Eigenvalues of a real square matrix, sorted by real then imaginary part.
pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "eigenvalues need a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalBackend("matrix has non-finite entries".into()));
    }
    let n = a.nrows();
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or_else(|| Error::NumericalBackend("Schur iteration did not converge".into()))?;
    let mut eig: Vec<Complex64> = schur
        .complex_eigenvalues()
        .iter()
        .map(|z| Complex64::new(z.re, z.im))
        .collect();
    eig.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    Ok(eig)
}

pub fn spectral_radius(a: &Mat) -> Result<f64> {
    Ok(eigenvalues(a)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}
