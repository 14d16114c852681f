//! Linear matrix inequalities describing Ω-stability.
//!
//! Two families of symmetric-matrix-valued linear maps are built here:
//!
//! - [`ConstraintOperator`] acts on a triple `(J, R, P)`. The set of triples
//!   with every operator PSD (and `P ⪰ 0`) is convex, and any such triple with
//!   `P ≻ 0` assembles into a matrix with eigenvalues in the closure of Ω.
//! - [`FeasibilityOperatorX`] acts on a single symmetric `X` for a fixed `A`.
//!   `A` is Ω-stable iff some `X ≻ 0` makes them all positive definite.
//!
//! Both are stored as 1×1 or 2×2 block matrices of `n×n` blocks; only the upper
//! triangle of blocks is kept, the lower blocks being transposes.

use nalgebra::DMatrix;

use crate::numkernel::{self, skew, symmetrize, DhTriple, Mat};
use crate::region::{ConicSector, Disk, RegionSpec, VerticalStrip};

/// A linear map into symmetric matrices together with its adjoint.
pub trait SymmetricOperator {
    type Point;

    fn label(&self) -> &str;

    /// Side length of the output matrix.
    fn dim(&self) -> usize;

    fn eval(&self, point: &Self::Point) -> Mat;

    /// Adjoint applied to a symmetric matrix, projected onto the structure of
    /// the input space.
    fn adjoint(&self, s: &Mat) -> Self::Point;
}

/// Minimum eigenvalue over all operator evaluations; `+∞` for no operators.
pub fn min_margin<O: SymmetricOperator>(ops: &[O], point: &O::Point) -> f64 {
    ops.iter()
        .map(|op| numkernel::lambda_min(&op.eval(point)))
        .fold(f64::INFINITY, f64::min)
}

fn place_blocks(n: usize, nb: usize, blocks: impl Iterator<Item = (usize, usize, Mat)>) -> Mat {
    let mut out = DMatrix::zeros(nb * n, nb * n);
    for (bi, bj, b) in blocks {
        out.view_mut((bi * n, bj * n), (n, n)).copy_from(&b);
        if bi != bj {
            out.view_mut((bj * n, bi * n), (n, n)).copy_from(&b.transpose());
        }
    }
    out
}

/// Coefficients of one block `j·J + r·R + p·P`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TripleCoef {
    pub j: f64,
    pub r: f64,
    pub p: f64,
}

impl TripleCoef {
    pub const fn new(j: f64, r: f64, p: f64) -> Self {
        Self { j, r, p }
    }
}

/// Block operator on `(J, R, P)`.
#[derive(Debug, Clone)]
pub struct ConstraintOperator {
    label: String,
    n: usize,
    blocks: usize,
    entries: Vec<(usize, usize, TripleCoef)>,
}

impl ConstraintOperator {
    pub fn new(
        label: impl Into<String>,
        n: usize,
        blocks: usize,
        entries: Vec<(usize, usize, TripleCoef)>,
    ) -> Self {
        for &(bi, bj, c) in &entries {
            assert!(bi <= bj && bj < blocks, "block ({bi},{bj}) out of upper triangle");
            assert!(bi != bj || c.j == 0.0, "diagonal blocks must be symmetric");
        }
        Self {
            label: label.into(),
            n,
            blocks,
            entries,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn entries(&self) -> &[(usize, usize, TripleCoef)] {
        &self.entries
    }

    /// Evaluation from the raw blocks, without building a triple.
    pub fn eval_parts(&self, j: &Mat, r: &Mat, p: &Mat) -> Mat {
        place_blocks(
            self.n,
            self.blocks,
            self.entries
                .iter()
                .map(|&(bi, bj, c)| (bi, bj, j * c.j + r * c.r + p * c.p)),
        )
    }

    /// Raw adjoint contributions `(G_J, G_R, G_P)` before structural projection.
    fn adjoint_raw(&self, s: &Mat) -> (Mat, Mat, Mat) {
        let n = self.n;
        let mut gj = Mat::zeros(n, n);
        let mut gr = Mat::zeros(n, n);
        let mut gp = Mat::zeros(n, n);
        for &(bi, bj, c) in &self.entries {
            let w = if bi == bj { 1.0 } else { 2.0 };
            let blk = s.view((bi * n, bj * n), (n, n));
            if c.j != 0.0 {
                gj += blk * (w * c.j);
            }
            if c.r != 0.0 {
                gr += blk * (w * c.r);
            }
            if c.p != 0.0 {
                gp += blk * (w * c.p);
            }
        }
        (gj, gr, gp)
    }

    /// Weight of `‖J‖²` in `‖eval(J, R, P)‖²` for skew `J`.
    pub fn gram_j(&self) -> f64 {
        self.entries
            .iter()
            .map(|&(bi, bj, c)| if bi == bj { 1.0 } else { 2.0 } * c.j * c.j)
            .sum()
    }

    /// Quadratic form acting on `(R, P)` pairs in `‖eval‖²` for symmetric `R`, `P`.
    pub fn gram_rp(&self) -> [[f64; 2]; 2] {
        let mut g = [[0.0; 2]; 2];
        for &(bi, bj, c) in &self.entries {
            let w = if bi == bj { 1.0 } else { 2.0 };
            g[0][0] += w * c.r * c.r;
            g[0][1] += w * c.r * c.p;
            g[1][1] += w * c.p * c.p;
        }
        g[1][0] = g[0][1];
        g
    }
}

impl SymmetricOperator for ConstraintOperator {
    type Point = DhTriple;

    fn label(&self) -> &str {
        &self.label
    }

    fn dim(&self) -> usize {
        self.blocks * self.n
    }

    fn eval(&self, t: &DhTriple) -> Mat {
        self.eval_parts(&t.j, &t.r, &t.p)
    }

    fn adjoint(&self, s: &Mat) -> DhTriple {
        let (gj, gr, gp) = self.adjoint_raw(s);
        DhTriple::new(skew(&gj), symmetrize(&gr), symmetrize(&gp))
    }
}

/// `[[α(R + aP), -βJ], [βJ, α(R + aP)]]`, or `R + aP` for a half-plane sector.
pub fn conic_operator(sec: &ConicSector, n: usize) -> ConstraintOperator {
    let label = format!("sector(a={}, theta={})", sec.a, sec.theta);
    if sec.is_half_plane() {
        return ConstraintOperator::new(label, n, 1, vec![(0, 0, TripleCoef::new(0.0, 1.0, sec.a))]);
    }
    let (al, be) = (sec.alpha(), sec.beta());
    let diag = TripleCoef::new(0.0, al, al * sec.a);
    ConstraintOperator::new(
        label,
        n,
        2,
        vec![(0, 0, diag), (1, 1, diag), (0, 1, TripleCoef::new(-be, 0.0, 0.0))],
    )
}

/// `kP - R` for finite `k` and `R - hP` for finite `h`.
pub fn strip_operators(strip: &VerticalStrip, n: usize) -> Vec<ConstraintOperator> {
    let mut ops = Vec::new();
    if strip.k.is_finite() {
        ops.push(ConstraintOperator::new(
            format!("strip(k={})", strip.k),
            n,
            1,
            vec![(0, 0, TripleCoef::new(0.0, -1.0, strip.k))],
        ));
    }
    if strip.h.is_finite() {
        ops.push(ConstraintOperator::new(
            format!("strip(h={})", strip.h),
            n,
            1,
            vec![(0, 0, TripleCoef::new(0.0, 1.0, -strip.h))],
        ));
    }
    ops
}

/// `[[rP, -qP - (J - R)], [·ᵀ, rP]]` with `q = -center`.
pub fn disk_operator(d: &Disk, n: usize) -> ConstraintOperator {
    let q = d.q();
    let diag = TripleCoef::new(0.0, 0.0, d.r);
    ConstraintOperator::new(
        format!("disk(center={}, r={})", d.center, d.r),
        n,
        2,
        vec![(0, 0, diag), (1, 1, diag), (0, 1, TripleCoef::new(-1.0, 1.0, -q))],
    )
}

/// All operators of the region, sectors first, then strip, then disks.
/// The cone constraint on `P` itself is left to the caller.
pub fn region_operators(region: &RegionSpec, n: usize) -> Vec<ConstraintOperator> {
    let mut ops: Vec<ConstraintOperator> =
        region.sectors.iter().map(|s| conic_operator(s, n)).collect();
    if let Some(s) = &region.strip {
        ops.extend(strip_operators(s, n));
    }
    ops.extend(region.disks.iter().map(|d| disk_operator(d, n)));
    ops
}

/// Coefficients of one block `x·X + ax·(AX) + xa·(XAᵀ)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct XCoef {
    pub x: f64,
    pub ax: f64,
    pub xa: f64,
}

impl XCoef {
    pub const fn new(x: f64, ax: f64, xa: f64) -> Self {
        Self { x, ax, xa }
    }
}

/// Block operator on a symmetric `X`, for a fixed `A`. Feasibility is
/// uniformly `eval(X) ⪰ 0`.
#[derive(Debug, Clone)]
pub struct FeasibilityOperatorX {
    label: String,
    a: Mat,
    blocks: usize,
    entries: Vec<(usize, usize, XCoef)>,
}

impl FeasibilityOperatorX {
    pub fn new(
        label: impl Into<String>,
        a: Mat,
        blocks: usize,
        entries: Vec<(usize, usize, XCoef)>,
    ) -> Self {
        for &(bi, bj, c) in &entries {
            assert!(bi <= bj && bj < blocks, "block ({bi},{bj}) out of upper triangle");
            assert!(bi != bj || c.ax == c.xa, "diagonal blocks must be symmetric");
        }
        Self {
            label: label.into(),
            a,
            blocks,
            entries,
        }
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
}

impl SymmetricOperator for FeasibilityOperatorX {
    type Point = Mat;

    fn label(&self) -> &str {
        &self.label
    }

    fn dim(&self) -> usize {
        self.blocks * self.n()
    }

    fn eval(&self, x: &Mat) -> Mat {
        let ax = &self.a * x;
        let xa = x * self.a.transpose();
        place_blocks(
            self.n(),
            self.blocks,
            self.entries
                .iter()
                .map(|&(bi, bj, c)| (bi, bj, x * c.x + &ax * c.ax + &xa * c.xa)),
        )
    }

    fn adjoint(&self, s: &Mat) -> Mat {
        let n = self.n();
        let mut g = Mat::zeros(n, n);
        for &(bi, bj, c) in &self.entries {
            let w = if bi == bj { 1.0 } else { 2.0 };
            let blk = s.view((bi * n, bj * n), (n, n)).into_owned();
            if c.x != 0.0 {
                g += &blk * (w * c.x);
            }
            if c.ax != 0.0 {
                g += self.a.transpose() * &blk * (w * c.ax);
            }
            if c.xa != 0.0 {
                g += &blk * &self.a * (w * c.xa);
            }
        }
        symmetrize(&g)
    }
}

/// Lyapunov-type LMIs in `X`, each the negation of a `≺ 0` condition:
///
/// - sector: `-[[α(AX + XAᵀ - 2aX), β(AX - XAᵀ)], [β(XAᵀ - AX), α(AX + XAᵀ - 2aX)]]`
///   (just `-(AX + XAᵀ - 2aX)` for a half-plane),
/// - strip: `-(AX + XAᵀ + 2hX)` and `AX + XAᵀ + 2kX`,
/// - disk: `[[rX, -qX - AX], [-qX - XAᵀ, rX]]`.
///
/// The `2a` coefficient makes the sector LMI at `P = X` coincide with twice the
/// triple operator evaluated at `dh_from_x(A, X)`.
pub fn feasibility_operators_in_x(region: &RegionSpec, a: &Mat) -> Vec<FeasibilityOperatorX> {
    let mut ops = Vec::new();
    for s in &region.sectors {
        let label = format!("sector(a={}, theta={})", s.a, s.theta);
        if s.is_half_plane() {
            ops.push(FeasibilityOperatorX::new(
                label,
                a.clone(),
                1,
                vec![(0, 0, XCoef::new(2.0 * s.a, -1.0, -1.0))],
            ));
        } else {
            let (al, be) = (s.alpha(), s.beta());
            let diag = XCoef::new(2.0 * al * s.a, -al, -al);
            ops.push(FeasibilityOperatorX::new(
                label,
                a.clone(),
                2,
                vec![(0, 0, diag), (1, 1, diag), (0, 1, XCoef::new(0.0, -be, be))],
            ));
        }
    }
    if let Some(s) = &region.strip {
        if s.k.is_finite() {
            ops.push(FeasibilityOperatorX::new(
                format!("strip(k={})", s.k),
                a.clone(),
                1,
                vec![(0, 0, XCoef::new(2.0 * s.k, 1.0, 1.0))],
            ));
        }
        if s.h.is_finite() {
            ops.push(FeasibilityOperatorX::new(
                format!("strip(h={})", s.h),
                a.clone(),
                1,
                vec![(0, 0, XCoef::new(-2.0 * s.h, -1.0, -1.0))],
            ));
        }
    }
    for d in &region.disks {
        let q = d.q();
        let diag = XCoef::new(d.r, 0.0, 0.0);
        ops.push(FeasibilityOperatorX::new(
            format!("disk(center={}, r={})", d.center, d.r),
            a.clone(),
            2,
            vec![(0, 0, diag), (1, 1, diag), (0, 1, XCoef::new(-q, -1.0, 0.0))],
        ));
    }
    ops
}
