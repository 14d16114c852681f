//! Stability regions Ω built as intersections of conic sectors, at most one
//! vertical strip, and disks centered on the real axis.

use std::f64::consts::FRAC_PI_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::numkernel;

/// Slack used by closed membership when the caller has no better value.
pub const DEFAULT_CLOSED_TOL: f64 = 1e-8;

/// Wedge opening to the left from the apex `(a, 0)`:
/// `sin θ (x - a) < cos θ y < -sin θ (x - a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConicSector {
    pub a: f64,
    pub theta: f64,
}

impl ConicSector {
    pub fn new(a: f64, theta: f64) -> Self {
        Self { a, theta }
    }

    pub fn alpha(&self) -> f64 {
        self.theta.sin()
    }

    pub fn beta(&self) -> f64 {
        // cos(π/2) is 6e-17 in floating point; the half-plane case must be exact.
        if self.is_half_plane() {
            0.0
        } else {
            self.theta.cos()
        }
    }

    pub fn is_half_plane(&self) -> bool {
        self.theta == FRAC_PI_2
    }

    fn validate(&self) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "sector apex must be finite, got {}",
                self.a
            )));
        }
        if !(self.theta > 0.0 && self.theta <= FRAC_PI_2) {
            return Err(Error::InvalidParameter(format!(
                "sector angle must lie in (0, pi/2], got {}",
                self.theta
            )));
        }
        Ok(())
    }

    fn contains(&self, z: Complex64, closed: bool, tol: f64) -> bool {
        let (al, be) = (self.alpha(), self.beta());
        let dx = z.re - self.a;
        let lower = al * dx;
        let mid = be * z.im;
        let upper = -al * dx;
        if closed {
            lower <= mid + tol && mid <= upper + tol && dx <= tol
        } else {
            lower < mid && mid < upper && dx <= 0.0
        }
    }

    fn outside_distance(&self, z: Complex64) -> f64 {
        let (al, be) = (self.alpha(), self.beta());
        let dx = z.re - self.a;
        let d1 = al * dx - be * z.im;
        let d2 = al * dx + be * z.im;
        d1.max(d2).max(dx).max(0.0)
    }
}

/// Band `-k < Re z < -h`. Either side may be infinite, not both.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerticalStrip {
    #[serde(serialize_with = "ser_extended", deserialize_with = "de_extended")]
    pub h: f64,
    #[serde(serialize_with = "ser_extended", deserialize_with = "de_extended")]
    pub k: f64,
}

impl VerticalStrip {
    pub fn new(h: f64, k: f64) -> Self {
        Self { h, k }
    }

    /// The open left half-plane `Re z < 0`.
    pub fn left_half_plane() -> Self {
        Self::new(0.0, f64::INFINITY)
    }

    fn validate(&self) -> Result<()> {
        if self.h.is_nan() || self.k.is_nan() {
            return Err(Error::InvalidParameter("strip bound is NaN".into()));
        }
        if self.h == f64::INFINITY || self.k == f64::NEG_INFINITY {
            return Err(Error::InvalidParameter(format!(
                "strip bounds h={} k={} describe an empty band",
                self.h, self.k
            )));
        }
        if !(self.h < self.k) {
            return Err(Error::InvalidParameter(format!(
                "strip requires h < k, got h={} k={}",
                self.h, self.k
            )));
        }
        if !self.h.is_finite() && !self.k.is_finite() {
            return Err(Error::InvalidParameter(
                "strip needs at least one finite bound".into(),
            ));
        }
        Ok(())
    }

    fn contains(&self, z: Complex64, closed: bool, tol: f64) -> bool {
        if closed {
            -self.k <= z.re + tol && z.re <= -self.h + tol
        } else {
            -self.k < z.re && z.re < -self.h
        }
    }

    fn outside_distance(&self, z: Complex64) -> f64 {
        (-self.k - z.re).max(z.re + self.h).max(0.0)
    }
}

/// Open disk `|z - center| < r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: f64,
    pub r: f64,
}

impl Disk {
    pub fn new(center: f64, r: f64) -> Self {
        Self { center, r }
    }

    pub fn unit() -> Self {
        Self::new(0.0, 1.0)
    }

    /// The shift `q` of the LMI form `|z + q| < r`.
    pub fn q(&self) -> f64 {
        -self.center
    }

    fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "disk center must be finite, got {}",
                self.center
            )));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "disk radius must be positive, got {}",
                self.r
            )));
        }
        Ok(())
    }

    fn contains(&self, z: Complex64, closed: bool, tol: f64) -> bool {
        let d = (z - self.center).norm();
        if closed {
            d <= self.r + tol
        } else {
            d < self.r
        }
    }

    fn outside_distance(&self, z: Complex64) -> f64 {
        ((z - self.center).norm() - self.r).max(0.0)
    }
}

/// Intersection of region primitives.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RegionSpec {
    #[serde(default)]
    pub sectors: Vec<ConicSector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strip: Option<VerticalStrip>,
    #[serde(default)]
    pub disks: Vec<Disk>,
}

impl RegionSpec {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_sector(mut self, a: f64, theta: f64) -> Self {
        self.sectors.push(ConicSector::new(a, theta));
        self
    }

    /// Sets the strip, replacing any previous one.
    pub fn with_strip(mut self, h: f64, k: f64) -> Self {
        self.strip = Some(VerticalStrip::new(h, k));
        self
    }

    pub fn with_disk(mut self, center: f64, r: f64) -> Self {
        self.disks.push(Disk::new(center, r));
        self
    }

    /// Continuous-time stability, `Re z < 0`.
    pub fn continuous_stable() -> Self {
        Self::new().with_strip(0.0, f64::INFINITY)
    }

    /// Discrete-time stability, the open unit disk.
    pub fn discrete_stable() -> Self {
        Self::new().with_disk(0.0, 1.0)
    }

    /// `Ω_C(0, θ) ∩ Ω_V(h, +∞) ∩ Ω_D(0, r)`.
    pub fn sector_strip_disk(theta: f64, h: f64, r: f64) -> Self {
        Self::new()
            .with_sector(0.0, theta)
            .with_strip(h, f64::INFINITY)
            .with_disk(0.0, r)
    }

    pub fn primitive_count(&self) -> usize {
        self.sectors.len() + usize::from(self.strip.is_some()) + self.disks.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitive_count() == 0 {
            return Err(Error::EmptySpec);
        }
        for s in &self.sectors {
            s.validate()?;
        }
        if let Some(s) = &self.strip {
            s.validate()?;
        }
        for d in &self.disks {
            d.validate()?;
        }
        if self.real_interval().is_none() {
            return Err(Error::EmptyRegion(
                "primitives have no common point".into(),
            ));
        }
        Ok(())
    }

    /// Open interval `Ω ∩ ℝ`. Ω is convex and symmetric about the real axis,
    /// so it is nonempty iff this interval is.
    pub fn real_interval(&self) -> Option<(f64, f64)> {
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for s in &self.sectors {
            hi = hi.min(s.a);
        }
        if let Some(s) = &self.strip {
            lo = lo.max(-s.k);
            hi = hi.min(-s.h);
        }
        for d in &self.disks {
            lo = lo.max(d.center - d.r);
            hi = hi.min(d.center + d.r);
        }
        (lo < hi).then_some((lo, hi))
    }

    /// A real point strictly inside Ω.
    pub fn interior_real_point(&self) -> Option<f64> {
        let (lo, hi) = self.real_interval()?;
        Some(match (lo.is_finite(), hi.is_finite()) {
            (true, true) => 0.5 * (lo + hi),
            (false, true) => hi - 1.0,
            (true, false) => lo + 1.0,
            (false, false) => 0.0,
        })
    }

    pub fn contains(&self, z: Complex64, closed: bool, tol: f64) -> bool {
        self.sectors.iter().all(|s| s.contains(z, closed, tol))
            && self.strip.map_or(true, |s| s.contains(z, closed, tol))
            && self.disks.iter().all(|d| d.contains(z, closed, tol))
    }

    /// Lower bound on the Euclidean distance from `z` to Ω (exact when a
    /// single primitive is violated); zero for points of the closure.
    pub fn outside_distance(&self, z: Complex64) -> f64 {
        let mut d: f64 = 0.0;
        for s in &self.sectors {
            d = d.max(s.outside_distance(z));
        }
        if let Some(s) = &self.strip {
            d = d.max(s.outside_distance(z));
        }
        for disk in &self.disks {
            d = d.max(disk.outside_distance(z));
        }
        d
    }

    /// Checks that every eigenvalue of `a` lies in Ω and returns them.
    pub fn matrix_in_region(
        &self,
        a: &DMatrix<f64>,
        closed: bool,
        tol: f64,
    ) -> Result<(bool, Vec<Complex64>)> {
        let eig = numkernel::eigenvalues(a)?;
        let inside = eig.iter().all(|&z| self.contains(z, closed, tol));
        Ok((inside, eig))
    }

    /// Points on the boundary of Ω, `n_points` samples per primitive curve
    /// before filtering. Unbounded curves are truncated to a box that covers
    /// every finite parameter.
    pub fn boundary_samples(&self, n_points: usize) -> Result<Vec<Complex64>> {
        if n_points < 8 {
            return Err(Error::InvalidParameter(format!(
                "need at least 8 boundary samples, got {n_points}"
            )));
        }
        self.validate()?;
        let extent = self.plot_extent();
        let steps = (n_points - 1) as f64;
        let mut curve: Vec<Complex64> = Vec::new();

        for s in &self.sectors {
            let (al, be) = (s.alpha(), s.beta());
            for sign in [1.0, -1.0] {
                for i in 0..n_points {
                    let t = extent * i as f64 / steps;
                    curve.push(Complex64::new(s.a - t * be, sign * t * al));
                }
            }
        }
        if let Some(s) = &self.strip {
            for x in [-s.k, -s.h].into_iter().filter(|x| x.is_finite()) {
                for i in 0..n_points {
                    let y = -extent + 2.0 * extent * i as f64 / steps;
                    curve.push(Complex64::new(x, y));
                }
            }
        }
        for d in &self.disks {
            for i in 0..n_points {
                let phi = std::f64::consts::TAU * i as f64 / n_points as f64;
                curve.push(Complex64::new(
                    d.center + d.r * phi.cos(),
                    d.r * phi.sin(),
                ));
            }
        }

        let pts: Vec<Complex64> = curve
            .into_iter()
            .filter(|&z| self.contains(z, true, 1e-9))
            .collect();
        if pts.is_empty() {
            return Err(Error::EmptyRegion("no boundary point survived filtering".into()));
        }
        Ok(pts)
    }

    fn plot_extent(&self) -> f64 {
        let mut m: f64 = 1.0;
        for s in &self.sectors {
            m = m.max(s.a.abs());
        }
        if let Some(s) = &self.strip {
            for v in [s.h, s.k] {
                if v.is_finite() {
                    m = m.max(v.abs());
                }
            }
        }
        for d in &self.disks {
            m = m.max(d.center.abs() + d.r);
        }
        2.0 * m + 1.0
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let region: RegionSpec =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("region: {e}")))?;
        region.validate()?;
        Ok(region)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("region serialization cannot fail")
    }
}

fn ser_extended<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if *v == f64::INFINITY {
        s.serialize_str("inf")
    } else if *v == f64::NEG_INFINITY {
        s.serialize_str("-inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_extended<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Extended {
        Num(f64),
        Text(String),
    }
    match Extended::deserialize(d)? {
        Extended::Num(v) => Ok(v),
        Extended::Text(t) => match t.trim() {
            "inf" | "+inf" | "Infinity" => Ok(f64::INFINITY),
            "-inf" | "-Infinity" => Ok(f64::NEG_INFINITY),
            other => Err(serde::de::Error::custom(format!(
                "expected number or \"inf\"/\"-inf\", got {other:?}"
            ))),
        },
    }
}
