//! Polytope arithmetic and invariant-set computation in halfspace form.
//!
//! The halfspace representation `{x : A x <= b}` is canonical throughout;
//! vertex lists are enumerated on demand and cached. All sets handled here
//! are bounded and nonempty, and the dimension cap keeps the double
//! description affordable.

mod hull;
mod invariant;

pub use hull::{convex_hull_halfspaces, vertex_enumeration, MAX_DIM};
pub use invariant::{max_rpi, mrpi_outer, RpiResult, SetApproximation};

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qpcore::{self, SolveStatus};

/// Default tolerance for set equality and inclusion, in support-value units.
pub const SET_TOL: f64 = 1e-8;
/// Tolerance for redundant-halfspace pruning.
pub const PRUNE_TOL: f64 = 1e-9;

const LP_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SetError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("dimension {0} outside the supported range 1..=4")]
    DimensionUnsupported(usize),
    #[error("polytope is empty")]
    Empty,
    #[error("set became empty at recursion stage {0}")]
    EmptyAtStage(usize),
    #[error("polytope is unbounded")]
    Unbounded,
    #[error("direction vector must be nonzero")]
    ZeroDirection,
    #[error("the origin must be in the interior of the set")]
    OriginNotInterior,
    #[error("matrix is not Schur stable")]
    NotSchur,
    #[error("iteration cap {0} reached before the target gap")]
    IterationCap(usize),
    #[error("halfspace count {0} too large for subset enumeration")]
    TooManyHalfspaces(usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Qp(#[from] qpcore::QpError),
}

/// Bounded convex polyhedron `{x : A x <= b}`.
#[derive(Debug, Clone)]
pub struct Polytope {
    a: DMatrix<f64>,
    b: DVector<f64>,
    vertices: OnceLock<Vec<DVector<f64>>>,
}

#[derive(Serialize, Deserialize)]
struct PolytopeData {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
}

impl Serialize for Polytope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let a = (0..self.a.nrows())
            .map(|i| self.a.row(i).iter().cloned().collect())
            .collect();
        PolytopeData {
            a,
            b: self.b.iter().cloned().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let data = PolytopeData::deserialize(d)?;
        let rows = data.a.len();
        if rows == 0 || rows != data.b.len() {
            return Err(serde::de::Error::custom("A and b row counts differ or are zero"));
        }
        let cols = data.a[0].len();
        if data.a.iter().any(|r| r.len() != cols) {
            return Err(serde::de::Error::custom("ragged A matrix"));
        }
        let a = DMatrix::from_fn(rows, cols, |i, j| data.a[i][j]);
        let b = DVector::from_vec(data.b);
        Polytope::from_halfspaces(a, b).map_err(serde::de::Error::custom)
    }
}

impl Polytope {
    /// Validated construction from halfspaces: consistent dimensions,
    /// finite coefficients, nonempty and bounded.
    pub fn from_halfspaces(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, SetError> {
        let p = Self::from_parts(a, b)?;
        if !p.is_bounded()? {
            return Err(SetError::Unbounded);
        }
        Ok(p)
    }

    /// Construction without the boundedness LPs; used internally where the
    /// result is bounded by construction.
    pub(crate) fn from_parts(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, SetError> {
        let d = a.ncols();
        if d == 0 || d > MAX_DIM {
            return Err(SetError::DimensionUnsupported(d));
        }
        if a.nrows() != b.len() || a.nrows() == 0 {
            return Err(SetError::DimensionMismatch(format!(
                "A is {}x{}, b has length {}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
            return Err(SetError::Numerical("non-finite halfspace data".into()));
        }
        // Zero rows are either vacuous or a certificate of emptiness.
        let mut keep_rows: Vec<usize> = Vec::new();
        for i in 0..a.nrows() {
            if a.row(i).amax() <= 1e-14 {
                if b[i] < -1e-12 {
                    return Err(SetError::Empty);
                }
            } else {
                keep_rows.push(i);
            }
        }
        if keep_rows.is_empty() {
            return Err(SetError::Unbounded);
        }
        let (a, b) = if keep_rows.len() == a.nrows() {
            (a, b)
        } else {
            let mut na = DMatrix::zeros(keep_rows.len(), d);
            let mut nb = DVector::zeros(keep_rows.len());
            for (r, &i) in keep_rows.iter().enumerate() {
                na.row_mut(r).copy_from(&a.row(i));
                nb[r] = b[i];
            }
            (na, nb)
        };
        let p = Self {
            a,
            b,
            vertices: OnceLock::new(),
        };
        if !p.is_nonempty()? {
            return Err(SetError::Empty);
        }
        Ok(p)
    }

    /// Axis-aligned box `{|x_i| <= halfwidth_i}` centered at the origin.
    /// Zero halfwidths yield the corresponding degenerate flat.
    pub fn box_at_origin(halfwidths: &[f64]) -> Result<Self, SetError> {
        let d = halfwidths.len();
        if halfwidths.iter().any(|h| !h.is_finite() || *h < 0.0) {
            return Err(SetError::Numerical("halfwidths must be finite and nonnegative".into()));
        }
        let mut a = DMatrix::zeros(2 * d, d);
        let mut b = DVector::zeros(2 * d);
        for i in 0..d {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = halfwidths[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = halfwidths[i];
        }
        Self::from_parts(a, b)
    }

    /// Box `{lo_i <= x_i <= hi_i}`.
    pub fn from_bounds(lo: &[f64], hi: &[f64]) -> Result<Self, SetError> {
        if lo.len() != hi.len() {
            return Err(SetError::DimensionMismatch("bound lengths differ".into()));
        }
        if lo.iter().zip(hi).any(|(l, h)| l > h) {
            return Err(SetError::Empty);
        }
        let d = lo.len();
        let mut a = DMatrix::zeros(2 * d, d);
        let mut b = DVector::zeros(2 * d);
        for i in 0..d {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = hi[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -lo[i];
        }
        Self::from_parts(a, b)
    }

    pub fn singleton(point: &DVector<f64>) -> Result<Self, SetError> {
        let d = point.len();
        let mut a = DMatrix::zeros(2 * d, d);
        let mut b = DVector::zeros(2 * d);
        for i in 0..d {
            a[(2 * i, i)] = 1.0;
            b[2 * i] = point[i];
            a[(2 * i + 1, i)] = -1.0;
            b[2 * i + 1] = -point[i];
        }
        Self::from_parts(a, b)
    }

    /// Convex hull of a point set.
    pub fn from_vertices(points: &[DVector<f64>]) -> Result<Self, SetError> {
        let (a, b) = convex_hull_halfspaces(points, 1e-9)?;
        Self::from_parts(a, b)
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_halfspaces(&self) -> usize {
        self.a.nrows()
    }

    pub fn halfspace_matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn halfspace_offsets(&self) -> &DVector<f64> {
        &self.b
    }

    /// Support function `max {d.x : x in P}` by linear programming.
    pub fn support(&self, direction: &DVector<f64>) -> Result<f64, SetError> {
        if direction.len() != self.dim() {
            return Err(SetError::DimensionMismatch("direction length".into()));
        }
        if direction.norm() <= 0.0 {
            return Err(SetError::ZeroDirection);
        }
        let sol = qpcore::solve_lp(
            &(-direction),
            &self.a,
            &self.b,
            &DMatrix::zeros(0, self.dim()),
            &DVector::zeros(0),
            LP_TOL,
        )?;
        match sol.status {
            SolveStatus::Optimal => Ok(-sol.objective),
            SolveStatus::Infeasible => Err(SetError::Empty),
            SolveStatus::Unbounded => Err(SetError::Unbounded),
            SolveStatus::MaxIterations => Err(SetError::Numerical("support LP did not converge".into())),
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        if x.len() != self.dim() {
            return false;
        }
        let ax = &self.a * x;
        (0..self.a.nrows()).all(|i| ax[i] <= self.b[i] + tol)
    }

    /// `self` is a subset of `other` iff every halfspace of `other` bounds
    /// the support of `self`.
    pub fn is_subset(&self, other: &Polytope, tol: f64) -> Result<bool, SetError> {
        if self.dim() != other.dim() {
            return Err(SetError::DimensionMismatch("subset test across dimensions".into()));
        }
        for i in 0..other.a.nrows() {
            let dir = other.a.row(i).transpose();
            if self.support(&dir)? > other.b[i] + tol {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn set_equals(&self, other: &Polytope, tol: f64) -> Result<bool, SetError> {
        Ok(self.is_subset(other, tol)? && other.is_subset(self, tol)?)
    }

    /// Exact Minkowski sum via vertex-pair sums and their hull.
    pub fn minkowski_sum(&self, other: &Polytope) -> Result<Polytope, SetError> {
        if self.dim() != other.dim() {
            return Err(SetError::DimensionMismatch("minkowski sum across dimensions".into()));
        }
        let vp = self.vertices()?;
        let vq = other.vertices()?;
        if vp.is_empty() || vq.is_empty() {
            return Err(SetError::Unbounded);
        }
        let mut sums = Vec::with_capacity(vp.len() * vq.len());
        for p in vp {
            for q in vq {
                sums.push(p + q);
            }
        }
        Polytope::from_vertices(&sums)
    }

    /// Exact image `{M x : x in P}` via mapped vertices.
    pub fn affine_image(&self, m: &DMatrix<f64>) -> Result<Polytope, SetError> {
        if m.ncols() != self.dim() {
            return Err(SetError::DimensionMismatch(format!(
                "matrix has {} columns, polytope dimension is {}",
                m.ncols(),
                self.dim()
            )));
        }
        let mapped: Vec<DVector<f64>> = self.vertices()?.iter().map(|v| m * v).collect();
        Polytope::from_vertices(&mapped)
    }

    /// Scale about the origin by `c > 0`.
    pub fn scale(&self, c: f64) -> Result<Polytope, SetError> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(SetError::Numerical("scale factor must be positive".into()));
        }
        Polytope::from_parts(self.a.clone(), &self.b * c)
    }

    /// Intersection; errors if empty.
    pub fn intersection(&self, other: &Polytope) -> Result<Polytope, SetError> {
        if self.dim() != other.dim() {
            return Err(SetError::DimensionMismatch("intersection across dimensions".into()));
        }
        let m = self.a.nrows() + other.a.nrows();
        let mut a = DMatrix::zeros(m, self.dim());
        let mut b = DVector::zeros(m);
        for i in 0..self.a.nrows() {
            a.row_mut(i).copy_from(&self.a.row(i));
            b[i] = self.b[i];
        }
        for i in 0..other.a.nrows() {
            a.row_mut(self.a.nrows() + i).copy_from(&other.a.row(i));
            b[self.a.nrows() + i] = other.b[i];
        }
        Polytope::from_parts(a, b)
    }

    /// Drop redundant halfspaces. Parallel dominated rows go first, then an
    /// LP certificate per remaining row.
    pub fn prune_redundant(&self, tol: f64) -> Result<Polytope, SetError> {
        let m = self.a.nrows();
        let d = self.dim();
        // Normalize rows for the dominance pass.
        let mut keep: Vec<bool> = vec![true; m];
        let norms: Vec<f64> = (0..m).map(|i| self.a.row(i).norm()).collect();
        for i in 0..m {
            if !keep[i] {
                continue;
            }
            for j in (i + 1)..m {
                if !keep[j] {
                    continue;
                }
                // Same direction: keep the tighter offset.
                let dot = self.a.row(i).dot(&self.a.row(j));
                if dot > 0.0 && (dot - norms[i] * norms[j]).abs() <= 1e-12 * norms[i] * norms[j] {
                    if self.b[i] / norms[i] <= self.b[j] / norms[j] {
                        keep[j] = false;
                    } else {
                        keep[i] = false;
                        break;
                    }
                }
            }
        }
        let mut active: Vec<usize> = (0..m).filter(|&i| keep[i]).collect();
        // LP pass: row i is redundant if its support over the others (with
        // row i relaxed) does not exceed b_i.
        let mut i = 0;
        while i < active.len() {
            if active.len() == 1 {
                break;
            }
            let row = active[i];
            let rows_now = active.len();
            let mut a = DMatrix::zeros(rows_now, d);
            let mut b = DVector::zeros(rows_now);
            for (r, &idx) in active.iter().enumerate() {
                a.row_mut(r).copy_from(&self.a.row(idx));
                b[r] = self.b[idx] + if idx == row { 1.0 + self.b[idx].abs() } else { 0.0 };
            }
            let dir = self.a.row(row).transpose();
            let sol = qpcore::solve_lp(&(-&dir), &a, &b, &DMatrix::zeros(0, d), &DVector::zeros(0), LP_TOL)?;
            let redundant = sol.status == SolveStatus::Optimal && -sol.objective <= self.b[row] + tol;
            if redundant {
                active.remove(i);
            } else {
                i += 1;
            }
        }
        let mut a = DMatrix::zeros(active.len(), d);
        let mut b = DVector::zeros(active.len());
        for (r, &idx) in active.iter().enumerate() {
            a.row_mut(r).copy_from(&self.a.row(idx));
            b[r] = self.b[idx];
        }
        Polytope::from_parts(a, b)
    }

    pub fn is_bounded(&self) -> Result<bool, SetError> {
        for i in 0..self.dim() {
            let mut e = DVector::zeros(self.dim());
            e[i] = 1.0;
            for sgn in [1.0, -1.0] {
                match self.support(&(&e * sgn)) {
                    Ok(_) => {}
                    Err(SetError::Unbounded) => return Ok(false),
                    Err(e) => return Err(e),
                }
            }
        }
        Ok(true)
    }

    fn is_nonempty(&self) -> Result<bool, SetError> {
        let sol = qpcore::solve_lp(
            &DVector::zeros(self.dim()),
            &self.a,
            &self.b,
            &DMatrix::zeros(0, self.dim()),
            &DVector::zeros(0),
            1e-8,
        )?;
        Ok(matches!(sol.status, SolveStatus::Optimal | SolveStatus::Unbounded))
    }

    /// Enumerated vertex list (cached).
    pub fn vertices(&self) -> Result<&[DVector<f64>], SetError> {
        if let Some(v) = self.vertices.get() {
            return Ok(v);
        }
        let v = vertex_enumeration(&self.a, &self.b, 1e-9)?;
        if v.is_empty() {
            return Err(SetError::Empty);
        }
        let _ = self.vertices.set(v);
        Ok(self.vertices.get().expect("just set"))
    }

    /// Largest `r` with the origin-centered r-ball inside the set
    /// (`min_i b_i / |a_i|`); errors when the origin is not interior.
    pub fn inscribed_radius_at_origin(&self) -> Result<f64, SetError> {
        let mut r = f64::INFINITY;
        for i in 0..self.a.nrows() {
            let norm = self.a.row(i).norm();
            if norm <= 1e-14 {
                continue;
            }
            let ri = self.b[i] / norm;
            if ri <= 0.0 {
                return Err(SetError::OriginNotInterior);
            }
            r = r.min(ri);
        }
        Ok(r)
    }

    /// Maximum Euclidean norm over the set (attained at a vertex).
    pub fn max_norm(&self) -> Result<f64, SetError> {
        Ok(self
            .vertices()?
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn interval(lo: f64, hi: f64) -> Polytope {
        Polytope::from_bounds(&[lo], &[hi]).unwrap()
    }

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn interval_addition() {
        let p = interval(-1.0, 1.0);
        let sum = p.minkowski_sum(&p).unwrap();
        let expect = interval(-2.0, 2.0);
        assert!(sum.set_equals(&expect, 1e-9).unwrap());
    }

    #[test]
    fn zero_is_identity_element() {
        let p = Polytope::from_vertices(&[dv(&[1.0, 0.0]), dv(&[0.0, 1.0]), dv(&[-1.0, -1.0])]).unwrap();
        let zero = Polytope::singleton(&dv(&[0.0, 0.0])).unwrap();
        let sum = p.minkowski_sum(&zero).unwrap();
        assert!(sum.set_equals(&p, 1e-9).unwrap());
    }

    #[test]
    fn support_of_unit_box() {
        let p = Polytope::box_at_origin(&[1.0, 1.0]).unwrap();
        let s = p.support(&dv(&[1.0, 0.0])).unwrap();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-9);
        // positive homogeneity under set scaling
        let p2 = p.scale(2.0).unwrap();
        let s2 = p2.support(&dv(&[0.3, -0.7])).unwrap();
        assert_abs_diff_eq!(s2, 2.0 * p.support(&dv(&[0.3, -0.7])).unwrap(), epsilon = 1e-9);
    }

    #[test]
    fn subset_ordering_of_boxes() {
        let inner = Polytope::box_at_origin(&[1.0, 1.0]).unwrap();
        let outer = Polytope::box_at_origin(&[2.0, 2.0]).unwrap();
        assert!(inner.is_subset(&inner, 1e-9).unwrap());
        assert!(inner.is_subset(&outer, 1e-9).unwrap());
        assert!(!outer.is_subset(&inner, 1e-9).unwrap());
    }

    #[test]
    fn affine_image_identity_and_zero() {
        let p = Polytope::from_vertices(&[dv(&[1.0, 0.5]), dv(&[-1.0, 0.5]), dv(&[0.0, -1.0])]).unwrap();
        let id = p.affine_image(&DMatrix::identity(2, 2)).unwrap();
        assert!(id.set_equals(&p, 1e-9).unwrap());
        let zero = p.affine_image(&DMatrix::zeros(2, 2)).unwrap();
        let origin = Polytope::singleton(&dv(&[0.0, 0.0])).unwrap();
        assert!(zero.set_equals(&origin, 1e-9).unwrap());
    }

    #[test]
    fn rotation_of_box_permutes_bounds() {
        let p = Polytope::from_bounds(&[-1.0, -2.0], &[1.0, 2.0]).unwrap();
        // 90 degree rotation: (x, y) -> (-y, x)
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let img = p.affine_image(&rot).unwrap();
        let expect = Polytope::from_bounds(&[-2.0, -1.0], &[2.0, 1.0]).unwrap();
        assert!(img.set_equals(&expect, 1e-9).unwrap());
    }

    #[test]
    fn prune_drops_redundant_rows() {
        // Unit box plus a slack row x1 <= 5.
        let a = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0, 1.0, 1.0, 1.0, 5.0]);
        let p = Polytope::from_halfspaces(a, b).unwrap();
        let pruned = p.prune_redundant(1e-9).unwrap();
        assert_eq!(pruned.num_halfspaces(), 4);
        assert!(pruned.set_equals(&p, 1e-9).unwrap());
    }

    #[test]
    fn unbounded_input_rejected() {
        // Half-plane x <= 1 is unbounded.
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let b = DVector::from_vec(vec![1.0]);
        assert!(matches!(
            Polytope::from_halfspaces(a, b),
            Err(SetError::Unbounded)
        ));
    }

    #[test]
    fn empty_input_rejected() {
        let a = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b = DVector::from_vec(vec![-2.0, 1.0]); // x <= -2 and x >= -1
        assert!(matches!(Polytope::from_halfspaces(a, b), Err(SetError::Empty)));
    }

    #[test]
    fn serde_round_trip() {
        let p = Polytope::box_at_origin(&[1.5, 0.5]).unwrap();
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.contains("\"A\""));
        let q: Polytope = serde_json::from_str(&text).unwrap();
        assert!(p.set_equals(&q, 1e-12).unwrap());
    }
}
