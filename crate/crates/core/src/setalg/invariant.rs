//! Robust positively invariant sets for the linear error dynamics
//! `x+ = Phi x + D w`, `w` ranging over a bounded polytope.

use nalgebra::{DMatrix, DVector};

use super::{Polytope, SetError, SET_TOL};
use crate::lti;

/// Bracketing approximation of a set: `inner` is contained in the target,
/// `outer` contains it, and `hausdorff_gap` bounds the distance between
/// `outer` and the target.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SetApproximation {
    pub inner: Polytope,
    pub outer: Polytope,
    pub hausdorff_gap: f64,
}

/// Result of the maximal-RPI recursion. `certified` is false when the
/// halfspace recursion hit the iteration cap before reaching a fixpoint.
#[derive(Debug, Clone)]
pub struct RpiResult {
    pub set: Polytope,
    pub certified: bool,
    pub iterations: usize,
}

const MRPI_CAP: usize = 400;
const MAX_RPI_CAP: usize = 500;

/// Outer approximation of the minimal RPI set
/// `X_inf = (+)_{j>=0} Phi^j D W` with a guaranteed Hausdorff gap.
///
/// The truncated sum `S_s = (+)_{j<s} Phi^j D W` is inflated by
/// `1/(1-alpha)` once `Phi^s D W` fits inside `alpha * D W`; the returned
/// outer set is then itself RPI, which is re-checked before returning. The
/// series here starts at `j = 0`: some texts index it from `j = 1`, which
/// omits the direct `D W` term and produces a set that is not invariant
/// under the one-step map.
pub fn mrpi_outer(
    phi: &DMatrix<f64>,
    d_matrix: &DMatrix<f64>,
    w: &Polytope,
    eps: f64,
) -> Result<SetApproximation, SetError> {
    if !phi.is_square() || phi.nrows() != d_matrix.nrows() {
        return Err(SetError::DimensionMismatch(format!(
            "phi is {}x{}, D has {} rows",
            phi.nrows(),
            phi.ncols(),
            d_matrix.nrows()
        )));
    }
    if d_matrix.ncols() != w.dim() {
        return Err(SetError::DimensionMismatch("D columns vs disturbance dimension".into()));
    }
    if !(eps > 0.0) {
        return Err(SetError::Numerical("eps must be positive".into()));
    }
    if !lti::is_schur(phi).map_err(|e| SetError::Numerical(e.to_string()))? {
        return Err(SetError::NotSchur);
    }
    let dw = w.affine_image(d_matrix)?.prune_redundant(super::PRUNE_TOL)?;
    // Degenerate disturbance image: the limit set is the origin.
    if dw.max_norm()? <= 1e-14 {
        let origin = Polytope::singleton(&DVector::zeros(phi.nrows()))?;
        return Ok(SetApproximation {
            inner: origin.clone(),
            outer: origin,
            hausdorff_gap: 0.0,
        });
    }
    // The contraction test needs the origin strictly inside D W.
    for i in 0..dw.num_halfspaces() {
        let norm = dw.halfspace_matrix().row(i).norm();
        if dw.halfspace_offsets()[i] <= 1e-12 * norm.max(1.0) {
            return Err(SetError::OriginNotInterior);
        }
    }

    let mut partial = dw.clone(); // S_1 = D W
    let mut phi_pow = phi.clone(); // Phi^s with s matching partial
    let mut chosen: Option<(f64, f64)> = None; // (alpha, gap)
    let mut s = 1usize;
    loop {
        // alpha(s) = min { a : Phi^s D W <= a D W }
        let mut alpha: f64 = 0.0;
        for i in 0..dw.num_halfspaces() {
            let dir = phi_pow.transpose() * dw.halfspace_matrix().row(i).transpose();
            let sup = if dir.norm() <= 1e-300 { 0.0 } else { dw.support(&dir)? };
            alpha = alpha.max(sup / dw.halfspace_offsets()[i]);
        }
        if alpha < 1.0 {
            let reach = partial.max_norm()?;
            let gap = alpha / (1.0 - alpha) * reach;
            if gap <= eps {
                chosen = Some((alpha, gap));
                break;
            }
        }
        if s >= MRPI_CAP {
            return Err(SetError::IterationCap(MRPI_CAP));
        }
        let term = dw.affine_image(&phi_pow)?;
        partial = partial.minkowski_sum(&term)?.prune_redundant(super::PRUNE_TOL)?;
        phi_pow = &phi_pow * phi;
        s += 1;
    }
    let (alpha, gap) = chosen.expect("loop exits via break");
    let outer = partial.scale(1.0 / (1.0 - alpha))?.prune_redundant(super::PRUNE_TOL)?;

    // The inflation argument makes the outer set RPI; verify it numerically.
    if !is_rpi(phi, &dw, &outer, SET_TOL)? {
        return Err(SetError::Numerical(
            "constructed outer set failed the invariance check".into(),
        ));
    }
    Ok(SetApproximation {
        inner: partial,
        outer,
        hausdorff_gap: gap,
    })
}

/// Check `Phi X (+) D W <= X` through support functions, without forming
/// the sum explicitly.
pub fn is_rpi(phi: &DMatrix<f64>, dw: &Polytope, x: &Polytope, tol: f64) -> Result<bool, SetError> {
    for i in 0..x.num_halfspaces() {
        let a = x.halfspace_matrix().row(i).transpose();
        let lhs = x.support(&(phi.transpose() * &a))? + dw.support(&a)?;
        if lhs > x.halfspace_offsets()[i] + tol {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Maximal RPI subset of `x_constraint` for `x+ = Phi x + D w`, by the
/// backward halfspace recursion until the set stops shrinking.
pub fn max_rpi(
    phi: &DMatrix<f64>,
    d_matrix: &DMatrix<f64>,
    w: &Polytope,
    x_constraint: &Polytope,
) -> Result<RpiResult, SetError> {
    if !phi.is_square() || phi.nrows() != x_constraint.dim() {
        return Err(SetError::DimensionMismatch("phi vs constraint dimension".into()));
    }
    if d_matrix.nrows() != phi.nrows() || d_matrix.ncols() != w.dim() {
        return Err(SetError::DimensionMismatch("D vs phi/disturbance dimensions".into()));
    }
    if !lti::is_schur(phi).map_err(|e| SetError::Numerical(e.to_string()))? {
        return Err(SetError::NotSchur);
    }
    let dw = w.affine_image(d_matrix)?.prune_redundant(super::PRUNE_TOL)?;
    let mut omega = x_constraint.prune_redundant(super::PRUNE_TOL)?;
    for iter in 1..=MAX_RPI_CAP {
        // Pre-set rows: a (Phi x + D w) <= b for all w.
        let m = omega.num_halfspaces();
        let d = omega.dim();
        let mut pre_a = DMatrix::zeros(m, d);
        let mut pre_b = DVector::zeros(m);
        for i in 0..m {
            let a = omega.halfspace_matrix().row(i).transpose();
            pre_a.row_mut(i).copy_from(&(phi.transpose() * &a).transpose());
            pre_b[i] = omega.halfspace_offsets()[i] - dw.support(&a)?;
        }
        let pre = match Polytope::from_parts(pre_a, pre_b) {
            Ok(p) => p,
            Err(SetError::Empty) => return Err(SetError::EmptyAtStage(iter)),
            Err(e) => return Err(e),
        };
        let candidate = match omega.intersection(&pre) {
            Ok(c) => c.prune_redundant(super::PRUNE_TOL)?,
            Err(SetError::Empty) => return Err(SetError::EmptyAtStage(iter)),
            Err(e) => return Err(e),
        };
        if omega.is_subset(&candidate, 1e-9)? {
            return Ok(RpiResult {
                set: candidate,
                certified: true,
                iterations: iter,
            });
        }
        omega = candidate;
    }
    Ok(RpiResult {
        set: omega,
        certified: false,
        iterations: MAX_RPI_CAP,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_mat(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn mrpi_collapses_for_nilpotent_map() {
        let w = Polytope::box_at_origin(&[1.0]).unwrap();
        let approx = mrpi_outer(&scalar_mat(0.0), &scalar_mat(1.0), &w, 1e-6).unwrap();
        let expect = Polytope::box_at_origin(&[1.0]).unwrap();
        assert!(approx.outer.set_equals(&expect, 1e-6).unwrap());
        assert!(approx.hausdorff_gap <= 1e-6);
    }

    #[test]
    fn mrpi_scalar_geometric_series() {
        let w = Polytope::box_at_origin(&[1.0]).unwrap();
        let approx = mrpi_outer(&scalar_mat(0.5), &scalar_mat(1.0), &w, 1e-3).unwrap();
        // X_inf = [-2, 2]
        let sup = approx.outer.support(&DVector::from_vec(vec![1.0])).unwrap();
        assert!(sup >= 2.0 - 1e-9 && sup <= 2.0 + 1e-3);
        let inf = approx.outer.support(&DVector::from_vec(vec![-1.0])).unwrap();
        assert!(inf >= 2.0 - 1e-9 && inf <= 2.0 + 1e-3);
        // inner <= outer and the inner set is a true subset of the limit.
        assert!(approx.inner.is_subset(&approx.outer, 1e-9).unwrap());
        assert!(approx.inner.support(&DVector::from_vec(vec![1.0])).unwrap() <= 2.0);
    }

    #[test]
    fn mrpi_diagonal_two_dimensional() {
        let w = Polytope::box_at_origin(&[1.0, 1.0]).unwrap();
        let phi = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.25]);
        let approx = mrpi_outer(&phi, &DMatrix::identity(2, 2), &w, 1e-3).unwrap();
        let expect = Polytope::from_bounds(&[-2.0, -4.0 / 3.0], &[2.0, 4.0 / 3.0]).unwrap();
        assert!(expect.is_subset(&approx.outer, 1e-9).unwrap());
        assert!(approx.outer.is_subset(&expect.minkowski_sum(&Polytope::box_at_origin(&[1.1e-3, 1.1e-3]).unwrap()).unwrap(), 1e-9).unwrap());
    }

    #[test]
    fn mrpi_gap_monotone_under_halved_eps() {
        let w = Polytope::box_at_origin(&[1.0]).unwrap();
        let mut eps = 1e-1;
        let mut last_gap = f64::INFINITY;
        for _ in 0..6 {
            let approx = mrpi_outer(&scalar_mat(0.7), &scalar_mat(1.0), &w, eps).unwrap();
            assert!(approx.hausdorff_gap <= last_gap + 1e-15);
            last_gap = approx.hausdorff_gap;
            eps /= 2.0;
        }
    }

    #[test]
    fn mrpi_outer_is_invariant() {
        let w = Polytope::box_at_origin(&[0.3, 0.2]).unwrap();
        let phi = DMatrix::from_row_slice(2, 2, &[0.6, 0.2, -0.1, 0.5]);
        let approx = mrpi_outer(&phi, &DMatrix::identity(2, 2), &w, 1e-4).unwrap();
        let dw = w.clone();
        assert!(is_rpi(&phi, &dw, &approx.outer, 1e-8).unwrap());
    }

    #[test]
    fn mrpi_rejects_unstable_map() {
        let w = Polytope::box_at_origin(&[1.0]).unwrap();
        assert!(matches!(
            mrpi_outer(&scalar_mat(1.0), &scalar_mat(1.0), &w, 1e-3),
            Err(SetError::NotSchur)
        ));
    }

    #[test]
    fn max_rpi_no_disturbance_keeps_constraint_box() {
        let w = Polytope::box_at_origin(&[0.0]).unwrap();
        let constraint = Polytope::box_at_origin(&[1.0]).unwrap();
        let r = max_rpi(&scalar_mat(0.0), &scalar_mat(1.0), &w, &constraint).unwrap();
        assert!(r.certified);
        assert!(r.set.set_equals(&constraint, 1e-9).unwrap());
    }

    #[test]
    fn max_rpi_scalar_one_step() {
        // 0.5 * 1 + 0.1 <= 1, so the constraint interval is already invariant.
        let w = Polytope::box_at_origin(&[0.1]).unwrap();
        let constraint = Polytope::box_at_origin(&[1.0]).unwrap();
        let r = max_rpi(&scalar_mat(0.5), &scalar_mat(1.0), &w, &constraint).unwrap();
        assert!(r.certified);
        assert!(r.set.set_equals(&constraint, 1e-9).unwrap());
    }

    #[test]
    fn max_rpi_defining_property() {
        let w = Polytope::box_at_origin(&[0.1, 0.1]).unwrap();
        let phi = DMatrix::from_row_slice(2, 2, &[0.8, 0.3, 0.0, 0.6]);
        let constraint = Polytope::box_at_origin(&[1.0, 1.0]).unwrap();
        let r = max_rpi(&phi, &DMatrix::identity(2, 2), &w, &constraint).unwrap();
        assert!(r.certified);
        let dw = w.clone();
        assert!(is_rpi(&phi, &dw, &r.set, 1e-8).unwrap());
        // Contains the minimal RPI set.
        let approx = mrpi_outer(&phi, &DMatrix::identity(2, 2), &w, 1e-4).unwrap();
        assert!(approx.inner.is_subset(&r.set, 1e-8).unwrap());
    }

    #[test]
    fn max_rpi_too_large_disturbance_is_empty() {
        let w = Polytope::box_at_origin(&[2.0]).unwrap();
        let constraint = Polytope::box_at_origin(&[1.0]).unwrap();
        assert!(matches!(
            max_rpi(&scalar_mat(0.9), &scalar_mat(1.0), &w, &constraint),
            Err(SetError::EmptyAtStage(_))
        ));
    }

    #[test]
    fn scalar_gap_value_matches_series() {
        // For phi = 0.5 the outer radius is 2 within the requested gap.
        let w = Polytope::box_at_origin(&[1.0]).unwrap();
        let approx = mrpi_outer(&scalar_mat(0.5), &scalar_mat(1.0), &w, 1e-6).unwrap();
        let sup = approx.outer.support(&DVector::from_vec(vec![1.0])).unwrap();
        assert_abs_diff_eq!(sup, 2.0, epsilon = 1e-6);
    }
}
