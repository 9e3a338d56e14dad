//! Vertex enumeration and facet enumeration at desk scale (dimension <= 4).
//!
//! Both directions of the double description are done by brute force over
//! index subsets, with an affine-hull reduction so that lower-dimensional
//! sets (points, segments, flats) get a correct halfspace description.

use nalgebra::{DMatrix, DVector};

use super::SetError;

/// Ambient dimensions above this are rejected; the subset enumeration
/// underneath is combinatorial.
pub const MAX_DIM: usize = 4;

const COMBINATION_CAP: u128 = 5_000_000;

fn combinations_count(m: usize, d: usize) -> u128 {
    if d > m {
        return 0;
    }
    let mut acc: u128 = 1;
    for i in 0..d {
        acc = acc.saturating_mul((m - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Iterate over all `k`-subsets of `0..m` in lexicographic order.
fn for_each_subset(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k == 0 || k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + m - k {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Enumerate the vertices of `{x : a x <= b}` by solving all d-subsets of
/// rows. The polytope must be bounded for the result to describe the set.
pub fn vertex_enumeration(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> Result<Vec<DVector<f64>>, SetError> {
    let d = a.ncols();
    let m = a.nrows();
    if d == 0 || d > MAX_DIM {
        return Err(SetError::DimensionUnsupported(d));
    }
    if combinations_count(m, d) > COMBINATION_CAP {
        return Err(SetError::TooManyHalfspaces(m));
    }
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    let mut sub = DMatrix::zeros(d, d);
    let mut rhs = DVector::zeros(d);
    for_each_subset(m, d, |idx| {
        let mut scale: f64 = 0.0;
        for (r, &row) in idx.iter().enumerate() {
            for c in 0..d {
                sub[(r, c)] = a[(row, c)];
            }
            rhs[r] = b[row];
            scale = scale.max(a.row(row).amax());
        }
        if scale == 0.0 {
            return;
        }
        let lu = nalgebra::linalg::LU::new(sub.clone());
        let det: f64 = lu.determinant();
        if det.abs() < 1e-10 * scale.powi(d as i32) {
            return;
        }
        let Some(x) = lu.solve(&rhs) else { return };
        // Feasibility against every halfspace.
        let ax = a * &x;
        for i in 0..m {
            if ax[i] > b[i] + tol * (1.0 + b[i].abs()) {
                return;
            }
        }
        let dup = vertices
            .iter()
            .any(|v| (v - &x).amax() <= 1e-8 * (1.0 + x.amax()));
        if !dup {
            vertices.push(x.clone());
        }
    });
    Ok(vertices)
}

/// Orthonormal basis of the span of the centered `points` (columns of the
/// returned matrix), via pivoted Gram-Schmidt.
fn affine_basis(points: &[DVector<f64>], center: &DVector<f64>, tol: f64) -> Vec<DVector<f64>> {
    let d = center.len();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut residuals: Vec<DVector<f64>> = points.iter().map(|p| p - center).collect();
    let scale = residuals.iter().map(|r| r.norm()).fold(0.0f64, f64::max).max(1.0);
    while basis.len() < d {
        let (best, best_norm) = residuals
            .iter()
            .enumerate()
            .map(|(i, r)| (i, r.norm()))
            .fold((usize::MAX, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if best == usize::MAX || best_norm <= tol * scale {
            break;
        }
        let dir = residuals[best].clone() / best_norm;
        for r in residuals.iter_mut() {
            let proj = r.dot(&dir);
            *r -= &dir * proj;
        }
        basis.push(dir);
    }
    basis
}

/// Complete `basis` to an orthonormal basis of the ambient space, returning
/// only the complement directions.
fn orthogonal_complement(basis: &[DVector<f64>], d: usize) -> Vec<DVector<f64>> {
    let mut complement = Vec::new();
    let mut all: Vec<DVector<f64>> = basis.to_vec();
    for i in 0..d {
        let mut v = DVector::zeros(d);
        v[i] = 1.0;
        for u in &all {
            let proj = v.dot(u);
            v -= u * proj;
        }
        let norm = v.norm();
        if norm > 1e-10 {
            let v = v / norm;
            complement.push(v.clone());
            all.push(v);
        }
    }
    complement
}

/// Halfspace description of the convex hull of a point set. Handles hulls of
/// any affine dimension (points, segments, flats embedded in up to
/// [`MAX_DIM`] ambient dimensions).
pub fn convex_hull_halfspaces(points: &[DVector<f64>], tol: f64) -> Result<(DMatrix<f64>, DVector<f64>), SetError> {
    if points.is_empty() {
        return Err(SetError::Empty);
    }
    let d = points[0].len();
    if d == 0 || d > MAX_DIM {
        return Err(SetError::DimensionUnsupported(d));
    }
    // Dedupe.
    let mut pts: Vec<DVector<f64>> = Vec::new();
    for p in points {
        if p.len() != d {
            return Err(SetError::DimensionMismatch(format!(
                "point of length {} in dimension {}",
                p.len(),
                d
            )));
        }
        if !pts.iter().any(|q| (q - p).amax() <= 1e-12 * (1.0 + p.amax())) {
            pts.push(p.clone());
        }
    }
    let center = {
        let mut c = DVector::zeros(d);
        for p in &pts {
            c += p;
        }
        c / pts.len() as f64
    };
    let basis = affine_basis(&pts, &center, tol);
    let r = basis.len();

    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    // Flat directions become halfspace pairs through the centroid.
    for v in orthogonal_complement(&basis, d) {
        let off = v.dot(&center);
        rows.push((v.clone(), off));
        rows.push((-v, -off));
    }
    if r == 0 {
        let (a, b) = assemble(rows, d);
        return Ok((a, b));
    }

    // Project into the r-dimensional span.
    let proj: Vec<DVector<f64>> = pts
        .iter()
        .map(|p| DVector::from_fn(r, |i, _| basis[i].dot(&(p - &center))))
        .collect();
    let scale = proj.iter().map(|y| y.amax()).fold(0.0f64, f64::max).max(1.0);

    let mut facets: Vec<(DVector<f64>, f64)> = Vec::new();
    if r == 1 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for y in &proj {
            lo = lo.min(y[0]);
            hi = hi.max(y[0]);
        }
        facets.push((DVector::from_vec(vec![1.0]), hi));
        facets.push((DVector::from_vec(vec![-1.0]), -lo));
    } else {
        if combinations_count(pts.len(), r) > COMBINATION_CAP {
            return Err(SetError::TooManyHalfspaces(pts.len()));
        }
        for_each_subset(pts.len(), r, |idx| {
            // Normal orthogonal to the r-1 in-facet differences, by the
            // generalized cross product (cofactor expansion).
            let mut diffs = DMatrix::zeros(r - 1, r);
            for k in 1..r {
                for c in 0..r {
                    diffs[(k - 1, c)] = proj[idx[k]][c] - proj[idx[0]][c];
                }
            }
            let mut n = DVector::zeros(r);
            for c in 0..r {
                let minor = diffs.clone().remove_column(c);
                let det = nalgebra::linalg::LU::new(minor).determinant();
                n[c] = if c % 2 == 0 { det } else { -det };
            }
            let nn = n.norm();
            if nn < 1e-10 * scale.powi(r as i32 - 1) {
                return;
            }
            let n = n / nn;
            let off = n.dot(&proj[idx[0]]);
            let mut above = false;
            let mut below = false;
            for y in &proj {
                let s = n.dot(y) - off;
                if s > tol * scale {
                    above = true;
                } else if s < -tol * scale {
                    below = true;
                }
                if above && below {
                    return;
                }
            }
            if !above {
                push_dedup(&mut facets, n.clone(), off);
            }
            if !below {
                push_dedup(&mut facets, -n, -off);
            }
        });
        if facets.is_empty() {
            return Err(SetError::Numerical("hull produced no facets".into()));
        }
    }

    // Lift facets back to ambient coordinates.
    for (n, off) in facets {
        let mut a = DVector::zeros(d);
        for i in 0..r {
            a += &basis[i] * n[i];
        }
        let b = off + a.dot(&center);
        rows.push((a, b));
    }
    let (a, b) = assemble(rows, d);
    Ok((a, b))
}

fn push_dedup(facets: &mut Vec<(DVector<f64>, f64)>, n: DVector<f64>, off: f64) {
    for (en, eo) in facets.iter_mut() {
        if en.dot(&n) > 1.0 - 1e-10 {
            *eo = eo.min(off);
            let _ = en;
            return;
        }
    }
    facets.push((n, off));
}

fn assemble(rows: Vec<(DVector<f64>, f64)>, d: usize) -> (DMatrix<f64>, DVector<f64>) {
    let m = rows.len();
    let mut a = DMatrix::zeros(m, d);
    let mut b = DVector::zeros(m);
    for (i, (n, off)) in rows.into_iter().enumerate() {
        for j in 0..d {
            a[(i, j)] = n[j];
        }
        b[i] = off;
    }
    (a, b)
}
