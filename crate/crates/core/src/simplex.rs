//! Points of the standard simplex, faces, order patterns and majorization.
//!
//! External indices are 1-based throughout (`1..=m`).

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Largest coordinate-sum defect that construction silently rescales away.
pub const RENORMALIZE_LIMIT: f64 = 1e-6;

/// A point of the standard simplex `{x >= 0, sum x = 1}` with `m >= 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint<R> {
    coords: Vec<R>,
}

impl<R: Real> SimplexPoint<R> {
    /// Validates and rescales raw coordinates. Sums within
    /// [`RENORMALIZE_LIMIT`] of one are divided out; larger defects and
    /// negative or non-finite entries are rejected.
    pub fn new(coords: Vec<R>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::domain(format!(
                "simplex points need m >= 2, got {}",
                coords.len()
            )));
        }
        let zero = coords[0].zero_like();
        for (i, c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(Error::domain(format!("coordinate {} is not finite", i + 1)));
            }
            if *c < zero {
                return Err(Error::domain(format!(
                    "coordinate {} is negative ({})",
                    i + 1,
                    c.to_f64()
                )));
            }
        }
        let sum = R::sum(&coords);
        let defect = (sum.clone() - sum.one_like()).to_f64().abs();
        if defect > RENORMALIZE_LIMIT {
            return Err(Error::domain(format!(
                "coordinate sum {} is not within {RENORMALIZE_LIMIT:e} of 1",
                sum.to_f64()
            )));
        }
        let coords = coords.into_iter().map(|c| c / sum.clone()).collect();
        Ok(SimplexPoint { coords })
    }

    pub fn from_f64(coords: &[f64], precision: u32) -> Result<Self> {
        Self::new(coords.iter().map(|&c| R::from_f64(c, precision)).collect())
    }

    /// Wraps coordinates already known to be nonnegative with unit sum.
    pub(crate) fn from_normalized(coords: Vec<R>) -> Self {
        debug_assert!(coords.len() >= 2);
        SimplexPoint { coords }
    }

    /// The vertex `e_k` (1-based).
    pub fn vertex(k: usize, m: usize, precision: u32) -> Result<Self> {
        face_center(&Face::new(vec![k], m)?, precision)
    }

    pub fn coords(&self) -> &[R] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<R> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// 1-based coordinate access.
    pub fn get(&self, k: usize) -> &R {
        &self.coords[k - 1]
    }

    pub fn precision(&self) -> u32 {
        self.coords[0].precision()
    }

    pub fn to_f64_vec(&self) -> Vec<f64> {
        self.coords.iter().map(Real::to_f64).collect()
    }

    /// 1-based indices of the strictly positive coordinates.
    pub fn support(&self) -> Vec<usize> {
        let zero = self.coords[0].zero_like();
        (1..=self.dim())
            .filter(|&k| self.coords[k - 1] > zero)
            .collect()
    }

    /// 1-based indices of the zero coordinates.
    pub fn null_set(&self) -> Vec<usize> {
        let zero = self.coords[0].zero_like();
        (1..=self.dim())
            .filter(|&k| self.coords[k - 1] <= zero)
            .collect()
    }

    /// The face spanned by the support.
    pub fn support_face(&self) -> Face {
        Face {
            indices: self.support(),
            m: self.dim(),
        }
    }

    pub fn l1_distance(&self, other: &Self) -> R {
        let terms: Vec<R> = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a.clone() - b.clone()).abs())
            .collect();
        R::sum(&terms)
    }

    pub fn min_coord(&self) -> R {
        self.coords
            .iter()
            .cloned()
            .reduce(R::min_of)
            .expect("nonempty")
    }

    /// Re-expresses the point at another precision (exactly when widening).
    pub fn convert<S: Real>(&self, precision: u32) -> SimplexPoint<S> {
        SimplexPoint {
            coords: self
                .coords
                .iter()
                .map(|c| S::from_f64(c.to_f64(), precision))
                .collect(),
        }
    }
}

/// A nonempty index set `alpha` of `{1, ..., m}`, kept sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Face {
    indices: Vec<usize>,
    m: usize,
}

impl Face {
    pub fn new(mut indices: Vec<usize>, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::domain(format!("ambient dimension must be >= 2, got {m}")));
        }
        indices.sort_unstable();
        indices.dedup();
        if indices.is_empty() {
            return Err(Error::domain("face index set is empty"));
        }
        if let Some(&bad) = indices.iter().find(|&&k| k == 0 || k > m) {
            return Err(Error::domain(format!("face index {bad} outside 1..={m}")));
        }
        Ok(Face { indices, m })
    }

    pub fn full(m: usize) -> Result<Self> {
        Face::new((1..=m).collect(), m)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn ambient_dim(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_vertex(&self) -> bool {
        self.indices.len() == 1
    }

    pub fn contains(&self, k: usize) -> bool {
        self.indices.binary_search(&k).is_ok()
    }

    /// All `2^m - 1` nonempty faces, ordered by bitmask.
    pub fn all(m: usize) -> Result<Vec<Face>> {
        if !(2..=usize::BITS as usize - 1).contains(&m) {
            return Err(Error::param(format!("cannot enumerate faces for m = {m}")));
        }
        Ok((1usize..(1 << m))
            .map(|mask| Face {
                indices: (0..m).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect(),
                m,
            })
            .collect())
    }
}

/// Sign of `a - b` with differences of magnitude `<= tol` counted as zero.
fn tol_sign<R: Real>(a: &R, b: &R, tol: f64) -> Ordering {
    let d = a.clone() - b.clone();
    if d.abs() <= d.lit(tol) {
        Ordering::Equal
    } else if d > d.zero_like() {
        Ordering::Greater
    } else {
        Ordering::Less
    }
}

/// Pairwise comparison pattern of a vector: entry `(i, j)` is the tolerant
/// sign of `x_i - x_j`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderPattern {
    m: usize,
    signs: Vec<Ordering>,
}

impl OrderPattern {
    pub fn of<R: Real>(x: &[R], tol: f64) -> Self {
        let m = x.len();
        let mut signs = Vec::with_capacity(m * m);
        for a in x {
            for b in x {
                signs.push(tol_sign(a, b, tol));
            }
        }
        OrderPattern { m, signs }
    }

    /// Comparison of coordinates `i` and `j` (1-based).
    pub fn cmp(&self, i: usize, j: usize) -> Ordering {
        self.signs[(i - 1) * self.m + (j - 1)]
    }

    /// The pattern on the index subset of `face`.
    pub fn restricted(&self, face: &Face) -> OrderPattern {
        let idx = face.indices();
        let mut signs = Vec::with_capacity(idx.len() * idx.len());
        for &i in idx {
            for &j in idx {
                signs.push(self.cmp(i, j));
            }
        }
        OrderPattern {
            m: idx.len(),
            signs,
        }
    }

    /// First `(i, j)` pair (1-based) on which two patterns disagree.
    pub fn first_difference(&self, other: &OrderPattern) -> Option<(usize, usize)> {
        if self.m != other.m {
            return Some((0, 0));
        }
        (0..self.m * self.m)
            .find(|&p| self.signs[p] != other.signs[p])
            .map(|p| (p / self.m + 1, p % self.m + 1))
    }
}

/// `x ≈ y`: both vectors induce the same pairwise order pattern.
pub fn similar_order_equal<R: Real>(x: &[R], y: &[R], tol: f64) -> Result<bool> {
    Ok(similar_order_witness(x, y, tol)?.is_none())
}

/// The first offending pair (1-based) if `x` and `y` are not similarly
/// ordered.
pub fn similar_order_witness<R: Real>(
    x: &[R],
    y: &[R],
    tol: f64,
) -> Result<Option<(usize, usize)>> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if tol_sign(&x[i], &x[j], tol) != tol_sign(&y[i], &y[j], tol) {
                return Ok(Some((i + 1, j + 1)));
            }
        }
    }
    Ok(None)
}

/// Center `c_alpha` of a face: `1/|alpha|` on the face, zero elsewhere.
pub fn face_center<R: Real>(face: &Face, precision: u32) -> Result<SimplexPoint<R>> {
    let zero = R::from_f64(0.0, precision);
    let w = R::from_f64(1.0, precision) / R::from_f64(face.len() as f64, precision);
    let coords = (1..=face.ambient_dim())
        .map(|k| if face.contains(k) { w.clone() } else { zero.clone() })
        .collect();
    Ok(SimplexPoint::from_normalized(coords))
}

/// `MaxInd_alpha(x)`: indices of `alpha` within `tol` of the largest
/// coordinate over `alpha`.
pub fn max_ind<R: Real>(x: &SimplexPoint<R>, face: &Face, tol: f64) -> Result<Vec<usize>> {
    check_support_in_face(x, face)?;
    let top = face
        .indices()
        .iter()
        .map(|&k| x.get(k).clone())
        .reduce(R::max_of)
        .expect("faces are nonempty");
    let threshold = top.clone() - top.lit(tol);
    Ok(face
        .indices()
        .iter()
        .copied()
        .filter(|&k| *x.get(k) >= threshold)
        .collect())
}

pub(crate) fn check_support_in_face<R: Real>(x: &SimplexPoint<R>, face: &Face) -> Result<()> {
    if x.dim() != face.ambient_dim() {
        return Err(Error::Dimension {
            expected: face.ambient_dim(),
            got: x.dim(),
        });
    }
    if let Some(k) = x.support().into_iter().find(|&k| !face.contains(k)) {
        return Err(Error::domain(format!(
            "support index {k} lies outside face {:?}",
            face.indices()
        )));
    }
    Ok(())
}

/// `x ≻ y`: descending partial sums of `x` dominate those of `y` (up to
/// `tol`) and the totals agree within `tol`.
pub fn majorizes<R: Real>(x: &[R], y: &[R], tol: f64) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Ok(true);
    }
    let desc = |v: &[R]| {
        let mut s = v.to_vec();
        s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        s
    };
    let (xs, ys) = (desc(x), desc(y));
    let tol_r = x[0].lit(tol);
    let mut px = x[0].zero_like();
    let mut py = x[0].zero_like();
    for k in 0..xs.len() {
        px = px + xs[k].clone();
        py = py + ys[k].clone();
        if k + 1 < xs.len() && px.clone() < py.clone() - tol_r.clone() {
            return Ok(false);
        }
    }
    Ok((px - py).abs() <= tol_r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(v: &[f64]) -> SimplexPoint<f64> {
        SimplexPoint::from_f64(v, 53).unwrap()
    }

    fn exhaustive_same_signs(x: &[f64], y: &[f64]) -> bool {
        let sgn = |d: f64| (d > 0.0) as i8 - (d < 0.0) as i8;
        (0..x.len()).all(|i| (0..x.len()).all(|j| sgn(x[i] - x[j]) == sgn(y[i] - y[j])))
    }

    #[test]
    fn similar_order_examples() {
        assert!(similar_order_equal(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0], 0.0).unwrap());
        assert!(!similar_order_equal(&[1.0, 1.0, 2.0], &[1.0, 2.0, 2.0], 0.0).unwrap());
        let x = [0.5, 0.3, 0.2];
        let y = [0.25, 0.09, 0.04];
        assert!(exhaustive_same_signs(&x, &y));
        assert!(similar_order_equal(&x, &y, 0.0).unwrap());
        assert!(matches!(
            similar_order_equal(&[1.0, 2.0], &[1.0], 0.0),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn face_center_examples() {
        let c: SimplexPoint<f64> = face_center(&Face::full(3).unwrap(), 53).unwrap();
        assert_eq!(c.to_f64_vec(), vec![1.0 / 3.0; 3]);
        let v: SimplexPoint<f64> = face_center(&Face::new(vec![2], 3).unwrap(), 53).unwrap();
        assert_eq!(v.to_f64_vec(), vec![0.0, 1.0, 0.0]);
        let e: SimplexPoint<f64> = face_center(&Face::new(vec![1, 3], 4).unwrap(), 53).unwrap();
        assert_eq!(e.to_f64_vec(), vec![0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn face_validation() {
        assert!(Face::new(vec![], 3).is_err());
        assert!(Face::new(vec![4], 3).is_err());
        assert!(Face::new(vec![0], 3).is_err());
        assert_eq!(Face::all(4).unwrap().len(), 15);
    }

    #[test]
    fn max_ind_examples() {
        let full = Face::full(3).unwrap();
        assert_eq!(max_ind(&pt(&[0.5, 0.3, 0.2]), &full, 0.0).unwrap(), vec![1]);
        let c: SimplexPoint<f64> = face_center(&full, 53).unwrap();
        assert_eq!(max_ind(&c, &full, 0.0).unwrap(), vec![1, 2, 3]);
        assert_eq!(max_ind(&pt(&[0.4, 0.4, 0.2]), &full, 1e-12).unwrap(), vec![1, 2]);
        let edge = Face::new(vec![1, 2], 3).unwrap();
        assert!(matches!(
            max_ind(&pt(&[0.5, 0.3, 0.2]), &edge, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn majorization_examples() {
        let third = 1.0 / 3.0;
        assert!(majorizes(&[1.0, 0.0, 0.0], &[third, third, third], 1e-15).unwrap());
        let x = [0.5, 0.3, 0.2];
        assert!(majorizes(&x, &x, 0.0).unwrap());
        // partial sums 0.5 >= 0.4, 0.8 >= 0.8, totals 1 = 1
        assert!(majorizes(&x, &[0.4, 0.4, 0.2], 1e-12).unwrap());
        assert!(!majorizes(&[0.4, 0.4, 0.2], &x, 1e-12).unwrap());
        assert!(!majorizes(&[0.5, 0.5], &[0.5, 0.6], 1e-12).unwrap());
    }

    #[test]
    fn construction_rescales_small_defects_only() {
        let p = pt(&[0.5, 0.5 + 1e-9]);
        let s: f64 = p.coords().iter().sum();
        assert!((s - 1.0).abs() < 1e-15);
        assert!(SimplexPoint::<f64>::from_f64(&[0.5, 0.6], 53).is_err());
        assert!(SimplexPoint::<f64>::from_f64(&[1.2, -0.2], 53).is_err());
        assert!(SimplexPoint::<f64>::from_f64(&[1.0], 53).is_err());
    }

    fn simplex_vec(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.001f64..1.0, m).prop_map(|v| {
            let s: f64 = v.iter().sum();
            v.into_iter().map(|c| c / s).collect()
        })
    }

    proptest! {
        #[test]
        fn center_of_support_is_majorized(v in (2usize..7).prop_flat_map(simplex_vec)) {
            let x = pt(&v);
            let c: SimplexPoint<f64> = face_center(&x.support_face(), 53).unwrap();
            prop_assert!(majorizes(x.coords(), c.coords(), 1e-12).unwrap());
        }

        #[test]
        fn max_ind_of_center_is_face(m in 2usize..8, mask in 1usize..128) {
            let idx: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
            prop_assume!(!idx.is_empty());
            let face = Face::new(idx.clone(), m).unwrap();
            let c: SimplexPoint<f64> = face_center(&face, 53).unwrap();
            prop_assert_eq!(max_ind(&c, &face, 0.0).unwrap(), idx);
        }

        #[test]
        fn center_fixed_by_permutation(m in 2usize..8, mask in 1usize..128, seed in any::<u64>()) {
            let idx: Vec<usize> = (0..m).filter(|b| mask >> b & 1 == 1).map(|b| b + 1).collect();
            prop_assume!(!idx.is_empty());
            let face = Face::new(idx.clone(), m).unwrap();
            let c: SimplexPoint<f64> = face_center(&face, 53).unwrap();
            let mut perm = idx.clone();
            let n = perm.len();
            for i in (1..n).rev() {
                perm.swap(i, (seed as usize >> (i % 32)) % (i + 1));
            }
            let mut permuted = c.to_f64_vec();
            for (a, b) in idx.iter().zip(&perm) {
                permuted[a - 1] = c.coords()[b - 1];
            }
            prop_assert_eq!(permuted, c.to_f64_vec());
        }

        #[test]
        fn similar_order_is_equivalence_on_distinct(
            a in prop::collection::vec(0.0f64..1.0, 4),
            b in prop::collection::vec(0.0f64..1.0, 4),
            c in prop::collection::vec(0.0f64..1.0, 4),
        ) {
            let distinct = |v: &Vec<f64>| (0..4).all(|i| (i + 1..4).all(|j| v[i] != v[j]));
            prop_assume!(distinct(&a) && distinct(&b) && distinct(&c));
            prop_assert!(similar_order_equal(&a, &a, 0.0).unwrap());
            let ab = similar_order_equal(&a, &b, 0.0).unwrap();
            prop_assert_eq!(ab, similar_order_equal(&b, &a, 0.0).unwrap());
            if ab && similar_order_equal(&b, &c, 0.0).unwrap() {
                prop_assert!(similar_order_equal(&a, &c, 0.0).unwrap());
            }
        }
    }
}
