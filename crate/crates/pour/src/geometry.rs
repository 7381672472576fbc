//! Simplex-ETF frames and rank-(d-1) orthogonal projectors.
//!
//! A simplex equiangular tight frame is a set of `C` unit vectors with
//! pairwise inner product `-1/(C-1)` summing to zero. Removing one vertex
//! and projecting the rest onto its orthogonal complement yields the
//! `C-1` simplex ETF again, which is the geometric core of projection
//! unlearning.

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{PourError, Result};

/// `C` unit class directions forming a simplex ETF in `d` dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct EtfFrame {
    directions: Vec<Array1<f64>>,
    class_count: usize,
    ambient_dim: usize,
}

impl EtfFrame {
    /// Wrap raw directions without validating the ETF identities.
    ///
    /// Used by deserialization and by tests that deliberately build
    /// perturbed frames; `gram_residual` reports how far from exact the
    /// result is.
    pub fn from_directions(directions: Vec<Array1<f64>>) -> Result<EtfFrame> {
        if directions.len() < 2 {
            return Err(PourError::InvalidConfig(
                "a frame needs at least 2 directions".into(),
            ));
        }
        let ambient_dim = directions[0].len();
        for v in &directions {
            if v.len() != ambient_dim {
                return Err(PourError::DimensionMismatch {
                    expected: ambient_dim,
                    got: v.len(),
                    context: "frame direction",
                });
            }
        }
        Ok(EtfFrame {
            class_count: directions.len(),
            ambient_dim,
            directions,
        })
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn direction(&self, i: usize) -> ArrayView1<'_, f64> {
        self.directions[i].view()
    }

    pub fn directions(&self) -> &[Array1<f64>] {
        &self.directions
    }

    /// Directions stacked as a `C x d` matrix.
    pub fn as_matrix(&self) -> Array2<f64> {
        let mut m = Array2::zeros((self.class_count, self.ambient_dim));
        for (i, v) in self.directions.iter().enumerate() {
            m.row_mut(i).assign(v);
        }
        m
    }
}

/// Rank-(d-1) orthogonal projection `P = I - v v^T / ||v||^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector {
    matrix: Array2<f64>,
    removed_direction: Array1<f64>,
    direction: Array1<f64>,
    norm_sq: f64,
}

impl Projector {
    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    /// The unit vector spanning the null space of the projector.
    pub fn removed_direction(&self) -> ArrayView1<'_, f64> {
        self.removed_direction.view()
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Apply the projection to a single vector.
    ///
    /// Computed as the rank-1 update `z - v (v.z)/||v||^2` rather than a
    /// matrix product: when `z` equals the removed direction bit for bit
    /// the coefficient is exactly 1 and the image is exactly zero.
    pub fn apply(&self, v: ArrayView1<'_, f64>) -> Array1<f64> {
        let coeff = v.dot(&self.direction) / self.norm_sq;
        let mut out = v.to_owned();
        out.scaled_add(-coeff, &self.direction);
        out
    }

    /// Apply the projection to every row of an `n x d` matrix.
    pub fn apply_rows(&self, rows: &Array2<f64>) -> Array2<f64> {
        let mut out = rows.clone();
        for mut row in out.axis_iter_mut(ndarray::Axis(0)) {
            let coeff = row.dot(&self.direction) / self.norm_sq;
            row.scaled_add(-coeff, &self.direction);
        }
        out
    }
}

/// Construct a simplex ETF with `class_count` directions in `ambient_dim`
/// dimensions.
///
/// The frame is built analytically in `C-1` dimensions from Helmert
/// coordinates, so the Gram identities hold to machine precision. When
/// `ambient_dim > C-1` the frame is embedded through a seeded random
/// orthonormal basis (Gram-Schmidt on a ChaCha8-seeded Gaussian matrix),
/// deterministic per seed. When `ambient_dim == C-1` the canonical frame
/// is returned unchanged.
pub fn make_etf(class_count: usize, ambient_dim: usize, orientation_seed: u64) -> Result<EtfFrame> {
    if class_count < 2 {
        return Err(PourError::InvalidConfig(
            "class_count must be at least 2".into(),
        ));
    }
    if ambient_dim < class_count - 1 {
        return Err(PourError::DimensionTooSmall {
            ambient_dim,
            required: class_count - 1,
        });
    }
    let canonical = canonical_etf(class_count);
    if ambient_dim == class_count - 1 {
        return EtfFrame::from_directions(canonical);
    }
    let basis = random_orthonormal_basis(ambient_dim, class_count - 1, orientation_seed);
    let directions = canonical
        .into_iter()
        .map(|v| basis.dot(&v))
        .collect::<Vec<_>>();
    EtfFrame::from_directions(directions)
}

/// Canonical simplex ETF in `C-1` dimensions: `v_i = sqrt(C/(C-1)) * H e_i`
/// with `H` the (C-1) x C Helmert matrix, whose rows are orthonormal and
/// orthogonal to the all-ones vector. Then `H^T H = I - J/C`, which gives
/// the exact ETF Gram.
fn canonical_etf(class_count: usize) -> Vec<Array1<f64>> {
    let c = class_count;
    let scale = (c as f64 / (c as f64 - 1.0)).sqrt();
    let mut helmert = Array2::zeros((c - 1, c));
    for k in 1..c {
        let norm = (k as f64 * (k + 1) as f64).sqrt();
        for j in 0..k {
            helmert[[k - 1, j]] = 1.0 / norm;
        }
        helmert[[k - 1, k]] = -(k as f64) / norm;
    }
    (0..c)
        .map(|i| {
            let mut v = helmert.column(i).to_owned();
            v *= scale;
            v
        })
        .collect()
}

/// Orthonormal `dim x k` basis from modified Gram-Schmidt on a seeded
/// Gaussian matrix. Requires `dim >= k`; a re-draw on near-dependence is
/// not needed because Gaussian columns are independent almost surely.
fn random_orthonormal_basis(dim: usize, k: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<Array1<f64>> = (0..k)
        .map(|_| Array1::from_iter((0..dim).map(|_| StandardNormal.sample(&mut rng))))
        .collect();
    for i in 0..k {
        for j in 0..i {
            let proj = cols[i].dot(&cols[j]);
            let prev = cols[j].clone();
            cols[i].scaled_add(-proj, &prev);
        }
        // second pass for numerical orthogonality
        for j in 0..i {
            let proj = cols[i].dot(&cols[j]);
            let prev = cols[j].clone();
            cols[i].scaled_add(-proj, &prev);
        }
        let norm = cols[i].dot(&cols[i]).sqrt();
        cols[i] /= norm;
    }
    let mut basis = Array2::zeros((dim, k));
    for (j, col) in cols.iter().enumerate() {
        basis.column_mut(j).assign(col);
    }
    basis
}

/// Build `P = I - v v^T / ||v||^2` from a nonzero direction.
pub fn projector_from_direction(v: ArrayView1<'_, f64>) -> Result<Projector> {
    let norm_sq = v.dot(&v);
    if norm_sq.sqrt() < 1e-12 {
        return Err(PourError::ZeroDirection);
    }
    let d = v.len();
    let mut matrix = Array2::eye(d);
    for i in 0..d {
        for j in 0..d {
            matrix[[i, j]] -= v[i] * v[j] / norm_sq;
        }
    }
    let unit = v.to_owned() / norm_sq.sqrt();
    Ok(Projector {
        matrix,
        removed_direction: unit,
        direction: v.to_owned(),
        norm_sq,
    })
}

/// Project out one vertex of a frame and renormalize the rest, giving the
/// `C-1` simplex ETF in the orthogonal complement.
///
/// Before normalization every retained image has the same norm,
/// `||P v_i|| = sqrt(C(C-2))/(C-1)`, so the common rescaling preserves the
/// zero sum.
pub fn project_frame(frame: &EtfFrame, forget_index: usize) -> Result<EtfFrame> {
    let c = frame.class_count();
    if forget_index >= c {
        return Err(PourError::ClassOutOfRange {
            index: forget_index,
            count: c,
        });
    }
    if c == 2 {
        return Err(PourError::DegenerateFrame);
    }
    let projector = projector_from_direction(frame.direction(forget_index))?;
    let mut retained = Vec::with_capacity(c - 1);
    for i in 0..c {
        if i == forget_index {
            continue;
        }
        let u = projector.apply(frame.direction(i));
        let norm = u.dot(&u).sqrt();
        retained.push(u / norm);
    }
    EtfFrame::from_directions(retained)
}

/// Max absolute elementwise deviation of the frame's Gram matrix from the
/// ideal simplex-ETF Gram (1 on the diagonal, -1/(C-1) off it).
pub fn gram_residual(frame: &EtfFrame) -> f64 {
    let c = frame.class_count();
    let off = -1.0 / (c as f64 - 1.0);
    let mut worst = 0.0f64;
    for i in 0..c {
        for j in 0..c {
            let dot = frame.direction(i).dot(&frame.direction(j));
            let ideal = if i == j { 1.0 } else { off };
            worst = worst.max((dot - ideal).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn frame_invariants(frame: &EtfFrame, tol: f64) {
        let c = frame.class_count();
        for i in 0..c {
            let norm = frame.direction(i).dot(&frame.direction(i)).sqrt();
            assert!((norm - 1.0).abs() < tol, "norm {norm}");
            for j in 0..c {
                if i != j {
                    let dot = frame.direction(i).dot(&frame.direction(j));
                    assert!(
                        (dot + 1.0 / (c as f64 - 1.0)).abs() < tol,
                        "dot {dot} for C={c}"
                    );
                }
            }
        }
        let mut sum = Array1::<f64>::zeros(frame.ambient_dim());
        for v in frame.directions() {
            sum += v;
        }
        assert!(sum.iter().all(|x| x.abs() < 1e-9), "sum {sum}");
    }

    #[test]
    fn tetrahedron_in_three_dims() {
        let frame = make_etf(4, 3, 0).unwrap();
        frame_invariants(&frame, 1e-10);
        // pairwise angle arccos(-1/3)
        let dot = frame.direction(0).dot(&frame.direction(1));
        assert!((dot + 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn antipodal_pair() {
        let frame = make_etf(2, 1, 0).unwrap();
        assert_eq!(frame.direction(0)[0], 1.0);
        assert_eq!(frame.direction(1)[0], -1.0);
        let dot = frame.direction(0).dot(&frame.direction(1));
        assert!((dot + 1.0).abs() < 1e-12);
    }

    #[test]
    fn embedded_gram_matches_ideal() {
        // brute-force Gram evaluation for C=10 embedded in d=64
        let frame = make_etf(10, 64, 7).unwrap();
        let c = 10.0f64;
        for i in 0..10 {
            for j in 0..10 {
                let got = frame.direction(i).dot(&frame.direction(j));
                let ideal = if i == j {
                    c / (c - 1.0) - 1.0 / (c - 1.0)
                } else {
                    -1.0 / (c - 1.0)
                };
                assert!((got - ideal).abs() < 1e-10, "({i},{j}): {got} vs {ideal}");
            }
        }
        frame_invariants(&frame, 1e-10);
    }

    #[test]
    fn make_etf_deterministic_per_seed() {
        let a = make_etf(6, 20, 42).unwrap();
        let b = make_etf(6, 20, 42).unwrap();
        let c = make_etf(6, 20, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dimension_too_small_rejected() {
        assert!(matches!(
            make_etf(5, 3, 0),
            Err(PourError::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn projector_axis_aligned() {
        let p = projector_from_direction(array![1.0, 0.0].view()).unwrap();
        assert_eq!(p.matrix(), &array![[0.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn projector_hand_expansion() {
        let s = 1.0 / 2.0f64.sqrt();
        let p = projector_from_direction(array![s, s].view()).unwrap();
        let expect = array![[0.5, -0.5], [-0.5, 0.5]];
        for (a, b) in p.matrix().iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn projector_annihilates_direction() {
        let v = array![0.3, -1.2, 2.5];
        let p = projector_from_direction(v.view()).unwrap();
        let out = p.apply(v.view());
        assert!(out.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn projector_rejects_zero_vector() {
        let v = array![0.0, 1e-13];
        assert!(matches!(
            projector_from_direction(v.view()),
            Err(PourError::ZeroDirection)
        ));
    }

    #[test]
    fn projector_invariants() {
        let v = array![1.0, 2.0, 3.0, 4.0];
        let p = projector_from_direction(v.view()).unwrap();
        let m = p.matrix();
        // symmetry and idempotence
        let m2 = m.dot(m);
        for i in 0..4 {
            for j in 0..4 {
                assert!((m[[i, j]] - m[[j, i]]).abs() < 1e-10);
                assert!((m2[[i, j]] - m[[i, j]]).abs() < 1e-10);
            }
        }
        let trace: f64 = (0..4).map(|i| m[[i, i]]).sum();
        assert!((trace - 3.0).abs() < 1e-9);
    }

    #[test]
    fn project_tetrahedron_gives_triangle() {
        let frame = make_etf(4, 3, 0).unwrap();
        let tri = project_frame(&frame, 0).unwrap();
        assert_eq!(tri.class_count(), 3);
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    let dot = tri.direction(i).dot(&tri.direction(j));
                    assert!((dot + 0.5).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn projected_norm_law_c4() {
        let frame = make_etf(4, 3, 0).unwrap();
        let p = projector_from_direction(frame.direction(0)).unwrap();
        let expected = 8.0f64.sqrt() / 3.0; // sqrt(C(C-2))/(C-1) for C=4
        for i in 1..4 {
            let u = p.apply(frame.direction(i));
            let norm = u.dot(&u).sqrt();
            assert!((norm - expected).abs() < 1e-10, "norm {norm}");
        }
    }

    #[test]
    fn project_triangle_gives_antipodal_pair() {
        // brute-force check against direct projection
        let frame = make_etf(3, 2, 0).unwrap();
        let pair = project_frame(&frame, 2).unwrap();
        assert_eq!(pair.class_count(), 2);
        let dot = pair.direction(0).dot(&pair.direction(1));
        assert!((dot + 1.0).abs() < 1e-10);
        frame_invariants(&pair, 1e-9);
    }

    #[test]
    fn project_two_class_frame_is_degenerate() {
        let frame = make_etf(2, 1, 0).unwrap();
        assert!(matches!(
            project_frame(&frame, 0),
            Err(PourError::DegenerateFrame)
        ));
    }

    #[test]
    fn gram_residual_zero_on_exact_etf() {
        let frame = make_etf(5, 8, 3).unwrap();
        assert!(gram_residual(&frame) < 1e-12);
    }

    #[test]
    fn gram_residual_positive_after_perturbation() {
        let frame = make_etf(4, 3, 0).unwrap();
        let mut dirs = frame.directions().to_vec();
        dirs[0][0] += 0.1;
        let norm = dirs[0].dot(&dirs[0]).sqrt();
        dirs[0] /= norm;
        let perturbed = EtfFrame::from_directions(dirs).unwrap();
        assert!(gram_residual(&perturbed) > 1e-3);
    }

    #[test]
    fn gram_residual_random_vectors_matches_brute_force() {
        use rand::SeedableRng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let dirs: Vec<Array1<f64>> = (0..5)
            .map(|_| {
                let v: Array1<f64> =
                    Array1::from_iter((0..4).map(|_| StandardNormal.sample(&mut rng)));
                let n = v.dot(&v).sqrt();
                v / n
            })
            .collect();
        let frame = EtfFrame::from_directions(dirs.clone()).unwrap();
        // direct Gram evaluation
        let mut expected = 0.0f64;
        for i in 0..5 {
            for j in 0..5 {
                let ideal = if i == j { 1.0 } else { -0.25 };
                expected = expected.max((dirs[i].dot(&dirs[j]) - ideal).abs());
            }
        }
        assert!((gram_residual(&frame) - expected).abs() < 1e-15);
        assert!(expected > 0.0);
    }

    proptest! {
        #[test]
        fn closure_under_projection(c in 3usize..12, seed in 0u64..4, forget in 0usize..12) {
            let forget = forget % c;
            for d in [c - 1, c + 5, 4 * c] {
                let frame = make_etf(c, d, seed).unwrap();
                let projected = project_frame(&frame, forget).unwrap();
                prop_assert!(gram_residual(&projected) < 1e-9);
            }
        }

        #[test]
        fn norm_law_holds(c in 3usize..12, seed in 0u64..4) {
            let frame = make_etf(c, c + 3, seed).unwrap();
            let p = projector_from_direction(frame.direction(0)).unwrap();
            let cf = c as f64;
            let expected_sq = cf * (cf - 2.0) / ((cf - 1.0) * (cf - 1.0));
            for i in 1..c {
                let u = p.apply(frame.direction(i));
                prop_assert!((u.dot(&u) - expected_sq).abs() < 1e-10);
            }
        }
    }
}
