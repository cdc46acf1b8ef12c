//! Hypercube coordinates to density matrices.
//!
//! A point is split into a spectrum block followed by an angle block. The
//! spectrum block is mapped onto the probability simplex by Beta stick-breaking,
//! which pushes the uniform measure forward to the uniform measure on the
//! simplex. For rank-deficient (boundary) states the last eigenvalue is pinned
//! to zero and one fewer coordinate is consumed.
//!
//! The angle block builds the eigenvector frame as a chain of two-level complex
//! rotations. Each mixing angle is drawn through the inverse CDF of its Haar
//! marginal, so the unitary part needs no Jacobian weight: uniform points give
//! Haar-distributed frames modulo diagonal phases.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, hermitian_eigenvalues, trace, CMatrix};
use crate::qmc_sequence::Point;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPoint {
    pub lambdas: Vec<f64>,
    pub rank_deficient: bool,
}

impl SpectrumPoint {
    pub fn new(lambdas: Vec<f64>, rank_deficient: bool) -> Result<Self> {
        let sum: f64 = lambdas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("eigenvalues sum to {sum}, not 1")));
        }
        if lambdas.iter().any(|&l| l < 0.0) {
            return Err(Error::Domain("negative eigenvalue".into()));
        }
        if rank_deficient && lambdas.last() != Some(&0.0) {
            return Err(Error::Domain("rank-deficient spectrum must end in 0".into()));
        }
        Ok(SpectrumPoint { lambdas, rank_deficient })
    }

    pub fn dim(&self) -> usize {
        self.lambdas.len()
    }

    pub fn min(&self) -> f64 {
        self.lambdas.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Clone, Debug)]
pub struct UnitaryMatrix {
    pub entries: CMatrix,
    /// `(mixing angle, phase)` per elementary rotation, in application order.
    pub origin_angles: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    entries: CMatrix,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity before accepting `m`.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Domain("density matrix must be square".into()));
        }
        if hermiticity_defect(&m) > 1e-12 {
            return Err(Error::Domain("matrix is not Hermitian".into()));
        }
        let tr = trace(&m);
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::Domain(format!("trace {tr} is not 1")));
        }
        if hermitian_eigenvalues(&m)[0] < -1e-10 {
            return Err(Error::Domain("matrix is not positive semidefinite".into()));
        }
        Ok(DensityMatrix { entries: m })
    }

    /// For matrices that are density matrices by construction.
    pub fn new_unchecked(m: CMatrix) -> Self {
        DensityMatrix { entries: m }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        DensityMatrix {
            entries: CMatrix::identity(d, d).map(|z| z / d as f64),
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_matrix(self) -> CMatrix {
        self.entries
    }
}

impl AsRef<CMatrix> for DensityMatrix {
    fn as_ref(&self) -> &CMatrix {
        &self.entries
    }
}

/// Number of spectrum coordinates for a `d`-dimensional state.
pub fn spectrum_coords(d: usize, rank_deficient: bool) -> usize {
    if rank_deficient {
        d.saturating_sub(2)
    } else {
        d.saturating_sub(1)
    }
}

/// Number of angle coordinates: `d^2 - d`.
pub fn angle_coords(d: usize) -> usize {
    d * d - d
}

/// Total hypercube dimension: `d^2 - 1` (full rank) or `d^2 - 2` (boundary).
pub fn cube_dimension(d: usize, rank_deficient: bool) -> usize {
    spectrum_coords(d, rank_deficient) + angle_coords(d)
}

fn check_unit(u: &[f64]) -> Result<()> {
    match u.iter().find(|x| !(0.0..1.0).contains(*x)) {
        Some(x) => Err(Error::Domain(format!("coordinate {x} outside [0, 1)"))),
        None => Ok(()),
    }
}

/// Uniform map from `[0,1)^(d-1)` (or `^(d-2)` with `rank_deficient`) onto the
/// simplex. Eigenvalues come out in construction order.
pub fn simplex_from_cube(u: &[f64], rank_deficient: bool) -> Result<SpectrumPoint> {
    check_unit(u)?;
    let free = u.len() + 1;
    let d = if rank_deficient { free + 1 } else { free };
    if rank_deficient && d < 2 {
        return Err(Error::Domain("boundary states need d >= 2".into()));
    }
    let mut lambdas = Vec::with_capacity(d);
    let mut remaining = 1.0;
    for (i, &ui) in u.iter().enumerate() {
        // Beta(1, k) inverse CDF, k = components still to place after this one
        let k = (free - 1 - i) as f64;
        let share = 1.0 - ui.powf(1.0 / k);
        let l = remaining * share;
        lambdas.push(l);
        remaining -= l;
    }
    lambdas.push(remaining.max(0.0));
    if rank_deficient {
        lambdas.push(0.0);
    }
    Ok(SpectrumPoint { lambdas, rank_deficient })
}

/// Haar-distributed eigenvector frame from `d^2 - d` coordinates.
///
/// `U = R_0 R_1 ... R_{d-2}` with `R_k = G_{d-2,d-1} ... G_{k,k+1}`; `R_k e_k`
/// is a uniform unit vector on the span of `e_k .. e_{d-1}`. The rotation on
/// the plane `(j, j+1)` has `sin^2 = a^(1 / (d-1-j))` and phase `2 pi b`.
pub fn unitary_from_cube(v: &[f64], d: usize) -> Result<UnitaryMatrix> {
    if v.len() != angle_coords(d) {
        return Err(Error::DimensionMismatch {
            expected: angle_coords(d),
            got: v.len(),
        });
    }
    check_unit(v)?;
    let mut u = CMatrix::identity(d, d);
    let mut angles = Vec::with_capacity(v.len() / 2);
    let mut pairs = v.chunks_exact(2);
    for k in 0..d.saturating_sub(1) {
        for j in (k..d - 1).rev() {
            let pair = pairs.next().expect("coordinate count checked");
            let sin2 = pair[0].powf(1.0 / (d - 1 - j) as f64);
            let theta = sin2.sqrt().asin();
            let phi = 2.0 * PI * pair[1];
            apply_rotation(&mut u, j, sin2, phi);
            angles.push((theta, phi));
        }
    }
    Ok(UnitaryMatrix {
        entries: u,
        origin_angles: angles,
    })
}

/// `U <- U G` for the rotation mixing columns `p` and `p + 1`.
fn apply_rotation(u: &mut CMatrix, p: usize, sin2: f64, phi: f64) {
    if sin2 == 0.0 {
        return;
    }
    let s = sin2.sqrt();
    let c = (1.0 - sin2).max(0.0).sqrt();
    let e = Complex64::from_polar(s, phi);
    let e_conj = e.conj();
    for r in 0..u.nrows() {
        let up = u[(r, p)];
        let uq = u[(r, p + 1)];
        u[(r, p)] = up * c + uq * e;
        u[(r, p + 1)] = uq * c - up * e_conj;
    }
}

/// `U diag(lambda) U^dagger`, made exactly Hermitian.
pub fn assemble_state(spec: &SpectrumPoint, u: &UnitaryMatrix) -> Result<DensityMatrix> {
    let d = spec.dim();
    if u.entries.nrows() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: u.entries.nrows(),
        });
    }
    let m = &u.entries;
    let mut rho = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in a..d {
            let mut z = Complex64::new(0.0, 0.0);
            for (k, &l) in spec.lambdas.iter().enumerate() {
                z += m[(a, k)] * m[(b, k)].conj() * l;
            }
            if a == b {
                rho[(a, a)] = Complex64::new(z.re, 0.0);
            } else {
                rho[(a, b)] = z;
                rho[(b, a)] = z.conj();
            }
        }
    }
    Ok(DensityMatrix::new_unchecked(rho))
}

/// Full pipeline for one hypercube point: spectrum block first, then angles.
pub fn cube_to_state(
    point: &Point,
    d: usize,
    rank_deficient: bool,
) -> Result<(DensityMatrix, SpectrumPoint)> {
    coords_to_state(&point.coords, d, rank_deficient)
}

pub fn coords_to_state(
    coords: &[f64],
    d: usize,
    rank_deficient: bool,
) -> Result<(DensityMatrix, SpectrumPoint)> {
    let expected = cube_dimension(d, rank_deficient);
    if coords.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: coords.len(),
        });
    }
    let split = spectrum_coords(d, rank_deficient);
    let spec = simplex_from_cube(&coords[..split], rank_deficient)?;
    let u = unitary_from_cube(&coords[split..], d)?;
    let rho = assemble_state(&spec, &u)?;
    Ok((rho, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmc_sequence::{prng_stream, stream, SequenceConfig};

    fn unitarity_defect(u: &CMatrix) -> f64 {
        let d = u.nrows();
        let prod = u * u.adjoint() - CMatrix::identity(d, d);
        // spectral norm of a Hermitian matrix = largest |eigenvalue|
        hermitian_eigenvalues(&prod)
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn simplex_examples() {
        let s = simplex_from_cube(&[0.0], false).unwrap();
        assert_eq!(s.lambdas, vec![1.0, 0.0]);
        let s = simplex_from_cube(&[0.25], false).unwrap();
        assert_eq!(s.lambdas, vec![0.75, 0.25]);
        let s = simplex_from_cube(&[0.3, 0.6], true).unwrap();
        assert_eq!(s.lambdas.len(), 4);
        assert_eq!(*s.lambdas.last().unwrap(), 0.0);
        assert!((s.lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(simplex_from_cube(&[1.0], false).is_err());
        assert!(simplex_from_cube(&[-0.1, 0.2], false).is_err());
    }

    #[test]
    fn simplex_is_uniform_for_d3() {
        let pts = stream(&SequenceConfig::new(2), 1, 1_000_000).unwrap();
        let (mut m1, mut m11) = (0.0, 0.0);
        for p in &pts {
            let s = simplex_from_cube(&p.coords, false).unwrap();
            m1 += s.lambdas[0];
            m11 += s.lambdas[0] * s.lambdas[2];
        }
        let n = pts.len() as f64;
        // Dirichlet(1,1,1): E[l1] = 1/3, E[l1 l3] = 1/12
        assert!((m1 / n - 1.0 / 3.0).abs() < 0.01);
        assert!((m11 / n - 1.0 / 12.0).abs() < 0.005);
    }

    #[test]
    fn zero_angles_give_identity() {
        for d in 1..6 {
            let u = unitary_from_cube(&vec![0.0; angle_coords(d)], d).unwrap();
            assert_eq!(u.entries, CMatrix::identity(d, d));
        }
    }

    #[test]
    fn unitaries_are_unitary() {
        for d in [2usize, 3, 4, 6, 9] {
            for p in prng_stream(d as u64, angle_coords(d), 50) {
                let u = unitary_from_cube(&p.coords, d).unwrap();
                assert!(unitarity_defect(&u.entries) < 1e-10);
                assert!((u.entries.determinant().norm() - 1.0).abs() < 1e-10);
                assert_eq!(u.origin_angles.len(), d * (d - 1) / 2);
            }
        }
    }

    /// Kolmogorov-Smirnov distance of samples against Uniform(0,1).
    fn ks_uniform(mut xs: Vec<f64>) -> f64 {
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max)
    }

    #[test]
    fn haar_marginal_d2() {
        let pts = stream(&SequenceConfig::new(2), 0, 100_000).unwrap();
        let xs = pts
            .iter()
            .map(|p| unitary_from_cube(&p.coords, 2).unwrap().entries[(0, 0)].norm_sqr())
            .collect();
        assert!(ks_uniform(xs) < 0.01);
    }

    #[test]
    fn haar_fourth_moments_d3() {
        // For Haar U(d), every |U_ij|^2 ~ Beta(1, d-1): mean 1/d, E|U_ij|^4 = 2/(d(d+1)).
        let d = 3;
        let pts = prng_stream(4, angle_coords(d), 200_000);
        let mut m2 = [[0.0; 3]; 3];
        let mut m4 = [[0.0; 3]; 3];
        for p in &pts {
            let u = unitary_from_cube(&p.coords, d).unwrap().entries;
            for i in 0..d {
                for j in 0..d {
                    let a = u[(i, j)].norm_sqr();
                    m2[i][j] += a;
                    m4[i][j] += a * a;
                }
            }
        }
        let n = pts.len() as f64;
        for i in 0..d {
            for j in 0..d {
                assert!((m2[i][j] / n - 1.0 / 3.0).abs() < 0.005, "m2 {i}{j}");
                assert!((m4[i][j] / n - 1.0 / 6.0).abs() < 0.005, "m4 {i}{j}");
            }
        }
    }

    #[test]
    fn haar_cross_moment_d3() {
        // E[|U_11|^2 |U_22|^2] = 1/(d^2-1) for Haar, d >= 2
        let d = 3;
        let pts = prng_stream(8, angle_coords(d), 200_000);
        let mut acc = 0.0;
        for p in &pts {
            let u = unitary_from_cube(&p.coords, d).unwrap().entries;
            acc += u[(0, 0)].norm_sqr() * u[(1, 1)].norm_sqr();
        }
        assert!((acc / pts.len() as f64 - 1.0 / 8.0).abs() < 0.003);
    }

    #[test]
    fn assemble_examples() {
        let u = unitary_from_cube(&[0.3, 0.8, 0.1, 0.5, 0.9, 0.2], 3).unwrap();
        let spec = SpectrumPoint::new(vec![1.0 / 3.0; 3], false).unwrap();
        let rho = assemble_state(&spec, &u).unwrap();
        let mixed = DensityMatrix::maximally_mixed(3);
        assert!((rho.matrix() - mixed.matrix()).iter().all(|z| z.norm() < 1e-15));

        let id = unitary_from_cube(&[0.0, 0.0], 2).unwrap();
        let spec = SpectrumPoint::new(vec![0.75, 0.25], false).unwrap();
        let rho = assemble_state(&spec, &id).unwrap();
        assert_eq!(rho.matrix()[(0, 0)].re, 0.75);
        assert_eq!(rho.matrix()[(1, 1)].re, 0.25);
        assert_eq!(rho.matrix()[(0, 1)].norm(), 0.0);

        let spec3 = SpectrumPoint::new(vec![0.5, 0.5], false).unwrap();
        assert!(assemble_state(&spec3, &u).is_err());
    }

    #[test]
    fn cube_dimensions_of_large_setups() {
        assert_eq!(cube_dimension(2, false), 3);
        assert_eq!(cube_dimension(4, false), 15);
        assert_eq!(cube_dimension(4, true), 14);
        assert_eq!(cube_dimension(6, false), 35);
        assert_eq!(cube_dimension(6, true), 34);
        assert_eq!(cube_dimension(9, false), 80);
        assert_eq!(cube_dimension(9, true), 79);
        assert!(coords_to_state(&[0.1; 14], 4, false).is_err());
        assert!(coords_to_state(&[0.1; 14], 4, true).is_ok());
    }

    #[test]
    fn round_trip_spectrum_and_invariants() {
        for (d, rd) in [(4usize, false), (4, true), (6, false), (6, true), (9, false), (9, true)] {
            for p in prng_stream(d as u64 + rd as u64, cube_dimension(d, rd), 20) {
                let (rho, spec) = cube_to_state(&p, d, rd).unwrap();
                assert!((spec.lambdas.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                let m = rho.matrix();
                assert!(hermiticity_defect(m) < 1e-12);
                assert!((trace(m).re - 1.0).abs() < 1e-12);
                let ev = hermitian_eigenvalues(m);
                let mut expect = spec.lambdas.clone();
                expect.sort_by(f64::total_cmp);
                for (a, b) in ev.iter().zip(&expect) {
                    assert!((a - b).abs() < 1e-10);
                }
                if rd {
                    assert!(ev[0].abs() < 1e-10);
                }
                DensityMatrix::new(m.clone()).unwrap();
            }
        }
    }

    #[test]
    fn permuting_eigenvalues_keeps_spectrum() {
        let p = prng_stream(3, angle_coords(4), 1).remove(0);
        let u = unitary_from_cube(&p.coords, 4).unwrap();
        let a = SpectrumPoint::new(vec![0.1, 0.2, 0.3, 0.4], false).unwrap();
        let b = SpectrumPoint::new(vec![0.3, 0.1, 0.4, 0.2], false).unwrap();
        let ea = hermitian_eigenvalues(assemble_state(&a, &u).unwrap().matrix());
        let eb = hermitian_eigenvalues(assemble_state(&b, &u).unwrap().matrix());
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
