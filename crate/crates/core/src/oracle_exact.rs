//! Independent checks: a Ginibre sampler for the Hilbert-Schmidt ensemble,
//! closed-form HS volumes and hyperareas, and an index-level reference
//! partial transpose.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::criteria::{is_ppt, Convention, Split, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{trace, CMatrix};
use crate::state_param::DensityMatrix;

/// Total hyperarea over total volume of the HS state space, `sqrt(d(d-1)) (d^2-1)`.
pub fn exact_area_to_volume_ratio(d: usize) -> f64 {
    let d = d as f64;
    (d * (d - 1.0)).sqrt() * (d * d - 1.0)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// `ln Gamma(n)` for positive integers.
fn ln_gamma_int(n: usize) -> f64 {
    ln_factorial(n - 1)
}

/// HS volume of the `d x d` states (Zyczkowski-Sommers closed form).
pub fn exact_hs_volume(d: usize) -> f64 {
    let ln = 0.5 * (d as f64).ln()
        + (d * (d - 1)) as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln()
        + (1..=d).map(ln_gamma_int).sum::<f64>()
        - ln_gamma_int(d * d);
    ln.exp()
}

/// HS hyperarea of the rank-`(d-1)` boundary (Zyczkowski-Sommers closed form).
pub fn exact_hs_hyperarea(d: usize) -> f64 {
    let ln = 0.5 * ((d - 1) as f64).ln()
        + (d * (d - 1)) as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln()
        + (1..=d + 1).map(ln_gamma_int).sum::<f64>()
        - ln_gamma_int(d)
        - ln_gamma_int(d * d - 1);
    ln.exp()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactReference {
    pub d: usize,
    pub area_to_volume_ratio: f64,
    pub hs_volume: Option<f64>,
    pub hs_hyperarea: Option<f64>,
}

impl ExactReference {
    pub fn new(d: usize) -> Self {
        ExactReference {
            d,
            area_to_volume_ratio: exact_area_to_volume_ratio(d),
            hs_volume: Some(exact_hs_volume(d)),
            hs_hyperarea: Some(exact_hs_hyperarea(d)),
        }
    }
}

/// Volume of the flag manifold `U(d)/U(1)^d` in the normalization where the HS
/// volume element is `sqrt(d) |Vandermonde|^2 dlambda dF / d!`.
fn ln_flag_volume(d: usize) -> f64 {
    (d * (d - 1)) as f64 / 2.0 * (2.0 * std::f64::consts::PI).ln()
        - (1..d).map(ln_factorial).sum::<f64>()
}

/// Absolute HS volume from the mean full-rank HS weight over the unit cube.
///
/// The stick-breaking map is uniform onto a simplex of Lebesgue volume
/// `1/(d-1)!`; unsorted spectra cover each state `d!` times.
pub fn hs_volume_from_mean_weight(d: usize, mean_weight: f64) -> f64 {
    let ln = 0.5 * (d as f64).ln() + ln_flag_volume(d) - ln_factorial(d - 1) - ln_factorial(d);
    mean_weight * ln.exp()
}

/// Absolute HS hyperarea from the mean boundary HS weight over the unit cube.
/// The pinned zero eigenvalue leaves `(d-1)!` orderings.
pub fn hs_hyperarea_from_mean_weight(d: usize, mean_weight: f64) -> f64 {
    let ln = 0.5 * ((d - 1) as f64).ln() + ln_flag_volume(d)
        - ln_factorial(d.saturating_sub(2))
        - ln_factorial(d - 1);
    mean_weight * ln.exp()
}

/// Mean HS weights of a paired run, as needed for the area/volume check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaVolumeInput {
    pub d: usize,
    pub mean_weight_full: f64,
    pub mean_weight_boundary: f64,
    /// Set only when the run kept unnormalized HS weights with no clipping
    /// or reweighting, so that absolute constants apply.
    pub absolute_jacobian: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AreaVolumeCheck {
    pub d: usize,
    pub volume: f64,
    pub hyperarea: f64,
    pub ratio: f64,
    pub exact_ratio: f64,
    pub relative_error: f64,
}

pub fn area_to_volume_check(input: &AreaVolumeInput) -> Result<AreaVolumeCheck> {
    if !input.absolute_jacobian {
        return Err(Error::NotApplicable(
            "run was made without absolute-Jacobian mode".into(),
        ));
    }
    if input.d < 2 {
        return Err(Error::Domain("area/volume needs d >= 2".into()));
    }
    let volume = hs_volume_from_mean_weight(input.d, input.mean_weight_full);
    let hyperarea = hs_hyperarea_from_mean_weight(input.d, input.mean_weight_boundary);
    let ratio = hyperarea / volume;
    let exact_ratio = exact_area_to_volume_ratio(input.d);
    Ok(AreaVolumeCheck {
        d: input.d,
        volume,
        hyperarea,
        ratio,
        exact_ratio,
        relative_error: (ratio / exact_ratio - 1.0).abs(),
    })
}

/// Relative error of the numeric hyperarea-to-volume ratio.
pub fn qmc_area_to_volume_check(input: &AreaVolumeInput) -> Result<f64> {
    area_to_volume_check(input).map(|c| c.relative_error)
}

/// Deterministic Ginibre draws: draw `i` uses ChaCha stream `i`.
#[derive(Clone, Copy, Debug)]
pub struct GinibreSampler {
    seed: u64,
}

impl GinibreSampler {
    pub fn new(seed: u64) -> Self {
        GinibreSampler { seed }
    }

    fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// A `rows x cols` matrix of independent standard complex Gaussians.
    pub fn gaussian(&self, index: u64, rows: usize, cols: usize) -> CMatrix {
        let mut rng = self.rng(index);
        CMatrix::from_fn(rows, cols, |_, _| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im)
        })
    }

    /// `G G^dagger / tr(G G^dagger)` with `G` of size `d x k`.
    pub fn state(&self, index: u64, d: usize, k: usize) -> DensityMatrix {
        ginibre_state(&self.gaussian(index, d, k))
    }
}

pub fn ginibre_state(g: &CMatrix) -> DensityMatrix {
    let mut w = g * g.adjoint();
    let t = trace(&w).re;
    w /= Complex64::new(t, 0.0);
    // exact Hermitian symmetry
    let d = w.nrows();
    for i in 0..d {
        w[(i, i)].im = 0.0;
        for j in (i + 1)..d {
            w[(j, i)] = w[(i, j)].conj();
        }
    }
    DensityMatrix::new_unchecked(w)
}

/// Haar unitary via QR of a Ginibre matrix with the phase of `R`'s diagonal removed.
pub fn haar_unitary(sampler: &GinibreSampler, index: u64, d: usize) -> CMatrix {
    let qr = sampler.gaussian(index, d, d).qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let z = r[(j, j)];
        let phase = if z.norm() > 0.0 { z / z.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    pub n: u64,
}

/// Plain Monte Carlo PPT probability of rank-`rank` Ginibre states on `d_a (x) d_b`.
pub fn mc_ppt_probability(d_a: usize, d_b: usize, rank: usize, n: u64, seed: u64) -> Result<McEstimate> {
    mc_ppt_probability_with(d_a, d_b, rank, n, seed, Convention::InnerBlocks, DEFAULT_TOLERANCE)
}

pub fn mc_ppt_probability_with(
    d_a: usize,
    d_b: usize,
    rank: usize,
    n: u64,
    seed: u64,
    convention: Convention,
    tol: f64,
) -> Result<McEstimate> {
    let d = d_a * d_b;
    if rank == 0 || rank > d {
        return Err(Error::Domain(format!("rank {rank} outside 1..={d}")));
    }
    if n == 0 {
        return Err(Error::Domain("need at least one draw".into()));
    }
    let sampler = GinibreSampler::new(seed);
    let split = Split::new(d_a, d_b, convention);
    let mut pass = 0u64;
    for i in 0..n {
        let rho = sampler.state(i, d, rank);
        if is_ppt(rho.matrix(), split, tol)?.0 {
            pass += 1;
        }
    }
    Ok(binomial_estimate(pass, n))
}

pub fn binomial_estimate(pass: u64, n: u64) -> McEstimate {
    let p = pass as f64 / n as f64;
    McEstimate {
        estimate: p,
        standard_error: (p * (1.0 - p) / n as f64).sqrt(),
        n,
    }
}

/// Two-qubit Werner state `p |psi-><psi-| + (1-p) I/4`.
pub fn werner_state(p: f64) -> CMatrix {
    let mut m = CMatrix::identity(4, 4).map(|z| z * ((1.0 - p) / 4.0));
    let h = Complex64::new(p / 2.0, 0.0);
    m[(1, 1)] += h;
    m[(2, 2)] += h;
    m[(1, 2)] -= h;
    m[(2, 1)] -= h;
    m
}

/// `|Phi+><Phi+|` on two qubits.
pub fn bell_state() -> CMatrix {
    let mut m = CMatrix::zeros(4, 4);
    for (i, j) in [(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[(i, j)] = Complex64::new(0.5, 0.0);
    }
    m
}

/// PPT fraction of Werner states with `p` uniform on `[0, 1]`.
pub fn werner_ppt_probability(n: u64, seed: u64) -> Result<McEstimate> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let split = Split::new(2, 2, Convention::InnerBlocks);
    let mut pass = 0;
    for _ in 0..n {
        let p: f64 = rng.gen();
        if is_ppt(&werner_state(p), split, DEFAULT_TOLERANCE)?.0 {
            pass += 1;
        }
    }
    Ok(binomial_estimate(pass, n))
}

/// Partial transpose written directly from tensor indices,
/// `<a b| rho^T_B |c e> = <a e| rho |c b>`, with no block bookkeeping.
pub fn reference_partial_transpose(rho: &CMatrix, split: Split) -> CMatrix {
    let (n, m) = match split.convention {
        Convention::InnerBlocks => (split.d_a, split.d_b),
        Convention::OuterBlocks => (split.d_b, split.d_a),
    };
    let d = n * m;
    let mut out = CMatrix::zeros(d, d);
    for a in 0..n {
        for b in 0..m {
            for c in 0..n {
                for e in 0..m {
                    out[(a * m + b, c * m + e)] = rho[(a * m + e, c * m + b)];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::hermitian_eigenvalues;

    #[test]
    fn ratio_examples() {
        assert!((exact_area_to_volume_ratio(4) - 15.0 * 12f64.sqrt()).abs() < 1e-12);
        assert!((exact_area_to_volume_ratio(4) - 51.9615).abs() < 1e-4);
        assert!((exact_area_to_volume_ratio(2) - 4.2426).abs() < 1e-4);
        assert!((exact_area_to_volume_ratio(6) - 191.703).abs() < 1e-3);
    }

    #[test]
    fn closed_forms_agree_with_ratio() {
        for d in 2..=9 {
            let r = exact_hs_hyperarea(d) / exact_hs_volume(d);
            assert!((r / exact_area_to_volume_ratio(d) - 1.0).abs() < 1e-12);
        }
        // Bloch ball: radius 1/sqrt 2 in HS distance
        let r = 0.5f64.sqrt();
        assert!((exact_hs_volume(2) - 4.0 / 3.0 * std::f64::consts::PI * r.powi(3)).abs() < 1e-12);
        assert!((exact_hs_hyperarea(2) - 4.0 * std::f64::consts::PI * r * r).abs() < 1e-12);
    }

    /// Selberg integral of |Vandermonde|^2 prod l^(a-1) over the unsorted
    /// (n-1)-simplex, with Lebesgue measure on the first n-1 coordinates.
    fn selberg_simplex(n: usize, a: usize) -> f64 {
        let mut ln = 0.0;
        for j in 0..n {
            ln += ln_gamma_int(a + j) + ln_gamma_int(j + 2);
        }
        ln -= ln_gamma_int(n * (n - 1) + n * a);
        ln.exp()
    }

    #[test]
    fn absolute_constants_reproduce_closed_forms() {
        for d in 2..=6 {
            // mean weight over the cube = integral * (d-1)! (simplex volume 1/(d-1)!)
            let mean_full = selberg_simplex(d, 1) * (1..d).product::<usize>() as f64;
            let v = hs_volume_from_mean_weight(d, mean_full);
            assert!((v / exact_hs_volume(d) - 1.0).abs() < 1e-10, "d={d}");
            let mean_b = selberg_simplex(d - 1, 3) * (1..d - 1).product::<usize>().max(1) as f64;
            let a = hs_hyperarea_from_mean_weight(d, mean_b);
            assert!((a / exact_hs_hyperarea(d) - 1.0).abs() < 1e-10, "d={d}");
        }
    }

    #[test]
    fn check_requires_absolute_mode() {
        let input = AreaVolumeInput { d: 2, mean_weight_full: 1.0 / 3.0, mean_weight_boundary: 1.0, absolute_jacobian: false };
        assert!(matches!(qmc_area_to_volume_check(&input), Err(Error::NotApplicable(_))));
        let exact = AreaVolumeInput { absolute_jacobian: true, ..input };
        assert!(qmc_area_to_volume_check(&exact).unwrap() < 1e-12);
    }

    #[test]
    fn rank_one_draws_are_pure() {
        let s = GinibreSampler::new(3);
        for i in 0..10 {
            let rho = s.state(i, 4, 1).into_matrix();
            assert!(((&rho * &rho) - &rho).iter().all(|z| z.norm() < 1e-12));
            assert!((trace(&rho).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ginibre_mean_is_maximally_mixed() {
        let s = GinibreSampler::new(4);
        let n = 100_000;
        let mut mean = CMatrix::zeros(2, 2);
        for i in 0..n {
            mean += s.state(i, 2, 2).matrix();
        }
        mean /= Complex64::new(n as f64, 0.0);
        let half = CMatrix::identity(2, 2).map(|z| z * 0.5);
        assert!((mean - half).iter().all(|z| z.norm() < 0.01));
    }

    #[test]
    fn ginibre_eigenvalue_histogram_matches_hs_density() {
        // For d = k = 2 the larger eigenvalue x in [1/2, 1] has density
        // proportional to (2x - 1)^2, i.e. CDF F(x) = (2x - 1)^3.
        let s = GinibreSampler::new(5);
        let n = 100_000u64;
        let bins = 20;
        let mut counts = vec![0u64; bins];
        for i in 0..n {
            let ev = hermitian_eigenvalues(s.state(i, 2, 2).matrix());
            let x = ev[1];
            let b = (((x - 0.5) * 2.0 * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
        let mut chi2 = 0.0;
        for (b, &c) in counts.iter().enumerate() {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            let expected = n as f64 * (hi.powi(3) - lo.powi(3));
            chi2 += (c as f64 - expected).powi(2) / expected;
        }
        // 19 degrees of freedom: 99.9% quantile is 43.8
        assert!(chi2 < 43.8, "chi2 = {chi2}");
    }

    #[test]
    fn scalar_systems_always_pass() {
        let e = mc_ppt_probability(1, 1, 1, 100, 0).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.standard_error, 0.0);
    }

    #[test]
    fn werner_line_probability() {
        let e = werner_ppt_probability(100_000, 8).unwrap();
        assert!((e.estimate - 1.0 / 3.0).abs() < 3.0 * e.standard_error);
    }

    #[test]
    fn haar_unitary_is_unitary() {
        let s = GinibreSampler::new(1);
        let u = haar_unitary(&s, 0, 5);
        let id = CMatrix::identity(5, 5);
        assert!((&u * u.adjoint() - id).iter().all(|z| z.norm() < 1e-12));
    }
}
