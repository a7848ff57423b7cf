//! Grounded-Laplacian spectra, their graph-theoretic bound certificates, and
//! the map from the first-order spectrum to the second-order (formation)
//! spectrum.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::topology::GroundedSystem;

/// Slack used when checking bound certificates.
pub const CERT_TOL: f64 = 1e-9;

/// Half-width of the window around λ = 4 that collapses to the double root -2.
const DOUBLE_ROOT_WINDOW: f64 = 1e-12;

/// Ascending eigenvalues of a symmetric matrix, optionally with the matching
/// orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Option<DMatrix<f64>>,
}

impl Spectrum {
    /// Wraps values that are already known (sorted on the way in).
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        Self {
            values,
            vectors: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> Option<&DMatrix<f64>> {
        self.vectors.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Smallest eigenvalue.
    pub fn min(&self) -> f64 {
        self.values.first().copied().unwrap_or(f64::NAN)
    }

    /// Largest eigenvalue.
    pub fn max(&self) -> f64 {
        self.values.last().copied().unwrap_or(f64::NAN)
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi.
pub fn eig_sym(m: &DMatrix<f64>) -> Result<Spectrum> {
    let (values, _) = linalg::jacobi_eigen(m, false)?;
    Ok(Spectrum {
        values,
        vectors: None,
    })
}

/// As [`eig_sym`], also keeping eigenvectors.
pub fn eig_sym_vectors(m: &DMatrix<f64>) -> Result<Spectrum> {
    let (values, vectors) = linalg::jacobi_eigen(m, true)?;
    Ok(Spectrum { values, vectors })
}

/// Spectrum of the grounded Laplacian of `gs`.
pub fn lg_spectrum(gs: &GroundedSystem) -> Result<Spectrum> {
    eig_sym(&gs.lg_f64())
}

/// One inequality `lhs <= rhs` in a certificate chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainLink {
    pub lhs: &'static str,
    pub lhs_value: f64,
    pub rhs: &'static str,
    pub rhs_value: f64,
    pub holds: bool,
}

impl ChainLink {
    fn new(lhs: &'static str, lhs_value: f64, rhs: &'static str, rhs_value: f64) -> Self {
        Self {
            lhs,
            lhs_value,
            rhs,
            rhs_value,
            holds: lhs_value <= rhs_value + CERT_TOL,
        }
    }
}

/// `lower <= witnessed <= upper`, with every link of the supporting chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundCertificate {
    pub lower: f64,
    pub upper: f64,
    pub witnessed: f64,
    pub holds: bool,
    pub chain: Vec<ChainLink>,
}

impl BoundCertificate {
    fn from_chain(lower: f64, upper: f64, witnessed: f64, chain: Vec<ChainLink>) -> Self {
        let holds = chain.iter().all(|l| l.holds);
        Self {
            lower,
            upper,
            witnessed,
            holds,
            chain,
        }
    }
}

/// Checks `min β <= λ₁ <= |∂R|/|F| <= max β <= |R|`.
pub fn certify_lambda_min(gs: &GroundedSystem, spec: &Spectrum) -> BoundCertificate {
    let min_beta = gs.min_beta() as f64;
    let max_beta = gs.max_beta() as f64;
    let ratio = gs.boundary_size() as f64 / gs.follower_count() as f64;
    let refs = gs.refs().refs().len() as f64;
    let l1 = spec.min();
    let chain = vec![
        ChainLink::new("min_beta", min_beta, "lambda_1", l1),
        ChainLink::new("lambda_1", l1, "boundary/followers", ratio),
        ChainLink::new("boundary/followers", ratio, "max_beta", max_beta),
        ChainLink::new("max_beta", max_beta, "ref_count", refs),
    ];
    BoundCertificate::from_chain(min_beta, ratio, l1, chain)
}

/// Checks `d_max(F) <= λ_max <= 2 d_max(F)`.
pub fn certify_lambda_max(gs: &GroundedSystem, spec: &Spectrum) -> BoundCertificate {
    let d = gs.dmax_f() as f64;
    let lmax = spec.max();
    let chain = vec![
        ChainLink::new("dmax_f", d, "lambda_max", lmax),
        ChainLink::new("lambda_max", lmax, "2*dmax_f", 2.0 * d),
    ];
    BoundCertificate::from_chain(d, 2.0 * d, lmax, chain)
}

/// A complex number as an explicit `(re, im)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
}

impl Root {
    pub fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    pub fn abs(&self) -> f64 {
        self.re.hypot(self.im)
    }

    pub fn dist(&self, other: &Root) -> f64 {
        (self.re - other.re).hypot(self.im - other.im)
    }
}

/// Eigenvalues of the formation matrix, two per grounded-Laplacian eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct FormationSpectrum {
    values: Vec<Root>,
    source: Spectrum,
}

impl FormationSpectrum {
    pub fn values(&self) -> &[Root] {
        &self.values
    }

    pub fn source(&self) -> &Spectrum {
        &self.source
    }

    /// Smallest magnitude of a real part (the stability margin).
    pub fn stability_margin(&self) -> f64 {
        self.values
            .iter()
            .map(|r| r.re.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Both roots of `s² + λs + λ`.
pub fn formation_roots(lambda: f64) -> Result<[Root; 2]> {
    if !(lambda > 0.0) {
        return Err(Error::NonPositiveEigenvalue(lambda));
    }
    if (lambda - 4.0).abs() < DOUBLE_ROOT_WINDOW {
        return Ok([Root::new(-2.0, 0.0); 2]);
    }
    if lambda > 4.0 {
        let disc = (lambda * (lambda - 4.0)).sqrt();
        let big = -0.5 * (lambda + disc);
        // product of the roots is λ
        Ok([Root::new(big, 0.0), Root::new(lambda / big, 0.0)])
    } else {
        let im = 0.5 * (lambda * (4.0 - lambda)).sqrt();
        Ok([Root::new(-0.5 * lambda, im), Root::new(-0.5 * lambda, -im)])
    }
}

/// Maps each grounded-Laplacian eigenvalue λ to the two roots of
/// `s² + λs + λ`.
pub fn map_formation_spectrum(spec: &Spectrum) -> Result<FormationSpectrum> {
    let mut values = Vec::with_capacity(2 * spec.len());
    for &lambda in spec.values() {
        values.extend(formation_roots(lambda)?);
    }
    Ok(FormationSpectrum {
        values,
        source: spec.clone(),
    })
}

/// Largest eigenvalue magnitude of the formation matrix.
pub fn spectral_radius_formation(fs: &FormationSpectrum) -> Result<f64> {
    if fs.values.is_empty() {
        return Err(Error::param("formation spectrum is empty"));
    }
    Ok(fs.values.iter().map(Root::abs).fold(0.0, f64::max))
}

/// `(λ/2)(1 + sqrt(1 - 4/λ))`, the magnitude of the larger real root, for
/// `λ >= 4`. Returns `None` on the complex branch.
pub fn spectral_radius_closed_form(lambda_max: f64) -> Option<f64> {
    (lambda_max >= 4.0).then(|| 0.5 * lambda_max * (1.0 + (1.0 - 4.0 / lambda_max).sqrt()))
}

/// Dense `2|F| x 2|F|` error-dynamics matrix with unit gains; state is all
/// positions followed by all velocities.
pub fn build_formation_matrix(gs: &GroundedSystem) -> DMatrix<f64> {
    formation_matrix(&gs.lg_f64(), 1.0, 1.0)
}

/// `[[0, I], [-kp·Lg, -ku·Lg]]`.
pub fn formation_matrix(lg: &DMatrix<f64>, kp: f64, ku: f64) -> DMatrix<f64> {
    let m = lg.nrows();
    let mut b = DMatrix::<f64>::zeros(2 * m, 2 * m);
    for i in 0..m {
        b[(i, m + i)] = 1.0;
        for j in 0..m {
            b[(m + i, j)] = -kp * lg[(i, j)];
            b[(m + i, m + j)] = -ku * lg[(i, j)];
        }
    }
    b
}

/// Eigenvalues of a general real matrix by Hessenberg reduction and shifted
/// QR. Used only to cross-check [`map_formation_spectrum`].
pub fn dense_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Root>> {
    Ok(linalg::hessenberg_qr_eigenvalues(m)?
        .into_iter()
        .map(|(re, im)| Root::new(re, im))
        .collect())
}

/// Largest distance between paired entries after greedily matching each
/// value in `a` to its nearest unused value in `b`. Infinite when the
/// lengths differ.
pub fn spectrum_mismatch(a: &[Root], b: &[Root]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    let mut worst = 0.0f64;
    for x in a {
        let (j, d) = b
            .iter()
            .enumerate()
            .filter(|(j, _)| !used[*j])
            .map(|(j, y)| (j, x.dist(y)))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .expect("lengths match");
        used[j] = true;
        worst = worst.max(d);
    }
    worst
}

/// Steady-state gain `-Lg⁻¹·L12`, one column per reference.
pub fn steady_state_gain(gs: &GroundedSystem) -> Result<DMatrix<f64>> {
    let lu = gs.lg_f64().lu();
    let rhs = -gs.l12_f64();
    lu.solve(&rhs).ok_or(Error::Singular)
}

/// Max over rows of `|rowsum(-Lg⁻¹·L12) - 1|`; zero for an exactly
/// row-stochastic steady-state map.
pub fn stochasticity_defect(gs: &GroundedSystem) -> Result<f64> {
    let g = steady_state_gain(gs)?;
    Ok(g.row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p5_2() -> GroundedSystem {
        GroundedSystem::from_parts(5, 2, [3]).unwrap()
    }

    fn p36_4_md() -> GroundedSystem {
        GroundedSystem::from_parts(36, 4, [5, 14, 23, 32]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn p5_2_hand_spectrum() {
        let s = lg_spectrum(&p5_2()).unwrap();
        let r2 = 2f64.sqrt();
        let want = [1.0, 3.0 - r2, 3.0, 3.0 + r2];
        for (v, w) in s.values().iter().zip(want) {
            assert!(close(*v, w, 1e-12), "{v} vs {w}");
        }
    }

    #[test]
    fn lambda_min_certificates() {
        let gs = p5_2();
        let c = certify_lambda_min(&gs, &lg_spectrum(&gs).unwrap());
        assert!(c.holds);
        assert_eq!((c.lower, c.upper), (1.0, 1.0));
        assert!(close(c.witnessed, 1.0, 1e-12));
        assert_eq!(c.chain.len(), 4);

        let gs = p36_4_md();
        let c = certify_lambda_min(&gs, &lg_spectrum(&gs).unwrap());
        assert!(c.holds);
        assert_eq!((c.lower, c.upper), (1.0, 1.0));
        assert!(close(c.witnessed, 1.0, 1e-9));

        let gs = GroundedSystem::from_parts(4, 1, [1]).unwrap();
        let s = lg_spectrum(&gs).unwrap();
        let c = certify_lambda_min(&gs, &s);
        assert_eq!(c.lower, 0.0);
        assert!(c.holds && s.min() > 0.0);
    }

    #[test]
    fn lambda_max_certificates() {
        let gs = p5_2();
        let c = certify_lambda_max(&gs, &lg_spectrum(&gs).unwrap());
        assert!(c.holds);
        assert_eq!((c.lower, c.upper), (3.0, 6.0));
        assert!(close(c.witnessed, 3.0 + 2f64.sqrt(), 1e-12));

        let gs = p36_4_md();
        let c = certify_lambda_max(&gs, &lg_spectrum(&gs).unwrap());
        assert!(c.holds);
        assert_eq!((c.lower, c.upper), (8.0, 16.0));

        // a single follower next to a single reference
        let gs = GroundedSystem::from_parts(2, 1, [1]).unwrap();
        let c = certify_lambda_max(&gs, &lg_spectrum(&gs).unwrap());
        assert!(c.holds);
        assert_eq!((c.lower, c.witnessed, c.upper), (1.0, 1.0, 2.0));
    }

    #[test]
    fn formation_root_examples() {
        assert_eq!(formation_roots(4.0).unwrap(), [Root::new(-2.0, 0.0); 2]);
        let [a, b] = formation_roots(1.0).unwrap();
        assert!(close(a.re, -0.5, 1e-15) && close(a.im, 3f64.sqrt() / 2.0, 1e-15));
        assert_eq!(b.im, -a.im);
        assert!(close(a.abs(), 1.0, 1e-15));
        let [a, b] = formation_roots(5.0).unwrap();
        assert!(close(a.re, -3.618034, 1e-6) && close(b.re, -1.381966, 1e-6));
        assert!(a.im == 0.0 && b.im == 0.0);
        assert!(matches!(formation_roots(0.0), Err(Error::NonPositiveEigenvalue(_))));
        assert!(formation_roots(-1.0).is_err());
    }

    #[test]
    fn formation_radius_examples() {
        let s = lg_spectrum(&p5_2()).unwrap();
        let fs = map_formation_spectrum(&s).unwrap();
        let rho = spectral_radius_formation(&fs).unwrap();
        let closed = spectral_radius_closed_form(s.max()).unwrap();
        assert!(close(rho, closed, 1e-12));
        assert!(close(rho, 2.8829, 5e-4));

        let fs = map_formation_spectrum(&Spectrum::from_values(vec![4.0; 3])).unwrap();
        assert_eq!(spectral_radius_formation(&fs).unwrap(), 2.0);
        let fs = map_formation_spectrum(&Spectrum::from_values(vec![1.0])).unwrap();
        assert!(close(spectral_radius_formation(&fs).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn formation_matrix_small() {
        let gs = GroundedSystem::from_parts(2, 1, [1]).unwrap();
        assert_eq!(build_formation_matrix(&gs), nalgebra::dmatrix![0.0, 1.0; -1.0, -1.0]);
        let b = formation_matrix(&nalgebra::dmatrix![2.0], 1.0, 1.0);
        assert_eq!(b, nalgebra::dmatrix![0.0, 1.0; -2.0, -2.0]);
    }

    #[test]
    fn mapping_matches_dense_p5_2() {
        let gs = p5_2();
        let fs = map_formation_spectrum(&lg_spectrum(&gs).unwrap()).unwrap();
        let dense = dense_eigenvalues(&build_formation_matrix(&gs)).unwrap();
        assert_eq!(dense.len(), 8);
        assert!(spectrum_mismatch(fs.values(), &dense) < 1e-7);
    }

    #[test]
    fn dense_small_by_hand() {
        let d = dense_eigenvalues(&formation_matrix(&nalgebra::dmatrix![2.0], 1.0, 1.0)).unwrap();
        assert!(spectrum_mismatch(&d, &[Root::new(-1.0, 1.0), Root::new(-1.0, -1.0)]) < 1e-12);
        let d = dense_eigenvalues(&formation_matrix(&nalgebra::dmatrix![4.0], 1.0, 1.0)).unwrap();
        assert!(spectrum_mismatch(&d, &[Root::new(-2.0, 0.0); 2]) < 1e-7);
    }

    #[test]
    fn stochasticity_examples() {
        assert!(stochasticity_defect(&p5_2()).unwrap() <= 1e-10);
        let gs = GroundedSystem::from_parts(3, 1, [1]).unwrap();
        let g = steady_state_gain(&gs).unwrap();
        assert!(close(g[(0, 0)], 1.0, 1e-15) && close(g[(1, 0)], 1.0, 1e-15));
        assert_eq!(stochasticity_defect(&gs).unwrap(), 0.0);
        let gs = GroundedSystem::from_parts(6, 2, [1, 2, 3, 5, 6]).unwrap();
        assert_eq!(stochasticity_defect(&gs).unwrap(), 0.0);
    }

    #[test]
    fn margin_at_least_half_lambda1() {
        let s = lg_spectrum(&p36_4_md()).unwrap();
        let fs = map_formation_spectrum(&s).unwrap();
        assert!(fs.stability_margin() >= s.min() / 2.0 - 1e-9);
        assert!(fs.values().iter().all(|r| r.re < 0.0));
    }
}
