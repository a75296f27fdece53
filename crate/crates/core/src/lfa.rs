//! 2D local Fourier analysis of the compact-stencil operator, the additive
//! patch smoothers, and the two-grid cycle.
//!
//! Everything here assumes an infinite (or periodic) constant-coefficient
//! grid: the operator acts on plane waves e^{i theta . x/h} by a scalar
//! symbol, a smoother sweep acts by a scalar per frequency, and the two-grid
//! cycle couples each low frequency to its three aliasing harmonics, giving
//! a 4x4 symbol whose spectral radius bounds the cycle's convergence per
//! frequency.

use num_complex::Complex64;

use crate::intergrid::TransferKind;
use crate::linalg;
use crate::vanka::PatchKind;
use crate::Error;

/// Fraction of the mass-term magnitude |sigma| below which a sampled
/// frequency counts as characteristic (the operator or its Galerkin coarse
/// symbol nearly vanish there). Such samples describe measure-zero modes the
/// cycle cannot reduce and would swamp the supremum, so they are excluded.
const EXCLUSION_FRACTION: f64 = 0.05;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// A 2D frequency with both components wrapped into [-pi/2, 3pi/2).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frequency2 {
    pub theta: [f64; 2],
}

impl Frequency2 {
    pub fn new(t1: f64, t2: f64) -> Self {
        Frequency2 { theta: [wrap(t1), wrap(t2)] }
    }

    /// True when both components lie in the low-frequency square
    /// [-pi/2, pi/2).
    pub fn is_low(&self) -> bool {
        self.theta[0] < std::f64::consts::FRAC_PI_2 && self.theta[1] < std::f64::consts::FRAC_PI_2
    }
}

fn wrap(t: f64) -> f64 {
    let lo = -std::f64::consts::FRAC_PI_2;
    t - TWO_PI * ((t - lo) / TWO_PI).floor()
}

/// The four frequencies that alias to one coarse frequency: theta itself and
/// its shifts by (pi,pi), (pi,0), (0,pi), wrapped into range.
#[derive(Clone, Copy, Debug)]
pub struct HarmonicQuad {
    pub freqs: [Frequency2; 4],
}

impl HarmonicQuad {
    pub fn of(theta: Frequency2) -> Self {
        let [t1, t2] = theta.theta;
        let pi = std::f64::consts::PI;
        HarmonicQuad {
            freqs: [
                theta,
                Frequency2::new(t1 + pi, t2 + pi),
                Frequency2::new(t1 + pi, t2),
                Frequency2::new(t1, t2 + pi),
            ],
        }
    }
}

/// Symbol of the compact 9-point operator at frequency theta:
/// a + 2b cos t1 + 2b cos t2 + 4c cos t1 cos t2 with a = 10/(3h^2) - 2s/3,
/// b = -2/(3h^2) - s/12, c = -1/(6h^2).
pub fn helmholtz_symbol(theta: Frequency2, h: f64, sigma: Complex64) -> Complex64 {
    let h2 = h * h;
    let a = Complex64::new(10.0 / (3.0 * h2), 0.0) - sigma * (2.0 / 3.0);
    let b = Complex64::new(-2.0 / (3.0 * h2), 0.0) - sigma / 12.0;
    let c = Complex64::new(-1.0 / (6.0 * h2), 0.0);
    let (c1, c2) = (theta.theta[0].cos(), theta.theta[1].cos());
    a + b * (2.0 * c1) + b * (2.0 * c2) + c * (4.0 * c1 * c2)
}

/// Symbol of one restriction kind at theta, as the per-axis product of the
/// stencil's trigonometric polynomial. The matching prolongation symbol is
/// 4 times this value.
pub fn intergrid_symbol(kind: TransferKind, theta: Frequency2) -> f64 {
    let axis = |t: f64| -> f64 {
        match kind {
            TransferKind::Linear => 0.5 * (1.0 + t.cos()),
            TransferKind::Cubic => (3.0 + 4.0 * t.cos() + (2.0 * t).cos()) / 8.0,
        }
    };
    axis(theta.theta[0]) * axis(theta.theta[1])
}

/// Interior patch offsets per kind; the full patch has no closed-form place
/// in this analysis and is rejected by the symbol constructors.
fn patch_offsets(kind: PatchKind) -> Result<&'static [(i64, i64)], Error> {
    match kind {
        PatchKind::Jacobi => Ok(&[(0, 0)]),
        PatchKind::Element => Ok(&[(0, 0), (1, 0), (0, 1), (1, 1)]),
        PatchKind::Plus => Ok(&[(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)]),
        PatchKind::Rb => Ok(&[(0, 0), (-1, -1), (1, -1), (-1, 1), (1, 1)]),
        PatchKind::Full => Err(Error::InvalidArgument(
            "patch symbol: the full patch is not supported by the analysis".into(),
        )),
    }
}

/// Factored constant-coefficient local matrix of one patch kind, reusable
/// across frequencies (only the phase vector depends on theta).
struct SmootherSymbol {
    w: f64,
    offsets: &'static [(i64, i64)],
    lu: Vec<Complex64>,
    piv: Vec<usize>,
}

impl SmootherSymbol {
    fn new(kind: PatchKind, w: f64, h: f64, sigma: Complex64) -> Result<Self, Error> {
        let offsets = patch_offsets(kind)?;
        let n = offsets.len();
        let h2 = h * h;
        let a = Complex64::new(10.0 / (3.0 * h2), 0.0) - sigma * (2.0 / 3.0);
        let b = Complex64::new(-2.0 / (3.0 * h2), 0.0) - sigma / 12.0;
        let c = Complex64::new(-1.0 / (6.0 * h2), 0.0);
        let coeff = |dx: i64, dy: i64| -> Complex64 {
            match (dx.abs(), dy.abs()) {
                (0, 0) => a,
                (1, 0) | (0, 1) => b,
                (1, 1) => c,
                _ => Complex64::new(0.0, 0.0),
            }
        };
        let mut hi = vec![Complex64::new(0.0, 0.0); n * n];
        for (j, &(jx, jy)) in offsets.iter().enumerate() {
            for (k, &(kx, ky)) in offsets.iter().enumerate() {
                hi[j * n + k] = coeff(kx - jx, ky - jy);
            }
        }
        let mut piv = vec![0usize; n];
        if linalg::lu_factor(&mut hi, n, &mut piv).is_err() {
            return Err(Error::InvalidArgument(
                "patch symbol: local matrix is singular at the given sigma".into(),
            ));
        }
        Ok(SmootherSymbol { w, offsets, lu: hi, piv })
    }

    /// S(theta) = 1 - w * (1/N) phi^H Hi^{-1} phi * H(theta).
    fn eval(&self, theta: Frequency2, h_symbol: Complex64) -> Complex64 {
        let n = self.offsets.len();
        let mut phi: Vec<Complex64> = self
            .offsets
            .iter()
            .map(|&(dx, dy)| {
                Complex64::from_polar(1.0, dx as f64 * theta.theta[0] + dy as f64 * theta.theta[1])
            })
            .collect();
        let conj_phi: Vec<Complex64> = phi.iter().map(|p| p.conj()).collect();
        linalg::lu_solve(&self.lu, n, &self.piv, &mut phi);
        let mut s = Complex64::new(0.0, 0.0);
        for k in 0..n {
            s += conj_phi[k] * phi[k];
        }
        Complex64::new(1.0, 0.0) - s * (self.w / n as f64) * h_symbol
    }
}

/// Smoother symbol at a single frequency.
pub fn vanka_symbol(
    kind: PatchKind,
    theta: Frequency2,
    w: f64,
    h: f64,
    sigma: Complex64,
) -> Result<Complex64, Error> {
    let sym = SmootherSymbol::new(kind, w, h, sigma)?;
    Ok(sym.eval(theta, helmholtz_symbol(theta, h, sigma)))
}

/// A sampled smoother symbol over the full frequency square, midpoint
/// sampling at `resolution` points per axis.
#[derive(Clone, Debug)]
pub struct SymbolSample {
    pub kind: PatchKind,
    pub w: f64,
    pub sigma: Complex64,
    pub resolution: usize,
    pub thetas: Vec<Frequency2>,
    pub values: Vec<Complex64>,
}

pub fn sample_smoother_symbol(
    kind: PatchKind,
    w: f64,
    h: f64,
    sigma: Complex64,
    resolution: usize,
) -> Result<SymbolSample, Error> {
    if resolution < 16 {
        return Err(Error::InvalidArgument("sample_smoother_symbol: resolution must be at least 16".into()));
    }
    let sym = SmootherSymbol::new(kind, w, h, sigma)?;
    let lo = -std::f64::consts::FRAC_PI_2;
    let step = TWO_PI / resolution as f64;
    let mut thetas = Vec::with_capacity(resolution * resolution);
    let mut values = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        for j in 0..resolution {
            let theta = Frequency2::new(
                lo + (i as f64 + 0.5) * step,
                lo + (j as f64 + 0.5) * step,
            );
            thetas.push(theta);
            values.push(sym.eval(theta, helmholtz_symbol(theta, h, sigma)));
        }
    }
    Ok(SymbolSample { kind, w, sigma, resolution, thetas, values })
}

/// LFA smoothing factor: max |S(theta)| over the high-frequency region (the
/// full square minus the low square), midpoint sampling.
pub fn smoothing_factor(
    kind: PatchKind,
    w: f64,
    h: f64,
    sigma: Complex64,
    resolution: usize,
) -> Result<f64, Error> {
    let sample = sample_smoother_symbol(kind, w, h, sigma, resolution)?;
    let mut mu: f64 = 0.0;
    for (theta, value) in sample.thetas.iter().zip(&sample.values) {
        if !theta.is_low() {
            mu = mu.max(value.norm());
        }
    }
    Ok(mu)
}

/// Configuration of the two-grid symbol analysis.
#[derive(Clone, Copy, Debug)]
pub struct TwoGridConfig {
    pub kind: PatchKind,
    pub w: f64,
    pub nu1: usize,
    pub nu2: usize,
    pub restriction: TransferKind,
    pub prolongation: TransferKind,
    pub h: f64,
    pub sigma: Complex64,
    pub resolution: usize,
}

/// Spectral radius of the 4x4 two-grid symbol at one low frequency, or None
/// when the sample is excluded as characteristic.
fn radius_sample(sym: &SmootherSymbol, cfg: &TwoGridConfig, theta: Frequency2, exclusion: f64) -> Option<f64> {
    let quad = HarmonicQuad::of(theta);
    let mut hsym = [Complex64::new(0.0, 0.0); 4];
    let mut ssym = [Complex64::new(0.0, 0.0); 4];
    let mut rsym = [0.0f64; 4];
    let mut psym = [0.0f64; 4];
    for (k, &f) in quad.freqs.iter().enumerate() {
        hsym[k] = helmholtz_symbol(f, cfg.h, cfg.sigma);
        ssym[k] = sym.eval(f, hsym[k]);
        rsym[k] = intergrid_symbol(cfg.restriction, f);
        psym[k] = 4.0 * intergrid_symbol(cfg.prolongation, f);
    }
    let hc: Complex64 = (0..4).map(|k| hsym[k] * (rsym[k] * psym[k])).sum();

    let min_h = hsym.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
    if hc.norm() <= exclusion || min_h <= exclusion || hc.norm() == 0.0 {
        return None;
    }

    // TG = diag(d) - x y^T with d_k = S_k^{nu1+nu2},
    // x_k = S_k^{nu2} P_k / Hc, y_k = R_k H_k S_k^{nu1}.
    let mut d = [Complex64::new(0.0, 0.0); 4];
    let mut x = [Complex64::new(0.0, 0.0); 4];
    let mut y = [Complex64::new(0.0, 0.0); 4];
    for k in 0..4 {
        d[k] = ssym[k].powi((cfg.nu1 + cfg.nu2) as i32);
        x[k] = ssym[k].powi(cfg.nu2 as i32) * psym[k] / hc;
        y[k] = rsym[k] * hsym[k] * ssym[k].powi(cfg.nu1 as i32);
    }
    Some(rank_one_update_radius(&d, &x, &y))
}

/// Two-grid symbol spectral radius at a single frequency; None when the
/// frequency is excluded as characteristic.
pub fn twogrid_radius_at(cfg: &TwoGridConfig, theta: Frequency2) -> Result<Option<f64>, Error> {
    let sym = SmootherSymbol::new(cfg.kind, cfg.w, cfg.h, cfg.sigma)?;
    let exclusion = EXCLUSION_FRACTION * cfg.sigma.norm();
    Ok(radius_sample(&sym, cfg, theta, exclusion))
}

/// Two-grid LFA convergence factor: the supremum over sampled low
/// frequencies of the spectral radius of the 4x4 two-grid symbol
/// S^nu2 (I - P Hc^{-1} R H) S^nu1 over each harmonic quad, with the
/// Galerkin coarse symbol Hc = sum_j R_j H_j P_j.
pub fn twogrid_factor(cfg: &TwoGridConfig) -> Result<f64, Error> {
    if cfg.resolution < 16 {
        return Err(Error::InvalidArgument("twogrid_factor: resolution must be at least 16".into()));
    }
    let sym = SmootherSymbol::new(cfg.kind, cfg.w, cfg.h, cfg.sigma)?;
    let exclusion = EXCLUSION_FRACTION * cfg.sigma.norm();
    let lo = -std::f64::consts::FRAC_PI_2;
    let step = std::f64::consts::PI / cfg.resolution as f64;
    let mut rho: f64 = 0.0;
    let mut kept = 0usize;

    for i in 0..cfg.resolution {
        for j in 0..cfg.resolution {
            let theta = Frequency2::new(
                lo + (i as f64 + 0.5) * step,
                lo + (j as f64 + 0.5) * step,
            );
            if let Some(r) = radius_sample(&sym, cfg, theta, exclusion) {
                kept += 1;
                rho = rho.max(r);
            }
        }
    }
    if kept == 0 {
        return Err(Error::InvalidArgument(
            "twogrid_factor: every sampled frequency was excluded as characteristic".into(),
        ));
    }
    Ok(rho)
}

/// Spectral radius of diag(d) - x y^T by direct 4x4 eigenvalue computation.
/// Characteristic-polynomial root finding is avoided: the symbol often has
/// (near-)repeated eigenvalues, which polynomial roots resolve poorly.
fn rank_one_update_radius(d: &[Complex64; 4], x: &[Complex64; 4], y: &[Complex64; 4]) -> f64 {
    let mut m = faer::Mat::<Complex64>::zeros(4, 4);
    for j in 0..4 {
        for k in 0..4 {
            let mut v = -x[j] * y[k];
            if j == k {
                v += d[j];
            }
            m[(j, k)] = v;
        }
    }
    match m.eigenvalues() {
        Ok(eigs) => eigs.iter().map(|e: &Complex64| e.norm()).fold(0.0, f64::max),
        Err(_) => f64::NAN,
    }
}

/// What a damping sweep measures per w.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepMode {
    Smoothing,
    TwoGrid,
}

/// Factor per damping value. TwoGrid mode analyzes the (1,1)-cycle with
/// cubic transfers both ways, the configuration the damping defaults were
/// tuned against.
pub fn damping_sweep(
    kind: PatchKind,
    w_grid: &[f64],
    h: f64,
    sigma: Complex64,
    mode: SweepMode,
    resolution: usize,
) -> Result<Vec<(f64, f64)>, Error> {
    if w_grid.is_empty() {
        return Err(Error::InvalidArgument("damping_sweep: w grid must be non-empty".into()));
    }
    let mut out = Vec::with_capacity(w_grid.len());
    for &w in w_grid {
        let factor = match mode {
            SweepMode::Smoothing => smoothing_factor(kind, w, h, sigma, resolution)?,
            SweepMode::TwoGrid => twogrid_factor(&TwoGridConfig {
                kind,
                w,
                nu1: 1,
                nu2: 1,
                restriction: TransferKind::Cubic,
                prolongation: TransferKind::Cubic,
                h,
                sigma,
                resolution,
            })?,
        };
        out.push((w, factor));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Mass coefficient at 10 points per wavelength with h = 1.
    fn sigma_10ppw() -> Complex64 {
        let k = TWO_PI / 10.0;
        Complex64::new(k * k, 0.0)
    }

    #[test]
    fn frequency_wraps_into_range() {
        let f = Frequency2::new(-std::f64::consts::PI, 5.0);
        assert!(f.theta[0] >= -std::f64::consts::FRAC_PI_2 && f.theta[0] < 1.5 * std::f64::consts::PI);
        assert!((f.theta[0] - std::f64::consts::PI).abs() < 1e-12);
        assert!(f.theta[1] >= -std::f64::consts::FRAC_PI_2 && f.theta[1] < 1.5 * std::f64::consts::PI);
    }

    #[test]
    fn harmonic_quad_follows_the_aliasing_pattern() {
        let t = Frequency2::new(0.3, -0.4);
        let q = HarmonicQuad::of(t);
        let pi = std::f64::consts::PI;
        assert!((q.freqs[1].theta[0] - (0.3 + pi)).abs() < 1e-12);
        assert!((q.freqs[1].theta[1] - (-0.4 + pi)).abs() < 1e-12);
        assert!((q.freqs[2].theta[0] - (0.3 + pi)).abs() < 1e-12);
        assert!((q.freqs[2].theta[1] - (-0.4)).abs() < 1e-12);
        assert!((q.freqs[3].theta[0] - 0.3).abs() < 1e-12);
        assert!((q.freqs[3].theta[1] - (-0.4 + pi)).abs() < 1e-12);
    }

    #[test]
    fn operator_symbol_at_corner_frequencies() {
        let h = 0.25;
        let zero = Complex64::new(0.0, 0.0);
        let at_origin = helmholtz_symbol(Frequency2::new(0.0, 0.0), h, zero);
        assert!(at_origin.norm() < 1e-12, "constants lie in the Laplacian nullspace");
        let at_pi = helmholtz_symbol(Frequency2::new(std::f64::consts::PI, std::f64::consts::PI), h, zero);
        let want = 16.0 / (3.0 * h * h);
        assert!((at_pi - want).norm() < 1e-10 * want);
    }

    #[test]
    fn zero_damping_leaves_every_symbol_at_one() {
        let sigma = sigma_10ppw();
        for kind in [PatchKind::Jacobi, PatchKind::Element, PatchKind::Plus, PatchKind::Rb] {
            let s = vanka_symbol(kind, Frequency2::new(0.9, -0.2), 0.0, 1.0, sigma).unwrap();
            assert!((s - Complex64::new(1.0, 0.0)).norm() < 1e-14);
        }
        assert!((smoothing_factor(PatchKind::Rb, 0.0, 1.0, sigma, 32).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn jacobi_symbol_reduces_to_scalar_relaxation() {
        let sigma = sigma_10ppw();
        let h = 1.0;
        let w = 0.8;
        let theta = Frequency2::new(1.1, 2.0);
        let hsym = helmholtz_symbol(theta, h, sigma);
        let a = Complex64::new(10.0 / 3.0, 0.0) - sigma * (2.0 / 3.0);
        let want = Complex64::new(1.0, 0.0) - hsym * w / a;
        let got = vanka_symbol(PatchKind::Jacobi, theta, w, h, sigma).unwrap();
        assert!((got - want).norm() < 1e-12, "got {got}, want {want}");
    }

    #[test]
    fn full_patch_symbol_is_rejected() {
        assert!(vanka_symbol(PatchKind::Full, Frequency2::new(0.5, 0.5), 0.8, 1.0, sigma_10ppw()).is_err());
    }

    #[test]
    fn symbols_are_conjugate_symmetric_for_real_sigma() {
        let sigma = sigma_10ppw();
        for kind in [PatchKind::Jacobi, PatchKind::Element, PatchKind::Plus, PatchKind::Rb] {
            for &(t1, t2) in &[(0.7, 1.9), (2.3, -0.1), (1.0, 1.0)] {
                let fwd = vanka_symbol(kind, Frequency2::new(t1, t2), 0.8, 1.0, sigma).unwrap();
                let bwd = vanka_symbol(kind, Frequency2::new(-t1, -t2), 0.8, 1.0, sigma).unwrap();
                assert!((fwd - bwd.conj()).norm() < 1e-12, "{kind:?} at ({t1},{t2})");
            }
        }
    }

    #[test]
    fn intergrid_symbol_reference_values() {
        let pi = std::f64::consts::PI;
        assert!((intergrid_symbol(TransferKind::Linear, Frequency2::new(0.0, 0.0)) - 1.0).abs() < 1e-14);
        assert!((intergrid_symbol(TransferKind::Cubic, Frequency2::new(0.0, 0.0)) - 1.0).abs() < 1e-14);
        assert!(intergrid_symbol(TransferKind::Linear, Frequency2::new(pi, pi)).abs() < 1e-14);
        assert!((intergrid_symbol(TransferKind::Cubic, Frequency2::new(pi / 2.0, 0.0)) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn linear_restriction_harmonics_sum_to_one() {
        for &(t1, t2) in &[(0.3, 0.8), (-0.4, 1.2), (1.0, -0.2)] {
            let quad = HarmonicQuad::of(Frequency2::new(t1, t2));
            let sum: f64 = quad.freqs.iter().map(|&f| intergrid_symbol(TransferKind::Linear, f)).sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum {sum} at ({t1},{t2})");
        }
    }

    #[test]
    fn smoothing_factor_matches_brute_force_over_samples() {
        let sigma = sigma_10ppw();
        let (kind, w, h, res) = (PatchKind::Element, 0.8, 1.0, 32);
        let got = smoothing_factor(kind, w, h, sigma, res).unwrap();
        let sample = sample_smoother_symbol(kind, w, h, sigma, res).unwrap();
        let mut want: f64 = 0.0;
        for (theta, value) in sample.thetas.iter().zip(&sample.values) {
            let high = theta.theta[0] >= std::f64::consts::FRAC_PI_2
                || theta.theta[1] >= std::f64::consts::FRAC_PI_2;
            if high {
                want = want.max(value.norm());
            }
        }
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn sample_counts_match_resolution() {
        let s = sample_smoother_symbol(PatchKind::Rb, 0.8, 1.0, sigma_10ppw(), 16).unwrap();
        assert_eq!(s.thetas.len(), 256);
        assert_eq!(s.values.len(), 256);
        assert!(sample_smoother_symbol(PatchKind::Rb, 0.8, 1.0, sigma_10ppw(), 8).is_err());
    }

    #[test]
    fn smoothing_factor_monotone_near_the_optimum_for_rb() {
        let sigma = sigma_10ppw();
        let grid: Vec<f64> = (0..=14).map(|k| 0.5 + 0.05 * k as f64).collect();
        let table = damping_sweep(PatchKind::Rb, &grid, 1.0, sigma, SweepMode::Smoothing, 64).unwrap();
        let (w_star, mu_star) = table
            .iter()
            .cloned()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        for &(w, mu) in &table {
            if (w - w_star).abs() >= 0.2 {
                assert!(mu_star <= mu + 1e-12, "mu({w_star})={mu_star} vs mu({w})={mu}");
            }
        }
    }

    #[test]
    fn coarse_grid_correction_alone_is_nonexpansive_for_the_laplacian() {
        let cfg = TwoGridConfig {
            kind: PatchKind::Rb,
            w: 0.8,
            nu1: 0,
            nu2: 0,
            restriction: TransferKind::Cubic,
            prolongation: TransferKind::Cubic,
            h: 1.0,
            sigma: Complex64::new(0.0, 0.0),
            resolution: 32,
        };
        let rho = twogrid_factor(&cfg).unwrap();
        assert!(rho <= 1.0 + 1e-10, "rho {rho}");
    }

    #[test]
    fn twogrid_sweep_finds_the_rb_optimum_near_083() {
        let sigma = sigma_10ppw();
        let grid: Vec<f64> = (0..=20).map(|k| 0.6 + 0.02 * k as f64).collect();
        let table = damping_sweep(PatchKind::Rb, &grid, 1.0, sigma, SweepMode::TwoGrid, 48).unwrap();
        let (w_star, _) = table
            .iter()
            .cloned()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert!((w_star - 0.83).abs() <= 0.05, "argmin {w_star}");
    }

    #[test]
    fn factors_are_stable_under_resolution_doubling() {
        let sigma = sigma_10ppw();
        let mu64 = smoothing_factor(PatchKind::Plus, 0.87, 1.0, sigma, 64).unwrap();
        let mu128 = smoothing_factor(PatchKind::Plus, 0.87, 1.0, sigma, 128).unwrap();
        assert!((mu64 - mu128).abs() <= 0.01, "{mu64} vs {mu128}");

        let mk = |res: usize| TwoGridConfig {
            kind: PatchKind::Plus,
            w: 0.87,
            nu1: 1,
            nu2: 1,
            restriction: TransferKind::Cubic,
            prolongation: TransferKind::Cubic,
            h: 1.0,
            sigma,
            resolution: res,
        };
        let r64 = twogrid_factor(&mk(64)).unwrap();
        let r128 = twogrid_factor(&mk(128)).unwrap();
        assert!((r64 - r128).abs() <= 0.01, "{r64} vs {r128}");
    }

    #[test]
    fn single_value_sweep_matches_twogrid_factor() {
        let sigma = sigma_10ppw();
        let table = damping_sweep(PatchKind::Element, &[0.97], 1.0, sigma, SweepMode::TwoGrid, 32).unwrap();
        assert_eq!(table.len(), 1);
        let direct = twogrid_factor(&TwoGridConfig {
            kind: PatchKind::Element,
            w: 0.97,
            nu1: 1,
            nu2: 1,
            restriction: TransferKind::Cubic,
            prolongation: TransferKind::Cubic,
            h: 1.0,
            sigma,
            resolution: 32,
        })
        .unwrap();
        assert!((table[0].1 - direct).abs() < 1e-14);
        assert!(damping_sweep(PatchKind::Element, &[], 1.0, sigma, SweepMode::TwoGrid, 32).is_err());
    }

    #[test]
    fn rank_one_radius_matches_a_hand_diagonal_case() {
        // x = 0 reduces to the diagonal: radius is the largest |d_i|.
        let d = [
            Complex64::new(0.3, 0.1),
            Complex64::new(-0.5, 0.0),
            Complex64::new(0.2, -0.6),
            Complex64::new(0.05, 0.0),
        ];
        let zero = [Complex64::new(0.0, 0.0); 4];
        let rho = rank_one_update_radius(&d, &zero, &zero);
        let want = d.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!((rho - want).abs() < 1e-10);
    }
}
