//! Eigenvalue and frequency-domain analysis of closed loops.
//!
//! The production H-infinity routine is a gamma bisection on the
//! Hamiltonian imaginary-axis eigenvalue test. [`hinf_norm_grid`] is an
//! independent dense-sampling lower bound used to cross-check it.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ClosedLoopRealization;

/// Default abscissa margin for the Hurwitz test.
pub const DEFAULT_STABILITY_TOL: f64 = 1e-9;
/// Default relative accuracy of [`hinf_norm`].
pub const DEFAULT_HINF_REL_TOL: f64 = 1e-6;
/// Relative threshold for classifying a Hamiltonian eigenvalue as imaginary.
pub const IMAGINARY_AXIS_TOL: f64 = 1e-7;

const SCHUR_MAX_ITER_PER_DIM: usize = 200;
const SCHUR_RETRIES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HinfResult {
    pub value: f64,
    /// Frequency (rad/s) where the peak gain was located.
    pub peak_frequency: f64,
    /// Bisection rounds performed.
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub abscissa: f64,
    pub hurwitz: bool,
}

fn check_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch {
            matrix: "M",
            expected_rows: m.nrows(),
            expected_cols: m.nrows(),
            found_rows: m.nrows(),
            found_cols: m.ncols(),
        });
    }
    crate::model::check_finite("M", m)
}

/// All eigenvalues of a real square matrix via the real Schur form.
///
/// When the QR iteration stalls, it is retried on the transpose and then on
/// a few fixed orthogonal similarities, all of which share the spectrum.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    check_square_finite(m)?;
    let n = m.nrows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let attempt = |x: DMatrix<f64>| -> Option<Vec<Complex<f64>>> {
        let schur =
            nalgebra::linalg::Schur::try_new(x, f64::EPSILON, SCHUR_MAX_ITER_PER_DIM * n.max(10))?;
        let ev = schur.complex_eigenvalues();
        ev.iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
            .then(|| ev.iter().copied().collect())
    };
    if let Some(ev) = attempt(m.clone()).or_else(|| attempt(m.transpose())) {
        return Ok(ev);
    }
    for k in 1..=SCHUR_RETRIES {
        let v = DVector::from_fn(n, |i, _| {
            1.0 + ((i * k) % 7) as f64 * 0.37 + i as f64 * 0.11
        });
        let v = &v / v.norm();
        let q = DMatrix::identity(n, n) - &v * v.transpose() * 2.0;
        if let Some(ev) = attempt(&q * m * &q) {
            return Ok(ev);
        }
    }
    Err(Error::EigenFailure(n))
}

/// Largest real part over the eigenvalues of `m`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    let ev = eigenvalues(m)?;
    Ok(ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Hurwitz test `spectral_abscissa(m) < -tol`.
pub fn is_hurwitz(m: &DMatrix<f64>, tol: f64) -> Result<StabilityReport> {
    let abscissa = spectral_abscissa(m)?;
    Ok(StabilityReport {
        abscissa,
        hurwitz: abscissa < -tol,
    })
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex<f64>> {
    m.map(|v| Complex::new(v, 0.0))
}

/// `G(jw) = C_F (jwI - A_F)^{-1} B1 + D11`.
pub fn freq_response(cl: &ClosedLoopRealization, omega: f64) -> Result<DMatrix<Complex<f64>>> {
    let n = cl.n_states();
    let mut resolvent = to_complex(&(-&cl.a_f));
    for i in 0..n {
        resolvent[(i, i)] += Complex::new(0.0, omega);
    }
    let rhs = to_complex(&cl.b1);
    let x = resolvent
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularResolvent { omega })?;
    if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::SingularResolvent { omega });
    }
    Ok(to_complex(&cl.c_f) * x + to_complex(&cl.d11))
}

/// Largest singular value of a complex matrix.
pub fn sigma_max(g: &DMatrix<Complex<f64>>) -> f64 {
    if g.nrows() == 1 || g.ncols() == 1 {
        return g.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    }
    match g.clone().try_svd(false, false, f64::EPSILON, 10_000) {
        Some(svd) => svd.singular_values.max(),
        None => f64::NAN,
    }
}

fn sigma_max_real(m: &DMatrix<f64>) -> f64 {
    sigma_max(&to_complex(m))
}

fn gain_at(cl: &ClosedLoopRealization, omega: f64) -> Result<f64> {
    Ok(sigma_max(&freq_response(cl, omega)?))
}

/// Sampling plan for [`hinf_norm_grid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    pub points_per_decade: usize,
    pub include_zero: bool,
    /// Golden-section iterations around the grid argmax.
    pub refine_iterations: usize,
}

impl Default for FrequencyGrid {
    fn default() -> Self {
        Self {
            min: 1e-4,
            max: 1e4,
            points_per_decade: 400,
            include_zero: true,
            refine_iterations: 80,
        }
    }
}

impl FrequencyGrid {
    pub fn frequencies(&self) -> Vec<f64> {
        let mut out = Vec::new();
        if self.include_zero {
            out.push(0.0);
        }
        let lo = self.min.log10();
        let hi = self.max.log10();
        let count = ((hi - lo) * self.points_per_decade as f64).round() as usize;
        for k in 0..=count {
            out.push(10f64.powf(lo + (hi - lo) * k as f64 / count.max(1) as f64));
        }
        out
    }
}

/// Dense-grid lower bound on the H-infinity norm, refined by golden-section
/// search around the best grid point.
pub fn hinf_norm_grid(cl: &ClosedLoopRealization, grid: &FrequencyGrid) -> Result<f64> {
    let stab = is_hurwitz(&cl.a_f, DEFAULT_STABILITY_TOL)?;
    if !stab.hurwitz {
        return Err(Error::Unstable {
            abscissa: stab.abscissa,
        });
    }
    let freqs = grid.frequencies();
    let mut best = (0usize, f64::NEG_INFINITY);
    for (k, &w) in freqs.iter().enumerate() {
        let g = gain_at(cl, w)?;
        if g > best.1 {
            best = (k, g);
        }
    }
    let k = best.0;
    let left = if k == 0 { freqs[0] } else { freqs[k - 1] };
    let right = if k + 1 < freqs.len() {
        freqs[k + 1]
    } else {
        freqs[k]
    };
    let refined = golden_max(cl, left, right, grid.refine_iterations)?;
    Ok(best.1.max(refined))
}

fn golden_max(cl: &ClosedLoopRealization, mut a: f64, mut b: f64, iters: usize) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    if b <= a {
        return gain_at(cl, a);
    }
    let mut best = f64::NEG_INFINITY;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = gain_at(cl, x1)?;
    let mut f2 = gain_at(cl, x2)?;
    for _ in 0..iters {
        best = best.max(f1).max(f2);
        if f1 > f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = gain_at(cl, x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = gain_at(cl, x2)?;
        }
    }
    Ok(best.max(f1).max(f2))
}

/// Hamiltonian whose imaginary-axis eigenvalues are exactly the frequencies
/// where `gamma` is a singular value of `G(jw)`. Requires `gamma > sigma_max(D11)`.
fn hamiltonian(cl: &ClosedLoopRealization, gamma: f64) -> Option<DMatrix<f64>> {
    let n = cl.n_states();
    let (a, b, c, d) = (&cl.a_f, &cl.b1, &cl.c_f, &cl.d11);
    let g2 = gamma * gamma;
    let r = d.transpose() * d - DMatrix::identity(d.ncols(), d.ncols()) * g2;
    let s = d * d.transpose() - DMatrix::identity(d.nrows(), d.nrows()) * g2;
    let r_inv = r.try_inverse()?;
    let s_inv = s.try_inverse()?;
    let a_h = a - b * &r_inv * d.transpose() * c;
    let top_right = -(b * &r_inv * b.transpose()) * gamma;
    let bottom_left = (c.transpose() * s_inv * c) * gamma;
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&top_right);
    h.view_mut((n, 0), (n, n)).copy_from(&bottom_left);
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    Some(h)
}

/// Frequencies `w >= 0` of the imaginary-axis eigenvalues at level `gamma`,
/// or `None` when `gamma` is a singular value of `D11` (the Hamiltonian
/// does not exist), which places `gamma` at or below the norm.
fn imaginary_frequencies(cl: &ClosedLoopRealization, gamma: f64) -> Result<Option<Vec<f64>>> {
    let Some(h) = hamiltonian(cl, gamma) else {
        return Ok(None);
    };
    let ev = eigenvalues(&h)?;
    let mut out: Vec<f64> = ev
        .iter()
        .filter(|z| z.im >= 0.0 && z.re.abs() <= IMAGINARY_AXIS_TOL * (1.0 + z.norm()))
        .map(|z| z.im)
        .collect();
    out.sort_by(f64::total_cmp);
    Ok(Some(out))
}

/// H-infinity norm by gamma bisection on the Hamiltonian test.
///
/// The lower end starts from the best of `sigma_max(D11)` and the gain at
/// `w = 0` and at the closed-loop natural frequencies; the upper end starts
/// at twice that and doubles until the level is no longer crossed. A level
/// counts as crossed when the Hamiltonian has imaginary eigenvalues and the
/// gain sampled at those frequencies confirms it, so the lower end is always
/// a sampled gain value.
pub fn hinf_norm(cl: &ClosedLoopRealization, rel_tol: f64) -> Result<HinfResult> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "rel_tol must be positive, got {rel_tol}"
        )));
    }
    let ev = eigenvalues(&cl.a_f)?;
    let abscissa = ev.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    if !(abscissa < -DEFAULT_STABILITY_TOL) {
        return Err(Error::Unstable { abscissa });
    }

    let d_max = sigma_max_real(&cl.d11);
    let mut lo = d_max;
    let mut peak = 0.0;

    let mut probes = vec![0.0];
    for z in &ev {
        probes.push(z.im.abs());
        probes.push(z.norm());
    }
    for &w in &probes {
        let g = gain_at(cl, w)?;
        if g > lo {
            lo = g;
            peak = w;
        }
    }
    if lo <= 0.0 {
        let coarse = FrequencyGrid {
            min: 1e-6,
            max: 1e6,
            points_per_decade: 20,
            include_zero: false,
            refine_iterations: 0,
        };
        for w in coarse.frequencies() {
            let g = gain_at(cl, w)?;
            if g > lo {
                lo = g;
                peak = w;
            }
        }
        if lo <= 0.0 {
            return Ok(HinfResult {
                value: 0.0,
                peak_frequency: 0.0,
                iterations: 0,
            });
        }
    }

    // a level counts as below the norm only when a sampled gain at one of
    // the reported crossings (or between two of them) reaches it
    let slack = 1.0 - 0.25 * rel_tol;
    let below_norm = |gamma: f64, lo: &mut f64, peak: &mut f64| -> Result<bool> {
        let Some(freqs) = imaginary_frequencies(cl, gamma)? else {
            *lo = lo.max(gamma);
            return Ok(true);
        };
        let mut trial = freqs.clone();
        for pair in freqs.windows(2) {
            trial.push(0.5 * (pair[0] + pair[1]));
        }
        let mut confirmed = false;
        for w in trial {
            let g = gain_at(cl, w)?;
            if g > *lo {
                *lo = g;
                *peak = w;
            }
            confirmed |= g >= gamma * slack;
        }
        Ok(confirmed)
    };

    let mut hi = 2.0 * lo;
    let mut doublings = 0;
    while below_norm(hi, &mut lo, &mut peak)? {
        hi = 2.0 * lo.max(hi);
        doublings += 1;
        if doublings > 60 || !hi.is_finite() {
            return Err(Error::BracketFailure { upper: hi });
        }
    }

    let mut iterations = 0;
    while hi - lo > rel_tol * lo {
        iterations += 1;
        if iterations > 400 {
            return Err(Error::BracketFailure { upper: hi });
        }
        let mid = 0.5 * (lo + hi);
        if !below_norm(mid, &mut lo, &mut peak)? {
            hi = mid;
        } else if lo >= hi {
            // a sampled gain exceeded the upper end, which only happens at
            // roundoff level
            hi = lo * (1.0 + 0.5 * rel_tol);
        }
    }
    Ok(HinfResult {
        value: 0.5 * (lo + hi),
        peak_frequency: peak,
        iterations,
    })
}
