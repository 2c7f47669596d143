//! Subspace (ESPRIT) spectral estimation on short sample windows, and the
//! analytic-signal / complex-envelope constructions built on top of it.
//!
//! The pipeline is
//!
//! ```text
//! window -> Hankel -> SVD -> model order -> shift-invariance poles
//!        -> frequencies -> least-squares phasors -> (f, a, phi) components
//! ```
//!
//! Every component is a plain cosine `a * cos(2 pi f (t - t_ref) + phi)` whose
//! phase is referenced to the newest sample of the window (`t_ref`). The
//! quadrature counterpart of the fitted signal is then available at any
//! instant inside the window through [`synthesize_imaginary`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{dominant_eigenvectors, symmetric_singular_values, symmetric_svd};

/// A record of `N = 2n + 1` equally spaced real samples, oldest first.
/// `t_ref` is the time stamp of the last (newest) sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleWindow {
    samples: Vec<f64>,
    dt: f64,
    t_ref: f64,
}

impl SampleWindow {
    pub fn new(samples: Vec<f64>, dt: f64, t_ref: f64) -> Result<Self> {
        if samples.len() < 3 || samples.len() % 2 == 0 {
            return Err(Error::InvalidWindow(format!(
                "length must be odd and at least 3, got {}",
                samples.len()
            )));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidWindow(format!("dt must be positive, got {dt}")));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidWindow("non-finite sample".into()));
        }
        Ok(Self { samples, dt, t_ref })
    }

    /// Builds a window from a closure sampled at `t_ref - (N-1-j) dt`.
    pub fn from_fn(len: usize, dt: f64, t_ref: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let samples = (0..len)
            .map(|j| f(t_ref - (len - 1 - j) as f64 * dt))
            .collect();
        Self::new(samples, dt, t_ref)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `n` in `N = 2n + 1`.
    pub fn half_len(&self) -> usize {
        (self.samples.len() - 1) / 2
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_ref(&self) -> f64 {
        self.t_ref
    }

    pub fn t_start(&self) -> f64 {
        self.t_ref - self.span()
    }

    pub fn span(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|x| k * x).collect(),
            dt: self.dt,
            t_ref: self.t_ref,
        }
    }
}

/// One real sinusoid `amplitude * cos(2 pi freq (t - t_ref) + phase)`.
/// A DC term has `freq == 0` and `phase` of 0 or pi.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralComponent {
    pub freq: f64,
    pub amplitude: f64,
    pub phase: f64,
}

impl SpectralComponent {
    pub fn is_dc(&self) -> bool {
        self.freq == 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEstimate {
    /// Sorted by ascending frequency.
    pub components: Vec<SpectralComponent>,
    /// Singular values of the window's Hankel matrix, nonincreasing.
    pub singular_values: Vec<f64>,
    /// Phase reference instant (newest sample of the analysed window).
    pub t_ref: f64,
    /// Oldest instant covered by the analysed window.
    pub t_start: f64,
}

impl SpectralEstimate {
    pub fn empty(singular_values: Vec<f64>, window: &SampleWindow) -> Self {
        Self {
            components: Vec::new(),
            singular_values,
            t_ref: window.t_ref(),
            t_start: window.t_start(),
        }
    }

    pub fn order(&self) -> usize {
        self.components.len()
    }

    /// Whether `t` lies inside the analysed window (with a small tolerance).
    pub fn covers(&self, t: f64) -> bool {
        let tol = 1e-9 * (self.t_ref - self.t_start).abs().max(1e-12);
        t >= self.t_start - tol && t <= self.t_ref + tol
    }

    /// The fitted real signal at `t`.
    pub fn synthesize_real(&self, t: f64) -> f64 {
        let dt = t - self.t_ref;
        self.components
            .iter()
            .map(|c| c.amplitude * (2.0 * PI * c.freq * dt + c.phase).cos())
            .sum()
    }
}

/// Number of sinusoids plus an optional DC term detected in a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ModelOrder {
    pub sinusoids: usize,
    pub dc: bool,
}

impl ModelOrder {
    pub fn pole_count(&self) -> usize {
        2 * self.sinusoids + usize::from(self.dc)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticSample {
    pub value: Complex64,
    pub t: f64,
}

/// Complex envelope samples around the carrier `omega_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSeries {
    pub values: Vec<Complex64>,
    pub dt: f64,
    pub t0: f64,
    pub omega_s: f64,
}

impl EnvelopeSeries {
    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    /// Singular values at or above `rel_threshold * sigma_1` count as signal.
    pub rel_threshold: f64,
    /// Upper bound on the number of sinusoids (DC not counted).
    pub max_sinusoids: usize,
    /// Poles below this frequency (Hz) are treated as DC.
    pub f_min: f64,
    /// Relative angular spacing below which two poles are merged.
    pub merge_tol: f64,
    /// Windows whose largest singular value is at or below this are empty.
    pub noise_floor: f64,
    /// A fit whose summed amplitudes exceed `max_gain` times the window's
    /// peak magnitude is treated as ill-conditioned and its order reduced.
    pub max_gain: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            rel_threshold: 1e-8,
            max_sinusoids: 16,
            f_min: 0.1,
            merge_tol: 1e-6,
            noise_floor: 0.0,
            max_gain: 4.0,
        }
    }
}

impl SpectralConfig {
    /// Threshold preset for windows carrying measurement noise.
    pub fn noisy() -> Self {
        Self { rel_threshold: 1e-3, ..Self::default() }
    }
}

/// Length/step of the analysis window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowConfig {
    pub len: usize,
    pub dt: f64,
}

impl WindowConfig {
    /// One fundamental period plus one sample, rounded up to odd.
    pub fn one_period(f0: f64, dt: f64) -> Self {
        let mut len = (1.0 / (f0 * dt) - 1e-9).ceil() as usize + 1;
        if len % 2 == 0 {
            len += 1;
        }
        Self { len: len.max(3), dt }
    }
}

/// Square Hankel matrix of a window: `M[r][c] = x[r + c]`, `r, c in 0..=n`.
pub fn build_hankel(window: &SampleWindow) -> DMatrix<f64> {
    let n = window.half_len();
    let x = window.samples();
    DMatrix::from_fn(n + 1, n + 1, |r, c| x[r + c])
}

/// Counts singular values at or above `rel_threshold * sigma_1`. Each
/// sinusoid contributes two; an odd count means a DC term is present.
pub fn estimate_order(singular_values: &[f64], rel_threshold: f64) -> Result<ModelOrder> {
    let first = *singular_values.first().ok_or(Error::EmptySpectrum)?;
    if !(rel_threshold > 0.0 && rel_threshold < 1.0) {
        return Err(Error::InvalidParameter {
            name: "rel_threshold".into(),
            reason: format!("must lie in (0, 1), got {rel_threshold}"),
        });
    }
    if first <= 0.0 {
        return Ok(ModelOrder::default());
    }
    let cut = rel_threshold * first;
    let k = singular_values.iter().take_while(|&&s| s >= cut).count();
    Ok(ModelOrder { sinusoids: k / 2, dc: k % 2 == 1 })
}

/// Signal poles of a window for a given model order.
pub fn estimate_poles(window: &SampleWindow, order: ModelOrder) -> Result<Vec<Complex64>> {
    let svd = symmetric_svd(&build_hankel(window));
    poles_from_basis(&svd.u, order.pole_count(), window.half_len())
}

/// Rotational-invariance step: with `Us` the dominant left singular vectors,
/// the poles are the eigenvalues of `pinv(Us[..n]) * Us[1..]`.
fn poles_from_basis(u: &DMatrix<f64>, poles: usize, n: usize) -> Result<Vec<Complex64>> {
    if poles == 0 {
        return Err(Error::InvalidParameter {
            name: "order".into(),
            reason: "at least one pole is required".into(),
        });
    }
    if poles > n {
        return Err(Error::OrderTooHigh { poles, needed: poles + 1, rows: n + 1 });
    }
    let basis = u.columns(0, poles);
    let upper = basis.rows(0, n).into_owned();
    let lower = basis.rows(1, n).into_owned();
    let qr = upper.qr();
    let rotation = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * lower))
        .ok_or(Error::RankDeficient)?;
    Ok(rotation.complex_eigenvalues().iter().copied().collect())
}

/// `f = Im(ln z) / (2 pi dt)`, keeping only nonnegative frequencies (the
/// positive member of each conjugate pair, and real poles). Ascending order.
pub fn poles_to_frequencies(poles: &[Complex64], dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter { name: "dt".into(), reason: format!("{dt}") });
    }
    let mut out = Vec::with_capacity(poles.len());
    for z in poles {
        if z.norm() == 0.0 {
            return Err(Error::ZeroPole);
        }
        let f = z.ln().im / (2.0 * PI * dt);
        if f >= 0.0 {
            out.push(f);
        }
    }
    out.sort_by(f64::total_cmp);
    Ok(out)
}

/// Least-squares phasors `p = diag((ZLᴴZL)⁻¹ ZLᴴ X ZRᴴ (ZR ZRᴴ)⁻¹)` for the
/// given poles. Phasors are referenced to the window centre (sample `n`).
pub fn estimate_phasors(window: &SampleWindow, poles: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = window.half_len();
    let p = poles.len();
    if p == 0 {
        return Ok(Vec::new());
    }
    if p > n {
        return Err(Error::OrderTooHigh { poles: p, needed: p + 1, rows: n + 1 });
    }
    let hankel = build_hankel(window).map(|x| Complex64::new(x, 0.0));
    let z_left = DMatrix::from_fn(n + 1, p, |r, i| poles[i].powi(r as i32));
    let z_right = DMatrix::from_fn(p, n + 1, |i, c| poles[i].powi(c as i32 - n as i32));

    let gram_left = z_left.adjoint() * &z_left;
    let gram_right = &z_right * z_right.adjoint();
    let inv_left = well_conditioned_inverse(gram_left)?;
    let inv_right = well_conditioned_inverse(gram_right)?;

    let full = inv_left * z_left.adjoint() * hankel * z_right.adjoint() * inv_right;
    Ok((0..p).map(|i| full[(i, i)]).collect())
}

/// Inverse of a Hermitian Gram matrix, rejecting (near-)singular ones by the
/// spread of the Cholesky pivots.
fn well_conditioned_inverse(m: DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let chol = m.cholesky().ok_or(Error::RankDeficient)?;
    let pivots = chol.l_dirty().diagonal().map(|d| d.re * d.re);
    if !(pivots.min() > 1e-13 * pivots.max()) {
        return Err(Error::RankDeficient);
    }
    Ok(chol.inverse())
}

/// `a = 2|p|`, `phi = arg p`; for DC, `a = |p|` and `phi` is 0 or pi.
pub fn phasor_to_component(p: Complex64, freq: f64) -> SpectralComponent {
    if freq == 0.0 {
        let phase = if p.re < 0.0 { PI } else { 0.0 };
        return SpectralComponent { freq, amplitude: p.norm(), phase };
    }
    SpectralComponent { freq, amplitude: 2.0 * p.norm(), phase: wrap_phase(p.arg()) }
}

/// Maps an angle into (-pi, pi].
pub fn wrap_phase(phi: f64) -> f64 {
    let mut w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Full pipeline from a window to its component table.
pub fn analyze(window: &SampleWindow, config: &SpectralConfig) -> Result<SpectralEstimate> {
    let n = window.half_len();
    let hankel = build_hankel(window);
    let singular_values = symmetric_singular_values(&hankel);
    if singular_values[0] <= config.noise_floor {
        return Ok(SpectralEstimate::empty(singular_values, window));
    }

    let mut order = estimate_order(&singular_values, config.rel_threshold)?;
    order.sinusoids = order.sinusoids.min(config.max_sinusoids);
    while order.pole_count() > n {
        if order.sinusoids > 0 {
            order.sinusoids -= 1;
        } else {
            order.dc = false;
        }
    }
    if order.pole_count() == 0 {
        return Ok(SpectralEstimate::empty(singular_values, window));
    }

    // Reduce the order when the fitted poles cannot be separated; a window
    // that supports no model at all (e.g. a lone nonzero sample) is empty.
    let basis = dominant_eigenvectors(&hankel, order.pole_count(), &singular_values);
    let peak = window.samples().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let (dc, angles, phasors) = loop {
        let attempt = fit(window, &basis, order, config).and_then(|(dc, angles, phasors)| {
            let gain: f64 = phasors.iter().map(|p| p.norm()).sum();
            if gain > config.max_gain * peak {
                Err(Error::RankDeficient)
            } else {
                Ok((dc, angles, phasors))
            }
        });
        match attempt {
            Err(Error::RankDeficient) => {
                if order.sinusoids > 0 {
                    order.sinusoids -= 1;
                } else {
                    order.dc = false;
                }
                if order.pole_count() == 0 {
                    return Ok(SpectralEstimate::empty(singular_values, window));
                }
            }
            other => break other?,
        }
    };

    // Re-reference phasors from the window centre to its newest sample.
    let dt = window.dt();
    let shift = n as f64;
    let mut components = Vec::with_capacity(angles.len() + 1);
    let mut idx = 0;
    if dc {
        components.push(phasor_to_component(phasors[0], 0.0));
        idx = 1;
    }
    for &theta in &angles {
        let p = phasors[idx] * Complex64::from_polar(1.0, theta * shift);
        components.push(phasor_to_component(p, theta / (2.0 * PI * dt)));
        idx += 2;
    }
    components.sort_by(|a, b| a.freq.total_cmp(&b.freq));

    Ok(SpectralEstimate {
        components,
        singular_values,
        t_ref: window.t_ref(),
        t_start: window.t_start(),
    })
}

/// Poles of the given order, rebuilt on the unit circle, and their phasors.
fn fit(
    window: &SampleWindow,
    basis: &DMatrix<f64>,
    order: ModelOrder,
    config: &SpectralConfig,
) -> Result<(bool, Vec<f64>, Vec<Complex64>)> {
    let n = window.half_len();
    let raw = poles_from_basis(basis, order.pole_count(), n)?;

    // Classify poles by angle. Negative angles are the conjugate partners of
    // positive ones; poles on the negative real axis (Nyquist) carry no
    // usable phase and are dropped.
    let dt = window.dt();
    let nyquist_angle = PI * (1.0 - 1e-9);
    let mut dc = false;
    let mut angles = Vec::new();
    for z in &raw {
        let theta = z.arg();
        let f = theta.abs() / (2.0 * PI * dt);
        if f < config.f_min {
            dc = true;
        } else if theta > 0.0 && theta < nyquist_angle {
            angles.push(theta);
        }
    }
    angles.sort_by(f64::total_cmp);
    let angles = merge_close(&angles, config.merge_tol);

    let mut poles = Vec::with_capacity(2 * angles.len() + 1);
    if dc {
        poles.push(Complex64::new(1.0, 0.0));
    }
    for &theta in &angles {
        poles.push(Complex64::from_polar(1.0, theta));
        poles.push(Complex64::from_polar(1.0, -theta));
    }
    if poles.len() > n {
        return Err(Error::OrderTooHigh { poles: poles.len(), needed: poles.len() + 1, rows: n + 1 });
    }
    let phasors = estimate_phasors(window, &poles)?;
    Ok((dc, angles, phasors))
}

fn merge_close(sorted: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<(f64, usize)> = Vec::with_capacity(sorted.len());
    for &a in sorted {
        match out.last_mut() {
            Some((sum, count)) if (a - *sum / *count as f64).abs() <= tol * a.abs() => {
                *sum += a;
                *count += 1;
            }
            _ => out.push((a, 1)),
        }
    }
    out.into_iter().map(|(s, c)| s / c as f64).collect()
}

/// Quadrature signal of a fitted estimate: each sinusoid's cosine becomes a
/// sine; DC contributes nothing. `t` should lie inside the analysed window.
pub fn synthesize_imaginary(estimate: &SpectralEstimate, t: f64) -> f64 {
    let dt = t - estimate.t_ref;
    estimate
        .components
        .iter()
        .filter(|c| !c.is_dc())
        .map(|c| c.amplitude * (2.0 * PI * c.freq * dt + c.phase).sin())
        .sum()
}

pub fn construct_analytic(x: f64, x_hat: f64, t: f64) -> AnalyticSample {
    AnalyticSample { value: Complex64::new(x, x_hat), t }
}

/// Moves an analytic sample down by the carrier: `X = s * exp(-j omega_s t)`.
pub fn shift_frequency(sample: AnalyticSample, omega_s: f64) -> Complex64 {
    sample.value * Complex64::from_polar(1.0, -omega_s * sample.t)
}
