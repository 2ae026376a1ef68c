//! Adiabaticity diagnostics: the semiclassical estimate `A⁰(x)`, the
//! packet-averaged `A_t`, the fidelity and a few special-case studies.

use num_complex::Complex64;
use thiserror::Error;

use crate::frame::AdiabaticFrame;
use crate::grid::{Basis, Channel, GridError, Observable, SpinorField};
use crate::model::{ModeShape, ModelError, ModelParams, DEGENERACY_EPS};
use crate::propagator::Trajectory;

/// Denominators `|⟨Δ+⟩ - ⟨Δ-⟩|` below this are treated as vanishing.
pub const SPLITTING_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("adiabaticity is singular at x = {x}: detuning and coupling both vanish")]
    Singular { x: f64 },
    #[error("adiabatic splitting vanishes in the {0:?} channel")]
    VanishingSplitting(Channel),
    #[error("objective is flat: the coupling vanishes identically")]
    FlatObjective,
    #[error("operation requires {0} mode")]
    UnsupportedMode(&'static str),
    #[error("detuning must be nonzero")]
    ZeroDetuning,
    #[error("detuning must be positive, got {0}")]
    NonPositiveDetuning(f64),
    #[error("integration window too small: tail fraction {tail} exceeds 1%")]
    WindowTooSmall { tail: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// `|(p0/m) Δ √n ∂g / (Δ² + 4n g²)^(3/2)|`.
pub fn approx_a0(params: &ModelParams, x: f64, p0: f64) -> Result<f64, MetricsError> {
    let d = params.splitting();
    let g = params.coupling(x);
    let den = d * d + 4.0 * g * g;
    if den < DEGENERACY_EPS {
        return Err(MetricsError::Singular { x });
    }
    Ok((p0 / params.mass * d * params.coupling_slope(x) / den.powf(1.5)).abs())
}

/// `(1/2m) |2 ∂θ p0 + ∂²θ| / sqrt(Δ² + 4G²)`: the estimate with the
/// curvature term kept.
pub fn approx_a0_with_curvature(params: &ModelParams, x: f64, p0: f64) -> Result<f64, MetricsError> {
    let d = params.splitting();
    let g = params.coupling(x);
    let den = d * d + 4.0 * g * g;
    if den < DEGENERACY_EPS {
        return Err(MetricsError::Singular { x });
    }
    let num = 2.0 * params.dtheta(x)? * p0 + params.d2theta(x)?;
    Ok((num / (2.0 * params.mass * den.sqrt())).abs())
}

/// Initial populations `N↑⁰`, `N↓⁰` of the adiabatic channels.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdiabaticityWeights {
    pub upper: f64,
    pub lower: f64,
}

impl AdiabaticityWeights {
    pub fn get(&self, c: Channel) -> f64 {
        match c {
            Channel::Upper => self.upper,
            Channel::Lower => self.lower,
        }
    }
}

/// Weighted per-channel terms of `A_t`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AtBreakdown {
    pub upper: f64,
    pub lower: f64,
}

impl AtBreakdown {
    pub fn total(&self) -> f64 {
        self.upper + self.lower
    }
}

/// Per-channel terms `N_i |2⟨∂θ p⟩_i + ⟨∂²θ⟩_i| / (2m |⟨Δ+⟩_i - ⟨Δ-⟩_i|)`.
///
/// `reference` holds the adiabatic-basis channel packets. `⟨∂θ p⟩` is the
/// complex average of the unsymmetrized product.
pub fn exact_at_breakdown(
    reference: &SpinorField,
    frame: &AdiabaticFrame,
    params: &ModelParams,
    weights: AdiabaticityWeights,
    include_d2theta: bool,
) -> Result<AtBreakdown, MetricsError> {
    if reference.basis() != Basis::Adiabatic {
        return Err(GridError::BasisMismatch {
            expected: Basis::Adiabatic,
            found: reference.basis(),
        }
        .into());
    }
    let mut out = AtBreakdown::default();
    for c in Channel::BOTH {
        let w = weights.get(c);
        if w == 0.0 {
            continue;
        }
        let f = Some(frame);
        let gap = reference.expectation(c, Observable::UpperSurface, f)?.re
            - reference.expectation(c, Observable::LowerSurface, f)?.re;
        if gap.abs() < SPLITTING_EPS {
            return Err(MetricsError::VanishingSplitting(c));
        }
        let mut num = 2.0 * reference.expectation(c, Observable::DthetaMomentum, f)?;
        if include_d2theta {
            num += reference.expectation(c, Observable::D2theta, f)?;
        }
        let term = w * num.norm() / (2.0 * params.mass * gap.abs());
        match c {
            Channel::Upper => out.upper = term,
            Channel::Lower => out.lower = term,
        }
    }
    Ok(out)
}

/// The packet-averaged adiabaticity parameter `A_t`.
pub fn exact_at(
    reference: &SpinorField,
    frame: &AdiabaticFrame,
    params: &ModelParams,
    weights: AdiabaticityWeights,
    include_d2theta: bool,
) -> Result<f64, MetricsError> {
    exact_at_breakdown(reference, frame, params, weights, include_d2theta).map(|b| b.total())
}

/// Overlap `∫ Ψ_ad* · U Φ` of the adiabatic reference with the exact state.
pub fn fidelity(
    exact: &SpinorField,
    reference: &SpinorField,
    frame: &AdiabaticFrame,
) -> Result<Complex64, MetricsError> {
    if reference.basis() != Basis::Adiabatic {
        return Err(GridError::BasisMismatch {
            expected: Basis::Adiabatic,
            found: reference.basis(),
        }
        .into());
    }
    let rotated = exact.to_adiabatic(frame)?;
    Ok(reference.inner(&rotated)?)
}

/// `A_t` sampled along a run.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticityTrace {
    pub t: Vec<f64>,
    pub mean_x: Vec<f64>,
    pub values: Vec<f64>,
    pub terms: Vec<AtBreakdown>,
    pub weights: AdiabaticityWeights,
    pub includes_d2theta: bool,
}

impl AdiabaticityTrace {
    pub fn from_trajectory(traj: &Trajectory, include_d2theta: bool) -> Self {
        let terms: Vec<AtBreakdown> = traj
            .samples
            .iter()
            .map(|s| if include_d2theta { s.a_t } else { s.a_t_first_order })
            .collect();
        Self {
            t: traj.samples.iter().map(|s| s.t).collect(),
            mean_x: traj.samples.iter().map(|s| s.mean_x).collect(),
            values: terms.iter().map(|b| b.total()).collect(),
            terms,
            weights: traj.weights,
            includes_d2theta: include_d2theta,
        }
    }
}

/// Where fidelity samples are placed along x.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Abscissa {
    /// Measured `⟨x⟩` of the exact run.
    #[default]
    Measured,
    /// Classical estimate `p0 t / m + x0`.
    Classical { x0: f64, p0: f64, mass: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FidelityTrace {
    pub t: Vec<f64>,
    pub overlap: Vec<Complex64>,
    pub abscissa: Vec<f64>,
}

impl FidelityTrace {
    pub fn from_trajectory(traj: &Trajectory, abscissa: Abscissa) -> Self {
        let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        let abscissa = match abscissa {
            Abscissa::Measured => traj.samples.iter().map(|s| s.mean_x).collect(),
            Abscissa::Classical { x0, p0, mass } => t.iter().map(|t| p0 * t / mass + x0).collect(),
        };
        Self {
            overlap: traj.samples.iter().map(|s| s.fidelity).collect(),
            t,
            abscissa,
        }
    }

    pub fn magnitude(&self) -> Vec<f64> {
        self.overlap.iter().map(|f| f.norm()).collect()
    }
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Positive-x argmax of `A⁰` for each detuning.
///
/// The window `[lo, hi]` is scanned on `scan_points` samples and the best
/// sample refined by golden-section search between its neighbours. Returns
/// `(Δ, x_max)` pairs in the order given.
pub fn a0_max_locus(
    base: &ModelParams,
    p0: f64,
    detunings: &[f64],
    window: (f64, f64),
    scan_points: usize,
) -> Result<Vec<(f64, f64)>, MetricsError> {
    if !matches!(base.mode, ModeShape::Gaussian { .. }) {
        return Err(MetricsError::UnsupportedMode("a Gaussian"));
    }
    if base.mode.is_identically_zero() || p0 == 0.0 {
        return Err(MetricsError::FlatObjective);
    }
    let (lo, hi) = window;
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) || scan_points < 3 {
        return Err(MetricsError::InvalidArgument(format!(
            "window [{lo}, {hi}] with {scan_points} scan points"
        )));
    }
    let h = (hi - lo) / (scan_points - 1) as f64;
    let mut out = Vec::with_capacity(detunings.len());
    for &delta in detunings {
        if !(delta > 0.0) {
            return Err(MetricsError::NonPositiveDetuning(delta));
        }
        let params = base.clone().with_detuning(delta);
        let eval = |x: f64| approx_a0(&params, x, p0).unwrap_or(0.0);
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for k in 0..scan_points {
            let v = eval(lo + k as f64 * h);
            if v > best_val {
                best_val = v;
                best = k;
            }
        }
        if !(best_val > 0.0) {
            return Err(MetricsError::FlatObjective);
        }
        let a = lo + best.saturating_sub(1) as f64 * h;
        let b = lo + (best + 1).min(scan_points - 1) as f64 * h;
        out.push((delta, golden_max(eval, a, b, 1e-9 * (1.0 + hi.abs()))));
    }
    Ok(out)
}

/// Result of integrating the Lorentzian-power approximant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LorentzianCheck {
    pub c: f64,
    /// Quadrature over the window.
    pub numeric: f64,
    /// `|p0 / (m Δ)|`.
    pub analytic: f64,
    /// Fraction of the full integral outside the window.
    pub tail: f64,
}

/// The constant `C` of the approximant `(p0/2mΔ) |C| / (1 + C² x²)^(3/2)`.
pub fn lorentzian_constant(params: &ModelParams) -> Result<f64, MetricsError> {
    let d = params.detuning;
    if d == 0.0 {
        return Err(MetricsError::ZeroDetuning);
    }
    let sqrt_n = (params.photon_number as f64).sqrt();
    match params.mode {
        ModeShape::StandingWave {
            amplitude,
            wavenumber,
        } => Ok(2.0 * wavenumber * sqrt_n * amplitude / d),
        ModeShape::Linear { slope } => Ok(2.0 * sqrt_n * slope / d),
        _ => Err(MetricsError::UnsupportedMode("a standing-wave or linear")),
    }
}

/// `(p0/2mΔ) |C| / (1 + C² x²)^(3/2)`, taken in absolute value.
pub fn lorentzian_approximant(params: &ModelParams, x: f64, p0: f64) -> Result<f64, MetricsError> {
    let c = lorentzian_constant(params)?;
    Ok((p0 / (2.0 * params.mass * params.detuning)).abs() * c.abs() / (1.0 + c * c * x * x).powf(1.5))
}

/// Simpson quadrature of the approximant over `[-half_window, half_window]`.
pub fn lorentzian_integral_check(
    params: &ModelParams,
    p0: f64,
    half_window: f64,
) -> Result<LorentzianCheck, MetricsError> {
    let c = lorentzian_constant(params)?;
    if c == 0.0 {
        return Err(MetricsError::FlatObjective);
    }
    if !(half_window > 0.0 && half_window.is_finite()) {
        return Err(MetricsError::InvalidArgument(format!("half window {half_window}")));
    }
    let u = c.abs() * half_window;
    // Exact fraction of ∫ |C| (1 + C²x²)^(-3/2) = 2 lying beyond ±half_window.
    let tail = 1.0 - u / (1.0 + u * u).sqrt();
    if tail > 0.01 {
        return Err(MetricsError::WindowTooSmall { tail });
    }
    // Resolve the peak width 1/|C| with 200 intervals.
    let mut intervals = ((2.0 * u * 200.0).ceil() as usize).clamp(2000, 20_000_000);
    intervals += intervals % 2;
    let h = 2.0 * half_window / intervals as f64;
    let f = |x: f64| lorentzian_approximant(params, x, p0).expect("constant already validated");
    let mut sum = f(-half_window) + f(half_window);
    for k in 1..intervals {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(-half_window + k as f64 * h);
    }
    Ok(LorentzianCheck {
        c,
        numeric: sum * h / 3.0,
        analytic: (p0 / (params.mass * params.detuning)).abs(),
        tail,
    })
}

/// Samples of the two iterated limits around a standing-wave node.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitOrderReport {
    pub node: f64,
    pub offset: f64,
    /// `(Δ, A⁰(node + offset))` as `Δ → 0`.
    pub off_node: Vec<(f64, f64)>,
    /// Log-log slope of `off_node`; 1 for linear vanishing.
    pub off_node_exponent: f64,
    /// `(Δ, A⁰(node))`.
    pub on_node: Vec<(f64, f64)>,
    /// Log-log slope of `on_node`; -2 for the node divergence.
    pub on_node_exponent: f64,
    /// Detuning held fixed while approaching the node.
    pub fixed_detuning: f64,
    /// `(distance to node, A⁰)` at `fixed_detuning`.
    pub approach: Vec<(f64, f64)>,
    /// `max approach / A⁰(node + offset)` at `fixed_detuning`.
    pub ratio: f64,
}

fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(x, y) in points {
        let (lx, ly) = (x.ln(), y.ln());
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Evaluate `A⁰` along both limit paths around the node at `x = 0`.
///
/// Path (i) fixes `x = offset` and lets `Δ` run through `detunings`; path
/// (ii) fixes `Δ = fixed_detuning` and steps `x` toward the node through
/// `distances`. The on-node series uses `detunings` as well.
pub fn limit_order_probe(
    base: &ModelParams,
    p0: f64,
    offset: f64,
    detunings: &[f64],
    fixed_detuning: f64,
    distances: &[f64],
) -> Result<LimitOrderReport, MetricsError> {
    if !matches!(base.mode, ModeShape::StandingWave { .. }) {
        return Err(MetricsError::UnsupportedMode("a standing-wave"));
    }
    if detunings.len() < 2 || distances.is_empty() {
        return Err(MetricsError::InvalidArgument(
            "need at least two detunings and one distance".into(),
        ));
    }
    let node = 0.0;
    let at = |delta: f64, x: f64| approx_a0(&base.clone().with_detuning(delta), x, p0);
    let mut off_node = Vec::with_capacity(detunings.len());
    let mut on_node = Vec::with_capacity(detunings.len());
    for &d in detunings {
        if d == 0.0 {
            return Err(MetricsError::ZeroDetuning);
        }
        off_node.push((d.abs(), at(d, node + offset)?));
        on_node.push((d.abs(), at(d, node)?));
    }
    let approach = distances
        .iter()
        .map(|&s| Ok((s, at(fixed_detuning, node + s)?)))
        .collect::<Result<Vec<_>, MetricsError>>()?;
    let peak = approach.iter().fold(0.0f64, |m, p| m.max(p.1));
    let reference = at(fixed_detuning, node + offset)?;
    Ok(LimitOrderReport {
        node,
        offset,
        off_node_exponent: loglog_slope(&off_node),
        on_node_exponent: loglog_slope(&on_node),
        off_node,
        on_node,
        fixed_detuning,
        approach,
        ratio: peak / reference,
    })
}
