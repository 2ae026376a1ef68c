//! Effective time-dependent two-level models.
//!
//! Replacing `x` by a classical trajectory turns the position-dependent
//! coupling into a pulse `G(t)` with constant detuning `δ`, governed by
//! `H(t) = [[δ/2, G(t)], [G(t), -δ/2]]`. This module builds such models,
//! evaluates their adiabaticity rate, integrates them, and inverts the rate to
//! construct a pulse from a prescribed adiabaticity profile.

use std::io::{self, Write};

use num_complex::Complex64;
use thiserror::Error;

use crate::csv::fmt_f64;
use crate::grid::Channel;
use crate::metrics::AdiabaticityWeights;
use crate::model::{ModelError, ModelParams, DEGENERACY_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemiclassicalError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("adiabaticity undefined at t = {t}: detuning and coupling both vanish")]
    Degenerate { t: f64 },
    #[error("effective detuning must be nonzero")]
    ZeroDetuning,
    #[error("time step must be finite and nonzero, got {0}")]
    BadStep(f64),
    #[error("time step {dt} too large at t = {t}: needs at most {limit}")]
    StepTooLarge { t: f64, dt: f64, limit: f64 },
    #[error("need at least {0} samples")]
    TooFewSamples(usize),
    #[error("times and values have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("sample times must be uniformly spaced and increasing")]
    NonUniform,
    #[error("target rate is not finite at t = {t}")]
    NonFinite { t: f64 },
    #[error("accumulated rate leaves the invertible range at t = {t} (f = {f}): the coupling would diverge")]
    InversionDomain { t: f64, f: f64 },
}

/// How an effective model was obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    /// `x = p0 t / m + x0` substituted into the spatial coupling.
    Substitution { x0: f64, p0: f64 },
    /// Built from a target adiabaticity trace.
    InverseConstructed(InversionFormula),
}

/// Closed form used to turn the accumulated rate `f(t)` into `G(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InversionFormula {
    /// `G = |δ| δ f / sqrt(1 - 4 δ² f²)`, the solution of the defining ODE.
    #[default]
    BackSubstituted,
    /// `G = f / sqrt(δ² + 4 f)`, kept for comparison only; it does not
    /// satisfy the defining ODE.
    Alternative,
}

/// `G(t)` on uniform samples with precomputed derivatives; cubic Hermite
/// interpolation in between.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledCoupling {
    t0: f64,
    h: f64,
    g: Vec<f64>,
    dg: Vec<f64>,
}

fn check_uniform(times: &[f64]) -> Result<f64, SemiclassicalError> {
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if !(h > 0.0 && h.is_finite()) {
        return Err(SemiclassicalError::NonUniform);
    }
    for (k, &t) in times.iter().enumerate() {
        if (t - (times[0] + k as f64 * h)).abs() > 1e-9 * h.max(t.abs()) {
            return Err(SemiclassicalError::NonUniform);
        }
    }
    Ok(h)
}

/// Fourth-order finite-difference derivative on uniform samples.
pub fn derivative_uniform(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 5, "need at least five samples");
    let f = values;
    let mut d = vec![0.0; n];
    for k in 2..n - 2 {
        d[k] = (f[k - 2] - 8.0 * f[k - 1] + 8.0 * f[k + 1] - f[k + 2]) / (12.0 * h);
    }
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h);
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h);
    d[n - 2] = (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5]) / (12.0 * h);
    d[n - 1] =
        (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4] + 3.0 * f[n - 5]) / (12.0 * h);
    d
}

/// Running integral `∫_{t_0}^{t_k} a dt` on uniform samples.
///
/// Interior intervals use the fourth-order cubic rule
/// `h/24 (-a[k-1] + 13 a[k] + 13 a[k+1] - a[k+2])`; the end intervals use the
/// same cubic through the nearest four points.
pub fn cumulative_integral(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    assert!(n >= 4, "need at least four samples");
    let a = values;
    let mut out = vec![0.0; n];
    for k in 0..n - 1 {
        let piece = if k == 0 {
            h / 24.0 * (9.0 * a[0] + 19.0 * a[1] - 5.0 * a[2] + a[3])
        } else if k == n - 2 {
            h / 24.0 * (9.0 * a[n - 1] + 19.0 * a[n - 2] - 5.0 * a[n - 3] + a[n - 4])
        } else {
            h / 24.0 * (-a[k - 1] + 13.0 * a[k] + 13.0 * a[k + 1] - a[k + 2])
        };
        out[k + 1] = out[k] + piece;
    }
    out
}

impl SampledCoupling {
    pub fn new(times: &[f64], g: &[f64]) -> Result<Self, SemiclassicalError> {
        if times.len() != g.len() {
            return Err(SemiclassicalError::LengthMismatch(times.len(), g.len()));
        }
        if times.len() < 5 {
            return Err(SemiclassicalError::TooFewSamples(5));
        }
        let h = check_uniform(times)?;
        Ok(Self {
            t0: times[0],
            h,
            dg: derivative_uniform(g, h),
            g: g.to_vec(),
        })
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.g.len()).map(|k| self.t0 + k as f64 * self.h)
    }

    pub fn values(&self) -> &[f64] {
        &self.g
    }

    /// Outside the sampled span the end values are held.
    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        let s = (t - self.t0) / self.h;
        let last = self.g.len() - 1;
        if s <= 0.0 || s >= last as f64 {
            return None;
        }
        let k = (s.floor() as usize).min(last - 1);
        Some((k, s - k as f64))
    }

    fn value(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => {
                if t <= self.t0 {
                    self.g[0]
                } else {
                    self.g[self.g.len() - 1]
                }
            }
            Some((k, u)) => {
                let (h00, h10, h01, h11) = hermite(u);
                h00 * self.g[k] + h10 * self.h * self.dg[k] + h01 * self.g[k + 1] + h11 * self.h * self.dg[k + 1]
            }
        }
    }

    fn rate(&self, t: f64) -> f64 {
        match self.locate(t) {
            None => {
                let s = (t - self.t0) / self.h;
                if s == 0.0 {
                    self.dg[0]
                } else if s == (self.g.len() - 1) as f64 {
                    self.dg[self.g.len() - 1]
                } else {
                    0.0
                }
            }
            Some((k, u)) => {
                let d00 = 6.0 * u * u - 6.0 * u;
                let d10 = 3.0 * u * u - 4.0 * u + 1.0;
                let d01 = -d00;
                let d11 = 3.0 * u * u - 2.0 * u;
                (d00 * self.g[k] + d01 * self.g[k + 1]) / self.h + d10 * self.dg[k] + d11 * self.dg[k + 1]
            }
        }
    }
}

fn hermite(u: f64) -> (f64, f64, f64, f64) {
    let u2 = u * u;
    let u3 = u2 * u;
    (
        2.0 * u3 - 3.0 * u2 + 1.0,
        u3 - 2.0 * u2 + u,
        -2.0 * u3 + 3.0 * u2,
        u3 - u2,
    )
}

#[derive(Debug, Clone, PartialEq)]
enum Coupling {
    Trajectory { params: ModelParams, x0: f64, p0: f64 },
    Sampled(SampledCoupling),
}

/// `H(t) = [[δ/2, G(t)], [G(t), -δ/2]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveModel {
    pub delta: f64,
    coupling: Coupling,
    provenance: Provenance,
}

impl EffectiveModel {
    pub fn from_samples(
        delta: f64,
        times: &[f64],
        g: &[f64],
        provenance: Provenance,
    ) -> Result<Self, SemiclassicalError> {
        Ok(Self {
            delta,
            coupling: Coupling::Sampled(SampledCoupling::new(times, g)?),
            provenance,
        })
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn coupling(&self, t: f64) -> f64 {
        match &self.coupling {
            Coupling::Trajectory { params, x0, p0 } => params.coupling(p0 * t / params.mass + x0),
            Coupling::Sampled(s) => s.value(t),
        }
    }

    /// `∂_t G`.
    pub fn coupling_rate(&self, t: f64) -> f64 {
        match &self.coupling {
            Coupling::Trajectory { params, x0, p0 } => {
                let v = p0 / params.mass;
                v * params.coupling_slope(v * t + x0)
            }
            Coupling::Sampled(s) => s.rate(t),
        }
    }

    pub fn hamiltonian(&self, t: f64) -> [[f64; 2]; 2] {
        let g = self.coupling(t);
        [[0.5 * self.delta, g], [g, -0.5 * self.delta]]
    }

    /// `t,G` rows preceded by a `# delta=` line.
    pub fn write_csv<W: Write>(&self, mut out: W, times: &[f64]) -> io::Result<()> {
        writeln!(out, "# delta={}", fmt_f64(self.delta))?;
        writeln!(out, "t,G")?;
        for &t in times {
            writeln!(out, "{},{}", fmt_f64(t), fmt_f64(self.coupling(t)))?;
        }
        Ok(())
    }
}

/// `δ = Δ`, `G(t) = √n g(p0 t / m + x0)`.
pub fn reduce_by_substitution(params: &ModelParams, p0: f64, x0: f64) -> Result<EffectiveModel, SemiclassicalError> {
    params.validate()?;
    Ok(EffectiveModel {
        delta: params.splitting(),
        coupling: Coupling::Trajectory {
            params: params.clone(),
            x0,
            p0,
        },
        provenance: Provenance::Substitution { x0, p0 },
    })
}

/// `δ ∂_t G / (δ² + 4G²)^(3/2)` with its sign.
pub fn signed_time_adiabaticity(model: &EffectiveModel, t: f64) -> Result<f64, SemiclassicalError> {
    let d = model.delta;
    let g = model.coupling(t);
    let den = d * d + 4.0 * g * g;
    if den < DEGENERACY_EPS {
        return Err(SemiclassicalError::Degenerate { t });
    }
    Ok(d * model.coupling_rate(t) / den.powf(1.5))
}

/// `|δ ∂_t G / (δ² + 4G²)^(3/2)|`.
pub fn time_adiabaticity(model: &EffectiveModel, t: f64) -> Result<f64, SemiclassicalError> {
    signed_time_adiabaticity(model, t).map(f64::abs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelTrace {
    pub t: Vec<f64>,
    /// Amplitudes on the `(+δ/2, -δ/2)` levels.
    pub states: Vec<[Complex64; 2]>,
}

impl TwoLevelTrace {
    pub fn populations(&self) -> Vec<[f64; 2]> {
        self.states.iter().map(|s| [s[0].norm_sqr(), s[1].norm_sqr()]).collect()
    }

    pub fn final_state(&self) -> [Complex64; 2] {
        self.states[self.states.len() - 1]
    }
}

/// Integrate `i ∂_t c = H(t) c` with the exact exponential of `H` frozen at
/// each step midpoint. The step is shortened so that it divides the span.
pub fn solve_two_level(
    model: &EffectiveModel,
    initial: [Complex64; 2],
    t_start: f64,
    t_final: f64,
    dt: f64,
) -> Result<TwoLevelTrace, SemiclassicalError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SemiclassicalError::BadStep(dt));
    }
    let span = t_final - t_start;
    if !span.is_finite() {
        return Err(SemiclassicalError::BadStep(dt));
    }
    let steps = (span.abs() / dt).ceil().max(1.0) as usize;
    let h = span / steps as f64;
    let mut t = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut c = initial;
    t.push(t_start);
    states.push(c);
    for k in 0..steps {
        let tm = t_start + (k as f64 + 0.5) * h;
        let [[a, g], [_, _]] = model.hamiltonian(tm);
        let r = a.hypot(g);
        // One radian of phase per step keeps the frozen-H error small.
        if r * h.abs() > 1.0 {
            return Err(SemiclassicalError::StepTooLarge {
                t: tm,
                dt: h.abs(),
                limit: 1.0 / r,
            });
        }
        let (sin, cos) = (r * h).sin_cos();
        let sinc = if r > 0.0 { sin / r } else { h };
        let m11 = Complex64::new(cos, -sinc * a);
        let m22 = Complex64::new(cos, sinc * a);
        let m12 = Complex64::new(0.0, -sinc * g);
        c = [m11 * c[0] + m12 * c[1], m12 * c[0] + m22 * c[1]];
        t.push(t_start + (k + 1) as f64 * h);
        states.push(c);
    }
    Ok(TwoLevelTrace { t, states })
}

/// Construct `G(t)` whose signed adiabaticity rate equals `rates`, with
/// `G(t_0) = 0`.
///
/// The rate is accumulated to `f(t)` and inverted in closed form. Nonnegative
/// rates give a monotone pulse edge; rates taken from
/// [`signed_time_adiabaticity`] reproduce pulses that rise and fall.
pub fn inverse_coupling(
    times: &[f64],
    rates: &[f64],
    delta: f64,
    formula: InversionFormula,
) -> Result<EffectiveModel, SemiclassicalError> {
    if times.len() != rates.len() {
        return Err(SemiclassicalError::LengthMismatch(times.len(), rates.len()));
    }
    if times.len() < 5 {
        return Err(SemiclassicalError::TooFewSamples(5));
    }
    if delta == 0.0 || !delta.is_finite() {
        return Err(SemiclassicalError::ZeroDetuning);
    }
    let h = check_uniform(times)?;
    if let Some(k) = rates.iter().position(|a| !a.is_finite()) {
        return Err(SemiclassicalError::NonFinite { t: times[k] });
    }
    let f = cumulative_integral(rates, h);
    let mut g = Vec::with_capacity(f.len());
    for (&t, &fk) in times.iter().zip(&f) {
        let value = match formula {
            InversionFormula::BackSubstituted => {
                let s = 1.0 - 4.0 * delta * delta * fk * fk;
                if s <= 0.0 {
                    return Err(SemiclassicalError::InversionDomain { t, f: fk });
                }
                delta.abs() * delta * fk / s.sqrt()
            }
            InversionFormula::Alternative => {
                let s = delta * delta + 4.0 * fk;
                if s <= 0.0 {
                    return Err(SemiclassicalError::InversionDomain { t, f: fk });
                }
                fk / s.sqrt()
            }
        };
        g.push(value);
    }
    EffectiveModel::from_samples(delta, times, &g, Provenance::InverseConstructed(formula))
}

/// Classical motion on one adiabatic surface.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalTrace {
    pub channel: Channel,
    pub t: Vec<f64>,
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    /// `p²/2m + Δ±(x)`.
    pub energy: Vec<f64>,
}

fn surface(params: &ModelParams, channel: Channel, x: f64) -> (f64, f64, f64) {
    let (up, lo) = params.adiabatic_eigenvalues(x);
    let (sup, slo) = params.surface_slopes(x);
    let curv = params.surface_curvature(x);
    match channel {
        Channel::Upper => (up, sup, curv),
        Channel::Lower => (lo, slo, -curv),
    }
}

/// Velocity-Verlet integration of `ẋ = p/m`, `ṗ = -∂Δ±/∂x` on the surface of
/// `channel`.
pub fn classical_trajectory(
    params: &ModelParams,
    channel: Channel,
    x0: f64,
    p0: f64,
    t_final: f64,
    dt: f64,
) -> Result<ClassicalTrace, SemiclassicalError> {
    params.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(SemiclassicalError::BadStep(dt));
    }
    let steps = (t_final.max(0.0) / dt).round() as usize;
    let m = params.mass;
    let mut trace = ClassicalTrace {
        channel,
        t: Vec::with_capacity(steps + 1),
        x: Vec::with_capacity(steps + 1),
        p: Vec::with_capacity(steps + 1),
        energy: Vec::with_capacity(steps + 1),
    };
    let (mut x, mut p) = (x0, p0);
    let (mut e, mut slope, mut curv) = surface(params, channel, x);
    for k in 0..=steps {
        trace.t.push(k as f64 * dt);
        trace.x.push(x);
        trace.p.push(p);
        trace.energy.push(p * p / (2.0 * m) + e);
        if k == steps {
            break;
        }
        // Local oscillation frequency sqrt(|V''|/m) must be resolved.
        let omega = (curv.abs() / m).sqrt();
        if omega * dt > 0.1 {
            return Err(SemiclassicalError::StepTooLarge {
                t: k as f64 * dt,
                dt,
                limit: 0.1 / omega,
            });
        }
        let p_half = p - 0.5 * dt * slope;
        x += dt * p_half / m;
        (e, slope, curv) = surface(params, channel, x);
        p = p_half - 0.5 * dt * slope;
    }
    Ok(trace)
}

/// Trajectories of both channels, `(↑, ↓)`, from their own initial points.
pub fn classical_trajectories(
    params: &ModelParams,
    initial: [(f64, f64); 2],
    t_final: f64,
    dt: f64,
) -> Result<[ClassicalTrace; 2], SemiclassicalError> {
    Ok([
        classical_trajectory(params, Channel::Upper, initial[0].0, initial[0].1, t_final, dt)?,
        classical_trajectory(params, Channel::Lower, initial[1].0, initial[1].1, t_final, dt)?,
    ])
}

/// `(1/2m) Σ_i N_i |2 ∂θ(x_i) p_i| / |Δ+(x_i) - Δ-(x_i)|` along the two
/// trajectories, which must share their time samples.
pub fn trajectory_adiabaticity(
    params: &ModelParams,
    traces: &[ClassicalTrace; 2],
    weights: AdiabaticityWeights,
) -> Result<Vec<f64>, SemiclassicalError> {
    if traces[0].t.len() != traces[1].t.len() {
        return Err(SemiclassicalError::LengthMismatch(traces[0].t.len(), traces[1].t.len()));
    }
    let mut out = vec![0.0; traces[0].t.len()];
    for tr in traces {
        let w = weights.get(tr.channel);
        if w == 0.0 {
            continue;
        }
        for (k, (&x, &p)) in tr.x.iter().zip(&tr.p).enumerate() {
            let gap = 2.0 * params.half_gap(x);
            if gap * gap < DEGENERACY_EPS {
                return Err(SemiclassicalError::Degenerate { t: tr.t[k] });
            }
            out[k] += w * (2.0 * params.dtheta(x)? * p).abs() / (2.0 * params.mass * gap);
        }
    }
    Ok(out)
}

/// Effective model whose rate follows the trajectory-averaged adiabaticity.
pub fn generalized_effective_model(
    params: &ModelParams,
    traces: &[ClassicalTrace; 2],
    weights: AdiabaticityWeights,
    delta: f64,
    formula: InversionFormula,
) -> Result<EffectiveModel, SemiclassicalError> {
    let rates = trajectory_adiabaticity(params, traces, weights)?;
    inverse_coupling(&traces[0].t, &rates, delta, formula)
}

/// `t,x_up,p_up,energy_up,x_down,p_down,energy_down`.
pub fn write_trajectories_csv<W: Write>(traces: &[ClassicalTrace; 2], mut out: W) -> io::Result<()> {
    writeln!(out, "t,x_up,p_up,energy_up,x_down,p_down,energy_down")?;
    let [up, down] = traces;
    for k in 0..up.t.len().min(down.t.len()) {
        let cols = [up.t[k], up.x[k], up.p[k], up.energy[k], down.x[k], down.p[k], down.energy[k]];
        let line: Vec<String> = cols.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}
