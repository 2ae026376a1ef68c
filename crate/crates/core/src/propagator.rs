//! Split-operator time evolution.
//!
//! Both propagators use the symmetric Strang splitting
//! `exp(-iT dt/2) exp(-iV dt) exp(-iT dt/2)`. The kinetic factor is diagonal
//! in momentum space. For the exact evolution the potential factor is the
//! closed-form exponential of the local 2×2 matrix; for the adiabatic one it
//! is a pair of independent phases. Consecutive kinetic half steps are fused
//! when advancing several steps at once.

use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use thiserror::Error;

use crate::csv::fmt_f64;
use crate::frame::AdiabaticFrame;
use crate::grid::{make_gaussian_bare_state, Basis, Channel, GaussianPacket, Grid, GridError, SpinorField};
use crate::metrics::{self, AdiabaticityWeights, AtBreakdown};
use crate::model::{ModelError, ModelParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("time step must be finite and nonzero, got {0}")]
    BadStep(f64),
    #[error("final time must be finite and nonnegative, got {0}")]
    BadDuration(f64),
    #[error("sampling stride must be at least 1")]
    BadStride,
    #[error("initial adiabatic weights must be nonnegative and sum to 1, got ({0}, {1})")]
    BadWeights(f64, f64),
    #[error(
        "packet left the safe region at t = {t}: [{lo}, {hi}] is within 5 widths of the domain edge [{x_min}, {x_max})"
    )]
    DomainGuard {
        t: f64,
        lo: f64,
        hi: f64,
        x_min: f64,
        x_max: f64,
    },
}

fn kinetic_phases(grid: &Grid, mass: f64, dt: f64) -> (Vec<Complex64>, Vec<Complex64>) {
    // The 1/N of the inverse FFT is folded into every kinetic factor.
    let scale = 1.0 / grid.len() as f64;
    let half = grid
        .momenta()
        .iter()
        .map(|k| Complex64::from_polar(scale, -k * k * dt / (4.0 * mass)))
        .collect();
    let full = grid
        .momenta()
        .iter()
        .map(|k| Complex64::from_polar(scale, -k * k * dt / (2.0 * mass)))
        .collect();
    (half, full)
}

fn check_step(dt: f64) -> Result<(), PropagationError> {
    if dt.is_finite() && dt != 0.0 {
        Ok(())
    } else {
        Err(PropagationError::BadStep(dt))
    }
}

fn scale_in_place(data: &mut [Complex64], factors: &[Complex64]) {
    for (z, f) in data.iter_mut().zip(factors) {
        *z *= f;
    }
}

struct Kinetic {
    half: Vec<Complex64>,
    full: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Kinetic {
    fn new(grid: &Grid, mass: f64, dt: f64) -> Self {
        let (half, full) = kinetic_phases(grid, mass, dt);
        Self {
            half,
            full,
            scratch: Vec::new(),
        }
    }

    /// `steps` fused Strang steps; `potential` applies the position-space
    /// factor to both components.
    fn advance<P>(&mut self, field: &mut SpinorField, steps: usize, mut potential: P)
    where
        P: FnMut(&mut [Complex64], &mut [Complex64]),
    {
        if steps == 0 {
            return;
        }
        let grid = field.grid().clone();
        for c in Channel::BOTH {
            let data = field.component_mut(c);
            grid.forward_with_scratch(data, &mut self.scratch);
            scale_in_place(data, &self.half);
        }
        for s in 0..steps {
            for c in Channel::BOTH {
                grid.inverse_unscaled_with_scratch(field.component_mut(c), &mut self.scratch);
            }
            potential(&mut field.upper, &mut field.lower);
            let factor = if s + 1 == steps { &self.half } else { &self.full };
            for c in Channel::BOTH {
                let data = field.component_mut(c);
                grid.forward_with_scratch(data, &mut self.scratch);
                scale_in_place(data, factor);
            }
        }
        for c in Channel::BOTH {
            grid.inverse_unscaled_with_scratch(field.component_mut(c), &mut self.scratch);
        }
    }
}

/// Exact evolution under `p²/2m + V(x)` in the bare basis.
pub struct FullPropagator {
    grid: Arc<Grid>,
    dt: f64,
    kinetic: Kinetic,
    // exp(-i V dt) = [[m11, m12], [m12, m22]] per grid point.
    m11: Vec<Complex64>,
    m12: Vec<Complex64>,
    m22: Vec<Complex64>,
}

impl FullPropagator {
    pub fn new(params: &ModelParams, grid: &Arc<Grid>, dt: f64) -> Result<Self, PropagationError> {
        params.validate()?;
        check_step(dt)?;
        let n = grid.len();
        let mut m11 = Vec::with_capacity(n);
        let mut m12 = Vec::with_capacity(n);
        let mut m22 = Vec::with_capacity(n);
        let half_split = 0.5 * params.splitting();
        let global = Complex64::from_polar(1.0, -params.mean_energy() * dt);
        for &x in grid.positions() {
            let g = params.coupling(x);
            let r = half_split.hypot(g);
            let phase = r * dt;
            let cos = phase.cos();
            // sin(r dt) / r, finite as r -> 0.
            let sinc = if r * dt.abs() > 1e-8 {
                phase.sin() / r
            } else {
                dt * (1.0 - phase * phase / 6.0)
            };
            m11.push(global * Complex64::new(cos, -sinc * half_split));
            m22.push(global * Complex64::new(cos, sinc * half_split));
            m12.push(global * Complex64::new(0.0, -sinc * g));
        }
        Ok(Self {
            grid: grid.clone(),
            dt,
            kinetic: Kinetic::new(grid, params.mass, dt),
            m11,
            m12,
            m22,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn advance(&mut self, field: &mut SpinorField, steps: usize) -> Result<(), PropagationError> {
        if field.basis() != Basis::Bare {
            return Err(GridError::BasisMismatch {
                expected: Basis::Bare,
                found: field.basis(),
            }
            .into());
        }
        if **field.grid() != *self.grid {
            return Err(GridError::GridMismatch.into());
        }
        let (m11, m12, m22) = (&self.m11, &self.m12, &self.m22);
        self.kinetic.advance(field, steps, |a, b| {
            for i in 0..a.len() {
                let (u, l) = (a[i], b[i]);
                a[i] = m11[i] * u + m12[i] * l;
                b[i] = m12[i] * u + m22[i] * l;
            }
        });
        Ok(())
    }
}

/// Independent evolution of each adiabatic channel on its own surface.
pub struct AdiabaticPropagator {
    grid: Arc<Grid>,
    dt: f64,
    kinetic: Kinetic,
    upper_phase: Vec<Complex64>,
    lower_phase: Vec<Complex64>,
}

impl AdiabaticPropagator {
    pub fn new(frame: &AdiabaticFrame, mass: f64, dt: f64) -> Result<Self, PropagationError> {
        check_step(dt)?;
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(ModelError::InvalidMass(mass).into());
        }
        let phases = |surface: &[f64]| -> Vec<Complex64> {
            surface
                .iter()
                .map(|e| Complex64::from_polar(1.0, -e * dt))
                .collect()
        };
        Ok(Self {
            grid: frame.grid().clone(),
            dt,
            kinetic: Kinetic::new(frame.grid(), mass, dt),
            upper_phase: phases(frame.upper_surface()),
            lower_phase: phases(frame.lower_surface()),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn advance(&mut self, field: &mut SpinorField, steps: usize) -> Result<(), PropagationError> {
        if field.basis() != Basis::Adiabatic {
            return Err(GridError::BasisMismatch {
                expected: Basis::Adiabatic,
                found: field.basis(),
            }
            .into());
        }
        if **field.grid() != *self.grid {
            return Err(GridError::GridMismatch.into());
        }
        let (up, lo) = (&self.upper_phase, &self.lower_phase);
        self.kinetic.advance(field, steps, |a, b| {
            scale_in_place(a, up);
            scale_in_place(b, lo);
        });
        Ok(())
    }
}

/// One Strang step of the exact evolution.
pub fn split_step_full(
    field: &SpinorField,
    params: &ModelParams,
    dt: f64,
) -> Result<SpinorField, PropagationError> {
    let mut prop = FullPropagator::new(params, field.grid(), dt)?;
    let mut out = field.clone();
    prop.advance(&mut out, 1)?;
    Ok(out)
}

/// One Strang step of the adiabatic evolution.
pub fn propagate_adiabatic(
    field: &SpinorField,
    frame: &AdiabaticFrame,
    params: &ModelParams,
    dt: f64,
) -> Result<SpinorField, PropagationError> {
    let mut prop = AdiabaticPropagator::new(frame, params.mass, dt)?;
    let mut out = field.clone();
    prop.advance(&mut out, 1)?;
    Ok(out)
}

/// `0.1 · min(1 / max|Δ±|, m dx / p_max)` with `p_max = |p0| + 4/width`.
pub fn default_time_step(frame: &AdiabaticFrame, mass: f64, packet: &GaussianPacket) -> f64 {
    let p_max = packet.p0.abs() + 4.0 / packet.width;
    let kinetic = mass * frame.grid().dx() / p_max;
    let emax = frame.max_surface_magnitude();
    let potential = if emax > 0.0 { 1.0 / emax } else { f64::INFINITY };
    0.1 * kinetic.min(potential)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InitialState {
    /// Gaussian in the upper bare level.
    #[default]
    BareUpper,
    /// Gaussian split between the adiabatic channels with these populations.
    Adiabatic { upper: f64, lower: f64 },
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: ModelParams,
    pub grid: Arc<Grid>,
    pub packet: GaussianPacket,
    pub initial: InitialState,
    pub t_final: f64,
    pub dt: f64,
    pub stride: usize,
}

impl Scenario {
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt.abs()).round() as usize
    }
}

/// Everything visible to an observer at a sampled step.
pub struct SampleView<'a> {
    pub step: usize,
    pub t: f64,
    /// Exact state, bare basis.
    pub exact: &'a SpinorField,
    /// Adiabatic reference, adiabatic basis.
    pub reference: &'a SpinorField,
    pub frame: &'a AdiabaticFrame,
    pub weights: AdiabaticityWeights,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    /// `⟨x⟩` and `⟨p⟩` of the exact state.
    pub mean_x: f64,
    pub mean_p: f64,
    pub spread_x: f64,
    pub norm: f64,
    /// Exact-state populations of the `(↑, ↓)` adiabatic channels.
    pub populations: [f64; 2],
    /// Reference `⟨x⟩` and `⟨p⟩` per channel, `NaN` for an empty channel.
    pub channel_x: [f64; 2],
    pub channel_p: [f64; 2],
    pub fidelity: Complex64,
    /// Averaged adiabaticity parameter with and without the `∂²θ` term;
    /// `NaN` terms where the splitting vanishes.
    pub a_t: AtBreakdown,
    pub a_t_first_order: AtBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub weights: AdiabaticityWeights,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(
            out,
            "t,mean_x,mean_p,x_up,p_up,x_down,p_down,pop_up,pop_down,norm,fidelity_re,fidelity_im,fidelity_abs"
        )?;
        for s in &self.samples {
            let cols = [
                s.t,
                s.mean_x,
                s.mean_p,
                s.channel_x[0],
                s.channel_p[0],
                s.channel_x[1],
                s.channel_p[1],
                s.populations[0],
                s.populations[1],
                s.norm,
                s.fidelity.re,
                s.fidelity.im,
                s.fidelity.norm(),
            ];
            let line: Vec<String> = cols.iter().map(|v| fmt_f64(*v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

fn initial_states(
    scenario: &Scenario,
    frame: &AdiabaticFrame,
) -> Result<(SpinorField, SpinorField), PropagationError> {
    let grid = &scenario.grid;
    match scenario.initial {
        InitialState::BareUpper => {
            let exact = make_gaussian_bare_state(grid, scenario.packet)?;
            let reference = exact.to_adiabatic(frame)?;
            Ok((exact, reference))
        }
        InitialState::Adiabatic { upper, lower } => {
            if !(upper >= 0.0 && lower >= 0.0 && ((upper + lower) - 1.0).abs() < 1e-12) {
                return Err(PropagationError::BadWeights(upper, lower));
            }
            let bare = make_gaussian_bare_state(grid, scenario.packet)?;
            let mut reference = SpinorField::zeros(grid.clone(), Basis::Adiabatic);
            for i in 0..grid.len() {
                reference.upper[i] = bare.upper[i] * upper.sqrt();
                reference.lower[i] = bare.upper[i] * lower.sqrt();
            }
            let exact = reference.to_bare(frame)?;
            Ok((exact, reference))
        }
    }
}

fn check_domain(field: &SpinorField, width: f64, t: f64) -> Result<(), PropagationError> {
    let grid = field.grid();
    // √2 σ is the Gaussian width parameter of a spread packet.
    let w = width.max(std::f64::consts::SQRT_2 * field.position_spread());
    let mean = field.mean_position();
    let (lo, hi) = (mean - 5.0 * w, mean + 5.0 * w);
    if lo < grid.x_min() || hi > grid.x_max() {
        return Err(PropagationError::DomainGuard {
            t,
            lo,
            hi,
            x_min: grid.x_min(),
            x_max: grid.x_max(),
        });
    }
    Ok(())
}

/// Evolve the exact state and the adiabatic reference side by side, calling
/// `observer` at every `stride`-th step and at the final step.
pub fn run_with<F>(scenario: &Scenario, mut observer: F) -> Result<AdiabaticityWeights, PropagationError>
where
    F: FnMut(&SampleView<'_>),
{
    if !(scenario.t_final.is_finite() && scenario.t_final >= 0.0) {
        return Err(PropagationError::BadDuration(scenario.t_final));
    }
    if scenario.stride == 0 {
        return Err(PropagationError::BadStride);
    }
    check_step(scenario.dt)?;
    let frame = AdiabaticFrame::new(&scenario.params, &scenario.grid)?;
    let (mut exact, mut reference) = initial_states(scenario, &frame)?;
    let weights = AdiabaticityWeights {
        upper: reference.population(Channel::Upper),
        lower: reference.population(Channel::Lower),
    };
    let mut full = FullPropagator::new(&scenario.params, &scenario.grid, scenario.dt)?;
    let mut adiabatic = AdiabaticPropagator::new(&frame, scenario.params.mass, scenario.dt)?;

    let total = scenario.steps();
    let mut step = 0;
    loop {
        let t = step as f64 * scenario.dt;
        check_domain(&exact, scenario.packet.width, t)?;
        check_domain(&reference, scenario.packet.width, t)?;
        observer(&SampleView {
            step,
            t,
            exact: &exact,
            reference: &reference,
            frame: &frame,
            weights,
        });
        if step == total {
            break;
        }
        let chunk = scenario.stride.min(total - step);
        full.advance(&mut exact, chunk)?;
        adiabatic.advance(&mut reference, chunk)?;
        step += chunk;
    }
    Ok(weights)
}

/// [`run_with`] collecting the standard observables.
pub fn run(scenario: &Scenario) -> Result<Trajectory, PropagationError> {
    let mut samples = Vec::new();
    let mut failure = None;
    let weights = run_with(scenario, |view| match sample_observables(view, &scenario.params) {
        Ok(s) => samples.push(s),
        Err(e) => {
            if failure.is_none() {
                failure = Some(e)
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(Trajectory { weights, samples })
}

fn sample_observables(view: &SampleView<'_>, params: &ModelParams) -> Result<TrajectorySample, PropagationError> {
    let rotated = view.exact.to_adiabatic(view.frame)?;
    let fidelity = view.reference.inner(&rotated)?;
    let mut channel_x = [f64::NAN; 2];
    let mut channel_p = [f64::NAN; 2];
    for (i, c) in Channel::BOTH.into_iter().enumerate() {
        if view.reference.population(c) > 0.0 {
            channel_x[i] = view
                .reference
                .expectation(c, crate::grid::Observable::Position, None)?
                .re;
            channel_p[i] = view
                .reference
                .expectation(c, crate::grid::Observable::Momentum, None)?
                .re;
        }
    }
    let nan = AtBreakdown {
        upper: f64::NAN,
        lower: f64::NAN,
    };
    let a_t = metrics::exact_at_breakdown(view.reference, view.frame, params, view.weights, true)
        .unwrap_or(nan);
    let a_t_first_order =
        metrics::exact_at_breakdown(view.reference, view.frame, params, view.weights, false).unwrap_or(nan);
    Ok(TrajectorySample {
        t: view.t,
        mean_x: view.exact.mean_position(),
        mean_p: view.exact.mean_momentum(),
        spread_x: view.exact.position_spread(),
        norm: view.exact.norm_sqr(),
        populations: [rotated.population(Channel::Upper), rotated.population(Channel::Lower)],
        channel_x,
        channel_p,
        fidelity,
        a_t,
        a_t_first_order,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModeShape, TabulatedMode};

    fn constant_coupling(grid: &Grid, g: f64, detuning: f64) -> ModelParams {
        let xs = grid.positions().to_vec();
        let tab = TabulatedMode::new(&xs, &vec![g; xs.len()]).unwrap();
        ModelParams::new(detuning, ModeShape::Tabulated(tab))
    }

    #[test]
    fn rabi_oscillation_under_constant_potential() {
        let grid = Grid::new(256, -200.0, 200.0).unwrap();
        let (g, d) = (0.3, 0.5);
        let params = constant_coupling(&grid, g, d);
        let mut field = make_gaussian_bare_state(&grid, GaussianPacket::new(0.0, 0.0, 30.0)).unwrap();
        let dt = 0.05;
        let mut prop = FullPropagator::new(&params, &grid, dt).unwrap();
        let omega = (d * d / 4.0 + g * g).sqrt();
        for k in 1..=40 {
            prop.advance(&mut field, 10).unwrap();
            let t = k as f64 * 10.0 * dt;
            let expected = 4.0 * g * g / (d * d + 4.0 * g * g) * (omega * t).sin().powi(2);
            assert!((field.population(Channel::Lower) - expected).abs() < 1e-3);
        }
    }

    #[test]
    fn adiabatic_channels_keep_their_populations() {
        let grid = Grid::new(1024, -100.0, 100.0).unwrap();
        let params = ModelParams::new(0.7, ModeShape::gaussian(5.0, 10.0));
        let frame = AdiabaticFrame::new(&params, &grid).unwrap();
        let bare = make_gaussian_bare_state(&grid, GaussianPacket::new(-20.0, 2.0, 4.0)).unwrap();
        let mut psi = bare.to_adiabatic(&frame).unwrap();
        let (up0, lo0) = (psi.population(Channel::Upper), psi.population(Channel::Lower));
        let mut prop = AdiabaticPropagator::new(&frame, 1.0, 0.02).unwrap();
        prop.advance(&mut psi, 500).unwrap();
        assert!((psi.population(Channel::Upper) - up0).abs() < 1e-12);
        assert!((psi.population(Channel::Lower) - lo0).abs() < 1e-12);
    }

    #[test]
    fn constant_surface_adds_global_phase() {
        let grid = Grid::new(512, -100.0, 100.0).unwrap();
        let params = ModelParams::new(1.6, ModeShape::uncoupled());
        let frame = AdiabaticFrame::new(&params, &grid).unwrap();
        let packet = GaussianPacket::new(-10.0, 1.0, 5.0);
        let start = make_gaussian_bare_state(&grid, packet).unwrap().to_adiabatic(&frame).unwrap();
        let mut with_surface = start.clone();
        let mut free = start.clone();
        let dt = 0.01;
        let steps = 300;
        AdiabaticPropagator::new(&frame, 1.0, dt).unwrap().advance(&mut with_surface, steps).unwrap();
        let free_frame = AdiabaticFrame::new(&ModelParams::new(0.0, ModeShape::uncoupled()), &grid).unwrap();
        AdiabaticPropagator::new(&free_frame, 1.0, dt).unwrap().advance(&mut free, steps).unwrap();
        let phase = Complex64::from_polar(1.0, -0.8 * dt * steps as f64);
        for i in 0..grid.len() {
            assert!((with_surface.upper[i] - free.upper[i] * phase).norm() < 1e-12);
        }
    }

    #[test]
    fn single_step_helpers_match_propagators() {
        let grid = Grid::new(256, -50.0, 50.0).unwrap();
        let params = ModelParams::new(0.4, ModeShape::gaussian(2.0, 8.0));
        let field = make_gaussian_bare_state(&grid, GaussianPacket::new(-10.0, 1.5, 3.0)).unwrap();
        let one = split_step_full(&field, &params, 0.05).unwrap();
        let mut two = field.clone();
        FullPropagator::new(&params, &grid, 0.05).unwrap().advance(&mut two, 1).unwrap();
        assert!(one.distance(&two).unwrap() < 1e-15);

        let frame = AdiabaticFrame::new(&params, &grid).unwrap();
        assert!(propagate_adiabatic(&field, &frame, &params, 0.05).is_err());
        assert!(split_step_full(&field, &params, 0.0).is_err());
    }

    #[test]
    fn fused_steps_equal_repeated_single_steps() {
        let grid = Grid::new(256, -50.0, 50.0).unwrap();
        let params = ModelParams::new(-0.3, ModeShape::standing_wave(0.4, 0.3));
        let field = make_gaussian_bare_state(&grid, GaussianPacket::new(0.0, 2.0, 3.0)).unwrap();
        let mut prop = FullPropagator::new(&params, &grid, 0.03).unwrap();
        let mut fused = field.clone();
        prop.advance(&mut fused, 25).unwrap();
        let mut single = field;
        for _ in 0..25 {
            prop.advance(&mut single, 1).unwrap();
        }
        assert!(fused.distance(&single).unwrap() < 1e-12);
    }

    #[test]
    fn constant_angle_makes_both_evolutions_agree() {
        let grid = Grid::new(512, -100.0, 100.0).unwrap();
        let params = constant_coupling(&grid, 0.3, 0.5);
        let frame = AdiabaticFrame::new(&params, &grid).unwrap();
        let bare = make_gaussian_bare_state(&grid, GaussianPacket::new(-20.0, 2.0, 5.0)).unwrap();
        let mut exact = bare.clone();
        FullPropagator::new(&params, &grid, 0.02).unwrap().advance(&mut exact, 400).unwrap();
        let mut adiabatic = bare.to_adiabatic(&frame).unwrap();
        AdiabaticPropagator::new(&frame, 1.0, 0.02).unwrap().advance(&mut adiabatic, 400).unwrap();
        let rotated = exact.to_adiabatic(&frame).unwrap();
        assert!(rotated.distance(&adiabatic).unwrap() < 1e-12);
    }

    #[test]
    fn backward_steps_undo_forward_steps() {
        let grid = Grid::new(1024, -150.0, 150.0).unwrap();
        let params = ModelParams::new(0.05, ModeShape::gaussian(10.0, 20.0));
        let start = make_gaussian_bare_state(&grid, GaussianPacket::new(-40.0, 3.0, 6.0)).unwrap();
        let mut field = start.clone();
        FullPropagator::new(&params, &grid, 0.01).unwrap().advance(&mut field, 2000).unwrap();
        assert!(field.distance(&start).unwrap() > 0.1);
        FullPropagator::new(&params, &grid, -0.01).unwrap().advance(&mut field, 2000).unwrap();
        assert!(field.distance(&start).unwrap() < 1e-10);
        assert!((field.norm_sqr() - start.norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn domain_guard_aborts() {
        let grid = Grid::new(1024, -60.0, 60.0).unwrap();
        let scenario = Scenario {
            params: ModelParams::new(1.0, ModeShape::uncoupled()),
            grid,
            packet: GaussianPacket::new(-20.0, 5.0, 4.0),
            initial: InitialState::BareUpper,
            t_final: 20.0,
            dt: 0.01,
            stride: 50,
        };
        assert!(matches!(run(&scenario), Err(PropagationError::DomainGuard { .. })));
    }

    #[test]
    fn uncoupled_run_has_unit_fidelity() {
        let grid = Grid::new(1024, -100.0, 100.0).unwrap();
        let scenario = Scenario {
            params: ModelParams::new(0.8, ModeShape::uncoupled()),
            grid,
            packet: GaussianPacket::new(-30.0, 3.0, 5.0),
            initial: InitialState::BareUpper,
            t_final: 10.0,
            dt: 0.01,
            stride: 100,
        };
        let traj = run(&scenario).unwrap();
        assert_eq!(traj.samples.len(), 11);
        for s in &traj.samples {
            assert!((s.fidelity.norm() - 1.0).abs() < 1e-12);
            assert_eq!(s.a_t.total(), 0.0);
        }
        assert_eq!(traj.weights.lower, 0.0);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 12);
    }

    #[test]
    fn adiabatic_initial_state_populates_both_channels() {
        let grid = Grid::new(1024, -100.0, 100.0).unwrap();
        let scenario = Scenario {
            params: ModelParams::new(0.5, ModeShape::gaussian(3.0, 20.0)),
            grid,
            packet: GaussianPacket::new(-10.0, 2.0, 5.0),
            initial: InitialState::Adiabatic { upper: 0.25, lower: 0.75 },
            t_final: 0.0,
            dt: 0.01,
            stride: 1,
        };
        let traj = run(&scenario).unwrap();
        assert!((traj.weights.upper - 0.25).abs() < 1e-10);
        assert!((traj.samples[0].populations[1] - 0.75).abs() < 1e-10);
        assert!((traj.samples[0].fidelity.norm() - 1.0).abs() < 1e-10);

        let bad = Scenario {
            initial: InitialState::Adiabatic { upper: 0.5, lower: 0.6 },
            ..scenario
        };
        assert_eq!(run(&bad), Err(PropagationError::BadWeights(0.5, 0.6)));
    }
}
