//! Uniform periodic grid, two-component wavefunctions and their observables.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::csv::fmt_f64;
use crate::frame::AdiabaticFrame;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("grid size must be a power of two >= 4, got {0}")]
    BadSize(usize),
    #[error("grid domain [{0}, {1}) is empty or not finite")]
    BadDomain(f64, f64),
    #[error("packet width must be positive, got {0}")]
    BadWidth(f64),
    #[error("packet [{lo}, {hi}] (5 widths around x0) does not fit in the domain [{x_min}, {x_max})")]
    DomainFit {
        lo: f64,
        hi: f64,
        x_min: f64,
        x_max: f64,
    },
    #[error("Nyquist momentum {k_max} does not exceed p0 + 6/width = {required}")]
    Undersampled { k_max: f64, required: f64 },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field is in the {found:?} basis, expected {expected:?}")]
    BasisMismatch { expected: Basis, found: Basis },
    #[error("{0:?} component has zero norm")]
    ZeroNorm(Channel),
    #[error("observable {0:?} requires an adiabatic frame")]
    FrameRequired(Observable),
}

/// Uniform periodic grid on `[x_min, x_max)` with its FFT plans.
pub struct Grid {
    n: usize,
    x_min: f64,
    x_max: f64,
    dx: f64,
    x: Vec<f64>,
    k: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("x_min", &self.x_min)
            .field("x_max", &self.x_max)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.x_min == other.x_min && self.x_max == other.x_max
    }
}

impl Grid {
    pub fn new(n: usize, x_min: f64, x_max: f64) -> Result<Arc<Self>, GridError> {
        if n < 4 || !n.is_power_of_two() {
            return Err(GridError::BadSize(n));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(GridError::BadDomain(x_min, x_max));
        }
        let dx = (x_max - x_min) / n as f64;
        let x = (0..n).map(|i| x_min + i as f64 * dx).collect();
        let dk = 2.0 * PI / (n as f64 * dx);
        let k = (0..n)
            .map(|j| {
                if j < n / 2 {
                    j as f64 * dk
                } else {
                    (j as f64 - n as f64) * dk
                }
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Arc::new(Self {
            n,
            x_min,
            x_max,
            dx,
            x,
            k,
            fft: planner.plan_fft_forward(n),
            ifft: planner.plan_fft_inverse(n),
        }))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dk(&self) -> f64 {
        2.0 * PI / (self.n as f64 * self.dx)
    }

    pub fn k_max(&self) -> f64 {
        PI / self.dx
    }

    pub fn positions(&self) -> &[f64] {
        &self.x
    }

    /// Momenta in FFT order.
    pub fn momenta(&self) -> &[f64] {
        &self.k
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.fft.process(data);
    }

    /// Inverse transform in place, scaled so that `inverse ∘ forward = id`.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.ifft.process(data);
        let s = 1.0 / self.n as f64;
        data.iter_mut().for_each(|c| *c *= s);
    }

    pub fn forward_with_scratch(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        scratch.resize(self.fft.get_inplace_scratch_len(), Complex64::default());
        self.fft.process_with_scratch(data, scratch);
    }

    /// Unscaled inverse; callers fold the `1/N` into their phase factors.
    pub fn inverse_unscaled_with_scratch(&self, data: &mut [Complex64], scratch: &mut Vec<Complex64>) {
        scratch.resize(self.ifft.get_inplace_scratch_len(), Complex64::default());
        self.ifft.process_with_scratch(data, scratch);
    }

    /// Largest spacing that resolves a packet with carrier `p0` and width
    /// `width`, and a standing wave of the given wavelength if any.
    pub fn suggested_spacing(p0: f64, width: f64, wavelength: Option<f64>) -> f64 {
        let packet = 1.0 / (4.0 * (p0.abs() + 4.0 / width));
        match wavelength {
            Some(l) => packet.min(l / 16.0),
            None => packet,
        }
    }

    /// Nyquist guard: `π/dx > |p0| + 6/width`.
    pub fn check_sampling(&self, p0: f64, width: f64) -> Result<(), GridError> {
        let required = p0.abs() + 6.0 / width;
        if self.k_max() > required {
            Ok(())
        } else {
            Err(GridError::Undersampled {
                k_max: self.k_max(),
                required,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// Components are `(Φ+, Φ-)` on `|+, n-1>` and `|-, n>`.
    Bare,
    /// Components are `(Ψ↑, Ψ↓)` on the local eigenvectors.
    Adiabatic,
}

/// Selects one spinor component: `+`/`↑` is [`Channel::Upper`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Upper,
    Lower,
}

impl Channel {
    pub const BOTH: [Channel; 2] = [Channel::Upper, Channel::Lower];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Observable {
    Position,
    PositionSquared,
    Momentum,
    MomentumSquared,
    Coupling,
    UpperSurface,
    LowerSurface,
    /// `(∂θ)(x) p`, applied in that order; not Hermitian.
    DthetaMomentum,
    D2theta,
}

/// Two-component wavefunction sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct SpinorField {
    grid: Arc<Grid>,
    pub upper: Vec<Complex64>,
    pub lower: Vec<Complex64>,
    basis: Basis,
}

impl SpinorField {
    pub fn zeros(grid: Arc<Grid>, basis: Basis) -> Self {
        let n = grid.len();
        Self {
            grid,
            upper: vec![Complex64::default(); n],
            lower: vec![Complex64::default(); n],
            basis,
        }
    }

    pub fn from_components(
        grid: Arc<Grid>,
        upper: Vec<Complex64>,
        lower: Vec<Complex64>,
        basis: Basis,
    ) -> Result<Self, GridError> {
        if upper.len() != grid.len() || lower.len() != grid.len() {
            return Err(GridError::GridMismatch);
        }
        Ok(Self {
            grid,
            upper,
            lower,
            basis,
        })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn component(&self, c: Channel) -> &[Complex64] {
        match c {
            Channel::Upper => &self.upper,
            Channel::Lower => &self.lower,
        }
    }

    pub fn component_mut(&mut self, c: Channel) -> &mut [Complex64] {
        match c {
            Channel::Upper => &mut self.upper,
            Channel::Lower => &mut self.lower,
        }
    }

    pub fn same_grid(&self, other: &SpinorField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    /// `∫ |ψ_c|² dx` for one component.
    pub fn population(&self, c: Channel) -> f64 {
        self.component(c).iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.population(Channel::Upper) + self.population(Channel::Lower)
    }

    /// Norm computed from the momentum-space amplitudes.
    pub fn momentum_norm_sqr(&self) -> f64 {
        let n = self.grid.len() as f64;
        let mut total = 0.0;
        for c in Channel::BOTH {
            let mut buf = self.component(c).to_vec();
            self.grid.forward(&mut buf);
            total += buf.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        total * self.grid.dx() / n
    }

    /// Spinor inner product `Σ_c ∫ conj(self_c) other_c dx`.
    pub fn inner(&self, other: &SpinorField) -> Result<Complex64, GridError> {
        if !self.same_grid(other) {
            return Err(GridError::GridMismatch);
        }
        let mut acc = Complex64::default();
        for c in Channel::BOTH {
            for (a, b) in self.component(c).iter().zip(other.component(c)) {
                acc += a.conj() * b;
            }
        }
        Ok(acc * self.grid.dx())
    }

    /// `sqrt(Σ_c ∫ |a_c - b_c|² dx)`.
    pub fn distance(&self, other: &SpinorField) -> Result<f64, GridError> {
        if !self.same_grid(other) {
            return Err(GridError::GridMismatch);
        }
        let mut acc = 0.0;
        for c in Channel::BOTH {
            for (a, b) in self.component(c).iter().zip(other.component(c)) {
                acc += (a - b).norm_sqr();
            }
        }
        Ok((acc * self.grid.dx()).sqrt())
    }

    /// `⟨ψ_c| O |ψ_c⟩ / ⟨ψ_c|ψ_c⟩` on one component.
    ///
    /// Frame-dependent observables (coupling, surfaces, θ derivatives) read
    /// their position profiles from `frame`.
    pub fn expectation(
        &self,
        c: Channel,
        obs: Observable,
        frame: Option<&AdiabaticFrame>,
    ) -> Result<Complex64, GridError> {
        let psi = self.component(c);
        let weight = self.population(c);
        if !(weight > 0.0) {
            return Err(GridError::ZeroNorm(c));
        }
        let dx = self.grid.dx();
        let need_frame = || -> Result<&AdiabaticFrame, GridError> {
            let f = frame.ok_or(GridError::FrameRequired(obs))?;
            if f.grid().len() != self.grid.len() || **f.grid() != *self.grid {
                return Err(GridError::GridMismatch);
            }
            Ok(f)
        };
        let local = |profile: &[f64]| -> Complex64 {
            let s: f64 = psi
                .iter()
                .zip(profile)
                .map(|(z, v)| z.norm_sqr() * v)
                .sum();
            Complex64::new(s * dx / weight, 0.0)
        };
        let value = match obs {
            Observable::Position => local(self.grid.positions()),
            Observable::PositionSquared => {
                let x2: Vec<f64> = self.grid.positions().iter().map(|x| x * x).collect();
                local(&x2)
            }
            Observable::Momentum | Observable::MomentumSquared => {
                let mut buf = psi.to_vec();
                self.grid.forward(&mut buf);
                let power = if obs == Observable::Momentum { 1 } else { 2 };
                let mut num = 0.0;
                let mut den = 0.0;
                for (z, k) in buf.iter().zip(self.grid.momenta()) {
                    let w = z.norm_sqr();
                    num += w * k.powi(power);
                    den += w;
                }
                Complex64::new(num / den, 0.0)
            }
            Observable::Coupling => local(need_frame()?.coupling()),
            Observable::UpperSurface => local(need_frame()?.upper_surface()),
            Observable::LowerSurface => local(need_frame()?.lower_surface()),
            Observable::D2theta => local(need_frame()?.d2theta()),
            Observable::DthetaMomentum => {
                let f = need_frame()?;
                let p_psi = self.grid_apply_momentum(psi);
                let mut acc = Complex64::default();
                for ((z, pz), d) in psi.iter().zip(&p_psi).zip(f.dtheta()) {
                    acc += z.conj() * pz * d;
                }
                acc * dx / weight
            }
        };
        Ok(value)
    }

    fn grid_apply_momentum(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut buf = psi.to_vec();
        self.grid.forward(&mut buf);
        for (z, k) in buf.iter_mut().zip(self.grid.momenta()) {
            *z *= k;
        }
        self.grid.inverse(&mut buf);
        buf
    }

    /// Mean position over the full spinor density.
    pub fn mean_position(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in Channel::BOTH {
            for (z, x) in self.component(c).iter().zip(self.grid.positions()) {
                let w = z.norm_sqr();
                num += w * x;
                den += w;
            }
        }
        if den == 0.0 {
            return 0.0;
        }
        num / den
    }

    /// Position standard deviation over the full spinor density.
    pub fn position_spread(&self) -> f64 {
        let mean = self.mean_position();
        let mut num = 0.0;
        let mut den = 0.0;
        for c in Channel::BOTH {
            for (z, x) in self.component(c).iter().zip(self.grid.positions()) {
                let w = z.norm_sqr();
                num += w * (x - mean) * (x - mean);
                den += w;
            }
        }
        if den == 0.0 {
            return 0.0;
        }
        (num / den).sqrt()
    }

    /// Mean momentum over the full spinor.
    pub fn mean_momentum(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in Channel::BOTH {
            let mut buf = self.component(c).to_vec();
            self.grid.forward(&mut buf);
            for (z, k) in buf.iter().zip(self.grid.momenta()) {
                let w = z.norm_sqr();
                num += w * k;
                den += w;
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    /// Rotate a bare-basis field into the local adiabatic basis, `Ψ = U(x) Φ`.
    pub fn to_adiabatic(&self, frame: &AdiabaticFrame) -> Result<SpinorField, GridError> {
        self.rotated(frame, Basis::Bare, Basis::Adiabatic, 1.0)
    }

    /// Inverse of [`SpinorField::to_adiabatic`], `Φ = U(x)ᵀ Ψ`.
    pub fn to_bare(&self, frame: &AdiabaticFrame) -> Result<SpinorField, GridError> {
        self.rotated(frame, Basis::Adiabatic, Basis::Bare, -1.0)
    }

    fn rotated(
        &self,
        frame: &AdiabaticFrame,
        from: Basis,
        to: Basis,
        sign: f64,
    ) -> Result<SpinorField, GridError> {
        if self.basis != from {
            return Err(GridError::BasisMismatch {
                expected: from,
                found: self.basis,
            });
        }
        if **frame.grid() != *self.grid {
            return Err(GridError::GridMismatch);
        }
        let mut out = self.clone();
        out.basis = to;
        for (i, &th) in frame.theta().iter().enumerate() {
            let (s, c) = th.sin_cos();
            let s = sign * s;
            let a = self.upper[i];
            let b = self.lower[i];
            out.upper[i] = a * c + b * s;
            out.lower[i] = -a * s + b * c;
        }
        Ok(out)
    }

    /// Snapshot rows `x, Re ψ_a, Im ψ_a, Re ψ_b, Im ψ_b`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "x,re_a,im_a,re_b,im_b")?;
        for ((x, a), b) in self.grid.positions().iter().zip(&self.upper).zip(&self.lower) {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_f64(*x),
                fmt_f64(a.re),
                fmt_f64(a.im),
                fmt_f64(b.re),
                fmt_f64(b.im)
            )?;
        }
        Ok(())
    }
}

/// Parameters of the initial Gaussian packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianPacket {
    pub x0: f64,
    pub p0: f64,
    pub width: f64,
}

impl GaussianPacket {
    pub fn new(x0: f64, p0: f64, width: f64) -> Self {
        Self { x0, p0, width }
    }

    pub fn validate(&self, grid: &Grid) -> Result<(), GridError> {
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(GridError::BadWidth(self.width));
        }
        let lo = self.x0 - 5.0 * self.width;
        let hi = self.x0 + 5.0 * self.width;
        if lo < grid.x_min() || hi > grid.x_max() {
            return Err(GridError::DomainFit {
                lo,
                hi,
                x_min: grid.x_min(),
                x_max: grid.x_max(),
            });
        }
        grid.check_sampling(self.p0, self.width)
    }

    /// `(π w²)^(-1/4) exp(-(x-x0)²/2w²) exp(i p0 x)`.
    pub fn amplitude(&self, x: f64) -> Complex64 {
        let w = self.width;
        let env = (PI * w * w).powf(-0.25) * (-(x - self.x0).powi(2) / (2.0 * w * w)).exp();
        Complex64::from_polar(env, self.p0 * x)
    }
}

/// Packet in the upper bare level, lower level empty.
pub fn make_gaussian_bare_state(
    grid: &Arc<Grid>,
    packet: GaussianPacket,
) -> Result<SpinorField, GridError> {
    packet.validate(grid)?;
    let mut field = SpinorField::zeros(grid.clone(), Basis::Bare);
    for (z, &x) in field.upper.iter_mut().zip(grid.positions()) {
        *z = packet.amplitude(x);
    }
    Ok(field)
}
