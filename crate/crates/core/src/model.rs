//! Two-level potential of an atom in a single cavity mode, restricted to a
//! fixed excitation block, and its position-dependent diagonalization.
//!
//! Units are scaled so that the reduced Planck constant is one. The photon
//! index `n` labels the block `{|+, n-1>, |-, n>}`; inside it the atom sees
//! the coupling `G(x) = g(x) sqrt(n)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use thiserror::Error;

/// Threshold below which `Δε² + 4G²` is treated as exactly degenerate.
pub const DEGENERACY_EPS: f64 = 1e-24;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("mass must be positive and finite, got {0}")]
    InvalidMass(f64),
    #[error("photon index must be at least 1")]
    InvalidPhotonNumber,
    #[error("detuning must be finite, got {0}")]
    InvalidDetuning(f64),
    #[error("invalid mode shape: {0}")]
    InvalidMode(String),
    #[error("mixing angle undefined at x = {x}: coupling and splitting both vanish")]
    Degenerate { x: f64 },
    #[error("large-detuning potential requires a nonzero detuning")]
    ZeroDetuning,
}

/// Which multiple of the excitation number is removed by the rotating frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameCase {
    /// Rotate at the mode frequency: `ε± = ±Δ/2`.
    #[default]
    Case1,
    /// Rotate at the atomic frequency: `ε+ = -Δ(n-1)`, `ε- = -Δn`.
    Case2,
}

/// Tabulated coupling profile on a uniform periodic sample grid.
///
/// Derivatives are obtained by spectral differentiation of the samples and
/// linearly interpolated between them, so off-sample values are only second
/// order accurate.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedMode {
    x0: f64,
    spacing: f64,
    values: Vec<f64>,
    slope: Vec<f64>,
    curvature: Vec<f64>,
}

impl TabulatedMode {
    pub fn new(xs: &[f64], gs: &[f64]) -> Result<Self, ModelError> {
        if xs.len() != gs.len() {
            return Err(ModelError::InvalidMode(format!(
                "tabulated mode has {} positions but {} values",
                xs.len(),
                gs.len()
            )));
        }
        if xs.len() < 4 {
            return Err(ModelError::InvalidMode(
                "tabulated mode needs at least 4 samples".into(),
            ));
        }
        let spacing = xs[1] - xs[0];
        if !(spacing > 0.0) {
            return Err(ModelError::InvalidMode(
                "tabulated positions must be increasing".into(),
            ));
        }
        for (i, w) in xs.windows(2).enumerate() {
            if ((w[1] - w[0]) - spacing).abs() > 1e-9 * spacing.max(1.0) {
                return Err(ModelError::InvalidMode(format!(
                    "tabulated positions must be uniformly spaced (gap {} differs)",
                    i
                )));
            }
        }
        if gs.iter().any(|g| !g.is_finite()) {
            return Err(ModelError::InvalidMode(
                "tabulated values must be finite".into(),
            ));
        }
        let (slope, curvature) = spectral_derivatives(gs, spacing);
        Ok(Self {
            x0: xs[0],
            spacing,
            values: gs.to_vec(),
            slope,
            curvature,
        })
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.x0 + i as f64 * self.spacing)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn interpolate(&self, table: &[f64], x: f64) -> f64 {
        let s = (x - self.x0) / self.spacing;
        let last = table.len() - 1;
        if s <= 0.0 {
            return table[0];
        }
        if s >= last as f64 {
            return table[last];
        }
        let i = s.floor() as usize;
        let frac = s - i as f64;
        table[i] * (1.0 - frac) + table[i + 1] * frac
    }
}

/// First and second derivative of periodic samples by FFT.
fn spectral_derivatives(samples: &[f64], spacing: f64) -> (Vec<f64>, Vec<f64>) {
    let n = samples.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spectrum: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut spectrum);
    let dk = 2.0 * PI / (n as f64 * spacing);
    let mut first = spectrum.clone();
    let mut second = spectrum;
    for j in 0..n {
        let k = if j < n.div_ceil(2) {
            j as f64 * dk
        } else {
            (j as f64 - n as f64) * dk
        };
        // The Nyquist mode has no well-defined odd derivative.
        let k_odd = if n % 2 == 0 && j == n / 2 { 0.0 } else { k };
        first[j] *= Complex64::new(0.0, k_odd);
        second[j] *= -k * k;
    }
    inv.process(&mut first);
    inv.process(&mut second);
    let scale = 1.0 / n as f64;
    (
        first.iter().map(|c| c.re * scale).collect(),
        second.iter().map(|c| c.re * scale).collect(),
    )
}

/// Spatial profile `g(x)` of the cavity mode.
#[derive(Debug, Clone, PartialEq)]
pub enum ModeShape {
    /// `g(x) = A / (sqrt(2π) a) · exp(-x² / 2a²)`
    Gaussian { amplitude: f64, width: f64 },
    /// `g(x) = A sin(qx)`
    StandingWave { amplitude: f64, wavenumber: f64 },
    /// `g(x) = C x`
    Linear { slope: f64 },
    Tabulated(TabulatedMode),
}

impl ModeShape {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        ModeShape::Gaussian { amplitude, width }
    }

    pub fn standing_wave(amplitude: f64, wavenumber: f64) -> Self {
        ModeShape::StandingWave {
            amplitude,
            wavenumber,
        }
    }

    pub fn linear(slope: f64) -> Self {
        ModeShape::Linear { slope }
    }

    /// Identically vanishing coupling.
    pub fn uncoupled() -> Self {
        ModeShape::Linear { slope: 0.0 }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            ModeShape::Gaussian { amplitude, width } => {
                if !amplitude.is_finite() {
                    return Err(ModelError::InvalidMode("Gaussian amplitude must be finite".into()));
                }
                if !(*width > 0.0 && width.is_finite()) {
                    return Err(ModelError::InvalidMode(format!(
                        "Gaussian width must be positive, got {width}"
                    )));
                }
            }
            ModeShape::StandingWave {
                amplitude,
                wavenumber,
            } => {
                if !amplitude.is_finite() {
                    return Err(ModelError::InvalidMode(
                        "standing-wave amplitude must be finite".into(),
                    ));
                }
                if !(*wavenumber > 0.0 && wavenumber.is_finite()) {
                    return Err(ModelError::InvalidMode(format!(
                        "standing-wave wavenumber must be positive, got {wavenumber}"
                    )));
                }
            }
            ModeShape::Linear { slope } => {
                if !slope.is_finite() {
                    return Err(ModelError::InvalidMode("linear slope must be finite".into()));
                }
            }
            ModeShape::Tabulated(_) => {}
        }
        Ok(())
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            ModeShape::Gaussian { amplitude, width } => {
                amplitude / ((2.0 * PI).sqrt() * width) * (-x * x / (2.0 * width * width)).exp()
            }
            ModeShape::StandingWave {
                amplitude,
                wavenumber,
            } => amplitude * (wavenumber * x).sin(),
            ModeShape::Linear { slope } => slope * x,
            ModeShape::Tabulated(t) => t.interpolate(&t.values, x),
        }
    }

    pub fn slope(&self, x: f64) -> f64 {
        match self {
            ModeShape::Gaussian { width, .. } => -x / (width * width) * self.value(x),
            ModeShape::StandingWave {
                amplitude,
                wavenumber,
            } => amplitude * wavenumber * (wavenumber * x).cos(),
            ModeShape::Linear { slope } => *slope,
            ModeShape::Tabulated(t) => t.interpolate(&t.slope, x),
        }
    }

    pub fn curvature(&self, x: f64) -> f64 {
        match self {
            ModeShape::Gaussian { width, .. } => {
                let a2 = width * width;
                (x * x / (a2 * a2) - 1.0 / a2) * self.value(x)
            }
            ModeShape::StandingWave {
                amplitude,
                wavenumber,
            } => -amplitude * wavenumber * wavenumber * (wavenumber * x).sin(),
            ModeShape::Linear { .. } => 0.0,
            ModeShape::Tabulated(t) => t.interpolate(&t.curvature, x),
        }
    }

    pub fn is_identically_zero(&self) -> bool {
        match self {
            ModeShape::Gaussian { amplitude, .. } | ModeShape::StandingWave { amplitude, .. } => {
                *amplitude == 0.0
            }
            ModeShape::Linear { slope } => *slope == 0.0,
            ModeShape::Tabulated(t) => t.values.iter().all(|&v| v == 0.0),
        }
    }
}

/// Physical configuration of one excitation block.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub mass: f64,
    /// `Δ = Ω - ω`.
    pub detuning: f64,
    pub photon_number: u32,
    pub frame: FrameCase,
    pub mode: ModeShape,
}

impl ModelParams {
    /// Scaled defaults: unit mass, `n = 1`, first rotating frame.
    pub fn new(detuning: f64, mode: ModeShape) -> Self {
        Self {
            mass: 1.0,
            detuning,
            photon_number: 1,
            frame: FrameCase::Case1,
            mode,
        }
    }

    pub fn with_mass(mut self, mass: f64) -> Self {
        self.mass = mass;
        self
    }

    pub fn with_photon_number(mut self, n: u32) -> Self {
        self.photon_number = n;
        self
    }

    pub fn with_frame(mut self, frame: FrameCase) -> Self {
        self.frame = frame;
        self
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.detuning = detuning;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(ModelError::InvalidMass(self.mass));
        }
        if self.photon_number < 1 {
            return Err(ModelError::InvalidPhotonNumber);
        }
        if !self.detuning.is_finite() {
            return Err(ModelError::InvalidDetuning(self.detuning));
        }
        self.mode.validate()
    }

    fn sqrt_n(&self) -> f64 {
        (self.photon_number as f64).sqrt()
    }

    /// `G(x) = g(x) sqrt(n)`.
    pub fn coupling(&self, x: f64) -> f64 {
        self.mode.value(x) * self.sqrt_n()
    }

    pub fn coupling_slope(&self, x: f64) -> f64 {
        self.mode.slope(x) * self.sqrt_n()
    }

    pub fn coupling_curvature(&self, x: f64) -> f64 {
        self.mode.curvature(x) * self.sqrt_n()
    }

    /// Diagonal energies `(ε+, ε-)` of the selected rotating frame.
    pub fn diagonal(&self) -> (f64, f64) {
        let d = self.detuning;
        match self.frame {
            FrameCase::Case1 => (0.5 * d, -0.5 * d),
            FrameCase::Case2 => {
                let n = self.photon_number as f64;
                (-d * (n - 1.0), -d * n)
            }
        }
    }

    /// `Δε = ε+ - ε-`; equal to the detuning in both frames.
    pub fn splitting(&self) -> f64 {
        let (p, m) = self.diagonal();
        p - m
    }

    /// `ε̄ = (ε+ + ε-) / 2`.
    pub fn mean_energy(&self) -> f64 {
        let (p, m) = self.diagonal();
        0.5 * (p + m)
    }

    pub fn bare_potential(&self, x: f64) -> [[f64; 2]; 2] {
        let (ep, em) = self.diagonal();
        let g = self.coupling(x);
        [[ep, g], [g, em]]
    }

    fn is_degenerate(&self, x: f64) -> bool {
        let de = self.splitting();
        let g = self.coupling(x);
        de * de + 4.0 * g * g < DEGENERACY_EPS
    }

    /// Continuous branch `θ = ½ atan2(2G, Δε)`, in `(-π/2, π/2]`.
    pub fn mixing_angle(&self, x: f64) -> Result<f64, ModelError> {
        if self.is_degenerate(x) {
            return Err(ModelError::Degenerate { x });
        }
        Ok(0.5 * (2.0 * self.coupling(x)).atan2(self.splitting()))
    }

    /// Adiabatic surfaces `(Δ+, Δ-)` with `Δ+ ≥ Δ-`.
    pub fn adiabatic_eigenvalues(&self, x: f64) -> (f64, f64) {
        let half = self.half_gap(x);
        let mean = self.mean_energy();
        (mean + half, mean - half)
    }

    /// `sqrt((Δε/2)² + G²)`.
    pub fn half_gap(&self, x: f64) -> f64 {
        (0.5 * self.splitting()).hypot(self.coupling(x))
    }

    /// `g(x)² n / Δ`, the light-shift potential reached for `|Δ| ≫ G`.
    pub fn effective_potential_large_detuning(&self, x: f64) -> Result<f64, ModelError> {
        if self.detuning == 0.0 {
            return Err(ModelError::ZeroDetuning);
        }
        let g = self.mode.value(x);
        Ok(g * g * self.photon_number as f64 / self.detuning)
    }

    /// `∂θ = Δ √n ∂g / (Δ² + 4n g²)`.
    pub fn dtheta(&self, x: f64) -> Result<f64, ModelError> {
        if self.is_degenerate(x) {
            return Err(ModelError::Degenerate { x });
        }
        let d = self.splitting();
        let g = self.coupling(x);
        Ok(d * self.coupling_slope(x) / (d * d + 4.0 * g * g))
    }

    /// Exact x-derivative of [`ModelParams::dtheta`].
    pub fn d2theta(&self, x: f64) -> Result<f64, ModelError> {
        if self.is_degenerate(x) {
            return Err(ModelError::Degenerate { x });
        }
        let d = self.splitting();
        let g = self.coupling(x);
        let dg = self.coupling_slope(x);
        let d2g = self.coupling_curvature(x);
        let den = d * d + 4.0 * g * g;
        Ok(d * (d2g * den - 8.0 * g * dg * dg) / (den * den))
    }

    /// Slope of the adiabatic surfaces, `(∂Δ+, ∂Δ-) = ±G ∂G / sqrt((Δε/2)² + G²)`.
    pub fn surface_slopes(&self, x: f64) -> (f64, f64) {
        let half = self.half_gap(x);
        if half == 0.0 {
            return (0.0, 0.0);
        }
        let s = self.coupling(x) * self.coupling_slope(x) / half;
        (s, -s)
    }

    /// Curvature of the upper adiabatic surface; the lower one is its negative.
    pub fn surface_curvature(&self, x: f64) -> f64 {
        let half = self.half_gap(x);
        if half == 0.0 {
            return 0.0;
        }
        let g = self.coupling(x);
        let dg = self.coupling_slope(x);
        let d2g = self.coupling_curvature(x);
        ((dg * dg + g * d2g) * half * half - g * g * dg * dg) / (half * half * half)
    }
}

/// Orthogonal rotation `U(θ) = [[cos θ, sin θ], [-sin θ, cos θ]]`.
pub fn rotation(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, s], [-s, c]]
}

/// `U V Uᵀ` for a real symmetric 2×2 `V`.
pub fn rotate_symmetric(theta: f64, v: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let u = rotation(theta);
    let mut uv = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            uv[i][j] = u[i][0] * v[0][j] + u[i][1] * v[1][j];
        }
    }
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = uv[i][0] * u[j][0] + uv[i][1] * u[j][1];
        }
    }
    out
}
