//! The local diagonalization of the two-level potential sampled on a grid.

use std::sync::Arc;

use crate::grid::Grid;
use crate::model::{ModelError, ModelParams};

/// `θ`, its derivatives and the adiabatic surfaces on every grid point.
///
/// At exactly degenerate points (`Δ = 0` and `G = 0`) the angle and its
/// derivatives are set to zero and the index is listed in
/// [`AdiabaticFrame::degenerate_points`].
#[derive(Debug, Clone)]
pub struct AdiabaticFrame {
    grid: Arc<Grid>,
    theta: Vec<f64>,
    dtheta: Vec<f64>,
    d2theta: Vec<f64>,
    coupling: Vec<f64>,
    upper: Vec<f64>,
    lower: Vec<f64>,
    mean_energy: f64,
    degenerate: Vec<usize>,
}

impl AdiabaticFrame {
    pub fn new(params: &ModelParams, grid: &Arc<Grid>) -> Result<Self, ModelError> {
        params.validate()?;
        let n = grid.len();
        let mut frame = Self {
            grid: grid.clone(),
            theta: Vec::with_capacity(n),
            dtheta: Vec::with_capacity(n),
            d2theta: Vec::with_capacity(n),
            coupling: Vec::with_capacity(n),
            upper: Vec::with_capacity(n),
            lower: Vec::with_capacity(n),
            mean_energy: params.mean_energy(),
            degenerate: Vec::new(),
        };
        for (i, &x) in grid.positions().iter().enumerate() {
            let (up, lo) = params.adiabatic_eigenvalues(x);
            frame.coupling.push(params.coupling(x));
            frame.upper.push(up);
            frame.lower.push(lo);
            match params.mixing_angle(x) {
                Ok(th) => {
                    frame.theta.push(th);
                    frame.dtheta.push(params.dtheta(x)?);
                    frame.d2theta.push(params.d2theta(x)?);
                }
                Err(ModelError::Degenerate { .. }) => {
                    frame.theta.push(0.0);
                    frame.dtheta.push(0.0);
                    frame.d2theta.push(0.0);
                    frame.degenerate.push(i);
                }
                Err(e) => return Err(e),
            }
        }
        Ok(frame)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn dtheta(&self) -> &[f64] {
        &self.dtheta
    }

    pub fn d2theta(&self) -> &[f64] {
        &self.d2theta
    }

    pub fn coupling(&self) -> &[f64] {
        &self.coupling
    }

    pub fn upper_surface(&self) -> &[f64] {
        &self.upper
    }

    pub fn lower_surface(&self) -> &[f64] {
        &self.lower
    }

    /// `ε̄`, constant for a given frame case.
    pub fn mean_energy(&self) -> f64 {
        self.mean_energy
    }

    pub fn degenerate_points(&self) -> &[usize] {
        &self.degenerate
    }

    /// Largest `|Δ±|` on the grid.
    pub fn max_surface_magnitude(&self) -> f64 {
        self.upper
            .iter()
            .chain(&self.lower)
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}
