use std::io::Write;
use std::path::{Path, PathBuf};

use adiabatica::frame::AdiabaticFrame;
use adiabatica::grid::SpinorField;
use adiabatica::metrics::{a0_max_locus, approx_a0, approx_a0_with_curvature, MetricsError};
use adiabatica::propagator::{default_time_step, run as run_scenario, run_with, Scenario, Trajectory};
use adiabatica::semiclassical::{
    classical_trajectories, inverse_coupling, reduce_by_substitution, signed_time_adiabaticity, time_adiabaticity,
    ClassicalTrace, InversionFormula,
};
use anyhow::{Context, Result};
use rayon::prelude::*;

use crate::config::{AbscissaChoice, Config};
use crate::output;
use crate::Experiment;

pub fn run(experiment: Experiment, config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    match experiment {
        Experiment::A0Map => a0_map(config, dir),
        Experiment::MaxLocus => max_locus(config, dir),
        Experiment::FidelityMap => fidelity_map(config, dir),
        Experiment::Atrace => atrace(config, dir),
        Experiment::EffectiveModel => effective_model(config, dir),
        Experiment::Snapshot => snapshot(config, dir),
    }
}

/// Singular points become `inf`; anything else is an error.
fn a0_cell(r: Result<f64, MetricsError>) -> Result<f64> {
    match r {
        Ok(v) => Ok(v),
        Err(MetricsError::Singular { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e.into()),
    }
}

fn a0_map(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let deltas = config.detunings()?;
    let xs = config.positions.as_ref().context("missing `positions` block")?.values()?;
    let p0 = config.state()?.p0;
    let columns = deltas
        .par_iter()
        .map(|&d| {
            let params = config.params(d)?;
            xs.iter().map(|&x| a0_cell(approx_a0(&params, x, p0))).collect()
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let (path, mut out) = output::create(dir, "a0_map.csv", Experiment::A0Map, config)?;
    output::matrix(&mut out, "x", &deltas, &xs, &columns)?;
    out.flush()?;
    Ok(vec![path])
}

fn max_locus(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let deltas = config.detunings()?;
    let p0 = config.state()?.p0;
    let (window, scan) = match &config.locus {
        Some(l) => ((l.x_min, l.x_max), l.scan_points),
        None => {
            // Ten mode widths cover the outer maximum down to Δ ~ 1e-4.
            let width = match config.mode()? {
                adiabatica::ModeShape::Gaussian { width, .. } => width,
                _ => unreachable!("checked at load time"),
            };
            ((0.0, 10.0 * width), 5001)
        }
    };
    let base = config.params(deltas[0])?;
    let locus = deltas
        .par_iter()
        .map(|&d| Ok(a0_max_locus(&base, p0, &[d], window, scan)?[0]))
        .collect::<Result<Vec<(f64, f64)>>>()?;
    let (path, mut out) = output::create(dir, "max_locus.csv", Experiment::MaxLocus, config)?;
    writeln!(out, "delta,x_max,a0_max")?;
    for (d, x) in locus {
        let a0 = a0_cell(approx_a0(&config.params(d)?, x, p0))?;
        output::row(&mut out, [d, x, a0])?;
    }
    out.flush()?;
    Ok(vec![path])
}

/// Scenario for one detuning. All detunings share the sampling times
/// `k T / samples`; the step is the largest one not above `run.dt` (or the
/// default estimate) that divides the sampling interval.
fn scenario(config: &Config, delta: f64) -> Result<Scenario> {
    let params = config.params(delta)?;
    let grid = config.grid()?;
    let packet = config.packet()?;
    let run = config.run()?;
    let t_final = config.t_final()?;
    let dt_max = match run.dt {
        Some(dt) => dt,
        None => {
            let frame = AdiabaticFrame::new(&params, &grid)?;
            default_time_step(&frame, params.mass, &packet)
        }
    };
    let interval = t_final / run.samples as f64;
    let stride = ((interval / dt_max).ceil() as usize).max(1);
    Ok(Scenario {
        params,
        grid,
        packet,
        initial: config.initial()?,
        t_final,
        dt: interval / stride as f64,
        stride,
    })
}

fn sample_times(config: &Config) -> Result<Vec<f64>> {
    let t_final = config.t_final()?;
    let n = config.run()?.samples;
    Ok((0..=n).map(|k| t_final * k as f64 / n as f64).collect())
}

fn simulate(config: &Config, delta: f64) -> Result<Trajectory> {
    let s = scenario(config, delta)?;
    let traj = run_scenario(&s).with_context(|| format!("run at detuning {delta}"))?;
    anyhow::ensure!(
        traj.samples.len() == config.run()?.samples + 1,
        "run at detuning {delta}: expected {} samples, got {}",
        config.run()?.samples + 1,
        traj.samples.len()
    );
    Ok(traj)
}

fn classical_x(config: &Config, t: f64) -> Result<f64> {
    let s = config.state()?;
    Ok(s.x0 + s.p0 * t / config.model.mass)
}

fn fidelity_map(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let deltas = config.detunings()?;
    let trajs = deltas
        .par_iter()
        .map(|&d| simulate(config, d))
        .collect::<Result<Vec<Trajectory>>>()?;
    let times = sample_times(config)?;
    let fid: Vec<Vec<f64>> = trajs
        .iter()
        .map(|t| t.samples.iter().map(|s| s.fidelity.norm()).collect())
        .collect();
    let mean_x: Vec<Vec<f64>> = trajs
        .iter()
        .map(|t| t.samples.iter().map(|s| s.mean_x).collect())
        .collect();
    let (first, rows) = match config.abscissa {
        AbscissaChoice::Measured => ("t", times.clone()),
        AbscissaChoice::Classical => (
            "x",
            times.iter().map(|&t| classical_x(config, t)).collect::<Result<Vec<_>>>()?,
        ),
    };
    let (p1, mut out) = output::create(dir, "fidelity_map.csv", Experiment::FidelityMap, config)?;
    output::matrix(&mut out, first, &deltas, &rows, &fid)?;
    out.flush()?;
    let (p2, mut out) = output::create(dir, "mean_x_map.csv", Experiment::FidelityMap, config)?;
    output::matrix(&mut out, "t", &deltas, &times, &mean_x)?;
    out.flush()?;
    Ok(vec![p1, p2])
}

fn atrace(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let delta = config.single_detuning()?;
    let params = config.params(delta)?;
    let p0 = config.state()?.p0;
    let traj = simulate(config, delta)?;
    let times = sample_times(config)?;
    let (p1, mut out) = output::create(dir, "atrace.csv", Experiment::Atrace, config)?;
    writeln!(out, "t,mean_x,a_t,a0,a0_d2theta,a_t_first_order,fidelity_abs")?;
    for (t, s) in times.iter().zip(&traj.samples) {
        let x = classical_x(config, *t)?;
        output::row(
            &mut out,
            [
                *t,
                s.mean_x,
                s.a_t.total(),
                a0_cell(approx_a0(&params, x, p0))?,
                a0_cell(approx_a0_with_curvature(&params, x, p0))?,
                s.a_t_first_order.total(),
                s.fidelity.norm(),
            ],
        )?;
    }
    out.flush()?;
    let (p2, mut out) = output::create(dir, "trajectory.csv", Experiment::Atrace, config)?;
    traj.write_csv(&mut out)?;
    out.flush()?;
    Ok(vec![p1, p2])
}

fn effective_model(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let delta = config.single_detuning()?;
    let params = config.params(delta)?;
    let state = config.state()?;
    let times = sample_times(config)?;
    let model = reduce_by_substitution(&params, state.p0, state.x0)?;
    let coupling: Vec<f64> = times.iter().map(|&t| model.coupling(t)).collect();
    let signed = times
        .iter()
        .map(|&t| signed_time_adiabaticity(&model, t))
        .collect::<Result<Vec<_>, _>>()?;
    let rate = times
        .iter()
        .map(|&t| time_adiabaticity(&model, t))
        .collect::<Result<Vec<_>, _>>()?;
    let rebuilt = |formula: InversionFormula| -> Vec<f64> {
        match inverse_coupling(&times, &signed, model.delta, formula) {
            Ok(m) => times.iter().map(|&t| m.coupling(t)).collect(),
            Err(e) => {
                eprintln!("warning: {formula:?} inversion failed: {e}");
                vec![f64::NAN; times.len()]
            }
        }
    };
    let back = rebuilt(InversionFormula::BackSubstituted);
    let alt = rebuilt(InversionFormula::Alternative);
    let (p1, mut out) = output::create(dir, "effective_model.csv", Experiment::EffectiveModel, config)?;
    writeln!(out, "# delta={}", adiabatica::csv::fmt_f64(model.delta))?;
    writeln!(out, "t,x,G,rate,rate_signed,G_inverse,G_inverse_alt")?;
    for k in 0..times.len() {
        output::row(
            &mut out,
            [
                times[k],
                classical_x(config, times[k])?,
                coupling[k],
                rate[k],
                signed[k],
                back[k],
                alt[k],
            ],
        )?;
    }
    out.flush()?;

    // Classical motion on each surface from the packet centre.
    let t_final = times[times.len() - 1];
    let interval = t_final / config.run()?.samples as f64;
    let sub = match config.run()?.dt {
        Some(dt) => ((interval / dt).ceil() as usize).max(1),
        None => 10,
    };
    let traces = classical_trajectories(
        &params,
        [(state.x0, state.p0); 2],
        t_final,
        interval / sub as f64,
    )?;
    let thin = |tr: &ClassicalTrace| ClassicalTrace {
        channel: tr.channel,
        t: tr.t.iter().step_by(sub).copied().collect(),
        x: tr.x.iter().step_by(sub).copied().collect(),
        p: tr.p.iter().step_by(sub).copied().collect(),
        energy: tr.energy.iter().step_by(sub).copied().collect(),
    };
    let traces = [thin(&traces[0]), thin(&traces[1])];
    let (p2, mut out) = output::create(dir, "trajectories.csv", Experiment::EffectiveModel, config)?;
    adiabatica::semiclassical::write_trajectories_csv(&traces, &mut out)?;
    out.flush()?;
    Ok(vec![p1, p2])
}

fn snapshot(config: &Config, dir: &Path) -> Result<Vec<PathBuf>> {
    let delta = config.single_detuning()?;
    let s = scenario(config, delta)?;
    let total = s.steps();
    let mut last: Option<(SpinorField, SpinorField)> = None;
    run_with(&s, |view| {
        if view.step == total {
            last = Some((view.exact.clone(), view.reference.clone()));
        }
    })
    .with_context(|| format!("run at detuning {delta}"))?;
    let (exact, reference) = last.context("run produced no final sample")?;
    let (p1, mut out) = output::create(dir, "snapshot_exact.csv", Experiment::Snapshot, config)?;
    writeln!(out, "# t={} basis=bare", adiabatica::csv::fmt_f64(s.t_final))?;
    exact.write_csv(&mut out)?;
    out.flush()?;
    let (p2, mut out) = output::create(dir, "snapshot_reference.csv", Experiment::Snapshot, config)?;
    writeln!(out, "# t={} basis=adiabatic", adiabatica::csv::fmt_f64(s.t_final))?;
    reference.write_csv(&mut out)?;
    out.flush()?;
    Ok(vec![p1, p2])
}
