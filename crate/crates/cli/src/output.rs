use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use adiabatica::csv::fmt_f64;
use anyhow::{Context, Result};

use crate::config::Config;
use crate::Experiment;

/// Create `dir/name` and write the comment header: version, experiment and
/// the effective configuration as one line of JSON.
pub fn create(dir: &Path, name: &str, experiment: Experiment, config: &Config) -> Result<(PathBuf, BufWriter<File>)> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut out = BufWriter::new(file);
    writeln!(out, "# adiabatica {}", adiabatica::VERSION)?;
    writeln!(out, "# experiment: {}", experiment.name())?;
    writeln!(out, "# config: {}", serde_json::to_string(config)?)?;
    Ok((path, out))
}

pub fn row<W: Write>(out: &mut W, values: impl IntoIterator<Item = f64>) -> io::Result<()> {
    let line: Vec<String> = values.into_iter().map(fmt_f64).collect();
    writeln!(out, "{}", line.join(","))
}

/// Header `first,<Δ_1>,...` then one row per entry of `rows`, with
/// `columns[j][i]` in row `i`, column `j`.
pub fn matrix<W: Write>(out: &mut W, first: &str, deltas: &[f64], rows: &[f64], columns: &[Vec<f64>]) -> io::Result<()> {
    let mut header = vec![first.to_string()];
    header.extend(deltas.iter().map(|&d| fmt_f64(d)));
    writeln!(out, "{}", header.join(","))?;
    for (i, &r) in rows.iter().enumerate() {
        row(out, std::iter::once(r).chain(columns.iter().map(|c| c[i])))?;
    }
    Ok(())
}
