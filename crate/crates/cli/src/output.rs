//! Result files. Every CSV starts with `#` comment lines carrying the tool
//! version, master seed and the fully resolved config, followed by a header row.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rild::spectral::{ConcentrationRow, GapRow};
use rild::{Ensemble, RunRecord, SweepResult};
use serde::Serialize;

use crate::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Writes files into one output directory, each prefixed by the same preamble.
pub struct OutputDir {
    dir: PathBuf,
    preamble: String,
}

impl OutputDir {
    pub fn create(dir: &Path, seed: u64, config: &impl Serialize) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let config = serde_json::to_string(config).map_err(|e| CliError::Io(e.to_string()))?;
        let preamble = format!("# rild {VERSION}\n# seed: {seed}\n# config: {config}\n");
        Ok(Self {
            dir: dir.to_path_buf(),
            preamble,
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn csv(&self, name: &str) -> Result<(csv::Writer<BufWriter<File>>, PathBuf), CliError> {
        let path = self.path(name);
        let file = File::create(&path).map_err(|e| CliError::io(&path, e))?;
        let mut buf = BufWriter::new(file);
        buf.write_all(self.preamble.as_bytes())
            .map_err(|e| CliError::io(&path, e))?;
        Ok((csv::Writer::from_writer(buf), path))
    }

    fn write_rows<R: IntoIterator<Item = Vec<String>>>(
        &self,
        name: &str,
        header: &[&str],
        rows: R,
    ) -> Result<PathBuf, CliError> {
        let (mut w, path) = self.csv(name)?;
        let err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn trace(&self, rec: &RunRecord) -> Result<PathBuf, CliError> {
        self.write_rows(
            "trace.csv",
            &["iter", "mean_V", "best_V", "evals", "tau", "resampled"],
            rec.iterations.iter().map(|s| {
                vec![
                    s.iteration.to_string(),
                    s.mean_potential.to_string(),
                    s.best_potential.to_string(),
                    s.evaluations.to_string(),
                    s.tau.to_string(),
                    u8::from(s.resampled).to_string(),
                ]
            }),
        )
    }

    /// `ensemble_<iter>.csv`: one row per particle, one column per coordinate.
    pub fn ensemble(&self, iteration: usize, e: &Ensemble) -> Result<PathBuf, CliError> {
        let header: Vec<String> = (0..e.dim()).map(|i| format!("x{i}")).collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        self.write_rows(
            &format!("ensemble_{iteration}.csv"),
            &header,
            e.particles()
                .map(|x| x.iter().map(|v| v.to_string()).collect()),
        )
    }

    pub fn passrate(&self, results: &[SweepResult]) -> Result<PathBuf, CliError> {
        self.write_rows(
            "passrate.csv",
            &[
                "algorithm",
                "tau",
                "sigma",
                "trials",
                "passes",
                "diverged",
                "rate",
            ],
            results.iter().flat_map(|r| {
                let name = match r.algorithm {
                    rild::SweepAlgorithm::Rild => "rild",
                    rild::SweepAlgorithm::Gld => "gld",
                };
                r.cells.iter().map(move |c| {
                    vec![
                        name.to_string(),
                        c.tau.to_string(),
                        c.sigma.to_string(),
                        c.trials.to_string(),
                        c.passes.to_string(),
                        c.diverged.to_string(),
                        c.rate.to_string(),
                    ]
                })
            }),
        )
    }

    pub fn gaps(&self, rows: &[GapRow]) -> Result<PathBuf, CliError> {
        self.write_rows(
            "gap.csv",
            &["param", "lambda0", "lambda1", "gap"],
            rows.iter().map(|r| {
                vec![
                    r.param.to_string(),
                    r.lambda0.to_string(),
                    r.lambda1.to_string(),
                    r.gap.to_string(),
                ]
            }),
        )
    }

    pub fn concentration(&self, rows: &[ConcentrationRow]) -> Result<PathBuf, CliError> {
        self.write_rows(
            "concentration.csv",
            &["param", "lambda0", "ratio"],
            rows.iter().map(|r| {
                vec![
                    r.sigma.to_string(),
                    r.lambda0.to_string(),
                    r.ratio.to_string(),
                ]
            }),
        )
    }

    /// Grid function with header `x,<value_name>`.
    pub fn grid_function(
        &self,
        name: &str,
        value_name: &str,
        nodes: &[f64],
        values: &[f64],
    ) -> Result<PathBuf, CliError> {
        self.columns(name, &["x", value_name], &[nodes, values])
    }

    /// Equal-length columns written side by side.
    pub fn columns(
        &self,
        name: &str,
        header: &[&str],
        cols: &[&[f64]],
    ) -> Result<PathBuf, CliError> {
        let len = cols.first().map_or(0, |c| c.len());
        self.write_rows(
            name,
            header,
            (0..len).map(|i| cols.iter().map(|c| c[i].to_string()).collect()),
        )
    }

    pub fn meta(&self, meta: &impl Serialize) -> Result<PathBuf, CliError> {
        let path = self.path("meta.json");
        let mut text =
            serde_json::to_string_pretty(meta).map_err(|e| CliError::Io(e.to_string()))?;
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
