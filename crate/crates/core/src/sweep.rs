//! Sweep configuration, result tables, CSV output and curve metrics.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::emulator::{phase_sweep, EmulationSettings, DEFAULT_GRID_SUBSTEPS};
use crate::error::{Error, Result};
use crate::jumptime::QuadratureRule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Emulated,
    Analytic,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Emulated => "emulated",
            Method::Analytic => "analytic",
        }
    }
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}

/// 39 points from 0.1 to 2.0; the point at `w = v = 1` is skipped by the sweep.
pub fn default_w_grid() -> Vec<f64> {
    linspace(0.1, 2.0, 39)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub v: f64,
    pub gamma: f64,
    pub w_grid: Vec<f64>,
    pub n_cir: usize,
    pub delta_p: f64,
    pub delta_q: f64,
    pub t_final: f64,
    pub n_final: usize,
    pub ancilla_dim: usize,
    pub seed: u64,
    pub method: Method,
    pub corrected_sum: bool,
    pub include_singular: bool,
    /// Rule for the wall-time integrals over the measurement grid.
    pub rule: QuadratureRule,
    /// Initial RK4 substeps per measurement interval.
    pub substeps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            v: 1.0,
            gamma: 1.0,
            w_grid: default_w_grid(),
            n_cir: 500,
            delta_p: 0.01,
            delta_q: 0.0,
            t_final: 300.0,
            n_final: 300,
            ancilla_dim: 3,
            seed: 0,
            method: Method::Emulated,
            corrected_sum: false,
            include_singular: false,
            rule: QuadratureRule::LeftRiemann,
            substeps: DEFAULT_GRID_SUBSTEPS,
        }
    }
}

impl SweepConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.w_grid.is_empty() {
            return bad("w grid is empty".into());
        }
        if let Some(w) = self.w_grid.iter().find(|w| !w.is_finite()) {
            return bad(format!("w grid contains {w}"));
        }
        if !self.v.is_finite() {
            return bad(format!("v = {}", self.v));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.n_cir < 3 {
            return bad(format!("n_cir must be ≥ 3, got {}", self.n_cir));
        }
        if !(self.delta_p > 0.0 && self.delta_p.is_finite()) {
            return bad(format!("delta_p must be positive, got {}", self.delta_p));
        }
        if !self.delta_q.is_finite() {
            return bad(format!("delta_q = {}", self.delta_q));
        }
        if self.ancilla_dim != 2 && self.ancilla_dim != 3 {
            return bad(format!("ancilla_dim must be 2 or 3, got {}", self.ancilla_dim));
        }
        self.emulation_settings().map(|_| ())
    }

    pub fn emulation_settings(&self) -> Result<EmulationSettings> {
        let s = EmulationSettings {
            t_final: self.t_final,
            n_final: self.n_final,
            rule: self.rule,
            substeps: self.substeps,
        };
        s.validate()?;
        Ok(s)
    }

    /// Sweep over `self.w_grid`.
    pub fn run(&self) -> Result<PhaseResult> {
        phase_sweep(&self.w_grid, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseRow {
    pub w: f64,
    pub t_re: f64,
    pub t_im: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseResult {
    pub rows: Vec<PhaseRow>,
    /// Grid points skipped as singular.
    pub skipped: Vec<f64>,
    pub settings: SweepConfig,
    pub duration_secs: f64,
    pub version: String,
}

pub const CSV_HEADER: &str = "w,T_re,T_im,n_cir,delta_p,delta_q,t_final,n_final,ancilla_dim,method";

/// Locale-free rendering with 12 significant digits.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..12).contains(&mag) {
        let decimals = (11 - mag).max(0) as usize;
        format!("{x:.decimals$}")
    } else {
        format!("{x:.11e}")
    }
}

impl PhaseResult {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let s = &self.settings;
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{}",
                fmt_sig(r.w),
                fmt_sig(r.t_re),
                fmt_sig(r.t_im),
                s.n_cir,
                fmt_sig(s.delta_p),
                fmt_sig(s.delta_q),
                fmt_sig(s.t_final),
                s.n_final,
                s.ancilla_dim,
                s.method.as_str()
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is ASCII")
    }

    pub fn re_curve(&self) -> Vec<(f64, f64)> {
        self.rows.iter().map(|r| (r.w, r.t_re)).collect()
    }
}

/// Parameter varied by a convergence study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Axis {
    Dp,
    Dq,
    Tfinal,
    Nfinal,
    Ncir,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Dp => "dp",
            Axis::Dq => "dq",
            Axis::Tfinal => "tfinal",
            Axis::Nfinal => "nfinal",
            Axis::Ncir => "ncir",
        }
    }

    pub fn apply(self, cfg: &mut SweepConfig, value: f64) -> Result<()> {
        let as_count = |x: f64| -> Result<usize> {
            if x >= 1.0 && x.fract() == 0.0 {
                Ok(x as usize)
            } else {
                Err(Error::InvalidArgument(format!("{} needs a positive integer, got {x}", self.as_str())))
            }
        };
        match self {
            Axis::Dp => cfg.delta_p = value,
            Axis::Dq => cfg.delta_q = value,
            Axis::Tfinal => cfg.t_final = value,
            Axis::Nfinal => cfg.n_final = as_count(value)?,
            Axis::Ncir => cfg.n_cir = as_count(value)?,
        }
        Ok(())
    }
}

/// One sweep of `base.w_grid` per value of `axis`.
pub fn convergence(axis: Axis, values: &[f64], base: &SweepConfig) -> Result<Vec<(f64, PhaseResult)>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("no convergence values given".into()));
    }
    values
        .iter()
        .map(|&value| {
            let mut cfg = base.clone();
            axis.apply(&mut cfg, value)?;
            Ok((value, cfg.run()?))
        })
        .collect()
}

/// Mean `Re T` for `w ≥ upper_from` minus mean `Re T` for `w ≤ lower_to`.
pub fn jump_height(rows: &[PhaseRow], lower_to: f64, upper_from: f64) -> Option<f64> {
    let mean = |it: Vec<f64>| (!it.is_empty()).then(|| it.iter().sum::<f64>() / it.len() as f64);
    let lower = mean(rows.iter().filter(|r| r.w <= lower_to).map(|r| r.t_re).collect())?;
    let upper = mean(rows.iter().filter(|r| r.w >= upper_from).map(|r| r.t_re).collect())?;
    Some(upper - lower)
}

/// Largest decrease of `Re T` between any point and a later (larger-w)
/// point; zero for a monotonically non-decreasing curve.
pub fn max_drawdown(rows: &[PhaseRow]) -> f64 {
    let mut sorted: Vec<&PhaseRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.w.total_cmp(&b.w));
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for r in sorted {
        peak = peak.max(r.t_re);
        worst = worst.max(peak - r.t_re);
    }
    worst
}

/// Largest `|Re T_a − Re T_b|` over the `w` values both curves share.
pub fn max_deviation(a: &[PhaseRow], b: &[PhaseRow]) -> f64 {
    a.iter()
        .filter_map(|ra| b.iter().find(|rb| (rb.w - ra.w).abs() < 1e-12).map(|rb| (ra.t_re - rb.t_re).abs()))
        .fold(0.0, f64::max)
}
