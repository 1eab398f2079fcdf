//! One case end to end: evolve, observe, fit, predict, and the CSV files
//! that carry the results.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::amplitude::{Branch, Interaction};
use crate::analysis::{
    extract_branch, observe, BranchKinematics, BranchTrace, Marginals, Observation, Source,
};
use crate::config::{derive, validate, CaseConfig, DerivedParams, Violation};
use crate::error::{Error, Result};
use crate::evolve::{DensityWriter, Evolver};
use crate::initial::{coefficient_field, left_mover_diagnostic, SpectralGrid};
use crate::stationary::{predict_with, KmaxRule, SpPrediction};

/// Stationary-phase velocities smaller than this are treated as zero when
/// forming relative differences; it is the size of the velocity error the
/// `K, k` grid spacing can produce at α = 1/3.
pub const VELOCITY_FLOOR: f64 = 1e-4;

pub struct Experiment {
    pub name: String,
    pub config: CaseConfig,
    pub derived: DerivedParams,
    pub left_mover_ratio: f64,
    evolver: Evolver,
}

impl Experiment {
    pub fn new(name: &str, config: CaseConfig) -> Result<Self> {
        config.check()?;
        let derived = derive(&config)?;
        let field = coefficient_field(&config, &SpectralGrid::from_config(&config))?;
        let left_mover_ratio = left_mover_diagnostic(&field);
        let evolver = Evolver::new(&field, Interaction::from_config(&config))?;
        Ok(Experiment {
            name: name.to_string(),
            config,
            derived,
            left_mover_ratio,
            evolver,
        })
    }

    pub fn evolver(&self) -> &Evolver {
        &self.evolver
    }

    pub fn observe(&self, tau: f64) -> Result<Observation> {
        Ok(observe(&self.evolver.snapshot(tau)?))
    }

    /// Observations at every fit-window time, in order.
    pub fn trace(&self, mut progress: impl FnMut(&Observation)) -> Result<BranchTrace> {
        let mut trace = BranchTrace::default();
        for tau in self.config.fit_taus() {
            let o = self.observe(tau)?;
            progress(&o);
            trace.push(&o);
        }
        Ok(trace)
    }

    pub fn run(&self, rule: KmaxRule, progress: impl FnMut(&Observation)) -> Result<CaseRun> {
        let trace = self.trace(progress)?;
        let interaction = Interaction::from_config(&self.config);
        let predict = |b| predict_with(&self.config, &interaction, b, rule);
        Ok(CaseRun {
            name: self.name.clone(),
            config: self.config.clone(),
            derived: self.derived.clone(),
            numerical: [
                extract_branch(&trace, &self.config, Branch::T),
                extract_branch(&trace, &self.config, Branch::R),
            ],
            predicted: [predict(Branch::T)?, predict(Branch::R)?],
            trace,
            left_mover_ratio: self.left_mover_ratio,
            violations: validate(&self.config),
        })
    }

    /// Streams `|Ψ(τ)|²` into `density` and returns the lab-frame marginals
    /// from the same pass.
    pub fn write_snapshot<W: Write>(&self, tau: f64, density: W) -> Result<Marginals> {
        let snap = self.evolver.snapshot(tau)?;
        let grid = snap.grid();
        let mut writer = DensityWriter::new(density, grid, tau)?;
        let mut marginals = Marginals::new(&grid);
        let mut failure = None;
        snap.for_each_row(|m, row| {
            marginals.add_row(&grid, self.config.alpha, m, row);
            if failure.is_none() {
                failure = writer.write_row(row).err();
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        writer.finish()?;
        Ok(marginals)
    }
}

/// Everything a finished case produced.
#[derive(Debug, Clone)]
pub struct CaseRun {
    pub name: String,
    pub config: CaseConfig,
    pub derived: DerivedParams,
    pub trace: BranchTrace,
    /// Fitted kinematics for `[T, R]`.
    pub numerical: [Result<BranchKinematics>; 2],
    pub predicted: [SpPrediction; 2],
    pub left_mover_ratio: f64,
    pub violations: Vec<Violation>,
}

impl CaseRun {
    /// Mean, minimum and maximum of `T(τ)` over the fit window, in percent.
    pub fn transmission_percent(&self) -> (f64, f64, f64) {
        transmission_percent(&self.trace.t_norm)
    }

    pub fn kinematics_records(&self) -> Vec<KinematicsRecord> {
        let mut out = Vec::new();
        for (num, sp) in self.numerical.iter().zip(&self.predicted) {
            let sp = sp.kinematics();
            if let Ok(num) = num {
                out.push(KinematicsRecord::numerical(&self.name, num, &sp));
            }
            out.push(KinematicsRecord::plain(&self.name, &sp));
        }
        out
    }

    pub fn prediction_records(&self) -> Vec<KinematicsRecord> {
        self.predicted
            .iter()
            .map(|p| KinematicsRecord::plain(&self.name, &p.kinematics()))
            .collect()
    }
}

pub fn transmission_percent(t_norm: &[f64]) -> (f64, f64, f64) {
    let n = t_norm.len() as f64;
    let mean = t_norm.iter().sum::<f64>() / n;
    let min = t_norm.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = t_norm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (100.0 * mean, 100.0 * min, 100.0 * max)
}

/// `|a - b| / |b|` in percent.
pub fn relative_difference_pct(a: f64, b: f64) -> f64 {
    100.0 * (a - b).abs() / b.abs()
}

/// One row of `kinematics.csv` / `predictions.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicsRecord {
    pub case: String,
    pub branch: String,
    pub source: String,
    pub dx_b: f64,
    pub v_b: f64,
    pub dx_p: f64,
    pub v_p: f64,
    pub fit_rms: Option<f64>,
    /// Relative difference to the stationary-phase value, numerical rows only.
    pub delta_dx_b_pct: Option<f64>,
    pub delta_v_b_pct: Option<f64>,
}

impl KinematicsRecord {
    fn plain(case: &str, k: &BranchKinematics) -> Self {
        KinematicsRecord {
            case: case.to_string(),
            branch: k.branch.to_string(),
            source: k.source.to_string(),
            dx_b: k.dx_b,
            v_b: k.v_b,
            dx_p: k.dx_p,
            v_p: k.v_p,
            fit_rms: k.fit.map(|f| f.rms_b),
            delta_dx_b_pct: None,
            delta_v_b_pct: None,
        }
    }

    fn numerical(case: &str, k: &BranchKinematics, sp: &BranchKinematics) -> Self {
        KinematicsRecord {
            delta_dx_b_pct: Some(relative_difference_pct(k.dx_b, sp.dx_b)),
            delta_v_b_pct: (sp.v_b.abs() >= VELOCITY_FLOOR)
                .then(|| relative_difference_pct(k.v_b, sp.v_b)),
            ..KinematicsRecord::plain(case, k)
        }
    }

    pub fn branch(&self) -> Result<Branch> {
        self.branch.parse()
    }

    pub fn source(&self) -> Result<Source> {
        self.source.parse()
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_kinematics_csv<W: Write>(out: W, records: &[KinematicsRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_kinematics_csv<R: Read>(input: R) -> Result<Vec<KinematicsRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormRecord {
    pub tau: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct TraceRecord {
    tau: f64,
    #[serde(rename = "xb_T")]
    xb_t: Option<f64>,
    #[serde(rename = "xb_R")]
    xb_r: Option<f64>,
    #[serde(rename = "xp_T")]
    xp_t: Option<f64>,
    #[serde(rename = "xp_R")]
    xp_r: Option<f64>,
}

pub fn write_norms_csv<W: Write>(out: W, trace: &BranchTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..trace.len() {
        w.serialize(NormRecord {
            tau: trace.taus[i],
            t: trace.t_norm[i],
            r: trace.r_norm[i],
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_norms_csv<R: Read>(input: R) -> Result<Vec<NormRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(csv_error))
        .collect()
}

pub fn write_trace_csv<W: Write>(out: W, trace: &BranchTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for i in 0..trace.len() {
        w.serialize(TraceRecord {
            tau: trace.taus[i],
            xb_t: trace.xb_t[i],
            xb_r: trace.xb_r[i],
            xp_t: trace.xp_t[i],
            xp_r: trace.xp_r[i],
        })
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Two columns per particle: bin centre and probability in the bin.
pub fn write_marginals_csv<W: Write>(mut out: W, m: &Marginals) -> Result<()> {
    writeln!(out, "x,P_p,P_b")?;
    for i in 0..m.projectile.len() {
        if m.projectile[i] == 0.0 && m.barrier[i] == 0.0 {
            continue;
        }
        writeln!(
            out,
            "{},{:e},{:e}",
            m.bin_center(i),
            m.projectile[i],
            m.barrier[i]
        )?;
    }
    Ok(())
}
