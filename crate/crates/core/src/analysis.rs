//! Lab-frame observables evaluated directly on the `(X, x)` grid, using
//! `x_b = X - αx` and `x_p = X + βx` as pointwise weights.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::amplitude::{phase_derivative, Branch};
use crate::config::CaseConfig;
use crate::error::{Error, Result};
use crate::evolve::{in_gap, Snapshot, WaveField};
use crate::initial::SpectralGrid;

/// Branches with less probability than this have no conditional means.
pub const MIN_BRANCH_NORM: f64 = 1e-6;

/// Minimum number of samples accepted by [`extract_kinematics`].
pub const MIN_FIT_SAMPLES: usize = 5;

/// Probability-weighted sums over one branch half-plane.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Sums {
    norm: f64,
    xb: f64,
    xp: f64,
}

impl Sums {
    fn add(&mut self, other: &Sums) {
        self.norm += other.norm;
        self.xb += other.xb;
        self.xp += other.xp;
    }

    fn mean_b(&self) -> Option<f64> {
        (self.norm > MIN_BRANCH_NORM).then(|| self.xb / self.norm)
    }

    fn mean_p(&self) -> Option<f64> {
        (self.norm > MIN_BRANCH_NORM).then(|| self.xp / self.norm)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct RowSums {
    transmitted: Sums,
    reflected: Sums,
}

impl RowSums {
    fn of_row(grid: &SpectralGrid, alpha: f64, d: f64, m: usize, row: &[Complex64]) -> Self {
        let big_x = grid.position(m);
        let cell = grid.dx() * grid.dx();
        let mut out = RowSums::default();
        for (i, v) in row.iter().enumerate() {
            let x = grid.position(i);
            if in_gap(x, d) {
                continue;
            }
            let w = v.norm_sqr() * cell;
            let target = if x < 0.0 {
                &mut out.reflected
            } else {
                &mut out.transmitted
            };
            target.norm += w;
            target.xb += w * (big_x - alpha * x);
            target.xp += w * (big_x + (1.0 - alpha) * x);
        }
        out
    }

    fn add(&mut self, other: &RowSums) {
        self.transmitted.add(&other.transmitted);
        self.reflected.add(&other.reflected);
    }
}

/// Branch norms and conditional mean positions at one τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub tau: f64,
    pub t_norm: f64,
    pub r_norm: f64,
    pub xb_t: Option<f64>,
    pub xb_r: Option<f64>,
    pub xp_t: Option<f64>,
    pub xp_r: Option<f64>,
}

impl Observation {
    fn from_sums(tau: f64, s: &RowSums) -> Self {
        Observation {
            tau,
            t_norm: s.transmitted.norm,
            r_norm: s.reflected.norm,
            xb_t: s.transmitted.mean_b(),
            xb_r: s.reflected.mean_b(),
            xp_t: s.transmitted.mean_p(),
            xp_r: s.reflected.mean_p(),
        }
    }
}

fn reduce(rows: impl IntoIterator<Item = RowSums>) -> RowSums {
    let mut total = RowSums::default();
    for r in rows {
        total.add(&r);
    }
    total
}

fn field_sums(field: &WaveField) -> RowSums {
    reduce(
        (0..field.grid.points)
            .map(|m| RowSums::of_row(&field.grid, field.alpha, field.d, m, field.row(m))),
    )
}

/// `(T, R)`: probability in `x > d/2` and in `x < -d/2`.
pub fn branch_norms(field: &WaveField) -> (f64, f64) {
    let s = field_sums(field);
    (s.transmitted.norm, s.reflected.norm)
}

/// Conditional means `x̄_b,T, x̄_b,R, x̄_p,T, x̄_p,R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionalMeans {
    pub xb_t: Option<f64>,
    pub xb_r: Option<f64>,
    pub xp_t: Option<f64>,
    pub xp_r: Option<f64>,
}

pub fn conditional_means(field: &WaveField) -> ConditionalMeans {
    let o = observe_field(field);
    ConditionalMeans {
        xb_t: o.xb_t,
        xb_r: o.xb_r,
        xp_t: o.xp_t,
        xp_r: o.xp_r,
    }
}

pub fn observe_field(field: &WaveField) -> Observation {
    Observation::from_sums(field.tau, &field_sums(field))
}

/// Same as [`observe_field`] but streams the rows of a snapshot. Row sums
/// are reduced in row order, so the result does not depend on threading.
pub fn observe(snapshot: &Snapshot<'_>) -> Observation {
    let grid = snapshot.grid();
    let (alpha, d) = (snapshot.alpha(), snapshot.d());
    let rows = snapshot.map_rows(|m, row| RowSums::of_row(&grid, alpha, d, m, row));
    Observation::from_sums(snapshot.tau, &reduce(rows))
}

/// Time series of [`Observation`]s.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BranchTrace {
    pub taus: Vec<f64>,
    pub t_norm: Vec<f64>,
    pub r_norm: Vec<f64>,
    pub xb_t: Vec<Option<f64>>,
    pub xb_r: Vec<Option<f64>>,
    pub xp_t: Vec<Option<f64>>,
    pub xp_r: Vec<Option<f64>>,
}

impl BranchTrace {
    pub fn push(&mut self, o: &Observation) {
        self.taus.push(o.tau);
        self.t_norm.push(o.t_norm);
        self.r_norm.push(o.r_norm);
        self.xb_t.push(o.xb_t);
        self.xb_r.push(o.xb_r);
        self.xp_t.push(o.xp_t);
        self.xp_r.push(o.xp_r);
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    fn series(&self, branch: Branch) -> (&[Option<f64>], &[Option<f64>]) {
        match branch {
            Branch::T => (&self.xb_t, &self.xp_t),
            Branch::R => (&self.xb_r, &self.xp_r),
        }
    }
}

impl FromIterator<Observation> for BranchTrace {
    fn from_iter<I: IntoIterator<Item = Observation>>(iter: I) -> Self {
        let mut t = BranchTrace::default();
        for o in iter {
            t.push(&o);
        }
        t
    }
}

/// Ordinary least-squares line `y = intercept + slope · x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub slope: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    assert_eq!(xs.len(), ys.len());
    if xs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter {
            name: "tau",
            reason: "fit samples share a single abscissa".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(LineFit {
        intercept,
        slope,
        rms,
    })
}

/// Virtual initial positions `(x_p,v, x_b,v)` of a classical elastic
/// collision.
pub fn virtual_positions(alpha: f64, xp0: f64, xb0: f64) -> (f64, f64) {
    let beta = 1.0 - alpha;
    (
        (alpha - beta) * xp0 + 2.0 * beta * xb0,
        2.0 * alpha * xp0 + (beta - alpha) * xb0,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Numerical,
    StationaryPhase,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Numerical => "numerical",
            Source::StationaryPhase => "stationary_phase",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "numerical" => Ok(Source::Numerical),
            "stationary_phase" => Ok(Source::StationaryPhase),
            other => Err(Error::InvalidParameter {
                name: "source",
                reason: format!("unknown source `{other}`"),
            }),
        }
    }
}

/// Residuals of the two line fits behind a numerical result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitDiagnostics {
    pub samples: usize,
    pub rms_b: f64,
    pub rms_p: f64,
    /// Set when a residual exceeds `1e-3 · |slope · span|`.
    pub flagged: bool,
}

/// Displacements and asymptotic velocities of both particles in one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchKinematics {
    pub branch: Branch,
    pub source: Source,
    pub dx_b: f64,
    pub v_b: f64,
    pub dx_p: f64,
    pub v_p: f64,
    pub fit: Option<FitDiagnostics>,
}

/// Fits straight lines to the conditional means of `branch` inside the
/// configured window and extrapolates them to τ = 0.
pub fn extract_branch(
    trace: &BranchTrace,
    cfg: &CaseConfig,
    branch: Branch,
) -> Result<BranchKinematics> {
    let eps = 1e-9 * cfg.dtau;
    let (b_series, p_series) = trace.series(branch);
    let mut taus = Vec::new();
    let mut xb = Vec::new();
    let mut xp = Vec::new();
    for (i, &tau) in trace.taus.iter().enumerate() {
        if tau < cfg.tau_fit_start - eps || tau > cfg.tau_fit_end + eps {
            continue;
        }
        if let (Some(b), Some(p)) = (b_series[i], p_series[i]) {
            taus.push(tau);
            xb.push(b);
            xp.push(p);
        }
    }
    if taus.len() < MIN_FIT_SAMPLES {
        return Err(Error::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: taus.len(),
        });
    }
    let fb = linear_fit(&taus, &xb)?;
    let fp = linear_fit(&taus, &xp)?;
    let span = taus[taus.len() - 1] - taus[0];
    let flagged =
        fb.rms > 1e-3 * (fb.slope * span).abs() || fp.rms > 1e-3 * (fp.slope * span).abs();
    let (xp_ref, xb_ref) = match branch {
        Branch::T => (cfg.xp0, cfg.xb0),
        Branch::R => virtual_positions(cfg.alpha, cfg.xp0, cfg.xb0),
    };
    Ok(BranchKinematics {
        branch,
        source: Source::Numerical,
        dx_b: fb.intercept - xb_ref,
        v_b: fb.slope,
        dx_p: fp.intercept - xp_ref,
        v_p: fp.slope,
        fit: Some(FitDiagnostics {
            samples: taus.len(),
            rms_b: fb.rms,
            rms_p: fp.rms,
            flagged,
        }),
    })
}

/// Tunneling and reflection kinematics, in that order.
pub fn extract_kinematics(
    trace: &BranchTrace,
    cfg: &CaseConfig,
) -> Result<(BranchKinematics, BranchKinematics)> {
    Ok((
        extract_branch(trace, cfg, Branch::T)?,
        extract_branch(trace, cfg, Branch::R)?,
    ))
}

/// Lab-frame marginal densities in bins of width `L/N` centred on
/// `-L, -L + L/N, …`, the same lattice as the position grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub start: f64,
    pub bin_width: f64,
    pub projectile: Vec<f64>,
    pub barrier: Vec<f64>,
}

impl Marginals {
    pub fn new(grid: &SpectralGrid) -> Self {
        let bins = 2 * grid.points;
        Marginals {
            start: -grid.length,
            bin_width: grid.dx(),
            projectile: vec![0.0; bins],
            barrier: vec![0.0; bins],
        }
    }

    pub fn bin_center(&self, i: usize) -> f64 {
        self.start + i as f64 * self.bin_width
    }

    fn bin(&self, x: f64) -> usize {
        let i = ((x - self.start) / self.bin_width).round();
        (i.max(0.0) as usize).min(self.projectile.len() - 1)
    }

    pub fn add_row(&mut self, grid: &SpectralGrid, alpha: f64, m: usize, row: &[Complex64]) {
        let big_x = grid.position(m);
        let cell = grid.dx() * grid.dx();
        for (i, v) in row.iter().enumerate() {
            let w = v.norm_sqr() * cell;
            if w == 0.0 {
                continue;
            }
            let x = grid.position(i);
            let ip = self.bin(big_x + (1.0 - alpha) * x);
            let ib = self.bin(big_x - alpha * x);
            self.projectile[ip] += w;
            self.barrier[ib] += w;
        }
    }

    /// Mean and standard deviation of one marginal, using bin centres.
    pub fn moments(values: &[f64], start: f64, width: f64) -> (f64, f64) {
        let mut m0 = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (i, w) in values.iter().enumerate() {
            let x = start + i as f64 * width;
            m0 += w;
            m1 += w * x;
            m2 += w * x * x;
        }
        let mean = m1 / m0;
        (mean, (m2 / m0 - mean * mean).max(0.0).sqrt())
    }

    pub fn barrier_moments(&self) -> (f64, f64) {
        Marginals::moments(&self.barrier, self.start, self.bin_width)
    }

    pub fn projectile_moments(&self) -> (f64, f64) {
        Marginals::moments(&self.projectile, self.start, self.bin_width)
    }
}

pub fn marginals(field: &WaveField) -> Marginals {
    let mut out = Marginals::new(&field.grid);
    for m in 0..field.grid.points {
        out.add_row(&field.grid, field.alpha, m, field.row(m));
    }
    out
}

pub fn snapshot_marginals(snapshot: &Snapshot<'_>) -> Marginals {
    let grid = snapshot.grid();
    let alpha = snapshot.alpha();
    let mut out = Marginals::new(&grid);
    snapshot.for_each_row(|m, row| out.add_row(&grid, alpha, m, row));
    out
}

/// `(Δx_b / α, dφ_t(k0) / v0)`: the interaction time implied by the
/// barrier displacement and the phase-time delay. `v0 = 1`.
pub fn interaction_time(kin: &BranchKinematics, cfg: &CaseConfig) -> Result<(f64, f64)> {
    let from_displacement = kin.dx_b / cfg.alpha;
    let phase_time = phase_derivative(cfg.k0, cfg.eta, cfg.d, cfg.convention)?;
    Ok((from_displacement, phase_time))
}
