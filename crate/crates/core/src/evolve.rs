//! Spectral synthesis of Ψ(X, x, τ) from scattering eigenstates.
//!
//! Each snapshot is evaluated directly at its τ; there is no time stepping.
//! The `K` transform runs once per stored `k` row, then every `X` row is
//! finished with two length-`N` transforms along `k` (incident plus
//! reflected, and transmitted). Rows can be consumed one at a time so a
//! full `N × N` grid never has to be held in memory.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::amplitude::Interaction;
use crate::config::tau_max;
use crate::error::{Error, Result};
use crate::initial::{CoefficientField, SpectralGrid};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Size of the text header in density dumps.
pub const DENSITY_HEADER_BYTES: usize = 64;

/// Dense Ψ on the `(X, x)` grid, row-major with `X` as the slow index.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: SpectralGrid,
    pub tau: f64,
    pub alpha: f64,
    /// Width of the zeroed interaction interval `|x| < d/2`.
    pub d: f64,
    pub values: Vec<Complex64>,
}

impl WaveField {
    pub fn new(grid: SpectralGrid, tau: f64, alpha: f64, d: f64, values: Vec<Complex64>) -> Self {
        assert_eq!(values.len(), grid.points * grid.points);
        WaveField {
            grid,
            tau,
            alpha,
            d,
            values,
        }
    }

    /// Samples `f(X, x)` on the grid, leaving the gap at zero.
    pub fn from_fn(
        grid: SpectralGrid,
        tau: f64,
        alpha: f64,
        d: f64,
        f: impl Fn(f64, f64) -> Complex64 + Sync,
    ) -> Self {
        let n = grid.points;
        let values = (0..n * n)
            .into_par_iter()
            .map(|idx| {
                let x = grid.position(idx % n);
                if in_gap(x, d) {
                    ZERO
                } else {
                    f(grid.position(idx / n), x)
                }
            })
            .collect();
        WaveField::new(grid, tau, alpha, d, values)
    }

    pub fn get(&self, i_big_x: usize, i_x: usize) -> Complex64 {
        self.values[i_big_x * self.grid.points + i_x]
    }

    pub fn row(&self, i_big_x: usize) -> &[Complex64] {
        let n = self.grid.points;
        &self.values[i_big_x * n..(i_big_x + 1) * n]
    }

    pub fn in_gap(&self, i_x: usize) -> bool {
        in_gap(self.grid.position(i_x), self.d)
    }

    pub fn total_probability(&self) -> f64 {
        let dx = self.grid.dx();
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * dx * dx
    }

    pub fn conj(&self) -> WaveField {
        WaveField {
            values: self.values.iter().map(|v| v.conj()).collect(),
            ..self.clone()
        }
    }

    /// Writes `|Ψ|²` as a 64-byte text header followed by little-endian
    /// `f64` values in row-major order.
    pub fn write_density<W: Write>(&self, out: W) -> Result<()> {
        let n = self.grid.points;
        let mut w = DensityWriter::new(out, self.grid, self.tau)?;
        for m in 0..n {
            w.write_row(self.row(m))?;
        }
        w.finish()
    }
}

/// Streams a density dump one `X` row at a time.
pub struct DensityWriter<W: Write> {
    out: W,
    rows_left: usize,
    points: usize,
}

impl<W: Write> DensityWriter<W> {
    pub fn new(mut out: W, grid: SpectralGrid, tau: f64) -> Result<Self> {
        let text = format!("N={} L={} tau={}", grid.points, grid.length, tau);
        if text.len() >= DENSITY_HEADER_BYTES {
            return Err(Error::Io(format!("density header too long: {text}")));
        }
        let mut header = [b' '; DENSITY_HEADER_BYTES];
        header[..text.len()].copy_from_slice(text.as_bytes());
        header[DENSITY_HEADER_BYTES - 1] = b'\n';
        out.write_all(&header)?;
        Ok(DensityWriter {
            out,
            rows_left: grid.points,
            points: grid.points,
        })
    }

    pub fn write_row(&mut self, row: &[Complex64]) -> Result<()> {
        if row.len() != self.points || self.rows_left == 0 {
            return Err(Error::GridMismatch("density row out of place".into()));
        }
        let mut bytes = Vec::with_capacity(8 * row.len());
        for v in row {
            bytes.extend_from_slice(&v.norm_sqr().to_le_bytes());
        }
        self.out.write_all(&bytes)?;
        self.rows_left -= 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        if self.rows_left != 0 {
            return Err(Error::GridMismatch(format!(
                "{} density rows missing",
                self.rows_left
            )));
        }
        self.out.flush()?;
        Ok(())
    }
}

/// Contents of a density dump.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    pub points: usize,
    pub length: f64,
    pub tau: f64,
    pub density: Vec<f64>,
}

pub fn read_density<R: Read>(mut input: R) -> Result<DensityGrid> {
    let mut header = [0u8; DENSITY_HEADER_BYTES];
    input.read_exact(&mut header)?;
    let text = String::from_utf8_lossy(&header);
    let mut points = None;
    let mut length = None;
    let mut tau = None;
    for field in text.split_whitespace() {
        let bad = || Error::Io(format!("malformed density header field `{field}`"));
        let (key, value) = field.split_once('=').ok_or_else(bad)?;
        match key {
            "N" => points = Some(value.parse::<usize>().map_err(|_| bad())?),
            "L" => length = Some(value.parse::<f64>().map_err(|_| bad())?),
            "tau" => tau = Some(value.parse::<f64>().map_err(|_| bad())?),
            _ => return Err(bad()),
        }
    }
    let (Some(points), Some(length), Some(tau)) = (points, length, tau) else {
        return Err(Error::Io("density header lacks N, L or tau".into()));
    };
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != 8 * points * points {
        return Err(Error::Io(format!(
            "expected {} density bytes, found {}",
            8 * points * points,
            bytes.len()
        )));
    }
    let density = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(DensityGrid {
        points,
        length,
        tau,
        density,
    })
}

pub fn in_gap(x: f64, d: f64) -> bool {
    x.abs() < 0.5 * d
}

/// Relative-motion dispersion `ω(K, k) = (αβK² + k²) / (2 k0)`.
pub fn dispersion(alpha: f64, k0: f64, big_k: f64, k: f64) -> f64 {
    (alpha * (1.0 - alpha) * big_k * big_k + k * k) / (2.0 * k0)
}

struct BandRow {
    k_index: usize,
    /// Relative wavenumber of the row; the time phase is `k² τ / (2 k0)`.
    k: f64,
    r: Complex64,
    t: Complex64,
    /// `C(K_i, k)` times the `(-1)^(i+j)` shift to a grid starting at `-L/2`.
    values: Vec<Complex64>,
}

/// Precomputed spectral data for one coefficient field and interaction.
pub struct Evolver {
    grid: SpectralGrid,
    alpha: f64,
    k0: f64,
    interaction: Interaction,
    rows: Vec<BandRow>,
    fft: Arc<dyn Fft<f64>>,
}

impl Evolver {
    pub fn new(coeffs: &CoefficientField, interaction: Interaction) -> Result<Self> {
        let grid = coeffs.grid;
        let n = grid.points;
        let mut rows = Vec::with_capacity(coeffs.rows().len());
        for row in coeffs.rows() {
            let k = grid.frequency(row.k_index);
            if grid.signed_index(row.k_index) <= 0 {
                return Err(Error::NonPositiveWavenumber(k));
            }
            let amp = interaction.amplitude(k)?;
            let values = row
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| if (i + row.k_index) % 2 == 0 { *v } else { -v })
                .collect();
            rows.push(BandRow {
                k_index: row.k_index,
                k,
                r: amp.r,
                t: amp.t,
                values,
            });
        }
        let fft = FftPlanner::new().plan_fft_inverse(n);
        Ok(Evolver {
            grid,
            alpha: coeffs.alpha,
            k0: coeffs.k0,
            interaction,
            rows,
            fft,
        })
    }

    pub fn grid(&self) -> SpectralGrid {
        self.grid
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn interaction(&self) -> Interaction {
        self.interaction
    }

    pub fn tau_max(&self) -> f64 {
        tau_max(self.grid.length, self.grid.points, self.k0)
    }

    /// Runs the `K` transforms for time `tau`. The result is finished row by
    /// row through [`Snapshot::row`] or [`Snapshot::map_rows`].
    pub fn snapshot(&self, tau: f64) -> Result<Snapshot<'_>> {
        let tau_max = self.tau_max();
        if !(tau >= 0.0 && tau < tau_max) {
            return Err(Error::Aliasing { tau, tau_max });
        }
        let n = self.grid.points;
        let nb = self.rows.len();
        let big_k_phase: Vec<Complex64> = (0..n)
            .map(|i| {
                let big_k = self.grid.frequency(i);
                Complex64::from_polar(1.0, -dispersion(self.alpha, self.k0, big_k, 0.0) * tau)
            })
            .collect();
        let columns: Vec<Vec<Complex64>> = self
            .rows
            .par_iter()
            .map_init(
                || vec![ZERO; self.fft.get_inplace_scratch_len()],
                |scratch, row| {
                    let k_phase =
                        Complex64::from_polar(1.0, -row.k * row.k * tau / (2.0 * self.k0));
                    let mut buf: Vec<Complex64> = row
                        .values
                        .iter()
                        .zip(&big_k_phase)
                        .map(|(c, p)| c * p * k_phase)
                        .collect();
                    self.fft.process_with_scratch(&mut buf, scratch);
                    buf
                },
            )
            .collect();
        // transpose so that each X row reads a contiguous slice
        let mut transposed = vec![ZERO; n * nb];
        for (b, col) in columns.iter().enumerate() {
            for (m, v) in col.iter().enumerate() {
                transposed[m * nb + b] = *v;
            }
        }
        Ok(Snapshot {
            evolver: self,
            tau,
            transposed,
        })
    }

    /// Evaluates the full grid at `tau`.
    pub fn wave_field(&self, tau: f64) -> Result<WaveField> {
        self.snapshot(tau)?.to_wave_field()
    }
}

/// Ψ at one τ after the `K` transforms; rows along `x` are produced on demand.
pub struct Snapshot<'a> {
    evolver: &'a Evolver,
    pub tau: f64,
    transposed: Vec<Complex64>,
}

/// Per-thread buffers for [`Snapshot::row_into`].
pub struct RowScratch {
    left: Vec<Complex64>,
    right: Vec<Complex64>,
    fft: Vec<Complex64>,
}

impl<'a> Snapshot<'a> {
    pub fn grid(&self) -> SpectralGrid {
        self.evolver.grid
    }

    pub fn alpha(&self) -> f64 {
        self.evolver.alpha
    }

    pub fn d(&self) -> f64 {
        self.evolver.interaction.d
    }

    pub fn scratch(&self) -> RowScratch {
        let n = self.evolver.grid.points;
        RowScratch {
            left: vec![ZERO; n],
            right: vec![ZERO; n],
            fft: vec![ZERO; self.evolver.fft.get_inplace_scratch_len()],
        }
    }

    /// Writes Ψ(X_m, x_n) for all `n` into `out`.
    pub fn row_into(&self, m: usize, scratch: &mut RowScratch, out: &mut [Complex64]) {
        let ev = self.evolver;
        let grid = ev.grid;
        let n = grid.points;
        let nb = ev.rows.len();
        let RowScratch { left, right, fft } = scratch;
        left.fill(ZERO);
        right.fill(ZERO);
        for (row, g) in ev.rows.iter().zip(&self.transposed[m * nb..(m + 1) * nb]) {
            left[row.k_index] = *g;
            left[n - row.k_index] = row.r * g;
            right[row.k_index] = row.t * g;
        }
        ev.fft.process_with_scratch(left, fft);
        ev.fft.process_with_scratch(right, fft);
        let norm = grid.dk() * grid.dk() / (2.0 * PI);
        let d = ev.interaction.d;
        for (i, o) in out.iter_mut().enumerate() {
            let x = grid.position(i);
            *o = if in_gap(x, d) {
                ZERO
            } else if x < 0.0 {
                left[i] * norm
            } else {
                right[i] * norm
            };
        }
    }

    pub fn row(&self, m: usize) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.evolver.grid.points];
        self.row_into(m, &mut self.scratch(), &mut out);
        out
    }

    /// Applies `f(m, row)` to every `X` row and returns the results in row
    /// order.
    pub fn map_rows<R: Send>(&self, f: impl Fn(usize, &[Complex64]) -> R + Sync) -> Vec<R> {
        let n = self.evolver.grid.points;
        (0..n)
            .into_par_iter()
            .map_init(
                || (self.scratch(), vec![ZERO; n]),
                |(scratch, out), m| {
                    self.row_into(m, scratch, out);
                    f(m, out)
                },
            )
            .collect()
    }

    /// Visits the rows sequentially in order.
    pub fn for_each_row(&self, mut f: impl FnMut(usize, &[Complex64])) {
        let n = self.evolver.grid.points;
        let mut scratch = self.scratch();
        let mut out = vec![ZERO; n];
        for m in 0..n {
            self.row_into(m, &mut scratch, &mut out);
            f(m, &out);
        }
    }

    pub fn to_wave_field(&self) -> Result<WaveField> {
        let values = self.map_rows(|_, row| row.to_vec()).concat();
        Ok(WaveField::new(
            self.evolver.grid,
            self.tau,
            self.evolver.alpha,
            self.evolver.interaction.d,
            values,
        ))
    }
}

/// Ψ(X, x, τ) for the packet `coeffs` scattered by `interaction`.
pub fn evolve(coeffs: &CoefficientField, interaction: Interaction, tau: f64) -> Result<WaveField> {
    Evolver::new(coeffs, interaction)?.wave_field(tau)
}

fn fft_2d(values: &mut [Complex64], n: usize, fft: &Arc<dyn Fft<f64>>) {
    let mut scratch = vec![ZERO; fft.get_inplace_scratch_len()];
    for row in values.chunks_exact_mut(n) {
        fft.process_with_scratch(row, &mut scratch);
    }
    let mut column = vec![ZERO; n];
    for j in 0..n {
        for i in 0..n {
            column[i] = values[i * n + j];
        }
        fft.process_with_scratch(&mut column, &mut scratch);
        for i in 0..n {
            values[i * n + j] = column[i];
        }
    }
}

/// Free evolution of an arbitrary grid state by `tau` through a full 2D
/// transform. No interaction, no gap; all wavenumber signs are kept.
pub fn free_propagate(field: &WaveField, k0: f64, tau: f64) -> WaveField {
    let grid = field.grid;
    let n = grid.points;
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(n);
    let inverse = planner.plan_fft_inverse(n);
    let mut values = field.values.clone();
    fft_2d(&mut values, n, &forward);
    let scale = 1.0 / (n * n) as f64;
    for i in 0..n {
        let big_k = grid.frequency(i);
        for j in 0..n {
            let w = dispersion(field.alpha, k0, big_k, grid.frequency(j));
            values[i * n + j] *= Complex64::from_polar(scale, -w * tau);
        }
    }
    fft_2d(&mut values, n, &inverse);
    WaveField {
        grid,
        tau: field.tau + tau,
        alpha: field.alpha,
        d: 0.0,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{CaseConfig, Convention};
    use crate::initial::{coefficient_field, GaussianPacket};

    fn small(name: &str) -> CaseConfig {
        CaseConfig {
            length: 25.0,
            points: 1024,
            ..CaseConfig::preset(name).unwrap()
        }
    }

    fn rms(a: &[Complex64], b: &[Complex64]) -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
        (s / a.len() as f64).sqrt()
    }

    #[test]
    fn rejects_aliasing_times() {
        let cfg = small("case2");
        let c = coefficient_field(&cfg, &SpectralGrid::from_config(&cfg)).unwrap();
        let ev = Evolver::new(&c, Interaction::from_config(&cfg)).unwrap();
        assert!((ev.tau_max() - 625.0 * 50.0 / (2.0 * PI * 1024.0)).abs() < 1e-12);
        assert!(matches!(
            ev.snapshot(ev.tau_max()),
            Err(Error::Aliasing { .. })
        ));
        assert!(matches!(ev.snapshot(-0.1), Err(Error::Aliasing { .. })));
    }

    #[test]
    fn rejects_left_moving_rows() {
        let cfg = small("case2");
        let grid = SpectralGrid::from_config(&cfg);
        let rows = vec![crate::initial::SpectralRow {
            k_index: grid.points - 3,
            values: vec![Complex64::new(1.0, 0.0); grid.points],
        }];
        let c = CoefficientField::from_rows(grid, cfg.alpha, cfg.k0, rows).unwrap();
        assert!(matches!(
            Evolver::new(&c, Interaction::from_config(&cfg)),
            Err(Error::NonPositiveWavenumber(_))
        ));
    }

    #[test]
    fn gap_is_zero_and_norm_bounded() {
        let cfg = small("case6");
        let c = coefficient_field(&cfg, &SpectralGrid::from_config(&cfg)).unwrap();
        let f = evolve(&c, Interaction::from_config(&cfg), 3.5).unwrap();
        for m in (0..1024).step_by(37) {
            for i in 0..1024 {
                if f.in_gap(i) {
                    assert_eq!(f.get(m, i), ZERO);
                }
            }
        }
        let p = f.total_probability();
        assert!(p <= 1.0 + 1e-9 && p > 0.999, "{p}");
    }

    #[test]
    fn initial_reconstruction_without_reflection() {
        let cfg = CaseConfig {
            eta: 0.0,
            ..small("case4")
        };
        let c = coefficient_field(&cfg, &SpectralGrid::from_config(&cfg)).unwrap();
        let f = evolve(&c, Interaction::from_config(&cfg), 0.0).unwrap();
        let p = GaussianPacket::from_config(&cfg).unwrap();
        let exact = WaveField::from_fn(f.grid, 0.0, cfg.alpha, cfg.d, |bx, x| p.initial_com(bx, x));
        let mut num = 0.0;
        let mut den = 0.0;
        for m in 0..1024 {
            for i in 0..1024 {
                if f.grid.position(i) < -0.5 * cfg.d {
                    num += (f.get(m, i) - exact.get(m, i)).norm_sqr();
                    den += exact.get(m, i).norm_sqr();
                }
            }
        }
        assert!((num / den).sqrt() < 1e-12, "{}", (num / den).sqrt());
    }

    #[test]
    fn linear_in_coefficients() {
        let cfg = small("case2");
        let grid = SpectralGrid::from_config(&cfg);
        let c1 = coefficient_field(&cfg, &grid).unwrap();
        let other = CaseConfig {
            k0: 55.0,
            ..cfg.clone()
        };
        let c2 = coefficient_field(&other, &grid).unwrap();
        let c2 = CoefficientField::from_rows(grid, cfg.alpha, cfg.k0, c2.rows().to_vec()).unwrap();
        let inter = Interaction::from_config(&cfg);
        let sum = evolve(&c1.add(&c2).unwrap(), inter, 2.5).unwrap();
        let a = evolve(&c1, inter, 2.5).unwrap();
        let b = evolve(&c2, inter, 2.5).unwrap();
        let max = sum
            .values
            .iter()
            .zip(a.values.iter().zip(&b.values))
            .map(|(s, (x, y))| (s - x - y).norm())
            .fold(0.0, f64::max);
        assert!(max < 1e-12, "{max}");
    }

    #[test]
    fn free_limit_matches_full_transform() {
        let cfg = CaseConfig {
            eta: 0.0,
            d: 0.0,
            convention: Convention::Global,
            ..small("case2")
        };
        let c = coefficient_field(&cfg, &SpectralGrid::from_config(&cfg)).unwrap();
        let ev = Evolver::new(&c, Interaction::from_config(&cfg)).unwrap();
        let start = ev.wave_field(0.0).unwrap();
        let later = ev.wave_field(3.0).unwrap();
        let free = free_propagate(&start, cfg.k0, 3.0);
        assert!(rms(&later.values, &free.values) < 1e-10);
    }

    #[test]
    fn free_time_reversal() {
        let cfg = CaseConfig {
            eta: 0.0,
            d: 0.0,
            convention: Convention::Global,
            ..small("case5")
        };
        let c = coefficient_field(&cfg, &SpectralGrid::from_config(&cfg)).unwrap();
        let start = evolve(&c, Interaction::from_config(&cfg), 0.0).unwrap();
        let there = free_propagate(&start, cfg.k0, 4.0);
        let back = free_propagate(&there.conj(), cfg.k0, 4.0);
        assert!(rms(&back.values, &start.conj().values) < 1e-9);
    }

    #[test]
    fn streaming_matches_dense() {
        let cfg = small("case1");
        let c = coefficient_field(&cfg, &SpectralGrid::from_config(&cfg)).unwrap();
        let ev = Evolver::new(&c, Interaction::from_config(&cfg)).unwrap();
        let snap = ev.snapshot(1.5).unwrap();
        let dense = snap.to_wave_field().unwrap();
        assert_eq!(snap.row(700), dense.row(700));
        let mut seen = 0;
        snap.for_each_row(|m, row| {
            assert_eq!(row, dense.row(m));
            seen += 1;
        });
        assert_eq!(seen, 1024);
    }

    #[test]
    fn density_round_trip() {
        let grid = SpectralGrid::new(8, 3.0);
        let values = (0..64).map(|i| Complex64::new(i as f64, 0.5)).collect();
        let f = WaveField::new(grid, 2.5, 0.25, 0.0, values);
        let mut bytes = Vec::new();
        f.write_density(&mut bytes).unwrap();
        assert_eq!(bytes.len(), 64 + 8 * 64);
        assert!(bytes.starts_with(b"N=8 L=3 tau=2.5 "));
        let back = read_density(bytes.as_slice()).unwrap();
        assert_eq!((back.points, back.length, back.tau), (8, 3.0, 2.5));
        assert_eq!(back.density[9], 81.25);
        assert!(read_density(&bytes[..100]).is_err());
    }
}
