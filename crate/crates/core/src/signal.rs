//! Discretised shot-noise outputs driven by a shared Wiener increment stream.
//!
//! Increment `m` covers `[s_m, s_m + dt)` with `s_m = t_start + (m − pad)·dt`
//! and the output is the left-point moving average
//! `Y(t_j) = Σ_m k(t_j − s_m)·ΔW_m`.
//!
//! Randomness comes from ChaCha8 keyed by `seed` with `stream_id` selecting
//! an independent stream, so results never depend on scheduling.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::kernel::Kernel;

/// Kernels with at most this many taps are convolved directly.
pub const DIRECT_CONVOLUTION_MAX_TAPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub dt: f64,
    pub n: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, dt: f64, n: usize) -> Result<Self> {
        ensure_positive("dt", dt)?;
        if !t_start.is_finite() {
            return Err(Error::InvalidParameter(format!("t_start must be finite, got {t_start}")));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("grid needs at least one sample".into()));
        }
        let grid = Self { t_start, dt, n };
        if !grid.t_end().is_finite() {
            return Err(Error::InvalidParameter("grid span overflows".into()));
        }
        Ok(grid)
    }

    /// Smallest lattice grid (anchored at 0) covering `[lo, hi]`.
    pub fn covering(lo: f64, hi: f64, dt: f64) -> Result<Self> {
        ensure_positive("dt", dt)?;
        if !(hi >= lo) {
            return Err(Error::InvalidParameter(format!("empty span [{lo}, {hi}]")));
        }
        let first = (lo / dt + 1e-9).floor();
        let last = (hi / dt - 1e-9).ceil();
        Self::new(first * dt, dt, (last - first) as usize + 1)
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t_start + j as f64 * self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.n - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
    pub label: String,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::InvalidInput(format!(
                "path has {} values but grid has {} samples",
                values.len(),
                grid.n
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("path contains non-finite values".into()));
        }
        Ok(Self {
            grid,
            values,
            label: label.into(),
        })
    }

    /// Writes `t,value` rows with a header.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,value")?;
        for (j, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", self.grid.time(j), v)?;
        }
        Ok(())
    }

    /// Little-endian layout: `n: u64`, `dt: f64`, `t_start: f64`, then `n`
    /// values as `f64`.
    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(&(self.grid.n as u64).to_le_bytes())?;
        w.write_all(&self.grid.dt.to_le_bytes())?;
        w.write_all(&self.grid.t_start.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R, label: impl Into<String>) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |r: &mut R| -> Result<[u8; 8]> {
            r.read_exact(&mut word)
                .map_err(|e| Error::InvalidInput(format!("truncated path file: {e}")))?;
            Ok(word)
        };
        let n = u64::from_le_bytes(next(&mut r)?) as usize;
        let dt = f64::from_le_bytes(next(&mut r)?);
        let t_start = f64::from_le_bytes(next(&mut r)?);
        let grid = TimeGrid::new(t_start, dt, n)?;
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(f64::from_le_bytes(next(&mut r)?));
        }
        Self::new(grid, values, label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NoiseSeed {
    pub seed: u64,
    pub stream_id: u64,
}

impl NoiseSeed {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn with_stream(self, stream_id: u64) -> Self {
        Self { stream_id, ..self }
    }

    pub(crate) fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// `n + 2·pad` i.i.d. `N(0, dt)` increments.
pub fn wiener_increments(grid: &TimeGrid, pad: usize, seed: NoiseSeed) -> Vec<f64> {
    let mut rng = seed.rng();
    let scale = grid.dt.sqrt();
    (0..grid.n + 2 * pad)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            z * scale
        })
        .collect()
}

/// Number of lattice steps needed to cover the kernel's effective support.
pub fn required_pad(k: &Kernel, dt: f64) -> usize {
    (k.effective_support() / dt - 1e-9).ceil().max(0.0) as usize
}

/// Advisory message when `dt` is too coarse for the kernel's time scale.
pub fn dt_resolution_warning(k: &Kernel, dt: f64) -> Option<String> {
    let scale = k.time_scale();
    (dt > scale / 10.0 + 1e-15).then(|| {
        format!(
            "dt={dt} is coarser than a tenth of the time scale {scale} of kernel {}",
            k.name()
        )
    })
}

fn taps(k: &Kernel, dt: f64, reach: usize) -> Vec<f64> {
    (0..=2 * reach)
        .map(|i| k.eval((i as f64 - reach as f64) * dt))
        .collect()
}

/// FFT-based convolution of kernel taps with increment arrays of one fixed
/// length, caching the kernel spectra.
struct SpectralConvolver {
    size: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl SpectralConvolver {
    fn new(size: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            size,
            forward: planner.plan_fft_forward(size),
            inverse: planner.plan_fft_inverse(size),
        }
    }

    fn spectrum(&self, taps: &[f64]) -> Vec<Complex64> {
        let mut buf = vec![Complex64::new(0.0, 0.0); self.size];
        for (slot, t) in buf.iter_mut().zip(taps) {
            slot.re = *t;
        }
        self.forward.process(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }
}

/// One increment array mapped through one or two kernels sharing the grid.
///
/// With reach `P` and padding `pad ≥ P`, output `j` is entry `j + pad + P`
/// of the linear convolution of taps and increments. A circular transform
/// of length at least the increment count only corrupts entries below
/// `2P`, which are never read.
pub struct PairSimulator {
    grid: TimeGrid,
    pad: usize,
    h_taps: Vec<f64>,
    g_taps: Vec<f64>,
    reach: usize,
    spectral: Option<(SpectralConvolver, Vec<Complex64>, Vec<Complex64>)>,
}

impl PairSimulator {
    /// Prepares simulation of `(Y, X)` for kernels `h` and `g` on `grid`,
    /// with padding computed from both supports.
    pub fn new(h: &Kernel, g: &Kernel, grid: TimeGrid) -> Result<Self> {
        let pad = required_pad(h, grid.dt).max(required_pad(g, grid.dt));
        Self::with_pad(h, g, grid, pad)
    }

    pub fn with_pad(h: &Kernel, g: &Kernel, grid: TimeGrid, pad: usize) -> Result<Self> {
        let reach = required_pad(h, grid.dt).max(required_pad(g, grid.dt));
        if pad < reach {
            return Err(Error::Precondition(format!(
                "pad {pad} is too small: at least {reach} steps needed to cover the kernel supports"
            )));
        }
        let h_taps = taps(h, grid.dt, reach);
        let g_taps = taps(g, grid.dt, reach);
        let spectral = (h_taps.len() > DIRECT_CONVOLUTION_MAX_TAPS).then(|| {
            let size = (grid.n + 2 * pad).max(h_taps.len()).next_power_of_two();
            let conv = SpectralConvolver::new(size);
            let hs = conv.spectrum(&h_taps);
            let gs = conv.spectrum(&g_taps);
            (conv, hs, gs)
        });
        Ok(Self {
            grid,
            pad,
            h_taps,
            g_taps,
            reach,
            spectral,
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    /// Applies both kernels to one increment array.
    pub fn apply(&self, increments: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let expected = self.grid.n + 2 * self.pad;
        if increments.len() != expected {
            return Err(Error::InvalidInput(format!(
                "expected {expected} increments, got {}",
                increments.len()
            )));
        }
        let offset = self.pad + self.reach;
        match &self.spectral {
            None => Ok((
                direct(&self.h_taps, increments, offset, self.grid.n),
                direct(&self.g_taps, increments, offset, self.grid.n),
            )),
            Some((conv, hs, gs)) => {
                let mut buf = vec![Complex64::new(0.0, 0.0); conv.size];
                for (slot, v) in buf.iter_mut().zip(increments) {
                    slot.re = *v;
                }
                conv.forward.process(&mut buf);
                // both kernels are real, so Y + iX comes back from one inverse
                let i = Complex64::new(0.0, 1.0);
                for ((b, h), g) in buf.iter_mut().zip(hs).zip(gs) {
                    *b *= h + i * g;
                }
                conv.inverse.process(&mut buf);
                let window = &buf[offset..offset + self.grid.n];
                Ok((
                    window.iter().map(|z| z.re).collect(),
                    window.iter().map(|z| z.im).collect(),
                ))
            }
        }
    }

    pub fn simulate(&self, seed: NoiseSeed) -> Result<(SampledPath, SampledPath)> {
        let inc = wiener_increments(&self.grid, self.pad, seed);
        let (y, x) = self.apply(&inc)?;
        Ok((
            SampledPath::new(self.grid, y, "Y")?,
            SampledPath::new(self.grid, x, "X")?,
        ))
    }
}

fn direct(taps: &[f64], inc: &[f64], offset: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let q = j + offset;
            taps.iter().enumerate().map(|(i, t)| t * inc[q - i]).sum()
        })
        .collect()
}

/// Single output `Σ_m k(t_j − s_m)·ΔW_m` from a given increment array.
pub fn simulate_output(k: &Kernel, increments: &[f64], grid: TimeGrid, pad: usize) -> Result<SampledPath> {
    let sim = PairSimulator::with_pad(k, k, grid, pad)?;
    let (y, _) = sim.apply(increments)?;
    SampledPath::new(grid, y, k.name())
}

/// `(Y, X)` from the same increments, `Y` through `h` and `X` through `g`.
pub fn simulate_pair(h: &Kernel, g: &Kernel, grid: TimeGrid, seed: NoiseSeed) -> Result<(SampledPath, SampledPath)> {
    PairSimulator::new(h, g, grid)?.simulate(seed)
}
