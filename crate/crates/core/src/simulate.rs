//! Euler simulation of the Wishart SDE
//!
//! ```text
//! dS = sqrt(S) dB Q + Q^T dB^T sqrt(S) + (M S + S M^T + b) dt
//! ```
//!
//! with the state projected back onto the PSD cone after every step, used
//! as a Monte Carlo check of the analytic transforms.
//!
//! Each path draws from its own ChaCha8 stream (`seed`, stream = path
//! index), so a path's outcome does not depend on how paths are scheduled.
//! Reductions use pairwise summation in path order.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matfun::RMat;
use crate::model::{LaplaceQuery, WishartModel};
use crate::pricing::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projection {
    /// Negative eigenvalues are set to zero.
    EigenvalueClip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: usize,
    pub step: f64,
    pub seed: u64,
    pub projection: Projection,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 100_000,
            step: 1e-3,
            seed: 0,
            projection: Projection::EigenvalueClip,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.paths < 100 {
            return Err(Error::InvalidConfig("at least 100 paths are required"));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::InvalidConfig("step must be positive"));
        }
        Ok(())
    }
}

/// Number of Euler steps covering `[0, t]`; the step is shrunk to fit.
pub fn step_count(t: f64, step: f64) -> usize {
    if t == 0.0 {
        return 0;
    }
    (libm::ceil(t / step - 1e-9) as usize).max(1)
}

/// End state of one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    pub terminal: RMat,
    /// Trapezoid approximation of `int_0^t S ds`.
    pub integral: RMat,
    /// Steps where at least one eigenvalue was clipped.
    pub clipped_steps: usize,
}

/// Simulates path `index` of the ensemble.
pub fn simulate_path(model: &WishartModel, t: f64, config: &McConfig, index: u64) -> Result<PathOutcome> {
    check_horizon(t)?;
    let mut k = Kernel::new(model);
    let clipped = k.run(t, config, index);
    let d = k.d;
    Ok(PathOutcome {
        terminal: RMat::from_row_slice(d, d, &k.s),
        integral: RMat::from_row_slice(d, d, &k.integral),
        clipped_steps: clipped,
    })
}

/// Ensemble statistics of `S_t` and `int_0^t S ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub paths: usize,
    pub steps: usize,
    pub mean_terminal: RMat,
    /// Entrywise standard error of `mean_terminal`.
    pub stderr_terminal: RMat,
    pub mean_integral: RMat,
    pub stderr_integral: RMat,
    /// Fraction of steps, over all paths, that needed a projection.
    pub clip_fraction: f64,
}

pub fn simulate_paths(model: &WishartModel, t: f64, config: &McConfig) -> Result<PathSummary> {
    config.validate()?;
    check_horizon(t)?;
    let d = model.dim();
    let mut k = Kernel::new(model);
    let n = config.paths;
    let mut terminal = vec![Vec::with_capacity(n); d * d];
    let mut integral = vec![Vec::with_capacity(n); d * d];
    let mut clipped = 0usize;
    for p in 0..n {
        clipped += k.run(t, config, p as u64);
        for e in 0..d * d {
            terminal[e].push(k.s[e]);
            integral[e].push(k.integral[e]);
        }
    }
    let (mean_terminal, stderr_terminal) = entry_stats(&terminal, d);
    let (mean_integral, stderr_integral) = entry_stats(&integral, d);
    let steps = step_count(t, config.step);
    Ok(PathSummary {
        paths: n,
        steps,
        mean_terminal,
        stderr_terminal,
        mean_integral,
        stderr_integral,
        clip_fraction: clip_fraction(clipped, n, steps),
    })
}

fn entry_stats(samples: &[Vec<f64>], d: usize) -> (RMat, RMat) {
    let mut mean = RMat::zeros(d, d);
    let mut se = RMat::zeros(d, d);
    for (e, xs) in samples.iter().enumerate() {
        let (m, s) = mean_stderr(xs);
        mean[(e / d, e % d)] = m;
        se[(e / d, e % d)] = s;
    }
    (mean, se)
}

fn clip_fraction(clipped: usize, paths: usize, steps: usize) -> f64 {
    if steps == 0 {
        0.0
    } else {
        clipped as f64 / (paths * steps) as f64
    }
}

/// Sample mean and its standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    // Shifted by the first sample so constant inputs come back exact.
    let shift = xs[0];
    let centered: Vec<f64> = xs.iter().map(|x| x - shift).collect();
    let offset = pairwise_sum(&centered) / n as f64;
    if n == 1 {
        return (shift, 0.0);
    }
    let dev: Vec<f64> = centered.iter().map(|c| (c - offset) * (c - offset)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (shift + offset, libm::sqrt(var / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub paths: usize,
    pub clip_fraction: f64,
}

/// Monte Carlo estimate of `E[exp(-Tr[w S_t] - Tr[v int_0^t S ds])]`.
pub fn mc_laplace(model: &WishartModel, query: &LaplaceQuery, config: &McConfig) -> Result<McEstimate> {
    config.validate()?;
    check_horizon(query.t)?;
    let mut k = Kernel::new(model);
    let mut samples = Vec::with_capacity(config.paths);
    let mut clipped = 0;
    for p in 0..config.paths {
        let (x, c) = k.laplace_sample(query, config, p as u64);
        samples.push(x);
        clipped += c;
    }
    Ok(summarize(&samples, clipped, step_count(query.t, config.step)))
}

/// One path's Laplace functional and its clipped step count.
pub fn laplace_sample(model: &WishartModel, query: &LaplaceQuery, config: &McConfig, index: u64) -> Result<(f64, usize)> {
    check_horizon(query.t)?;
    Ok(Kernel::new(model).laplace_sample(query, config, index))
}

/// Estimate from per-path samples in path order.
pub fn summarize(samples: &[f64], clipped_steps: usize, steps: usize) -> McEstimate {
    let (estimate, stderr) = mean_stderr(samples);
    McEstimate {
        estimate,
        stderr,
        paths: samples.len(),
        clip_fraction: clip_fraction(clipped_steps, samples.len(), steps),
    }
}

fn check_horizon(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidConfig("t must be finite and nonnegative"));
    }
    Ok(())
}

/// Row-major `d x d` buffers reused across steps and paths.
struct Kernel {
    d: usize,
    m: Vec<f64>,
    q: Vec<f64>,
    b: Vec<f64>,
    s0: Vec<f64>,
    s: Vec<f64>,
    sqrt_s: Vec<f64>,
    integral: Vec<f64>,
    db: Vec<f64>,
    t1: Vec<f64>,
    t2: Vec<f64>,
    vecs: Vec<f64>,
    vals: Vec<f64>,
}

impl Kernel {
    fn new(model: &WishartModel) -> Self {
        let d = model.dim();
        let flat = |a: &RMat| -> Vec<f64> { (0..d * d).map(|e| a[(e / d, e % d)]).collect() };
        let z = vec![0.0; d * d];
        let mut k = Self {
            d,
            m: flat(model.m()),
            q: flat(model.q()),
            b: flat(&model.drift_constant()),
            s0: flat(model.s0()),
            s: z.clone(),
            sqrt_s: z.clone(),
            integral: z.clone(),
            db: z.clone(),
            t1: z.clone(),
            t2: z.clone(),
            vecs: z,
            vals: vec![0.0; d],
        };
        k.reset();
        k
    }

    fn reset(&mut self) {
        self.s.copy_from_slice(&self.s0);
        self.integral.iter_mut().for_each(|x| *x = 0.0);
        self.t1.copy_from_slice(&self.s0);
        self.decompose();
        // Keep the exact initial state; only its square root is needed.
        self.s.copy_from_slice(&self.s0);
    }

    /// Eigen-decomposes `t1` into `s` (clipped) and `sqrt_s`; returns whether
    /// anything was clipped.
    fn decompose(&mut self) -> bool {
        let d = self.d;
        jacobi_eigen(&mut self.t1, &mut self.vecs, d);
        let mut clipped = false;
        for i in 0..d {
            let l = self.t1[i * d + i];
            if l < 0.0 {
                clipped = true;
            }
            self.vals[i] = l.max(0.0);
        }
        for i in 0..d {
            for j in i..d {
                let (mut x, mut r) = (0.0, 0.0);
                for k in 0..d {
                    let u = self.vecs[i * d + k] * self.vecs[j * d + k];
                    x += u * self.vals[k];
                    r += u * libm::sqrt(self.vals[k]);
                }
                self.s[i * d + j] = x;
                self.s[j * d + i] = x;
                self.sqrt_s[i * d + j] = r;
                self.sqrt_s[j * d + i] = r;
            }
        }
        clipped
    }

    /// Simulates one path to `t`; returns the number of clipped steps.
    fn run(&mut self, t: f64, config: &McConfig, index: u64) -> usize {
        self.reset();
        let n = step_count(t, config.step);
        if n == 0 {
            return 0;
        }
        let h = t / n as f64;
        let sqrt_h = libm::sqrt(h);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(index);
        let d = self.d;
        let mut clipped = 0;
        for _ in 0..n {
            for x in self.db.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *x = z * sqrt_h;
            }
            // t2 = sqrt(S) dB Q
            mul(&self.sqrt_s, &self.db, &mut self.t1, d);
            mul(&self.t1, &self.q, &mut self.t2, d);
            // t1 = S + (M S + S M^T + b) h + t2 + t2^T
            for i in 0..d {
                for j in 0..d {
                    let mut ms = 0.0;
                    let mut sm = 0.0;
                    for k in 0..d {
                        ms += self.m[i * d + k] * self.s[k * d + j];
                        sm += self.s[i * d + k] * self.m[j * d + k];
                    }
                    self.t1[i * d + j] =
                        self.s[i * d + j] + (ms + sm + self.b[i * d + j]) * h + self.t2[i * d + j] + self.t2[j * d + i];
                }
            }
            for (acc, x) in self.integral.iter_mut().zip(&self.s) {
                *acc += 0.5 * h * x;
            }
            if self.decompose() {
                clipped += 1;
            }
            for (acc, x) in self.integral.iter_mut().zip(&self.s) {
                *acc += 0.5 * h * x;
            }
        }
        clipped
    }

    fn laplace_sample(&mut self, query: &LaplaceQuery, config: &McConfig, index: u64) -> (f64, usize) {
        let clipped = self.run(query.t, config, index);
        let d = self.d;
        let mut expo = 0.0;
        for i in 0..d {
            for j in 0..d {
                expo += query.w[(i, j)] * self.s[j * d + i] + query.v[(i, j)] * self.integral[j * d + i];
            }
        }
        (libm::exp(-expo), clipped)
    }
}

fn mul(a: &[f64], b: &[f64], out: &mut [f64], d: usize) {
    for i in 0..d {
        for j in 0..d {
            let mut x = 0.0;
            for k in 0..d {
                x += a[i * d + k] * b[k * d + j];
            }
            out[i * d + j] = x;
        }
    }
}

/// Cyclic Jacobi eigenvalue iteration on a symmetric row-major matrix.
/// On return the diagonal of `a` holds the eigenvalues and the columns of
/// `v` the eigenvectors.
fn jacobi_eigen(a: &mut [f64], v: &mut [f64], d: usize) {
    v.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let scale: f64 = a.iter().map(|x| x * x).sum();
    if scale == 0.0 {
        return;
    }
    for _ in 0..64 {
        let mut off = 0.0;
        for p in 0..d {
            for q in p + 1..d {
                off += a[p * d + q] * a[p * d + q];
            }
        }
        if off <= 1e-32 * scale {
            return;
        }
        for p in 0..d {
            for q in p + 1..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..d {
                    let (kp, kq) = (a[k * d + p], a[k * d + q]);
                    a[k * d + p] = c * kp - s * kq;
                    a[k * d + q] = s * kp + c * kq;
                }
                for k in 0..d {
                    let (pk, qk) = (a[p * d + k], a[q * d + k]);
                    a[p * d + k] = c * pk - s * qk;
                    a[q * d + k] = s * pk + c * qk;
                }
                for k in 0..d {
                    let (kp, kq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * kp - s * kq;
                    v[k * d + q] = s * kp + c * kq;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests;
