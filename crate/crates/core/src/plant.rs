//! Unknown two-rate plant, FIR paths and filtered references.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::multirate::{decimate, hold_upsample, RateSchedule, TapDelayLine};

/// Unknown system `z = x^T w + u^T h`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoRatePlant {
    w_true: Vec<f64>,
    h_true: Vec<f64>,
}

impl TwoRatePlant {
    pub fn new(w_true: Vec<f64>, h_true: Vec<f64>) -> Result<Self> {
        if w_true.is_empty() || h_true.is_empty() {
            return Err(Error::Argument("plant coefficient vectors must be non-empty".into()));
        }
        Ok(Self { w_true, h_true })
    }

    pub fn w_true(&self) -> &[f64] {
        &self.w_true
    }

    pub fn h_true(&self) -> &[f64] {
        &self.h_true
    }

    pub fn output(&self, x_vec: &[f64], u_vec: &[f64]) -> Result<f64> {
        check_len(self.w_true.len(), x_vec.len())?;
        check_len(self.h_true.len(), u_vec.len())?;
        Ok(dot(x_vec, &self.w_true) + dot(u_vec, &self.h_true))
    }

    /// Sum of squared coefficients over both branches.
    pub fn energy(&self) -> f64 {
        dot(&self.w_true, &self.w_true) + dot(&self.h_true, &self.h_true)
    }
}

pub fn plant_output(plant: &TwoRatePlant, x_vec: &[f64], u_vec: &[f64]) -> Result<f64> {
    plant.output(x_vec, u_vec)
}

/// Primary path `P(z)` and secondary path `S(z)`; the secondary-path model
/// used for filtering references is this same response.
#[derive(Debug, Clone, PartialEq)]
pub struct AcousticPaths {
    primary: Vec<f64>,
    secondary: Vec<f64>,
}

impl AcousticPaths {
    pub fn new(primary: Vec<f64>, secondary: Vec<f64>) -> Result<Self> {
        if primary.is_empty() || secondary.is_empty() {
            return Err(Error::Argument("path impulse responses must be non-empty".into()));
        }
        Ok(Self { primary, secondary })
    }

    pub fn unit_impulses() -> Self {
        Self {
            primary: vec![1.0],
            secondary: vec![1.0],
        }
    }

    pub fn primary(&self) -> &[f64] {
        &self.primary
    }

    pub fn secondary(&self) -> &[f64] {
        &self.secondary
    }
}

/// Streaming causal FIR filter, zero initial state.
#[derive(Debug, Clone)]
pub struct FirState {
    coeffs: Vec<f64>,
    history: TapDelayLine,
}

impl FirState {
    pub fn new(coeffs: &[f64]) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Argument("FIR filter needs at least one coefficient".into()));
        }
        Ok(Self {
            coeffs: coeffs.to_vec(),
            history: TapDelayLine::new(coeffs.len())?,
        })
    }

    pub fn process(&mut self, sample: f64) -> f64 {
        self.history.push(sample);
        dot(self.history.taps(), &self.coeffs)
    }
}

/// Causal convolution truncated to the input length:
/// `y[n] = sum_i h[i] x[n - i]`, with `x[t] = 0` for `t < 0`.
pub fn fir_filter(h: &[f64], x: &[f64]) -> Result<Vec<f64>> {
    let mut state = FirState::new(h)?;
    Ok(x.iter().map(|&v| state.process(v)).collect())
}

/// `x'(n) = (s * x)(n)`.
pub fn filtered_reference_high(x: &[f64], paths: &AcousticPaths) -> Result<Vec<f64>> {
    fir_filter(&paths.secondary, x)
}

/// Low-rate filtered reference `u'(m)`: the low-rate sequence is held at the
/// high rate between its update instants, filtered by `s`, and read back at
/// `n = delta * m + offset`.
pub fn filtered_reference_low(
    u: &[f64],
    paths: &AcousticPaths,
    schedule: RateSchedule,
) -> Result<Vec<f64>> {
    if u.is_empty() {
        FirState::new(&paths.secondary)?;
        return Ok(Vec::new());
    }
    let high_len = schedule.high_index(u.len() - 1) + 1;
    let held = hold_upsample(u, schedule, high_len);
    let filtered = fir_filter(&paths.secondary, &held)?;
    Ok(decimate(&filtered, schedule))
}

/// Disturbance at the error microphone, `d(n) = (p * x)(n)`.
pub fn primary_disturbance(paths: &AcousticPaths, x: &[f64]) -> Result<Vec<f64>> {
    fir_filter(&paths.primary, x)
}

fn unit_gaussian_vector<R: Rng + ?Sized>(rng: &mut R, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|c| *c /= norm);
    v
}

pub fn random_plant<R: Rng + ?Sized>(rng: &mut R, m1: usize, m2: usize) -> Result<TwoRatePlant> {
    if m1 == 0 || m2 == 0 {
        return Err(Error::Argument("plant lengths must be at least 1".into()));
    }
    let w = unit_gaussian_vector(rng, m1);
    let h = unit_gaussian_vector(rng, m2);
    TwoRatePlant::new(w, h)
}

pub fn random_paths<R: Rng + ?Sized>(
    rng: &mut R,
    primary_len: usize,
    secondary_len: usize,
) -> Result<AcousticPaths> {
    if primary_len == 0 || secondary_len == 0 {
        return Err(Error::Argument("path lengths must be at least 1".into()));
    }
    let p = unit_gaussian_vector(rng, primary_len);
    let s = unit_gaussian_vector(rng, secondary_len);
    AcousticPaths::new(p, s)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn check_len(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::Dimension { expected, actual })
    }
}
