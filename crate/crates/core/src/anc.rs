//! Filtered-x diffusion multi-rate LMS for active noise control.
//!
//! Each node drives a loudspeaker with `y_k(n)`; the error microphone hears
//! `e_k(n) = d_k(n) - (s * y_k)(n)`. Adaptation uses references filtered by
//! the secondary path `s`: the high-rate `x'_k = s * x_k`, and a low-rate
//! reference obtained by filtering the held low-rate stream at the high rate.
//! Combination is shared with the estimation engine.

use rand_distr::{Distribution, Normal};

use crate::dmlms::{average_curves, combine_all, node_output, run_trials, trial_sources, Cadence, NetworkSetup, NodeState, StepSizes};
use crate::error::{Error, Result};
use crate::metrics::{noise_reduction, MetricKind, MetricSeries};
use crate::multirate::{RateSchedule, TapDelayLine};
use crate::plant::{dot, primary_disturbance, random_paths, AcousticPaths, FirState};
use crate::seeding::{purpose, substream, trial_purpose};
use crate::topology::{validate_combination, CombinationMatrix, Topology};

#[derive(Debug, Clone)]
pub struct AncNodeState {
    /// Controller weights, intermediates and the raw reference lines.
    pub base: NodeState,
    /// `x'_k(n)`, length `M1`.
    pub xprime_line: TapDelayLine,
    /// High-rate history of the filtered held low-rate stream, length
    /// `delta * (M2 - 1) + 1`. Its taps `0, delta, 2 delta, ...` form the
    /// low-rate filtered regressor; at update instants they are exactly
    /// `u'_k(m), u'_k(m - 1), ...`.
    pub uprime_line: TapDelayLine,
    x_filter: FirState,
    u_filter: FirState,
    /// Secondary-path buffer acting on the controller output.
    y_filter: FirState,
    m2: usize,
}

impl AncNodeState {
    pub fn new(m1: usize, m2: usize, secondary: &[f64], schedule: RateSchedule) -> Result<Self> {
        Ok(Self {
            base: NodeState::new(m1, m2)?,
            xprime_line: TapDelayLine::new(m1)?,
            uprime_line: TapDelayLine::new(schedule.delta() * (m2 - 1) + 1)?,
            x_filter: FirState::new(secondary)?,
            u_filter: FirState::new(secondary)?,
            y_filter: FirState::new(secondary)?,
            m2,
        })
    }

    /// Shift the raw sample `x` (and, at update instants, the low-rate
    /// sample `u`) into the raw and filtered reference lines.
    pub fn advance(&mut self, schedule: RateSchedule, n: usize, x: f64, u: f64) {
        self.base.advance(schedule, n, x, u);
        self.xprime_line.push(self.x_filter.process(x));
        let held = if schedule.held_index(n).is_some() {
            self.base.u_line.newest()
        } else {
            0.0
        };
        self.uprime_line.push(self.u_filter.process(held));
    }

    /// Low-rate filtered regressor for the current instant.
    pub fn uprime_regressor(&self, schedule: RateSchedule) -> Vec<f64> {
        self.uprime_line.strided(schedule.delta(), self.m2).collect()
    }

    /// Feed the controller output through the secondary path and return
    /// what reaches the error microphone.
    fn emit(&mut self, y: f64) -> f64 {
        self.y_filter.process(y)
    }
}

/// `d - sum_i s[i] y(n - i)`, with `y_history` most recent first.
pub fn anc_error(d: f64, secondary: &[f64], y_history: &[f64]) -> f64 {
    d - dot(secondary, y_history)
}

pub fn anc_controller_output(state: &AncNodeState) -> f64 {
    node_output(&state.base)
}

/// Filtered-x intermediates from the node's combined estimates.
pub fn fx_adapt(state: &AncNodeState, e: f64, steps: StepSizes, schedule: RateSchedule) -> (Vec<f64>, Vec<f64>) {
    let mut base = state.base.clone();
    base.adapt_with(
        e,
        steps,
        state.xprime_line.taps().iter().copied(),
        state.uprime_line.strided(schedule.delta(), state.m2),
    );
    (base.phi, base.psi)
}

/// Per-instant quantities of one network step.
#[derive(Debug, Clone, PartialEq)]
pub struct AncStep {
    pub outputs: Vec<f64>,
    pub anti_noise: Vec<f64>,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct AncNetwork {
    pub nodes: Vec<AncNodeState>,
    pub topology: Topology,
    pub combination: CombinationMatrix,
    pub schedule: RateSchedule,
    pub steps: StepSizes,
    pub cadence: Cadence,
}

impl AncNetwork {
    pub fn new(
        topology: Topology,
        combination: CombinationMatrix,
        schedule: RateSchedule,
        steps: StepSizes,
        (m1, m2): (usize, usize),
        secondary: &[f64],
        cadence: Cadence,
    ) -> Result<Self> {
        if let Err(violations) = validate_combination(&combination, &topology) {
            let listed: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::Argument(format!("invalid combination matrix: {}", listed.join("; "))));
        }
        let nodes = (0..topology.node_count())
            .map(|_| AncNodeState::new(m1, m2, secondary, schedule))
            .collect::<Result<_>>()?;
        Ok(Self {
            nodes,
            topology,
            combination,
            schedule,
            steps,
            cadence,
        })
    }

    /// Advance every node to instant `n`, emit anti-noise, measure the
    /// residual against `desired` and, if the cadence says so, run one
    /// filtered-x ATC round.
    pub fn step(&mut self, n: usize, x: &[f64], desired: &[f64]) -> AncStep {
        let schedule = self.schedule;
        let steps = self.steps;
        let adapt = self.cadence.adapts_at(schedule, n);
        let mut out = AncStep {
            outputs: Vec::with_capacity(self.nodes.len()),
            anti_noise: Vec::with_capacity(self.nodes.len()),
            errors: Vec::with_capacity(self.nodes.len()),
        };
        for (k, node) in self.nodes.iter_mut().enumerate() {
            // Low-rate reference is the decimated node source.
            node.advance(schedule, n, x[k], x[k]);
            let y = anc_controller_output(node);
            let anti = node.emit(y);
            let e = desired[k] - anti;
            if adapt {
                let u_reg = node.uprime_line.strided(schedule.delta(), node.m2);
                node.base.adapt_with(e, steps, node.xprime_line.taps().iter().copied(), u_reg);
            }
            out.outputs.push(y);
            out.anti_noise.push(anti);
            out.errors.push(e);
        }
        if adapt {
            let mut bases: Vec<NodeState> = self.nodes.iter().map(|s| s.base.clone()).collect();
            combine_all(&mut bases, &self.combination, &self.topology);
            for (node, base) in self.nodes.iter_mut().zip(bases) {
                node.base.w_hat = base.w_hat;
                node.base.h_hat = base.h_hat;
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct AncConfig {
    pub m1: usize,
    pub m2: usize,
    pub primary_len: usize,
    pub secondary_len: usize,
    pub schedule: RateSchedule,
    pub steps: StepSizes,
    pub cadence: Cadence,
    pub trials: usize,
    pub iterations: usize,
    pub master_seed: u64,
    /// Error-microphone noise SNR relative to the disturbance power; `None`
    /// disables it.
    pub mic_snr_db: Option<f64>,
    pub parallel: bool,
    /// Use these paths in every trial instead of drawing random ones.
    pub fixed_paths: Option<AcousticPaths>,
}

/// Trial-averaged NR curve and the uncontrolled disturbance power curve of
/// the same trials.
#[derive(Debug, Clone, PartialEq)]
pub struct AncOutcome {
    pub nr: MetricSeries,
    pub disturbance: MetricSeries,
}

impl AncOutcome {
    /// Conventional attenuation `10 log10(disturbance / residual)` per
    /// instant.
    pub fn attenuation_db(&self) -> Vec<f64> {
        self.disturbance
            .values
            .iter()
            .zip(&self.nr.values)
            .map(|(d, r)| 10.0 * (d / r).log10())
            .collect()
    }
}

fn trial_paths(cfg: &AncConfig, trial: usize) -> Result<AcousticPaths> {
    match &cfg.fixed_paths {
        Some(p) => Ok(p.clone()),
        None => random_paths(
            &mut substream(cfg.master_seed, &[purpose::TRIAL, trial as u64, trial_purpose::PLANT]),
            cfg.primary_len,
            cfg.secondary_len,
        ),
    }
}

/// `(NR, disturbance power)` at every instant of one trial.
pub fn run_anc_trial(cfg: &AncConfig, setup: &NetworkSetup, trial: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let paths = trial_paths(cfg, trial)?;
    let x = trial_sources(cfg.master_seed, trial, &setup.profiles, cfg.iterations);
    let mut d = x
        .iter()
        .map(|xk| primary_disturbance(&paths, xk))
        .collect::<Result<Vec<_>>>()?;
    if let Some(snr) = cfg.mic_snr_db {
        let energy = dot(paths.primary(), paths.primary());
        for (k, dk) in d.iter_mut().enumerate() {
            let var = setup.profiles[k].input_variance * energy / 10f64.powf(snr / 10.0);
            let dist = Normal::new(0.0, var.sqrt()).map_err(|e| Error::Argument(e.to_string()))?;
            let mut rng = substream(cfg.master_seed, &[purpose::TRIAL, trial as u64, trial_purpose::NOISE, k as u64]);
            dk.iter_mut().for_each(|v| *v += dist.sample(&mut rng));
        }
    }
    let mut net = AncNetwork::new(
        setup.topology.clone(),
        setup.combination.clone(),
        cfg.schedule,
        cfg.steps,
        (cfg.m1, cfg.m2),
        paths.secondary(),
        cfg.cadence,
    )?;
    let nodes = setup.node_count();
    let zeros = vec![0.0; nodes];
    let mut nr = Vec::with_capacity(cfg.iterations);
    let mut power = Vec::with_capacity(cfg.iterations);
    for n in 0..cfg.iterations {
        let xn: Vec<f64> = x.iter().map(|v| v[n]).collect();
        let dn: Vec<f64> = d.iter().map(|v| v[n]).collect();
        let step = net.step(n, &xn, &dn);
        nr.push(noise_reduction(&dn, &step.anti_noise)?);
        power.push(noise_reduction(&dn, &zeros)?);
    }
    Ok((nr, power))
}

pub fn run_anc(cfg: &AncConfig, setup: &NetworkSetup) -> Result<AncOutcome> {
    if cfg.trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    if cfg.m1 == 0 || cfg.m2 == 0 {
        return Err(Error::Argument("filter lengths must be at least 1".into()));
    }
    let per_trial = run_trials(cfg.trials, cfg.parallel, |t| run_anc_trial(cfg, setup, t))?;
    let (nr, power): (Vec<Vec<f64>>, Vec<Vec<f64>>) = per_trial.into_iter().unzip();
    let metadata = vec![
        ("master_seed".to_string(), cfg.master_seed.to_string()),
        ("mu1".to_string(), cfg.steps.mu1.to_string()),
        ("mu2".to_string(), cfg.steps.mu2.to_string()),
    ];
    Ok(AncOutcome {
        nr: MetricSeries {
            values: average_curves(&nr, cfg.iterations),
            trial_count: cfg.trials,
            kind: MetricKind::Nr,
            metadata: metadata.clone(),
        },
        disturbance: MetricSeries {
            values: average_curves(&power, cfg.iterations),
            trial_count: cfg.trials,
            kind: MetricKind::Nr,
            metadata,
        },
    })
}
