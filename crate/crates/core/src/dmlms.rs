//! Diffusion multi-rate LMS (adapt-then-combine) for distributed estimation,
//! together with the centralized and non-cooperative baselines.
//!
//! Every node holds a high-rate regressor `x_k(n)` (length `M1`) and a
//! low-rate regressor `u_k(m)` (length `M2`) whose frame is refreshed only
//! at update instants `n = delta * m + offset` and held in between. The
//! output at any instant is
//!
//! ```text
//! y_k(n) = x_k(n)^T w_k + u_k(m)^T h_k
//! ```
//!
//! An ATC round first adapts every node from its own combined estimate,
//!
//! ```text
//! phi_k = w_k + mu1 e_k(n) x_k(n)
//! psi_k = h_k + mu2 e_k(n) u_k(m)
//! ```
//!
//! and then replaces each estimate by the convex combination
//! `w_k = sum_{l in N_k} c_{l,k} phi_l` (likewise for `h_k`).

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{network_emse, MetricKind, MetricSeries};
use crate::multirate::{draw_profiles, generate_reference, NodeSignalProfile, RateSchedule, TapDelayLine};
use crate::plant::{dot, random_plant, TwoRatePlant};
use crate::seeding::{purpose, substream, trial_purpose};
use crate::topology::{metropolis_weights, random_connected_topology, validate_combination, CombinationMatrix, Topology};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub mu1: f64,
    pub mu2: f64,
}

impl StepSizes {
    /// Both steps must be finite and non-negative; `mu2 = 0` freezes the
    /// low-rate branch and `mu1 = mu2 = 0` freezes the whole filter.
    pub fn new(mu1: f64, mu2: f64) -> Result<Self> {
        for (name, v) in [("mu1", mu1), ("mu2", mu2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Argument(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        Ok(Self { mu1, mu2 })
    }
}

/// When the adapt/combine round runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Cadence {
    /// At every high-rate instant, with the held low-rate frame.
    #[default]
    Sample,
    /// Only at update instants `n = delta * m + offset`.
    Tick,
}

impl Cadence {
    pub fn adapts_at(self, schedule: RateSchedule, n: usize) -> bool {
        match self {
            Cadence::Sample => true,
            Cadence::Tick => schedule.is_update_instant(n),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Cadence::Sample => "sample",
            Cadence::Tick => "tick",
        }
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub w_hat: Vec<f64>,
    pub h_hat: Vec<f64>,
    pub phi: Vec<f64>,
    pub psi: Vec<f64>,
    pub x_line: TapDelayLine,
    pub u_line: TapDelayLine,
}

impl NodeState {
    pub fn new(m1: usize, m2: usize) -> Result<Self> {
        Ok(Self {
            w_hat: vec![0.0; m1],
            h_hat: vec![0.0; m2],
            phi: vec![0.0; m1],
            psi: vec![0.0; m2],
            x_line: TapDelayLine::new(m1)?,
            u_line: TapDelayLine::new(m2)?,
        })
    }

    /// Push the new high-rate sample, and the new low-rate sample when `n`
    /// is an update instant.
    pub fn advance(&mut self, schedule: RateSchedule, n: usize, x: f64, u: f64) {
        self.x_line.push(x);
        if schedule.is_update_instant(n) {
            self.u_line.push(u);
        }
    }

    /// Store the intermediates computed from explicit regressors.
    pub fn adapt_with(&mut self, e: f64, steps: StepSizes, x_reg: impl Iterator<Item = f64>, u_reg: impl Iterator<Item = f64>) {
        step_from(&mut self.phi, &self.w_hat, steps.mu1 * e, x_reg);
        step_from(&mut self.psi, &self.h_hat, steps.mu2 * e, u_reg);
    }

    /// Store the intermediates computed from the node's own tap lines.
    pub fn adapt_from_lines(&mut self, e: f64, steps: StepSizes) {
        step_from(&mut self.phi, &self.w_hat, steps.mu1 * e, self.x_line.taps().iter().copied());
        step_from(&mut self.psi, &self.h_hat, steps.mu2 * e, self.u_line.taps().iter().copied());
    }
}

fn step_from(out: &mut [f64], base: &[f64], gain: f64, reg: impl Iterator<Item = f64>) {
    for ((o, b), r) in out.iter_mut().zip(base).zip(reg) {
        *o = b + gain * r;
    }
}

pub fn node_output(state: &NodeState) -> f64 {
    dot(state.x_line.taps(), &state.w_hat) + dot(state.u_line.taps(), &state.h_hat)
}

pub fn node_error(d: f64, y: f64) -> f64 {
    d - y
}

/// Intermediates `(phi, psi)` for error `e`, starting from the node's
/// combined estimates.
pub fn adapt(state: &NodeState, e: f64, steps: StepSizes) -> (Vec<f64>, Vec<f64>) {
    let mut next = state.clone();
    next.adapt_from_lines(e, steps);
    (next.phi, next.psi)
}

/// Combined estimates for node `k` from every neighbor's intermediates.
///
/// Evaluated as `phi_k + sum_{l != k} c_{l,k} (phi_l - phi_k)`, which equals
/// `sum_l c_{l,k} phi_l` for a column summing to one and keeps a consensus
/// (all `phi_l` equal) exactly fixed.
pub fn combine(
    phis: &[Vec<f64>],
    psis: &[Vec<f64>],
    combination: &CombinationMatrix,
    topology: &Topology,
    k: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut w = phis[k].clone();
    let mut h = psis[k].clone();
    for &l in topology.neighborhood(k).iter().filter(|&&l| l != k) {
        let c = combination.get(l, k);
        if c == 0.0 {
            continue;
        }
        w.iter_mut().zip(&phis[l]).zip(&phis[k]).for_each(|((acc, p), own)| *acc += c * (p - own));
        h.iter_mut().zip(&psis[l]).zip(&psis[k]).for_each(|((acc, p), own)| *acc += c * (p - own));
    }
    (w, h)
}

/// Run the combine step for every node from the intermediates currently
/// stored in `nodes`.
pub(crate) fn combine_all(nodes: &mut [NodeState], combination: &CombinationMatrix, topology: &Topology) {
    let phis: Vec<Vec<f64>> = nodes.iter().map(|s| s.phi.clone()).collect();
    let psis: Vec<Vec<f64>> = nodes.iter().map(|s| s.psi.clone()).collect();
    for (k, node) in nodes.iter_mut().enumerate() {
        let (w, h) = combine(&phis, &psis, combination, topology, k);
        node.w_hat = w;
        node.h_hat = h;
    }
}

/// Common surface of the three estimation strategies.
pub trait Estimator {
    fn node_count(&self) -> usize;
    fn schedule(&self) -> RateSchedule;
    fn cadence(&self) -> Cadence;
    /// Shift the new samples into every node's regressors.
    fn advance(&mut self, n: usize, x: &[f64], u: &[f64]);
    /// `(x_k(n), u_k(m))` regressors of node `k`.
    fn regressors(&self, k: usize) -> (&[f64], &[f64]);
    fn outputs(&self) -> Vec<f64>;
    /// One full adaptation round against the desired responses; returns the
    /// per-node errors.
    fn iterate(&mut self, desired: &[f64]) -> Vec<f64>;

    fn adapts_at(&self, n: usize) -> bool {
        self.cadence().adapts_at(self.schedule(), n)
    }
}

#[derive(Debug, Clone)]
pub struct NetworkState {
    pub nodes: Vec<NodeState>,
    pub topology: Topology,
    pub combination: CombinationMatrix,
    pub schedule: RateSchedule,
    pub steps: StepSizes,
    pub cadence: Cadence,
}

impl NetworkState {
    pub fn new(
        topology: Topology,
        combination: CombinationMatrix,
        schedule: RateSchedule,
        steps: StepSizes,
        (m1, m2): (usize, usize),
        cadence: Cadence,
    ) -> Result<Self> {
        if let Err(violations) = validate_combination(&combination, &topology) {
            let listed: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(Error::Argument(format!("invalid combination matrix: {}", listed.join("; "))));
        }
        let nodes = (0..topology.node_count())
            .map(|_| NodeState::new(m1, m2))
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

    /// One synchronous ATC round: every node computes its error and adapts,
    /// then every node combines the fresh intermediates of its neighbors.
    pub fn dmlms_iterate(&mut self, desired: &[f64]) -> Vec<f64> {
        let steps = self.steps;
        let errors: Vec<f64> = self
            .nodes
            .iter_mut()
            .zip(desired)
            .map(|(node, &d)| {
                let e = node_error(d, node_output(node));
                node.adapt_from_lines(e, steps);
                e
            })
            .collect();
        combine_all(&mut self.nodes, &self.combination, &self.topology);
        errors
    }
}

impl Estimator for NetworkState {
    fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn schedule(&self) -> RateSchedule {
        self.schedule
    }

    fn cadence(&self) -> Cadence {
        self.cadence
    }

    fn advance(&mut self, n: usize, x: &[f64], u: &[f64]) {
        let schedule = self.schedule;
        for (k, node) in self.nodes.iter_mut().enumerate() {
            node.advance(schedule, n, x[k], u[k]);
        }
    }

    fn regressors(&self, k: usize) -> (&[f64], &[f64]) {
        (self.nodes[k].x_line.taps(), self.nodes[k].u_line.taps())
    }

    fn outputs(&self) -> Vec<f64> {
        self.nodes.iter().map(node_output).collect()
    }

    fn iterate(&mut self, desired: &[f64]) -> Vec<f64> {
        self.dmlms_iterate(desired)
    }
}

/// Fusion-center baseline: one shared estimate updated with the average of
/// all nodes' gradient terms.
#[derive(Debug, Clone)]
pub struct CentralizedState {
    pub w_hat: Vec<f64>,
    pub h_hat: Vec<f64>,
    lines: Vec<(TapDelayLine, TapDelayLine)>,
    schedule: RateSchedule,
    steps: StepSizes,
    cadence: Cadence,
}

impl CentralizedState {
    pub fn new(node_count: usize, schedule: RateSchedule, steps: StepSizes, (m1, m2): (usize, usize), cadence: Cadence) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::Argument("network needs at least one node".into()));
        }
        let lines = (0..node_count)
            .map(|_| Ok((TapDelayLine::new(m1)?, TapDelayLine::new(m2)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            w_hat: vec![0.0; m1],
            h_hat: vec![0.0; m2],
            lines,
            schedule,
            steps,
            cadence,
        })
    }

    pub fn centralized_iterate(&mut self, desired: &[f64]) -> Vec<f64> {
        let n = self.lines.len() as f64;
        let errors: Vec<f64> = self.outputs().iter().zip(desired).map(|(&y, &d)| node_error(d, y)).collect();
        let mut gw = vec![0.0; self.w_hat.len()];
        let mut gh = vec![0.0; self.h_hat.len()];
        for ((x, u), &e) in self.lines.iter().zip(&errors) {
            let (g1, g2) = (self.steps.mu1 * e, self.steps.mu2 * e);
            gw.iter_mut().zip(x.taps()).for_each(|(g, v)| *g += g1 * v);
            gh.iter_mut().zip(u.taps()).for_each(|(g, v)| *g += g2 * v);
        }
        self.w_hat.iter_mut().zip(&gw).for_each(|(w, g)| *w += g / n);
        self.h_hat.iter_mut().zip(&gh).for_each(|(h, g)| *h += g / n);
        errors
    }
}

impl Estimator for CentralizedState {
    fn node_count(&self) -> usize {
        self.lines.len()
    }

    fn schedule(&self) -> RateSchedule {
        self.schedule
    }

    fn cadence(&self) -> Cadence {
        self.cadence
    }

    fn advance(&mut self, n: usize, x: &[f64], u: &[f64]) {
        let tick = self.schedule.is_update_instant(n);
        for (k, (xl, ul)) in self.lines.iter_mut().enumerate() {
            xl.push(x[k]);
            if tick {
                ul.push(u[k]);
            }
        }
    }

    fn regressors(&self, k: usize) -> (&[f64], &[f64]) {
        (self.lines[k].0.taps(), self.lines[k].1.taps())
    }

    fn outputs(&self) -> Vec<f64> {
        self.lines
            .iter()
            .map(|(x, u)| dot(x.taps(), &self.w_hat) + dot(u.taps(), &self.h_hat))
            .collect()
    }

    fn iterate(&mut self, desired: &[f64]) -> Vec<f64> {
        self.centralized_iterate(desired)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    Diffusion,
    Centralized,
    NonCooperative,
}

impl Strategy {
    pub fn curve_name(self) -> &'static str {
        match self {
            Strategy::Diffusion => "dmlms_emse_db",
            Strategy::Centralized => "centralized_emse_db",
            Strategy::NonCooperative => "noncooperative_emse_db",
        }
    }
}

/// Experiment-level quantities fixed once per master seed.
#[derive(Debug, Clone)]
pub struct NetworkSetup {
    pub topology: Topology,
    pub combination: CombinationMatrix,
    pub profiles: Vec<NodeSignalProfile>,
}

impl NetworkSetup {
    /// Random topology of the given mean degree, metropolis weights and
    /// uniformly drawn per-node profiles.
    pub fn generate(master_seed: u64, node_count: usize, mean_degree: f64, variance: (f64, f64), snr_db: (f64, f64)) -> Result<Self> {
        let topology = random_connected_topology(&mut substream(master_seed, &[purpose::TOPOLOGY]), node_count, mean_degree)?;
        Self::with_topology(master_seed, topology, variance, snr_db)
    }

    pub fn with_topology(master_seed: u64, topology: Topology, variance: (f64, f64), snr_db: (f64, f64)) -> Result<Self> {
        let profiles = draw_profiles(&mut substream(master_seed, &[purpose::PROFILES]), topology.node_count(), variance, snr_db)?;
        let combination = metropolis_weights(&topology);
        Ok(Self {
            topology,
            combination,
            profiles,
        })
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }
}

#[derive(Debug, Clone)]
pub struct EstimationConfig {
    pub m1: usize,
    pub m2: usize,
    pub schedule: RateSchedule,
    pub steps: StepSizes,
    pub cadence: Cadence,
    pub trials: usize,
    pub iterations: usize,
    pub master_seed: u64,
    /// When false, `d_k(n) = z_k(n)` exactly.
    pub observation_noise: bool,
    pub parallel: bool,
    /// Use this plant in every trial instead of drawing a random one.
    pub fixed_plant: Option<TwoRatePlant>,
}

/// Per-node input and observation-noise sequences of one trial.
#[derive(Debug, Clone)]
pub struct TrialSignals {
    pub x: Vec<Vec<f64>>,
    pub noise: Vec<Vec<f64>>,
}

impl TrialSignals {
    pub fn x_at(&self, n: usize) -> Vec<f64> {
        self.x.iter().map(|x| x[n]).collect()
    }
}

pub(crate) fn trial_sources(master_seed: u64, trial: usize, profiles: &[NodeSignalProfile], len: usize) -> Vec<Vec<f64>> {
    profiles
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let mut rng = substream(master_seed, &[purpose::TRIAL, trial as u64, trial_purpose::SOURCE, k as u64]);
            generate_reference(&mut rng, p, len)
        })
        .collect()
}

/// Observation noise variance for a node whose clean output has power
/// `input_variance * plant_energy`.
pub fn noise_variance(profile: &NodeSignalProfile, plant_energy: f64) -> f64 {
    profile.input_variance * plant_energy / 10f64.powf(profile.snr_db / 10.0)
}

fn trial_signals(cfg: &EstimationConfig, setup: &NetworkSetup, trial: usize, plant_energy: f64) -> Result<TrialSignals> {
    let x = trial_sources(cfg.master_seed, trial, &setup.profiles, cfg.iterations);
    let noise = setup
        .profiles
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if !cfg.observation_noise {
                return Ok(vec![0.0; cfg.iterations]);
            }
            let sd = noise_variance(p, plant_energy).sqrt();
            let dist = Normal::new(0.0, sd).map_err(|e| Error::Argument(e.to_string()))?;
            let mut rng = substream(cfg.master_seed, &[purpose::TRIAL, trial as u64, trial_purpose::NOISE, k as u64]);
            Ok((0..cfg.iterations).map(|_| dist.sample(&mut rng)).collect())
        })
        .collect::<Result<_>>()?;
    Ok(TrialSignals { x, noise })
}

fn build_estimator(cfg: &EstimationConfig, setup: &NetworkSetup, strategy: Strategy) -> Result<Box<dyn Estimator>> {
    let dims = (cfg.m1, cfg.m2);
    Ok(match strategy {
        Strategy::Diffusion => Box::new(NetworkState::new(
            setup.topology.clone(),
            setup.combination.clone(),
            cfg.schedule,
            cfg.steps,
            dims,
            cfg.cadence,
        )?),
        Strategy::NonCooperative => Box::new(NetworkState::new(
            setup.topology.clone(),
            CombinationMatrix::identity(setup.node_count()),
            cfg.schedule,
            cfg.steps,
            dims,
            cfg.cadence,
        )?),
        Strategy::Centralized => Box::new(CentralizedState::new(setup.node_count(), cfg.schedule, cfg.steps, dims, cfg.cadence)?),
    })
}

/// Network EMSE at every high-rate instant of one trial.
pub fn run_estimation_trial(cfg: &EstimationConfig, setup: &NetworkSetup, strategy: Strategy, trial: usize) -> Result<Vec<f64>> {
    let plant = match &cfg.fixed_plant {
        Some(p) => p.clone(),
        None => random_plant(
            &mut substream(cfg.master_seed, &[purpose::TRIAL, trial as u64, trial_purpose::PLANT]),
            cfg.m1,
            cfg.m2,
        )?,
    };
    let signals = trial_signals(cfg, setup, trial, plant.energy())?;
    let mut est = build_estimator(cfg, setup, strategy)?;
    let nodes = setup.node_count();
    let mut curve = Vec::with_capacity(cfg.iterations);
    let mut z = vec![0.0; nodes];
    let mut d = vec![0.0; nodes];
    for n in 0..cfg.iterations {
        let x = signals.x_at(n);
        // The low-rate channel is the decimated node source.
        est.advance(n, &x, &x);
        for k in 0..nodes {
            let (xr, ur) = est.regressors(k);
            z[k] = plant.output(xr, ur)?;
            d[k] = z[k] + signals.noise[k][n];
        }
        let y = est.outputs();
        curve.push(network_emse(&z, &y)?);
        if est.adapts_at(n) {
            est.iterate(&d);
        }
    }
    Ok(curve)
}

/// Run `f` for every trial index; results come back in trial order whether
/// or not the trials ran in parallel.
pub(crate) fn run_trials<T, F>(trials: usize, parallel: bool, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if parallel {
        (0..trials).into_par_iter().map(&f).collect()
    } else {
        (0..trials).map(f).collect()
    }
}

pub(crate) fn average_curves(curves: &[Vec<f64>], len: usize) -> Vec<f64> {
    let mut sum = vec![0.0; len];
    for c in curves {
        sum.iter_mut().zip(c).for_each(|(s, v)| *s += v);
    }
    let count = curves.len() as f64;
    sum.into_iter().map(|s| s / count).collect()
}

/// Trial-averaged network EMSE learning curve.
pub fn run_estimation(cfg: &EstimationConfig, setup: &NetworkSetup, strategy: Strategy) -> Result<MetricSeries> {
    if cfg.trials == 0 {
        return Err(Error::Argument("at least one trial is required".into()));
    }
    if cfg.m1 == 0 || cfg.m2 == 0 {
        return Err(Error::Argument("filter lengths must be at least 1".into()));
    }
    let curves = run_trials(cfg.trials, cfg.parallel, |t| run_estimation_trial(cfg, setup, strategy, t))?;
    Ok(MetricSeries {
        values: average_curves(&curves, cfg.iterations),
        trial_count: cfg.trials,
        kind: MetricKind::Emse,
        metadata: vec![
            ("master_seed".into(), cfg.master_seed.to_string()),
            ("strategy".into(), strategy.curve_name().into()),
            ("mu1".into(), cfg.steps.mu1.to_string()),
            ("mu2".into(), cfg.steps.mu2.to_string()),
        ],
    })
}
