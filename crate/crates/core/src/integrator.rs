//! Time stepping of `(g(t), J(t))` under the flow vector field, with
//! structure-drift and blow-up monitoring.
//!
//! Schemes are trait objects registered by name in a [`SchemeRegistry`].

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::LieAlgebraSpec;
use crate::catalog::Scenario;
use crate::flow::flow_rhs;
use crate::geometry::Geometry;
use crate::hermitian::AlmostHermitianPair;
use crate::tensor::{Metric, TensorError};

/// Below this the metric counts as degenerate.
pub const MIN_EIG_FLOOR: f64 = 1e-10;

/// Smallest step the adaptive scheme will try before giving up.
pub const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("non-finite value in a stage")]
    NonFinite,
    #[error("metric lost positive definiteness")]
    Degenerate,
    #[error("adaptive step fell below {MIN_STEP:e} at t = {t}")]
    StepUnderflow { t: f64 },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("{field} must be positive and finite, got {value}")]
    NotPositive { field: &'static str, value: f64 },
    #[error("sample_stride must be at least 1")]
    Stride,
    #[error("k_max must be at least 1")]
    KMax,
    #[error("unknown scheme '{name}'; available: {}", .available.join(", "))]
    UnknownScheme { name: String, available: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: String,
    pub blowup_threshold: f64,
    pub drift_tolerance: f64,
    pub sample_stride: usize,
    pub k_max: usize,
    /// Local-error target of the step-halving scheme, max-norm over `(g, J)`.
    pub local_error_target: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            dt: 1e-3,
            t_end: 1.0,
            scheme: "rk4".to_string(),
            blowup_threshold: 1e6,
            drift_tolerance: 1e-8,
            sample_stride: 10,
            k_max: 2,
            local_error_target: 1e-9,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (field, value) in [
            ("dt", self.dt),
            ("t_end", self.t_end),
            ("blowup_threshold", self.blowup_threshold),
            ("drift_tolerance", self.drift_tolerance),
            ("local_error_target", self.local_error_target),
        ] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(ConfigError::NotPositive { field, value });
            }
        }
        if self.sample_stride == 0 {
            return Err(ConfigError::Stride);
        }
        if self.k_max == 0 {
            return Err(ConfigError::KMax);
        }
        Ok(())
    }
}

/// A point of the trajectory. Only positivity of `g` is enforced; `J^2 = -1`
/// and compatibility are monitored, not imposed.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub pair: AlmostHermitianPair,
}

impl FlowState {
    pub fn new(t: f64, g: DMatrix<f64>, j: DMatrix<f64>) -> Result<Self, StepError> {
        if !g.iter().chain(j.iter()).all(|v| v.is_finite()) {
            return Err(StepError::NonFinite);
        }
        let metric = Metric::new_unchecked_inverse(g).map_err(|e| match e {
            TensorError::NotPositiveDefinite => StepError::Degenerate,
            _ => StepError::NonFinite,
        })?;
        Ok(FlowState {
            t,
            pair: AlmostHermitianPair::unchecked(metric, j),
        })
    }

    pub fn g(&self) -> &DMatrix<f64> {
        self.pair.g()
    }

    pub fn j(&self) -> &DMatrix<f64> {
        self.pair.j()
    }

    /// Max entrywise distance in `(g, J)`.
    pub fn distance(&self, other: &FlowState) -> f64 {
        (self.g() - other.g()).amax().max((self.j() - other.j()).amax())
    }
}

/// The flow vector field on a fixed algebra.
pub struct FlowField<'a> {
    algebra: &'a LieAlgebraSpec,
}

impl<'a> FlowField<'a> {
    pub fn new(algebra: &'a LieAlgebraSpec) -> Self {
        FlowField { algebra }
    }

    pub fn algebra(&self) -> &LieAlgebraSpec {
        self.algebra
    }

    /// `(dg/dt, dJ/dt)` as coordinate matrices.
    pub fn eval(&self, state: &FlowState) -> Result<(DMatrix<f64>, DMatrix<f64>), StepError> {
        let rhs = flow_rhs(&state.pair, self.algebra);
        let h = rhs.variation.h.to_matrix();
        let k = rhs.k_endo;
        if !h.iter().chain(k.iter()).all(|v| v.is_finite()) {
            return Err(StepError::NonFinite);
        }
        Ok((h, k))
    }
}

/// One classical RK4 step. `g` is re-symmetrized; `J` is left as computed.
pub fn rk4_step(field: &FlowField<'_>, state: &FlowState, dt: f64) -> Result<FlowState, StepError> {
    let (g0, j0) = (state.g(), state.j());
    let at = |t: f64, k: &(DMatrix<f64>, DMatrix<f64>), c: f64| FlowState::new(t, g0 + &k.0 * c, j0 + &k.1 * c);
    let k1 = field.eval(state)?;
    let k2 = field.eval(&at(state.t + 0.5 * dt, &k1, 0.5 * dt)?)?;
    let k3 = field.eval(&at(state.t + 0.5 * dt, &k2, 0.5 * dt)?)?;
    let k4 = field.eval(&at(state.t + dt, &k3, dt)?)?;
    let w = dt / 6.0;
    let g = g0 + (&k1.0 + &k2.0 * 2.0 + &k3.0 * 2.0 + &k4.0) * w;
    let j = j0 + (&k1.1 + &k2.1 * 2.0 + &k3.1 * 2.0 + &k4.1) * w;
    let g = (&g + g.transpose()) * 0.5;
    FlowState::new(state.t + dt, g, j)
}

/// [`rk4_step`] on a bare algebra.
pub fn step(state: &FlowState, dt: f64, algebra: &LieAlgebraSpec) -> Result<FlowState, StepError> {
    rk4_step(&FlowField::new(algebra), state, dt)
}

/// Result of one accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct Advance {
    pub state: FlowState,
    pub dt_taken: f64,
    pub dt_next: f64,
}

pub trait Scheme: Send + Sync {
    fn name(&self) -> &'static str;

    /// Advance by at most `dt`; the returned `dt_taken` may be smaller.
    fn advance(&self, field: &FlowField<'_>, state: &FlowState, dt: f64) -> Result<Advance, StepError>;
}

pub struct Rk4;

impl Scheme for Rk4 {
    fn name(&self) -> &'static str {
        "rk4"
    }

    fn advance(&self, field: &FlowField<'_>, state: &FlowState, dt: f64) -> Result<Advance, StepError> {
        Ok(Advance {
            state: rk4_step(field, state, dt)?,
            dt_taken: dt,
            dt_next: dt,
        })
    }
}

/// Step halving: compare one step of size `dt` with two of size `dt/2`,
/// halve until they agree to `target`, keep the two-half-step result.
/// Steps grow back by doubling, never above `dt_max`.
pub struct Rk4Halving {
    pub target: f64,
    pub dt_max: f64,
}

impl Scheme for Rk4Halving {
    fn name(&self) -> &'static str {
        "rk4-halving"
    }

    fn advance(&self, field: &FlowField<'_>, state: &FlowState, dt: f64) -> Result<Advance, StepError> {
        let mut h = dt;
        loop {
            if h < MIN_STEP {
                return Err(StepError::StepUnderflow { t: state.t });
            }
            let attempt = rk4_step(field, state, h).and_then(|full| {
                let mid = rk4_step(field, state, 0.5 * h)?;
                let two = rk4_step(field, &mid, 0.5 * h)?;
                Ok((full.distance(&two), two))
            });
            match attempt {
                Ok((err, two)) if err <= self.target => {
                    // RK4 local error scales like h^5; 32x headroom allows doubling
                    let dt_next = if err <= self.target / 32.0 {
                        (2.0 * h).min(self.dt_max)
                    } else {
                        h
                    };
                    return Ok(Advance {
                        state: two,
                        dt_taken: h,
                        dt_next,
                    });
                }
                Ok(_) | Err(StepError::NonFinite) | Err(StepError::Degenerate) => h *= 0.5,
                Err(e) => return Err(e),
            }
        }
    }
}

type SchemeFactory = fn(&IntegratorConfig) -> Box<dyn Scheme>;

/// Name-indexed table of integration schemes.
pub struct SchemeRegistry {
    entries: Vec<(&'static str, SchemeFactory)>,
}

impl Default for SchemeRegistry {
    fn default() -> Self {
        let mut r = SchemeRegistry { entries: Vec::new() };
        r.register("rk4", |_| Box::new(Rk4));
        r.register("rk4-halving", |c| {
            Box::new(Rk4Halving {
                target: c.local_error_target,
                dt_max: c.dt,
            })
        });
        r
    }
}

impl SchemeRegistry {
    /// Registers or replaces a scheme.
    pub fn register(&mut self, name: &'static str, factory: SchemeFactory) {
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = factory,
            None => self.entries.push((name, factory)),
        }
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|(n, _)| *n).collect()
    }

    pub fn build(&self, config: &IntegratorConfig) -> Result<Box<dyn Scheme>, ConfigError> {
        self.entries
            .iter()
            .find(|(n, _)| *n == config.scheme)
            .map(|(_, f)| f(config))
            .ok_or_else(|| ConfigError::UnknownScheme {
                name: config.scheme.clone(),
                available: self.names().into_iter().map(String::from).collect(),
            })
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    BlowUp { quantity: String, value: f64 },
    DegenerateMetric { min_eig: f64 },
    StructureDrift { quantity: String, value: f64 },
    NonFinite,
    StepUnderflow,
}

impl Termination {
    pub fn code(&self) -> &'static str {
        match self {
            Termination::Completed => "completed",
            Termination::BlowUp { .. } => "blow_up",
            Termination::DegenerateMetric { .. } => "degenerate_metric",
            Termination::StructureDrift { .. } => "structure_drift",
            Termination::NonFinite => "non_finite",
            Termination::StepUnderflow => "step_underflow",
        }
    }

    pub fn is_completed(&self) -> bool {
        matches!(self, Termination::Completed)
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Termination::BlowUp { quantity, value } => write!(f, "blow_up ({quantity} = {value:e})"),
            Termination::DegenerateMetric { min_eig } => write!(f, "degenerate_metric (min eig {min_eig:e})"),
            Termination::StructureDrift { quantity, value } => {
                write!(f, "structure_drift ({quantity} = {value:e})")
            }
            other => f.write_str(other.code()),
        }
    }
}

/// Diagnostics of one state. Norms are full tensor norms in the orthonormal frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    /// Row-major `g`.
    pub g: Vec<f64>,
    /// Row-major `J`.
    #[serde(rename = "J")]
    pub j: Vec<f64>,
    #[serde(rename = "|Rm|")]
    pub rm: f64,
    #[serde(rename = "|DJ|")]
    pub dj: f64,
    #[serde(rename = "|D2J|")]
    pub d2j: f64,
    #[serde(rename = "norm_N")]
    pub norm_n: f64,
    pub norm_domega: f64,
    pub compat_residual: f64,
    pub jsq_residual: f64,
    pub min_eig_g: f64,
    #[serde(rename = "t_half_DJ")]
    pub t_half_dj: f64,
    #[serde(rename = "t_Rm")]
    pub t_rm: f64,
    #[serde(rename = "t_D2J")]
    pub t_d2j: f64,
    /// `t^{k/2} |D^k J|` for `k = 1..=k_max`.
    pub scaled_dj: Vec<f64>,
    /// `t^{(k+2)/2} |D^k Rm|` for `k = 0..k_max`.
    pub scaled_rm: Vec<f64>,
    /// Set on the sample at which the run stopped.
    pub status: Option<Termination>,
}

impl TrajectorySample {
    pub fn dim(&self) -> usize {
        (self.g.len() as f64).sqrt().round() as usize
    }

    pub fn is_finite(&self) -> bool {
        self.g
            .iter()
            .chain(&self.j)
            .chain(&self.scaled_dj)
            .chain(&self.scaled_rm)
            .all(|v| v.is_finite())
            && [
                self.rm,
                self.dj,
                self.d2j,
                self.norm_n,
                self.norm_domega,
                self.compat_residual,
                self.jsq_residual,
                self.min_eig_g,
                self.t_half_dj,
                self.t_rm,
                self.t_d2j,
            ]
            .iter()
            .all(|v| v.is_finite())
    }

    /// `max(|Rm|, |DJ|)` with the name of the larger one.
    pub fn blowup_quantity(&self) -> (&'static str, f64) {
        if self.dj > self.rm {
            ("|DJ|", self.dj)
        } else {
            ("|Rm|", self.rm)
        }
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Evaluate every diagnostic at `state`.
pub fn diagnostics(state: &FlowState, algebra: &LieAlgebraSpec, k_max: usize) -> TrajectorySample {
    let k_max = k_max.max(1);
    let geo = Geometry::new(algebra, &state.pair, k_max.max(2));
    let t = state.t;
    let dj_norms: Vec<f64> = geo.dj.derivs.iter().take(k_max).map(|d| geo.norm(d)).collect();
    let rm = geo.norm(&geo.curvature.rm);
    let mut rm_norms = vec![rm];
    rm_norms.extend(geo.higher_rm(k_max - 1).iter().map(|d| geo.norm(d)));
    let d2j = geo.norm(geo.dj.d2j());
    let dj = dj_norms[0];
    TrajectorySample {
        t,
        g: row_major(state.g()),
        j: row_major(state.j()),
        rm,
        dj,
        d2j,
        norm_n: geo.norm(&geo.nijenhuis.low),
        norm_domega: geo.norm(&geo.omega.d_omega),
        compat_residual: state.pair.compat_residual(),
        jsq_residual: state.pair.j_squared_residual(),
        min_eig_g: state.pair.metric().min_eigenvalue(),
        t_half_dj: t.sqrt() * dj,
        t_rm: t * rm,
        t_d2j: t * d2j,
        scaled_dj: dj_norms
            .iter()
            .enumerate()
            .map(|(i, v)| t.powf((i + 1) as f64 / 2.0) * v)
            .collect(),
        scaled_rm: rm_norms
            .iter()
            .enumerate()
            .map(|(k, v)| t.powf((k + 2) as f64 / 2.0) * v)
            .collect(),
        status: None,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub label: String,
    pub dim: usize,
    pub config: IntegratorConfig,
    pub steps: usize,
    pub samples: Vec<TrajectorySample>,
    pub status: Termination,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least the initial sample")
    }
}

/// Check a freshly computed sample against the stopping rules.
fn verdict(sample: &TrajectorySample, config: &IntegratorConfig) -> Option<Termination> {
    if !sample.is_finite() {
        return Some(Termination::NonFinite);
    }
    if sample.min_eig_g < MIN_EIG_FLOOR {
        return Some(Termination::DegenerateMetric {
            min_eig: sample.min_eig_g,
        });
    }
    let (name, value) = sample.blowup_quantity();
    if value > config.blowup_threshold {
        return Some(Termination::BlowUp {
            quantity: name.to_string(),
            value,
        });
    }
    for (name, value) in [
        ("compat_residual", sample.compat_residual),
        ("jsq_residual", sample.jsq_residual),
    ] {
        if value > config.drift_tolerance {
            return Some(Termination::StructureDrift {
                quantity: name.to_string(),
                value,
            });
        }
    }
    None
}

/// Integrate with the default scheme registry.
pub fn integrate(scenario: &Scenario, config: &IntegratorConfig) -> Result<Trajectory, ConfigError> {
    integrate_with(&SchemeRegistry::default(), scenario, config)
}

pub fn integrate_with(
    registry: &SchemeRegistry,
    scenario: &Scenario,
    config: &IntegratorConfig,
) -> Result<Trajectory, ConfigError> {
    config.validate()?;
    let scheme = registry.build(config)?;
    let algebra = &scenario.algebra;
    let field = FlowField::new(algebra);
    let mut state = FlowState {
        t: 0.0,
        pair: scenario.pair.clone(),
    };
    let mut current = diagnostics(&state, algebra, config.k_max);
    let mut samples = Vec::new();
    let mut steps = 0usize;
    let mut dt = config.dt;
    // times snap to t_end when within this distance
    let snap = 1e-12 * config.t_end.max(1.0);

    let status = loop {
        if let Some(stop) = verdict(&current, config) {
            if matches!(stop, Termination::NonFinite) {
                // the previous sample is the last valid one
                if let Some(last) = samples.last_mut() {
                    let last: &mut TrajectorySample = last;
                    last.status = Some(stop.clone());
                }
                break stop;
            }
            current.status = Some(stop.clone());
            samples.push(current);
            break stop;
        }
        let on_stride = steps.is_multiple_of(config.sample_stride);
        if state.t >= config.t_end - snap {
            current.status = Some(Termination::Completed);
            samples.push(current);
            break Termination::Completed;
        }
        if on_stride {
            samples.push(current.clone());
        }
        let h = dt.min(config.t_end - state.t);
        let stop = match scheme.advance(&field, &state, h) {
            Ok(adv) => {
                steps += 1;
                let mut next = adv.state;
                // fixed-step runs use t = n dt to avoid accumulating rounding
                next.t = if scheme.name() == "rk4" && adv.dt_taken == config.dt {
                    (steps as f64 * config.dt).min(config.t_end)
                } else {
                    state.t + adv.dt_taken
                };
                if config.t_end - next.t <= snap {
                    next.t = config.t_end;
                }
                state = next;
                dt = adv.dt_next;
                current = diagnostics(&state, algebra, config.k_max);
                continue;
            }
            Err(StepError::NonFinite) => Termination::NonFinite,
            Err(StepError::Degenerate) => Termination::DegenerateMetric {
                min_eig: current.min_eig_g,
            },
            Err(StepError::StepUnderflow { .. }) => Termination::StepUnderflow,
        };
        // the stage failure carries the last valid state
        current.status = Some(stop.clone());
        if on_stride {
            samples.pop();
        }
        samples.push(current);
        break stop;
    };

    Ok(Trajectory {
        label: scenario.label.clone(),
        dim: algebra.dim(),
        config: config.clone(),
        steps,
        samples,
        status,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlowupVerdict {
    pub fired: bool,
    /// Time of the last sample before the first over-threshold one (or of the
    /// final sample when the detector does not fire).
    pub t_last_valid: Option<f64>,
    /// `|Rm|` or `|DJ|`, whichever is larger at the firing sample, or over the
    /// whole trajectory when the detector does not fire.
    pub max_quantity_name: &'static str,
    pub max_value: f64,
}

pub fn detect_blowup(traj: &Trajectory, threshold: f64) -> BlowupVerdict {
    detect_blowup_samples(&traj.samples, threshold)
}

pub fn detect_blowup_samples(samples: &[TrajectorySample], threshold: f64) -> BlowupVerdict {
    let mut best = ("|Rm|", 0.0f64);
    for (i, s) in samples.iter().enumerate() {
        let (name, value) = s.blowup_quantity();
        // NaN counts as over threshold
        if !(value <= threshold) {
            return BlowupVerdict {
                fired: true,
                t_last_valid: i.checked_sub(1).map(|p| samples[p].t),
                max_quantity_name: name,
                max_value: value,
            };
        }
        if value > best.1 {
            best = (name, value);
        }
    }
    BlowupVerdict {
        fired: false,
        t_last_valid: samples.last().map(|s| s.t),
        max_quantity_name: best.0,
        max_value: best.1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin;
    use crate::tensor::{frame_norm, oracle_norm};

    fn short(t_end: f64, dt: f64) -> IntegratorConfig {
        IntegratorConfig {
            dt,
            t_end,
            sample_stride: 1,
            ..IntegratorConfig::default()
        }
    }

    #[test]
    fn flat_torus_is_stationary() {
        let s = builtin("flat_torus_4").unwrap();
        let state = FlowState {
            t: 0.0,
            pair: s.pair.clone(),
        };
        for dt in [1e-3, 0.1, 10.0] {
            let next = step(&state, dt, &s.algebra).unwrap();
            assert_eq!(next.g(), state.g());
            assert_eq!(next.j(), state.j());
        }
        let traj = integrate(&s, &short(0.05, 1e-2)).unwrap();
        assert_eq!(traj.status, Termination::Completed);
        assert_eq!(traj.samples.len(), 6);
        for smp in &traj.samples {
            assert_eq!(smp.g, traj.samples[0].g);
            assert_eq!(
                (smp.rm, smp.dj, smp.d2j, smp.norm_n, smp.norm_domega),
                (0.0, 0.0, 0.0, 0.0, 0.0)
            );
        }
        assert_eq!(traj.last().status, Some(Termination::Completed));
        assert_eq!(traj.last().t, 0.05);
    }

    #[test]
    fn hopf_rm_norm_matches_oracle() {
        let s = builtin("hopf_s3s1").unwrap();
        let state = FlowState {
            t: 0.0,
            pair: s.pair.clone(),
        };
        let d = diagnostics(&state, &s.algebra, 2);
        let geo = Geometry::new(&s.algebra, &s.pair, 2);
        let oracle = oracle_norm(&geo.curvature.rm, geo.pair.metric());
        let brute = geo.curvature.rm.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((d.rm - oracle).abs() <= 1e-14 * oracle.max(1.0));
        assert!((d.rm - brute).abs() <= 1e-14 * brute.max(1.0));
        assert!(d.rm > 0.1);
    }

    #[test]
    fn kt_initial_diagnostics() {
        let s = builtin("kodaira_thurston").unwrap();
        let state = FlowState {
            t: 0.0,
            pair: s.pair.clone(),
        };
        let d = diagnostics(&state, &s.algebra, 3);
        let nj = crate::geometry::nijenhuis(&s.pair, &s.algebra);
        assert_eq!(d.norm_n, frame_norm(&nj.low, s.pair.metric()));
        assert!(d.compat_residual <= 1e-14);
        assert_eq!(d.t_half_dj, 0.0);
        assert_eq!(d.scaled_dj.len(), 3);
        assert_eq!(d.scaled_rm.len(), 3);
    }

    #[test]
    fn halving_scheme_matches_fixed_rk4_on_small_steps() {
        let s = builtin("kodaira_thurston").unwrap();
        let fixed = integrate(&s, &short(0.02, 1e-3)).unwrap();
        let adaptive = integrate(
            &s,
            &IntegratorConfig {
                scheme: "rk4-halving".into(),
                ..short(0.02, 1e-3)
            },
        )
        .unwrap();
        assert_eq!(adaptive.status, Termination::Completed);
        let (a, b) = (fixed.last(), adaptive.last());
        assert_eq!(a.t, b.t);
        let diff =
            a.g.iter()
                .zip(&b.g)
                .chain(a.j.iter().zip(&b.j))
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
        assert!(diff <= 1e-12, "{diff}");
    }

    #[test]
    fn halving_scheme_halves_large_steps() {
        let s = builtin("kodaira_thurston").unwrap();
        let scheme = Rk4Halving {
            target: 1e-9,
            dt_max: 0.5,
        };
        let state = FlowState {
            t: 0.0,
            pair: s.pair.clone(),
        };
        let adv = scheme.advance(&FlowField::new(&s.algebra), &state, 0.5).unwrap();
        assert!(adv.dt_taken < 0.5);
    }

    #[test]
    fn unknown_scheme_is_rejected() {
        let s = builtin("flat_torus_4").unwrap();
        let err = integrate(
            &s,
            &IntegratorConfig {
                scheme: "euler".into(),
                ..IntegratorConfig::default()
            },
        )
        .unwrap_err();
        assert!(err.to_string().contains("rk4-halving"));
    }

    #[test]
    fn registry_accepts_new_schemes() {
        struct Frozen;
        impl Scheme for Frozen {
            fn name(&self) -> &'static str {
                "frozen"
            }
            fn advance(&self, _: &FlowField<'_>, state: &FlowState, dt: f64) -> Result<Advance, StepError> {
                Ok(Advance {
                    state: state.clone(),
                    dt_taken: dt,
                    dt_next: dt,
                })
            }
        }
        let mut reg = SchemeRegistry::default();
        reg.register("frozen", |_| Box::new(Frozen));
        assert_eq!(reg.names(), vec!["rk4", "rk4-halving", "frozen"]);
        let s = builtin("hopf_s3s1").unwrap();
        let traj = integrate_with(
            &reg,
            &s,
            &IntegratorConfig {
                scheme: "frozen".into(),
                ..short(0.01, 1e-3)
            },
        )
        .unwrap();
        assert_eq!(traj.last().g, traj.samples[0].g);
        assert_eq!(traj.last().t, 0.01);
    }

    #[test]
    fn config_validation() {
        let bad = IntegratorConfig {
            dt: 0.0,
            ..IntegratorConfig::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(ConfigError::NotPositive { field: "dt", .. })
        ));
        let bad = IntegratorConfig {
            sample_stride: 0,
            ..IntegratorConfig::default()
        };
        assert_eq!(bad.validate(), Err(ConfigError::Stride));
    }

    #[test]
    fn low_threshold_stops_with_blowup() {
        let s = builtin("hopf_s3s1").unwrap();
        let traj = integrate(
            &s,
            &IntegratorConfig {
                blowup_threshold: 0.1,
                ..short(0.1, 1e-2)
            },
        )
        .unwrap();
        assert_eq!(traj.status.code(), "blow_up");
        assert_eq!(traj.samples.len(), 1);
        assert!(detect_blowup(&traj, 0.1).fired);
        assert_eq!(traj.last().status.as_ref().map(|s| s.code()), Some("blow_up"));
    }
}
