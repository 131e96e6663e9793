//! Compartmental SAR dynamics across diffusion sets.
//!
//! Each diffusion set `i` carries three compartments: susceptible `S_i`,
//! attacked `A_i` and removed `R_i`. Susceptible nodes are attacked at
//! the rate `a_i = beta_i * gamma_i * eta_i * A_i / N`, migrate between
//! sets at rates `lambda[i][j]`, and are removed directly at rate `b_i`;
//! attacked nodes migrate at rates `rho[i][j]` and are removed at rate
//! `c_i`. The right-hand side sums to zero over all compartments, so
//! total population is conserved. Integration is explicit fixed-step
//! Euler.

use std::fmt;

use thiserror::Error;

use crate::graph::EpidemicState;

/// Default Euler step size.
pub const DEFAULT_STEP: f64 = 0.01;
/// Default integration horizon in model time units.
pub const DEFAULT_HORIZON: f64 = 500.0;
/// Default convergence threshold: half a node.
pub const DEFAULT_EPSILON: f64 = 0.5;
/// Compartments below this value trigger a step-size diagnostic.
pub const NEGATIVITY_WARNING: f64 = -1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("expected {expected} diffusion sets, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("set index {index} out of range for {set_count} diffusion sets")]
    IndexOutOfRange { index: usize, set_count: usize },
    #[error("step size must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("horizon {horizon} must be finite and at least the step size {step}")]
    InvalidHorizon { horizon: f64, step: f64 },
    #[error("epsilon must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("state became non-finite at t = {time}")]
    NonFinite { time: f64 },
    #[error("invalid parameters: {0}")]
    InvalidParameters(String),
    #[error("{entry} = {value} exceeds the cap {cap_name} = {cap}")]
    CapExceeded {
        entry: String,
        value: f64,
        cap_name: &'static str,
        cap: f64,
    },
}

/// Optional global upper bounds on the migration and impact rates.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RateCaps {
    /// Bound on every susceptible migration rate `lambda[i][j]`.
    pub susceptible_migration: Option<f64>,
    /// Bound on every attacked migration rate `rho[i][j]`.
    pub attacked_migration: Option<f64>,
    /// Bound on every network impact factor `eta_i`.
    pub network_impact: Option<f64>,
}

/// All rate constants of the SAR model over `set_count` diffusion sets.
///
/// Matrix entry `[i][j]` is the migration rate from set `i` to set `j`;
/// diagonals are zero. All vectors have length `set_count`.
#[derive(Debug, Clone, PartialEq)]
pub struct SarParameters {
    /// Number of diffusion sets (`m`).
    pub set_count: usize,
    /// Total node count `N`, the denominator of the attack rate.
    pub population: f64,
    /// Susceptible migration rates (`lambda[i][j]`, set i -> set j).
    pub susceptible_migration: Vec<Vec<f64>>,
    /// Attacked migration rates (`rho[i][j]`).
    pub attacked_migration: Vec<Vec<f64>>,
    /// Direct susceptible -> removed rates (`b_i`).
    pub susceptible_removal: Vec<f64>,
    /// Attacked -> removed rates (`c_i`).
    pub attacked_removal: Vec<f64>,
    /// Per-set susceptibility (`beta_i`).
    pub susceptibility: Vec<f64>,
    /// Per-set infectiousness (`gamma_i`).
    pub infectiousness: Vec<f64>,
    /// Per-set network impact of an infection (`eta_i`).
    pub network_impact: Vec<f64>,
    /// Optional global caps on the rates above.
    pub caps: RateCaps,
}

impl SarParameters {
    /// A zero-rate parameter set: nothing moves, nothing is attacked.
    pub fn zero_rates(set_count: usize, population: f64) -> Self {
        SarParameters {
            set_count,
            population,
            susceptible_migration: vec![vec![0.0; set_count]; set_count],
            attacked_migration: vec![vec![0.0; set_count]; set_count],
            susceptible_removal: vec![0.0; set_count],
            attacked_removal: vec![0.0; set_count],
            susceptibility: vec![0.0; set_count],
            infectiousness: vec![0.0; set_count],
            network_impact: vec![0.0; set_count],
            caps: RateCaps::default(),
        }
    }

    /// Checks dimensions, non-negativity, zero diagonals and the caps.
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let m = self.set_count;
        if m == 0 {
            return Err(DynamicsError::InvalidParameters(
                "need at least one diffusion set".into(),
            ));
        }
        if !self.population.is_finite() || self.population <= 0.0 {
            return Err(DynamicsError::InvalidParameters(format!(
                "population must be positive and finite, got {}",
                self.population
            )));
        }
        for (name, matrix) in [
            ("lambda", &self.susceptible_migration),
            ("rho", &self.attacked_migration),
        ] {
            if matrix.len() != m || matrix.iter().any(|row| row.len() != m) {
                return Err(DynamicsError::InvalidParameters(format!(
                    "{name} must be a {m}x{m} matrix"
                )));
            }
            for (i, row) in matrix.iter().enumerate() {
                for (j, value) in row.iter().enumerate() {
                    if !value.is_finite() || *value < 0.0 {
                        return Err(DynamicsError::InvalidParameters(format!(
                            "{name}[{}][{}] must be finite and non-negative, got {value}",
                            i + 1,
                            j + 1
                        )));
                    }
                    if i == j && *value != 0.0 {
                        return Err(DynamicsError::InvalidParameters(format!(
                            "{name}[{}][{}] must be zero on the diagonal",
                            i + 1,
                            j + 1
                        )));
                    }
                }
            }
        }
        for (name, vector) in [
            ("b", &self.susceptible_removal),
            ("c", &self.attacked_removal),
            ("beta", &self.susceptibility),
            ("gamma", &self.infectiousness),
            ("eta", &self.network_impact),
        ] {
            if vector.len() != m {
                return Err(DynamicsError::InvalidParameters(format!(
                    "{name} must have length {m}, got {}",
                    vector.len()
                )));
            }
            for (i, value) in vector.iter().enumerate() {
                if !value.is_finite() || *value < 0.0 {
                    return Err(DynamicsError::InvalidParameters(format!(
                        "{name}[{}] must be finite and non-negative, got {value}",
                        i + 1
                    )));
                }
            }
        }
        self.check_caps()
    }

    fn check_caps(&self) -> Result<(), DynamicsError> {
        if let Some(cap) = self.caps.susceptible_migration {
            for (i, row) in self.susceptible_migration.iter().enumerate() {
                for (j, value) in row.iter().enumerate() {
                    if *value > cap {
                        return Err(DynamicsError::CapExceeded {
                            entry: format!("lambda[{}][{}]", i + 1, j + 1),
                            value: *value,
                            cap_name: "lambda_bar",
                            cap,
                        });
                    }
                }
            }
        }
        if let Some(cap) = self.caps.attacked_migration {
            for (i, row) in self.attacked_migration.iter().enumerate() {
                for (j, value) in row.iter().enumerate() {
                    if *value > cap {
                        return Err(DynamicsError::CapExceeded {
                            entry: format!("rho[{}][{}]", i + 1, j + 1),
                            value: *value,
                            cap_name: "rho_bar",
                            cap,
                        });
                    }
                }
            }
        }
        if let Some(cap) = self.caps.network_impact {
            for (i, value) in self.network_impact.iter().enumerate() {
                if *value > cap {
                    return Err(DynamicsError::CapExceeded {
                        entry: format!("eta[{}]", i + 1),
                        value: *value,
                        cap_name: "eta_bar",
                        cap,
                    });
                }
            }
        }
        Ok(())
    }
}

/// Compartment sizes of every diffusion set at one point in time.
#[derive(Debug, Clone, PartialEq)]
pub struct SarState {
    pub time: f64,
    pub susceptible: Vec<f64>,
    pub attacked: Vec<f64>,
    pub removed: Vec<f64>,
}

impl SarState {
    pub fn new(time: f64, susceptible: Vec<f64>, attacked: Vec<f64>, removed: Vec<f64>) -> Self {
        SarState {
            time,
            susceptible,
            attacked,
            removed,
        }
    }

    pub fn set_count(&self) -> usize {
        self.susceptible.len()
    }

    /// Sum over every compartment of every set.
    pub fn total(&self) -> f64 {
        self.susceptible.iter().sum::<f64>()
            + self.attacked.iter().sum::<f64>()
            + self.removed.iter().sum::<f64>()
    }

    fn is_finite(&self) -> bool {
        self.susceptible
            .iter()
            .chain(&self.attacked)
            .chain(&self.removed)
            .all(|v| v.is_finite())
    }

    fn check_dims(&self, params: &SarParameters) -> Result<(), DynamicsError> {
        let m = params.set_count;
        if self.susceptible.len() != m || self.attacked.len() != m || self.removed.len() != m {
            return Err(DynamicsError::DimensionMismatch {
                expected: m,
                found: self.susceptible.len(),
            });
        }
        Ok(())
    }
}

/// Right-hand side of the model at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub susceptible: Vec<f64>,
    pub attacked: Vec<f64>,
    pub removed: Vec<f64>,
}

/// Identifies one compartment of one diffusion set (0-based index).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Compartment {
    pub state: EpidemicState,
    pub set: usize,
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let letter = match self.state {
            EpidemicState::Susceptible => 'S',
            EpidemicState::Attacked => 'A',
            EpidemicState::Removed => 'R',
        };
        write!(f, "{letter}_{}", self.set + 1)
    }
}

/// Warning attached to a trajectory; the run itself still completes.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub compartment: Compartment,
    pub time: f64,
    pub value: f64,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "compartment {} fell to {} at t = {}; the step size is too large for these rates",
            self.compartment, self.value, self.time
        )
    }
}

/// Time-indexed sequence of states produced by [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub params: SarParameters,
    /// Step size used between consecutive states.
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<SarState>,
    /// First negativity warning per compartment, if any occurred.
    pub diagnostics: Vec<Diagnostic>,
}

impl Trajectory {
    pub fn set_count(&self) -> usize {
        self.params.set_count
    }

    /// Samples of one compartment across all recorded states.
    pub fn series(&self, compartment: Compartment) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| match compartment.state {
                EpidemicState::Susceptible => s.susceptible[compartment.set],
                EpidemicState::Attacked => s.attacked[compartment.set],
                EpidemicState::Removed => s.removed[compartment.set],
            })
            .collect()
    }
}

/// Attack rate `a_i = beta_i * gamma_i * eta_i * A_i / N` for the 0-based
/// set index `i`.
pub fn attack_rate(
    params: &SarParameters,
    state: &SarState,
    set: usize,
) -> Result<f64, DynamicsError> {
    if set >= params.set_count {
        return Err(DynamicsError::IndexOutOfRange {
            index: set,
            set_count: params.set_count,
        });
    }
    state.check_dims(params)?;
    Ok(params.susceptibility[set]
        * params.infectiousness[set]
        * params.network_impact[set]
        * state.attacked[set]
        / params.population)
}

/// Evaluates the right-hand side of the combined model:
///
/// ```text
/// S_i' = -a_i S_i + sum_{j != i} lambda[j][i] S_j - sum_{j != i} lambda[i][j] S_i - b_i S_i
/// A_i' =  a_i S_i + sum_{j != i} rho[j][i]    A_j - sum_{j != i} rho[i][j]    A_i - c_i A_i
/// R_i' =  b_i S_i + c_i A_i
/// ```
pub fn derivatives(params: &SarParameters, state: &SarState) -> Result<Derivatives, DynamicsError> {
    state.check_dims(params)?;
    let m = params.set_count;
    let mut ds = vec![0.0; m];
    let mut da = vec![0.0; m];
    let mut dr = vec![0.0; m];
    for i in 0..m {
        let a_i = attack_rate(params, state, i)?;
        let mut s_in = 0.0;
        let mut s_out = 0.0;
        let mut a_in = 0.0;
        let mut a_out = 0.0;
        for j in 0..m {
            if j == i {
                continue;
            }
            s_in += params.susceptible_migration[j][i] * state.susceptible[j];
            s_out += params.susceptible_migration[i][j] * state.susceptible[i];
            a_in += params.attacked_migration[j][i] * state.attacked[j];
            a_out += params.attacked_migration[i][j] * state.attacked[i];
        }
        let attacked_flow = a_i * state.susceptible[i];
        let direct_removal = params.susceptible_removal[i] * state.susceptible[i];
        let attacked_removal = params.attacked_removal[i] * state.attacked[i];
        ds[i] = -attacked_flow + s_in - s_out - direct_removal;
        da[i] = attacked_flow + a_in - a_out - attacked_removal;
        dr[i] = direct_removal + attacked_removal;
    }
    Ok(Derivatives {
        susceptible: ds,
        attacked: da,
        removed: dr,
    })
}

/// One explicit Euler step: `X <- X + h * X'`, `time <- time + h`.
pub fn euler_step(
    params: &SarParameters,
    state: &SarState,
    h: f64,
) -> Result<SarState, DynamicsError> {
    if !h.is_finite() || h <= 0.0 {
        return Err(DynamicsError::InvalidStep(h));
    }
    let rhs = derivatives(params, state)?;
    let step =
        |x: &[f64], dx: &[f64]| -> Vec<f64> { x.iter().zip(dx).map(|(v, d)| v + h * d).collect() };
    Ok(SarState {
        time: state.time + h,
        susceptible: step(&state.susceptible, &rhs.susceptible),
        attacked: step(&state.attacked, &rhs.attacked),
        removed: step(&state.removed, &rhs.removed),
    })
}

/// Integrates the model with `floor(horizon / h)` Euler steps.
///
/// The division is evaluated with a small relative slack so that, e.g.,
/// `horizon = 500, h = 0.01` runs the intended 50 000 steps despite the
/// binary representation of 0.01. Compartments that fall below
/// [`NEGATIVITY_WARNING`] are reported once each through
/// [`Trajectory::diagnostics`].
pub fn simulate(
    params: &SarParameters,
    initial: &SarState,
    h: f64,
    horizon: f64,
) -> Result<Trajectory, DynamicsError> {
    if !h.is_finite() || h <= 0.0 {
        return Err(DynamicsError::InvalidStep(h));
    }
    if !horizon.is_finite() || horizon < h {
        return Err(DynamicsError::InvalidHorizon { horizon, step: h });
    }
    initial.check_dims(params)?;
    if !initial.is_finite() {
        return Err(DynamicsError::NonFinite { time: initial.time });
    }

    let steps = (horizon / h * (1.0 + 1e-12) + 1e-9).floor() as u64;
    let mut states = Vec::with_capacity(steps as usize + 1);
    let mut times = Vec::with_capacity(steps as usize + 1);
    let mut diagnostics: Vec<Diagnostic> = Vec::new();
    let mut flagged = vec![false; params.set_count * 3];

    states.push(initial.clone());
    times.push(initial.time);
    let mut current = initial.clone();
    for _ in 0..steps {
        current = euler_step(params, &current, h)?;
        if !current.is_finite() {
            return Err(DynamicsError::NonFinite { time: current.time });
        }
        for (kind_idx, (state_kind, values)) in [
            (EpidemicState::Susceptible, &current.susceptible),
            (EpidemicState::Attacked, &current.attacked),
            (EpidemicState::Removed, &current.removed),
        ]
        .into_iter()
        .enumerate()
        {
            for (set, value) in values.iter().enumerate() {
                let slot = kind_idx * params.set_count + set;
                if *value < NEGATIVITY_WARNING && !flagged[slot] {
                    flagged[slot] = true;
                    diagnostics.push(Diagnostic {
                        compartment: Compartment {
                            state: state_kind,
                            set,
                        },
                        time: current.time,
                        value: *value,
                    });
                }
            }
        }
        times.push(current.time);
        states.push(current.clone());
    }

    Ok(Trajectory {
        params: params.clone(),
        step: h,
        times,
        states,
        diagnostics,
    })
}

/// First recorded time at which the selected compartment is at or below
/// `epsilon`, or `None` if it never is.
pub fn convergence_time(
    traj: &Trajectory,
    selector: Compartment,
    epsilon: f64,
) -> Result<Option<f64>, DynamicsError> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(DynamicsError::InvalidEpsilon(epsilon));
    }
    if selector.set >= traj.set_count() {
        return Err(DynamicsError::IndexOutOfRange {
            index: selector.set,
            set_count: traj.set_count(),
        });
    }
    for state in &traj.states {
        let value = match selector.state {
            EpidemicState::Susceptible => state.susceptible[selector.set],
            EpidemicState::Attacked => state.attacked[selector.set],
            EpidemicState::Removed => state.removed[selector.set],
        };
        if value <= epsilon {
            return Ok(Some(state.time));
        }
    }
    Ok(None)
}
