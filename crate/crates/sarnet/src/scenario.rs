//! Scenario files: a complete parameterisation of one simulation run.
//!
//! Scenarios are TOML documents with four sections plus a transform
//! list:
//!
//! ```toml
//! [model]          # m, optional population, h, horizon, epsilon
//! [vectors]        # s0 a0 r0 b c beta gamma eta, all of length m
//! [matrices]       # optional lambda and rho, m x m with zero diagonals
//! [caps]           # optional lambda_bar, rho_bar, eta_bar
//! [[transforms]]   # optional parameter adjustments, each one a variant run
//! ```
//!
//! Set indices in transform stanzas and rate paths are 1-based, exactly
//! as they appear in the file format.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    DynamicsError, RateCaps, SarParameters, SarState, DEFAULT_EPSILON, DEFAULT_HORIZON,
    DEFAULT_STEP,
};

/// The bundled benchmark scenario: four diffusion sets with the
/// reference rates and the explicit population override.
pub const TABLE2_SCENARIO: &str = include_str!("../data/table2.toml");

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("scenario parse error: {0}")]
    Toml(String),
    #[error("{field} must have length {expected}, got {found}")]
    BadLength {
        field: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("{field}[{index}] must be finite and non-negative, got {value}")]
    BadEntry {
        field: &'static str,
        index: usize,
        value: f64,
    },
    #[error("{field} must be positive and finite, got {value}")]
    BadScalar { field: &'static str, value: f64 },
    #[error("horizon {horizon} must be at least the step size {step}")]
    HorizonTooShort { horizon: f64, step: f64 },
    #[error("initial compartments sum to zero; population would be empty")]
    EmptyPopulation,
    #[error(transparent)]
    Params(#[from] DynamicsError),
    #[error("transform {index}: {source}")]
    Transform {
        index: usize,
        source: TransformError,
    },
}

#[derive(Debug, Error, PartialEq)]
pub enum TransformError {
    #[error("set index {set} out of range 1..={set_count}")]
    SetOutOfRange { set: usize, set_count: usize },
    #[error("factor must be positive and finite, got {0}")]
    BadFactor(f64),
    #[error("value must be finite and non-negative, got {0}")]
    BadValue(f64),
    #[error("bad rate path `{path}`: {message}")]
    BadPath { path: String, message: String },
    #[error(transparent)]
    Params(#[from] DynamicsError),
}

/// A parsed rate-override path such as `b[2]`, `eta[4]` or
/// `lambda[1][2]`. Indices are 1-based; matrix paths must be
/// off-diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RatePath {
    /// One of `b`, `c`, `beta`, `gamma`, `eta`.
    Vector { field: VectorField, set: usize },
    /// One of `lambda`, `rho`.
    Matrix {
        field: MatrixField,
        from: usize,
        to: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorField {
    SusceptibleRemoval,
    AttackedRemoval,
    Susceptibility,
    Infectiousness,
    NetworkImpact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixField {
    SusceptibleMigration,
    AttackedMigration,
}

impl VectorField {
    fn key(self) -> &'static str {
        match self {
            VectorField::SusceptibleRemoval => "b",
            VectorField::AttackedRemoval => "c",
            VectorField::Susceptibility => "beta",
            VectorField::Infectiousness => "gamma",
            VectorField::NetworkImpact => "eta",
        }
    }
}

impl MatrixField {
    fn key(self) -> &'static str {
        match self {
            MatrixField::SusceptibleMigration => "lambda",
            MatrixField::AttackedMigration => "rho",
        }
    }
}

impl RatePath {
    /// Parses `name[i]` or `name[i][j]` with 1-based indices.
    pub fn parse(path: &str) -> Result<Self, TransformError> {
        let err = |message: &str| TransformError::BadPath {
            path: path.to_owned(),
            message: message.to_owned(),
        };
        let open = path.find('[').ok_or_else(|| err("expected `name[i]`"))?;
        let name = &path[..open];
        let mut indices = Vec::new();
        let mut rest = &path[open..];
        while !rest.is_empty() {
            if !rest.starts_with('[') {
                return Err(err("expected `[`"));
            }
            let close = rest.find(']').ok_or_else(|| err("unclosed `[`"))?;
            let idx: usize = rest[1..close]
                .parse()
                .map_err(|_| err("index must be a positive integer"))?;
            if idx == 0 {
                return Err(err("indices are 1-based"));
            }
            indices.push(idx);
            rest = &rest[close + 1..];
        }
        let vector = |field| {
            if indices.len() == 1 {
                Ok(RatePath::Vector {
                    field,
                    set: indices[0],
                })
            } else {
                Err(err("expected exactly one index"))
            }
        };
        let matrix = |field| {
            if indices.len() == 2 {
                if indices[0] == indices[1] {
                    Err(err("diagonal entries are fixed at zero"))
                } else {
                    Ok(RatePath::Matrix {
                        field,
                        from: indices[0],
                        to: indices[1],
                    })
                }
            } else {
                Err(err("expected exactly two indices"))
            }
        };
        match name {
            "b" => vector(VectorField::SusceptibleRemoval),
            "c" => vector(VectorField::AttackedRemoval),
            "beta" => vector(VectorField::Susceptibility),
            "gamma" => vector(VectorField::Infectiousness),
            "eta" => vector(VectorField::NetworkImpact),
            "lambda" => matrix(MatrixField::SusceptibleMigration),
            "rho" => matrix(MatrixField::AttackedMigration),
            other => Err(err(&format!("unknown rate `{other}`"))),
        }
    }

    fn max_index(&self) -> usize {
        match self {
            RatePath::Vector { set, .. } => *set,
            RatePath::Matrix { from, to, .. } => (*from).max(*to),
        }
    }
}

impl fmt::Display for RatePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RatePath::Vector { field, set } => write!(f, "{}[{set}]", field.key()),
            RatePath::Matrix { field, from, to } => {
                write!(f, "{}[{from}][{to}]", field.key())
            }
        }
    }
}

/// A parameter adjustment applied to the baseline of a scenario. Set
/// indices are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Transform {
    /// Halve `b_i`, double `c_i`: nodes leave the susceptible state more
    /// slowly and the attacked state faster.
    EconomicEfficiency { set: usize },
    /// Double `b_i`, halve `c_i`.
    EngineeringEfficiency { set: usize },
    /// Multiply `eta_i` by a positive factor.
    ImpactFactor { set: usize, factor: f64 },
    /// Set one rate entry to an explicit value.
    RateOverride { path: RatePath, value: f64 },
}

impl Transform {
    /// Deterministic label used to suffix the variant's output files:
    /// `t<position>-<kind>...`.
    pub fn label(&self, position: usize) -> String {
        match self {
            Transform::EconomicEfficiency { set } => {
                format!("t{position}-economic-{set}")
            }
            Transform::EngineeringEfficiency { set } => {
                format!("t{position}-engineering-{set}")
            }
            Transform::ImpactFactor { set, factor } => {
                format!("t{position}-impact-{set}-x{factor}")
            }
            Transform::RateOverride { path, value } => {
                let slug = path
                    .to_string()
                    .replace("][", "-")
                    .replace(['[', ']'], "-")
                    .trim_end_matches('-')
                    .to_owned();
                format!("t{position}-override-{slug}-{value}")
            }
        }
    }

    fn validate(&self, set_count: usize) -> Result<(), TransformError> {
        let check_set = |set: usize| {
            if set == 0 || set > set_count {
                Err(TransformError::SetOutOfRange { set, set_count })
            } else {
                Ok(())
            }
        };
        match self {
            Transform::EconomicEfficiency { set } | Transform::EngineeringEfficiency { set } => {
                check_set(*set)
            }
            Transform::ImpactFactor { set, factor } => {
                check_set(*set)?;
                if !factor.is_finite() || *factor <= 0.0 {
                    return Err(TransformError::BadFactor(*factor));
                }
                Ok(())
            }
            Transform::RateOverride { path, value } => {
                if path.max_index() > set_count {
                    return Err(TransformError::SetOutOfRange {
                        set: path.max_index(),
                        set_count,
                    });
                }
                if !value.is_finite() || *value < 0.0 {
                    return Err(TransformError::BadValue(*value));
                }
                Ok(())
            }
        }
    }
}

/// Applies one transform, returning new parameters with only the
/// targeted entries changed. The result is re-validated, so a transform
/// that pushes a rate past its cap is rejected.
pub fn apply_transform(
    params: &SarParameters,
    transform: &Transform,
) -> Result<SarParameters, TransformError> {
    transform.validate(params.set_count)?;
    let mut out = params.clone();
    match transform {
        Transform::EconomicEfficiency { set } => {
            let i = set - 1;
            out.susceptible_removal[i] /= 2.0;
            out.attacked_removal[i] *= 2.0;
        }
        Transform::EngineeringEfficiency { set } => {
            let i = set - 1;
            out.susceptible_removal[i] *= 2.0;
            out.attacked_removal[i] /= 2.0;
        }
        Transform::ImpactFactor { set, factor } => {
            out.network_impact[set - 1] *= factor;
        }
        Transform::RateOverride { path, value } => match path {
            RatePath::Vector { field, set } => {
                let target = match field {
                    VectorField::SusceptibleRemoval => &mut out.susceptible_removal,
                    VectorField::AttackedRemoval => &mut out.attacked_removal,
                    VectorField::Susceptibility => &mut out.susceptibility,
                    VectorField::Infectiousness => &mut out.infectiousness,
                    VectorField::NetworkImpact => &mut out.network_impact,
                };
                target[set - 1] = *value;
            }
            RatePath::Matrix { field, from, to } => {
                let target = match field {
                    MatrixField::SusceptibleMigration => &mut out.susceptible_migration,
                    MatrixField::AttackedMigration => &mut out.attacked_migration,
                };
                target[from - 1][to - 1] = *value;
            }
        },
    }
    out.validate()?;
    Ok(out)
}

/// A validated scenario: baseline parameters, initial state, integration
/// controls and the transform variants to run alongside the baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub params: SarParameters,
    pub initial: SarState,
    pub step: f64,
    pub horizon: f64,
    pub epsilon: f64,
    pub transforms: Vec<Transform>,
    /// Optional path to a cost-table document, resolved by the caller.
    pub cost_table: Option<String>,
}

impl Scenario {
    /// Parses and validates a TOML scenario document.
    pub fn parse(source: &str) -> Result<Self, ScenarioError> {
        let doc: ScenarioDoc =
            toml::from_str(source).map_err(|e| ScenarioError::Toml(e.to_string()))?;
        doc.into_scenario()
    }

    /// Serialises back to the TOML document form; `parse` of the result
    /// reproduces the scenario exactly.
    pub fn to_toml(&self) -> String {
        ScenarioDoc::from_scenario(self).to_toml()
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioDoc {
    // top-level key, so it must precede the sections in a document
    #[serde(skip_serializing_if = "Option::is_none")]
    cost_table: Option<String>,
    model: ModelDoc,
    vectors: VectorsDoc,
    #[serde(skip_serializing_if = "Option::is_none")]
    matrices: Option<MatricesDoc>,
    #[serde(skip_serializing_if = "Option::is_none")]
    caps: Option<CapsDoc>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    transforms: Vec<TransformDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    population: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VectorsDoc {
    s0: Vec<f64>,
    a0: Vec<f64>,
    r0: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    beta: Vec<f64>,
    gamma: Vec<f64>,
    eta: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatricesDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CapsDoc {
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho_bar: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    eta_bar: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum TransformDoc {
    EconomicEfficiency { set: usize },
    EngineeringEfficiency { set: usize },
    ImpactFactor { set: usize, factor: f64 },
    RateOverride { path: String, value: f64 },
}

impl ScenarioDoc {
    fn into_scenario(self) -> Result<Scenario, ScenarioError> {
        let m = self.model.m;
        if m == 0 {
            return Err(ScenarioError::BadScalar {
                field: "model.m",
                value: 0.0,
            });
        }

        let check_vec = |field: &'static str, v: &[f64]| -> Result<(), ScenarioError> {
            if v.len() != m {
                return Err(ScenarioError::BadLength {
                    field,
                    expected: m,
                    found: v.len(),
                });
            }
            for (i, value) in v.iter().enumerate() {
                if !value.is_finite() || *value < 0.0 {
                    return Err(ScenarioError::BadEntry {
                        field,
                        index: i + 1,
                        value: *value,
                    });
                }
            }
            Ok(())
        };
        check_vec("vectors.s0", &self.vectors.s0)?;
        check_vec("vectors.a0", &self.vectors.a0)?;
        check_vec("vectors.r0", &self.vectors.r0)?;
        check_vec("vectors.b", &self.vectors.b)?;
        check_vec("vectors.c", &self.vectors.c)?;
        check_vec("vectors.beta", &self.vectors.beta)?;
        check_vec("vectors.gamma", &self.vectors.gamma)?;
        check_vec("vectors.eta", &self.vectors.eta)?;

        let take_matrix = |field: &'static str,
                           matrix: Option<Vec<Vec<f64>>>|
         -> Result<Vec<Vec<f64>>, ScenarioError> {
            let Some(matrix) = matrix else {
                return Ok(vec![vec![0.0; m]; m]);
            };
            if matrix.len() != m {
                return Err(ScenarioError::BadLength {
                    field,
                    expected: m,
                    found: matrix.len(),
                });
            }
            for row in &matrix {
                if row.len() != m {
                    return Err(ScenarioError::BadLength {
                        field,
                        expected: m,
                        found: row.len(),
                    });
                }
            }
            Ok(matrix)
        };
        let (lambda, rho) = match self.matrices {
            Some(mats) => (
                take_matrix("matrices.lambda", mats.lambda)?,
                take_matrix("matrices.rho", mats.rho)?,
            ),
            None => (vec![vec![0.0; m]; m], vec![vec![0.0; m]; m]),
        };

        let sum: f64 = self
            .vectors
            .s0
            .iter()
            .chain(&self.vectors.a0)
            .chain(&self.vectors.r0)
            .sum();
        let population = match self.model.population {
            Some(n) => {
                if !n.is_finite() || n <= 0.0 {
                    return Err(ScenarioError::BadScalar {
                        field: "model.population",
                        value: n,
                    });
                }
                n
            }
            None => {
                if sum <= 0.0 {
                    return Err(ScenarioError::EmptyPopulation);
                }
                sum
            }
        };

        let caps = match self.caps {
            Some(c) => RateCaps {
                susceptible_migration: c.lambda_bar,
                attacked_migration: c.rho_bar,
                network_impact: c.eta_bar,
            },
            None => RateCaps::default(),
        };

        let params = SarParameters {
            set_count: m,
            population,
            susceptible_migration: lambda,
            attacked_migration: rho,
            susceptible_removal: self.vectors.b,
            attacked_removal: self.vectors.c,
            susceptibility: self.vectors.beta,
            infectiousness: self.vectors.gamma,
            network_impact: self.vectors.eta,
            caps,
        };
        params.validate()?;

        let step = self.model.h.unwrap_or(DEFAULT_STEP);
        if !step.is_finite() || step <= 0.0 {
            return Err(ScenarioError::BadScalar {
                field: "model.h",
                value: step,
            });
        }
        let horizon = self.model.horizon.unwrap_or(DEFAULT_HORIZON);
        if !horizon.is_finite() || horizon <= 0.0 {
            return Err(ScenarioError::BadScalar {
                field: "model.horizon",
                value: horizon,
            });
        }
        if horizon < step {
            return Err(ScenarioError::HorizonTooShort { horizon, step });
        }
        let epsilon = self.model.epsilon.unwrap_or(DEFAULT_EPSILON);
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(ScenarioError::BadScalar {
                field: "model.epsilon",
                value: epsilon,
            });
        }

        let mut transforms = Vec::with_capacity(self.transforms.len());
        for (idx, doc) in self.transforms.into_iter().enumerate() {
            let transform = match doc {
                TransformDoc::EconomicEfficiency { set } => Transform::EconomicEfficiency { set },
                TransformDoc::EngineeringEfficiency { set } => {
                    Transform::EngineeringEfficiency { set }
                }
                TransformDoc::ImpactFactor { set, factor } => {
                    Transform::ImpactFactor { set, factor }
                }
                TransformDoc::RateOverride { path, value } => {
                    let path =
                        RatePath::parse(&path).map_err(|source| ScenarioError::Transform {
                            index: idx + 1,
                            source,
                        })?;
                    Transform::RateOverride { path, value }
                }
            };
            // each variant must apply cleanly to the baseline, caps included
            apply_transform(&params, &transform).map_err(|source| ScenarioError::Transform {
                index: idx + 1,
                source,
            })?;
            transforms.push(transform);
        }

        let initial = SarState::new(0.0, self.vectors.s0, self.vectors.a0, self.vectors.r0);

        Ok(Scenario {
            params,
            initial,
            step,
            horizon,
            epsilon,
            transforms,
            cost_table: self.cost_table,
        })
    }

    fn from_scenario(scenario: &Scenario) -> Self {
        let params = &scenario.params;
        let zero_matrix = |m: &Vec<Vec<f64>>| m.iter().all(|row| row.iter().all(|v| *v == 0.0));
        let matrices = if zero_matrix(&params.susceptible_migration)
            && zero_matrix(&params.attacked_migration)
        {
            None
        } else {
            Some(MatricesDoc {
                lambda: Some(params.susceptible_migration.clone()),
                rho: Some(params.attacked_migration.clone()),
            })
        };
        let caps = if params.caps == RateCaps::default() {
            None
        } else {
            Some(CapsDoc {
                lambda_bar: params.caps.susceptible_migration,
                rho_bar: params.caps.attacked_migration,
                eta_bar: params.caps.network_impact,
            })
        };
        ScenarioDoc {
            cost_table: scenario.cost_table.clone(),
            model: ModelDoc {
                m: params.set_count,
                population: Some(params.population),
                h: Some(scenario.step),
                horizon: Some(scenario.horizon),
                epsilon: Some(scenario.epsilon),
            },
            vectors: VectorsDoc {
                s0: scenario.initial.susceptible.clone(),
                a0: scenario.initial.attacked.clone(),
                r0: scenario.initial.removed.clone(),
                b: params.susceptible_removal.clone(),
                c: params.attacked_removal.clone(),
                beta: params.susceptibility.clone(),
                gamma: params.infectiousness.clone(),
                eta: params.network_impact.clone(),
            },
            matrices,
            caps,
            transforms: scenario
                .transforms
                .iter()
                .map(|t| match t {
                    Transform::EconomicEfficiency { set } => {
                        TransformDoc::EconomicEfficiency { set: *set }
                    }
                    Transform::EngineeringEfficiency { set } => {
                        TransformDoc::EngineeringEfficiency { set: *set }
                    }
                    Transform::ImpactFactor { set, factor } => TransformDoc::ImpactFactor {
                        set: *set,
                        factor: *factor,
                    },
                    Transform::RateOverride { path, value } => TransformDoc::RateOverride {
                        path: path.to_string(),
                        value: *value,
                    },
                })
                .collect(),
        }
    }

    fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serialisation cannot fail")
    }
}
