//! Disease-free equilibrium (DFE) analysis and the basic reproduction
//! number.
//!
//! With all attacked compartments at zero, the susceptible steady state
//! solves the linear system `S A = 0` where `A` collects the migration
//! and removal rates. A nonzero determinant forces the empty network
//! (`S* = 0`, R0 = 0); a zero determinant admits a family of equilibria,
//! from which a canonical non-negative representative is picked and
//! scaled to the caller's susceptible mass. The next-generation matrix
//! `K = F V^-1` is diagonal here, so R0 is its trace.

use std::fmt;

use thiserror::Error;

use crate::dynamics::SarParameters;

/// Relative slack used when classifying the determinant and accepting
/// elimination pivots.
const BASE_TOLERANCE: f64 = 1e-10;
/// Entries this close to zero (relative to the vector scale) are clamped
/// when checking a candidate equilibrium for non-negativity.
const CLAMP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum StabilityError {
    #[error("expected {expected} diffusion sets, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("tolerance must be positive and finite, got {0}")]
    InvalidTolerance(f64),
    #[error("susceptible masses must be finite and non-negative")]
    InvalidMasses,
    #[error("dfe entries must be finite and non-negative")]
    InvalidDfe,
    #[error("a nonzero determinant admits only the zero equilibrium")]
    NonzeroCaseRequiresZeroDfe,
    #[error(
        "transition denominator for set {set} is zero: no attacked removal or outgoing migration"
    )]
    ZeroDenominator { set: usize },
    #[error("determinant classified as zero but elimination found full rank")]
    NoNullSpace,
    #[error("no non-negative direction exists in the equilibrium family")]
    NoNonNegativeDfe,
    #[error("equilibrium residual {residual} exceeds 1e-9 of the solution norm")]
    ResidualTooLarge { residual: f64 },
}

/// Determinant classification of the DFE matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeterminantCase {
    /// `det A != 0` within tolerance: the zero vector is the only DFE.
    Nonzero,
    /// `det A = 0` within tolerance: infinitely many DFE points.
    Zero,
}

impl fmt::Display for DeterminantCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DeterminantCase::Nonzero => "det-nonzero",
            DeterminantCase::Zero => "det-zero",
        })
    }
}

/// Stability verdict attached to a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    /// Zero DFE: the empty network stays empty.
    GloballyStable,
    /// R0 below one.
    Subcritical,
    /// R0 at or above one; flagged conservatively at the boundary.
    Supercritical,
}

impl fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityVerdict::GloballyStable => "globally-stable",
            StabilityVerdict::Subcritical => "subcritical",
            StabilityVerdict::Supercritical => "supercritical",
        })
    }
}

/// The matrix of the DFE system `S A = 0` (row-vector convention):
/// `A[i][i] = -sum_{j != i} lambda[i][j] - b_i` and `A[i][j] = lambda[i][j]`
/// off the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DfeMatrix {
    size: usize,
    /// Row-major entries.
    entries: Vec<f64>,
    determinant: f64,
}

impl DfeMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn entry(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.size + col]
    }

    /// Determinant computed by LU factorisation with partial pivoting.
    pub fn determinant(&self) -> f64 {
        self.determinant
    }

    /// Max-absolute-row-sum norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.size)
            .map(|i| (0..self.size).map(|j| self.entry(i, j).abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Scale-aware singularity threshold: `1e-10 * (1 + ||A||_inf)^m`.
    pub fn singularity_tolerance(&self) -> f64 {
        BASE_TOLERANCE * (1.0 + self.norm_inf()).powi(self.size as i32)
    }
}

/// Case classification plus the canonical equilibrium vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DfeSolution {
    pub case: DeterminantCase,
    /// Susceptible equilibrium `S*` (attacked compartments are zero).
    pub dfe: Vec<f64>,
}

/// Full stability report for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub case: DeterminantCase,
    pub determinant: f64,
    /// Susceptible equilibrium `S*`.
    pub dfe: Vec<f64>,
    /// Diagonal of `F`: new-infection rates `beta_i gamma_i eta_i S*_i / N`.
    pub new_infection_diag: Vec<f64>,
    /// Diagonal of `V`: transition rates `sum_{j != i} rho[i][j] + c_i`.
    pub transition_diag: Vec<f64>,
    /// Diagonal of `K = F V^-1`.
    pub next_generation_diag: Vec<f64>,
    /// Basic reproduction number: the trace of `K`.
    pub r0: f64,
    pub verdict: StabilityVerdict,
}

/// Assembles the DFE matrix from the parameters and computes its
/// determinant.
pub fn build_dfe_matrix(params: &SarParameters) -> DfeMatrix {
    let m = params.set_count;
    let mut entries = vec![0.0; m * m];
    for i in 0..m {
        let mut outflow = 0.0;
        for j in 0..m {
            if j != i {
                entries[i * m + j] = params.susceptible_migration[i][j];
                outflow += params.susceptible_migration[i][j];
            }
        }
        entries[i * m + i] = -outflow - params.susceptible_removal[i];
    }
    let determinant = lu_determinant(entries.clone(), m);
    DfeMatrix {
        size: m,
        entries,
        determinant,
    }
}

/// Classifies the determinant against `tol` and returns the canonical
/// equilibrium.
///
/// In the singular case the equilibrium family is one- or
/// higher-dimensional; the representative returned is the projection of
/// `masses` (by default the initial susceptible vector) onto the null
/// space of `A^T`, rescaled so its entries sum to the total mass. If the
/// projection leaves the non-negative orthant, the null-space basis
/// directions are tried instead; failing that the family genuinely has
/// no non-negative direction and an error is reported.
pub fn solve_dfe(mat: &DfeMatrix, masses: &[f64], tol: f64) -> Result<DfeSolution, StabilityError> {
    if !tol.is_finite() || tol <= 0.0 {
        return Err(StabilityError::InvalidTolerance(tol));
    }
    let m = mat.size;
    if masses.len() != m {
        return Err(StabilityError::DimensionMismatch {
            expected: m,
            found: masses.len(),
        });
    }
    if masses.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(StabilityError::InvalidMasses);
    }

    if mat.determinant.abs() > tol {
        return Ok(DfeSolution {
            case: DeterminantCase::Nonzero,
            dfe: vec![0.0; m],
        });
    }

    // The DFE system is S A = 0, so solve the null space of A^T.
    let mut transposed = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            transposed[j * m + i] = mat.entries[i * m + j];
        }
    }
    let pivot_tol = BASE_TOLERANCE * (1.0 + mat.norm_inf());
    let basis = null_space(&transposed, m, pivot_tol);
    if basis.is_empty() {
        return Err(StabilityError::NoNullSpace);
    }
    let ortho = orthonormalize(basis);

    let total: f64 = masses.iter().sum();
    if total == 0.0 {
        return Ok(DfeSolution {
            case: DeterminantCase::Zero,
            dfe: vec![0.0; m],
        });
    }

    let mut projection = vec![0.0; m];
    for q in &ortho {
        let coeff: f64 = q.iter().zip(masses).map(|(a, b)| a * b).sum();
        for (p, v) in projection.iter_mut().zip(q) {
            *p += coeff * v;
        }
    }

    let mut candidates: Vec<Vec<f64>> = vec![projection];
    for q in &ortho {
        candidates.push(q.clone());
        candidates.push(q.iter().map(|v| -v).collect());
    }

    for candidate in candidates {
        if let Some(dfe) = scale_non_negative(&candidate, total) {
            let residual = residual_norm(&transposed, m, &dfe);
            let norm = dfe.iter().map(|v| v * v).sum::<f64>().sqrt();
            if residual > 1e-9 * norm.max(f64::MIN_POSITIVE) {
                return Err(StabilityError::ResidualTooLarge { residual });
            }
            return Ok(DfeSolution {
                case: DeterminantCase::Zero,
                dfe,
            });
        }
    }
    Err(StabilityError::NoNonNegativeDfe)
}

/// Builds the next-generation matrix at the equilibrium and reports R0.
///
/// `F = diag(beta_i gamma_i eta_i S*_i / N)`,
/// `V = diag(sum_{j != i} rho[i][j] + c_i)`, `K = F V^-1`,
/// `R0 = trace(K)`. Every `V` entry must be positive.
pub fn reproduction_number(
    params: &SarParameters,
    case: DeterminantCase,
    dfe: &[f64],
) -> Result<StabilityReport, StabilityError> {
    let m = params.set_count;
    if dfe.len() != m {
        return Err(StabilityError::DimensionMismatch {
            expected: m,
            found: dfe.len(),
        });
    }
    if dfe.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(StabilityError::InvalidDfe);
    }
    let zero_dfe = dfe.iter().all(|v| *v == 0.0);
    if case == DeterminantCase::Nonzero && !zero_dfe {
        return Err(StabilityError::NonzeroCaseRequiresZeroDfe);
    }

    let mut transition = Vec::with_capacity(m);
    for i in 0..m {
        let outgoing: f64 = (0..m)
            .filter(|j| *j != i)
            .map(|j| params.attacked_migration[i][j])
            .sum();
        let rate = outgoing + params.attacked_removal[i];
        if rate <= 0.0 {
            return Err(StabilityError::ZeroDenominator { set: i + 1 });
        }
        transition.push(rate);
    }

    let new_infection: Vec<f64> = (0..m)
        .map(|i| {
            params.susceptibility[i] * params.infectiousness[i] * params.network_impact[i] * dfe[i]
                / params.population
        })
        .collect();
    let next_generation: Vec<f64> = new_infection
        .iter()
        .zip(&transition)
        .map(|(f, v)| f / v)
        .collect();
    let r0: f64 = next_generation.iter().sum();

    let verdict = if zero_dfe {
        StabilityVerdict::GloballyStable
    } else if r0 < 1.0 {
        StabilityVerdict::Subcritical
    } else {
        StabilityVerdict::Supercritical
    };

    Ok(StabilityReport {
        case,
        determinant: build_dfe_matrix(params).determinant,
        dfe: dfe.to_vec(),
        new_infection_diag: new_infection,
        transition_diag: transition,
        next_generation_diag: next_generation,
        r0,
        verdict,
    })
}

/// Convenience pipeline: matrix, equilibrium (at the matrix's own
/// singularity tolerance) and reproduction number in one call.
pub fn analyze(params: &SarParameters, masses: &[f64]) -> Result<StabilityReport, StabilityError> {
    let mat = build_dfe_matrix(params);
    let solution = solve_dfe(&mat, masses, mat.singularity_tolerance())?;
    reproduction_number(params, solution.case, &solution.dfe)
}

fn lu_determinant(mut a: Vec<f64>, n: usize) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let mut det = 1.0;
    for col in 0..n {
        let mut pivot_row = col;
        let mut best = a[col * n + col].abs();
        for row in (col + 1)..n {
            let v = a[row * n + col].abs();
            if v > best {
                best = v;
                pivot_row = row;
            }
        }
        if best == 0.0 {
            return 0.0;
        }
        if pivot_row != col {
            for k in 0..n {
                a.swap(col * n + k, pivot_row * n + k);
            }
            det = -det;
        }
        let pivot = a[col * n + col];
        det *= pivot;
        for row in (col + 1)..n {
            let factor = a[row * n + col] / pivot;
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
        }
    }
    det
}

/// Null-space basis of an `n x n` matrix via reduced row echelon form
/// with partial pivoting; pivots at or below `pivot_tol` mark free
/// columns.
fn null_space(matrix: &[f64], n: usize, pivot_tol: f64) -> Vec<Vec<f64>> {
    let mut a = matrix.to_vec();
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let mut best_row = row;
        let mut best = 0.0;
        for r in row..n {
            let v = a[r * n + col].abs();
            if v > best {
                best = v;
                best_row = r;
            }
        }
        if best <= pivot_tol {
            continue;
        }
        for k in 0..n {
            a.swap(row * n + k, best_row * n + k);
        }
        let pivot = a[row * n + col];
        for k in col..n {
            a[row * n + k] /= pivot;
        }
        for r in 0..n {
            if r != row {
                let factor = a[r * n + col];
                if factor != 0.0 {
                    for k in col..n {
                        a[r * n + k] -= factor * a[row * n + k];
                    }
                }
            }
        }
        pivot_cols.push(col);
        row += 1;
        if row == n {
            break;
        }
    }

    (0..n)
        .filter(|c| !pivot_cols.contains(c))
        .map(|free| {
            let mut v = vec![0.0; n];
            v[free] = 1.0;
            for (r, &pc) in pivot_cols.iter().enumerate() {
                v[pc] = -a[r * n + free];
            }
            v
        })
        .collect()
}

/// Modified Gram–Schmidt; near-dependent vectors are dropped.
fn orthonormalize(basis: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut ortho: Vec<Vec<f64>> = Vec::new();
    for mut v in basis {
        for q in &ortho {
            let coeff: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (x, qv) in v.iter_mut().zip(q) {
                *x -= coeff * qv;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            ortho.push(v);
        }
    }
    ortho
}

/// Clamps tiny negatives to zero and rescales to the target sum; `None`
/// when the candidate has a genuinely negative entry or no mass.
fn scale_non_negative(candidate: &[f64], target_sum: f64) -> Option<Vec<f64>> {
    let scale = candidate.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let clamp = CLAMP_TOLERANCE * (1.0 + scale);
    let mut clamped = Vec::with_capacity(candidate.len());
    for &v in candidate {
        if v < -clamp {
            return None;
        }
        clamped.push(v.max(0.0));
    }
    let sum: f64 = clamped.iter().sum();
    if sum <= clamp {
        return None;
    }
    let factor = target_sum / sum;
    let scaled: Vec<f64> = clamped.iter().map(|v| v * factor).collect();
    scaled.iter().all(|v| v.is_finite()).then_some(scaled)
}

fn residual_norm(matrix: &[f64], n: usize, x: &[f64]) -> f64 {
    (0..n)
        .map(|i| {
            let row: f64 = (0..n).map(|j| matrix[i * n + j] * x[j]).sum();
            row * row
        })
        .sum::<f64>()
        .sqrt()
}
