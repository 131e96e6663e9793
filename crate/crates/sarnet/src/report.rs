//! Run orchestration and deterministic text outputs.
//!
//! [`execute`] simulates a scenario's baseline and one variant per
//! transform stanza, producing per-run trajectory and cost CSVs, a
//! stability block, and a single plain-text summary with per-compartment
//! pattern labels, convergence times and baseline comparisons. All
//! outputs are built with fixed ordering and shortest round-trip float
//! formatting, so identical inputs give byte-identical artifacts.

use std::fmt;
use std::fmt::Write as _;

use thiserror::Error;

use crate::cost::{cost_curve, CostCurve, CostError, CostTable};
use crate::dynamics::{
    convergence_time, simulate, Compartment, Diagnostic, DynamicsError, SarParameters, Trajectory,
};
use crate::graph::EpidemicState;
use crate::scenario::{apply_transform, Scenario, TransformError};
use crate::stability::{build_dfe_matrix, reproduction_number, solve_dfe, StabilityError};

#[derive(Debug, Error, PartialEq)]
pub enum RunError {
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Cost(#[from] CostError),
}

/// Shape label for one compartment's time series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PatternClass {
    /// No sample differs from the first.
    Constant,
    /// Rises at least 1% of the initial total above its start, then gives
    /// that much back.
    BirthGrowthDecrease,
    /// Never rises appreciably and loses at least 1% of the initial
    /// total.
    BirthDecrease,
    /// Non-decreasing, and the final 10% of samples vary by less than 1%
    /// of the final value.
    GrowthPlateau,
    Other,
}

impl fmt::Display for PatternClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternClass::Constant => "constant",
            PatternClass::BirthGrowthDecrease => "birth-growth-decrease",
            PatternClass::BirthDecrease => "birth-decrease",
            PatternClass::GrowthPlateau => "growth-plateau",
            PatternClass::Other => "other",
        })
    }
}

/// Classifies a compartment series. `initial_total` (the conserved
/// population) scales the 1% significance threshold.
pub fn classify_pattern(samples: &[f64], initial_total: f64) -> PatternClass {
    let Some((&first, rest)) = samples.split_first() else {
        return PatternClass::Other;
    };
    let last = *rest.last().unwrap_or(&first);
    let max = samples.iter().fold(f64::MIN, |a, &b| a.max(b));
    let min = samples.iter().fold(f64::MAX, |a, &b| a.min(b));

    let flat_tol = 1e-12 * (1.0 + max.abs().max(min.abs()));
    if max - min <= flat_tol {
        return PatternClass::Constant;
    }

    let significant = 0.01 * initial_total;
    let rose = max - first >= significant;
    if rose && max - last >= significant {
        return PatternClass::BirthGrowthDecrease;
    }

    let mono_tol = 1e-9 * (1.0 + max.abs());
    let non_decreasing = samples.windows(2).all(|w| w[1] >= w[0] - mono_tol);
    if non_decreasing && last > first && last > 0.0 {
        let window = samples.len().div_ceil(10);
        let tail = &samples[samples.len() - window..];
        let tail_max = tail.iter().fold(f64::MIN, |a, &b| a.max(b));
        let tail_min = tail.iter().fold(f64::MAX, |a, &b| a.min(b));
        if tail_max - tail_min < 0.01 * last {
            return PatternClass::GrowthPlateau;
        }
    }

    if !rose && first - last >= significant {
        return PatternClass::BirthDecrease;
    }
    PatternClass::Other
}

/// Trajectory CSV: header `t,S_1..S_m,A_1..A_m,R_1..R_m`, one row per
/// recorded state, shortest round-trip decimal notation.
pub fn trajectory_csv(traj: &Trajectory) -> String {
    let m = traj.set_count();
    let mut out = String::from("t");
    for prefix in ["S", "A", "R"] {
        for i in 1..=m {
            let _ = write!(out, ",{prefix}_{i}");
        }
    }
    out.push('\n');
    for state in &traj.states {
        let _ = write!(out, "{}", state.time);
        for value in state
            .susceptible
            .iter()
            .chain(&state.attacked)
            .chain(&state.removed)
        {
            let _ = write!(out, ",{value}");
        }
        out.push('\n');
    }
    out
}

/// Cost CSV: header `t,<network>_<state>...`, state-major column order.
pub fn cost_csv(curves: &[CostCurve]) -> String {
    let mut out = String::from("t");
    for curve in curves {
        for (network, _) in &curve.series {
            let _ = write!(out, ",{network}_{}", curve.state);
        }
    }
    out.push('\n');
    let Some(first) = curves.first() else {
        return out;
    };
    for (row, t) in first.times.iter().enumerate() {
        let _ = write!(out, "{t}");
        for curve in curves {
            for (_, values) in &curve.series {
                let _ = write!(out, ",{}", values[row]);
            }
        }
        out.push('\n');
    }
    out
}

/// Stability text block: determinant, case, equilibrium, the diagonal
/// factors and the reproduction number. Analysis failures are reported
/// in place of the unavailable lines.
pub fn stability_block(params: &SarParameters, masses: &[f64]) -> String {
    let mat = build_dfe_matrix(params);
    let mut out = String::new();
    let _ = writeln!(out, "determinant: {}", mat.determinant());
    match solve_dfe(&mat, masses, mat.singularity_tolerance()) {
        Err(err) => {
            let _ = writeln!(out, "case: unresolved ({err})");
        }
        Ok(solution) => {
            let _ = writeln!(out, "case: {}", solution.case);
            let _ = writeln!(out, "dfe: {}", format_vector(&solution.dfe));
            match reproduction_number(params, solution.case, &solution.dfe) {
                Ok(report) => {
                    let _ = writeln!(out, "F: {}", format_vector(&report.new_infection_diag));
                    let _ = writeln!(out, "V: {}", format_vector(&report.transition_diag));
                    let _ = writeln!(out, "K: {}", format_vector(&report.next_generation_diag));
                    let _ = writeln!(out, "r0: {}", report.r0);
                    let _ = writeln!(out, "verdict: {}", report.verdict);
                }
                Err(err @ StabilityError::ZeroDenominator { .. }) => {
                    let _ = writeln!(out, "r0: undefined ({err})");
                    let _ = writeln!(out, "verdict: undefined");
                }
                Err(err) => {
                    let _ = writeln!(out, "r0: unresolved ({err})");
                    let _ = writeln!(out, "verdict: undefined");
                }
            }
        }
    }
    out
}

fn format_vector(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| v.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// One output file by relative name.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedFile {
    pub name: String,
    pub contents: String,
}

/// Everything a run produces, in deterministic order.
#[derive(Debug, Clone, PartialEq)]
pub struct RunArtifacts {
    pub files: Vec<NamedFile>,
    pub summary: String,
    /// Step-size warnings collected across the baseline and all variants.
    pub diagnostics: Vec<Diagnostic>,
}

/// Output controls for [`execute`].
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Cost table to price the trajectories with; the built-in table when
    /// absent.
    pub cost_table: Option<CostTable>,
    /// States to include in the cost CSVs.
    pub cost_states: Vec<EpidemicState>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            cost_table: None,
            cost_states: vec![
                EpidemicState::Susceptible,
                EpidemicState::Attacked,
                EpidemicState::Removed,
            ],
        }
    }
}

/// Runs the baseline and every transform variant of a scenario.
///
/// Per run the artifacts contain `trajectory[.label].csv`,
/// `stability[.label].txt` and `costs[.label].csv`; the shared
/// `summary.txt` closes the list. Variant labels come from
/// [`crate::scenario::Transform::label`].
pub fn execute(scenario: &Scenario, opts: &RunOptions) -> Result<RunArtifacts, RunError> {
    // An explicitly supplied table must fit the scenario; the built-in
    // fallback is only used where it matches the set count.
    let explicit = opts.cost_table.is_some();
    let table = opts.cost_table.clone().unwrap_or_else(CostTable::builtin);
    let price_runs = if table.set_count() == scenario.params.set_count {
        true
    } else if explicit {
        return Err(RunError::Cost(CostError::SetCountMismatch {
            table: table.set_count(),
            trajectory: scenario.params.set_count,
        }));
    } else {
        false
    };

    let mut runs: Vec<(Option<String>, SarParameters)> = vec![(None, scenario.params.clone())];
    for (idx, transform) in scenario.transforms.iter().enumerate() {
        runs.push((
            Some(transform.label(idx + 1)),
            apply_transform(&scenario.params, transform)?,
        ));
    }

    let mut files = Vec::new();
    let mut diagnostics = Vec::new();
    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "scenario: m={} population={} h={} horizon={} epsilon={}",
        scenario.params.set_count,
        scenario.params.population,
        scenario.step,
        scenario.horizon,
        scenario.epsilon
    );
    let _ = writeln!(summary, "transforms: {}", scenario.transforms.len());
    if !price_runs {
        let _ = writeln!(
            summary,
            "costs: skipped (built-in table covers {} sets, scenario has {})",
            table.set_count(),
            scenario.params.set_count
        );
    }

    let mut baseline_taus: Vec<Option<f64>> = Vec::new();
    for (label, params) in &runs {
        let traj = simulate(params, &scenario.initial, scenario.step, scenario.horizon)?;
        diagnostics.extend(traj.diagnostics.iter().cloned());

        let suffix = label.as_ref().map(|l| format!(".{l}")).unwrap_or_default();
        files.push(NamedFile {
            name: format!("trajectory{suffix}.csv"),
            contents: trajectory_csv(&traj),
        });
        files.push(NamedFile {
            name: format!("stability{suffix}.txt"),
            contents: stability_block(params, &scenario.initial.susceptible),
        });
        if price_runs {
            let curves = opts
                .cost_states
                .iter()
                .map(|state| cost_curve(&traj, &table, *state))
                .collect::<Result<Vec<_>, _>>()?;
            files.push(NamedFile {
                name: format!("costs{suffix}.csv"),
                contents: cost_csv(&curves),
            });
        }

        append_run_summary(
            &mut summary,
            label.as_deref(),
            params,
            &traj,
            scenario.epsilon,
            &scenario.initial.susceptible,
            &mut baseline_taus,
        );
    }

    for diagnostic in &diagnostics {
        let _ = writeln!(summary, "warning: {diagnostic}");
    }

    files.push(NamedFile {
        name: "summary.txt".into(),
        contents: summary.clone(),
    });

    Ok(RunArtifacts {
        files,
        summary,
        diagnostics,
    })
}

fn append_run_summary(
    summary: &mut String,
    label: Option<&str>,
    params: &SarParameters,
    traj: &Trajectory,
    epsilon: f64,
    masses: &[f64],
    baseline_taus: &mut Vec<Option<f64>>,
) {
    let is_baseline = label.is_none();
    let _ = writeln!(summary, "\nrun: {}", label.unwrap_or("baseline"));
    for line in stability_block(params, masses).lines() {
        let _ = writeln!(summary, "  {line}");
    }

    let m = traj.set_count();
    let total = traj.states[0].total();
    let mut position = 0;
    for state in [
        EpidemicState::Susceptible,
        EpidemicState::Attacked,
        EpidemicState::Removed,
    ] {
        for set in 0..m {
            let compartment = Compartment { state, set };
            let series = traj.series(compartment);
            let pattern = classify_pattern(&series, total);
            let tau = convergence_time(traj, compartment, epsilon)
                .expect("selector and epsilon validated upstream");
            let tau_text = match tau {
                Some(t) => t.to_string(),
                None => "none".into(),
            };
            let _ = write!(summary, "  {compartment}: pattern={pattern} tau={tau_text}");
            if is_baseline {
                baseline_taus.push(tau);
            } else {
                let reference = baseline_taus.get(position).copied().flatten();
                match (tau, reference) {
                    (Some(now), Some(base)) => {
                        let direction = if now > base {
                            "increased"
                        } else if now < base {
                            "decreased"
                        } else {
                            "unchanged"
                        };
                        let _ = write!(summary, " (baseline {base}, {direction})");
                    }
                    (None, Some(base)) => {
                        let _ = write!(summary, " (baseline {base}, no longer reached)");
                    }
                    (Some(_), None) => {
                        let _ = write!(summary, " (baseline none, newly reached)");
                    }
                    (None, None) => {
                        let _ = write!(summary, " (baseline none)");
                    }
                }
            }
            summary.push('\n');
            position += 1;
        }
    }
}
