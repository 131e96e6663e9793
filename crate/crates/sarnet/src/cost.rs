//! Per-state unit costs and average cost-of-infection curves.
//!
//! A [`CostTable`] assigns a non-negative unit cost (in Rands) to every
//! (network type, diffusion set, epidemic state) triple. Applied to a
//! trajectory, the average cost of a state at time `t` is the
//! population-normalised weighted sum
//! `sum_i cost(network, i, state) * X_i(t) / N_total`, where `X_i` is
//! that state's compartment in set `i` and `N_total` the conserved total
//! population of the trajectory.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{Compartment, Trajectory};
use crate::graph::EpidemicState;

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("cost table parse error: {0}")]
    Parse(String),
    #[error("cost table lists no networks")]
    Empty,
    #[error("duplicate network `{0}`")]
    DuplicateNetwork(String),
    #[error("network `{network}` lists {found} sets, expected {expected}")]
    UnevenSets {
        network: String,
        expected: usize,
        found: usize,
    },
    #[error(
        "cost for ({network}, set {set}, {state}) must be finite and non-negative, got {value}"
    )]
    BadCost {
        network: String,
        set: usize,
        state: EpidemicState,
        value: f64,
    },
    #[error("cost table covers {table} sets but the trajectory has {trajectory}")]
    SetCountMismatch { table: usize, trajectory: usize },
}

/// Unit costs of the three epidemic states for one diffusion set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateCosts {
    pub susceptible: f64,
    pub attacked: f64,
    pub removed: f64,
}

impl StateCosts {
    pub fn get(&self, state: EpidemicState) -> f64 {
        match state {
            EpidemicState::Susceptible => self.susceptible,
            EpidemicState::Attacked => self.attacked,
            EpidemicState::Removed => self.removed,
        }
    }
}

/// Unit costs for one network type, indexed by diffusion set position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkCosts {
    pub name: String,
    pub set: Vec<StateCosts>,
}

/// Complete unit-cost table: every listed network covers the same number
/// of diffusion sets with all three states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostTable {
    pub network: Vec<NetworkCosts>,
}

impl CostTable {
    /// The built-in cost table: Facebook, Skype and Public safety over
    /// four diffusion sets.
    pub fn builtin() -> Self {
        let costs = |entries: [(f64, f64, f64); 4]| -> Vec<StateCosts> {
            entries
                .into_iter()
                .map(|(susceptible, attacked, removed)| StateCosts {
                    susceptible,
                    attacked,
                    removed,
                })
                .collect()
        };
        CostTable {
            network: vec![
                NetworkCosts {
                    name: "Facebook".into(),
                    set: costs([
                        (5.0, 55.0, 55.0),
                        (10.0, 65.0, 0.0),
                        (20.0, 40.0, 50.0),
                        (20.0, 0.0, 110.0),
                    ]),
                },
                NetworkCosts {
                    name: "Skype".into(),
                    set: costs([
                        (35.0, 80.0, 55.0),
                        (30.0, 55.0, 0.0),
                        (30.0, 10.0, 20.0),
                        (10.0, 0.0, 100.0),
                    ]),
                },
                NetworkCosts {
                    name: "Public safety".into(),
                    set: costs([
                        (110.0, 210.0, 70.0),
                        (105.0, 255.0, 0.0),
                        (70.0, 150.0, 40.0),
                        (50.0, 0.0, 70.0),
                    ]),
                },
            ],
        }
    }

    /// Parses and validates a TOML cost-table document.
    pub fn parse(source: &str) -> Result<Self, CostError> {
        let table: CostTable =
            toml::from_str(source).map_err(|e| CostError::Parse(e.to_string()))?;
        table.validate()?;
        Ok(table)
    }

    /// Serialises the table back to its TOML document form.
    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("cost table serialisation cannot fail")
    }

    pub fn validate(&self) -> Result<(), CostError> {
        if self.network.is_empty() {
            return Err(CostError::Empty);
        }
        let expected = self.network[0].set.len();
        let mut seen = std::collections::BTreeSet::new();
        for net in &self.network {
            if !seen.insert(net.name.clone()) {
                return Err(CostError::DuplicateNetwork(net.name.clone()));
            }
            if net.set.len() != expected || expected == 0 {
                return Err(CostError::UnevenSets {
                    network: net.name.clone(),
                    expected: expected.max(1),
                    found: net.set.len(),
                });
            }
            for (idx, costs) in net.set.iter().enumerate() {
                for state in [
                    EpidemicState::Susceptible,
                    EpidemicState::Attacked,
                    EpidemicState::Removed,
                ] {
                    let value = costs.get(state);
                    if !value.is_finite() || value < 0.0 {
                        return Err(CostError::BadCost {
                            network: net.name.clone(),
                            set: idx + 1,
                            state,
                            value,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Number of diffusion sets covered by every network.
    pub fn set_count(&self) -> usize {
        self.network.first().map_or(0, |n| n.set.len())
    }

    pub fn network_names(&self) -> impl Iterator<Item = &str> {
        self.network.iter().map(|n| n.name.as_str())
    }

    /// Unit cost for a (network, 0-based set, state) triple.
    pub fn unit_cost(&self, network: &str, set: usize, state: EpidemicState) -> Option<f64> {
        self.network
            .iter()
            .find(|n| n.name == network)
            .and_then(|n| n.set.get(set))
            .map(|c| c.get(state))
    }
}

/// Average cost per node over time, one series per network type.
#[derive(Debug, Clone, PartialEq)]
pub struct CostCurve {
    pub state: EpidemicState,
    pub times: Vec<f64>,
    /// `(network name, values aligned with times)` in table order.
    pub series: Vec<(String, Vec<f64>)>,
}

/// Evaluates the average cost of one epidemic state across a trajectory.
pub fn cost_curve(
    traj: &Trajectory,
    table: &CostTable,
    state: EpidemicState,
) -> Result<CostCurve, CostError> {
    table.validate()?;
    let m = traj.set_count();
    if table.set_count() != m {
        return Err(CostError::SetCountMismatch {
            table: table.set_count(),
            trajectory: m,
        });
    }
    let total = traj.states[0].total();
    let compartments: Vec<Vec<f64>> = (0..m)
        .map(|set| traj.series(Compartment { state, set }))
        .collect();

    let mut series = Vec::with_capacity(table.network.len());
    for net in &table.network {
        let values = (0..traj.states.len())
            .map(|t| {
                let weighted: f64 = net
                    .set
                    .iter()
                    .zip(&compartments)
                    .map(|(costs, samples)| costs.get(state) * samples[t])
                    .sum();
                weighted / total
            })
            .collect();
        series.push((net.name.clone(), values));
    }
    Ok(CostCurve {
        state,
        times: traj.times.clone(),
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{simulate, SarParameters, SarState};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn builtin_spot_checks() {
        let table = CostTable::builtin();
        assert_eq!(
            table.unit_cost("Facebook", 0, EpidemicState::Susceptible),
            Some(5.0)
        );
        assert_eq!(
            table.unit_cost("Public safety", 1, EpidemicState::Attacked),
            Some(255.0)
        );
        assert_eq!(
            table.unit_cost("Skype", 3, EpidemicState::Attacked),
            Some(0.0)
        );
        assert_eq!(table.set_count(), 4);
        assert_eq!(table.network.len(), 3);
        table.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let table = CostTable::builtin();
        let text = table.to_toml();
        let reparsed = CostTable::parse(&text).unwrap();
        assert_eq!(reparsed, table);
    }

    #[test]
    fn builtin_serialisation_matches_golden_file() {
        let golden = include_str!("../data/cost_table_default.toml");
        assert_eq!(CostTable::builtin().to_toml(), golden);
    }

    #[test]
    fn parse_rejects_negative_cost() {
        let mut table = CostTable::builtin();
        table.network[0].set[2].removed = -1.0;
        let err = CostTable::parse(&table.to_toml()).unwrap_err();
        assert!(matches!(err, CostError::BadCost { .. }), "{err}");
    }

    #[test]
    fn parse_rejects_missing_state() {
        let text = "\
[[network]]
name = \"Facebook\"

[[network.set]]
susceptible = 5.0
attacked = 55.0
";
        let err = CostTable::parse(text).unwrap_err();
        assert!(matches!(err, CostError::Parse(_)), "{err}");
    }

    #[test]
    fn parse_rejects_uneven_set_counts() {
        let mut table = CostTable::builtin();
        table.network[1].set.pop();
        let err = CostTable::parse(&table.to_toml()).unwrap_err();
        assert!(matches!(err, CostError::UnevenSets { .. }), "{err}");
    }

    fn constant_trajectory(susceptible: Vec<f64>) -> Trajectory {
        let m = susceptible.len();
        let params = SarParameters::zero_rates(m, susceptible.iter().sum::<f64>().max(1.0));
        let initial = SarState::new(0.0, susceptible, vec![0.0; m], vec![0.0; m]);
        simulate(&params, &initial, 1.0, 5.0).unwrap()
    }

    #[test]
    fn zero_compartments_give_zero_curve() {
        let table = CostTable::builtin();
        let traj = {
            let params = SarParameters::zero_rates(4, 1.0);
            let initial = SarState::new(0.0, vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0], vec![0.0; 4]);
            simulate(&params, &initial, 1.0, 3.0).unwrap()
        };
        let curve = cost_curve(&traj, &table, EpidemicState::Susceptible).unwrap();
        for (_, values) in &curve.series {
            assert!(values.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn single_set_constant_curve() {
        // whole population susceptible in one set at unit cost 110
        let table = CostTable::parse(
            "\
[[network]]
name = \"Public safety\"

[[network.set]]
susceptible = 110.0
attacked = 210.0
removed = 70.0
",
        )
        .unwrap();
        let traj = constant_trajectory(vec![42.0]);
        let curve = cost_curve(&traj, &table, EpidemicState::Susceptible).unwrap();
        let (name, values) = &curve.series[0];
        assert_eq!(name, "Public safety");
        for v in values {
            assert_relative_eq!(*v, 110.0, max_relative = 1e-12);
        }
    }

    #[test]
    fn set_count_mismatch_is_reported() {
        let table = CostTable::builtin();
        let traj = constant_trajectory(vec![1.0, 2.0]);
        assert_eq!(
            cost_curve(&traj, &table, EpidemicState::Susceptible).unwrap_err(),
            CostError::SetCountMismatch {
                table: 4,
                trajectory: 2
            }
        );
    }

    /// A decaying system: susceptible/attacked curves stay below the
    /// max-unit-cost bound at the final sample, and removed curves are
    /// non-decreasing along non-decreasing compartments.
    #[test]
    fn curve_bounds_track_the_compartments() {
        let mut params = SarParameters::zero_rates(4, 60.0);
        params.susceptible_removal = vec![0.05; 4];
        params.attacked_removal = vec![0.08; 4];
        let initial = SarState::new(0.0, vec![10.0; 4], vec![5.0; 4], vec![0.0; 4]);
        let traj = simulate(&params, &initial, 0.1, 80.0).unwrap();
        let table = CostTable::builtin();
        let total = initial.total();

        for state in [EpidemicState::Susceptible, EpidemicState::Attacked] {
            let curve = cost_curve(&traj, &table, state).unwrap();
            let last = traj.states.last().unwrap();
            let final_total: f64 = match state {
                EpidemicState::Susceptible => last.susceptible.iter().sum(),
                EpidemicState::Attacked => last.attacked.iter().sum(),
                EpidemicState::Removed => unreachable!(),
            };
            for (network, values) in &curve.series {
                let max_cost = (0..4)
                    .map(|set| table.unit_cost(network, set, state).unwrap())
                    .fold(0.0f64, f64::max);
                let bound = max_cost * final_total / total;
                let final_value = *values.last().unwrap();
                assert!(
                    final_value <= bound + 1e-12,
                    "{network}: {final_value} > {bound}"
                );
            }
        }

        let removed = cost_curve(&traj, &table, EpidemicState::Removed).unwrap();
        for (network, values) in &removed.series {
            assert!(
                values.windows(2).all(|w| w[1] >= w[0] - 1e-12),
                "{network} removed curve decreases"
            );
        }
    }

    proptest! {
        /// If one network's unit costs dominate another's in every set,
        /// its curve dominates pointwise on any non-negative trajectory.
        #[test]
        fn per_set_dominance_implies_curve_dominance(
            s in proptest::collection::vec(0.0f64..50.0, 3),
            a in proptest::collection::vec(0.0f64..50.0, 3),
            low in proptest::collection::vec(0.0f64..100.0, 3),
            bump in proptest::collection::vec(0.0f64..100.0, 3),
        ) {
            prop_assume!(s.iter().chain(&a).sum::<f64>() > 1.0);
            let params = SarParameters::zero_rates(3, s.iter().chain(&a).sum());
            let initial = SarState::new(0.0, s, a, vec![0.0; 3]);
            let traj = simulate(&params, &initial, 0.5, 4.0).unwrap();

            let make = |unit: &[f64], name: &str| NetworkCosts {
                name: name.into(),
                set: unit
                    .iter()
                    .map(|u| StateCosts {
                        susceptible: *u,
                        attacked: *u,
                        removed: *u,
                    })
                    .collect(),
            };
            let high: Vec<f64> = low.iter().zip(&bump).map(|(l, b)| l + b).collect();
            let table = CostTable {
                network: vec![make(&high, "high"), make(&low, "low")],
            };
            table.validate().unwrap();

            for state in [EpidemicState::Susceptible, EpidemicState::Attacked] {
                let curve = cost_curve(&traj, &table, state).unwrap();
                let hi = &curve.series[0].1;
                let lo = &curve.series[1].1;
                for (h, l) in hi.iter().zip(lo) {
                    prop_assert!(h >= l);
                }
            }
        }
    }
}
