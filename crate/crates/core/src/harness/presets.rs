//! Built-in scenarios mirroring the five studies: RF-chain count, receive
//! antennas, randomization/iteration budget, channel correlation and beam
//! patterns.
//!
//! Full-scale presets use 60 users in 4 groups, 12 transmit antennas and
//! 100 realizations; they take hours. Desk presets shrink the scenario to
//! 8 transmit antennas and 12 users in 3 groups with 20 realizations,
//! keeping the overloaded regime (more users than transmit antennas) at a
//! similar ratio.

use crate::harness::config::{
    AngleConfig, DeltaMode, ModeSelection, NRandRule, NRandSpec, ScenarioConfig, SweepAxis,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Fig1,
    Fig2,
    Fig3,
    Fig4,
    Fig5,
}

impl PresetName {
    pub const ALL: [PresetName; 5] = [Self::Fig1, Self::Fig2, Self::Fig3, Self::Fig4, Self::Fig5];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Fig1 => "fig1",
            Self::Fig2 => "fig2",
            Self::Fig3 => "fig3",
            Self::Fig4 => "fig4",
            Self::Fig5 => "fig5",
        }
    }
}

impl std::str::FromStr for PresetName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown preset `{s}` (expected fig1..fig5)"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Desk,
    Full,
}

fn desk_base(name: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("{name}-desk"),
        n_tx: 8,
        n_rx: 2,
        n_rf: 5,
        num_users: 12,
        num_groups: 3,
        gamma_db: vec![4.0; 3],
        sigma2_dbm: 10.0,
        prx_dbm: 10.0,
        alphabet_size: 8,
        delta_mode: DeltaMode::RfChainBudget,
        num_paths: 8,
        element_spacing: 0.5,
        angles: AngleConfig::default(),
        n_iter: 2,
        n_rand: NRandSpec::Fixed(100),
        beta: None,
        n_realizations: 20,
        master_seed: 1,
        mode: ModeSelection::Both,
        solver_tol: 1e-7,
        solver_max_iter: 100,
        sweep: Vec::new(),
    }
}

fn full_base(name: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: format!("{name}-full"),
        n_tx: 12,
        n_rx: 2,
        n_rf: 8,
        num_users: 60,
        num_groups: 4,
        gamma_db: vec![5.0; 4],
        n_iter: 3,
        n_rand: NRandSpec::Fixed(500),
        n_realizations: 100,
        ..desk_base(name)
    }
}

fn beam_scenario(name: &str) -> ScenarioConfig {
    ScenarioConfig {
        name: name.to_string(),
        n_tx: 8,
        n_rf: 4,
        n_rx: 2,
        num_users: 4,
        num_groups: 4,
        gamma_db: vec![5.0; 4],
        angles: AngleConfig {
            aod_means: Some(vec![-60.0, -20.0, 20.0, 60.0]),
            aod_spread: 5.0,
            ..AngleConfig::default()
        },
        n_realizations: 1,
        mode: ModeSelection::Hybrid,
        ..desk_base(name)
    }
}

pub fn preset(name: PresetName, scale: Scale) -> ScenarioConfig {
    let tag = name.as_str();
    match (name, scale) {
        (PresetName::Fig1, Scale::Desk) => ScenarioConfig {
            sweep: vec![SweepAxis::NRf {
                values: vec![3, 5, 8],
            }],
            ..desk_base(tag)
        },
        (PresetName::Fig1, Scale::Full) => ScenarioConfig {
            n_rand: NRandSpec::Fixed(500),
            sweep: vec![
                SweepAxis::NRf {
                    values: (5..=11).collect(),
                },
                SweepAxis::Gamma {
                    values_db: vec![4.0, 6.0, 8.0],
                },
            ],
            ..full_base(tag)
        },
        (PresetName::Fig2, Scale::Desk) => ScenarioConfig {
            sweep: vec![SweepAxis::NRx { values: vec![1, 2] }],
            ..desk_base(tag)
        },
        (PresetName::Fig2, Scale::Full) => ScenarioConfig {
            n_iter: 4,
            n_rand: NRandSpec::Rule(NRandRule::DimensionScaled),
            sweep: vec![SweepAxis::NRx {
                values: (1..=5).collect(),
            }],
            ..full_base(tag)
        },
        (PresetName::Fig3, Scale::Desk) => ScenarioConfig {
            sweep: vec![SweepAxis::NRandIter {
                n_rand: vec![1, 25, 100],
                n_iter: vec![2],
            }],
            ..desk_base(tag)
        },
        (PresetName::Fig3, Scale::Full) => ScenarioConfig {
            sweep: vec![SweepAxis::NRandIter {
                n_rand: vec![1, 10, 25, 50, 75, 100, 500, 1000],
                n_iter: (1..=5).collect(),
            }],
            ..full_base(tag)
        },
        (PresetName::Fig4, Scale::Desk) => desk_base(tag),
        (PresetName::Fig4, Scale::Full) => full_base(tag),
        (PresetName::Fig5, Scale::Desk) => beam_scenario("fig5-desk"),
        (PresetName::Fig5, Scale::Full) => ScenarioConfig {
            n_iter: 3,
            n_rand: NRandSpec::Fixed(500),
            ..beam_scenario("fig5-full")
        },
    }
}
