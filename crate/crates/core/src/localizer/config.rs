// SPDX-License-Identifier: MIT OR Apache-2.0

use crate::error::{Error, Result};
use crate::store::{ConditionKey, LocalizerSuite, Method};

pub const LATENT_BELIEFS: &str = "LatentBeliefs";
pub const COMMUNICATIVE_INTENT: &str = "CommunicativeIntent";
pub const GAME_BELIEFS: &str = "GameBeliefs";
pub const MORAL_INTENT: &str = "MoralIntent";

/// Suites the standard localizers are built from.
pub const STANDARD_SUITES: [&str; 4] = [LATENT_BELIEFS, COMMUNICATIVE_INTENT, GAME_BELIEFS, MORAL_INTENT];

/// Names of the eight standard localizers, in enumeration order.
pub const LOCALIZER_NAMES: [&str; 8] = [
    "LatentBeliefs-simple",
    "CommunicativeIntent-simple",
    "GameBeliefs-simple",
    "MoralIntent-simple",
    "All-simple",
    "LatentBeliefs-conjunctive",
    "CommunicativeIntent-conjunctive",
    "LB+CI-conjunctive",
];

/// Target and control conditions contributed by one suite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteRoles {
    pub suite: String,
    pub targets: Vec<String>,
    pub controls: Vec<String>,
    pub paired: bool,
}

impl SuiteRoles {
    pub fn of(suite: &LocalizerSuite) -> Self {
        SuiteRoles {
            suite: suite.name.clone(),
            targets: suite.target_conditions(),
            controls: suite.control_conditions(),
            paired: suite.paired,
        }
    }

    pub fn target_keys(&self) -> impl Iterator<Item = ConditionKey> + '_ {
        self.targets.iter().map(|c| ConditionKey::new(&self.suite, c))
    }

    pub fn control_keys(&self) -> impl Iterator<Item = ConditionKey> + '_ {
        self.controls.iter().map(|c| ConditionKey::new(&self.suite, c))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalizerConfig {
    pub name: String,
    pub members: Vec<SuiteRoles>,
    pub method: Method,
    /// Use paired tests; requires every member suite to be paired.
    pub paired: bool,
}

impl LocalizerConfig {
    /// Localizer over a single suite, paired whenever the suite is.
    pub fn for_suite(name: impl Into<String>, suite: &LocalizerSuite, method: Method) -> Self {
        LocalizerConfig { name: name.into(), members: vec![SuiteRoles::of(suite)], method, paired: suite.paired }
    }

    pub fn target_keys(&self) -> Vec<ConditionKey> {
        self.members.iter().flat_map(|m| m.target_keys()).collect()
    }

    pub fn control_keys(&self) -> Vec<ConditionKey> {
        self.members.iter().flat_map(|m| m.control_keys()).collect()
    }

    /// Every condition the localizer reads, targets first.
    pub fn condition_keys(&self) -> Vec<ConditionKey> {
        let mut keys = self.target_keys();
        keys.extend(self.control_keys());
        keys
    }

    pub fn validate(&self) -> Result<()> {
        if self.members.is_empty() {
            return Err(Error::Invalid(format!("localizer {} has no member suites", self.name)));
        }
        for m in &self.members {
            if m.targets.is_empty() || m.controls.is_empty() {
                return Err(Error::Invalid(format!(
                    "localizer {}: suite {} lacks target or control conditions",
                    self.name, m.suite
                )));
            }
        }
        if self.paired {
            if let Some(m) = self.members.iter().find(|m| !m.paired) {
                return Err(Error::Invalid(format!("localizer {} is paired but suite {} is not", self.name, m.suite)));
            }
            if self.method == Method::Simple && (self.members.len() != 1) {
                return Err(Error::Invalid(format!(
                    "paired simple localizer {} must use exactly one suite",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// Builds the eight standard localizers from the four standard suites.
pub fn enumerate_localizers(suites: &[LocalizerSuite]) -> Result<Vec<LocalizerConfig>> {
    let find = |name: &str| suites.iter().find(|s| s.name == name);
    let missing: Vec<&str> = STANDARD_SUITES.iter().copied().filter(|n| find(n).is_none()).collect();
    if !missing.is_empty() {
        return Err(Error::Missing(format!("localizer suites: {}", missing.join(", "))));
    }
    let lb = find(LATENT_BELIEFS).unwrap();
    let ci = find(COMMUNICATIVE_INTENT).unwrap();
    let gb = find(GAME_BELIEFS).unwrap();
    let mi = find(MORAL_INTENT).unwrap();

    let all = LocalizerConfig {
        name: LOCALIZER_NAMES[4].into(),
        members: [lb, ci, gb, mi].iter().map(|s| SuiteRoles::of(s)).collect(),
        method: Method::Simple,
        paired: false,
    };
    let lb_ci = LocalizerConfig {
        name: LOCALIZER_NAMES[7].into(),
        members: vec![SuiteRoles::of(lb), SuiteRoles::of(ci)],
        method: Method::Conjunctive,
        paired: false,
    };
    let unpaired = |mut c: LocalizerConfig| {
        c.paired = false;
        c
    };
    let configs = vec![
        unpaired(LocalizerConfig::for_suite(LOCALIZER_NAMES[0], lb, Method::Simple)),
        unpaired(LocalizerConfig::for_suite(LOCALIZER_NAMES[1], ci, Method::Simple)),
        LocalizerConfig::for_suite(LOCALIZER_NAMES[2], gb, Method::Simple),
        LocalizerConfig::for_suite(LOCALIZER_NAMES[3], mi, Method::Simple),
        all,
        unpaired(LocalizerConfig::for_suite(LOCALIZER_NAMES[5], lb, Method::Conjunctive)),
        unpaired(LocalizerConfig::for_suite(LOCALIZER_NAMES[6], ci, Method::Conjunctive)),
        lb_ci,
    ];
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}
