use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::nlg::TemplateSet;
use super::SimError;
use crate::catalog::Domain;
use crate::ontology::{Intent, Ontology, Speaker};

/// Tolerance for "weights sum to one".
pub const SUM_TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GoalKind {
    Browse,
    GetInfo,
    Refine,
    AddToCart,
    Compare,
    DisambiguationProbe,
}

impl GoalKind {
    pub const ALL: [GoalKind; 6] = [
        Self::Browse,
        Self::GetInfo,
        Self::Refine,
        Self::AddToCart,
        Self::Compare,
        Self::DisambiguationProbe,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Browse => "BROWSE",
            Self::GetInfo => "GET_INFO",
            Self::Refine => "REFINE",
            Self::AddToCart => "ADD_TO_CART",
            Self::Compare => "COMPARE",
            Self::DisambiguationProbe => "DISAMBIGUATION_PROBE",
        }
    }

    /// Number of scene objects a user frame of this goal refers to; 0 for
    /// search goals.
    pub fn target_count(&self) -> usize {
        match self {
            Self::Browse | Self::Refine => 0,
            Self::Compare => 2,
            Self::GetInfo | Self::AddToCart | Self::DisambiguationProbe => 1,
        }
    }

    /// Whether single-target frames of this goal may be made ambiguous.
    pub fn can_be_ambiguous(&self) -> bool {
        self.target_count() == 1
    }
}

impl fmt::Display for GoalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    /// First user turn of a goal.
    Open,
    /// Later user turns of the same goal.
    Followup,
    /// The user's answer to a clarification question.
    Resolve,
}

/// One user dialog-act pattern with its probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserActPattern {
    pub weight: f64,
    pub intent: Intent,
    /// Slots the user asks about.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub request_slots: Vec<String>,
    /// Slots whose values the user states, taken from the goal constraints
    /// (or, for `size`, from the target item).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub constraint_slots: Vec<String>,
}

pub type PhaseTable = BTreeMap<Phase, Vec<UserActPattern>>;
pub type ProbabilityTable = BTreeMap<GoalKind, PhaseTable>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoalGrammar {
    /// `length_weights[i]` is the probability of an agenda with `i + 1` goals.
    pub length_weights: Vec<f64>,
    pub start: BTreeMap<GoalKind, f64>,
    pub transitions: BTreeMap<GoalKind, BTreeMap<GoalKind, f64>>,
    /// `steps[kind][i]` is the probability that the goal needs `i + 1` answered
    /// user turns.
    pub steps: BTreeMap<GoalKind, Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorefSourceDistribution {
    pub scene: f64,
    pub dialog: f64,
}

/// Templates either inline (one line per entry) or as a path to a text file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TemplateSource {
    Inline(Vec<String>),
    File(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorConfig {
    /// Utterance budget per dialog; odd values round down.
    pub max_turns: usize,
    pub max_goals: usize,
    pub agenda_resamples: usize,
    /// Objects listed per search answer.
    pub max_results: usize,
    pub ambiguity_injection_rate: f64,
    pub two_snapshot_fraction: f64,
    pub coref_source_distribution: CorefSourceDistribution,
    pub goal_grammar: GoalGrammar,
    pub probability_tables: BTreeMap<Domain, ProbabilityTable>,
    pub templates: TemplateSource,
}

pub const DEFAULT_CONFIG_JSON: &str = include_str!("../../data/simulator.json");
pub const DEFAULT_TEMPLATES: &str = include_str!("../../data/templates.txt");

fn check_distribution(what: &str, weights: impl IntoIterator<Item = f64>) -> Result<(), String> {
    let mut sum = 0.0;
    for w in weights {
        if !(w >= 0.0 && w.is_finite()) {
            return Err(format!("{what}: negative or non-finite weight {w}"));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(format!("{what}: weights sum to {sum}, expected 1"));
    }
    Ok(())
}

impl Default for SimulatorConfig {
    fn default() -> Self {
        let mut c: SimulatorConfig =
            serde_json::from_str(DEFAULT_CONFIG_JSON).expect("bundled simulator config parses");
        c.templates = TemplateSource::Inline(DEFAULT_TEMPLATES.lines().map(str::to_string).collect());
        c
    }
}

impl SimulatorConfig {
    /// Reads a config file. A template path resolves against the config's
    /// directory and is inlined, so the returned config is self-contained.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let mut c: SimulatorConfig = serde_json::from_str(&text)?;
        if let TemplateSource::File(f) = &c.templates {
            let base = path.parent().unwrap_or(Path::new("."));
            let tpath = base.join(f);
            let t = std::fs::read_to_string(&tpath).map_err(|e| SimError::Io {
                path: tpath.display().to_string(),
                source: e,
            })?;
            c.templates = TemplateSource::Inline(t.lines().map(str::to_string).collect());
        }
        c.validate()?;
        Ok(c)
    }

    pub fn template_set(&self) -> Result<TemplateSet, SimError> {
        match &self.templates {
            TemplateSource::Inline(lines) => TemplateSet::parse(&lines.join("\n")),
            TemplateSource::File(f) => Err(SimError::Config(format!(
                "templates {f:?} not inlined; load the config with SimulatorConfig::load"
            ))),
        }
    }

    /// Agenda-length weights truncated to `[min_goals, max_goals]`.
    pub(crate) fn length_weights(&self, min_goals: usize) -> Vec<f64> {
        self.goal_grammar
            .length_weights
            .iter()
            .enumerate()
            .map(|(i, &w)| {
                if i + 1 >= min_goals && i < self.max_goals {
                    w
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.check().map_err(SimError::Config)
    }

    fn check(&self) -> Result<(), String> {
        if self.max_turns < 2 {
            return Err(format!("max_turns must be at least 2, got {}", self.max_turns));
        }
        if self.max_goals == 0 {
            return Err("max_goals must be at least 1".into());
        }
        if self.max_results == 0 {
            return Err("max_results must be at least 1".into());
        }
        for (name, p) in [
            ("ambiguity_injection_rate", self.ambiguity_injection_rate),
            ("two_snapshot_fraction", self.two_snapshot_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        let c = &self.coref_source_distribution;
        check_distribution("coref_source_distribution", [c.scene, c.dialog])?;

        let g = &self.goal_grammar;
        check_distribution("goal_grammar.length_weights", g.length_weights.iter().copied())?;
        if self.length_weights(1).iter().all(|&w| w == 0.0) {
            return Err("goal_grammar.length_weights has no mass within max_goals".into());
        }
        check_distribution("goal_grammar.start", g.start.values().copied())?;
        let mut used: Vec<GoalKind> = g.start.keys().copied().collect();
        for (from, row) in &g.transitions {
            check_distribution(&format!("goal_grammar.transitions.{from}"), row.values().copied())?;
            used.push(*from);
            used.extend(row.keys().copied());
        }
        used.sort();
        used.dedup();
        for kind in &used {
            let steps = g
                .steps
                .get(kind)
                .ok_or_else(|| format!("goal_grammar.steps has no entry for {kind}"))?;
            check_distribution(&format!("goal_grammar.steps.{kind}"), steps.iter().copied())?;
        }
        if g.length_weights.len() > 1 {
            for kind in &used {
                if !g.transitions.contains_key(kind) {
                    return Err(format!("goal_grammar.transitions has no row for {kind}"));
                }
            }
        }

        let ontology = Ontology::builtin();
        let templates = self.template_set().map_err(|e| e.to_string())?;
        for (domain, table) in &self.probability_tables {
            for kind in &used {
                let phases = table
                    .get(kind)
                    .ok_or_else(|| format!("probability_tables.{domain} has no entry for {kind}"))?;
                if !phases.contains_key(&Phase::Open) {
                    return Err(format!("probability_tables.{domain}.{kind} lacks the open phase"));
                }
                if kind.can_be_ambiguous() && !phases.contains_key(&Phase::Resolve) {
                    return Err(format!("probability_tables.{domain}.{kind} lacks the resolve phase"));
                }
            }
            for (kind, phases) in table {
                for (phase, entries) in phases {
                    let at = format!("probability_tables.{domain}.{kind}.{phase:?}");
                    if entries.is_empty() {
                        return Err(format!("{at} is empty"));
                    }
                    check_distribution(&at, entries.iter().map(|e| e.weight))?;
                    for e in entries {
                        if !ontology.allows(Speaker::User, e.intent) {
                            return Err(format!("{at}: {} is not a user intent", e.intent));
                        }
                        for s in e.request_slots.iter().chain(&e.constraint_slots) {
                            if !ontology.has_slot(*domain, s) {
                                return Err(format!("{at}: unknown slot {s}"));
                            }
                        }
                        if !templates.has(Speaker::User, e.intent) {
                            return Err(format!("{at}: no template for user {}", e.intent));
                        }
                    }
                }
            }
        }
        for intent in ontology.intents(Speaker::Assistant) {
            if !templates.has(Speaker::Assistant, intent) {
                return Err(format!("no template for assistant {intent}"));
            }
        }
        Ok(())
    }
}
