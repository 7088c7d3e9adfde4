// SPDX-License-Identifier: MIT OR Apache-2.0

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::jsonl::parse_line;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Control,
}

/// One prompt item. Localizer stimuli leave `correct_index` empty;
/// evaluation items carry it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    pub id: String,
    pub instruction: String,
    pub story: String,
    pub question: String,
    pub options: Vec<String>,
    #[serde(default)]
    pub answer_prefix: String,
    #[serde(default)]
    pub correct_index: Option<usize>,
}

impl Stimulus {
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::Invalid("stimulus with empty id".into()));
        }
        if self.options.len() < 2 {
            return Err(Error::Invalid(format!(
                "stimulus {} has {} options, need at least 2",
                self.id,
                self.options.len()
            )));
        }
        if let Some(c) = self.correct_index {
            if c >= self.options.len() {
                return Err(Error::Invalid(format!(
                    "stimulus {}: correct_index {c} out of range for {} options",
                    self.id,
                    self.options.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StimulusSet {
    pub condition_name: String,
    pub stimuli: Vec<Stimulus>,
}

impl StimulusSet {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.stimuli.iter().map(|s| s.id.as_str())
    }
}

/// Target and control stimulus sets of one localizer.
///
/// In a paired suite the single target and control sets are index-aligned
/// and item `i` carries the same id in both sets.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalizerSuite {
    pub name: String,
    pub target_sets: Vec<StimulusSet>,
    pub control_sets: Vec<StimulusSet>,
    pub paired: bool,
}

impl LocalizerSuite {
    pub fn is_simple(&self) -> bool {
        self.target_sets.len() == 1 && self.control_sets.len() == 1
    }

    pub fn sets(&self) -> impl Iterator<Item = (Role, &StimulusSet)> {
        self.target_sets.iter().map(|s| (Role::Target, s)).chain(self.control_sets.iter().map(|s| (Role::Control, s)))
    }

    pub fn target_conditions(&self) -> Vec<String> {
        self.target_sets.iter().map(|s| s.condition_name.clone()).collect()
    }

    pub fn control_conditions(&self) -> Vec<String> {
        self.control_sets.iter().map(|s| s.condition_name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Invalid("suite with empty name".into()));
        }
        if self.target_sets.is_empty() || self.control_sets.is_empty() {
            return Err(Error::Invalid(format!("suite {} needs at least one target and one control set", self.name)));
        }
        let mut conditions = HashSet::new();
        for (_, set) in self.sets() {
            if !conditions.insert(set.condition_name.as_str()) {
                return Err(Error::Invalid(format!("suite {}: duplicate condition {}", self.name, set.condition_name)));
            }
            if set.stimuli.is_empty() {
                return Err(Error::Invalid(format!("suite {}: condition {} is empty", self.name, set.condition_name)));
            }
            let mut ids = HashSet::new();
            for s in &set.stimuli {
                s.validate()?;
                if !ids.insert(s.id.as_str()) {
                    return Err(Error::Invalid(format!(
                        "suite {}: duplicate stimulus id {} in {}",
                        self.name, s.id, set.condition_name
                    )));
                }
            }
        }
        if self.paired {
            if !self.is_simple() {
                return Err(Error::Invalid(format!(
                    "paired suite {} must have exactly one target and one control set",
                    self.name
                )));
            }
            let (t, c) = (&self.target_sets[0], &self.control_sets[0]);
            if t.stimuli.len() != c.stimuli.len() {
                return Err(Error::Invalid(format!(
                    "paired suite {}: {} has {} items but {} has {}",
                    self.name,
                    t.condition_name,
                    t.stimuli.len(),
                    c.condition_name,
                    c.stimuli.len()
                )));
            }
            if let Some((i, (a, b))) = t.ids().zip(c.ids()).enumerate().find(|(_, (a, b))| a != b) {
                return Err(Error::Invalid(format!(
                    "paired suite {}: item {i} is {a} in the target set but {b} in the control set",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SuiteHeader {
    record: String,
    name: String,
    paired: bool,
}

#[derive(Serialize, Deserialize)]
struct StimulusLine {
    record: String,
    role: Role,
    condition: String,
    id: String,
    instruction: String,
    story: String,
    question: String,
    options: Vec<String>,
    #[serde(default)]
    answer_prefix: String,
    #[serde(default)]
    correct_index: Option<usize>,
}

/// Writes a suite as line-delimited JSON: a header record, then one record
/// per stimulus with targets first, in set order.
pub fn write_suite(suite: &LocalizerSuite, path: &Path) -> Result<()> {
    suite.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    let header = SuiteHeader { record: "suite".into(), name: suite.name.clone(), paired: suite.paired };
    serde_json::to_writer(&mut w, &header).map_err(|e| Error::Invalid(e.to_string()))?;
    w.write_all(b"\n").map_err(io)?;
    for (role, set) in suite.sets() {
        for s in &set.stimuli {
            let line = StimulusLine {
                record: "stimulus".into(),
                role,
                condition: set.condition_name.clone(),
                id: s.id.clone(),
                instruction: s.instruction.clone(),
                story: s.story.clone(),
                question: s.question.clone(),
                options: s.options.clone(),
                answer_prefix: s.answer_prefix.clone(),
                correct_index: s.correct_index,
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| Error::Invalid(e.to_string()))?;
            w.write_all(b"\n").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

pub fn read_suite(path: &Path) -> Result<LocalizerSuite> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header: Option<SuiteHeader> = None;
    let mut targets: Vec<StimulusSet> = Vec::new();
    let mut controls: Vec<StimulusSet> = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            let h: SuiteHeader = parse_line(path, i + 1, &line)?;
            if h.record != "suite" {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: i + 1,
                    message: format!("expected suite header, found record {:?}", h.record),
                });
            }
            header = Some(h);
            continue;
        }
        let s: StimulusLine = parse_line(path, i + 1, &line)?;
        if s.record != "stimulus" {
            return Err(Error::Parse {
                path: path.to_owned(),
                line: i + 1,
                message: format!("expected stimulus record, found {:?}", s.record),
            });
        }
        let sets = match s.role {
            Role::Target => &mut targets,
            Role::Control => &mut controls,
        };
        let stimulus = Stimulus {
            id: s.id,
            instruction: s.instruction,
            story: s.story,
            question: s.question,
            options: s.options,
            answer_prefix: s.answer_prefix,
            correct_index: s.correct_index,
        };
        match sets.iter_mut().find(|set| set.condition_name == s.condition) {
            Some(set) => set.stimuli.push(stimulus),
            None => sets.push(StimulusSet { condition_name: s.condition, stimuli: vec![stimulus] }),
        }
    }
    let header = header.ok_or_else(|| Error::Invalid(format!("{}: empty suite file", path.display())))?;
    let suite =
        LocalizerSuite { name: header.name, target_sets: targets, control_sets: controls, paired: header.paired };
    suite.validate()?;
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stim(id: &str) -> Stimulus {
        Stimulus {
            id: id.into(),
            instruction: "Read the story.".into(),
            story: format!("Story {id}."),
            question: "Where will she look?".into(),
            options: vec!["bowl".into(), "drawer".into()],
            answer_prefix: "She will look in the".into(),
            correct_index: None,
        }
    }

    fn set(name: &str, n: usize) -> StimulusSet {
        StimulusSet { condition_name: name.into(), stimuli: (0..n).map(|i| stim(&format!("item-{i:03}"))).collect() }
    }

    #[test]
    fn paired_length_mismatch_rejected() {
        let suite = LocalizerSuite {
            name: "GameBeliefs".into(),
            target_sets: vec![set("GameBelief", 100)],
            control_sets: vec![set("GameOutcome", 99)],
            paired: true,
        };
        let err = suite.validate().unwrap_err().to_string();
        assert!(err.contains("100") && err.contains("99"), "{err}");
    }

    #[test]
    fn latent_beliefs_shape_is_not_simple() {
        let suite = LocalizerSuite {
            name: "LatentBeliefs".into(),
            target_sets: vec![set("FalseBelief", 3), set("Desire", 3)],
            control_sets: vec![set("FalsePhoto", 3), set("HumanDescr", 3), set("MechInf", 3), set("NonhumDescr", 3)],
            paired: false,
        };
        suite.validate().unwrap();
        assert!(!suite.is_simple());
    }

    #[test]
    fn one_by_one_is_simple() {
        let suite = LocalizerSuite {
            name: "MoralIntent".into(),
            target_sets: vec![set("MoralIntent", 4)],
            control_sets: vec![set("DecOutcome", 4)],
            paired: true,
        };
        suite.validate().unwrap();
        assert!(suite.is_simple());
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lb.jsonl");
        let mut suite = LocalizerSuite {
            name: "LatentBeliefs".into(),
            target_sets: vec![set("FalseBelief", 3), set("Desire", 2)],
            control_sets: vec![set("FalsePhoto", 2)],
            paired: false,
        };
        suite.target_sets[0].stimuli[1].correct_index = Some(1);
        suite.target_sets[0].stimuli[2].answer_prefix.clear();
        write_suite(&suite, &path).unwrap();
        assert_eq!(read_suite(&path).unwrap(), suite);
    }

    #[test]
    fn bad_options_and_duplicates() {
        let mut s = stim("x");
        s.options.truncate(1);
        assert!(s.validate().is_err());
        let mut s = stim("x");
        s.correct_index = Some(2);
        assert!(s.validate().is_err());

        let mut dup = set("A", 2);
        dup.stimuli[1].id = dup.stimuli[0].id.clone();
        let suite =
            LocalizerSuite { name: "S".into(), target_sets: vec![dup], control_sets: vec![set("B", 2)], paired: false };
        assert!(suite.validate().is_err());
    }
}
