// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ground-truth generators.
//!
//! [`generate_planted_suite`] produces activation tensors with known
//! functional units; [`generate_effect_log`] produces accuracy logs with
//! known ablation effects. Both write the same types as real extractions
//! and evaluations, and both are deterministic in their seed.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Binomial, Distribution, StandardNormal, StudentT};

use crate::effects::CellAccuracy;
use crate::error::{Error, Result};
use crate::localizer::LOCALIZER_NAMES;
use crate::store::{
    AccuracyRecord, ActivationSet, ActivationTensor, Atoms, Condition, DatasetInfo, Domain, LocalizerSuite, ModelInfo,
    ModelType, SizeBucket, Stimulus, StimulusSet, SubnetworkMask, UnitId,
};

pub const SYNTHETIC_MODEL: &str = "synthetic";
pub const SYNTHETIC_SUITE: &str = "Planted";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian,
    /// Student-t noise rescaled to unit variance; needs `df > 2`.
    StudentT {
        df: f64,
    },
}

/// A unit shifted in only some of the target sets.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialPlant {
    pub unit: UnitId,
    pub target_sets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub n_per_condition: usize,
    pub planted_units: Vec<UnitId>,
    /// Mean shift of planted units in target conditions, in noise-sd units.
    pub effect_size: f64,
    pub noise_sd: f64,
    pub seed: u64,
    pub noise: Noise,
    pub partial: Vec<PartialPlant>,
    /// Share an item-level noise component between the target and control
    /// set (only meaningful with one target and one control set).
    pub paired: bool,
}

impl PlantSpec {
    pub fn new(n_layers: usize, hidden_dim: usize, n_per_condition: usize, effect_size: f64, seed: u64) -> Self {
        PlantSpec {
            n_layers,
            hidden_dim,
            n_per_condition,
            planted_units: Vec::new(),
            effect_size,
            noise_sd: 1.0,
            seed,
            noise: Noise::Gaussian,
            partial: Vec::new(),
            paired: false,
        }
    }

    /// `count` distinct units drawn from the spec's own seed.
    pub fn with_random_units(mut self, count: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let n = self.n_layers * self.hidden_dim;
        let mut chosen = HashSet::new();
        while chosen.len() < count.min(n) {
            chosen.insert(rng.random_range(0..n));
        }
        let mut units: Vec<UnitId> = chosen.into_iter().map(|f| UnitId::from_flat(f, self.hidden_dim)).collect();
        units.sort();
        self.planted_units = units;
        self
    }

    fn validate(&self, n_target_sets: usize, n_control_sets: usize) -> Result<()> {
        if self.n_layers == 0 || self.hidden_dim == 0 {
            return Err(Error::Precondition("planted spec needs L >= 1 and d >= 1".into()));
        }
        if self.n_per_condition < 4 {
            return Err(Error::Precondition(format!("n_per_condition={} must be at least 4", self.n_per_condition)));
        }
        if self.noise_sd.is_nan() || self.noise_sd <= 0.0 {
            return Err(Error::Precondition(format!("noise_sd={} must be positive", self.noise_sd)));
        }
        if n_target_sets == 0 || n_control_sets == 0 {
            return Err(Error::Precondition("need at least one target and one control set".into()));
        }
        if self.paired && (n_target_sets != 1 || n_control_sets != 1) {
            return Err(Error::Precondition("paired generation needs one target and one control set".into()));
        }
        if let Noise::StudentT { df } = self.noise {
            if df.is_nan() || df <= 2.0 {
                return Err(Error::Precondition(format!("heavy-tailed noise needs df > 2, got {df}")));
            }
        }
        let in_bounds = |u: &UnitId| u.layer < self.n_layers && u.index < self.hidden_dim;
        if let Some(u) = self.planted_units.iter().chain(self.partial.iter().map(|p| &p.unit)).find(|u| !in_bounds(u)) {
            return Err(Error::Precondition(format!(
                "planted unit {u} outside L={}, d={}",
                self.n_layers, self.hidden_dim
            )));
        }
        if let Some(p) = self.partial.iter().find(|p| p.target_sets.iter().any(|&j| j >= n_target_sets)) {
            return Err(Error::Precondition(format!(
                "partial plant at {} names a target set beyond {n_target_sets}",
                p.unit
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct PlantedSuite {
    pub suite: LocalizerSuite,
    pub tensors: ActivationSet,
    /// Units shifted in every target set.
    pub truth: Vec<UnitId>,
}

fn stub_set(condition: &str, n: usize) -> StimulusSet {
    StimulusSet {
        condition_name: condition.into(),
        stimuli: (0..n)
            .map(|i| Stimulus {
                id: format!("item-{i:04}"),
                instruction: String::new(),
                story: format!("Synthetic {condition} story {i}."),
                question: "Synthetic question".into(),
                options: vec!["first".into(), "second".into()],
                answer_prefix: String::new(),
                correct_index: None,
            })
            .collect(),
    }
}

fn draw(rng: &mut ChaCha8Rng, noise: Noise) -> f64 {
    match noise {
        Noise::Gaussian => rng.sample::<f64, _>(StandardNormal),
        Noise::StudentT { df } => {
            let t = StudentT::new(df).expect("df validated");
            t.sample(rng) * ((df - 2.0) / df).sqrt()
        }
    }
}

/// Gaussian (or heavy-tailed) noise everywhere, with planted units shifted
/// by `effect_size * noise_sd` in the target conditions.
pub fn generate_planted_suite(spec: &PlantSpec, n_target_sets: usize, n_control_sets: usize) -> Result<PlantedSuite> {
    spec.validate(n_target_sets, n_control_sets)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (l, d, n) = (spec.n_layers, spec.hidden_dim, spec.n_per_condition);
    let units = l * d;
    let shift = spec.effect_size * spec.noise_sd;

    // item effects shared by the two sides of a paired design
    let item_effect: Option<Vec<f64>> =
        spec.paired.then(|| (0..n * units).map(|_| 0.5 * spec.noise_sd * draw(&mut rng, spec.noise)).collect());
    let noise_scale = if spec.paired { spec.noise_sd * 0.75f64.sqrt() } else { spec.noise_sd };

    let targets: Vec<String> = (0..n_target_sets).map(|j| format!("Target{j}")).collect();
    let controls: Vec<String> = (0..n_control_sets).map(|k| format!("Control{k}")).collect();
    let mut tensors = ActivationSet::new();
    for (role_target, names) in [(true, &targets), (false, &controls)] {
        for (j, name) in names.iter().enumerate() {
            let mut mean = vec![0.0f64; units];
            if role_target {
                for u in &spec.planted_units {
                    mean[u.flat(d)] += shift;
                }
                for p in spec.partial.iter().filter(|p| p.target_sets.contains(&j)) {
                    mean[p.unit.flat(d)] += shift;
                }
            }
            let mut values = Vec::with_capacity(n * units);
            for s in 0..n {
                for (u, mu) in mean.iter().enumerate() {
                    let shared = item_effect.as_ref().map_or(0.0, |e| e[s * units + u]);
                    values.push((mu + shared + noise_scale * draw(&mut rng, spec.noise)) as f32);
                }
            }
            tensors.insert(ActivationTensor {
                model_id: SYNTHETIC_MODEL.into(),
                suite_name: SYNTHETIC_SUITE.into(),
                condition_name: name.clone(),
                stimulus_ids: (0..n).map(|i| format!("item-{i:04}")).collect(),
                n_layers: l,
                hidden_dim: d,
                values,
                provenance: "synthetic planted-signal generator".into(),
            })?;
        }
    }
    let suite = LocalizerSuite {
        name: SYNTHETIC_SUITE.into(),
        target_sets: targets.iter().map(|c| stub_set(c, n)).collect(),
        control_sets: controls.iter().map(|c| stub_set(c, n)).collect(),
        paired: spec.paired,
    };
    let mut truth = spec.planted_units.clone();
    truth
        .extend(spec.partial.iter().filter(|p| (0..n_target_sets).all(|j| p.target_sets.contains(&j))).map(|p| p.unit));
    truth.sort();
    truth.dedup();
    Ok(PlantedSuite { suite, tensors, truth })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Recovery {
    pub precision: f64,
    pub recall: f64,
    /// False when the mask is empty and precision is reported as 0.
    pub precision_defined: bool,
}

pub fn recovery_score(mask: &SubnetworkMask, truth: &[UnitId]) -> Recovery {
    let truth: HashSet<&UnitId> = truth.iter().collect();
    let hits = mask.units.iter().filter(|u| truth.contains(u)).count() as f64;
    let precision_defined = !mask.units.is_empty();
    Recovery {
        precision: if precision_defined { hits / mask.units.len() as f64 } else { 0.0 },
        recall: if truth.is_empty() { 0.0 } else { hits / truth.len() as f64 },
        precision_defined,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Item outcomes drawn as independent Bernoulli trials.
    Binomial,
    /// Exactly `round(p * items)` correct items per cell.
    Expected,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectLogSpec {
    pub intact_acc: f64,
    /// Accuracy drop under target ablation, per domain.
    pub tom_effect: f64,
    pub prag_effect: f64,
    pub syntax_effect: f64,
    /// Accuracy drop under least-active ablation on ToM and pragmatics.
    pub control_effect: f64,
    pub n_models: usize,
    /// Datasets per domain.
    pub n_datasets: usize,
    pub seed: u64,
    pub items_per_dataset: usize,
    /// Sd of the per-(model, dataset) accuracy offset shared by all conditions.
    pub heterogeneity_sd: f64,
    /// Accuracy gap attached to model type and size.
    pub model_spread: f64,
    pub localizers: Vec<String>,
    pub sampling: Sampling,
}

impl EffectLogSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        intact_acc: f64,
        tom_effect: f64,
        prag_effect: f64,
        syntax_effect: f64,
        control_effect: f64,
        n_models: usize,
        n_datasets: usize,
        seed: u64,
    ) -> Self {
        EffectLogSpec {
            intact_acc,
            tom_effect,
            prag_effect,
            syntax_effect,
            control_effect,
            n_models,
            n_datasets,
            seed,
            items_per_dataset: 60,
            heterogeneity_sd: 0.03,
            model_spread: 0.04,
            localizers: LOCALIZER_NAMES.iter().map(|s| s.to_string()).collect(),
            sampling: Sampling::Binomial,
        }
    }

    /// Every cell exactly at `intact_acc`: no effects, no spread, no noise.
    pub fn constant(intact_acc: f64, n_models: usize, n_datasets: usize) -> Self {
        EffectLogSpec {
            heterogeneity_sd: 0.0,
            model_spread: 0.0,
            sampling: Sampling::Expected,
            ..EffectLogSpec::new(intact_acc, 0.0, 0.0, 0.0, 0.0, n_models, n_datasets, 0)
        }
    }
}

#[derive(Debug, Clone)]
pub struct EffectLog {
    pub records: Vec<AccuracyRecord>,
    pub models: Vec<ModelInfo>,
    pub datasets: Vec<DatasetInfo>,
    pub warnings: Vec<String>,
}

/// Synthetic models: types alternate, sizes cycle small/medium/large.
pub fn synthetic_models(n: usize) -> Vec<ModelInfo> {
    const PARAMS: [f64; 3] = [7.0, 14.0, 70.0];
    (0..n)
        .map(|i| ModelInfo {
            model_id: format!("model-{i:02}"),
            family: format!("family-{}", (i / 6) % 2),
            params_b: PARAMS[(i / 2) % 3],
            model_type: if i % 2 == 0 { ModelType::Base } else { ModelType::FineTuned },
        })
        .collect()
}

pub fn synthetic_datasets(per_domain: usize) -> Vec<DatasetInfo> {
    Domain::ALL
        .iter()
        .flat_map(|&domain| {
            (0..per_domain).map(move |j| DatasetInfo {
                dataset_id: format!("{domain}-{j:02}"),
                domain,
                ds_type: if j % 2 == 0 { "instruction".into() } else { "options".into() },
                atoms: None,
            })
        })
        .collect()
}

/// Accuracy log with planted ablation effects.
pub fn generate_effect_log(spec: &EffectLogSpec) -> Result<EffectLog> {
    if !(0.0..=1.0).contains(&spec.intact_acc) {
        return Err(Error::Precondition(format!("intact_acc={} outside [0, 1]", spec.intact_acc)));
    }
    let effects = [spec.tom_effect, spec.prag_effect, spec.syntax_effect, spec.control_effect];
    if effects.iter().any(|e| !e.is_finite()) || spec.heterogeneity_sd.is_nan() || spec.heterogeneity_sd < 0.0 {
        return Err(Error::Precondition("effects and heterogeneity must be finite".into()));
    }
    if spec.n_models == 0 || spec.n_datasets == 0 || spec.items_per_dataset == 0 {
        return Err(Error::Precondition("need at least one model, dataset and item".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let models = synthetic_models(spec.n_models);
    let datasets = synthetic_datasets(spec.n_datasets);
    let mut warnings = Vec::new();
    let mut clipped = 0usize;
    let mut records = Vec::new();

    let mut cells: Vec<(Condition, String)> = vec![(Condition::Intact, String::new())];
    for loc in &spec.localizers {
        cells.push((Condition::TargetAblation, loc.clone()));
        cells.push((Condition::ControlAblation, loc.clone()));
    }

    for m in &models {
        let type_shift = if m.model_type == ModelType::FineTuned { 0.5 } else { -0.5 };
        let size_shift = match m.size() {
            SizeBucket::Small => -0.5,
            SizeBucket::Medium => 0.0,
            SizeBucket::Large => 0.5,
        };
        let model_acc = spec.intact_acc + spec.model_spread * (type_shift + size_shift);
        for ds in &datasets {
            let jitter = if spec.heterogeneity_sd > 0.0 {
                spec.heterogeneity_sd * rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            };
            let base = model_acc + jitter;
            for (condition, loc) in &cells {
                let drop = match (condition, ds.domain) {
                    (Condition::Intact, _) => 0.0,
                    (Condition::TargetAblation, Domain::Tom) => spec.tom_effect,
                    (Condition::TargetAblation, Domain::Pragmatics) => spec.prag_effect,
                    (Condition::TargetAblation, Domain::Syntax) => spec.syntax_effect,
                    (Condition::ControlAblation, Domain::Syntax) => 0.0,
                    (Condition::ControlAblation, _) => spec.control_effect,
                };
                let raw = base - drop;
                let p = raw.clamp(0.0, 1.0);
                if p != raw {
                    clipped += 1;
                }
                let n_items = spec.items_per_dataset;
                let n_correct = match spec.sampling {
                    Sampling::Expected => (p * n_items as f64).round() as usize,
                    Sampling::Binomial => Binomial::new(n_items as u64, p)
                        .map_err(|e| Error::Precondition(e.to_string()))?
                        .sample(&mut rng) as usize,
                };
                for i in 0..n_items {
                    records.push(AccuracyRecord {
                        model_id: m.model_id.clone(),
                        dataset_id: ds.dataset_id.clone(),
                        domain: ds.domain,
                        condition: *condition,
                        localizer_name: loc.clone(),
                        item_id: format!("{}-{i:04}", ds.dataset_id),
                        correct: i < n_correct,
                    });
                }
            }
        }
    }
    if clipped > 0 {
        let msg = format!("{clipped} cell probabilities fell outside [0, 1] and were clipped");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    Ok(EffectLog { records, models, datasets, warnings })
}

/// Intact accuracies with a known relation between domains.
///
/// The logit of a cell mean is a model skill for the dataset's domain plus
/// a dataset offset, a small model-structure shift and, for ToM datasets,
/// `domain_effect`. ToM and pragmatics share one skill when `shared_skill`
/// is set; syntax always has its own. Cell accuracies are beta draws.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorSpec {
    pub n_models: usize,
    pub datasets_per_domain: usize,
    pub shared_skill: bool,
    pub seed: u64,
    pub skill_sd: f64,
    pub dataset_sd: f64,
    pub domain_effect: f64,
    pub precision: f64,
    /// Annotate ToM datasets with random ATOMS flags.
    pub atoms: bool,
    /// Logit shift on ToM datasets flagged for percepts.
    pub percepts_effect: f64,
    /// Keep only the first pragmatics dataset.
    pub single_pragmatics_dataset: bool,
}

impl BehaviorSpec {
    pub fn new(n_models: usize, datasets_per_domain: usize, shared_skill: bool, seed: u64) -> Self {
        BehaviorSpec {
            n_models,
            datasets_per_domain,
            shared_skill,
            seed,
            skill_sd: 0.6,
            dataset_sd: 0.15,
            domain_effect: 0.0,
            precision: 60.0,
            atoms: false,
            percepts_effect: 0.0,
            single_pragmatics_dataset: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BehaviorData {
    pub cells: Vec<CellAccuracy>,
    pub models: Vec<ModelInfo>,
    pub datasets: Vec<DatasetInfo>,
}

/// Random ATOMS flags for `n` datasets whose +/-1 codes, with an intercept
/// and the dataset type, have full column rank.
fn atoms_flags(n: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Atoms>> {
    if n < 9 {
        return Err(Error::Precondition(format!("ATOMS flags need at least 9 ToM datasets, got {n}")));
    }
    for _ in 0..1000 {
        let flags: Vec<[bool; 7]> = (0..n).map(|_| std::array::from_fn(|_| rng.random_bool(0.5))).collect();
        let x = nalgebra::DMatrix::from_fn(n, 9, |i, j| match j {
            0 => 1.0,
            1 => {
                if i % 2 == 0 {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => {
                if flags[i][j - 2] {
                    1.0
                } else {
                    -1.0
                }
            }
        });
        let sv = x.singular_values();
        if sv.min() > 1e-6 * sv.max() {
            return Ok(flags.into_iter().map(Atoms::from_flags).collect());
        }
    }
    Err(Error::Precondition("could not draw full-rank ATOMS flags".into()))
}

pub fn generate_behavior(spec: &BehaviorSpec) -> Result<BehaviorData> {
    if spec.n_models == 0 || spec.datasets_per_domain == 0 {
        return Err(Error::Precondition("need at least one model and dataset".into()));
    }
    let bad = |v: f64| v.is_nan() || v < 0.0;
    if bad(spec.skill_sd) || bad(spec.dataset_sd) || spec.precision.is_nan() || spec.precision <= 0.0 {
        return Err(Error::Precondition("precision must be positive and sds non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let models = synthetic_models(spec.n_models);
    let mut datasets = synthetic_datasets(spec.datasets_per_domain);
    if spec.single_pragmatics_dataset {
        let mut seen = false;
        datasets.retain(|d| d.domain != Domain::Pragmatics || !std::mem::replace(&mut seen, true));
    }
    if spec.atoms {
        let n_tom = datasets.iter().filter(|d| d.domain == Domain::Tom).count();
        let flags = atoms_flags(n_tom, &mut rng)?;
        for (d, a) in datasets.iter_mut().filter(|d| d.domain == Domain::Tom).zip(flags) {
            d.atoms = Some(a);
        }
    }
    let mut normal = |sd: f64| sd * rng.sample::<f64, _>(StandardNormal);
    let skills: Vec<[f64; 3]> = models
        .iter()
        .map(|_| {
            let tom = normal(spec.skill_sd);
            let prag = if spec.shared_skill { tom } else { normal(spec.skill_sd) };
            [tom, prag, normal(spec.skill_sd)]
        })
        .collect();
    let offsets: Vec<f64> = datasets.iter().map(|_| normal(spec.dataset_sd)).collect();

    let mut cells = Vec::with_capacity(models.len() * datasets.len());
    for (m, skill) in models.iter().zip(&skills) {
        let structure = 0.1 * (m.model_type == ModelType::FineTuned) as u8 as f64
            + 0.1 * (m.size() == SizeBucket::Large) as u8 as f64;
        for (d, offset) in datasets.iter().zip(&offsets) {
            let k = Domain::ALL.iter().position(|x| *x == d.domain).unwrap_or(0);
            let mut eta = 0.4 + skill[k] + offset + structure;
            if d.domain == Domain::Tom {
                eta += spec.domain_effect;
                if d.atoms.is_some_and(|a| a.percepts) {
                    eta += spec.percepts_effect;
                }
            }
            let mu = 1.0 / (1.0 + (-eta).exp());
            let acc = Beta::new(mu * spec.precision, (1.0 - mu) * spec.precision)
                .map_err(|e| Error::Precondition(e.to_string()))?
                .sample(&mut rng)
                .clamp(1e-6, 1.0 - 1e-6);
            cells.push(CellAccuracy {
                model_id: m.model_id.clone(),
                dataset_id: d.dataset_id.clone(),
                accuracy: acc,
                n_items: 100,
            });
        }
    }
    Ok(BehaviorData { cells, models, datasets })
}
