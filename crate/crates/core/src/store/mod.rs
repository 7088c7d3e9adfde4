// SPDX-License-Identifier: MIT OR Apache-2.0

//! Data model and file formats shared by every stage of the pipeline.
//!
//! | artifact          | layout                                                    |
//! |-------------------|-----------------------------------------------------------|
//! | localizer suite   | one JSON record per line: a `suite` header, then stimuli  |
//! | activation tensor | directory with `manifest` (JSON) and `activations.bin`    |
//! | subnetwork mask   | one JSON record per line: a `mask` header, then units     |
//! | accuracy log      | one [`AccuracyRecord`] per line, append-only              |
//!
//! `activations.bin` holds raw little-endian IEEE-754 binary32 values in
//! `[stimulus, layer, unit]` row-major order. Integers in manifests are
//! plain decimal JSON numbers.

mod accuracy;
mod activation;
mod jsonl;
pub(crate) mod mask;
mod meta;
mod suite;

pub use accuracy::{append_accuracy_log, read_accuracy_log, write_accuracy_log, AccuracyRecord, Condition, Domain};
pub use activation::{
    read_activation_tensor, tensor_dir, write_activation_tensor, ActivationSet, ActivationTensor, ConditionKey, UnitId,
    ACTIVATIONS_FILE, DEFAULT_PROVENANCE, MANIFEST_FILE,
};
pub use jsonl::{read_jsonl, write_jsonl};
pub use mask::{read_mask, write_mask, MaskMeta, Method, SelectionKind, SubnetworkMask};
pub use meta::{
    read_datasets, read_models, size_bucket, Atoms, DatasetInfo, ModelInfo, ModelType, SizeBucket, ATOMS_NAMES,
};
pub use suite::{read_suite, write_suite, LocalizerSuite, Role, Stimulus, StimulusSet};
