//! Self-documenting run manifests.
//!
//! A manifest captures everything needed to audit and reproduce a run:
//! the full scenario setup and its hash, per-component and per-protocol
//! version strings, the random seed, a hash per intermediate artifact
//! exchanged between agents, the final results hash, and the KPI progress
//! series. [`verify_manifest`] recomputes every hash against the artifact
//! bytes and names the first label that no longer matches.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::canonical::{sha256, Digest};
use crate::identity::Tick;

/// One point of a KPI series.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiSample {
    pub tick: Tick,
    pub metric: String,
    pub value: f64,
}

/// Run description supplied by the caller when emitting a manifest.
#[derive(Debug, Clone, Default)]
pub struct ManifestSetup {
    /// Full scenario configuration text, embedded verbatim.
    pub config_text: String,
    /// Model/component identifier per agent or subsystem.
    pub component_versions: BTreeMap<String, String>,
    /// Wire and protocol identifiers with their versions.
    pub protocol_versions: BTreeMap<String, String>,
    pub rng_seed: u64,
    pub kpi_progress: Vec<KpiSample>,
}

/// The artifact bytes a manifest commits to.
#[derive(Debug, Clone, Default)]
pub struct ArtifactSet {
    /// Labeled intermediate artifacts in emission order.
    pub intermediates: Vec<(String, Vec<u8>)>,
    pub final_results: Vec<u8>,
}

/// The self-documenting record of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_text: String,
    pub config_hash: Digest,
    pub component_versions: BTreeMap<String, String>,
    pub protocol_versions: BTreeMap<String, String>,
    pub rng_seed: u64,
    pub intermediate_artifact_hashes: Vec<(String, Digest)>,
    pub final_results_hash: Digest,
    pub kpi_progress: Vec<KpiSample>,
}

/// Build a manifest over the given setup and artifacts.
pub fn emit_manifest(setup: &ManifestSetup, artifacts: &ArtifactSet) -> RunManifest {
    RunManifest {
        config_hash: sha256(setup.config_text.as_bytes()),
        config_text: setup.config_text.clone(),
        component_versions: setup.component_versions.clone(),
        protocol_versions: setup.protocol_versions.clone(),
        rng_seed: setup.rng_seed,
        intermediate_artifact_hashes: artifacts
            .intermediates
            .iter()
            .map(|(label, bytes)| (label.clone(), sha256(bytes)))
            .collect(),
        final_results_hash: sha256(&artifacts.final_results),
        kpi_progress: setup.kpi_progress.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("manifest mismatch at {label:?}")]
pub struct ManifestMismatch {
    /// The first artifact label whose hash no longer matches.
    pub label: String,
}

/// Recompute every hash in the manifest against `artifacts`.
///
/// The embedded config text is checked against `config_hash`, each
/// intermediate artifact (matched by label and order) against its recorded
/// hash, and the final results against `final_results_hash`.
pub fn verify_manifest(
    manifest: &RunManifest,
    artifacts: &ArtifactSet,
) -> Result<(), ManifestMismatch> {
    let mismatch = |label: &str| ManifestMismatch {
        label: label.to_string(),
    };
    if sha256(manifest.config_text.as_bytes()) != manifest.config_hash {
        return Err(mismatch("config"));
    }
    if manifest.intermediate_artifact_hashes.len() != artifacts.intermediates.len() {
        let missing = manifest
            .intermediate_artifact_hashes
            .iter()
            .map(|(label, _)| label)
            .find(|label| !artifacts.intermediates.iter().any(|(l, _)| l == *label));
        return Err(mismatch(missing.map_or("intermediates", |l| l.as_str())));
    }
    for ((label, recorded), (artifact_label, bytes)) in manifest
        .intermediate_artifact_hashes
        .iter()
        .zip(&artifacts.intermediates)
    {
        if label != artifact_label || sha256(bytes) != *recorded {
            return Err(mismatch(label));
        }
    }
    if sha256(&artifacts.final_results) != manifest.final_results_hash {
        return Err(mismatch("final_results"));
    }
    Ok(())
}

#[derive(Serialize)]
struct ManifestDoc<'a> {
    algorithm_setup: SetupDoc<'a>,
    component_versions: &'a BTreeMap<String, String>,
    protocol_versions: &'a BTreeMap<String, String>,
    rng_seed: u64,
    intermediate_artifacts: Vec<ArtifactDoc<'a>>,
    final_results_sha256: String,
    kpi_progress: Vec<KpiDoc<'a>>,
}

#[derive(Serialize)]
struct SetupDoc<'a> {
    config_sha256: String,
    config_text: &'a str,
}

#[derive(Serialize)]
struct ArtifactDoc<'a> {
    label: &'a str,
    sha256: String,
}

#[derive(Serialize)]
struct KpiDoc<'a> {
    tick: Tick,
    metric: &'a str,
    value: f64,
}

impl RunManifest {
    /// Stable JSON rendering with one top-level field per manifest item.
    /// Deterministic for identical manifests; covered by golden-file tests.
    pub fn to_json(&self) -> String {
        let doc = ManifestDoc {
            algorithm_setup: SetupDoc {
                config_sha256: hex::encode(self.config_hash),
                config_text: &self.config_text,
            },
            component_versions: &self.component_versions,
            protocol_versions: &self.protocol_versions,
            rng_seed: self.rng_seed,
            intermediate_artifacts: self
                .intermediate_artifact_hashes
                .iter()
                .map(|(label, hash)| ArtifactDoc {
                    label,
                    sha256: hex::encode(hash),
                })
                .collect(),
            final_results_sha256: hex::encode(self.final_results_hash),
            kpi_progress: self
                .kpi_progress
                .iter()
                .map(|k| KpiDoc {
                    tick: k.tick,
                    metric: &k.metric,
                    value: k.value,
                })
                .collect(),
        };
        let mut json = serde_json::to_string_pretty(&doc).expect("manifest serializes");
        json.push('\n');
        json
    }
}

/// The seven top-level manifest items, in document order.
pub const MANIFEST_ITEMS: [&str; 7] = [
    "algorithm_setup",
    "component_versions",
    "protocol_versions",
    "rng_seed",
    "intermediate_artifacts",
    "final_results_sha256",
    "kpi_progress",
];
