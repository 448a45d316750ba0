use std::collections::HashSet;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::coreset::kcenters_indices;
use crate::models::GeneratorModel;
use crate::seeds::{derive_seed, rng_from};
use crate::text::{write_jsonl, LabeledDataset, Sample, Vocab};

use super::SynthesisError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub oversample: usize,
    pub top_p: f64,
    pub max_len: usize,
    /// K-centers selection over the oversampled pool; off keeps the first
    /// `dpc` draws.
    pub select: bool,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            oversample: 100,
            top_p: 0.95,
            max_len: 32,
            select: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub dpc: usize,
    pub top_p: f64,
    pub oversample: usize,
    pub selection: String,
    pub seed: u64,
    pub feature_seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct DistilledDataset {
    pub classes: Vec<Vec<Sample>>,
    pub dpc: usize,
    pub provenance: Provenance,
}

impl DistilledDataset {
    pub fn to_dataset(&self, vocab: Arc<Vocab>) -> Result<LabeledDataset, SynthesisError> {
        Ok(LabeledDataset::from_buckets(vocab, self.classes.clone())?)
    }

    pub fn write_jsonl<W: Write>(&self, vocab: Arc<Vocab>, w: W) -> Result<(), SynthesisError> {
        let prov = serde_json::to_value(&self.provenance).expect("provenance serializes");
        write_jsonl(&self.to_dataset(vocab)?, w, true, Some(&prov))?;
        Ok(())
    }
}

/// Draws `dpc * oversample` samples per class, drops exact repeats, and
/// keeps the K-centers representatives under `feature_fn`. With selection
/// off, keeps the first `dpc` draws instead.
pub fn generate_distilled(
    gen: &GeneratorModel,
    feature_fn: &dyn Fn(&Sample) -> Vec<f64>,
    dpc: usize,
    cfg: &GenerateConfig,
    seed: u64,
    generator_id: &str,
) -> Result<DistilledDataset, SynthesisError> {
    if dpc == 0 || cfg.oversample == 0 {
        return Err(SynthesisError::ZeroCount);
    }
    let classes = gen.vocab().num_classes();
    let drawn = if cfg.select {
        dpc * cfg.oversample
    } else {
        dpc
    };
    let mut out = Vec::with_capacity(classes);
    for c in 0..classes {
        let class_seed = derive_seed(seed, &format!("generate/class/{c}"));
        let mut rng = rng_from(class_seed);
        let mut samples = Vec::with_capacity(drawn);
        for _ in 0..drawn {
            samples.push(gen.sample(c, cfg.top_p, cfg.max_len, &mut rng)?.sample);
        }
        if !cfg.select {
            out.push(samples);
            continue;
        }
        let mut seen = HashSet::new();
        samples.retain(|s| seen.insert(s.clone()));
        if samples.len() < dpc {
            return Err(SynthesisError::TooFewDistinct {
                class: c,
                distinct: samples.len(),
                drawn,
                dpc,
            });
        }
        if samples.len() == dpc {
            out.push(samples);
            continue;
        }
        let feats: Vec<Vec<f64>> = samples.iter().map(feature_fn).collect();
        let mut idx = kcenters_indices(&feats, dpc, derive_seed(class_seed, "select"))?;
        idx.sort_unstable();
        out.push(idx.into_iter().map(|i| samples[i].clone()).collect());
    }
    Ok(DistilledDataset {
        classes: out,
        dpc,
        provenance: Provenance {
            generator: generator_id.to_string(),
            dpc,
            top_p: cfg.top_p,
            oversample: if cfg.select { cfg.oversample } else { 1 },
            selection: if cfg.select { "kcenters" } else { "none" }.to_string(),
            seed,
            feature_seed: None,
        },
    })
}

/// Markdown listing of every sample, grouped by class.
pub fn write_sample_sheet<W: Write>(
    data: &DistilledDataset,
    vocab: &Vocab,
    mut w: W,
) -> std::io::Result<()> {
    writeln!(w, "# Distilled samples\n")?;
    let p = &data.provenance;
    writeln!(
        w,
        "generator `{}`, dpc {}, top-p {}, oversample {}, selection {}, seed {}\n",
        p.generator, p.dpc, p.top_p, p.oversample, p.selection, p.seed
    )?;
    for (c, samples) in data.classes.iter().enumerate() {
        writeln!(w, "## Class {c}\n")?;
        writeln!(w, "| # | text |")?;
        writeln!(w, "|---|------|")?;
        for (i, s) in samples.iter().enumerate() {
            let mut text = vocab.detokenize(s.first());
            if let Some(second) = s.second() {
                text = format!("{text} `<sep>` {}", vocab.detokenize(second));
            }
            writeln!(w, "| {} | {} |", i + 1, text.replace('|', "\\|"))?;
        }
        writeln!(w)?;
    }
    Ok(())
}
