//! Executable demonstrations of the two score-leakage attacks.
//!
//! Both attacks exploit the same channel: whoever can open similarity scores
//! learns plaintext facts about encrypted vectors. The attacker code in this
//! module therefore receives only encrypted vector handles and opened scores;
//! ground truth (which vectors carry the planted pattern, which artist owns a
//! cluster) enters only afterwards, when the harness grades the attacker's
//! decisions.

pub mod stats;

use serde::{Deserialize, Serialize};

use crate::codec::ScaleConfig;
use crate::engine::{encdb_inner, plain_inner, Opener};
use crate::error::{Error, Result};
use crate::par::{self, Parallelism};
use crate::store::{BlockSchema, EmbeddingVector, EncryptedVector};

/// How the pattern attacker turns scores into present/absent calls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ThresholdPolicy {
    /// Fit two cluster means on a held-out calibration slice of the scores
    /// (no labels involved) and threshold at their midpoint.
    TwoMeansMidpoint {
        calibration_fraction: f64,
    },
    Fixed(f64),
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::TwoMeansMidpoint {
            calibration_fraction: 0.5,
        }
    }
}

/// Compute the decision threshold for a score slice under a policy, then
/// apply it to every score. Label-free by construction.
pub fn threshold_decisions(scores: &[f64], policy: &ThresholdPolicy) -> (f64, Vec<bool>) {
    let threshold = match policy {
        ThresholdPolicy::Fixed(t) => *t,
        ThresholdPolicy::TwoMeansMidpoint {
            calibration_fraction,
        } => {
            let frac = calibration_fraction.clamp(0.0, 1.0);
            let take = ((scores.len() as f64 * frac).round() as usize)
                .max(1)
                .min(scores.len());
            // Held-out slice: every other score first, so calibration is not
            // biased by storage order.
            let calibration: Vec<f64> = scores
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 == 0)
                .map(|(_, s)| *s)
                .chain(
                    scores
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| i % 2 == 1)
                        .map(|(_, s)| *s),
                )
                .take(take)
                .collect();
            let (lo, hi) = stats::two_means(&calibration);
            (lo + hi) / 2.0
        }
    };
    let decisions = scores.iter().map(|&s| s >= threshold).collect();
    (threshold, decisions)
}

/// One scored target in a report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TargetScore {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub creator: Option<String>,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackMetrics {
    PatternInference {
        threshold: f64,
        true_positives: usize,
        false_positives: usize,
        true_negatives: usize,
        false_negatives: usize,
        auc: f64,
    },
    CreatorAttribution {
        attribution: String,
        /// Gap between the best and second-best per-creator mean scores.
        margin: f64,
        /// Set when the margin is within noise of zero; the attacker cannot
        /// make a defensible call.
        inconclusive: bool,
        per_creator_means: Vec<(String, f64)>,
    },
}

/// Everything a run of either attack produces: the opened per-target scores,
/// the attacker's decision parameters, and harness-graded metrics. Metrics
/// are recomputable from `per_target` plus the ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: String,
    pub seed: u64,
    pub profile: String,
    pub per_target: Vec<TargetScore>,
    pub metrics: AttackMetrics,
}

impl AttackReport {
    pub fn summary(&self) -> String {
        match &self.metrics {
            AttackMetrics::PatternInference {
                threshold,
                true_positives,
                false_positives,
                true_negatives,
                false_negatives,
                auc,
            } => format!(
                "pattern inference over {} targets: auc={auc:.3} threshold={threshold:.3} \
                 tp={true_positives} fp={false_positives} tn={true_negatives} fn={false_negatives}",
                self.per_target.len()
            ),
            AttackMetrics::CreatorAttribution {
                attribution,
                margin,
                inconclusive,
                ..
            } => {
                if *inconclusive {
                    format!(
                        "creator attribution over {} targets: inconclusive (margin {margin:.4})",
                        self.per_target.len()
                    )
                } else {
                    format!(
                        "creator attribution over {} targets: {attribution} (margin {margin:.4})",
                        self.per_target.len()
                    )
                }
            }
        }
    }
}

/// Build the probe query for a pattern: the pattern occupies the named block,
/// everything else is zero, so every other block contributes nothing to the
/// score.
pub fn craft_pattern_query(
    pattern: &[f64],
    block_label: &str,
    schema: &BlockSchema,
) -> Result<EmbeddingVector> {
    let block = schema.block_by_label(block_label)?;
    if pattern.len() != block.len {
        return Err(Error::InvalidArgument(format!(
            "pattern length {} does not match block {block_label:?} length {}",
            pattern.len(),
            block.len
        )));
    }
    let mut values = vec![0.0; schema.total_dim()];
    values[block.offset..block.offset + block.len].copy_from_slice(pattern);
    EmbeddingVector::new(format!("probe-{block_label}"), None, values, schema)
}

/// Scan an encrypted corpus for a musical pattern.
///
/// The attacker crafts the probe, scores every encrypted vector through the
/// encrypted-database path, opens the scores and thresholds them. The caller
/// supplies `planted_ids` (ground truth) purely so the report can carry
/// detection metrics; the decision pipeline never reads it.
#[allow(clippy::too_many_arguments)]
pub fn pattern_inference_attack(
    pattern: &[f64],
    block_label: &str,
    corpus: &[EncryptedVector],
    schema: &BlockSchema,
    cfg: &ScaleConfig,
    opener: &Opener,
    policy: &ThresholdPolicy,
    planted_ids: &[String],
    seed: u64,
    profile: &str,
    mode: Parallelism,
) -> Result<AttackReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let probe = craft_pattern_query(pattern, block_label, schema)?;

    // Attacker phase: encrypted scores only.
    let scores = open_scores(&probe, corpus, cfg, opener, mode)?;
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    let (threshold, decisions) = threshold_decisions(&values, policy);

    // Harness phase: grade decisions against the planted ground truth.
    let mut tp = 0;
    let mut fp = 0;
    let mut tn = 0;
    let mut fn_ = 0;
    let mut positive_scores = Vec::new();
    let mut negative_scores = Vec::new();
    for (target, &decided) in scores.iter().zip(&decisions) {
        let truly_planted = planted_ids.binary_search(&target.id).is_ok();
        match (decided, truly_planted) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        if truly_planted {
            positive_scores.push(target.score);
        } else {
            negative_scores.push(target.score);
        }
    }
    let auc = stats::auc(&positive_scores, &negative_scores);

    Ok(AttackReport {
        attack: "pattern_inference".into(),
        seed,
        profile: profile.into(),
        per_target: scores,
        metrics: AttackMetrics::PatternInference {
            threshold,
            true_positives: tp,
            false_positives: fp,
            true_negatives: tn,
            false_negatives: fn_,
            auc,
        },
    })
}

/// Attribute a disputed embedding to one of the creators represented in an
/// encrypted corpus by comparing per-creator mean scores.
pub fn creator_attribution_attack(
    disputed: &EmbeddingVector,
    corpus: &[EncryptedVector],
    cfg: &ScaleConfig,
    opener: &Opener,
    seed: u64,
    profile: &str,
    mode: Parallelism,
) -> Result<AttackReport> {
    if corpus.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let scores = open_scores(disputed, corpus, cfg, opener, mode)?;
    let metrics = attribute_from_scores(&scores)?;
    Ok(AttackReport {
        attack: "creator_attribution".into(),
        seed,
        profile: profile.into(),
        per_target: scores,
        metrics,
    })
}

/// Plaintext-oracle attribution: same decision rule over exact float scores.
/// Used by harnesses to confirm the encrypted path changes nothing.
pub fn plaintext_attribution(
    disputed: &EmbeddingVector,
    corpus: &[EmbeddingVector],
) -> Result<AttackMetrics> {
    let scores = corpus
        .iter()
        .map(|y| {
            Ok(TargetScore {
                id: y.id.clone(),
                creator: y.creator.clone(),
                score: plain_inner(disputed, y)?.value,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    attribute_from_scores(&scores)
}

fn attribute_from_scores(scores: &[TargetScore]) -> Result<AttackMetrics> {
    let mut by_creator: std::collections::BTreeMap<&str, Vec<f64>> = Default::default();
    for s in scores {
        let creator = s.creator.as_deref().ok_or_else(|| {
            Error::InvalidArgument(format!("vector {:?} has no creator attribution", s.id))
        })?;
        by_creator.entry(creator).or_default().push(s.score);
    }
    if by_creator.len() < 2 {
        return Err(Error::InvalidArgument(
            "creator attribution needs at least two creators".into(),
        ));
    }

    let mut summary: Vec<(String, f64, f64)> = by_creator
        .into_iter()
        .map(|(creator, scores)| {
            let (mean, std) = stats::mean_std(&scores);
            let se = std / (scores.len() as f64).sqrt();
            (creator.to_string(), mean, se)
        })
        .collect();
    // Descending by mean; BTreeMap already fixed a deterministic base order.
    summary.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));

    let (top_name, top_mean, top_se) = summary[0].clone();
    let (_, second_mean, second_se) = summary[1].clone();
    let margin = top_mean - second_mean;
    // The gap has to clear the combined uncertainty of the two means to count
    // as evidence.
    let inconclusive = margin <= 2.0 * (top_se * top_se + second_se * second_se).sqrt();

    Ok(AttackMetrics::CreatorAttribution {
        attribution: top_name,
        margin,
        inconclusive,
        per_creator_means: summary.into_iter().map(|(c, m, _)| (c, m)).collect(),
    })
}

/// Score every encrypted vector with a plaintext probe and open the results.
fn open_scores(
    probe: &EmbeddingVector,
    corpus: &[EncryptedVector],
    cfg: &ScaleConfig,
    opener: &Opener,
    mode: Parallelism,
) -> Result<Vec<TargetScore>> {
    let pk = opener.public();
    let cts = par::try_map_indexed(mode, corpus, |_, enc_y| {
        Ok((
            enc_y.id.clone(),
            enc_y.creator.clone(),
            encdb_inner(probe, enc_y, pk, cfg)?,
        ))
    })?;
    cts.into_iter()
        .map(|(id, creator, ct)| {
            let (_, score) = opener.open(&ct, cfg, false)?;
            Ok(TargetScore { id, creator, score })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ahe::keygen;
    use crate::engine::blocked_similarity;
    use crate::rng::Randomness;
    use crate::store::{encrypt_collection, synth_corpus, CorpusProfile, GroundTruth};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::sync::OnceLock;

    fn opener() -> &'static Opener {
        static OPENER: OnceLock<Opener> = OnceLock::new();
        OPENER.get_or_init(|| {
            let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_0007);
            Opener::new(keygen(512, &mut rng).unwrap())
        })
    }

    #[test]
    fn crafted_query_is_zero_outside_the_block() {
        let schema = BlockSchema::default_music(16).unwrap();
        let pattern = vec![0.5, -0.5, 0.25, 1.0];
        let q = craft_pattern_query(&pattern, "melody", &schema).unwrap();
        let melody = schema.block_by_label("melody").unwrap();
        for (i, v) in q.values().iter().enumerate() {
            if i >= melody.offset && i < melody.offset + melody.len {
                assert_eq!(*v, pattern[i - melody.offset]);
            } else {
                assert_eq!(*v, 0.0);
            }
        }

        let zeroed = craft_pattern_query(&[0.0; 4], "melody", &schema).unwrap();
        assert!(zeroed.values().iter().all(|v| *v == 0.0));

        assert!(craft_pattern_query(&[1.0; 3], "melody", &schema).is_err());
        assert!(craft_pattern_query(&[1.0; 4], "bass", &schema).is_err());
    }

    #[test]
    fn crafted_query_annihilates_other_blocks() {
        let schema = BlockSchema::default_music(16).unwrap();
        let cfg = ScaleConfig::default();
        let q = craft_pattern_query(&[1.0, 0.5, -0.25, 0.75], "melody", &schema).unwrap();
        let corpus = synth_corpus(60, 1, &schema, &CorpusProfile::Uniform).unwrap();
        let enc = encrypt_collection(
            &corpus.vectors,
            opener().public(),
            &cfg,
            Randomness::Seeded(1),
            Parallelism::Sequential,
        )
        .unwrap();

        let blocked = blocked_similarity(&q, &enc[0], &schema, opener().public(), &cfg).unwrap();
        for (block, ct) in schema.blocks().iter().zip(&blocked.per_block) {
            let (raw, _) = opener().open(ct, &cfg, false).unwrap();
            if block.label == "melody" {
                continue;
            }
            assert!(raw.is_zero(), "block {} should score zero", block.label);
        }
    }

    fn run_pattern(strength: f64, seed: u64) -> AttackReport {
        let schema = BlockSchema::default_music(32).unwrap();
        let cfg = ScaleConfig::default();
        let profile = CorpusProfile::PlantedPattern {
            block_label: "melody".into(),
            pattern_seed: 9,
            strength,
            planted: 12,
        };
        let corpus = synth_corpus(seed, 60, &schema, &profile).unwrap();
        let GroundTruth::Planted { ids, pattern } = &corpus.truth else {
            panic!()
        };
        let enc = encrypt_collection(
            &corpus.vectors,
            opener().public(),
            &cfg,
            Randomness::Seeded(seed ^ 1),
            Parallelism::Parallel,
        )
        .unwrap();
        pattern_inference_attack(
            pattern,
            "melody",
            &enc,
            &schema,
            &cfg,
            opener(),
            &ThresholdPolicy::default(),
            ids,
            seed,
            &profile.describe(),
            Parallelism::Parallel,
        )
        .unwrap()
    }

    #[test]
    fn strong_plant_is_detected() {
        let report = run_pattern(3.0, 71);
        let AttackMetrics::PatternInference {
            auc,
            false_negatives,
            ..
        } = report.metrics
        else {
            panic!()
        };
        assert!(auc >= 0.95, "auc {auc}");
        assert_eq!(false_negatives, 0);
    }

    #[test]
    fn null_plant_is_chance_level() {
        let report = run_pattern(0.0, 72);
        let AttackMetrics::PatternInference { auc, .. } = report.metrics else {
            panic!()
        };
        assert!((0.4..=0.6).contains(&auc), "auc {auc}");
    }

    #[test]
    fn exact_copy_attributes_to_its_artist() {
        let schema = BlockSchema::default_music(16).unwrap();
        let cfg = ScaleConfig::default();
        let profile = CorpusProfile::ArtistClusters {
            num_artists: 3,
            spread: 0.1,
        };
        let corpus = synth_corpus(80, 30, &schema, &profile).unwrap();
        let enc = encrypt_collection(
            &corpus.vectors,
            opener().public(),
            &cfg,
            Randomness::Seeded(81),
            Parallelism::Parallel,
        )
        .unwrap();

        let disputed = corpus.vectors[4].clone();
        let expected_creator = disputed.creator.clone().unwrap();
        let report = creator_attribution_attack(
            &disputed,
            &enc,
            &cfg,
            opener(),
            80,
            &profile.describe(),
            Parallelism::Parallel,
        )
        .unwrap();
        let AttackMetrics::CreatorAttribution {
            attribution,
            inconclusive,
            ..
        } = &report.metrics
        else {
            panic!()
        };
        assert_eq!(attribution, &expected_creator);
        assert!(!inconclusive);

        // Oracle agreement on the same corpus.
        let AttackMetrics::CreatorAttribution {
            attribution: oracle,
            ..
        } = plaintext_attribution(&disputed, &corpus.vectors).unwrap()
        else {
            panic!()
        };
        assert_eq!(&oracle, attribution);
    }

    #[test]
    fn orthogonal_probe_is_inconclusive() {
        let schema = BlockSchema::default_music(16).unwrap();
        let cfg = ScaleConfig::default();
        let profile = CorpusProfile::ArtistClusters {
            num_artists: 4,
            spread: 0.1,
        };
        let corpus = synth_corpus(82, 40, &schema, &profile).unwrap();
        let GroundTruth::Clustered { centroids } = &corpus.truth else {
            panic!()
        };

        // Gram-Schmidt a random vector against every centroid.
        let mut probe: Vec<f64> = {
            use rand::Rng;
            let mut rng = ChaCha20Rng::seed_from_u64(83);
            (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        for (_, c) in centroids {
            let dot: f64 = probe.iter().zip(c).map(|(a, b)| a * b).sum();
            let norm2: f64 = c.iter().map(|v| v * v).sum();
            for (p, ci) in probe.iter_mut().zip(c) {
                *p -= dot / norm2 * ci;
            }
        }
        let disputed = EmbeddingVector::new("disputed", None, probe, &schema).unwrap();

        let enc = encrypt_collection(
            &corpus.vectors,
            opener().public(),
            &cfg,
            Randomness::Seeded(84),
            Parallelism::Parallel,
        )
        .unwrap();
        let report = creator_attribution_attack(
            &disputed,
            &enc,
            &cfg,
            opener(),
            82,
            &profile.describe(),
            Parallelism::Parallel,
        )
        .unwrap();
        let AttackMetrics::CreatorAttribution {
            inconclusive,
            margin,
            ..
        } = report.metrics
        else {
            panic!()
        };
        assert!(inconclusive, "margin {margin} should be within noise");
    }

    #[test]
    fn single_creator_corpus_is_rejected() {
        let schema = BlockSchema::default_music(8).unwrap();
        let cfg = ScaleConfig::default();
        let mut corpus = synth_corpus(85, 4, &schema, &CorpusProfile::Uniform).unwrap();
        for v in &mut corpus.vectors {
            *v = EmbeddingVector::new(
                v.id.clone(),
                Some("only-artist".into()),
                v.values().to_vec(),
                &schema,
            )
            .unwrap();
        }
        let enc = encrypt_collection(
            &corpus.vectors,
            opener().public(),
            &cfg,
            Randomness::Seeded(86),
            Parallelism::Sequential,
        )
        .unwrap();
        let disputed = corpus.vectors[0].clone();
        assert!(creator_attribution_attack(
            &disputed,
            &enc,
            &cfg,
            opener(),
            85,
            "uniform",
            Parallelism::Sequential,
        )
        .is_err());
    }
}
