//! Deterministic synthetic corpora, the desk-scale stand-in for a real
//! embedding dataset. Ground truth (which vectors carry a planted pattern,
//! which artist owns which cluster) is returned to the harness but is never
//! visible to attacker logic.

use rand::Rng;

use super::schema::BlockSchema;
use super::EmbeddingVector;
use crate::error::{Error, Result};
use crate::rng::Randomness;

/// Shape of the generated corpus.
#[derive(Debug, Clone, PartialEq)]
pub enum CorpusProfile {
    /// Coordinates i.i.d. uniform in [-1, 1].
    Uniform,
    /// Uniform corpus with a fixed sub-vector added into one block of
    /// `planted` designated vectors, scaled by `strength`. Strength zero
    /// keeps the designation (ground truth) but changes nothing.
    PlantedPattern {
        block_label: String,
        pattern_seed: u64,
        strength: f64,
        planted: usize,
    },
    /// `num_artists` centroids, each vector drawn as centroid + spread *
    /// uniform noise; `creator` is set to the owning artist.
    ArtistClusters { num_artists: usize, spread: f64 },
}

impl CorpusProfile {
    pub fn describe(&self) -> String {
        match self {
            CorpusProfile::Uniform => "uniform".to_string(),
            CorpusProfile::PlantedPattern {
                block_label,
                strength,
                planted,
                ..
            } => {
                format!(
                    "planted_pattern(block={block_label}, strength={strength}, planted={planted})"
                )
            }
            CorpusProfile::ArtistClusters {
                num_artists,
                spread,
            } => {
                format!("artist_clusters(artists={num_artists}, spread={spread})")
            }
        }
    }
}

/// What the harness (not the attacker) knows about a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    None,
    Planted { ids: Vec<String>, pattern: Vec<f64> },
    Clustered { centroids: Vec<(String, Vec<f64>)> },
}

#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub vectors: Vec<EmbeddingVector>,
    pub truth: GroundTruth,
}

/// Generate `count` embeddings under `schema`. Equal seeds yield identical
/// corpora byte for byte; every vector has its own derived randomness stream.
pub fn synth_corpus(
    seed: u64,
    count: usize,
    schema: &BlockSchema,
    profile: &CorpusProfile,
) -> Result<SynthCorpus> {
    let randomness = Randomness::Seeded(seed);
    let dim = schema.total_dim();

    match profile {
        CorpusProfile::Uniform => {
            let vectors = base_vectors(randomness, count, schema, None)?;
            Ok(SynthCorpus {
                vectors,
                truth: GroundTruth::None,
            })
        }
        CorpusProfile::PlantedPattern {
            block_label,
            pattern_seed,
            strength,
            planted,
        } => {
            if *planted > count {
                return Err(Error::InvalidArgument(format!(
                    "cannot plant {planted} patterns in a corpus of {count}"
                )));
            }
            let block = schema.block_by_label(block_label)?.clone();

            // Unit-norm pattern drawn from its own seed so the same pattern
            // can be replanted across corpora.
            let mut prng = Randomness::Seeded(*pattern_seed).stream(u64::MAX);
            let mut pattern: Vec<f64> = (0..block.len).map(|_| prng.gen_range(-1.0..1.0)).collect();
            let norm = pattern.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in &mut pattern {
                    *v /= norm;
                }
            }

            let mut vectors = base_vectors(randomness, count, schema, None)?;

            // Designate planted vectors by a seeded shuffle over indices.
            let mut order: Vec<usize> = (0..count).collect();
            let mut srng = randomness.stream(u64::MAX - 1);
            for i in (1..order.len()).rev() {
                let j = srng.gen_range(0..=i);
                order.swap(i, j);
            }
            let mut ids = Vec::with_capacity(*planted);
            for &idx in order.iter().take(*planted) {
                let v = &mut vectors[idx];
                let mut values = v.values().to_vec();
                for (offset, p) in pattern.iter().enumerate() {
                    values[block.offset + offset] += strength * p;
                }
                *v = EmbeddingVector::new(v.id.clone(), v.creator.clone(), values, schema)?;
                ids.push(v.id.clone());
            }
            ids.sort();
            Ok(SynthCorpus {
                vectors,
                truth: GroundTruth::Planted { ids, pattern },
            })
        }
        CorpusProfile::ArtistClusters {
            num_artists,
            spread,
        } => {
            if *num_artists < 1 {
                return Err(Error::InvalidArgument(
                    "at least one artist required".into(),
                ));
            }
            if count < *num_artists {
                return Err(Error::InvalidArgument(format!(
                    "corpus of {count} cannot cover {num_artists} artists"
                )));
            }
            let mut centroids = Vec::with_capacity(*num_artists);
            for a in 0..*num_artists {
                let mut crng = randomness.stream(u64::MAX - 2 - a as u64);
                let centroid: Vec<f64> = (0..dim).map(|_| crng.gen_range(-1.0..1.0)).collect();
                centroids.push((format!("artist-{a}"), centroid));
            }
            let mut vectors = Vec::with_capacity(count);
            for i in 0..count {
                let (artist, centroid) = &centroids[i % num_artists];
                let mut vrng = randomness.stream(i as u64);
                let values: Vec<f64> = centroid
                    .iter()
                    .map(|c| c + spread * vrng.gen_range(-1.0..1.0))
                    .collect();
                vectors.push(EmbeddingVector::new(
                    format!("v{i:04}"),
                    Some(artist.clone()),
                    values,
                    schema,
                )?);
            }
            Ok(SynthCorpus {
                vectors,
                truth: GroundTruth::Clustered { centroids },
            })
        }
    }
}

fn base_vectors(
    randomness: Randomness,
    count: usize,
    schema: &BlockSchema,
    creator: Option<&str>,
) -> Result<Vec<EmbeddingVector>> {
    let dim = schema.total_dim();
    (0..count)
        .map(|i| {
            let mut rng = randomness.stream(i as u64);
            let values: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            EmbeddingVector::new(
                format!("v{i:04}"),
                creator.map(|c| c.to_string()),
                values,
                schema,
            )
        })
        .collect()
}
