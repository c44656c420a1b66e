//! Desk-scale benchmark harness: per-query evaluation timing across vector
//! lengths and deployment settings, end-to-end cost asymmetry between them,
//! and exact ciphertext-size accounting.
//!
//! Every run asserts engine correctness on sample pairs before any clock
//! starts, so timings of broken code are never reported. Evaluation runs
//! single-threaded unless explicitly told otherwise; medians over repeated
//! runs are the headline numbers.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::codec::{self, ScaleConfig};
use crate::engine::{encdb_inner, encquery_inner, plain_inner, quantized_inner, Opener, Setting};
use crate::error::{Error, Result};
use crate::par::Parallelism;
use crate::rng::Randomness;
use crate::store::{encrypt_collection, synth_corpus, BlockSchema, CorpusProfile, EmbeddingVector};
use crate::{ahe, store::EncryptedVector};

/// Vector lengths the harness sweeps by default.
pub const DEFAULT_DIMS: [usize; 4] = [128, 256, 512, 1024];

/// Default repetition count; the median of 11 is robust to scheduler noise
/// without inflating runtimes.
pub const DEFAULT_REPS: usize = 11;

/// Warm-up iterations discarded before timing.
pub const DEFAULT_WARMUP: usize = 2;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub corpus_size: usize,
    pub reps: usize,
    pub warmup: usize,
    pub seed: u64,
    pub key_bits: u32,
    pub scale: ScaleConfig,
    /// Parallelism for the setup encryption phase.
    pub encrypt_mode: Parallelism,
    /// Parallelism for the timed evaluation phase; sequential by default for
    /// timing stability.
    pub eval_mode: Parallelism,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dims: DEFAULT_DIMS.to_vec(),
            corpus_size: 100,
            reps: DEFAULT_REPS,
            warmup: DEFAULT_WARMUP,
            seed: 7,
            key_bits: 1024,
            scale: ScaleConfig::default(),
            encrypt_mode: Parallelism::Sequential,
            eval_mode: Parallelism::Sequential,
        }
    }
}

/// Timings and sizes for one (setting, dimension) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchResult {
    pub setting: Setting,
    pub dimension: usize,
    pub corpus_size: usize,
    pub reps: usize,
    pub seed: u64,
    pub keygen_ms: f64,
    pub encryption_ms: f64,
    pub eval_median_ms: f64,
    pub eval_min_ms: f64,
    pub eval_max_ms: f64,
    pub decryption_ms: f64,
    /// keygen + encryption + median evaluation + decryption.
    pub total_ms: f64,
    /// Exact serialized residue bytes resident for this setting.
    pub ciphertext_bytes: u64,
    /// Peak resident set size in kB where the platform exposes it.
    pub peak_rss_kb: Option<u64>,
    /// Per-thread busy milliseconds during the final evaluation repetition;
    /// present only when evaluation ran on the thread pool.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_thread_busy_ms: Option<Vec<f64>>,
}

impl BenchResult {
    /// Setup cost plus one query scan: the end-to-end figure the setting
    /// asymmetry claims are stated over.
    pub fn end_to_end_ms(&self) -> f64 {
        self.encryption_ms + self.eval_median_ms
    }
}

/// Run the sweep for one setting across all configured dimensions.
pub fn run_bench(cfg: &BenchConfig, setting: Setting) -> Result<Vec<BenchResult>> {
    if cfg.corpus_size == 0 {
        return Err(Error::InvalidArgument(
            "benchmark corpus must be non-empty".into(),
        ));
    }
    if cfg.reps < 1 {
        return Err(Error::InvalidArgument(
            "at least one repetition required".into(),
        ));
    }
    cfg.dims
        .iter()
        .map(|&dim| run_cell(cfg, setting, dim))
        .collect()
}

/// Run all three settings; results are ordered (setting, dimension).
pub fn run_all(cfg: &BenchConfig) -> Result<Vec<BenchResult>> {
    let mut out = Vec::new();
    for setting in [
        Setting::EncryptedDb,
        Setting::EncryptedQuery,
        Setting::PlaintextOracle,
    ] {
        out.extend(run_bench(cfg, setting)?);
    }
    Ok(out)
}

fn run_cell(cfg: &BenchConfig, setting: Setting, dim: usize) -> Result<BenchResult> {
    let schema = BlockSchema::equal_partition(dim, if dim.is_multiple_of(4) { 4 } else { 1 })?;
    let n = cfg.corpus_size;

    // Corpus plus one held-out query vector, all deterministic in the seed.
    let synth = synth_corpus(cfg.seed, n + 1, &schema, &CorpusProfile::Uniform)?;
    let mut vectors = synth.vectors;
    let query = vectors.pop().expect("count + 1 vectors were generated");
    let corpus = vectors;

    let t = Instant::now();
    let mut key_rng = Randomness::Seeded(cfg.seed ^ 0x6b67).stream(0);
    let keys = ahe::keygen(cfg.key_bits, &mut key_rng)?;
    let keygen_ms = ms_since(t);

    let budget = codec::overflow_budget(&cfg.scale, dim, keys.public.modulus());
    if !budget.holds {
        return Err(Error::BudgetExceeded {
            dim,
            max_dim: budget.max_dim,
        });
    }
    let opener = Opener::new(keys);
    let pk = opener.public();

    // Setup encryption: what this setting keeps encrypted at rest.
    let mut enc_corpus: Vec<EncryptedVector> = Vec::new();
    let mut enc_query: Option<EncryptedVector> = None;
    let t = Instant::now();
    match setting {
        Setting::EncryptedDb => {
            enc_corpus = encrypt_collection(
                &corpus,
                pk,
                &cfg.scale,
                Randomness::Seeded(cfg.seed ^ 0xe0c),
                cfg.encrypt_mode,
            )?;
        }
        Setting::EncryptedQuery => {
            enc_query = Some(
                encrypt_collection(
                    std::slice::from_ref(&query),
                    pk,
                    &cfg.scale,
                    Randomness::Seeded(cfg.seed ^ 0xe0d),
                    cfg.encrypt_mode,
                )?
                .remove(0),
            );
        }
        Setting::PlaintextOracle => {}
    }
    let encryption_ms = ms_since(t);

    correctness_gate(
        setting,
        &query,
        &corpus,
        &enc_corpus,
        enc_query.as_ref(),
        &opener,
        cfg,
    )?;

    // Timed evaluation: one full scan of the corpus per repetition. The last
    // repetition additionally accounts busy time per worker thread when the
    // scan runs on the pool.
    let mut durations = Vec::with_capacity(cfg.reps);
    let mut last_scan: Vec<ahe::Ciphertext> = Vec::new();
    let total_reps = cfg.warmup + cfg.reps;
    let mut per_thread_busy_ms = None;
    for rep in 0..total_reps {
        let timers = (cfg.eval_mode.is_parallel() && rep + 1 == total_reps)
            .then(crate::par::ThreadTimers::new);
        let timers = timers.as_ref();
        let timed = |f: &dyn Fn() -> Result<ahe::Ciphertext>| -> Result<ahe::Ciphertext> {
            match timers {
                Some(timers) => {
                    let t0 = Instant::now();
                    let out = f()?;
                    timers.record(t0.elapsed().as_nanos() as u64);
                    Ok(out)
                }
                None => f(),
            }
        };

        let t = Instant::now();
        match setting {
            Setting::EncryptedDb => {
                last_scan = crate::par::try_map_indexed(cfg.eval_mode, &enc_corpus, |_, enc_y| {
                    timed(&|| encdb_inner(&query, enc_y, pk, &cfg.scale))
                })?;
            }
            Setting::EncryptedQuery => {
                let enc_q = enc_query.as_ref().expect("query was encrypted in setup");
                last_scan = crate::par::try_map_indexed(cfg.eval_mode, &corpus, |_, y| {
                    timed(&|| encquery_inner(enc_q, y, pk, &cfg.scale))
                })?;
            }
            Setting::PlaintextOracle => {
                let scores = crate::par::try_map_indexed(cfg.eval_mode, &corpus, |_, y| {
                    plain_inner(&query, y)
                })?;
                std::hint::black_box(&scores);
            }
        }
        if rep >= cfg.warmup {
            durations.push(ms_since(t));
        }
        if let Some(timers) = timers {
            let busy = timers.busy_ms();
            if !busy.is_empty() {
                per_thread_busy_ms = Some(busy);
            }
        }
    }

    // Open every score from the final scan.
    let t = Instant::now();
    for ct in &last_scan {
        std::hint::black_box(opener.open(ct, &cfg.scale, false)?);
    }
    let decryption_ms = if last_scan.is_empty() {
        0.0
    } else {
        ms_since(t)
    };

    let ciphertext_bytes: u64 = enc_corpus
        .iter()
        .map(|v| v.ciphertext_bytes() as u64)
        .sum::<u64>()
        + enc_query
            .as_ref()
            .map_or(0, |q| q.ciphertext_bytes() as u64);

    durations.sort_by(f64::total_cmp);
    let eval_median_ms = durations[durations.len() / 2];
    let eval_min_ms = durations[0];
    let eval_max_ms = durations[durations.len() - 1];

    Ok(BenchResult {
        setting,
        dimension: dim,
        corpus_size: n,
        reps: cfg.reps,
        seed: cfg.seed,
        keygen_ms,
        encryption_ms,
        eval_median_ms,
        eval_min_ms,
        eval_max_ms,
        decryption_ms,
        total_ms: keygen_ms + encryption_ms + eval_median_ms + decryption_ms,
        ciphertext_bytes,
        peak_rss_kb: peak_rss_kb(),
        per_thread_busy_ms,
    })
}

/// Assert engine correctness on sample pairs before any timing: the opened
/// encrypted score must equal the quantized-integer oracle exactly, and the
/// plaintext path must track the float oracle within the codec bound.
fn correctness_gate(
    setting: Setting,
    query: &EmbeddingVector,
    corpus: &[EmbeddingVector],
    enc_corpus: &[EncryptedVector],
    enc_query: Option<&EncryptedVector>,
    opener: &Opener,
    cfg: &BenchConfig,
) -> Result<()> {
    let pairs = corpus.len().min(10);
    for (i, y) in corpus.iter().take(pairs).enumerate() {
        let expected = quantized_inner(query, y, &cfg.scale)?;
        let ct = match setting {
            Setting::EncryptedDb => {
                // encrypt_collection preserves input order.
                encdb_inner(query, &enc_corpus[i], opener.public(), &cfg.scale)?
            }
            Setting::EncryptedQuery => encquery_inner(
                enc_query.expect("encrypted query exists"),
                y,
                opener.public(),
                &cfg.scale,
            )?,
            Setting::PlaintextOracle => {
                let float = plain_inner(query, y)?.value;
                let decoded = codec::decode_product(&expected, &cfg.scale, false);
                if (float - decoded).abs() > cfg.scale.product_error_bound(query.dim()) {
                    return Err(Error::InvalidArgument(
                        "correctness gate failed: quantized oracle diverged from float oracle"
                            .into(),
                    ));
                }
                continue;
            }
        };
        let (raw, _) = opener.open(&ct, &cfg.scale, false)?;
        if raw != expected {
            return Err(Error::InvalidArgument(format!(
                "correctness gate failed: encrypted path decrypted to {raw}, oracle says {expected}"
            )));
        }
    }
    Ok(())
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Peak resident set size in kB, read from /proc/self/status when available.
pub fn peak_rss_kb() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            return rest.trim().trim_end_matches(" kB").trim().parse().ok();
        }
    }
    None
}

/// Least-squares line fit; returns (slope, intercept, r_squared).
pub fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let mean_x = xs.iter().sum::<f64>() / n;
    let mean_y = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        (sxy * sxy) / (sxx * syy)
    };
    (slope, intercept, r2)
}

/// Write `results.csv` (one row per (setting, dimension), evaluation phase)
/// and `ratios.csv` (same keys plus the ratio against the plaintext d=128
/// baseline). The ratio file is skipped when the sweep does not include the
/// baseline cell. Output is byte-stable for identical inputs.
pub fn emit_report(
    results: &[BenchResult],
    out_dir: impl AsRef<Path>,
) -> Result<(PathBuf, Option<PathBuf>)> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)?;

    let mut rows: Vec<&BenchResult> = results.iter().collect();
    rows.sort_by(|a, b| {
        a.setting
            .as_str()
            .cmp(b.setting.as_str())
            .then(a.dimension.cmp(&b.dimension))
    });

    let header = "setting,dimension,N,phase,median_ms,min_ms,max_ms,ct_bytes,reps,seed";
    let mut csv = String::from(header);
    csv.push('\n');
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},evaluate,{:.6},{:.6},{:.6},{},{},{}\n",
            r.setting.as_str(),
            r.dimension,
            r.corpus_size,
            r.eval_median_ms,
            r.eval_min_ms,
            r.eval_max_ms,
            r.ciphertext_bytes,
            r.reps,
            r.seed,
        ));
    }
    let results_path = dir.join("results.csv");
    std::fs::write(&results_path, &csv)?;

    let Some(baseline) = rows
        .iter()
        .find(|r| r.setting == Setting::PlaintextOracle && r.dimension == 128)
        .map(|r| r.eval_median_ms)
    else {
        return Ok((results_path, None));
    };

    let mut ratios = String::from(
        "setting,dimension,N,phase,median_ms,min_ms,max_ms,ct_bytes,reps,seed,ratio_vs_plain128",
    );
    ratios.push('\n');
    for r in &rows {
        ratios.push_str(&format!(
            "{},{},{},evaluate,{:.6},{:.6},{:.6},{},{},{},{:.4}\n",
            r.setting.as_str(),
            r.dimension,
            r.corpus_size,
            r.eval_median_ms,
            r.eval_min_ms,
            r.eval_max_ms,
            r.ciphertext_bytes,
            r.reps,
            r.seed,
            r.eval_median_ms / baseline,
        ));
    }
    let ratios_path = dir.join("ratios.csv");
    std::fs::write(&ratios_path, &ratios)?;

    Ok((results_path, Some(ratios_path)))
}
