//! Command-line surface: key management, database and query encryption,
//! search, the benchmark sweep, the attack demonstrations, and the service.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;

use ppmir::bench::{fit_line, BenchConfig, BenchResult, DEFAULT_REPS, DEFAULT_WARMUP};
use ppmir::engine::{topk_search, Opener, QueryRef, SearchKind, Setting, TargetRef};
use ppmir::store::{
    load_encrypted_db, load_plain_db, save_encrypted_db, save_plain_db, DbMode, Manifest, QueryFile,
};
use ppmir::threat::{
    craft_pattern_query, creator_attribution_attack, pattern_inference_attack,
    plaintext_attribution, threshold_decisions, AttackMetrics, ThresholdPolicy,
};
use ppmir::{
    ingest_jsonl, keygen, synth_corpus, BlockSchema, CorpusProfile, EmbeddingVector, Error,
    GroundTruth, KeyPair, Parallelism, PrivateKey, PublicKey, Randomness, Result, ScaleConfig,
    WeightVector,
};

pub const PUBLIC_KEY_FILE: &str = "public.json";
pub const PRIVATE_KEY_FILE: &str = "private.json";

/// Exit codes, one per error class.
pub const EXIT_VALIDATION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;
pub const EXIT_KEY: i32 = 5;
pub const EXIT_IO: i32 = 6;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::BudgetExceeded { .. } => EXIT_BUDGET,
        Error::KeyMismatch { .. } | Error::MissingKey | Error::NonInvertibleCiphertext => EXIT_KEY,
        Error::Io(_) => EXIT_IO,
        _ => EXIT_VALIDATION,
    }
}

#[derive(Parser)]
#[command(
    name = "ppmir",
    version,
    about = "Privacy-preserving music embedding search: encrypted inner products, retrieval, attacks and benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a key pair and write public.json / private.json
    Keygen(KeygenArgs),
    /// Build a plaintext database directory from a JSONL embedding file
    InitDb(InitDbArgs),
    /// Encrypt a JSONL embedding file into an encrypted database directory
    EncryptDb(EncryptDbArgs),
    /// Encrypt one embedding as a query file
    EncryptQuery(EncryptQueryArgs),
    /// Rank database vectors against a query
    Search(SearchArgs),
    /// Timing and storage sweep across settings and vector lengths
    Bench(BenchArgs),
    /// Threat-model demonstrations over synthetic corpora
    #[command(subcommand)]
    Attack(AttackCmd),
    /// Serve the encrypted-query protocol over HTTP
    Serve(ServeArgs),
}

#[derive(Args, Clone, Copy)]
pub struct ScaleArgs {
    /// Fractional bits for embedding coordinates
    #[arg(long, default_value_t = 16)]
    pub frac_bits: u32,
    /// Fractional bits for block weights
    #[arg(long, default_value_t = 8)]
    pub weight_frac_bits: u32,
    /// Bound on absolute coordinate and weight values
    #[arg(long, default_value_t = 4.0)]
    pub max_abs: f64,
}

impl From<ScaleArgs> for ScaleConfig {
    fn from(a: ScaleArgs) -> Self {
        ScaleConfig {
            frac_bits: a.frac_bits,
            weight_frac_bits: a.weight_frac_bits,
            max_abs: a.max_abs,
        }
    }
}

#[derive(Args)]
pub struct KeygenArgs {
    /// Modulus size in bits (512 is test-only and gated)
    #[arg(long, default_value_t = 2048)]
    pub bits: u32,
    /// Directory for the key files
    #[arg(long)]
    pub out: PathBuf,
    /// Overwrite existing key files
    #[arg(long)]
    pub force: bool,
    /// Allow the insecure 512-bit test size
    #[arg(long)]
    pub insecure_test_keys: bool,
}

#[derive(Args)]
pub struct InitDbArgs {
    /// JSONL embedding file ({id, creator?, values} per line)
    #[arg(long)]
    pub input: PathBuf,
    /// Output database directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// L2-normalize vectors on ingestion (inner product becomes cosine)
    #[arg(long)]
    pub normalize: bool,
    #[command(flatten)]
    pub scale: ScaleArgs,
}

#[derive(Args)]
pub struct EncryptDbArgs {
    /// JSONL embedding file ({id, creator?, values} per line)
    #[arg(long)]
    pub input: PathBuf,
    /// Key directory (public.json is read; the private key is not needed)
    #[arg(long)]
    pub keys: PathBuf,
    /// Output database directory
    #[arg(long)]
    pub out: PathBuf,
    /// Block layout as label:len pairs, e.g. "rhythm:32,melody:32,harmony:32,timbre:32"
    #[arg(long)]
    pub blocks: Option<String>,
    /// Embedding dimension (inferred from the input when omitted)
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub scale: ScaleArgs,
    /// Deterministic encryption randomness (testing only)
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct EncryptQueryArgs {
    /// JSONL embedding file to take the query from
    #[arg(long)]
    pub input: PathBuf,
    /// Id of the vector to encrypt (defaults to the first)
    #[arg(long)]
    pub id: Option<String>,
    #[arg(long)]
    pub keys: PathBuf,
    /// Output query file (JSON)
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub blocks: Option<String>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub scale: ScaleArgs,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Plain,
    Blocked,
    Weighted,
}

#[derive(Args)]
pub struct SearchArgs {
    /// Query: a .jsonl plaintext embedding or a .json encrypted query file
    #[arg(long)]
    pub query: PathBuf,
    /// Database directory (plaintext or encrypted; see manifest.json)
    #[arg(long)]
    pub db: PathBuf,
    /// Number of results
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, value_enum, default_value_t = KindArg::Plain)]
    pub kind: KindArg,
    /// Comma-separated per-block weights (required for --kind weighted)
    #[arg(long)]
    pub weights: Option<String>,
    /// Key directory holding public.json and private.json
    #[arg(long)]
    pub keys: Option<PathBuf>,
    /// Write the ranking as JSON here as well
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct BenchArgs {
    /// Comma-separated vector lengths
    #[arg(long, default_value = "128,256,512,1024")]
    pub dims: String,
    /// Corpus size
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_REPS)]
    pub reps: usize,
    #[arg(long, default_value_t = DEFAULT_WARMUP)]
    pub warmup: usize,
    /// Key size for the sweep
    #[arg(long, default_value_t = 1024)]
    pub bits: u32,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Output directory for results.csv, ratios.csv and results.json
    #[arg(long)]
    pub out: PathBuf,
    /// Evaluate scans on the rayon pool (timed phase; off by default for
    /// timing stability)
    #[arg(long)]
    pub parallel: bool,
    #[arg(long)]
    pub insecure_test_keys: bool,
    #[command(flatten)]
    pub scale: ScaleArgs,
}

#[derive(Subcommand)]
pub enum AttackCmd {
    /// Scan an encrypted corpus for a planted musical pattern
    Pattern(PatternArgs),
    /// Attribute a disputed embedding to a creator cluster
    Creator(CreatorArgs),
}

#[derive(Args)]
pub struct PatternArgs {
    #[arg(long, default_value_t = 100)]
    pub count: usize,
    #[arg(long, default_value_t = 20)]
    pub planted: usize,
    /// Plant strength; about 3.0 gives a clean separation, 0.0 a null corpus
    #[arg(long, default_value_t = 3.0)]
    pub strength: f64,
    #[arg(long, default_value_t = 128)]
    pub dim: usize,
    /// Block the pattern occupies
    #[arg(long, default_value = "melody")]
    pub block: String,
    #[arg(long, default_value_t = 9)]
    pub pattern_seed: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub bits: u32,
    /// Fixed decision threshold instead of the two-means midpoint policy
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub insecure_test_keys: bool,
}

#[derive(Args)]
pub struct CreatorArgs {
    #[arg(long, default_value_t = 4)]
    pub artists: usize,
    #[arg(long, default_value_t = 25)]
    pub per_artist: usize,
    #[arg(long, default_value_t = 0.1)]
    pub spread: f64,
    #[arg(long, default_value_t = 50)]
    pub trials: usize,
    #[arg(long, default_value_t = 32)]
    pub dim: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub bits: u32,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub insecure_test_keys: bool,
}

#[derive(Args)]
pub struct ServeArgs {
    /// Plaintext database directory
    #[arg(long)]
    pub db: PathBuf,
    /// Bind address
    #[arg(long, default_value = "127.0.0.1:7878")]
    pub bind: String,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Keygen(args) => run_keygen(args),
        Command::InitDb(args) => run_init_db(args),
        Command::EncryptDb(args) => run_encrypt_db(args),
        Command::EncryptQuery(args) => run_encrypt_query(args),
        Command::Search(args) => run_search(args),
        Command::Bench(args) => run_bench_cmd(args),
        Command::Attack(cmd) => match cmd {
            AttackCmd::Pattern(args) => run_attack_pattern(args),
            AttackCmd::Creator(args) => run_attack_creator(args),
        },
        Command::Serve(args) => run_serve(args),
    }
}

fn gate_key_bits(bits: u32, insecure_flag: bool) -> Result<()> {
    if bits == 512 && !insecure_flag {
        return Err(Error::InvalidArgument(
            "512-bit keys are test-only; pass --insecure-test-keys to accept them".into(),
        ));
    }
    Ok(())
}

fn run_keygen(args: KeygenArgs) -> Result<()> {
    gate_key_bits(args.bits, args.insecure_test_keys)?;
    let public_path = args.out.join(PUBLIC_KEY_FILE);
    let private_path = args.out.join(PRIVATE_KEY_FILE);
    if !args.force && (public_path.exists() || private_path.exists()) {
        return Err(Error::InvalidArgument(format!(
            "key files already exist in {}; pass --force to overwrite",
            args.out.display()
        )));
    }

    let mut rng = Randomness::System.stream(0);
    let keys = keygen(args.bits, &mut rng)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(&public_path, keys.public.to_json())?;
    std::fs::write(&private_path, keys.private.to_json())?;
    println!(
        "wrote {}-bit key pair (key_id {}) to {}",
        args.bits,
        keys.public.key_id(),
        args.out.display()
    );
    Ok(())
}

pub fn load_public_key(keys_dir: &Path) -> Result<PublicKey> {
    let path = keys_dir.join(PUBLIC_KEY_FILE);
    if !path.exists() {
        return Err(Error::MissingKey);
    }
    PublicKey::from_json(&std::fs::read_to_string(path)?)
}

pub fn load_opener(keys_dir: &Path) -> Result<Opener> {
    let public = load_public_key(keys_dir)?;
    let private_path = keys_dir.join(PRIVATE_KEY_FILE);
    if !private_path.exists() {
        return Err(Error::MissingKey);
    }
    let private = PrivateKey::from_json(&std::fs::read_to_string(private_path)?)?;
    Opener::from_parts(public, private)
}

/// Parse "label:len,label:len" into a schema.
fn parse_blocks(spec: &str) -> Result<BlockSchema> {
    let mut pairs = Vec::new();
    for part in spec.split(',') {
        let (label, len) = part.split_once(':').ok_or_else(|| {
            Error::InvalidArgument(format!("block spec {part:?} is not label:len"))
        })?;
        let len: usize = len
            .trim()
            .parse()
            .map_err(|_| Error::InvalidArgument(format!("block length {len:?} is not a number")))?;
        pairs.push((label.trim().to_string(), len));
    }
    BlockSchema::new(pairs)
}

/// Schema from explicit blocks, an explicit dimension, or the input file's
/// first row. Four-way music labels when the dimension allows, a single
/// block otherwise.
fn resolve_schema(
    blocks: &Option<String>,
    dim: &Option<usize>,
    input: &Path,
) -> Result<BlockSchema> {
    if let Some(spec) = blocks {
        return parse_blocks(spec);
    }
    let dim = match dim {
        Some(d) => *d,
        None => peek_dimension(input)?,
    };
    if dim % 4 == 0 {
        BlockSchema::default_music(dim)
    } else {
        BlockSchema::equal_partition(dim, 1)
    }
}

fn peek_dimension(input: &Path) -> Result<usize> {
    use std::io::BufRead;
    let file = std::fs::File::open(input)?;
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: serde_json::Value = serde_json::from_str(&line)?;
        let values = row
            .get("values")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::Ingest {
                line: 1,
                msg: "row has no values array".into(),
            })?;
        return Ok(values.len());
    }
    Err(Error::InvalidArgument(format!(
        "{} contains no vectors to infer a dimension from",
        input.display()
    )))
}

fn print_budget(pk: &PublicKey, cfg: &ScaleConfig, dim: usize) -> Result<()> {
    let budget = ppmir::overflow_budget(cfg, dim, pk.modulus());
    if budget.holds {
        if budget.max_dim == usize::MAX {
            println!(
                "overflow budget ok: dimension {dim} (no practical dimension limit at this scale)"
            );
        } else {
            println!(
                "overflow budget ok: dimension {dim} (maximum safe dimension {})",
                budget.max_dim
            );
        }
        Ok(())
    } else {
        Err(Error::BudgetExceeded {
            dim,
            max_dim: budget.max_dim,
        })
    }
}

fn randomness_from(seed: Option<u64>) -> Randomness {
    match seed {
        Some(s) => Randomness::Seeded(s),
        None => Randomness::System,
    }
}

fn run_init_db(args: InitDbArgs) -> Result<()> {
    let cfg: ScaleConfig = args.scale.into();
    let schema = resolve_schema(&args.blocks, &args.dim, &args.input)?;
    let mut vectors = ingest_jsonl(&args.input, &schema)?;
    if args.normalize {
        vectors = vectors.iter().map(|v| v.l2_normalized()).collect();
    }
    if vectors.is_empty() {
        eprintln!("warning: input contains no vectors; writing an empty database");
    }
    save_plain_db(&args.out, &schema, &cfg, &vectors)?;
    println!(
        "wrote plaintext database of {} vectors at dimension {} to {}",
        vectors.len(),
        schema.total_dim(),
        args.out.display()
    );
    Ok(())
}

fn run_encrypt_db(args: EncryptDbArgs) -> Result<()> {
    let pk = load_public_key(&args.keys)?;
    let cfg: ScaleConfig = args.scale.into();
    let schema = resolve_schema(&args.blocks, &args.dim, &args.input)?;
    let vectors = ingest_jsonl(&args.input, &schema)?;
    print_budget(&pk, &cfg, schema.total_dim())?;

    if vectors.is_empty() {
        eprintln!("warning: input contains no vectors; writing an empty database");
    }
    let encrypted = ppmir::store::encrypt_collection(
        &vectors,
        &pk,
        &cfg,
        randomness_from(args.seed),
        Parallelism::Parallel,
    )?;
    save_encrypted_db(&args.out, &schema, &cfg, pk.key_id(), &encrypted)?;
    println!(
        "encrypted {} vectors at dimension {} into {}",
        encrypted.len(),
        schema.total_dim(),
        args.out.display()
    );
    Ok(())
}

fn run_encrypt_query(args: EncryptQueryArgs) -> Result<()> {
    let pk = load_public_key(&args.keys)?;
    let cfg: ScaleConfig = args.scale.into();
    let schema = resolve_schema(&args.blocks, &args.dim, &args.input)?;
    let vectors = ingest_jsonl(&args.input, &schema)?;
    print_budget(&pk, &cfg, schema.total_dim())?;

    let vector = match &args.id {
        Some(id) => vectors
            .iter()
            .find(|v| &v.id == id)
            .ok_or_else(|| Error::InvalidArgument(format!("no vector with id {id:?} in input")))?,
        None => vectors
            .first()
            .ok_or_else(|| Error::InvalidArgument("input contains no vectors".into()))?,
    };
    let encrypted = ppmir::store::encrypt_collection(
        std::slice::from_ref(vector),
        &pk,
        &cfg,
        randomness_from(args.seed),
        Parallelism::Sequential,
    )?
    .remove(0);

    let wire = QueryFile::from_vector(&encrypted);
    std::fs::write(&args.out, serde_json::to_string_pretty(&wire)?)?;
    println!(
        "encrypted query {:?} written to {}",
        encrypted.id,
        args.out.display()
    );
    Ok(())
}

fn parse_weights(spec: &Option<String>) -> Result<Option<WeightVector>> {
    let Some(spec) = spec else { return Ok(None) };
    let weights = spec
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("weight {w:?} is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Some(WeightVector(weights)))
}

fn read_manifest(db_dir: &Path) -> Result<Manifest> {
    let path = db_dir.join("manifest.json");
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

fn run_search(args: SearchArgs) -> Result<()> {
    let manifest = read_manifest(&args.db)?;
    let kind = match (args.kind, parse_weights(&args.weights)?) {
        (KindArg::Plain, _) => SearchKind::Plain,
        (KindArg::Blocked, _) => SearchKind::Blocked,
        (KindArg::Weighted, Some(w)) => SearchKind::Weighted(w),
        (KindArg::Weighted, None) => {
            return Err(Error::InvalidArgument(
                "--kind weighted requires --weights".into(),
            ))
        }
    };

    let query_is_encrypted = args
        .query
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));

    // Load the query.
    let enc_query;
    let plain_query;
    let query_ref = if query_is_encrypted {
        let wire: QueryFile = serde_json::from_str(&std::fs::read_to_string(&args.query)?)?;
        enc_query = wire.into_vector()?;
        QueryRef::Encrypted(&enc_query)
    } else {
        let vectors = ingest_jsonl(&args.query, &manifest.schema)?;
        plain_query = vectors
            .into_iter()
            .next()
            .ok_or_else(|| Error::InvalidArgument("query file contains no vectors".into()))?;
        QueryRef::Plain(&plain_query)
    };

    // Load the database and run.
    let result = match manifest.mode {
        DbMode::Plain => {
            let db = load_plain_db(&args.db)?;
            let opener = match (&query_ref, &args.keys) {
                (QueryRef::Plain(_), _) => None,
                (QueryRef::Encrypted(_), Some(dir)) => Some(load_opener(dir)?),
                (QueryRef::Encrypted(_), None) => return Err(Error::MissingKey),
            };
            topk_search(
                query_ref,
                TargetRef::Plain(&db.vectors),
                &db.schema,
                &db.scale,
                &kind,
                args.k,
                opener.as_ref(),
                Parallelism::Parallel,
            )?
        }
        DbMode::Encrypted => {
            let db = load_encrypted_db(&args.db)?;
            let opener = load_opener(args.keys.as_deref().ok_or(Error::MissingKey)?)?;
            topk_search(
                query_ref,
                TargetRef::Encrypted(&db.vectors),
                &db.schema,
                &db.scale,
                &kind,
                args.k,
                Some(&opener),
                Parallelism::Parallel,
            )?
        }
    };

    // Table plus JSON, stable and script-friendly.
    println!(
        "{:<6} {:<24} {:>14}  {:<9} setting",
        "rank", "id", "score", "kind"
    );
    for hit in &result.hits {
        println!(
            "{:<6} {:<24} {:>14.6}  {:<9} {}",
            hit.rank,
            hit.target_id,
            hit.score.value,
            hit.score.kind.as_str(),
            hit.score.setting.as_str()
        );
    }
    let json = serde_json::json!({
        "query": result.hits.first().map(|h| h.score.query_id.clone()),
        "hits": result.hits.iter().map(|h| {
            serde_json::json!({
                "rank": h.rank,
                "id": h.target_id,
                "score": h.score.value,
                "kind": h.score.kind.as_str(),
                "setting": h.score.setting.as_str(),
            })
        }).collect::<Vec<_>>(),
    });
    match &args.out {
        Some(path) => std::fs::write(path, serde_json::to_string_pretty(&json)?)?,
        None => println!("{json}"),
    }
    Ok(())
}

fn parse_dims(spec: &str) -> Result<Vec<usize>> {
    spec.split(',')
        .map(|d| {
            d.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidArgument(format!("dimension {d:?} is not a number")))
        })
        .collect()
}

fn run_bench_cmd(args: BenchArgs) -> Result<()> {
    gate_key_bits(args.bits, args.insecure_test_keys)?;
    let cfg = BenchConfig {
        dims: parse_dims(&args.dims)?,
        corpus_size: args.n,
        reps: args.reps,
        warmup: args.warmup,
        seed: args.seed,
        key_bits: args.bits,
        scale: args.scale.into(),
        encrypt_mode: Parallelism::Parallel,
        eval_mode: if args.parallel {
            Parallelism::Parallel
        } else {
            Parallelism::Sequential
        },
    };

    println!(
        "running sweep: dims={:?} N={} reps={} key_bits={}",
        cfg.dims, cfg.corpus_size, cfg.reps, cfg.key_bits
    );
    let results = ppmir::bench::run_all(&cfg)?;
    let (results_csv, ratios_csv) = ppmir::bench::emit_report(&results, &args.out)?;
    std::fs::write(
        args.out.join("results.json"),
        serde_json::to_string_pretty(&results)?,
    )?;

    print_bench_table(&results);
    print_bench_summary(&results);
    match ratios_csv {
        Some(path) => println!("wrote {} and {}", results_csv.display(), path.display()),
        None => {
            println!(
                "wrote {} (no ratios.csv: sweep lacks the plaintext d=128 baseline)",
                results_csv.display()
            );
        }
    }
    Ok(())
}

fn print_bench_table(results: &[BenchResult]) {
    println!(
        "{:<16} {:>5} {:>6} {:>12} {:>12} {:>12} {:>12} {:>14}",
        "setting", "dim", "N", "keygen_ms", "encrypt_ms", "eval_med_ms", "decrypt_ms", "ct_bytes"
    );
    for r in results {
        println!(
            "{:<16} {:>5} {:>6} {:>12.3} {:>12.3} {:>12.3} {:>12.3} {:>14}",
            r.setting.as_str(),
            r.dimension,
            r.corpus_size,
            r.keygen_ms,
            r.encryption_ms,
            r.eval_median_ms,
            r.decryption_ms,
            r.ciphertext_bytes
        );
    }
}

fn print_bench_summary(results: &[BenchResult]) {
    for setting in [Setting::EncryptedDb, Setting::EncryptedQuery] {
        let mut points: Vec<(f64, f64)> = results
            .iter()
            .filter(|r| r.setting == setting)
            .map(|r| (r.dimension as f64, r.eval_median_ms))
            .collect();
        points.sort_by(|a, b| a.0.total_cmp(&b.0));
        if points.len() >= 2 {
            let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
            let (slope, _, r2) = fit_line(&xs, &ys);
            println!(
                "{}: evaluation time vs dimension fits slope {:.4} ms/dim with r^2 {:.4}",
                setting.as_str(),
                slope,
                r2
            );
        }
    }

    let db = results.iter().find(|r| r.setting == Setting::EncryptedDb);
    let query = results
        .iter()
        .find(|r| r.setting == Setting::EncryptedQuery);
    if let (Some(db), Some(query)) = (db, query) {
        println!(
            "end-to-end (setup + one scan) at d={}: encrypted_db {:.1} ms vs encrypted_query {:.1} ms; stored ciphertext bytes {} vs {}",
            db.dimension,
            db.end_to_end_ms(),
            query.end_to_end_ms(),
            db.ciphertext_bytes,
            query.ciphertext_bytes
        );
    }
}

fn run_attack_pattern(args: PatternArgs) -> Result<()> {
    gate_key_bits(args.bits, args.insecure_test_keys)?;
    let schema = BlockSchema::default_music(args.dim)?;
    let cfg = ScaleConfig::default();
    let profile = CorpusProfile::PlantedPattern {
        block_label: args.block.clone(),
        pattern_seed: args.pattern_seed,
        strength: args.strength,
        planted: args.planted,
    };
    let corpus = synth_corpus(args.seed, args.count, &schema, &profile)?;
    let GroundTruth::Planted { ids, pattern } = &corpus.truth else {
        unreachable!("planted profile yields planted truth");
    };

    let mut rng = Randomness::System.stream(0);
    let opener = Opener::new(keygen(args.bits, &mut rng)?);
    let encrypted = ppmir::store::encrypt_collection(
        &corpus.vectors,
        opener.public(),
        &cfg,
        Randomness::Seeded(args.seed ^ 0xa11),
        Parallelism::Parallel,
    )?;

    let policy = match args.threshold {
        Some(t) => ThresholdPolicy::Fixed(t),
        None => ThresholdPolicy::default(),
    };
    let report = pattern_inference_attack(
        pattern,
        &args.block,
        &encrypted,
        &schema,
        &cfg,
        &opener,
        &policy,
        ids,
        args.seed,
        &profile.describe(),
        Parallelism::Parallel,
    )?;

    // Cross-check: the attacker reaches the same decisions from exact
    // plaintext scores, demonstrating the leak is in the scores themselves.
    let probe = craft_pattern_query(pattern, &args.block, &schema)?;
    let plain_scores: Vec<f64> = corpus
        .vectors
        .iter()
        .map(|y| ppmir::plain_inner(&probe, y).map(|s| s.value))
        .collect::<Result<Vec<_>>>()?;
    let (_, plain_decisions) = threshold_decisions(&plain_scores, &policy);
    let enc_scores: Vec<f64> = report.per_target.iter().map(|t| t.score).collect();
    let (_, enc_decisions) = threshold_decisions(&enc_scores, &policy);
    let agree = plain_decisions == enc_decisions;

    println!("{}", report.summary());
    println!(
        "encrypted-path decisions match plaintext-oracle decisions: {}",
        if agree { "yes" } else { "NO" }
    );
    if let Some(out) = &args.out {
        std::fs::write(out, serde_json::to_string_pretty(&report)?)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn run_attack_creator(args: CreatorArgs) -> Result<()> {
    gate_key_bits(args.bits, args.insecure_test_keys)?;
    if args.artists < 2 {
        return Err(Error::InvalidArgument(
            "creator attribution needs at least two artists".into(),
        ));
    }
    let schema = BlockSchema::default_music(args.dim)?;
    let cfg = ScaleConfig::default();
    let profile = CorpusProfile::ArtistClusters {
        num_artists: args.artists,
        spread: args.spread,
    };
    let count = args.artists * args.per_artist;

    let mut rng = Randomness::System.stream(0);
    let opener = Opener::new(keygen(args.bits, &mut rng)?);

    let mut correct = 0usize;
    let mut agreeing = 0usize;
    let mut trials_json = Vec::new();
    for trial in 0..args.trials {
        let corpus_seed = args.seed.wrapping_add(trial as u64);
        let corpus = synth_corpus(corpus_seed, count, &schema, &profile)?;
        let GroundTruth::Clustered { centroids } = &corpus.truth else {
            unreachable!()
        };

        // Disputed track: a fresh draw near one artist's centroid.
        let mut trial_rng = Randomness::Seeded(corpus_seed ^ 0xd15).stream(0);
        let owner = trial_rng.gen_range(0..args.artists);
        let (owner_name, centroid) = &centroids[owner];
        let values: Vec<f64> = centroid
            .iter()
            .map(|c| c + args.spread * trial_rng.gen_range(-1.0..1.0))
            .collect();
        let disputed = EmbeddingVector::new(format!("disputed-{trial}"), None, values, &schema)?;

        let encrypted = ppmir::store::encrypt_collection(
            &corpus.vectors,
            opener.public(),
            &cfg,
            Randomness::Seeded(corpus_seed ^ 0xe2c),
            Parallelism::Parallel,
        )?;
        let report = creator_attribution_attack(
            &disputed,
            &encrypted,
            &cfg,
            &opener,
            corpus_seed,
            &profile.describe(),
            Parallelism::Parallel,
        )?;
        let AttackMetrics::CreatorAttribution {
            attribution,
            margin,
            inconclusive,
            ..
        } = &report.metrics
        else {
            unreachable!()
        };

        let AttackMetrics::CreatorAttribution {
            attribution: oracle_attr,
            ..
        } = plaintext_attribution(&disputed, &corpus.vectors)?
        else {
            unreachable!()
        };

        if attribution == owner_name {
            correct += 1;
        }
        if attribution == &oracle_attr {
            agreeing += 1;
        }
        trials_json.push(serde_json::json!({
            "trial": trial,
            "seed": corpus_seed,
            "truth": owner_name,
            "attribution": attribution,
            "oracle_attribution": oracle_attr,
            "margin": margin,
            "inconclusive": inconclusive,
        }));
    }

    let accuracy = correct as f64 / args.trials as f64;
    let agreement = agreeing as f64 / args.trials as f64;
    println!(
        "creator attribution over {} trials: accuracy {:.3}, oracle agreement {:.3}",
        args.trials, accuracy, agreement
    );
    if let Some(out) = &args.out {
        let json = serde_json::json!({
            "attack": "creator_attribution",
            "profile": profile.describe(),
            "trials": args.trials,
            "accuracy": accuracy,
            "oracle_agreement": agreement,
            "per_trial": trials_json,
        });
        std::fs::write(out, serde_json::to_string_pretty(&json)?)?;
        println!("report written to {}", out.display());
    }
    Ok(())
}

fn run_serve(args: ServeArgs) -> Result<()> {
    let manifest = read_manifest(&args.db)?;
    if manifest.mode != DbMode::Plain {
        return Err(Error::InvalidArgument(
            "serve requires a plaintext database; the encrypted-database setting is a local workflow".into(),
        ));
    }
    let db = load_plain_db(&args.db)?;
    println!(
        "serving {} vectors at dimension {} on {}",
        db.vectors.len(),
        db.schema.total_dim(),
        args.bind
    );

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.bind).await?;
        tokio::select! {
            result = crate::service::serve(listener, db) => result,
            _ = tokio::signal::ctrl_c() => {
                eprintln!("shutting down");
                Ok(())
            }
        }
    })?;
    Ok(())
}

/// Key pair loader used by tests and tools that need both halves.
pub fn load_keypair(keys_dir: &Path) -> Result<KeyPair> {
    let public = load_public_key(keys_dir)?;
    let private_path = keys_dir.join(PRIVATE_KEY_FILE);
    if !private_path.exists() {
        return Err(Error::MissingKey);
    }
    let private = PrivateKey::from_json(&std::fs::read_to_string(private_path)?)?;
    KeyPair::from_parts(public, private)
}
