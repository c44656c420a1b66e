//! Store-level invariants across the supported embedding lengths.

use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use ppmir::store::{encrypt_collection, synth_corpus, write_jsonl, CorpusProfile};
use ppmir::{keygen, BlockSchema, Parallelism, Randomness, ScaleConfig};

#[test]
fn encrypted_round_trip_across_dimensions() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed_2000);
    let keys = keygen(512, &mut rng).unwrap();
    let cfg = ScaleConfig::default();
    let tol = 0.5 / cfg.coordinate_scale();

    for dim in [128usize, 256, 512, 1024] {
        let schema = BlockSchema::default_music(dim).unwrap();
        let corpus = synth_corpus(dim as u64, 3, &schema, &CorpusProfile::Uniform).unwrap();
        let encrypted = encrypt_collection(
            &corpus.vectors,
            &keys.public,
            &cfg,
            Randomness::Seeded(1),
            Parallelism::Parallel,
        )
        .unwrap();

        for (plain, enc) in corpus.vectors.iter().zip(&encrypted) {
            assert_eq!(plain.id, enc.id);
            for (x, cell) in plain.values().iter().zip(enc.cells()) {
                let decoded =
                    keys.decrypt(cell).unwrap().value().to_f64().unwrap() / cfg.coordinate_scale();
                assert!((decoded - x).abs() <= tol, "dim {dim}: {decoded} vs {x}");
            }
        }
    }
}

#[test]
fn thousand_vector_ingest_round_trip() {
    let schema = BlockSchema::default_music(128).unwrap();
    let corpus = synth_corpus(0x1000, 1000, &schema, &CorpusProfile::Uniform).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_jsonl(&path, &corpus.vectors).unwrap();

    let loaded = ppmir::ingest_jsonl(&path, &schema).unwrap();
    assert_eq!(loaded.len(), 1000);
    assert_eq!(loaded, corpus.vectors);

    let ids: std::collections::HashSet<&str> = loaded.iter().map(|v| v.id.as_str()).collect();
    assert_eq!(ids.len(), 1000, "ids are unique");
}

#[test]
fn equal_seeds_serialize_byte_identically() {
    let schema = BlockSchema::default_music(32).unwrap();
    let profile = CorpusProfile::ArtistClusters {
        num_artists: 3,
        spread: 0.2,
    };

    let dir = tempfile::tempdir().unwrap();
    let a_path = dir.path().join("a.jsonl");
    let b_path = dir.path().join("b.jsonl");

    let a = synth_corpus(99, 30, &schema, &profile).unwrap();
    let b = synth_corpus(99, 30, &schema, &profile).unwrap();
    write_jsonl(&a_path, &a.vectors).unwrap();
    write_jsonl(&b_path, &b.vectors).unwrap();

    assert_eq!(
        std::fs::read(&a_path).unwrap(),
        std::fs::read(&b_path).unwrap()
    );
}
