//! The quantization error bound holds across the embedding lengths the
//! engine targets, on a thousand random pairs per length.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use ppmir::ahe::PlainInteger;
use ppmir::codec::{decode_product, encode, ScaleConfig};

#[test]
fn product_error_bound_holds_across_dimensions() {
    let cfg = ScaleConfig::default();
    let mut rng = ChaCha20Rng::seed_from_u64(0xb0a2d);
    for dim in [128usize, 256, 512, 1024] {
        let bound = cfg.product_error_bound(dim);
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let exact: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();

            let mut acc = num_bigint::BigInt::from(0u8);
            for (a, b) in x.iter().zip(&y) {
                acc += encode(*a, &cfg).unwrap().value() * encode(*b, &cfg).unwrap().value();
            }
            let decoded = decode_product(&PlainInteger::new(acc), &cfg, false);
            let err = (decoded - exact).abs();
            worst = worst.max(err);
            assert!(err <= bound, "dim {dim}: error {err} above bound {bound}");
        }
        // The bound is a worst case; typical error sits far beneath it.
        assert!(worst <= bound);
    }
}
