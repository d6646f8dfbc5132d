//! Fixture builders shared by the benchmark targets: deterministic random
//! vectors, a mid-sized classification design, and its serialized form.
//! Everything is seeded so benchmark numbers are comparable across runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use normap::{gen_synthetic_classification, write_libsvm, SparseDesign};

/// A standard-normal vector from a fixed seed.
pub fn dense_vec(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.sample(StandardNormal)).collect()
}

/// The benchmark classification design: 2000 samples, 500 features, 5%
/// density — the same shape the solver benchmarks drive minibatches through.
pub fn classification_design() -> SparseDesign {
    gen_synthetic_classification(2000, 500, 0.05, 1).expect("valid generator parameters")
}

/// The design above serialized to the text format, for parser throughput.
pub fn classification_bytes() -> Vec<u8> {
    let design = classification_design();
    let mut out = Vec::new();
    write_libsvm(&design, &mut out).expect("writing to memory cannot fail");
    out
}
