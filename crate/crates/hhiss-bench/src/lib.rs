//! Shared setup for the pipeline benchmarks.

use hhiss::data::FeatureDataset;
use hhiss::net::{NetworkArch, NetworkParams};
use hhiss::rng;
use hhiss::synthgen::{generate_domains, SyntheticSpec};
use hhiss::trainer::TrainConfig;

/// Synthetic training set sized like a small study cohort.
pub fn bench_dataset() -> FeatureDataset {
    let spec = SyntheticSpec {
        n_subjects: 16,
        windows_per_subject: 40,
        ..SyntheticSpec::default()
    };
    let (train, _) = generate_domains(&spec).expect("valid spec");
    train
}

/// A dense model initialized for the benchmark dataset.
pub fn bench_model(dataset: &FeatureDataset, hidden: &[usize]) -> NetworkParams {
    let mut sizes = vec![dataset.n_features()];
    sizes.extend_from_slice(hidden);
    sizes.push(2);
    let arch = NetworkArch::new(sizes).expect("valid arch");
    let mut rng = rng::stream(0, rng::salt::INIT, 0);
    NetworkParams::init(arch, &mut rng)
}

/// A short training schedule: big enough to exercise every phase, small
/// enough to iterate.
pub fn bench_config() -> TrainConfig {
    TrainConfig {
        hidden_sizes: vec![64, 64],
        learning_rate: 1e-3,
        stage1_epochs: 5,
        rounds: 2,
        inner_epoch_cap: 3,
        ..TrainConfig::default()
    }
}
