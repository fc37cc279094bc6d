use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::model::{Architecture, ParamAssignment};
use crate::par::Execution;
use crate::rational::{q, Q};

pub const DEFAULT_SEED: u64 = 20_240_917;
pub const DEFAULT_COEFF_BOUND: i64 = 100;
pub const DEFAULT_VERIFY_SAMPLES: usize = 64;
pub const DEFAULT_RANK_SAMPLES: usize = 8;

/// How integer parameter samples are drawn and how they are processed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleSpec {
    pub master_seed: u64,
    pub num_samples: usize,
    /// Entries are uniform over the integers in `[-coeff_bound, coeff_bound]`.
    pub coeff_bound: i64,
    #[serde(skip)]
    pub execution: Execution,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            master_seed: DEFAULT_SEED,
            num_samples: DEFAULT_VERIFY_SAMPLES,
            coeff_bound: DEFAULT_COEFF_BOUND,
            execution: Execution::default(),
        }
    }
}

impl SampleSpec {
    pub fn new(master_seed: u64, num_samples: usize, coeff_bound: i64) -> Self {
        Self {
            master_seed,
            num_samples: num_samples.max(1),
            coeff_bound: coeff_bound.max(1),
            execution: Execution::default(),
        }
    }

    pub fn with_samples(self, num_samples: usize) -> Self {
        Self {
            num_samples: num_samples.max(1),
            ..self
        }
    }

    pub fn with_execution(self, execution: Execution) -> Self {
        Self { execution, ..self }
    }
}

/// Uniform integers in `[-B, B]`, deterministic in `(master_seed, index)`.
pub fn sample_integers(spec: &SampleSpec, index: usize, count: usize) -> Vec<Q> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.master_seed);
    rng.set_stream(index as u64);
    let b = spec.coeff_bound.max(1);
    (0..count).map(|_| q(rng.gen_range(-b..=b))).collect()
}

/// Parameters for sample `index`: weights layer by layer in row-major order,
/// then biases.
pub fn sample_params(arch: &Architecture, spec: &SampleSpec, index: usize) -> ParamAssignment {
    let flat = sample_integers(spec, index, arch.param_count());
    ParamAssignment::from_flat(arch, &flat).expect("sample has the architecture's parameter count")
}
