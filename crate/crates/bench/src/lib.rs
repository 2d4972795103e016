//! Fixtures shared by the benchmarks.

use bmnn_core::{
    gen_mask, gen_synthetic, MaskSpec, ObservationMask, SeededRng, SolverConfig, SolverState,
    Tensor3,
};

pub fn random_tensor(dims: [usize; 3], seed: u64) -> Tensor3 {
    let mut rng = SeededRng::new(seed);
    Tensor3::from_fn(dims, |_, _, _| rng.normal())
}

/// Half-observed synthetic cube of side `n` with a BM-rank 3 ground truth.
pub fn synthetic_problem(n: usize, seed: u64) -> (Tensor3, ObservationMask) {
    let (truth, _) = gen_synthetic([n, n, n], 3, 2, seed).expect("valid synthetic spec");
    let spec = MaskSpec {
        sample_rate: 0.5,
        seed: seed + 1,
        dims: truth.dims(),
    };
    let mask = gen_mask(&spec, &truth).expect("mask matches truth");
    (truth, mask)
}

/// Freshly initialized solver state at BM-rank `l`.
pub fn solver_state(n: usize, l: usize) -> (SolverState, SolverConfig, ObservationMask) {
    let (_, mask) = synthetic_problem(n, 17);
    let cfg = SolverConfig {
        bm_rank: l,
        ..Default::default()
    };
    let state = SolverState::init(&mask, &cfg).expect("valid default config");
    (state, cfg, mask)
}
