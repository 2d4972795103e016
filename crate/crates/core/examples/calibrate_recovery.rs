//! Ten-seed recovery run on the 30³, BM-rank 3, slice-rank 2 family at half
//! sampling with default parameters; prints final RE next to the mean-fill
//! baseline for each seed.
//!
//! `cargo run --release -p bmnn-core --example calibrate_recovery [seeds]`

use bmnn_core::{gen_mask, gen_synthetic, relative_error, run, MaskSpec, SolverConfig, Tensor3};

fn main() -> bmnn_core::Result<()> {
    let seeds: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(10);
    let mut worst: f64 = 0.0;
    for seed in 0..seeds {
        let (gt, _) = gen_synthetic([30, 30, 30], 3, 2, seed)?;
        let mask = gen_mask(
            &MaskSpec {
                sample_rate: 0.5,
                seed: 1000 + seed,
                dims: gt.dims(),
            },
            &gt,
        )?;
        let mut fill = Tensor3::filled(gt.dims(), mask.observed_mean());
        mask.project_in_place(&mut fill)?;
        let baseline = relative_error(&fill, &gt)?;

        let cfg = SolverConfig {
            tol: 0.0,
            seed: 2000 + seed,
            ..Default::default()
        };
        let out = run(&mask, &cfg, Some(&gt))?;
        let re = out.report.final_re().unwrap_or(f64::NAN);
        worst = worst.max(re);
        println!(
            "seed {seed}: RE {re:.5}  mean fill {baseline:.4}  ratio {:.1}  {}",
            baseline / re,
            out.report.status
        );
    }
    println!("worst RE {worst:.5}");
    Ok(())
}
