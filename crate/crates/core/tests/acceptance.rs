//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::time::Instant;

use bmnn_core::io::{decode_tensor, encode_tensor};
use bmnn_core::{
    bmp, bmp_transpose_identity_check, fold, gen_mask, gen_synthetic, halrtc_run_observed,
    mat_blocks, relative_error, run, run_observed, svt, unfold, with_threads, HalrtcConfig,
    MaskSpec, Matrix, ObservationMask, SeededRng, SolverConfig, SolverState, Status, Tensor3,
};
use common::*;

/// Relative tolerance for exact-algebra identities.
const ALGEBRA_TOL: f64 = 1e-12;
/// Blockwise A2 update vs the stacked least-squares solve.
const RALS_TOL: f64 = 1e-9;
/// Final RE on the 30³ synthetic family, frozen from a 10-seed calibration
/// (worst seed 0.056).
const RECOVERY_TAU: f64 = 0.065;
const RECOVERY_MEAN_FILL_FACTOR: f64 = 5.0;
/// HaLRTC on rank-one data after 200 iterations, frozen from a 10-seed
/// calibration (worst seed 1.1e-4).
const HALRTC_TAU: f64 = 1e-3;
const COMPLEXITY_SLACK: f64 = 2.5;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn small_dims(rng: &mut SeededRng) -> ([usize; 3], usize) {
    let mut d = || 1 + (rng.uniform() * 8.0) as usize;
    let dims = [d(), d(), d()];
    let l = 1 + (rng.uniform() * 4.0) as usize;
    (dims, l)
}

fn bmp_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let (dims, l) = small_dims(&mut rng);
        let f = random_factors(dims, l, &mut rng);
        let err = rel(&bmp(&f), &bmp_loops(&f.a1, &f.a2, &f.a3));
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= ALGEBRA_TOL, || format!("worst rel err {worst:e}"))?;
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "200 instances, worst rel err {worst:.1e}, {secs:.3}s"
    ))
}

fn mat_tvec_identity() -> Outcome {
    let start = Instant::now();
    let mut rng = SeededRng::new(102);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (dims, l) = small_dims(&mut rng);
        let f = random_factors(dims, l, &mut rng);
        let applied = mat_blocks(&f.a1, &f.a3)
            .and_then(|m| m.apply(f.a2.tvec()))
            .map_err(|e| e.to_string())?;
        let lhs = Tensor3::tfold(applied, dims).map_err(|e| e.to_string())?;
        worst = worst.max(rel(&lhs, &bmp(&f)));
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= ALGEBRA_TOL, || format!("worst rel err {worst:e}"))?;
    ensure(secs < 5.0, || format!("took {secs:.2}s"))?;
    Ok(format!(
        "100 instances, worst rel err {worst:.1e}, {secs:.3}s"
    ))
}

fn transpose_identities() -> Outcome {
    let mut rng = SeededRng::new(103);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (dims, l) = small_dims(&mut rng);
        let f = random_factors(dims, l, &mut rng);
        let x = bmp(&f);
        let back = x.transpose_cycle().transpose_cycle().transpose_cycle();
        ensure(
            back.as_slice()
                .iter()
                .zip(x.as_slice())
                .all(|(a, b)| a.to_bits() == b.to_bits()),
            || "triple transpose is not bitwise identity".into(),
        )?;
        ensure(x.transpose_cycle() == transpose_loops(&x), || {
            "transpose disagrees with index rotation".into()
        })?;
        let rhs = bmp_loops(
            &transpose_loops(&f.a2),
            &transpose_loops(&f.a3),
            &transpose_loops(&f.a1),
        );
        worst = worst.max(rel(&transpose_loops(&x), &rhs));
        ensure(bmp_transpose_identity_check(&f), || {
            "library identity check failed".into()
        })?;
    }
    ensure(worst <= ALGEBRA_TOL, || format!("worst rel err {worst:e}"))?;
    Ok(format!("100 instances, worst rel err {worst:.1e}"))
}

fn svt_objective(z: &Matrix, a: &Matrix, delta: f64) -> f64 {
    let d = z.distance(a);
    delta * nuclear_norm_oracle(z) + 0.5 * d * d
}

fn svt_correctness() -> Outcome {
    let out = svt(&Matrix::diag(&[3.0, 1.0]), 2.0).map_err(|e| e.to_string())?;
    let exact = out.distance(&Matrix::diag(&[1.0, 0.0]));
    ensure(exact <= ALGEBRA_TOL, || {
        format!("diag(3,1) gave error {exact:e}")
    })?;

    let mut rng = SeededRng::new(104);
    let mut beaten = 0;
    let mut tightest = f64::INFINITY;
    for _ in 0..50 {
        let a = Matrix::from_fn(4, 4, |_, _| rng.normal());
        let delta = 0.1 + 2.0 * rng.uniform();
        let z = svt(&a, delta).map_err(|e| e.to_string())?;
        let best = svt_objective(&z, &a, delta);
        for _ in 0..200 {
            let scale = 10f64.powf(-3.0 + 3.0 * rng.uniform());
            let mut p = z.clone();
            for r in 0..4 {
                for c in 0..4 {
                    p.set(r, c, p.get(r, c) + scale * rng.normal());
                }
            }
            let gap = svt_objective(&p, &a, delta) - best;
            tightest = tightest.min(gap);
            if gap < -1e-12 * best.abs().max(1.0) {
                beaten += 1;
            }
        }
    }
    ensure(beaten == 0, || {
        format!("{beaten} perturbations beat the SVT output")
    })?;
    Ok(format!(
        "diag error {exact:.1e}; 50x200 perturbations never better (min gap {tightest:.1e})"
    ))
}

fn rals_decoupling() -> Outcome {
    let mut worst: f64 = 0.0;
    for s in 0..20u64 {
        let mut rng = SeededRng::new(500 + s);
        let t = random_tensor([4, 4, 4], &mut rng);
        let flags = (0..t.len()).map(|_| rng.uniform() < 0.6).collect();
        let mask = ObservationMask::from_tensor(&t, flags).map_err(|e| e.to_string())?;
        let cfg = SolverConfig {
            bm_rank: 2,
            lambda: 0.1 + rng.uniform(),
            mu0: 0.01 + rng.uniform(),
            seed: s,
            ..Default::default()
        };
        let mut state = SolverState::init(&mask, &cfg).map_err(|e| e.to_string())?;
        // advance to a state with nonzero duals
        for _ in 0..(s % 4) {
            state.update_h(&cfg).map_err(|e| e.to_string())?;
            state.rals_sweep(&cfg).map_err(|e| e.to_string())?;
            state.update_x(&mask).map_err(|e| e.to_string())?;
            state.update_duals_and_mu(&cfg);
        }
        state.update_h(&cfg).map_err(|e| e.to_string())?;

        let ratio = state.mu / cfg.lambda;
        let v = state.h[1].add_scaled(&state.y[1], 1.0 / state.mu);
        let expected = monolithic_ridge(&state.factors, 2, &state.x, &v, ratio);
        let mut swept = state.clone();
        swept.rals_sweep(&cfg).map_err(|e| e.to_string())?;
        worst = worst.max(rel(&swept.factors.a2, &expected));
    }
    ensure(worst <= RALS_TOL, || format!("worst rel err {worst:e}"))?;
    Ok(format!("20 states, worst rel err {worst:.1e}"))
}

fn admm_contracts() -> Outcome {
    let (gt, _) = gen_synthetic([20, 20, 20], 3, 2, 6).map_err(|e| e.to_string())?;
    let mask = gen_mask(
        &MaskSpec {
            sample_rate: 0.5,
            seed: 7,
            dims: gt.dims(),
        },
        &gt,
    )
    .map_err(|e| e.to_string())?;
    let cfg = SolverConfig {
        max_iters: 50,
        tol: 0.0,
        seed: 8,
        ..Default::default()
    };

    let mut fidelity_breaks = 0;
    let mut mus = Vec::new();
    let reference = with_threads(1, || {
        run_observed(&mask, &cfg, Some(&gt), |rec, state| {
            mus.push((rec.mu, state.mu));
            if mask.observed().any(|(off, v)| state.x.as_slice()[off] != v) {
                fidelity_breaks += 1;
            }
        })
    })
    .map_err(|e| e.to_string())?
    .map_err(|e| e.to_string())?;
    ensure(fidelity_breaks == 0, || {
        format!("{fidelity_breaks} iterations broke X_Ω = T_Ω")
    })?;
    ensure(reference.report.iterations() == 50, || {
        format!("report has {} records", reference.report.iterations())
    })?;
    ensure(
        mus.windows(2).all(|w| w[1].0 >= w[0].0) && mus.iter().all(|m| m.1 >= m.0),
        || "mu decreased".into(),
    )?;

    let capped_cfg = SolverConfig {
        mu_max: 0.012,
        ..cfg.clone()
    };
    let capped = run(&mask, &capped_cfg, None).map_err(|e| e.to_string())?;
    let mus_capped: Vec<f64> = capped.report.records.iter().map(|r| r.mu).collect();
    ensure(
        mus_capped.iter().all(|m| *m <= capped_cfg.mu_max)
            && *mus_capped.last().unwrap() == capped_cfg.mu_max
            && mus_capped.windows(2).all(|w| w[1] >= w[0]),
        || format!("mu not capped: {:?}", mus_capped.last()),
    )?;

    for threads in [2, 8] {
        let other = with_threads(threads, || run(&mask, &cfg, Some(&gt)))
            .map_err(|e| e.to_string())?
            .map_err(|e| e.to_string())?;
        ensure(
            other.x == reference.x
                && other.factors == reference.factors
                && other.report.same_numerics(&reference.report),
            || format!("{threads} threads differ from 1 thread"),
        )?;
    }
    Ok(format!(
        "50 iterations, fidelity exact, mu monotone and capped, threads 1/2/8 identical (RE {:.3})",
        reference.report.final_re().unwrap_or(f64::NAN)
    ))
}

struct Recovery {
    gt: Tensor3,
    mask: ObservationMask,
    mean_fill_re: f64,
}

fn recovery_instance(seed: u64) -> Result<Recovery, String> {
    let (gt, _) = gen_synthetic([30, 30, 30], 3, 2, seed).map_err(|e| e.to_string())?;
    let mask = gen_mask(
        &MaskSpec {
            sample_rate: 0.5,
            seed: 1000 + seed,
            dims: gt.dims(),
        },
        &gt,
    )
    .map_err(|e| e.to_string())?;
    let mut fill = Tensor3::filled(gt.dims(), mask.observed_mean());
    mask.project_in_place(&mut fill)
        .map_err(|e| e.to_string())?;
    let mean_fill_re = relative_error(&fill, &gt).map_err(|e| e.to_string())?;
    Ok(Recovery {
        gt,
        mask,
        mean_fill_re,
    })
}

fn synthetic_recovery() -> Outcome {
    let inst = recovery_instance(0)?;
    let cfg = SolverConfig {
        max_iters: 500,
        tol: 0.0,
        seed: 2000,
        ..Default::default()
    };
    let start = Instant::now();
    let out = with_threads(1, || run(&inst.mask, &cfg, Some(&inst.gt)))
        .map_err(|e| e.to_string())?
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let re = out.report.final_re().unwrap_or(f64::NAN);
    ensure(out.report.iterations() == 500, || "stopped early".into())?;
    ensure(re <= RECOVERY_TAU, || {
        format!("final RE {re:.4} > {RECOVERY_TAU}")
    })?;
    ensure(re * RECOVERY_MEAN_FILL_FACTOR <= inst.mean_fill_re, || {
        format!("RE {re:.4} not 5x below mean fill {:.4}", inst.mean_fill_re)
    })?;
    ensure(secs < 60.0, || format!("took {secs:.1}s single-threaded"))?;
    Ok(format!(
        "RE {re:.4} (tau {RECOVERY_TAU}), mean fill {:.4}, {secs:.1}s single-threaded",
        inst.mean_fill_re
    ))
}

fn protocol_sweeps() -> Outcome {
    let inst = recovery_instance(0)?;
    let base = SolverConfig {
        mu0: 0.001,
        rho: 1.01,
        max_iters: 500,
        tol: 0.0,
        seed: 2000,
        ..Default::default()
    };
    let mut lambda_re = Vec::new();
    for lambda in [0.05, 0.2, 1.0, 5.0] {
        let cfg = SolverConfig {
            lambda,
            ..base.clone()
        };
        let out = run(&inst.mask, &cfg, Some(&inst.gt)).map_err(|e| e.to_string())?;
        lambda_re.push((lambda, out.report.final_re().unwrap_or(f64::NAN)));
    }
    let large = lambda_re[3].1;
    ensure(lambda_re[..2].iter().all(|(_, re)| *re <= large), || {
        format!("lambda < 1 not better than lambda = 5: {lambda_re:?}")
    })?;

    let mut rho_status = Vec::new();
    for rho in [1.01, 1.05, 1.1] {
        let cfg = SolverConfig {
            rho,
            ..base.clone()
        };
        let out = run(&inst.mask, &cfg, Some(&inst.gt)).map_err(|e| e.to_string())?;
        rho_status.push((
            rho,
            out.report.status,
            out.report.final_re().unwrap_or(f64::NAN),
        ));
    }
    ensure(
        rho_status
            .iter()
            .any(|(r, s, _)| *r == 1.05 && *s != Status::Diverged),
        || format!("rho = 1.05 diverged: {rho_status:?}"),
    )?;
    let lambdas: Vec<String> = lambda_re
        .iter()
        .map(|(l, re)| format!("{l}:{re:.3}"))
        .collect();
    let rhos: Vec<String> = rho_status
        .iter()
        .map(|(r, s, re)| format!("{r}:{s}/{re:.3}"))
        .collect();
    Ok(format!(
        "lambda RE [{}]; rho [{}]",
        lambdas.join(" "),
        rhos.join(" ")
    ))
}

fn halrtc_sanity() -> Outcome {
    let mut rng = SeededRng::new(0);
    let n = 30;
    let u: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let v: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
    let gt = Tensor3::from_fn([n, n, n], |i, j, k| u[i] * v[j] * w[k]);
    let mask = gen_mask(
        &MaskSpec {
            sample_rate: 0.5,
            seed: 100,
            dims: gt.dims(),
        },
        &gt,
    )
    .map_err(|e| e.to_string())?;
    let cfg = HalrtcConfig {
        max_iters: 200,
        tol: 0.0,
        ..Default::default()
    };
    let mut breaks = 0;
    let (_, report) = halrtc_run_observed(&mask, &cfg, Some(&gt), |_, x| {
        if mask.observed().any(|(off, val)| x.as_slice()[off] != val) {
            breaks += 1;
        }
    })
    .map_err(|e| e.to_string())?;
    let re = report.final_re().unwrap_or(f64::NAN);
    ensure(breaks == 0, || {
        format!("{breaks} iterations broke fidelity")
    })?;
    ensure(report.iterations() <= 200 && re <= HALRTC_TAU, || {
        format!("RE {re:e} after {} iterations", report.iterations())
    })?;

    for _ in 0..50 {
        let dims = [
            1 + (rng.uniform() * 7.0) as usize,
            1 + (rng.uniform() * 7.0) as usize,
            1 + (rng.uniform() * 7.0) as usize,
        ];
        let x = random_tensor(dims, &mut rng);
        for mode in 1..=3 {
            let back = unfold(&x, mode)
                .and_then(|m| fold(&m, mode, dims))
                .map_err(|e| e.to_string())?;
            ensure(back == x, || {
                format!("fold/unfold mode {mode} not inverse on {dims:?}")
            })?;
        }
    }
    Ok(format!(
        "rank-1 RE {re:.1e} in {} iterations; fold/unfold exact on 50 tensors",
        report.iterations()
    ))
}

fn time_update_h(l: usize) -> Result<f64, String> {
    let mut rng = SeededRng::new(9);
    let t = random_tensor([64, 64, 64], &mut rng);
    let flags = (0..t.len()).map(|_| rng.uniform() < 0.5).collect();
    let mask = ObservationMask::from_tensor(&t, flags).map_err(|e| e.to_string())?;
    let cfg = SolverConfig {
        bm_rank: l,
        ..Default::default()
    };
    let state = SolverState::init(&mask, &cfg).map_err(|e| e.to_string())?;
    let mut times = Vec::new();
    for _ in 0..7 {
        let mut s = state.clone();
        let start = Instant::now();
        s.update_h(&cfg).map_err(|e| e.to_string())?;
        times.push(start.elapsed().as_secs_f64());
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

fn complexity_smoke() -> Outcome {
    let times = with_threads(1, || -> Result<Vec<f64>, String> {
        [2, 4, 8].iter().map(|&l| time_update_h(l)).collect()
    })
    .map_err(|e| e.to_string())??;
    for (idx, l) in [(1, 4.0), (2, 8.0)] {
        let ratio = times[idx] / times[0];
        let allowed = COMPLEXITY_SLACK * l / 2.0;
        ensure(ratio <= allowed, || {
            format!("t({l})/t(2) = {ratio:.2} > {allowed}")
        })?;
    }
    Ok(format!(
        "median update_h at n=64: l=2 {:.2}ms, l=4 {:.2}ms, l=8 {:.2}ms",
        times[0] * 1e3,
        times[1] * 1e3,
        times[2] * 1e3
    ))
}

fn serialization() -> Outcome {
    let mut rng = SeededRng::new(111);
    let mut tensors = Vec::new();
    for _ in 0..99 {
        let (dims, _) = small_dims(&mut rng);
        tensors.push(random_tensor(dims, &mut rng));
    }
    // awkward bit patterns ride along in the first tensor
    let specials = [
        0.0,
        -0.0,
        f64::MIN_POSITIVE / 3.0,
        f64::MAX,
        f64::INFINITY,
        f64::NAN,
    ];
    for (v, s) in tensors[0].as_mut_slice().iter_mut().zip(specials) {
        *v = s;
    }
    tensors.push(Tensor3::from_fn([144, 256, 40], |_, _, _| rng.uniform()));
    for x in &tensors {
        let back = decode_tensor(&encode_tensor(x)).map_err(|e| e.to_string())?;
        ensure(
            back.dims() == x.dims()
                && back
                    .as_slice()
                    .iter()
                    .zip(x.as_slice())
                    .all(|(a, b)| a.to_bits() == b.to_bits()),
            || format!("round trip changed a {:?} tensor", x.dims()),
        )?;
    }
    Ok("100 tensors including 144x256x40 bitwise identical".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("bm-product oracle", bmp_oracle),
        ("mat/tvec identity", mat_tvec_identity),
        ("transpose identities", transpose_identities),
        ("svt correctness", svt_correctness),
        ("rals decoupling", rals_decoupling),
        ("admm contracts", admm_contracts),
        ("synthetic recovery", synthetic_recovery),
        ("protocol sweeps", protocol_sweeps),
        ("halrtc sanity", halrtc_sanity),
        ("complexity smoke", complexity_smoke),
        ("serialization", serialization),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS [{}] {name}: {detail}", n + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name}: {why}", n + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
