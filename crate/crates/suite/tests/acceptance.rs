//! Acceptance checks. Each check prints one `PASS`/`FAIL` line with its
//! measured values and wall time; the process exits non-zero if any fail.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use panostitch::backends::{mock_blur, mock_identity, mock_seeded_noise, MockSchedule};
use panostitch::caption::{prepare_caption, CaptionRule};
use panostitch::evalkit::{clip_score, fid, matrix_sqrt_psd, seam_discontinuity, EmbeddingSet};
use panostitch::sampler::{
    multidiffusion_step, run, stitchdiffusion_step, Conditioning, DenoiseError, DenoiseRequest, Denoiser, Mode,
    SamplerConfig, StepContext,
};
use panostitch::tensor::{Canvas, Rng};
use panostitch::tiling::{coverage_map, global_crop, ConcatOrder, OrderMode, StitchPlan, TilingPlan};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(id: &str, title: &str, budget: Duration, body: impl FnOnce() -> Outcome) -> bool {
    check_after(id, title, budget, Duration::ZERO, body)
}

/// Like [`check`], with `prior` time spent in shared setup charged to the
/// check's budget.
fn check_after(id: &str, title: &str, budget: Duration, prior: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let started = Instant::now();
    let outcome = body();
    let elapsed = started.elapsed() + prior;
    let in_time = elapsed <= budget;
    let pass = outcome.pass && in_time;
    println!(
        "{} {id} {title}: {}; {:.2}s (budget {}s{})",
        if pass { "PASS" } else { "FAIL" },
        outcome.detail,
        elapsed.as_secs_f64(),
        budget.as_secs(),
        if in_time { "" } else { ", exceeded" }
    );
    pass
}

fn cond() -> Conditioning {
    Conditioning::prompt("360-degree panoramic image, a castle")
}

fn latent_config() -> SamplerConfig {
    SamplerConfig::for_height(64, 16)
}

fn identity_fixed_point() -> Outcome {
    let mut failures = Vec::new();
    let mut runs = 0;
    let mut variants = vec![(Mode::MultiDiffusion, 2)];
    variants.extend((1..=3).map(|k| (Mode::StitchDiffusion, k)));
    for (mode, k) in variants {
        let mut config = latent_config();
        config.steps = 50;
        config.seed = 2024;
        config.mode = mode;
        config.stitch_passes = k;
        let out = run(&config, &mock_identity(), &cond()).expect("identity run");
        let expected = global_crop(&out.initial, config.window_width).unwrap();
        runs += 1;
        if out.panorama != expected || out.canvas != out.initial {
            failures.push(format!("{mode:?} K={k}"));
        }
    }
    Outcome {
        pass: failures.is_empty(),
        detail: format!("{runs} runs of T=50 on 64x256x4, mismatches: {failures:?}"),
    }
}

/// Nonlinear, position- and seed-dependent denoiser for the oracle check.
struct Wobble;

impl Denoiser for Wobble {
    fn name(&self) -> String {
        "wobble".into()
    }

    fn denoise(&self, r: &DenoiseRequest<'_>) -> Result<Canvas, DenoiseError> {
        let p = r.patch;
        let shift = (r.seed % 101) as f32 / 101.0;
        Ok(Canvas::from_fn(p.height(), p.width(), p.channels(), |y, x, c| {
            (0.9 * p.get(y, x, c) + 0.37 * x as f32 - 0.2 * y as f32 + c as f32).cos() + shift
        })
        .unwrap())
    }
}

fn gather(canvas: &Canvas, cols: &[usize]) -> Canvas {
    Canvas::from_fn(canvas.height(), cols.len(), canvas.channels(), |y, x, c| {
        canvas.get(y, cols[x], c)
    })
    .unwrap()
}

fn denoise(patch: &Canvas, ctx: &StepContext, seed: u64) -> Canvas {
    let cond = cond();
    Wobble
        .denoise(&DenoiseRequest {
            patch,
            t: ctx.t,
            total_steps: ctx.total_steps,
            conditioning: &cond,
            seed,
        })
        .unwrap()
}

/// Minimizes `Σ_k (x − v_k)²` independently in every cell over all
/// contributions `(columns, patch)` covering it.
fn least_squares(shape: (usize, usize, usize), contributions: &[(Vec<usize>, Canvas)]) -> Canvas {
    let (h, w, ch) = shape;
    Canvas::from_fn(h, w, ch, |y, x, c| {
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for (cols, out) in contributions {
            for (k, _) in cols.iter().enumerate().filter(|(_, &col)| col == x) {
                num += out.get(y, k, c) as f64;
                den += 1.0;
            }
        }
        (num / den) as f32
    })
    .unwrap()
}

fn oracle(jt: &Canvas, ctx: &StepContext, w: usize, stride: usize, stitch: Option<(usize, ConcatOrder)>) -> Canvas {
    let wp = jt.width();
    let mut contributions = Vec::new();
    if let Some((k, order)) = stitch {
        let right: Vec<usize> = (wp - w / 2..wp).collect();
        let left: Vec<usize> = (0..w / 2).collect();
        let cols = match order {
            ConcatOrder::RightmostFirst => [right, left].concat(),
            ConcatOrder::LeftmostFirst => [left, right].concat(),
        };
        let block = gather(jt, &cols);
        for j in 0..k {
            contributions.push((cols.clone(), denoise(&block, ctx, ctx.stitch_seed(j))));
        }
    }
    for i in 0..=(wp - w) / stride {
        let cols: Vec<usize> = (i * stride..i * stride + w).collect();
        let out = denoise(&gather(jt, &cols), ctx, ctx.window_seed(i));
        contributions.push((cols, out));
    }
    least_squares(jt.shape(), &contributions)
}

fn least_squares_oracle() -> Outcome {
    let mut rng = Rng::new(0x0AC1E);
    let mut worst = 0.0f32;
    let mut configs = 0;
    while configs < 50 {
        let half = 1 + rng.below(8) as usize;
        let w = 2 * half;
        let stride = 1 + rng.below(w as u64) as usize;
        let extra = rng.below(6) as usize;
        let wp = w + extra * stride;
        if wp > 64 {
            continue;
        }
        let h = 1 + rng.below(3) as usize;
        let ch = 1 + rng.below(4) as usize;
        let k = 1 + rng.below(3) as usize;
        let order = if rng.below(2) == 0 {
            ConcatOrder::RightmostFirst
        } else {
            ConcatOrder::LeftmostFirst
        };
        let jt = Canvas::gaussian(h, wp, ch, &mut rng).unwrap();
        let ctx = StepContext::new(1 + rng.below(50) as usize, 50, rng.next_u64());
        let tiling = TilingPlan::new(wp, w, stride).unwrap();
        let plan = StitchPlan::new(w, k).unwrap().with_concat_order(order);

        let multi = multidiffusion_step(&jt, &ctx, &tiling, &Wobble, &cond()).unwrap();
        worst = worst.max(multi.max_abs_diff(&oracle(&jt, &ctx, w, stride, None)).unwrap());
        let stitched = stitchdiffusion_step(&jt, &ctx, &tiling, &plan, &Wobble, &cond()).unwrap();
        worst = worst.max(
            stitched
                .max_abs_diff(&oracle(&jt, &ctx, w, stride, Some((k, order))))
                .unwrap(),
        );
        configs += 1;
    }
    Outcome {
        pass: (worst as f64) <= 1e-9,
        detail: format!("{configs} configs (W' <= 64), both step functions, max abs diff {worst:e}"),
    }
}

fn coverage() -> Outcome {
    let tiling = TilingPlan::new(2048, 1024, 128).unwrap();
    let stitch = StitchPlan::new(1024, 2).unwrap();
    let map = coverage_map(&tiling, Some(&stitch));
    let brute: Vec<f64> = (0..2048)
        .map(|col| {
            let windows = (0..=8).filter(|i| (i * 128..i * 128 + 1024).contains(&col)).count();
            let in_stitch = !(512..1536).contains(&col);
            (windows + if in_stitch { 2 } else { 0 }) as f64
        })
        .collect();
    let mismatches = (0..2048).filter(|&c| map.at(0, c) != brute[c]).count();
    let spots = [(0usize, 3.0), (512, 5.0), (1024, 9.0)];
    let bad_spots: Vec<String> = spots
        .iter()
        .filter(|&&(c, v)| map.at(0, c) != v)
        .map(|&(c, v)| format!("col {c}: got {} expected {v}", map.at(0, c)))
        .collect();
    Outcome {
        pass: tiling.len() == 9 && mismatches == 0 && bad_spots.is_empty(),
        detail: format!(
            "n={}, {mismatches} columns differ from enumeration, spot values {:?}, spot mismatches {bad_spots:?}",
            tiling.len(),
            spots.iter().map(|&(c, _)| map.at(0, c)).collect::<Vec<_>>()
        ),
    }
}

struct SeamRuns {
    multi: Vec<f64>,
    pre: Vec<f64>,
    post: Vec<f64>,
}

fn seam_runs() -> SeamRuns {
    let steps = 30;
    let blur = mock_blur(2, MockSchedule::cosine(steps)).unwrap();
    let mut runs = SeamRuns {
        multi: Vec::new(),
        pre: Vec::new(),
        post: Vec::new(),
    };
    for seed in 0..20u64 {
        let mut config = latent_config();
        config.steps = steps;
        config.seed = seed;
        config.max_inflight = 4;
        let mut ratio = |mode, order| {
            config.mode = mode;
            config.stitch_order = order;
            let out = run(&config, &blur, &cond()).unwrap();
            seam_discontinuity(&out.panorama).unwrap()
        };
        runs.multi.push(ratio(Mode::MultiDiffusion, OrderMode::Pre));
        runs.pre.push(ratio(Mode::StitchDiffusion, OrderMode::Pre));
        runs.post.push(ratio(Mode::StitchDiffusion, OrderMode::Post));
    }
    runs
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn seam_ordering(runs: &SeamRuns) -> Outcome {
    let wins = runs.pre.iter().zip(&runs.multi).filter(|(s, m)| s < m).count();
    let (ms, mm) = (mean(&runs.pre), mean(&runs.multi));
    let reduction = 1.0 - ms / mm;
    Outcome {
        pass: wins >= 18 && reduction >= 0.25,
        detail: format!(
            "stitch < multi in {wins}/20 seeds, mean ratio {ms:.4} vs {mm:.4} ({:.1}% lower)",
            100.0 * reduction
        ),
    }
}

fn order_ablation(runs: &SeamRuns) -> Outcome {
    let (post, pre) = (mean(&runs.post), mean(&runs.pre));
    Outcome {
        pass: post >= pre,
        detail: format!("mean seam ratio post {post:.4} vs pre {pre:.4}"),
    }
}

fn periodicity_mode() -> Outcome {
    let mut config = latent_config();
    config.steps = 20;
    config.seed = 99;
    config.enforce_periodicity = true;
    let noise = mock_seeded_noise(MockSchedule::cosine(config.steps));
    let out = run(&config, &noise, &cond()).unwrap();
    let period = config.period();
    let halves_equal = out.canvas.columns(0, period).unwrap() == out.canvas.columns(period, period).unwrap();
    // the crop starts at column H, so its wrap pair is canvas columns (3H - 1, H),
    // which periodicity maps onto the interior pair (H - 1, H)
    let h = config.height;
    let pano = &out.panorama;
    let wrap_matches =
        pano.column(pano.width() - 1) == out.canvas.column(h - 1) && pano.column(0) == out.canvas.column(h);
    Outcome {
        pass: halves_equal && wrap_matches,
        detail: format!("left/right halves identical: {halves_equal}, wrap pair equals interior pair: {wrap_matches}"),
    }
}

fn gaussian_set(rng: &mut Rng, n: usize, mix: &DMatrix<f64>, offset: &[f64]) -> EmbeddingSet {
    let d = mix.nrows();
    let z = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
    let mut rows = z * mix.transpose();
    for mut row in rows.row_iter_mut() {
        for (v, o) in row.iter_mut().zip(offset) {
            *v += o;
        }
    }
    EmbeddingSet::from_matrix(rows).unwrap()
}

fn fid_correctness() -> Outcome {
    let mut rng = Rng::new(5150);
    let d = 16;
    let mix = DMatrix::from_fn(
        d,
        d,
        |i, j| if i == j { 1.0 } else { 0.0 } + 0.3 * rng.standard_normal() / (1.0 + (i as f64 - j as f64).abs()),
    );
    let a = gaussian_set(&mut rng, 5000, &mix, &vec![0.0; d]);
    let self_fid = fid(&a, &a).unwrap();

    let delta: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.0 } else { -0.5 }).collect();
    let delta_sq: f64 = delta.iter().map(|v| v * v).sum();
    let b = gaussian_set(&mut rng, 5000, &mix, &delta);
    let a2 = gaussian_set(&mut rng, 5000, &mix, &vec![0.0; d]);
    let offset_fid = fid(&a2, &b).unwrap();
    let rel_err = (offset_fid - delta_sq).abs() / delta_sq;

    let mut worst_residual = 0.0f64;
    for i in 0..100 {
        let n = 1 + rng.below(24) as usize;
        let rank = if i % 4 == 0 {
            1 + rng.below(n as u64) as usize
        } else {
            n
        };
        let f = DMatrix::from_fn(n, rank, |_, _| rng.standard_normal());
        let s = &f * f.transpose();
        let r = matrix_sqrt_psd(&s).unwrap();
        let residual = (&r * &r - &s).norm() / s.norm().max(f64::MIN_POSITIVE);
        worst_residual = worst_residual.max(residual);
    }
    Outcome {
        pass: self_fid <= 1e-6 && rel_err <= 0.05 && worst_residual <= 1e-6,
        detail: format!(
            "fid(A,A)={self_fid:.3e}, offset fid {offset_fid:.4} vs |delta|^2 {delta_sq:.4} (rel err {:.2}%), worst sqrt residual {worst_residual:.2e} over 100 PSD matrices",
            100.0 * rel_err
        ),
    }
}

fn clip_correctness() -> Outcome {
    let mut rng = Rng::new(77);
    let n = 200;
    let d = 32;
    let g = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
    let r = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
    // make each real row orthogonal to its generated partner
    let mut r_orth = r.clone();
    for i in 0..n {
        let gi = g.row(i);
        let proj = gi.dot(&r.row(i)) / gi.dot(&gi);
        let row = r.row(i) - gi * proj;
        r_orth.set_row(i, &row);
    }
    let gs = EmbeddingSet::from_matrix(g).unwrap();
    let identical = clip_score(&gs, &gs).unwrap();
    let orthogonal = clip_score(&gs, &EmbeddingSet::from_matrix(r_orth).unwrap()).unwrap();
    Outcome {
        pass: identical == 1.0 && orthogonal.abs() <= 1e-7,
        detail: format!("identical {identical}, orthogonal {orthogonal:.2e}"),
    }
}

fn caption_tooling() -> Outcome {
    let rule = CaptionRule::default();
    let examples = [
        (
            "a living room with a couch and a table",
            "360-degree panoramic image, a living room with a couch and a table",
        ),
        ("3 6 0 picture, a castle", "360-degree panoramic image, a castle"),
        ("", "360-degree panoramic image"),
    ];
    let examples_ok = examples
        .iter()
        .filter(|(raw, want)| prepare_caption(raw, &rule) == *want)
        .count();

    let pieces = [
        "3 6 0 picture",
        "360-degree panoramic image",
        ", ",
        ",",
        "  ",
        "a snowy mountain",
        "3 6",
        "0 picture",
        "a city street at night",
        "kitchen",
        " with ",
        "3 6 0 picture3 6 0 picture",
    ];
    let mut rng = Rng::new(360);
    let mut bad = Vec::new();
    for _ in 0..100 {
        let len = rng.below(7) as usize;
        let raw: String = (0..len)
            .map(|_| pieces[rng.below(pieces.len() as u64) as usize])
            .collect();
        let once = prepare_caption(&raw, &rule);
        let twice = prepare_caption(&once, &rule);
        let trigger_count = once.matches(rule.trigger()).count();
        let starts = once.starts_with(rule.trigger());
        if once != twice || !starts || once.contains("3 6 0 picture") || trigger_count == 0 {
            bad.push(raw);
        }
    }
    Outcome {
        pass: examples_ok == 3 && bad.is_empty(),
        detail: format!(
            "{examples_ok}/3 examples verbatim, {} of 100 fuzz captions not idempotent/clean",
            bad.len()
        ),
    }
}

fn concurrency_determinism() -> Outcome {
    let mut mismatches = Vec::new();
    for mode in [Mode::MultiDiffusion, Mode::StitchDiffusion] {
        let mut config = latent_config();
        config.steps = 10;
        config.seed = 4242;
        config.mode = mode;
        let noise = mock_seeded_noise(MockSchedule::cosine(config.steps));
        let mut reference = None;
        for inflight in [1, 4, 16] {
            config.max_inflight = inflight;
            let out = run(&config, &noise, &cond()).unwrap();
            match &reference {
                None => reference = Some(out),
                Some(r) => {
                    if r.canvas != out.canvas || r.panorama != out.panorama {
                        mismatches.push(format!("{mode:?} max-inflight {inflight}"));
                    }
                }
            }
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: format!("max-inflight 1/4/16, both modes, mismatches: {mismatches:?}"),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let mut results = Vec::new();
    results.push(check("A1", "identity fixed point", secs(5), identity_fixed_point));
    results.push(check("A2", "least-squares oracle", secs(10), least_squares_oracle));
    results.push(check("A3", "coverage map", secs(1), coverage));
    let started = Instant::now();
    let runs = seam_runs();
    let shared = started.elapsed();
    println!(
        "     seam experiment: 20 seeds x 3 variants, T=30, mock blur r=2, {:.2}s",
        shared.as_secs_f64()
    );
    results.push(check_after("A4", "seam ordering", secs(120), shared, || {
        seam_ordering(&runs)
    }));
    results.push(check_after("A5", "order ablation", secs(120), shared, || {
        order_ablation(&runs)
    }));
    results.push(check("A6", "periodicity mode", secs(10), periodicity_mode));
    results.push(check("A7", "FID correctness", secs(30), fid_correctness));
    results.push(check("A8", "CLIP-score correctness", secs(5), clip_correctness));
    results.push(check("A9", "caption tooling", secs(5), caption_tooling));
    results.push(check(
        "A10",
        "determinism under concurrency",
        secs(30),
        concurrency_determinism,
    ));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed}/{} passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
