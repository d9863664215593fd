//! Seeded Monte Carlo checks against exact oracles and against each other.

use std::collections::HashMap;

use erwlab_core::excursion::{hit_before_exit, sample_conditioned_excursion, BallWalker};
use erwlab_core::harness::{
    self, AvoidOriginParams, BlockParams, CouplingParams, Estimate, HarnessError, HittingParams, SpeedParams, VisitTailParams,
};
use erwlab_core::lattice::{BallSpec, LatticePoint};
use erwlab_core::oracles;
use erwlab_core::rng::RngStream;
use erwlab_core::walk::{run_walk, ExternalConfiguration, RecordMode, WalkKind};

const SEED: u64 = 20240611;

fn within_sigmas(observed: f64, expected: f64, trials: u64, sigmas: f64) -> bool {
    let se = (expected * (1.0 - expected) / trials as f64).sqrt();
    (observed - expected).abs() <= sigmas * se
}

#[test]
fn hit_probability_r8_against_plain_monte_carlo() {
    let r = 8.0;
    let start = LatticePoint::xy(8, 0);
    let exact = oracles::exact_hit_probability(&start, r).unwrap();
    assert!(exact > 0.0 && exact < 1.0);
    let ball = BallSpec::centered(2, r).unwrap();
    let reps = 1_000_000u64;
    let hits = harness::run_replications(reps, 1, |rep| {
        let mut rng = RngStream::new(SEED, rep);
        Ok::<_, HarnessError>(hit_before_exit(start, LatticePoint::xy(0, 0), &ball, &mut rng)?)
    })
    .unwrap()
    .into_iter()
    .filter(|&h| h)
    .count() as u64;
    let p = hits as f64 / reps as f64;
    assert!(within_sigmas(p, exact, reps, 3.0), "mc {p} exact {exact}");
}

#[test]
fn exit_position_acceptance_rate_r8() {
    let r = 8.0;
    let start = LatticePoint::xy(8, 0);
    let dist = oracles::exit_distribution(&start, 2.0 * r).unwrap();
    let ball = BallSpec::centered(2, r).unwrap();
    // the likeliest exit and one on the far side
    let (likely, p_likely) = dist.iter().cloned().fold((start, 0.0), |a, b| if b.1 > a.1 { b } else { a });
    let far = LatticePoint::xy(-17, 0);
    let p_far = dist.iter().find(|(x, _)| *x == far).map(|d| d.1).unwrap();
    for (x_out, mass, accepted) in [(likely, p_likely, 3000u64), (far, p_far, 300)] {
        let mut rng = RngStream::new(SEED, 1);
        let mut attempts = 0u64;
        for _ in 0..accepted {
            let s = sample_conditioned_excursion(start, x_out, &ball, &mut rng, 1_000_000).unwrap();
            assert_eq!(s.path.end(), x_out);
            attempts += s.attempts;
        }
        let rate = accepted as f64 / attempts as f64;
        assert!(within_sigmas(rate, mass, attempts, 3.0), "{x_out:?}: rate {rate} mass {mass}");
    }
}

#[test]
fn exit_time_tail_r16_is_log_linear() {
    let lambdas: Vec<f64> = (2..=12).map(|i| i as f64 / 2.0).collect();
    let t = harness::exit_time_tail(16.0, &lambdas, 50_000, SEED, 1, 0.99).unwrap();
    let fit = t.fit.unwrap();
    assert!(fit.slope < 0.0 && fit.r_squared > 0.9, "{fit:?}");
    assert!(t.points.windows(2).all(|w| w[1].1 <= w[0].1));
}

#[test]
fn conditioning_on_exit_point_keeps_inner_entry_comparable() {
    let r = 16.0;
    let ball = BallSpec::centered(2, r).unwrap();
    let walker = BallWalker::new(&ball);
    let start = LatticePoint::xy(16, 0);
    let enters = |p: &LatticePoint| p.coord(0).pow(2) + p.coord(1).pow(2) <= 64;
    let reps = 100_000u64;
    let samples = harness::run_replications(reps, 1, |rep| {
        let mut rng = RngStream::new(SEED, rep);
        let mut hit = false;
        let (exit, _) = walker.run(start, &mut rng, |_, p| {
            hit |= enters(p);
            true
        })?;
        Ok::<_, HarnessError>((exit, hit))
    })
    .unwrap();
    let p_all = samples.iter().filter(|s| s.1).count() as f64 / reps as f64;
    assert!(p_all > 0.0);
    let mut by_exit: HashMap<LatticePoint, (u64, u64)> = HashMap::new();
    for (x, h) in &samples {
        let e = by_exit.entry(*x).or_default();
        e.0 += 1;
        e.1 += *h as u64;
    }
    let mut checked = 0;
    for (x, (n, h)) in by_exit {
        if n >= 500 {
            let ratio = (h as f64 / n as f64) / p_all;
            assert!((0.2..=5.0).contains(&ratio), "{x:?}: ratio {ratio}");
            checked += 1;
        }
    }
    assert!(checked >= 20, "{checked}");
    // direct rejection sampler at the far side of the ring
    let x_out = LatticePoint::xy(-33, 0);
    let mut rng = RngStream::new(SEED, 2);
    let mut h = 0;
    let n = 300;
    for _ in 0..n {
        let s = sample_conditioned_excursion(start, x_out, &ball, &mut rng, 10_000_000).unwrap();
        h += s.path.positions().unwrap().iter().any(enters) as u32;
    }
    let ratio = (h as f64 / n as f64) / p_all;
    assert!((0.2..=5.0).contains(&ratio), "far side ratio {ratio}");
}

#[test]
fn visit_escape_and_tail_ratio() {
    let p = VisitTailParams { r: 16.0, n_domain: 4096.0 };
    let res = harness::visit_tail_experiment(&p, 20_000, SEED, 1, 0.99).unwrap();
    let reference = oracles::annulus_escape(16.0, 8192.0).unwrap();
    let rel = (res.escape.mean - reference).abs() / reference;
    assert!(rel <= 0.25, "escape {} reference {reference}", res.escape.mean);
    let ratios: Vec<f64> = res.tail.iter().filter_map(|t| t.ratio).skip(1).collect();
    assert!(ratios.len() >= 3);
    let (lo, hi) = ratios.iter().fold((f64::MAX, f64::MIN), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo <= 1.2, "{ratios:?}");
}

#[test]
fn avoid_origin_single_walk_matches_ring_average() {
    let mut multiplier = 8.0 / 1f64.exp();
    let params = loop {
        let p = AvoidOriginParams { k_list: vec![1], multiplier };
        if p.radius(1) >= 8.0 {
            break p;
        }
        multiplier = multiplier.next_up();
    };
    let ring = harness::start_ring(8.0).unwrap();
    assert_eq!(harness::start_ring(params.radius(1)).unwrap(), ring);
    let field = oracles::hit_probability_field(8.0).unwrap();
    let mean_hit = ring.iter().map(|x| field.at(x.coord(0), x.coord(1))).sum::<f64>() / ring.len() as f64;
    let reps = 100_000;
    let res = harness::avoid_origin_experiment(&params, reps, SEED, 1, 0.99).unwrap();
    let p = res.levels[0].success.mean;
    assert!(within_sigmas(p, 1.0 - mean_hit, reps, 3.0), "mc {p} exact {}", 1.0 - mean_hit);
}

#[test]
fn distinct_sites_scale_like_n_over_log_n() {
    let scaled = |n: usize| {
        let xs = harness::run_replications(100, 1, |rep| {
            let mut rng = RngStream::new(SEED, rep);
            let w = run_walk(WalkKind::Srw2, n, LatticePoint::xy(0, 0), &ExternalConfiguration::None, &mut rng, RecordMode::TraceOnly)?;
            Ok::<_, HarnessError>(w.distinct_count() as f64 * (n as f64).ln() / n as f64)
        })
        .unwrap();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let (a, b) = (scaled(10_000), scaled(100_000));
    assert!((a / b - 1.0).abs() <= 0.2, "{a} {b}");
}

fn overlap(a: &Estimate, b: &Estimate) -> bool {
    a.ci_low <= b.ci_high && b.ci_low <= a.ci_high
}

#[test]
fn stronger_excitation_is_faster() {
    let run = |epsilon| {
        harness::speed_experiment(&SpeedParams { epsilon, n: 10_000, half_space: None }, 500, SEED, 1, 0.95)
            .unwrap()
            .mean_speed
    };
    let (weak, strong) = (run(0.05), run(1.0 / 6.0));
    assert!(strong.mean > weak.mean);
    assert!(!overlap(&weak, &strong), "{weak:?} {strong:?}");
}

#[test]
fn stderr_shrinks_by_root_two_when_reps_double() {
    let p = HittingParams { r: 8.0 };
    let a = harness::hitting_experiment(&p, 4000, SEED, 1, 0.99).unwrap().estimate.p_mc;
    let b = harness::hitting_experiment(&p, 8000, SEED, 1, 0.99).unwrap().estimate.p_mc;
    let ratio = b.stderr / a.stderr;
    assert!((0.6..=0.82).contains(&ratio), "{ratio}");
}

#[test]
fn coupled_srw_rarely_goes_deep() {
    let res = harness::coupling_audit(&CouplingParams { epsilon: 1.0 / 6.0, n: 10_000 }, 1000, SEED, 1, 0.99).unwrap();
    assert_eq!(res.violations, 0);
    assert!(res.p_deep.mean <= 0.01, "{:?}", res.p_deep);
}

#[test]
fn blocks_with_few_new_vertices_are_rare() {
    let p = BlockParams { epsilon: 1.0 / 6.0, n: 100_000, drift_ref: 0.0 };
    let res = harness::blocks_experiment(&p, 10, SEED, 1, 0.99).unwrap();
    assert!(res.frac_few_new.mean <= 0.01, "{:?}", res.frac_few_new);
}
