use nnjscc_core::analytic::*;
use nnjscc_core::codec::{decode, decode_via_density, distortion, encode};
use nnjscc_core::ensemble::*;
use nnjscc_core::model::*;
use nnjscc_core::montecarlo::*;
use nnjscc_core::nonexcess::*;
use nnjscc_core::rng::{stream, Domain};
use nnjscc_core::CodebookKind::{self, Iid, Spherical};
use proptest::prelude::*;
use rand::Rng;

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

fn kind() -> impl Strategy<Value = CodebookKind> {
    prop_oneof![Just(Spherical), Just(Iid)]
}

fn law() -> impl Strategy<Value = Law> {
    prop_oneof![
        (0.1f64..10.0).prop_map(|v| Law::Gaussian { variance: v }),
        (0.1f64..5.0).prop_map(|a| Law::Uniform { half_width: a }),
        (0.1f64..5.0).prop_map(|b| Law::Laplace { scale: b }),
        (0.1f64..5.0).prop_map(|a| Law::RademacherScaled { amplitude: a }),
        (0.1f64..3.0, 0.1f64..3.0, 0.05f64..0.95).prop_map(|(a, b, p)| Law::DiscretePmf {
            atoms: vec![(-a, p / 2.0), (b, p / 2.0), (0.0, 1.0 - p)]
        }),
    ]
}

proptest! {
    #[test]
    fn source_moments_are_consistent(l in law()) {
        let s = make_source(l.clone()).unwrap();
        let m = l.moments();
        prop_assert_eq!(s.sigma2(), m.m2);
        prop_assert!(s.zeta_s() >= s.sigma2() * s.sigma2() * (1.0 - 1e-12));
        prop_assert!(s.m6().is_finite());
    }

    #[test]
    fn noise_is_normalised_to_unit_power(l in law()) {
        let z = make_noise(l).unwrap();
        prop_assert!((z.law().moments().m2 - 1.0).abs() < 1e-12);
        prop_assert!(z.zeta_c() >= 1.0);
    }

    #[test]
    fn channel_dispersion_gap(zeta_c in 1.0f64..20.0, p in 0.01f64..100.0) {
        let gap = v_channel(zeta_c, p, Iid).unwrap() - v_channel(zeta_c, p, Spherical).unwrap();
        let expect = 0.5 * (p / (p + 1.0)).powi(2);
        prop_assert!(rel_close(gap, expect, 1e-12));
    }

    #[test]
    fn joint_dispersion_forms_agree(
        sigma2 in 0.1f64..10.0, excess in 0.0f64..5.0, d_frac in 0.01f64..0.99,
        zeta_c in 1.0f64..10.0, p in 0.05f64..50.0, k in kind(),
    ) {
        let zeta_s = sigma2 * sigma2 * (1.0 + excess);
        let v = v_joint(zeta_s, sigma2, zeta_c, p, d_frac * sigma2, k).unwrap();
        prop_assert!(v >= 0.0);
    }

    #[test]
    fn scaling_leaves_ratios_unchanged(
        sigma2 in 0.1f64..10.0, excess in 0.0f64..5.0, d_frac in 0.01f64..0.99, c in 0.01f64..100.0,
    ) {
        let zeta_s = sigma2 * sigma2 * (1.0 + excess);
        let a = DispersionReport::new(3.0, sigma2, d_frac * sigma2, zeta_s, 3.0).unwrap();
        let b = DispersionReport::new(3.0, c * sigma2, c * d_frac * sigma2, c * c * zeta_s, 3.0).unwrap();
        prop_assert!(rel_close(a.rate_distortion, b.rate_distortion, 1e-12));
        prop_assert!(rel_close(a.rho_star, b.rho_star, 1e-12));
        prop_assert!(rel_close(a.v_s, b.v_s, 1e-10) || (a.v_s - b.v_s).abs() < 1e-14);
        prop_assert!(rel_close(a.v_joint_sp, b.v_joint_sp, 1e-10));
    }

    #[test]
    fn separate_coding_is_never_better(
        excess in 0.0f64..4.0, d in 0.05f64..0.95, zeta_c in 1.0f64..8.0, p in 0.1f64..20.0,
        eps in 0.01f64..0.49, k in kind(),
    ) {
        let r = DispersionReport::new(p, 1.0, d, 1.0 + excess, zeta_c).unwrap();
        let sep = separate_second_order(eps, &r, k).unwrap();
        let joint = libm::sqrt(r.v_joint(k)) * qfunc_inv(eps).unwrap();
        prop_assert!(sep >= joint - 1e-9);
        if r.v_s > 1e-6 && r.v_c(k) > 1e-6 {
            prop_assert!(sep > joint);
        }
    }

    #[test]
    fn smaller_eps_predicts_smaller_k(e1 in 0.01f64..0.98, de in 0.001f64..0.01, n in 1usize..100_000) {
        let r = DispersionReport::new(3.0, 1.0, 0.25, 3.0, 3.0).unwrap();
        let e2 = (e1 + de).min(0.99);
        prop_assert!(second_order_k(n, e1, &r, Spherical).unwrap() < second_order_k(n, e2, &r, Spherical).unwrap());
    }

    #[test]
    fn psi_sp_vanishes_outside_support(d in 0.05f64..0.95, below in 0.0f64..1.0, above in 0.0f64..3.0, k in 1usize..300) {
        let ctx = PsiContext::new(1.0, d).unwrap();
        if ctx.r1sq > 0.0 {
            prop_assert_eq!(psi_sp(k, ctx.r1sq * below, &ctx).unwrap(), 0.0);
        }
        prop_assert_eq!(psi_sp(k, ctx.r2sq + above, &ctx).unwrap(), 0.0);
    }

    #[test]
    fn lemma_bounds_sandwich_exact_value(frac in 0.001f64..0.999, k in 2usize..400) {
        let ctx = PsiContext::new(1.0, 0.25).unwrap();
        let p = ctx.r1sq + frac * (ctx.r2sq - ctx.r1sq);
        prop_assume!(p + 1.0 - 0.5 >= 0.0);
        let ln_psi = ln_psi_sp(k, p, &ctx).unwrap();
        let lo = ln_psi_sp_lower(k, p, &ctx).unwrap();
        let hi = ln_psi_sp_upper(k, p, &ctx).unwrap();
        prop_assert!(lo <= ln_psi + 1e-9 && ln_psi <= hi + 1e-9, "{lo} {ln_psi} {hi}");
    }

    #[test]
    fn exponents_increase_on_their_ranges(d in 0.05f64..0.95, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let ctx = PsiContext::new(1.0, d).unwrap();
        let (a, b) = (a.min(b), a.max(b));
        prop_assume!(b - a > 1e-6);
        let lo = (1.0 - 2.0 * d).abs();
        let span = ctx.r2sq - lo;
        let (p1, p2) = (lo + a * span * 0.999, lo + b * span * 0.999);
        if ctx.in_support(p1) && ctx.in_support(p2) {
            prop_assert!(r_sp(p1, &ctx).unwrap() < r_sp(p2, &ctx).unwrap());
        }
        let start = (2.0 * d - 1.0).max(0.0);
        let (q1, q2) = (start + 3.0 * a, start + 3.0 * b);
        prop_assert!(r_iid(q1, &ctx).unwrap() < r_iid(q2, &ctx).unwrap());
    }

    #[test]
    fn classify_inverts_membership(k in 2usize..200, frac in 0.0f64..1.0, sigma2 in 0.1f64..10.0) {
        let xi = xi_second_order(k).unwrap();
        let part = build_partition(k, xi, sigma2).unwrap();
        let n = part.num_types();
        let i = 1 + ((frac * n as f64) as usize).min(n - 1);
        let (lo, hi) = (part.level(i - 1), part.level(i));
        for p in [lo, 0.5 * (lo + hi), lo + 0.999 * (hi - lo)] {
            prop_assert_eq!(part.classify_power(p), Classification::Type(i));
        }
    }

    #[test]
    fn subcodebook_rounding_never_undershoots(k in 2usize..64, d in 0.3f64..0.7, kd in kind()) {
        let ctx = PsiContext::new(1.0, d).unwrap();
        let part = build_partition(k, xi_second_order(k).unwrap(), 1.0).unwrap();
        prop_assume!(levels_admissible(&part, kd, &ctx));
        let sizes = choose_m(k, &part, kd, &ctx, LevelPolicy::Reject).unwrap();
        for i in 1..=part.num_types() {
            let ln_psi = ln_psi(kd, k, part.level(i), &ctx).unwrap();
            let target = (k as f64).ln() - ln_psi;
            let excess = sizes.ln_m(i) - target;
            let slack = (libm::exp(ln_psi) / k as f64).ln_1p();
            prop_assert!(excess >= -1e-12 && excess <= slack + 1e-12, "i={i} excess={excess} slack={slack}");
        }
        for i in 2..=part.num_types() {
            if part.level(i - 2) >= (1.0 - 2.0 * d).abs() {
                prop_assert!(sizes.m(i - 1) <= sizes.m(i));
            }
        }
    }
}

fn random_ensemble(seed: u64, n_types: usize, max_m: usize, n: usize, quantised: bool) -> CodeEnsemble {
    let mut rng = stream(seed, Domain::Auxiliary, 0);
    // k = 4 and ξ = (2N - 1) / 16 give exactly N types
    let xi = (2 * n_types - 1) as f64 / 16.0;
    let part = build_partition(4, xi, 1.0).unwrap();
    assert_eq!(part.num_types(), n_types);
    let m: Vec<usize> = (0..n_types).map(|_| rng.gen_range(1..=max_m)).collect();
    let total: usize = m.iter().sum();
    let source: Vec<f64> = (0..total * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut channel: Vec<f64> = (0..total * n)
        .map(|_| {
            let v: f64 = rng.gen_range(-2.0..2.0);
            if quantised {
                v.round()
            } else {
                v
            }
        })
        .collect();
    if quantised && total > 1 {
        // force exact duplicates across and within types
        let (a, b) = (rng.gen_range(0..total), rng.gen_range(0..total));
        for t in 0..n {
            channel[b * n + t] = channel[a * n + t];
        }
    }
    CodeEnsemble::from_codewords(part, 4, n, m, source, channel, Spherical, Spherical).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn decoders_agree(seed in any::<u64>(), n_types in 1usize..=4, max_m in 1usize..=16, n in 1usize..=32, quantised in any::<bool>()) {
        let e = random_ensemble(seed, n_types, max_m, n, quantised);
        let mut rng = stream(seed, Domain::Auxiliary, 1);
        let y: Vec<f64> = (0..n).map(|_| {
            let v: f64 = rng.gen_range(-2.5..2.5);
            if quantised { v.round() } else { v }
        }).collect();
        let a = decode(&y, &e).unwrap();
        let b = decode_via_density(&y, &e, 1.5).unwrap();
        prop_assert_eq!((a.type_index, a.codeword_index), (b.type_index, b.codeword_index));
    }

    #[test]
    fn encoder_is_optimal_within_type(seed in any::<u64>(), n_types in 1usize..=4) {
        let e = random_ensemble(seed, n_types, 16, 3, false);
        let mut rng = stream(seed, Domain::Auxiliary, 2);
        let s: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.3..1.3)).collect();
        if let Some(r) = encode(&s, &e).unwrap() {
            for j in 1..=e.m(r.type_index) {
                prop_assert!(r.distortion <= distortion(&s, e.source_codeword(r.type_index, j)).unwrap());
            }
        }
    }

    #[test]
    fn noiseless_channel_recovers_the_index(seed in any::<u64>(), n_types in 1usize..=4, n in 2usize..=16) {
        let mut rng = stream(seed, Domain::Auxiliary, 3);
        let xi = (2 * n_types - 1) as f64 / 16.0;
        let part = build_partition(4, xi, 1.0).unwrap();
        let m = vec![5usize; n_types];
        let channel: Vec<f64> = (0..5 * n_types * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let e = CodeEnsemble::from_codewords(part, 4, n, m, vec![0.5; 5 * n_types * 4], channel, Spherical, Spherical).unwrap();
        for (i, j) in e.index_set().collect::<Vec<_>>() {
            let d = decode(e.channel_codeword(i, j), &e).unwrap();
            prop_assert_eq!((d.type_index, d.codeword_index), (i, j));
        }
    }

    #[test]
    fn decoding_is_permutation_equivariant(seed in any::<u64>(), n_types in 1usize..=3, n in 1usize..=8, shift in 1usize..16) {
        let e = random_ensemble(seed, n_types, 16, n, false);
        let mut rng = stream(seed, Domain::Auxiliary, 4);
        let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let before = decode(&y, &e).unwrap();
        // rotate indices within every type
        let mut channel = Vec::new();
        let mut rot = Vec::new();
        for i in 1..=e.num_types() {
            let m = e.m(i);
            let r = shift % m;
            rot.push(r);
            for j in 0..m {
                channel.extend_from_slice(e.channel_codeword(i, (j + r) % m + 1));
            }
        }
        let permuted = CodeEnsemble::from_codewords(
            e.partition().clone(), 4, n, e.sizes().to_vec(), e.source_values().to_vec(), channel, Spherical, Spherical,
        ).unwrap();
        let after = decode(&y, &permuted).unwrap();
        let m = e.m(before.type_index);
        let r = rot[before.type_index - 1];
        prop_assert_eq!(after.type_index, before.type_index);
        prop_assert_eq!((after.codeword_index - 1 + r) % m + 1, before.codeword_index);
    }
}

fn small_scheme(k: usize, n: usize, sizes: Vec<u128>, xi: f64) -> Scheme {
    let source = make_source(Law::Gaussian { variance: 1.0 }).unwrap();
    let noise = make_noise(Law::Gaussian { variance: 1.0 }).unwrap();
    let config = SystemConfig { power: 2.0, distortion: 0.5, k, n, source_codebook: Spherical, channel_codebook: Spherical };
    Scheme::with_sizes(source, noise, config, xi, sizes).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn category_counts_partition_trials(seed in any::<u64>(), trials in 1u64..300, engine in prop_oneof![Just(Engine::Explicit), Just(Engine::OrderStatistic)]) {
        let scheme = small_scheme(8, 6, vec![2, 3, 5, 8], 0.25);
        let s = estimate_pe(&scheme, trials, RunOptions { master_seed: seed, engine, ..RunOptions::default() }).unwrap();
        prop_assert_eq!(s.counts.total(), trials);
        prop_assert_eq!(s.per_type.iter().map(|t| t.occupancy).sum::<u64>() + s.counts.atypical, trials);
        prop_assert!((s.decomposed_p_e() - s.p_e_hat).abs() < 1e-12);
    }

    #[test]
    fn trial_range_splits_do_not_matter(seed in any::<u64>(), cut in 0u64..200) {
        let scheme = small_scheme(8, 6, vec![2, 3, 5, 8], 0.25);
        let sim = Simulation::new(&scheme, RunOptions { master_seed: seed, ..RunOptions::default() }).unwrap();
        let whole = sim.run_range(0..200, |_, _| {}).unwrap();
        let mut parts = sim.run_range(cut..200, |_, _| {}).unwrap();
        parts.merge(&sim.run_range(0..cut, |_, _| {}).unwrap());
        prop_assert_eq!(whole, parts);
    }
}

#[test]
fn atypical_rate_respects_the_concentration_bound() {
    let k = 256;
    let source = make_source(Law::Gaussian { variance: 1.0 }).unwrap();
    let part = build_partition(k, xi_second_order(k).unwrap(), 1.0).unwrap();
    let mut rng = stream(17, Domain::Auxiliary, 0);
    let samples = 100_000;
    let atypical = (0..samples)
        .filter(|_| part.classify(&sample_source(&source, k, &mut rng)) == Classification::Atypical)
        .count();
    // V = Var(S²) = 2σ⁴, T = E|S² − σ²|³
    let v = 2.0f64;
    let t = 8.691562902725;
    let bound = 2.0 * (-(k as f64).ln() / (2.0 * v)).exp() + 12.0 * t / ((k as f64).sqrt() * v.powf(1.5));
    let rate = atypical as f64 / samples as f64;
    assert!(rate < bound, "rate {rate} bound {bound}");
}

#[test]
fn md_schedule_guards_small_k() {
    let r = DispersionReport::new(1.0, 1.0, 0.5, 3.0, 3.0).unwrap();
    assert!(md_schedule(10, r.rho_star * 0.99, &r).is_err());
    assert_eq!(md_schedule(100, 0.1 * r.rho_star, &r).unwrap().k_n, 90);
}
