mod common;

use common::*;
use proptest::prelude::*;

use twic_core::beamforming::{
    build_cognitive, build_full_2k, build_half_duplex, build_three_antenna_slot, verify_constraints, BuildOptions,
};
use twic_core::model::{
    derive_seed, generate_channel, relay_receive_matrix, same_side, NetworkConfig, RelayMode, StreamId,
};
use twic_core::numerics::{rank_and_condition, DEFAULT_TOL};

fn cfg(k: usize, m: usize) -> NetworkConfig {
    NetworkConfig::new(k, m, RelayMode::Instantaneous)
}

#[test]
fn magnitudes_stay_within_configured_bounds() {
    for (k, m) in [(1, 2), (2, 4), (4, 8)] {
        let c = cfg(k, m);
        for seed in 0..50 {
            let ch = generate_channel(&c, seed, 0);
            for g in ch.magnitudes() {
                assert!((c.gain_min..=c.gain_max).contains(&g), "{g}");
            }
        }
    }
}

#[test]
fn no_direct_links_within_a_side() {
    let ch = generate_channel(&cfg(3, 6), 5, 0);
    for ((i, j), _) in ch.direct_links() {
        assert!(!same_side(i, j));
    }
    assert_eq!(ch.direct_links().count(), 2 * 3 * 3);
}

#[test]
fn slots_are_uncorrelated() {
    let c = cfg(2, 4);
    let draws = 4000;
    let (mut cross, mut e0, mut e1) = (num_complex::Complex64::new(0.0, 0.0), 0.0, 0.0);
    for seed in 0..draws {
        let a = generate_channel(&c, seed, 0).direct(1, 2).unwrap();
        let b = generate_channel(&c, seed, 1).direct(1, 2).unwrap();
        cross += a * b.conj();
        e0 += a.norm_sqr();
        e1 += b.norm_sqr();
    }
    let rho = cross.norm() / (e0 * e1).sqrt();
    // 4000 draws of uniform-phase gains: |rho| ~ 1/sqrt(4000)
    assert!(rho < 0.06, "{rho}");
}

#[test]
fn relay_receive_matrices_are_well_conditioned() {
    for (k, m) in [(2, 4), (3, 6), (4, 8)] {
        let c = cfg(k, m);
        for t in 0..100 {
            let ch = generate_channel(&c, derive_seed(&[11, t]), 0);
            let a = relay_receive_matrix(&ch, &StreamId::all(k)).unwrap();
            let rc = rank_and_condition(&a, DEFAULT_TOL);
            assert_eq!(rc.rank, 2 * k);
            assert!(rc.cond.is_finite());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn full_2k_vectors_are_the_minimum_norm_solution(k in 1usize..5, extra in 0usize..2, seed in any::<u64>()) {
        let m = 2 * k + extra;
        let ch = generate_channel(&cfg(k, m), seed, 0);
        let bf = build_full_2k(&ch, k, &BuildOptions::default());
        prop_assume!(bf.is_ok());
        let bf = bf.unwrap();
        for s in StreamId::all(k) {
            let u = &bf.vectors[&s];
            let (a, b) = constraint_rows(&bf, &ch, s);
            prop_assert_eq!(a.nrows(), 2 * k - 2);
            if a.nrows() == 0 {
                prop_assert!(u.norm() == 0.0);
                continue;
            }
            let oracle = min_norm_lu(&a, &b);
            prop_assert!((u - &oracle).norm() <= 1e-7 * oracle.norm().max(1e-12));
            prop_assert!((&a * u - &b).norm() <= 1e-9 * b.norm().max(1.0));
        }
    }

    #[test]
    fn full_2k_nulls_one_side_and_neutralizes_the_other(k in 2usize..5, seed in any::<u64>()) {
        let ch = generate_channel(&cfg(k, 2 * k), seed, 0);
        let bf = build_full_2k(&ch, k, &BuildOptions::default());
        prop_assume!(bf.is_ok());
        let bf = bf.unwrap();
        for s in StreamId::all(k) {
            let spec = &bf.specs[&s];
            for &p in &spec.null_at {
                prop_assert!(same_side(p, s.tx) && p != s.tx);
            }
            for &(q, _) in &spec.neutralize_at {
                prop_assert!(same_side(q, s.rx) && q != s.rx);
            }
        }
    }
}

#[test]
fn every_stream_keeps_a_nonzero_effective_gain() {
    let opts = BuildOptions::default();
    let mut sets = 0;
    for t in 0..100 {
        let ch = generate_channel(&cfg(2, 4), derive_seed(&[21, t]), 0);
        let bf = build_full_2k(&ch, 2, &opts).unwrap();
        for s in StreamId::all(2) {
            let g = desired_coef(&ch, Some(&bf), true, s).norm();
            assert!(g > opts.eff_gain_floor);
        }
        sets += 1;
    }
    assert_eq!(sets, 100);
}

#[test]
fn other_schemes_meet_their_constraints() {
    let opts = BuildOptions::default();
    for t in 0..50 {
        let seed = derive_seed(&[31, t]);
        let ch3 = generate_channel(&cfg(2, 3), seed, 0);
        for slot in 0..4 {
            let bf = build_three_antenna_slot(&ch3, slot, &opts).unwrap();
            for s in bf.streams() {
                let (a, b) = constraint_rows(&bf, &ch3, s);
                assert!((&a * &bf.vectors[&s] - &b).norm() <= 1e-9 * b.norm().max(1.0));
            }
        }
        let ch_hd = generate_channel(&cfg(3, 6), seed, 1);
        let bf = build_half_duplex(&ch_hd, 3, &opts).unwrap();
        assert!(verify_constraints(&bf, &ch_hd).unwrap().max_residual < 1e-9);
        for s in StreamId::all(3) {
            for p in 1..=6 {
                let leak = ch_hd.from_relay(p).unwrap().dotc(&bf.vectors[&s]).norm();
                if p == s.rx {
                    assert!((leak - 1.0).abs() < 1e-9);
                } else if p != s.tx {
                    assert!(leak < 1e-9);
                }
            }
        }
        let ch_cog = generate_channel(&NetworkConfig::new(2, 2, RelayMode::CognitiveFull), seed, 0);
        let bf = build_cognitive(&ch_cog, &StreamId::all(2), &opts).unwrap();
        assert!(verify_constraints(&bf, &ch_cog).unwrap().max_residual < 1e-9);
    }
}
