//! Independent reference computations shared by the integration tests.
//!
//! Nothing here goes through the crate's SVD path: least-norm and feasible
//! points come from LU solves of the normal equations, and received signals
//! are summed link by link from the channel.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use twic_core::beamforming::BeamformerSet;
use twic_core::model::{ChannelRealization, StreamId, SymbolFrame};

pub type M = DMatrix<Complex64>;
pub type V = DVector<Complex64>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn cgauss(rng: &mut ChaCha8Rng) -> Complex64 {
    // Box-Muller keeps this independent of rand_distr
    let u1: f64 = rng.random_range(f64::EPSILON..1.0);
    let u2: f64 = rng.random();
    let r = (-u1.ln()).sqrt();
    let t = std::f64::consts::TAU * u2;
    Complex64::new(r * t.cos(), r * t.sin())
}

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> M {
    let mut r = rng(seed);
    M::from_fn(rows, cols, |_, _| cgauss(&mut r))
}

pub fn random_vector(len: usize, seed: u64) -> V {
    let mut r = rng(seed);
    V::from_fn(len, |_, _| cgauss(&mut r))
}

/// `Aᴴ (A Aᴴ)⁻¹ b` for a wide full-row-rank `A`.
pub fn min_norm_lu(a: &M, b: &V) -> V {
    let gram = a * a.adjoint();
    let y = gram.lu().solve(b).expect("gram matrix is invertible");
    a.adjoint() * y
}

/// Feasible point of `A x = b` with the trailing `n - r` coordinates set to `w`.
pub fn feasible_point(a: &M, b: &V, w: &V) -> V {
    let r = a.nrows();
    let n = a.ncols();
    assert_eq!(w.len(), n - r);
    let a1 = a.columns(0, r).into_owned();
    let a2 = a.columns(r, n - r).into_owned();
    let head = a1.lu().solve(&(b - &a2 * w)).expect("leading block is invertible");
    let mut x = V::zeros(n);
    x.rows_mut(0, r).copy_from(&head);
    x.rows_mut(r, n - r).copy_from(w);
    x
}

/// `(AᴴA)⁻¹` diagonal for a tall full-column-rank `A`.
pub fn zf_noise_diag(a: &M) -> Vec<f64> {
    let inv = (a.adjoint() * a).try_inverse().expect("full column rank");
    (0..a.ncols()).map(|i| inv[(i, i)].re).collect()
}

/// Constraint rows of one beamformer as a matrix/rhs pair, built from the
/// spec's receiver lists and the channel directly.
pub fn constraint_rows(bf: &BeamformerSet, ch: &ChannelRealization, s: StreamId) -> (M, V) {
    let spec = &bf.specs[&s];
    let m = ch.m();
    let mut rows: Vec<(V, Complex64)> = Vec::new();
    for &p in &spec.null_at {
        rows.push((ch.from_relay(p).unwrap().clone(), Complex64::new(0.0, 0.0)));
    }
    for &(q, _) in &spec.neutralize_at {
        let direct = ch.direct(s.tx, q).expect("neutralized receiver has a direct link");
        rows.push((ch.from_relay(q).unwrap().clone(), -direct));
    }
    if let Some(g) = spec.gain_pin {
        rows.push((ch.from_relay(s.rx).unwrap().clone(), g));
    }
    let a = M::from_fn(rows.len(), m, |i, j| rows[i].0[j].conj());
    let b = V::from_iterator(rows.len(), rows.iter().map(|r| r.1));
    (a, b)
}

/// Noiseless signal at `node` after subtracting its own stream's relay echo,
/// assuming the relay forwards the true symbols.
pub fn post_si_signal(
    ch: &ChannelRealization,
    bf: Option<&BeamformerSet>,
    direct_paths: bool,
    frame: &SymbolFrame,
    p: f64,
    node: usize,
) -> Complex64 {
    let sp = p.sqrt();
    let mut y = Complex64::new(0.0, 0.0);
    for (s, x) in &frame.symbols {
        if direct_paths {
            if let Some(h) = ch.direct(s.tx, node) {
                y += h * x * sp;
            }
        }
        if s.tx == node {
            continue;
        }
        if let (Some(bf), Some(h)) = (bf, ch.from_relay(node)) {
            let u = &bf.vectors[s];
            y += h.dotc(u) * x * sp;
        }
    }
    y
}

/// Desired coefficient `h_{tx,rx} + h_{R,rx}ᴴ u` of stream `s`.
pub fn desired_coef(ch: &ChannelRealization, bf: Option<&BeamformerSet>, direct_paths: bool, s: StreamId) -> Complex64 {
    let mut g = Complex64::new(0.0, 0.0);
    if direct_paths {
        g += ch.direct(s.tx, s.rx).unwrap_or_default();
    }
    if let (Some(bf), Some(h)) = (bf, ch.from_relay(s.rx)) {
        g += h.dotc(&bf.vectors[&s]);
    }
    g
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1e-300)
}
