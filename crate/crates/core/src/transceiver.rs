//! End-to-end simulation of one transmission slot.
//!
//! Users send `√P · s` on every active stream. The relay zero-forces the
//! streams it does not already know, forwards `X_R = √P Σ u ŝ` in the same
//! slot, and each listening node removes its own stream's relay echo before
//! reading its desired symbol.
//!
//! Stream rates follow `log2(1 + min(SNR_relay, SINR_rx))`. The receiver SINR
//! counts the relay's forwarded decoding noise in its noise term; both
//! quantities grow linearly in `P`, so they do not change the sum-rate slope.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::beamforming::{receive_coefficient, BeamformerSet, ReceiveModel};
use crate::error::{Error, Result};
use crate::model::{derive_seed, relay_receive_matrix, same_side, ChannelRealization, NetworkConfig, StreamId, SymbolFrame};
use crate::numerics::{hermitian_dot, pinv_apply, pseudo_inverse, CMatrix, CVector, DEFAULT_TOL};
use crate::scheme::Scheme;

/// Whether receiver and relay noise samples are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Noise {
    Off,
    Seeded(u64),
}

/// Power-independent description of how one stream reaches its receiver.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamBudget {
    pub stream: StreamId,
    /// Effective desired coefficient at the receiver.
    pub gain: Complex64,
    /// `Σ |coef|²` over interference and undesired streams left at the receiver.
    pub leakage: f64,
    /// Receiver noise multiplier: one plus the forwarded relay noise.
    pub noise_factor: f64,
    /// `[(AᴴA)⁻¹]_ii` of the relay decoder, `None` when the relay does not decode this stream.
    pub relay_noise_factor: Option<f64>,
    /// Fraction of a channel use the stream occupies.
    pub rate_scale: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::INFINITY
    }
}

impl StreamBudget {
    pub fn sinr_rx(&self, p: f64, noise_var: f64) -> f64 {
        ratio(self.gain.norm_sqr() * p, noise_var * self.noise_factor + self.leakage * p)
    }

    pub fn snr_relay(&self, p: f64, noise_var: f64) -> f64 {
        match self.relay_noise_factor {
            Some(f) => ratio(p, noise_var * f),
            None => f64::INFINITY,
        }
    }

    pub fn rate(&self, p: f64, noise_var: f64) -> f64 {
        let snr = self.sinr_rx(p, noise_var).min(self.snr_relay(p, noise_var));
        self.rate_scale * (1.0 + snr).log2()
    }
}

/// Sum of stream rates at power `p`.
pub fn sum_rate(budget: &[StreamBudget], p: f64, noise_var: f64) -> f64 {
    budget.iter().map(|b| b.rate(p, noise_var)).sum()
}

/// Role of a stream as heard by a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalKind {
    Desired,
    SelfInterference,
    /// Opposite-side transmitter aimed at another receiver (reaches the node directly).
    Interference,
    /// Same-side transmitter (reaches the node only through the relay).
    Undesired,
}

pub fn classify(s: StreamId, node: usize) -> SignalKind {
    if s.rx == node {
        SignalKind::Desired
    } else if s.tx == node {
        SignalKind::SelfInterference
    } else if same_side(s.tx, node) {
        SignalKind::Undesired
    } else {
        SignalKind::Interference
    }
}

/// A node's received sample split by signal type.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReceiveDecomposition {
    pub desired: Complex64,
    pub self_interference: Complex64,
    pub interference: Complex64,
    pub undesired: Complex64,
    /// Receiver noise plus forwarded relay noise.
    pub noise: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotResult {
    /// Raw received sample at each listening node.
    pub received: BTreeMap<usize, Complex64>,
    /// Received sample after self-interference subtraction.
    pub post_si: BTreeMap<usize, Complex64>,
    pub decomposition: BTreeMap<usize, ReceiveDecomposition>,
    pub relay_received: CVector,
    /// Contribution of known streams removed before decoding (partially cognitive relay).
    pub relay_known_contribution: Option<CVector>,
    /// Relay estimates of the over-the-air streams, normalized by `√P`.
    pub relay_decoded: BTreeMap<StreamId, Complex64>,
    pub per_stream_sinr_rx: BTreeMap<StreamId, f64>,
    pub per_stream_snr_relay: BTreeMap<StreamId, f64>,
    pub per_stream_rate: BTreeMap<StreamId, f64>,
    pub residual_interference_power: BTreeMap<usize, f64>,
    pub decode_ok: BTreeMap<StreamId, bool>,
    /// Relay transmit power `‖X_R‖²` of this slot.
    pub relay_power: f64,
    pub relay_power_exceeded: bool,
}

impl SlotResult {
    pub fn sum_rate(&self) -> f64 {
        self.per_stream_rate.values().sum()
    }
}

struct NoiseSource(Option<ChaCha8Rng>);

impl NoiseSource {
    fn new(noise: Noise, slot: u64) -> Self {
        match noise {
            Noise::Off => Self(None),
            Noise::Seeded(seed) => Self(Some(ChaCha8Rng::seed_from_u64(derive_seed(&[seed, slot, 0x4e4f_4953])))),
        }
    }

    fn sample(&mut self, var: f64) -> Complex64 {
        match &mut self.0 {
            None => Complex64::new(0.0, 0.0),
            Some(rng) => {
                let sd = (var / 2.0).sqrt();
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                Complex64::new(sd * re, sd * im)
            }
        }
    }

    fn vector(&mut self, len: usize, var: f64) -> CVector {
        CVector::from_fn(len, |_, _| self.sample(var))
    }
}

/// How the relay participates in a slot.
struct RelayPlan<'a> {
    bf: &'a BeamformerSet,
    /// Channel the relay listened on.
    ch_listen: &'a ChannelRealization,
    /// Over-the-air streams and the decoder's pseudo-inverse.
    decoded: Vec<StreamId>,
    pinv: CMatrix,
}

impl<'a> RelayPlan<'a> {
    fn new(bf: &'a BeamformerSet, ch_listen: &'a ChannelRealization) -> Result<Self> {
        let decoded = bf.decoded_streams();
        let pinv = if decoded.is_empty() {
            CMatrix::zeros(0, ch_listen.m())
        } else {
            let a = relay_receive_matrix(ch_listen, &decoded)?;
            pseudo_inverse(&a, DEFAULT_TOL).map_err(|e| match (bf.scheme, e) {
                (Scheme::CognitivePartial, Error::RankDeficient { rank, .. }) => Error::CognitionInsufficient { rank },
                (_, e) => e,
            })?
        };
        Ok(Self {
            bf,
            ch_listen,
            decoded,
            pinv,
        })
    }

    /// `‖h_{R,p}ᴴ U_d A⁺‖²`: forwarded decoding noise reaching node `p` per unit noise variance.
    fn forwarded_noise(&self, ch_rx: &ChannelRealization, p: usize) -> f64 {
        let Some(h) = ch_rx.from_relay(p) else {
            return 0.0;
        };
        if self.decoded.is_empty() {
            return 0.0;
        }
        let weights = CVector::from_iterator(
            self.decoded.len(),
            self.decoded.iter().map(|s| hermitian_dot(h, &self.bf.vectors[s])),
        );
        // row vector weightsᵀ A⁺
        (self.pinv.transpose() * weights).norm_squared()
    }

    fn relay_noise_factor(&self, s: StreamId) -> Option<f64> {
        let i = self.decoded.iter().position(|&d| d == s)?;
        Some(self.pinv.row(i).norm_squared())
    }
}

fn listeners_of(bf: Option<&BeamformerSet>, streams: &[StreamId]) -> ReceiveModel {
    match bf {
        Some(bf) => bf.receive.clone(),
        None => ReceiveModel {
            listeners: streams.iter().map(|s| s.rx).collect(),
            direct_paths: true,
        },
    }
}

fn budgets(
    ch_rx: &ChannelRealization,
    plan: Option<&RelayPlan<'_>>,
    receive: &ReceiveModel,
    streams: &[StreamId],
    rate_scale: f64,
) -> Vec<StreamBudget> {
    let u_of = |s: StreamId| plan.map(|p| &p.bf.vectors[&s]);
    streams
        .iter()
        .filter(|s| receive.listeners.contains(&s.rx))
        .map(|&s| {
            let p = s.rx;
            let leakage = streams
                .iter()
                .filter(|o| matches!(classify(**o, p), SignalKind::Interference | SignalKind::Undesired))
                .map(|&o| receive_coefficient(ch_rx, receive, o, u_of(o), p).norm_sqr())
                .sum();
            StreamBudget {
                stream: s,
                gain: receive_coefficient(ch_rx, receive, s, u_of(s), p),
                leakage,
                noise_factor: 1.0 + plan.map_or(0.0, |pl| pl.forwarded_noise(ch_rx, p)),
                relay_noise_factor: plan.and_then(|pl| pl.relay_noise_factor(s)),
                rate_scale,
            }
        })
        .collect()
}

/// Link budget of a full-duplex slot. `bf = None` means the relay is off.
pub fn slot_budget(ch: &ChannelRealization, bf: Option<&BeamformerSet>, streams: &[StreamId]) -> Result<Vec<StreamBudget>> {
    let receive = listeners_of(bf, streams);
    let plan = bf.map(|bf| RelayPlan::new(bf, ch)).transpose()?;
    Ok(budgets(ch, plan.as_ref(), &receive, streams, 1.0))
}

/// Link budget of a half-duplex round: relay listens on `ch_slot1`, broadcasts on `ch_slot2`.
pub fn half_duplex_budget(
    ch_slot1: &ChannelRealization,
    ch_slot2: &ChannelRealization,
    bf: &BeamformerSet,
) -> Result<Vec<StreamBudget>> {
    let plan = RelayPlan::new(bf, ch_slot1)?;
    Ok(budgets(ch_slot2, Some(&plan), &bf.receive, &bf.streams(), 0.5))
}

fn check_frame(frame: &SymbolFrame, bf: Option<&BeamformerSet>) -> Result<Vec<StreamId>> {
    let streams = frame.streams();
    if let Some(bf) = bf {
        if streams != bf.streams() {
            return Err(Error::SchemeMismatch(bf.scheme.to_string()));
        }
    } else if streams.is_empty() {
        return Err(Error::SchemeMismatch("relay-free slot without streams".into()));
    }
    Ok(streams)
}

fn run(
    cfg: &NetworkConfig,
    ch_rx: &ChannelRealization,
    relay: Option<(&BeamformerSet, &ChannelRealization)>,
    frame: &SymbolFrame,
    noise: Noise,
    rate_scale: f64,
) -> Result<SlotResult> {
    let bf = relay.map(|r| r.0);
    let streams = check_frame(frame, bf)?;
    let receive = listeners_of(bf, &streams);
    let sqrt_p = cfg.p.sqrt();
    let mut rng = NoiseSource::new(noise, frame.slot_index);
    let sym = |s: &StreamId| frame.symbols[s];

    let plan = relay.map(|(bf, ch_listen)| RelayPlan::new(bf, ch_listen)).transpose()?;

    let mut relay_received = CVector::zeros(0);
    let mut relay_known_contribution = None;
    let mut relay_decoded = BTreeMap::new();
    let mut x_r = CVector::zeros(ch_rx.m());
    let mut relay_power_exceeded = false;
    if let Some(plan) = &plan {
        let m = plan.ch_listen.m();
        let mut y_r = rng.vector(m, cfg.noise_var);
        for s in &streams {
            y_r += plan.ch_listen.to_relay(s.tx).expect("relay present") * (sym(s) * sqrt_p);
        }
        relay_received = y_r.clone();
        let mut residual = y_r;
        if !plan.bf.known.is_empty() {
            let mut known = CVector::zeros(m);
            for s in &plan.bf.known {
                known += plan.ch_listen.to_relay(s.tx).expect("relay present") * (sym(s) * sqrt_p);
            }
            residual -= &known;
            relay_known_contribution = Some(known);
        }
        if !plan.decoded.is_empty() {
            let a = relay_receive_matrix(plan.ch_listen, &plan.decoded)?;
            let est = pinv_apply(&a, &residual, DEFAULT_TOL)?;
            for (s, e) in plan.decoded.iter().zip(est.iter()) {
                relay_decoded.insert(*s, e / sqrt_p);
            }
        }
        for (s, u) in &plan.bf.vectors {
            let value = relay_decoded.get(s).copied().unwrap_or_else(|| sym(s));
            x_r += u * (value * sqrt_p);
        }
        relay_power_exceeded = plan.bf.exceeds_relay_budget(cfg.p, cfg.p_r);
    }
    let relay_power = x_r.norm_squared();

    let u_of = |s: StreamId| plan.as_ref().map(|p| &p.bf.vectors[&s]);
    let mut received = BTreeMap::new();
    let mut post_si = BTreeMap::new();
    let mut decomposition = BTreeMap::new();
    let mut residual_interference_power = BTreeMap::new();
    for &node in &receive.listeners {
        let mut y = rng.sample(cfg.noise_var);
        if receive.direct_paths {
            for s in &streams {
                if let Some(h) = ch_rx.direct(s.tx, node) {
                    y += h * sym(s) * sqrt_p;
                }
            }
        }
        if plan.is_some() {
            if let Some(h) = ch_rx.from_relay(node) {
                y += hermitian_dot(h, &x_r);
            }
        }
        let mut parts = ReceiveDecomposition::default();
        let mut leak = 0.0;
        for &s in &streams {
            let coef = receive_coefficient(ch_rx, &receive, s, u_of(s), node);
            let term = coef * sym(&s) * sqrt_p;
            match classify(s, node) {
                SignalKind::Desired => parts.desired += term,
                SignalKind::SelfInterference => parts.self_interference += term,
                SignalKind::Interference => {
                    parts.interference += term;
                    leak += coef.norm_sqr() * cfg.p;
                }
                SignalKind::Undesired => {
                    parts.undesired += term;
                    leak += coef.norm_sqr() * cfg.p;
                }
            }
        }
        parts.noise = y - parts.desired - parts.self_interference - parts.interference - parts.undesired;
        received.insert(node, y);
        post_si.insert(node, y - parts.self_interference);
        decomposition.insert(node, parts);
        residual_interference_power.insert(node, leak);
    }

    let budget = budgets(ch_rx, plan.as_ref(), &receive, &streams, rate_scale);
    let mut per_stream_sinr_rx = BTreeMap::new();
    let mut per_stream_snr_relay = BTreeMap::new();
    let mut per_stream_rate = BTreeMap::new();
    let mut decode_ok = BTreeMap::new();
    for b in &budget {
        let s = b.stream;
        per_stream_sinr_rx.insert(s, b.sinr_rx(cfg.p, cfg.noise_var));
        per_stream_snr_relay.insert(s, b.snr_relay(cfg.p, cfg.noise_var));
        per_stream_rate.insert(s, b.rate(cfg.p, cfg.noise_var));
        let estimate = post_si[&s.rx] / (b.gain * sqrt_p);
        decode_ok.insert(s, (estimate - sym(&s)).norm() < 0.5);
    }

    Ok(SlotResult {
        received,
        post_si,
        decomposition,
        relay_received,
        relay_known_contribution,
        relay_decoded,
        per_stream_sinr_rx,
        per_stream_snr_relay,
        per_stream_rate,
        residual_interference_power,
        decode_ok,
        relay_power,
        relay_power_exceeded,
    })
}

/// Simulates one full-duplex slot. With `bf = None` the relay is silent and
/// only direct links carry signal.
pub fn simulate_slot(
    cfg: &NetworkConfig,
    ch: &ChannelRealization,
    bf: Option<&BeamformerSet>,
    frame: &SymbolFrame,
    noise: Noise,
) -> Result<SlotResult> {
    if let Some(bf) = bf {
        if bf.scheme == Scheme::HalfDuplex {
            return Err(Error::SchemeMismatch(
                "half_duplex beamformers need simulate_half_duplex_round".into(),
            ));
        }
    }
    run(cfg, ch, bf.map(|bf| (bf, ch)), frame, noise, 1.0)
}

/// Two-slot half-duplex round: users transmit while the relay listens on
/// `ch_slot1`, then the relay broadcasts on `ch_slot2`. Rates are per channel
/// use, i.e. halved.
pub fn simulate_half_duplex_round(
    cfg: &NetworkConfig,
    ch_slot1: &ChannelRealization,
    ch_slot2: &ChannelRealization,
    bf: &BeamformerSet,
    frame: &SymbolFrame,
    noise: Noise,
) -> Result<SlotResult> {
    if bf.scheme != Scheme::HalfDuplex {
        return Err(Error::SchemeMismatch(bf.scheme.to_string()));
    }
    if ch_slot1.m() < 2 * cfg.k || ch_slot2.m() < 2 * cfg.k {
        return Err(Error::Precondition("half-duplex round needs a 2k-antenna relay".into()));
    }
    run(cfg, ch_slot2, Some((bf, ch_slot1)), frame, noise, 0.5)
}

/// Relay-free time sharing: one pair per slot, both directions at once.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineRound {
    pub slots: Vec<SlotResult>,
    /// Sum rate averaged over the `K` slots.
    pub sum_rate: f64,
}

/// Frames for a baseline round; slot `t` carries pair `t + 1`.
pub fn baseline_frames(k: usize, seed: u64) -> Vec<SymbolFrame> {
    (0..k)
        .map(|t| SymbolFrame::random(&StreamId::pair(t + 1), seed, t as u64))
        .collect()
}

pub fn tdma_baseline_round(
    cfg: &NetworkConfig,
    ch_list: &[ChannelRealization],
    frames: &[SymbolFrame],
    noise: Noise,
) -> Result<BaselineRound> {
    if ch_list.len() != cfg.k || frames.len() != cfg.k {
        return Err(Error::Precondition(format!(
            "baseline round needs {} channels and frames",
            cfg.k
        )));
    }
    let mut slots = Vec::with_capacity(cfg.k);
    for (t, (ch, frame)) in ch_list.iter().zip(frames).enumerate() {
        if frame.streams() != StreamId::pair(t + 1) {
            return Err(Error::SchemeMismatch(Scheme::TdmaBaseline.to_string()));
        }
        slots.push(simulate_slot(cfg, ch, None, frame, noise)?);
    }
    let sum_rate = slots.iter().map(SlotResult::sum_rate).sum::<f64>() / cfg.k as f64;
    Ok(BaselineRound { slots, sum_rate })
}
