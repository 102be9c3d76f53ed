//! Relay beamformer construction.
//!
//! Every scheme reduces to the same per-stream recipe. For a stream `tx → rx`
//! and each listening receiver `p` other than `tx` and `rx`:
//!
//! * if `p` hears `tx` over a direct link, the relay copy must cancel it:
//!   `h_{tx,p} + h_{R,p}ᴴ u = 0` (neutralization);
//! * otherwise `p` must not hear the stream at all: `h_{R,p}ᴴ u = 0` (nulling).
//!
//! The transmitter itself is skipped because it subtracts its own symbol as
//! self-interference. The stacked rows are solved at minimum norm.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{relay_receive_matrix, same_side, ChannelRealization, StreamId};
use crate::numerics::{hermitian_dot, least_norm_solve, rank_and_condition, CVector, LinearSystem, DEFAULT_TOL};
use crate::scheme::Scheme;

/// Relative residual every constructed beamformer must meet.
pub const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Relative rank tolerance for the constraint solve.
    pub tol: f64,
    /// Smallest acceptable effective desired gain magnitude.
    pub eff_gain_floor: f64,
}

impl BuildOptions {
    pub fn for_gain_max(gain_max: f64) -> Self {
        Self {
            tol: DEFAULT_TOL,
            eff_gain_floor: 1e-6 * gain_max,
        }
    }
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self::for_gain_max(10.0)
    }
}

/// Which nodes listen in the slot and whether direct links carry signal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReceiveModel {
    pub listeners: Vec<usize>,
    pub direct_paths: bool,
}

/// Linear conditions placed on one stream's beamformer.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub stream: StreamId,
    /// Receivers `p` with `h_{R,p}ᴴ u = 0`.
    pub null_at: Vec<usize>,
    /// Receivers `q` with `h_{R,q}ᴴ u = target`, the target being `-h_{tx,q}`.
    pub neutralize_at: Vec<(usize, Complex64)>,
    /// Optional `h_{R,rx}ᴴ u = value` row fixing the desired gain.
    pub gain_pin: Option<Complex64>,
}

impl ConstraintSpec {
    fn derive(stream: StreamId, receive: &ReceiveModel, ch: &ChannelRealization) -> Self {
        let mut null_at = Vec::new();
        let mut neutralize_at = Vec::new();
        for &p in &receive.listeners {
            if p == stream.tx || p == stream.rx {
                continue;
            }
            match ch.direct(stream.tx, p) {
                Some(h) if receive.direct_paths && !same_side(stream.tx, p) => neutralize_at.push((p, -h)),
                _ => null_at.push(p),
            }
        }
        Self {
            stream,
            null_at,
            neutralize_at,
            gain_pin: None,
        }
    }

    pub fn row_count(&self) -> usize {
        self.null_at.len() + self.neutralize_at.len() + usize::from(self.gain_pin.is_some())
    }

    /// Each row as `(receiver, target)`.
    fn rows(&self) -> Vec<(usize, Complex64)> {
        let zero = Complex64::new(0.0, 0.0);
        self.null_at
            .iter()
            .map(|&p| (p, zero))
            .chain(self.neutralize_at.iter().copied())
            .chain(self.gain_pin.map(|g| (self.stream.rx, g)))
            .collect()
    }

    fn solve(&self, ch: &ChannelRealization, tol: f64) -> Result<CVector> {
        let m = ch.m();
        let rows = self.rows();
        if rows.is_empty() {
            return Ok(CVector::zeros(m));
        }
        let mut stack = Vec::with_capacity(rows.len());
        for (p, target) in rows {
            let h = relay_link(ch, p)?;
            stack.push((h.iter().map(|x| x.conj()).collect(), target));
        }
        least_norm_solve(&LinearSystem::from_rows(m, &stack)?, tol)
    }
}

/// Relay beamformers for one slot, with the constraints that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub scheme: Scheme,
    pub vectors: BTreeMap<StreamId, CVector>,
    pub specs: BTreeMap<StreamId, ConstraintSpec>,
    pub receive: ReceiveModel,
    /// Streams the relay knows before transmission (cognitive schemes).
    pub known: Vec<StreamId>,
    /// `Σ ‖u‖²`, the relay transmit power for unit-power symbols.
    pub relay_tx_power_per_unit_symbol: f64,
}

impl BeamformerSet {
    pub fn streams(&self) -> Vec<StreamId> {
        self.vectors.keys().copied().collect()
    }

    /// Streams the relay must decode over the air.
    pub fn decoded_streams(&self) -> Vec<StreamId> {
        self.vectors
            .keys()
            .filter(|s| !self.known.contains(s))
            .copied()
            .collect()
    }

    pub fn required_relay_power(&self, p: f64) -> f64 {
        self.relay_tx_power_per_unit_symbol * p
    }

    /// Whether forwarding at user power `p` would exceed the relay budget.
    pub fn exceeds_relay_budget(&self, p: f64, p_r: f64) -> bool {
        self.required_relay_power(p) > p_r
    }
}

fn relay_link(ch: &ChannelRealization, node: usize) -> Result<&CVector> {
    ch.from_relay(node)
        .ok_or_else(|| Error::Dimension(format!("no relay link to node {node}")))
}

/// Coefficient multiplying stream `s`'s symbol at node `p` (before the `√P` scaling).
pub fn receive_coefficient(
    ch: &ChannelRealization,
    receive: &ReceiveModel,
    s: StreamId,
    u: Option<&CVector>,
    p: usize,
) -> Complex64 {
    let mut coef = Complex64::new(0.0, 0.0);
    if receive.direct_paths {
        if let Some(h) = ch.direct(s.tx, p) {
            coef += h;
        }
    }
    if let (Some(u), Some(h)) = (u, ch.from_relay(p)) {
        coef += hermitian_dot(h, u);
    }
    coef
}

fn build(
    ch: &ChannelRealization,
    scheme: Scheme,
    active: &[StreamId],
    receive: ReceiveModel,
    pin_gain: bool,
    known: Vec<StreamId>,
    opts: &BuildOptions,
) -> Result<BeamformerSet> {
    let mut vectors = BTreeMap::new();
    let mut specs = BTreeMap::new();
    for &s in active {
        let mut spec = ConstraintSpec::derive(s, &receive, ch);
        if pin_gain {
            spec.gain_pin = Some(Complex64::new(1.0, 0.0));
        }
        if spec.row_count() > ch.m() {
            return Err(Error::Precondition(format!(
                "stream {s} needs {} constraints but the relay has {} antennas",
                spec.row_count(),
                ch.m()
            )));
        }
        let u = spec.solve(ch, opts.tol)?;
        let residual = spec_residuals(&spec, &u, ch)?
            .into_iter()
            .map(|r| r.residual)
            .fold(0.0, f64::max);
        if residual > RESIDUAL_TOL {
            return Err(Error::ResidualExceeded { stream: s, residual });
        }
        let gain = receive_coefficient(ch, &receive, s, Some(&u), s.rx).norm();
        if gain < opts.eff_gain_floor {
            return Err(Error::EffectiveGainVanished {
                stream: s,
                magnitude: gain,
            });
        }
        vectors.insert(s, u);
        specs.insert(s, spec);
    }
    let power = vectors.values().map(|u| u.norm_squared()).sum();
    Ok(BeamformerSet {
        scheme,
        vectors,
        specs,
        receive,
        known,
        relay_tx_power_per_unit_symbol: power,
    })
}

fn require(ch: &ChannelRealization, k: usize, min_m: usize, what: &str) -> Result<()> {
    if ch.k() != k {
        return Err(Error::Precondition(format!(
            "{what}: channel has {} pairs, expected {k}",
            ch.k()
        )));
    }
    if ch.m() < min_m {
        return Err(Error::Precondition(format!(
            "{what} needs at least {min_m} relay antennas, channel has {}",
            ch.m()
        )));
    }
    Ok(())
}

/// One-shot scheme: each of the `2K` streams is nulled at the other
/// transmitters on its own side and neutralized at the other receivers on the
/// far side, giving `2K − 2` rows per beamformer.
pub fn build_full_2k(ch: &ChannelRealization, k: usize, opts: &BuildOptions) -> Result<BeamformerSet> {
    require(ch, k, 2 * k, "full_2k")?;
    let receive = ReceiveModel {
        listeners: (1..=2 * k).collect(),
        direct_paths: true,
    };
    build(ch, Scheme::Full2k, &StreamId::all(k), receive, false, Vec::new(), opts)
}

/// One slot of the three-antenna rotation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RotationSlot {
    pub transmitters: [usize; 3],
    pub active: Vec<StreamId>,
    pub silent: StreamId,
}

/// Transmitter subsets `{1,2,3}, {1,2,4}, {1,3,4}, {2,3,4}` for slots `0..4`.
pub fn rotation_schedule(slot: usize) -> Result<RotationSlot> {
    const SUBSETS: [[usize; 3]; 4] = [[1, 2, 3], [1, 2, 4], [1, 3, 4], [2, 3, 4]];
    let transmitters = *SUBSETS.get(slot).ok_or(Error::SlotOutOfRange(slot))?;
    let all = StreamId::all(2);
    let (active, silent): (Vec<_>, Vec<_>) = all.into_iter().partition(|s| transmitters.contains(&s.tx));
    Ok(RotationSlot {
        transmitters,
        active,
        silent: silent[0],
    })
}

/// Three-antenna scheme in the base slot (transmitter 4 silent).
pub fn build_three_antenna(ch: &ChannelRealization, opts: &BuildOptions) -> Result<BeamformerSet> {
    build_three_antenna_slot(ch, 0, opts)
}

/// Three-antenna scheme for one rotation slot. Only receivers with a desired
/// stream listen, so each beamformer carries one or two rows.
pub fn build_three_antenna_slot(ch: &ChannelRealization, slot: usize, opts: &BuildOptions) -> Result<BeamformerSet> {
    require(ch, 2, 3, "three_antenna")?;
    if ch.m() != 3 {
        return Err(Error::Precondition(format!(
            "three_antenna needs exactly 3 relay antennas, channel has {}",
            ch.m()
        )));
    }
    let rot = rotation_schedule(slot)?;
    let receive = ReceiveModel {
        listeners: rot.active.iter().map(|s| s.rx).collect(),
        direct_paths: true,
    };
    build(ch, Scheme::ThreeAntenna, &rot.active, receive, false, Vec::new(), opts)
}

/// Broadcast slot of the half-duplex scheme. Users hear only the relay; each
/// beamformer is nulled at every node except its own pair and carries a
/// unit-gain row at the intended receiver.
pub fn build_half_duplex(ch_slot2: &ChannelRealization, k: usize, opts: &BuildOptions) -> Result<BeamformerSet> {
    require(ch_slot2, k, 2 * k, "half_duplex")?;
    let receive = ReceiveModel {
        listeners: (1..=2 * k).collect(),
        direct_paths: false,
    };
    build(ch_slot2, Scheme::HalfDuplex, &StreamId::all(k), receive, true, Vec::new(), opts)
}

/// Two-antenna cognitive relay for two pairs. `known` is either all four
/// streams or both streams of one pair.
pub fn build_cognitive(
    ch: &ChannelRealization,
    known: &[StreamId],
    opts: &BuildOptions,
) -> Result<BeamformerSet> {
    require(ch, 2, 2, "cognitive")?;
    let all = StreamId::all(2);
    let mut known: Vec<StreamId> = known.to_vec();
    known.sort();
    known.dedup();
    let scheme = match known.len() {
        4 => Scheme::CognitiveFull,
        2 if known[0].reverse() == known[1] => Scheme::CognitivePartial,
        n => {
            return Err(Error::Precondition(format!(
                "cognitive relay must know all 4 streams or one pair's 2 streams, got {n}"
            )))
        }
    };
    if known.iter().any(|s| !all.contains(s)) {
        return Err(Error::Precondition("known streams must belong to the two pairs".into()));
    }
    if scheme == Scheme::CognitivePartial {
        let unknown: Vec<StreamId> = all.iter().filter(|s| !known.contains(s)).copied().collect();
        let a = relay_receive_matrix(ch, &unknown)?;
        let rc = rank_and_condition(&a, opts.tol);
        if rc.rank < unknown.len() || unknown.len() > a.nrows() {
            return Err(Error::CognitionInsufficient { rank: rc.rank });
        }
    }
    let receive = ReceiveModel {
        listeners: (1..=4).collect(),
        direct_paths: true,
    };
    build(ch, scheme, &all, receive, false, known, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Null,
    Neutralize,
    GainPin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowResidual {
    pub stream: StreamId,
    pub kind: RowKind,
    pub receiver: usize,
    pub residual: f64,
}

fn spec_residuals(spec: &ConstraintSpec, u: &CVector, ch: &ChannelRealization) -> Result<Vec<RowResidual>> {
    let mut out = Vec::with_capacity(spec.row_count());
    for &p in &spec.null_at {
        let h = relay_link(ch, p)?;
        let residual = hermitian_dot(h, u).norm() / (h.norm() * u.norm() + f64::MIN_POSITIVE);
        out.push(RowResidual {
            stream: spec.stream,
            kind: RowKind::Null,
            receiver: p,
            residual,
        });
    }
    for &(q, target) in &spec.neutralize_at {
        let h = relay_link(ch, q)?;
        let residual = (hermitian_dot(h, u) - target).norm() / target.norm();
        out.push(RowResidual {
            stream: spec.stream,
            kind: RowKind::Neutralize,
            receiver: q,
            residual,
        });
    }
    if let Some(target) = spec.gain_pin {
        let h = relay_link(ch, spec.stream.rx)?;
        let residual = (hermitian_dot(h, u) - target).norm() / target.norm();
        out.push(RowResidual {
            stream: spec.stream,
            kind: RowKind::GainPin,
            receiver: spec.stream.rx,
            residual,
        });
    }
    Ok(out)
}

/// Residuals of every constraint row plus gains and relay power.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualReport {
    pub rows: Vec<RowResidual>,
    pub max_null: f64,
    pub max_neutralize: f64,
    pub max_residual: f64,
    pub effective_gains: BTreeMap<StreamId, f64>,
    pub relay_tx_power_per_unit_symbol: f64,
}

impl ResidualReport {
    pub fn max_of(&self, kind: RowKind) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| r.residual)
            .fold(0.0, f64::max)
    }
}

pub fn verify_constraints(bf: &BeamformerSet, ch: &ChannelRealization) -> Result<ResidualReport> {
    let mut rows = Vec::new();
    let mut effective_gains = BTreeMap::new();
    for (s, spec) in &bf.specs {
        let u = &bf.vectors[s];
        rows.extend(spec_residuals(spec, u, ch)?);
        effective_gains.insert(*s, receive_coefficient(ch, &bf.receive, *s, Some(u), s.rx).norm());
    }
    let mut report = ResidualReport {
        rows,
        max_null: 0.0,
        max_neutralize: 0.0,
        max_residual: 0.0,
        effective_gains,
        relay_tx_power_per_unit_symbol: bf.vectors.values().map(|u| u.norm_squared()).sum(),
    };
    report.max_null = report.max_of(RowKind::Null);
    report.max_neutralize = report.max_of(RowKind::Neutralize);
    report.max_residual = report.rows.iter().map(|r| r.residual).fold(0.0, f64::max);
    Ok(report)
}

fn re_im(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Text dump of one stream's beamformer.
#[derive(Debug, Clone, Serialize)]
pub struct StreamDump {
    pub stream: String,
    pub vector: Vec<[f64; 2]>,
    pub null_at: Vec<usize>,
    pub neutralize_at: Vec<(usize, [f64; 2])>,
    pub gain_pin: Option<[f64; 2]>,
    pub effective_gain: f64,
    pub residuals: Vec<(String, usize, f64)>,
}

/// Serializable view of a [`BeamformerSet`] together with its residuals.
#[derive(Debug, Clone, Serialize)]
pub struct BeamformerDump {
    pub scheme: Scheme,
    pub known: Vec<String>,
    pub relay_tx_power_per_unit_symbol: f64,
    pub max_residual: f64,
    pub streams: Vec<StreamDump>,
}

impl BeamformerDump {
    pub fn new(bf: &BeamformerSet, ch: &ChannelRealization) -> Result<Self> {
        let report = verify_constraints(bf, ch)?;
        let streams = bf
            .specs
            .iter()
            .map(|(s, spec)| StreamDump {
                stream: s.to_string(),
                vector: bf.vectors[s].iter().copied().map(re_im).collect(),
                null_at: spec.null_at.clone(),
                neutralize_at: spec.neutralize_at.iter().map(|&(q, t)| (q, re_im(t))).collect(),
                gain_pin: spec.gain_pin.map(re_im),
                effective_gain: report.effective_gains[s],
                residuals: report
                    .rows
                    .iter()
                    .filter(|r| r.stream == *s)
                    .map(|r| (format!("{:?}", r.kind).to_lowercase(), r.receiver, r.residual))
                    .collect(),
            })
            .collect();
        Ok(Self {
            scheme: bf.scheme,
            known: bf.known.iter().map(|s| s.to_string()).collect(),
            relay_tx_power_per_unit_symbol: report.relay_tx_power_per_unit_symbol,
            max_residual: report.max_residual,
            streams,
        })
    }
}
