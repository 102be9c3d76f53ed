//! Scenario description, stream identifiers and random channel realizations.
//!
//! Nodes are numbered `1..=2K`. Odd nodes sit on one side of the network and
//! even nodes on the other; node `2i-1` exchanges messages with node `2i`.
//! Direct links exist only between opposite sides. Every node also has a
//! vector channel to and from the relay when the relay has antennas.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{rank_and_condition, CMatrix, CVector, DEFAULT_TOL};

/// Relay-matrix condition numbers above this are treated as degenerate draws.
pub const DEFAULT_COND_CEILING: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelayMode {
    None,
    Instantaneous,
    CausalReferenceOnly,
    CognitiveFull,
    CognitivePartial,
}

impl RelayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RelayMode::None => "none",
            RelayMode::Instantaneous => "instantaneous",
            RelayMode::CausalReferenceOnly => "causal_reference_only",
            RelayMode::CognitiveFull => "cognitive_full",
            RelayMode::CognitivePartial => "cognitive_partial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Duplex {
    Full,
    Half,
}

/// Static description of a scenario. Powers are linear.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Number of user pairs.
    pub k: usize,
    /// Relay antenna count; zero means no relay.
    pub m: usize,
    pub relay_mode: RelayMode,
    pub duplex: Duplex,
    pub gain_min: f64,
    pub gain_max: f64,
    /// Transmit power per user per symbol.
    pub p: f64,
    /// Relay power budget.
    pub p_r: f64,
    /// Per-antenna complex noise variance.
    pub noise_var: f64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            k: 2,
            m: 4,
            relay_mode: RelayMode::Instantaneous,
            duplex: Duplex::Full,
            gain_min: 0.1,
            gain_max: 10.0,
            p: 1e4,
            p_r: 1e4,
            noise_var: 1.0,
        }
    }
}

impl NetworkConfig {
    /// Full-duplex scenario with the given pair count, relay size and mode, default gains and powers.
    pub fn new(k: usize, m: usize, relay_mode: RelayMode) -> Self {
        Self {
            k,
            m,
            relay_mode,
            ..Self::default()
        }
    }

    pub fn relay_free(k: usize) -> Self {
        Self::new(k, 0, RelayMode::None)
    }

    pub fn with_duplex(mut self, duplex: Duplex) -> Self {
        self.duplex = duplex;
        self
    }

    pub fn with_power(mut self, p: f64) -> Self {
        self.p = p;
        self.p_r = p;
        self
    }

    pub fn with_noise_var(mut self, noise_var: f64) -> Self {
        self.noise_var = noise_var;
        self
    }

    pub fn nodes(&self) -> usize {
        2 * self.k
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be positive".into()));
        }
        if !(self.gain_min > 0.0 && self.gain_min <= self.gain_max && self.gain_max.is_finite()) {
            return Err(Error::Config(format!(
                "gain bounds must satisfy 0 < gain_min <= gain_max < inf (got {} and {})",
                self.gain_min, self.gain_max
            )));
        }
        if self.relay_mode != RelayMode::None && self.m == 0 {
            return Err(Error::Config(format!(
                "relay mode {} needs at least one relay antenna",
                self.relay_mode.as_str()
            )));
        }
        if self.relay_mode == RelayMode::CognitivePartial && (self.k != 2 || self.m != 2) {
            return Err(Error::Config(
                "cognitive_partial is defined for k = 2 and m = 2 only".into(),
            ));
        }
        if !(self.p > 0.0 && self.p.is_finite()) || !(self.p_r >= 0.0 && self.p_r.is_finite()) {
            return Err(Error::Config("powers must be positive and finite".into()));
        }
        if !(self.noise_var >= 0.0 && self.noise_var.is_finite()) {
            return Err(Error::Config("noise_var must be nonnegative".into()));
        }
        Ok(())
    }
}

/// A unicast stream from `tx` to its pair partner `rx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub tx: usize,
    pub rx: usize,
}

impl StreamId {
    pub fn new(tx: usize, rx: usize) -> Result<Self> {
        if tx == 0 || rx == 0 || partner(tx) != rx {
            return Err(Error::Precondition(format!(
                "nodes {tx} and {rx} are not a user pair"
            )));
        }
        Ok(Self { tx, rx })
    }

    /// Both streams of pair `i` (1-based): `2i-1 → 2i` then `2i → 2i-1`.
    pub fn pair(i: usize) -> [StreamId; 2] {
        [
            StreamId { tx: 2 * i - 1, rx: 2 * i },
            StreamId { tx: 2 * i, rx: 2 * i - 1 },
        ]
    }

    /// All `2K` streams ordered by transmitter.
    pub fn all(k: usize) -> Vec<StreamId> {
        (1..=k).flat_map(StreamId::pair).collect()
    }

    pub fn pair_index(&self) -> usize {
        self.tx.div_ceil(2)
    }

    pub fn reverse(&self) -> StreamId {
        StreamId {
            tx: self.rx,
            rx: self.tx,
        }
    }
}

impl fmt::Display for StreamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.tx < 10 && self.rx < 10 {
            write!(f, "s{}{}", self.tx, self.rx)
        } else {
            write!(f, "s{},{}", self.tx, self.rx)
        }
    }
}

/// Pair partner of a node.
pub fn partner(node: usize) -> usize {
    if node % 2 == 1 {
        node + 1
    } else {
        node - 1
    }
}

/// Whether two nodes sit on the same side (and therefore share no direct link).
pub fn same_side(a: usize, b: usize) -> bool {
    a % 2 == b % 2
}

/// One slot's channel coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    k: usize,
    m: usize,
    slot: u64,
    direct: BTreeMap<(usize, usize), Complex64>,
    to_relay: Vec<CVector>,
    from_relay: Vec<CVector>,
}

impl ChannelRealization {
    /// Assembles a realization from explicit gains. `to_relay[i]` and
    /// `from_relay[i]` belong to node `i + 1`.
    pub fn from_parts(
        k: usize,
        m: usize,
        direct: BTreeMap<(usize, usize), Complex64>,
        to_relay: Vec<CVector>,
        from_relay: Vec<CVector>,
    ) -> Result<Self> {
        let nodes = 2 * k;
        for &(i, j) in direct.keys() {
            if i == 0 || j == 0 || i > nodes || j > nodes || same_side(i, j) {
                return Err(Error::Dimension(format!("invalid direct link {i}->{j}")));
            }
        }
        let expected = if m == 0 { 0 } else { nodes };
        if to_relay.len() != expected || from_relay.len() != expected {
            return Err(Error::Dimension(format!(
                "expected {expected} relay vectors per direction"
            )));
        }
        if to_relay.iter().chain(&from_relay).any(|v| v.len() != m) {
            return Err(Error::Dimension(format!("relay vectors must have length {m}")));
        }
        Ok(Self {
            k,
            m,
            slot: 0,
            direct,
            to_relay,
            from_relay,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    /// Direct gain `h_{tx,rx}`; `None` for same-side node pairs.
    pub fn direct(&self, tx: usize, rx: usize) -> Option<Complex64> {
        self.direct.get(&(tx, rx)).copied()
    }

    pub fn direct_links(&self) -> impl Iterator<Item = ((usize, usize), Complex64)> + '_ {
        self.direct.iter().map(|(&k, &v)| (k, v))
    }

    /// User-to-relay vector `h_{node,R}`.
    pub fn to_relay(&self, node: usize) -> Option<&CVector> {
        node.checked_sub(1).and_then(|i| self.to_relay.get(i))
    }

    /// Relay-to-user vector `h_{R,node}`; the node receives `h_{R,node}ᴴ X_R`.
    pub fn from_relay(&self, node: usize) -> Option<&CVector> {
        node.checked_sub(1).and_then(|i| self.from_relay.get(i))
    }

    /// Replaces one relay-to-user vector.
    pub fn with_from_relay(mut self, node: usize, h: CVector) -> Result<Self> {
        if h.len() != self.m || node == 0 || node > self.from_relay.len() {
            return Err(Error::Dimension(format!("no relay link to node {node}")));
        }
        self.from_relay[node - 1] = h;
        Ok(self)
    }

    /// Every scalar gain magnitude in the realization.
    pub fn magnitudes(&self) -> Vec<f64> {
        self.direct
            .values()
            .copied()
            .chain(self.to_relay.iter().flat_map(|v| v.iter().copied()))
            .chain(self.from_relay.iter().flat_map(|v| v.iter().copied()))
            .map(|h| h.norm())
            .collect()
    }
}

/// SplitMix64 finalizer chained over the parts; used to derive per-trial and
/// per-slot seeds so results do not depend on execution order.
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut state: u64 = 0x243F_6A88_85A3_08D3;
    for &p in parts {
        state ^= p;
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        state = z ^ (z >> 31);
    }
    state
}

fn draw_gain(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Complex64 {
    let mag = if lo < hi { rng.random_range(lo..=hi) } else { lo };
    let phase = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(mag, phase)
}

/// Draws one slot's channel. Magnitudes are uniform on `[gain_min, gain_max]`
/// with uniform phase; the result is a pure function of `(cfg, seed, slot)`.
pub fn generate_channel(cfg: &NetworkConfig, seed: u64, slot: u64) -> ChannelRealization {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, slot]));
    let nodes = cfg.nodes();
    let (lo, hi) = (cfg.gain_min, cfg.gain_max);

    let mut direct = BTreeMap::new();
    for tx in 1..=nodes {
        for rx in 1..=nodes {
            if !same_side(tx, rx) {
                direct.insert((tx, rx), draw_gain(&mut rng, lo, hi));
            }
        }
    }
    let relay_vectors = |rng: &mut ChaCha8Rng| -> Vec<CVector> {
        if cfg.m == 0 {
            return Vec::new();
        }
        (0..nodes)
            .map(|_| CVector::from_fn(cfg.m, |_, _| draw_gain(rng, lo, hi)))
            .collect()
    };
    let to_relay = relay_vectors(&mut rng);
    let from_relay = relay_vectors(&mut rng);

    ChannelRealization {
        k: cfg.k,
        m: cfg.m,
        slot,
        direct,
        to_relay,
        from_relay,
    }
}

/// Relay receive matrix whose column `ℓ` is `h_{tx_ℓ,R}`.
pub fn relay_receive_matrix(ch: &ChannelRealization, active: &[StreamId]) -> Result<CMatrix> {
    if ch.m == 0 {
        return Err(Error::MissingRelay);
    }
    let mut cols = Vec::with_capacity(active.len());
    for s in active {
        let h = ch
            .to_relay(s.tx)
            .ok_or_else(|| Error::Dimension(format!("no relay link from node {}", s.tx)))?;
        cols.push(h.clone());
    }
    if cols.is_empty() {
        return Ok(CMatrix::zeros(ch.m, 0));
    }
    Ok(CMatrix::from_columns(&cols))
}

/// Whether the relay can decode `active` with condition number at most `ceiling`.
pub fn relay_well_conditioned(ch: &ChannelRealization, active: &[StreamId], ceiling: f64) -> bool {
    if active.is_empty() {
        return true;
    }
    match relay_receive_matrix(ch, active) {
        Ok(a) if a.ncols() <= a.nrows() => {
            let rc = rank_and_condition(&a, DEFAULT_TOL);
            rc.rank == active.len() && rc.cond <= ceiling
        }
        _ => false,
    }
}

/// One slot's information symbols, unit average power before scaling by `√P`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    pub symbols: BTreeMap<StreamId, Complex64>,
    pub slot_index: u64,
}

impl SymbolFrame {
    /// Unit-modulus symbols with independent uniform phases.
    pub fn random(streams: &[StreamId], seed: u64, slot_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, slot_index, 0x5359_4d42]));
        let symbols = streams
            .iter()
            .map(|&s| {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                (s, Complex64::from_polar(1.0, phase))
            })
            .collect();
        Self {
            symbols,
            slot_index,
        }
    }

    pub fn from_symbols(symbols: BTreeMap<StreamId, Complex64>, slot_index: u64) -> Self {
        Self {
            symbols,
            slot_index,
        }
    }

    pub fn streams(&self) -> Vec<StreamId> {
        self.symbols.keys().copied().collect()
    }

    pub fn symbol(&self, s: StreamId) -> Option<Complex64> {
        self.symbols.get(&s).copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::singular_values;

    #[test]
    fn relay_free_pair_has_two_direct_gains() {
        let cfg = NetworkConfig::relay_free(1);
        let ch = generate_channel(&cfg, 7, 0);
        let links: Vec<_> = ch.direct_links().map(|(k, _)| k).collect();
        assert_eq!(links, vec![(1, 2), (2, 1)]);
        assert!(ch.to_relay(1).is_none() && ch.from_relay(2).is_none());
    }

    #[test]
    fn four_antenna_relay_matrix_has_full_rank() {
        let cfg = NetworkConfig::new(2, 4, RelayMode::Instantaneous);
        let ch = generate_channel(&cfg, 42, 0);
        let a = relay_receive_matrix(&ch, &StreamId::all(2)).unwrap();
        let s = singular_values(&a);
        assert_eq!(s.len(), 4);
        assert!(s[3] > 1e-9 * s[0]);
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = NetworkConfig::new(3, 6, RelayMode::Instantaneous);
        assert_eq!(generate_channel(&cfg, 11, 3), generate_channel(&cfg, 11, 3));
        assert_ne!(generate_channel(&cfg, 11, 3), generate_channel(&cfg, 11, 4));
    }

    #[test]
    fn same_side_links_are_absent() {
        let cfg = NetworkConfig::new(3, 6, RelayMode::Instantaneous);
        let ch = generate_channel(&cfg, 1, 0);
        assert!(ch.direct(1, 3).is_none());
        assert!(ch.direct(2, 6).is_none());
        assert!(ch.direct(1, 6).is_some());
        assert_eq!(ch.direct_links().count(), 2 * 3 * 3);
    }

    #[test]
    fn three_antenna_matrix_with_silent_transmitter() {
        let cfg = NetworkConfig::new(2, 3, RelayMode::Instantaneous);
        let ch = generate_channel(&cfg, 9, 0);
        let active = [StreamId::new(1, 2).unwrap(), StreamId::new(2, 1).unwrap(), StreamId::new(3, 4).unwrap()];
        let a = relay_receive_matrix(&ch, &active).unwrap();
        assert_eq!(a.shape(), (3, 3));
        assert_eq!(a.column(2).into_owned(), ch.to_relay(3).unwrap().clone());
    }

    #[test]
    fn relay_matrix_edge_cases() {
        let cfg = NetworkConfig::new(2, 4, RelayMode::Instantaneous);
        let ch = generate_channel(&cfg, 1, 0);
        assert_eq!(relay_receive_matrix(&ch, &[]).unwrap().shape(), (4, 0));
        let free = generate_channel(&NetworkConfig::relay_free(2), 1, 0);
        assert_eq!(
            relay_receive_matrix(&free, &StreamId::all(2)),
            Err(Error::MissingRelay)
        );
    }

    #[test]
    fn stream_ids_must_be_pairs() {
        assert!(StreamId::new(1, 2).is_ok());
        assert!(StreamId::new(4, 3).is_ok());
        assert!(StreamId::new(2, 3).is_err());
        assert!(StreamId::new(1, 3).is_err());
        assert_eq!(StreamId::new(3, 4).unwrap().to_string(), "s34");
        assert_eq!(StreamId::new(10, 9).unwrap().to_string(), "s10,9");
    }

    #[test]
    fn config_invariants() {
        let mut cfg = NetworkConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.gain_min = 0.0;
        assert!(cfg.validate().is_err());
        let bad_relay = NetworkConfig::new(2, 0, RelayMode::Instantaneous);
        assert!(bad_relay.validate().is_err());
        let bad_cog = NetworkConfig::new(3, 2, RelayMode::CognitivePartial);
        assert!(bad_cog.validate().is_err());
        assert!(NetworkConfig::new(2, 2, RelayMode::CognitivePartial).validate().is_ok());
    }

    #[test]
    fn seeds_differ_by_part_order() {
        assert_ne!(derive_seed(&[1, 2]), derive_seed(&[2, 1]));
        assert_eq!(derive_seed(&[5, 6, 7]), derive_seed(&[5, 6, 7]));
    }
}
