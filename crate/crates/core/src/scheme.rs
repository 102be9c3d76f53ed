//! Transmission schemes and the configurations each one supports.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Duplex, NetworkConfig, RelayMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// One-shot nulling and neutralization with a `2K`-antenna instantaneous relay.
    #[serde(rename = "full_2k")]
    Full2k,
    /// Two pairs, three relay antennas, one silent transmitter per slot.
    ThreeAntenna,
    /// Relay listens in the first slot and broadcasts in the second.
    HalfDuplex,
    /// Two-antenna relay that knows every symbol in advance.
    CognitiveFull,
    /// Two-antenna relay that knows one pair's symbols in advance.
    CognitivePartial,
    /// Relay-free per-direction time sharing.
    TdmaBaseline,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::Full2k,
        Scheme::ThreeAntenna,
        Scheme::HalfDuplex,
        Scheme::CognitiveFull,
        Scheme::CognitivePartial,
        Scheme::TdmaBaseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Full2k => "full_2k",
            Scheme::ThreeAntenna => "three_antenna",
            Scheme::HalfDuplex => "half_duplex",
            Scheme::CognitiveFull => "cognitive_full",
            Scheme::CognitivePartial => "cognitive_partial",
            Scheme::TdmaBaseline => "tdma_baseline",
        }
    }

    /// Picks the scheme implied by the relay mode, duplexing and antenna count.
    pub fn for_config(cfg: &NetworkConfig) -> Result<Scheme> {
        let scheme = match (cfg.relay_mode, cfg.duplex) {
            (RelayMode::None, Duplex::Full) | (RelayMode::CausalReferenceOnly, Duplex::Full) => {
                Scheme::TdmaBaseline
            }
            (RelayMode::Instantaneous, Duplex::Full) => {
                if cfg.k == 2 && cfg.m == 3 {
                    Scheme::ThreeAntenna
                } else {
                    Scheme::Full2k
                }
            }
            (RelayMode::Instantaneous, Duplex::Half) | (RelayMode::CausalReferenceOnly, Duplex::Half) => {
                Scheme::HalfDuplex
            }
            (RelayMode::CognitiveFull, Duplex::Full) => Scheme::CognitiveFull,
            (RelayMode::CognitivePartial, Duplex::Full) => Scheme::CognitivePartial,
            (mode, Duplex::Half) => {
                return Err(Error::Precondition(format!(
                    "no half-duplex scheme for relay mode {}",
                    mode.as_str()
                )))
            }
        };
        scheme.check_feasible(cfg)?;
        Ok(scheme)
    }

    /// Checks the antenna, pair-count, relay-mode and duplex contract of the scheme.
    pub fn check_feasible(self, cfg: &NetworkConfig) -> Result<()> {
        cfg.validate()?;
        let k = cfg.k;
        let fail = |msg: String| Err(Error::Precondition(msg));
        let full = cfg.duplex == Duplex::Full;
        match self {
            Scheme::Full2k => {
                if cfg.relay_mode != RelayMode::Instantaneous || !full {
                    return fail("full_2k needs a full-duplex instantaneous relay".into());
                }
                if cfg.m < 2 * k {
                    return fail(format!("full_2k needs m >= 2k = {} antennas, got {}", 2 * k, cfg.m));
                }
            }
            Scheme::ThreeAntenna => {
                if cfg.relay_mode != RelayMode::Instantaneous || !full {
                    return fail("three_antenna needs a full-duplex instantaneous relay".into());
                }
                if k != 2 || cfg.m != 3 {
                    return fail(format!("three_antenna needs k = 2 and m = 3, got k = {k}, m = {}", cfg.m));
                }
            }
            Scheme::HalfDuplex => {
                if cfg.duplex != Duplex::Half
                    || !matches!(cfg.relay_mode, RelayMode::Instantaneous | RelayMode::CausalReferenceOnly)
                {
                    return fail("half_duplex needs half-duplex nodes and a decoding relay".into());
                }
                if cfg.m < 2 * k {
                    return fail(format!("half_duplex needs m >= 2k = {} antennas, got {}", 2 * k, cfg.m));
                }
            }
            Scheme::CognitiveFull | Scheme::CognitivePartial => {
                let mode = if self == Scheme::CognitiveFull {
                    RelayMode::CognitiveFull
                } else {
                    RelayMode::CognitivePartial
                };
                if cfg.relay_mode != mode || !full {
                    return fail(format!("{self} needs relay mode {} and full duplex", mode.as_str()));
                }
                if k != 2 || cfg.m != 2 {
                    return fail(format!("{self} needs k = 2 and m = 2, got k = {k}, m = {}", cfg.m));
                }
            }
            Scheme::TdmaBaseline => {
                if !matches!(cfg.relay_mode, RelayMode::None | RelayMode::CausalReferenceOnly) || !full {
                    return fail("tdma_baseline runs without an active relay in full duplex".into());
                }
            }
        }
        Ok(())
    }

    /// Sum-rate slope the construction is designed to reach.
    pub fn design_dof(self, k: usize) -> f64 {
        match self {
            Scheme::Full2k => 2.0 * k as f64,
            Scheme::ThreeAntenna => 3.0,
            Scheme::HalfDuplex => k as f64,
            Scheme::CognitiveFull | Scheme::CognitivePartial => 4.0,
            Scheme::TdmaBaseline => 2.0,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown scheme '{s}'")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_follows_relay_mode() {
        let pick = |cfg: NetworkConfig| Scheme::for_config(&cfg);
        assert_eq!(pick(NetworkConfig::new(2, 4, RelayMode::Instantaneous)), Ok(Scheme::Full2k));
        assert_eq!(pick(NetworkConfig::new(2, 3, RelayMode::Instantaneous)), Ok(Scheme::ThreeAntenna));
        assert_eq!(pick(NetworkConfig::relay_free(3)), Ok(Scheme::TdmaBaseline));
        assert_eq!(
            pick(NetworkConfig::new(2, 4, RelayMode::CausalReferenceOnly)),
            Ok(Scheme::TdmaBaseline)
        );
        assert_eq!(
            pick(NetworkConfig::new(3, 6, RelayMode::Instantaneous).with_duplex(Duplex::Half)),
            Ok(Scheme::HalfDuplex)
        );
        assert_eq!(pick(NetworkConfig::new(2, 2, RelayMode::CognitiveFull)), Ok(Scheme::CognitiveFull));
    }

    #[test]
    fn too_few_antennas_is_a_contract_violation() {
        let err = Scheme::Full2k
            .check_feasible(&NetworkConfig::new(3, 5, RelayMode::Instantaneous))
            .unwrap_err();
        assert!(err.is_contract_violation());
        assert!(Scheme::for_config(&NetworkConfig::new(3, 5, RelayMode::Instantaneous)).is_err());
        assert!(Scheme::ThreeAntenna
            .check_feasible(&NetworkConfig::new(3, 3, RelayMode::Instantaneous))
            .is_err());
    }

    #[test]
    fn names_round_trip() {
        for s in Scheme::ALL {
            assert_eq!(s.as_str().parse::<Scheme>(), Ok(s));
        }
        assert!("bogus".parse::<Scheme>().is_err());
    }
}
