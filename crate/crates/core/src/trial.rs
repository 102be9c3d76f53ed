//! Monte Carlo trial preparation: channel draws, degenerate-draw rejection
//! and beamformer construction for every slot a scheme uses.

use crate::beamforming::{
    build_cognitive, build_full_2k, build_half_duplex, build_three_antenna_slot, rotation_schedule, BeamformerSet,
    BuildOptions,
};
use crate::error::{Error, Result};
use crate::model::{derive_seed, generate_channel, relay_well_conditioned, ChannelRealization, NetworkConfig, StreamId, DEFAULT_COND_CEILING};
use crate::scheme::Scheme;
use crate::transceiver::{half_duplex_budget, slot_budget, sum_rate, StreamBudget};

/// How degenerate draws are detected and how often a slot may be redrawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResamplePolicy {
    pub cond_ceiling: f64,
    pub max_attempts: usize,
    pub build: BuildOptions,
}

impl ResamplePolicy {
    pub fn for_config(cfg: &NetworkConfig) -> Self {
        Self {
            cond_ceiling: DEFAULT_COND_CEILING,
            max_attempts: 64,
            build: BuildOptions::for_gain_max(cfg.gain_max),
        }
    }
}

/// One prepared slot: channels, beamformers and the resulting link budget.
#[derive(Debug, Clone)]
pub struct PreparedSlot {
    /// Channel the relay listens on.
    pub ch_listen: ChannelRealization,
    /// Channel the users listen on (differs from `ch_listen` only for half duplex).
    pub ch_rx: ChannelRealization,
    pub bf: Option<BeamformerSet>,
    pub streams: Vec<StreamId>,
    pub budget: Vec<StreamBudget>,
}

/// All slots of one trial. The trial's sum rate is the average over its slots.
#[derive(Debug, Clone)]
pub struct TrialPlan {
    pub scheme: Scheme,
    pub slots: Vec<PreparedSlot>,
    pub attempts: usize,
    pub resamples: usize,
}

impl TrialPlan {
    pub fn sum_rate(&self, p: f64, noise_var: f64) -> f64 {
        let total: f64 = self.slots.iter().map(|s| sum_rate(&s.budget, p, noise_var)).sum();
        total / self.slots.len() as f64
    }
}

/// Number of logical slots a trial of `scheme` consists of.
pub fn slots_per_trial(scheme: Scheme, k: usize) -> usize {
    match scheme {
        Scheme::ThreeAntenna => 4,
        Scheme::TdmaBaseline => k,
        _ => 1,
    }
}

fn prepare_slot(cfg: &NetworkConfig, scheme: Scheme, slot: usize, seed: u64, policy: &ResamplePolicy) -> Result<PreparedSlot> {
    let k = cfg.k;
    let opts = &policy.build;
    let guard = |ch: &ChannelRealization, streams: &[StreamId]| -> Result<()> {
        if relay_well_conditioned(ch, streams, policy.cond_ceiling) {
            Ok(())
        } else {
            Err(Error::RankDeficient {
                rank: 0,
                required: streams.len(),
            })
        }
    };
    let ch = generate_channel(cfg, seed, slot as u64);
    let (streams, bf, ch_rx) = match scheme {
        Scheme::Full2k => {
            let streams = StreamId::all(k);
            guard(&ch, &streams)?;
            let bf = build_full_2k(&ch, k, opts)?;
            (streams, Some(bf), None)
        }
        Scheme::ThreeAntenna => {
            let streams = rotation_schedule(slot)?.active;
            guard(&ch, &streams)?;
            let bf = build_three_antenna_slot(&ch, slot, opts)?;
            (streams, Some(bf), None)
        }
        Scheme::HalfDuplex => {
            let streams = StreamId::all(k);
            guard(&ch, &streams)?;
            let ch2 = generate_channel(cfg, seed, slot as u64 + 1);
            let bf = build_half_duplex(&ch2, k, opts)?;
            (streams, Some(bf), Some(ch2))
        }
        Scheme::CognitiveFull => {
            let streams = StreamId::all(2);
            let bf = build_cognitive(&ch, &streams, opts)?;
            (streams, Some(bf), None)
        }
        Scheme::CognitivePartial => {
            let streams = StreamId::all(2);
            guard(&ch, &StreamId::pair(2))?;
            let bf = build_cognitive(&ch, &StreamId::pair(1), opts)?;
            (streams, Some(bf), None)
        }
        Scheme::TdmaBaseline => (StreamId::pair(slot + 1).to_vec(), None, None),
    };
    let budget = match (&bf, &ch_rx) {
        (Some(bf), Some(ch2)) => half_duplex_budget(&ch, ch2, bf)?,
        _ => slot_budget(&ch, bf.as_ref(), &streams)?,
    };
    Ok(PreparedSlot {
        ch_rx: ch_rx.unwrap_or_else(|| ch.clone()),
        ch_listen: ch,
        bf,
        streams,
        budget,
    })
}

/// Prepares every slot of one trial, redrawing degenerate channels. The
/// channel for slot `t`, attempt `a` is `generate_channel(cfg, hash(trial_seed, a), t)`.
pub fn prepare_trial(cfg: &NetworkConfig, scheme: Scheme, trial_seed: u64, policy: &ResamplePolicy) -> Result<TrialPlan> {
    scheme.check_feasible(cfg)?;
    let mut slots = Vec::new();
    let mut attempts = 0;
    let mut resamples = 0;
    for slot in 0..slots_per_trial(scheme, cfg.k) {
        let mut prepared = None;
        for attempt in 0..policy.max_attempts {
            attempts += 1;
            match prepare_slot(cfg, scheme, slot, derive_seed(&[trial_seed, attempt as u64]), policy) {
                Ok(p) => {
                    prepared = Some(p);
                    break;
                }
                Err(e) if e.is_degenerate_draw() => resamples += 1,
                Err(e) => return Err(e),
            }
        }
        match prepared {
            Some(p) => slots.push(p),
            None => return Err(Error::ResampleRateExceeded { rate: 1.0 }),
        }
    }
    Ok(TrialPlan {
        scheme,
        slots,
        attempts,
        resamples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Duplex, RelayMode};

    #[test]
    fn slot_counts_per_scheme() {
        assert_eq!(slots_per_trial(Scheme::ThreeAntenna, 2), 4);
        assert_eq!(slots_per_trial(Scheme::TdmaBaseline, 3), 3);
        assert_eq!(slots_per_trial(Scheme::Full2k, 3), 1);
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = NetworkConfig::new(2, 4, RelayMode::Instantaneous);
        let policy = ResamplePolicy::for_config(&cfg);
        let a = prepare_trial(&cfg, Scheme::Full2k, 99, &policy).unwrap();
        let b = prepare_trial(&cfg, Scheme::Full2k, 99, &policy).unwrap();
        assert_eq!(a.slots[0].ch_listen, b.slots[0].ch_listen);
        assert_eq!(a.sum_rate(1e5, 1.0), b.sum_rate(1e5, 1.0));
    }

    #[test]
    fn infeasible_scheme_is_not_resampled() {
        let cfg = NetworkConfig::new(3, 5, RelayMode::Instantaneous);
        let err = prepare_trial(&cfg, Scheme::Full2k, 1, &ResamplePolicy::for_config(&cfg)).unwrap_err();
        assert!(err.is_contract_violation());
    }

    #[test]
    fn half_duplex_uses_two_channels() {
        let cfg = NetworkConfig::new(2, 4, RelayMode::Instantaneous).with_duplex(Duplex::Half);
        let plan = prepare_trial(&cfg, Scheme::HalfDuplex, 5, &ResamplePolicy::for_config(&cfg)).unwrap();
        assert_ne!(plan.slots[0].ch_listen, plan.slots[0].ch_rx);
    }

    #[test]
    fn tight_ceiling_forces_abort() {
        let cfg = NetworkConfig::new(2, 4, RelayMode::Instantaneous);
        let mut policy = ResamplePolicy::for_config(&cfg);
        policy.cond_ceiling = 1.0;
        policy.max_attempts = 4;
        assert!(matches!(
            prepare_trial(&cfg, Scheme::Full2k, 1, &policy),
            Err(Error::ResampleRateExceeded { .. })
        ));
    }
}
