use std::fmt::Write as _;

use anyhow::Result;
use num_complex::Complex64;

use twic_core::model::{derive_seed, ChannelRealization, SymbolFrame};
use twic_core::numerics::CVector;
use twic_core::scheme::Scheme;
use twic_core::transceiver::{simulate_half_duplex_round, simulate_slot, Noise, SlotResult};
use twic_core::trial::{prepare_trial, ResamplePolicy};

use crate::{write, Manifest};

fn c(z: Complex64) -> String {
    format!("{:+.6e}{:+.6e}i", z.re, z.im)
}

fn v(x: &CVector) -> String {
    let parts: Vec<String> = x.iter().map(|z| c(*z)).collect();
    format!("[{}]", parts.join(", "))
}

fn ratio(part: Complex64, desired: Complex64) -> f64 {
    part.norm() / desired.norm()
}

fn channel_section(out: &mut String, title: &str, ch: &ChannelRealization) {
    let _ = writeln!(out, "[{title}]");
    for ((i, j), h) in ch.direct_links() {
        let _ = writeln!(out, "h_{i},{j} = {} |{:.6}|", c(h), h.norm());
    }
    for node in 1..=2 * ch.k() {
        if let (Some(up), Some(down)) = (ch.to_relay(node), ch.from_relay(node)) {
            let _ = writeln!(out, "h_{node},R = {}", v(up));
            let _ = writeln!(out, "h_R,{node} = {}", v(down));
        }
    }
}

fn result_sections(out: &mut String, res: &SlotResult, frame: &SymbolFrame) {
    if !res.relay_received.is_empty() {
        let _ = writeln!(out, "[relay]");
        let _ = writeln!(out, "Y_R = {}", v(&res.relay_received));
        if let Some(known) = &res.relay_known_contribution {
            let _ = writeln!(out, "known_contribution = {}", v(known));
            let _ = writeln!(out, "Y_R - known = {}", v(&(&res.relay_received - known)));
        }
        for (s, est) in &res.relay_decoded {
            let sent = frame.symbols[s];
            let _ = writeln!(out, "decoded {s} = {} sent {} error {:.3e}", c(*est), c(sent), (est - sent).norm());
        }
        let _ = writeln!(out, "relay_power = {:.6e} budget_exceeded = {}", res.relay_power, res.relay_power_exceeded);
    }
    let _ = writeln!(out, "[receivers]");
    for (node, parts) in &res.decomposition {
        let _ = writeln!(out, "node {node}: Y = {}", c(res.received[node]));
        let _ = writeln!(out, "  desired = {}", c(parts.desired));
        for (name, part) in [
            ("self_interference", parts.self_interference),
            ("interference", parts.interference),
            ("undesired", parts.undesired),
        ] {
            // exact zeros mean the node has no stream of that kind
            if part != Complex64::new(0.0, 0.0) {
                let _ = writeln!(out, "  {name} = {}", c(part));
            }
        }
        let _ = writeln!(out, "  noise = {}", c(parts.noise));
        let _ = writeln!(out, "  post_si = {}", c(res.post_si[node]));
        if parts.desired.norm() > 0.0 {
            let _ = writeln!(
                out,
                "  interference/desired = {:.3e} undesired/desired = {:.3e}",
                ratio(parts.interference, parts.desired),
                ratio(parts.undesired, parts.desired)
            );
        }
        let _ = writeln!(out, "  residual_interference_power = {:.3e}", res.residual_interference_power[node]);
    }
    let _ = writeln!(out, "[streams]");
    for (s, rate) in &res.per_stream_rate {
        let _ = writeln!(
            out,
            "{s}: sinr_rx = {:.6e} snr_relay = {:.6e} rate = {:.6} decode_ok = {}",
            res.per_stream_sinr_rx[s], res.per_stream_snr_relay[s], rate, res.decode_ok[s]
        );
    }
    let _ = writeln!(out, "sum_rate = {:.6}", res.sum_rate());
}

pub(crate) fn cmd_simulate(m: &Manifest, noiseless: bool) -> Result<()> {
    let cfg = m.scenario.network_config();
    let scheme = m.scenario.scheme()?;
    let plan = prepare_trial(&cfg, scheme, derive_seed(&[m.seed, 0]), &ResamplePolicy::for_config(&cfg))?;
    let slot = &plan.slots[0];
    let frame = SymbolFrame::random(&slot.streams, m.seed, 0);
    let noise = if noiseless || cfg.noise_var == 0.0 {
        Noise::Off
    } else {
        Noise::Seeded(derive_seed(&[m.seed, 1]))
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        "scheme {scheme} k {} m {} p_db {} noise_var {} seed {} noise {}",
        cfg.k,
        cfg.m,
        m.scenario.p_db,
        cfg.noise_var,
        m.seed,
        if noise == Noise::Off { "off" } else { "on" }
    );
    let _ = writeln!(out, "resamples {}", plan.resamples);
    let res = if scheme == Scheme::HalfDuplex {
        channel_section(&mut out, "channel slot 1 (relay listens)", &slot.ch_listen);
        channel_section(&mut out, "channel slot 2 (relay broadcasts)", &slot.ch_rx);
        let bf = slot.bf.as_ref().expect("half duplex has beamformers");
        simulate_half_duplex_round(&cfg, &slot.ch_listen, &slot.ch_rx, bf, &frame, noise)?
    } else {
        channel_section(&mut out, "channel", &slot.ch_listen);
        simulate_slot(&cfg, &slot.ch_listen, slot.bf.as_ref(), &frame, noise)?
    };
    if let Some(bf) = &slot.bf {
        let _ = writeln!(out, "[beamformers]");
        for (s, u) in &bf.vectors {
            let spec = &bf.specs[s];
            let ntr: Vec<usize> = spec.neutralize_at.iter().map(|x| x.0).collect();
            let _ = writeln!(out, "u_{s} = {} null_at {:?} neutralize_at {:?}", v(u), spec.null_at, ntr);
        }
        if !bf.known.is_empty() {
            let known: Vec<String> = bf.known.iter().map(|s| s.to_string()).collect();
            let _ = writeln!(out, "known_at_relay = {}", known.join(" "));
        }
    }
    let _ = writeln!(out, "[symbols]");
    for (s, x) in &frame.symbols {
        let _ = writeln!(out, "{s} = {}", c(*x));
    }
    result_sections(&mut out, &res, &frame);
    write(&m.out, "trace.txt", &out)?;
    print!("{out}");
    Ok(())
}
