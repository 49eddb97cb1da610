//! Plain-text model checkpoints.
//!
//! The first line is a tab-separated list of `key=value` pairs describing the
//! configuration and the round counters. Every following line is
//! `coordinate<TAB>z<TAB>sigma<TAB>grad_sq`, sorted by coordinate. Floats use
//! Rust's shortest round-trip formatting, so a write/read/write cycle is
//! byte-identical.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::learner::config::{AlgorithmConfig, Family, LearningRateSchedule, LossHandling, RateMode};
use crate::learner::state::{LearnerState, Slot};
use crate::loss::LossKind;
use crate::penalty::{AlphaMode, PenaltyKind, PenaltySchedule};
use crate::solver::ball_argmin;
use crate::types::Coord;

const MAGIC: &str = "uftrl-checkpoint=1";

impl LearnerState {
    /// Writes the state. Lazily pending shrinkage is folded into `z` first,
    /// so the file holds the materialized model.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        let cfg = &self.config;
        let loss = match cfg.loss {
            LossKind::Logistic => "logistic".to_string(),
            LossKind::Linear => "linear".to_string(),
            LossKind::Squared { target } => format!("squared:{target}"),
        };
        let penalty = match cfg.penalty.kind {
            PenaltyKind::L1 => "l1".to_string(),
            PenaltyKind::BallIndicator { radius } => format!("ball:{radius}"),
        };
        let alphas = match &cfg.penalty.mode {
            AlphaMode::Constant => "constant".to_string(),
            AlphaMode::PriorOnce => "prior-once".to_string(),
            AlphaMode::Custom(v) => {
                let parts: Vec<String> = v.iter().map(|a| a.to_string()).collect();
                format!("custom:{}", parts.join(","))
            }
        };
        let rate = match cfg.rate.mode {
            RateMode::GlobalScalar => "global",
            RateMode::PerCoordinateAdaptive => "adaptive",
        };
        let handling = match cfg.loss_handling {
            LossHandling::Linearized => "linearized",
            LossHandling::Implicit => "implicit",
        };
        writeln!(
            out,
            "{MAGIC}\tfamily={}\tt={}\talpha_cum={}\tgamma={}\trate={rate}\tsigma_floor={}\tloss={loss}\thandling={handling}\tlambda={}\tpenalty={penalty}\talphas={alphas}\tweight_cum={}",
            cfg.family, self.t, self.alpha_cum, cfg.rate.gamma, cfg.sigma_floor, cfg.penalty.lambda, self.weight_cum,
        )?;
        let mut order: Vec<usize> = (0..self.keys.len()).collect();
        order.sort_by_key(|&slot| self.keys[slot]);
        for slot in order {
            writeln!(
                out,
                "{}\t{}\t{}\t{}",
                self.keys[slot],
                self.effective_z(slot),
                self.slot_sigma(slot),
                self.slots[slot].grad_sq
            )?;
        }
        Ok(())
    }

    pub fn read_checkpoint<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse { line: 1, message: "empty checkpoint".into() })??;
        let mut fields = header.split('\t');
        if fields.next() != Some(MAGIC) {
            return Err(Error::Parse { line: 1, message: "missing checkpoint header".into() });
        }
        let mut kv = BTreeMap::new();
        for field in fields {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| header_error(format!("malformed header field `{field}`")))?;
            kv.insert(k, v);
        }
        let get = |k: &str| kv.get(k).copied().ok_or_else(|| header_error(format!("missing `{k}`")));
        let num = |k: &str| -> Result<f64> {
            get(k)?.parse::<f64>().map_err(|_| header_error(format!("bad number for `{k}`")))
        };

        let family: Family = get("family")?.parse()?;
        let gamma = num("gamma")?;
        let rate = match get("rate")? {
            "global" => LearningRateSchedule::global(gamma),
            "adaptive" => LearningRateSchedule::adaptive(gamma),
            other => return Err(header_error(format!("unknown rate `{other}`"))),
        };
        let loss = match get("loss")? {
            "logistic" => LossKind::Logistic,
            "linear" => LossKind::Linear,
            s => match s.strip_prefix("squared:").map(str::parse::<f64>) {
                Some(Ok(target)) => LossKind::Squared { target },
                _ => return Err(header_error(format!("unknown loss `{s}`"))),
            },
        };
        let handling = match get("handling")? {
            "linearized" => LossHandling::Linearized,
            "implicit" => LossHandling::Implicit,
            other => return Err(header_error(format!("unknown handling `{other}`"))),
        };
        let kind = match get("penalty")? {
            "l1" => PenaltyKind::L1,
            s => match s.strip_prefix("ball:").map(str::parse::<f64>) {
                Some(Ok(radius)) => PenaltyKind::BallIndicator { radius },
                _ => return Err(header_error(format!("unknown penalty `{s}`"))),
            },
        };
        let mode = match get("alphas")? {
            "constant" => AlphaMode::Constant,
            "prior-once" => AlphaMode::PriorOnce,
            s => match s.strip_prefix("custom:") {
                Some("") => AlphaMode::Custom(Vec::new()),
                Some(list) => AlphaMode::Custom(
                    list.split(',')
                        .map(|a| a.parse::<f64>().map_err(|_| header_error(format!("bad alpha `{a}`"))))
                        .collect::<Result<_>>()?,
                ),
                None => return Err(header_error(format!("unknown alpha mode `{s}`"))),
            },
        };
        let config = AlgorithmConfig {
            family,
            loss,
            loss_handling: handling,
            rate,
            penalty: PenaltySchedule { lambda: num("lambda")?, mode, kind },
            sigma_floor: num("sigma_floor")?,
        };
        let mut state = LearnerState::new(config)?;
        state.t = get("t")?.parse().map_err(|_| header_error("bad round counter".into()))?;
        state.alpha_cum = num("alpha_cum")?;
        state.weight_cum = num("weight_cum")?;
        state.sigma_global = state.config.rate.global_cumulative(state.t, state.config.sigma_floor);
        if state.config.rate.mode == RateMode::PerCoordinateAdaptive {
            state.sigma_global = 0.0;
        }

        let anchor = state.penalty_total();
        let mut prev: Option<Coord> = None;
        for (i, line) in lines.enumerate() {
            let line_no = i + 2;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(parse_err(format!("expected 4 columns, found {}", cols.len())));
            }
            let coord: Coord = cols[0].parse().map_err(|_| parse_err(format!("bad coordinate `{}`", cols[0])))?;
            if prev.is_some_and(|p| p >= coord) {
                return Err(parse_err("coordinates must be strictly increasing".into()));
            }
            prev = Some(coord);
            let mut vals = [0.0f64; 3];
            for (v, col) in vals.iter_mut().zip(&cols[1..]) {
                *v = col.parse().map_err(|_| parse_err(format!("bad number `{col}`")))?;
                if !v.is_finite() {
                    return Err(parse_err(format!("non-finite value `{col}`")));
                }
            }
            let [z, sigma, grad_sq] = vals;
            let x = if !family.exact_penalty() && sigma > 0.0 { -z / sigma } else { 0.0 };
            state.push_slot(coord, Slot { z, sigma, grad_sq, anchor, x });
        }

        if let PenaltyKind::BallIndicator { radius } = state.config.penalty.kind {
            if family.exact_penalty() {
                let a: Vec<f64> = state.slots.iter().map(|s| s.z).collect();
                let q: Vec<f64> = (0..state.slots.len()).map(|s| state.slot_sigma(s)).collect();
                let x = if state.weight_cum > 0.0 {
                    ball_argmin(&a, &q, radius).x
                } else {
                    a.iter().zip(&q).map(|(ai, qi)| if *qi > 0.0 { -ai / qi } else { 0.0 }).collect()
                };
                for (slot, xi) in state.slots.iter_mut().zip(x) {
                    slot.x = xi;
                }
            }
        }
        state.rebuild_live();
        Ok(state)
    }
}

fn header_error(message: String) -> Error {
    Error::Parse { line: 1, message }
}
