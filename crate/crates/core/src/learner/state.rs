use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::learner::config::{AlgorithmConfig, LossHandling, RateMode};
use crate::learner::record::{Prediction, Progress, RoundRecord, SigmaIncrement};
use crate::penalty::PenaltyKind;
use crate::solver::{ball_argmin, soft_threshold, solve_margin_fixed_point};
use crate::types::{Coord, SparseExample, WeightVector};

/// Per-coordinate accumulators.
///
/// For FTPRL/RDA, `z` is the linear coefficient of the round objective. For
/// FOBOS/AOGD it is `−σ·x` at the round `anchor` was recorded; the shrinkage
/// accumulated since then is applied lazily.
#[derive(Debug, Clone, Default)]
pub(crate) struct Slot {
    pub z: f64,
    pub sigma: f64,
    pub grad_sq: f64,
    pub anchor: f64,
    /// Cached iterate, used only with the ball penalty.
    pub x: f64,
}

/// One coordinate's share of a round.
struct Work {
    slot: usize,
    theta: f64,
    sigma_new: f64,
    sigma_step: f64,
    grad_sq: f64,
    z_mid: f64,
    /// `x_t` when the unpenalized point is `x_t − sθ/σ`; dividing `z_mid`
    /// back out would drift by an ulp per round.
    center: Option<f64>,
}

/// Accumulated state of the unified update.
///
/// `x` is never stored for L1 penalties: every weight is re-derived from
/// `(z, σ, α_{1:t})`, so coordinates that an example does not touch cost
/// nothing under per-coordinate rates.
#[derive(Debug, Clone)]
pub struct LearnerState {
    pub(crate) config: AlgorithmConfig,
    pub(crate) t: u64,
    pub(crate) alpha_cum: f64,
    /// Cumulative weight on `Ψ` charged so far (`α_{1:t}`, or `t` for AOGD).
    pub(crate) weight_cum: f64,
    pub(crate) sigma_global: f64,
    pub(crate) index: HashMap<Coord, usize>,
    pub(crate) keys: Vec<Coord>,
    pub(crate) slots: Vec<Slot>,
    /// Slots with a nonzero weight; only maintained in eager modes.
    pub(crate) live: Vec<usize>,
    mark: Vec<u64>,
}

/// A fresh learner: `t = 0`, empty accumulators, `x = 0`.
pub fn init(config: AlgorithmConfig) -> Result<LearnerState> {
    LearnerState::new(config)
}

/// Margin and probability of `ex` under the state's current iterate.
pub fn predict(state: &LearnerState, ex: &SparseExample) -> Prediction {
    state.predict(ex)
}

/// One full round, returning the advanced state and its record.
pub fn step(mut state: LearnerState, ex: &SparseExample) -> Result<(LearnerState, RoundRecord)> {
    let record = state.step(ex)?;
    Ok((state, record))
}

/// The current weight at `coord`.
pub fn lazy_weight(state: &LearnerState, coord: Coord) -> f64 {
    state.lazy_weight(coord)
}

impl LearnerState {
    pub fn new(config: AlgorithmConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            t: 0,
            alpha_cum: 0.0,
            weight_cum: 0.0,
            sigma_global: 0.0,
            index: HashMap::new(),
            keys: Vec::new(),
            slots: Vec::new(),
            live: Vec::new(),
            mark: Vec::new(),
        })
    }

    pub fn config(&self) -> &AlgorithmConfig {
        &self.config
    }

    /// Rounds completed.
    pub fn t(&self) -> u64 {
        self.t
    }

    /// `α_{1:t}`.
    pub fn alpha_cum(&self) -> f64 {
        self.alpha_cum
    }

    /// Number of distinct coordinates seen so far.
    pub fn universe(&self) -> usize {
        self.keys.len()
    }

    pub fn predict(&self, ex: &SparseExample) -> Prediction {
        Prediction::from_margin(self.margin(ex))
    }

    pub fn margin(&self, ex: &SparseExample) -> f64 {
        ex.features().iter().map(|&(c, v)| v * self.lazy_weight(c)).sum()
    }

    pub fn lazy_weight(&self, coord: Coord) -> f64 {
        self.index.get(&coord).map_or(0.0, |&slot| self.weight_of(slot))
    }

    /// The full current iterate.
    pub fn weights(&self) -> WeightVector {
        self.keys
            .iter()
            .enumerate()
            .map(|(slot, &c)| (c, self.weight_of(slot)))
            .collect()
    }

    /// Stored (nonzero) weights without building the vector.
    pub fn nnz(&self) -> usize {
        (0..self.slots.len()).filter(|&s| self.weight_of(s) != 0.0).count()
    }

    /// `σ_{1:t,i}`, including coordinates never seen.
    pub fn sigma(&self, coord: Coord) -> f64 {
        match self.config.rate.mode {
            RateMode::GlobalScalar => self.sigma_global,
            RateMode::PerCoordinateAdaptive => match self.index.get(&coord) {
                Some(&slot) => self.slots[slot].sigma,
                None => self.unseen_sigma(),
            },
        }
    }

    /// Linear coefficient `z_i` of the round objective, with any pending
    /// shrinkage folded in.
    pub fn z(&self, coord: Coord) -> f64 {
        match self.index.get(&coord) {
            None => 0.0,
            Some(&slot) => self.effective_z(slot),
        }
    }

    /// `Σ_s g_{s,i}²`.
    pub fn grad_sq(&self, coord: Coord) -> f64 {
        self.index.get(&coord).map_or(0.0, |&slot| self.slots[slot].grad_sq)
    }

    pub(crate) fn effective_z(&self, slot: usize) -> f64 {
        if self.config.family.exact_penalty() {
            self.slots[slot].z
        } else {
            let s = &self.slots[slot];
            if self.config.is_ball() || s.anchor == self.penalty_total() {
                s.z
            } else {
                -self.slot_sigma(slot) * self.weight_of(slot)
            }
        }
    }

    fn unseen_sigma(&self) -> f64 {
        if self.t >= 1 {
            self.config.sigma_floor
        } else {
            0.0
        }
    }

    /// `Σ_s w_s λ`: the penalty weight applied so far.
    pub(crate) fn penalty_total(&self) -> f64 {
        self.weight_cum * self.config.penalty.lambda
    }

    pub(crate) fn slot_sigma(&self, slot: usize) -> f64 {
        match self.config.rate.mode {
            RateMode::GlobalScalar => self.sigma_global,
            RateMode::PerCoordinateAdaptive => self.slots[slot].sigma,
        }
    }

    pub(crate) fn weight_of(&self, slot: usize) -> f64 {
        let s = &self.slots[slot];
        if self.config.is_ball() {
            return s.x;
        }
        let sigma = self.slot_sigma(slot);
        if sigma <= 0.0 {
            return 0.0;
        }
        let threshold = if self.config.family.exact_penalty() {
            self.penalty_total()
        } else {
            self.penalty_total() - s.anchor
        };
        let center = if self.config.family.exact_penalty() { -s.z / sigma } else { s.x };
        soft_threshold(center, threshold.max(0.0) / sigma)
    }

    fn slot_for(&mut self, coord: Coord) -> usize {
        if let Some(&slot) = self.index.get(&coord) {
            return slot;
        }
        let slot = self.slots.len();
        let sigma = self.unseen_sigma();
        self.index.insert(coord, slot);
        self.keys.push(coord);
        self.slots.push(Slot { sigma, anchor: self.penalty_total(), ..Slot::default() });
        self.mark.push(0);
        slot
    }

    pub(crate) fn push_slot(&mut self, coord: Coord, slot: Slot) {
        self.index.insert(coord, self.slots.len());
        self.keys.push(coord);
        self.slots.push(slot);
        self.mark.push(0);
    }

    pub(crate) fn rebuild_live(&mut self) {
        self.live = if self.config.eager() {
            (0..self.slots.len()).filter(|&s| self.weight_of(s) != 0.0).collect()
        } else {
            Vec::new()
        };
    }

    /// One round with a full [`RoundRecord`]. Snapshots `x_t` and `x_{t+1}`,
    /// so the cost is proportional to the universe size; use
    /// [`train_step`](Self::train_step) for training loops.
    pub fn step(&mut self, ex: &SparseExample) -> Result<RoundRecord> {
        let x_before = self.weights();
        let penalty = self.round_penalty(&x_before, self.t + 1);
        let outcome = self.advance(ex, true)?;
        let mut diag = outcome.diagnostics.expect("full step records diagnostics");
        let next = self.weights();
        if !self.config.family.exact_penalty() && !self.config.eager() {
            // Untouched coordinates were shrunk lazily; their φ_t is σ(x_t − x_{t+1}).
            for c in x_before.coords().collect::<Vec<_>>() {
                if ex.features().binary_search_by_key(&c, |&(k, _)| k).is_err() {
                    diag.phi.set(c, self.sigma(c) * (x_before.get(c) - next.get(c)));
                }
            }
        }
        let ledger_term = self.ledger_between(&x_before, &next, &diag.sigma_added);
        Ok(RoundRecord {
            t: self.t,
            x: x_before,
            next,
            g: diag.g,
            phi: diag.phi,
            loss: outcome.progress.loss,
            penalty,
            sigma_added: diag.sigma_added,
            delta: diag.delta,
            implicit_shift: diag.implicit_shift,
            ledger_term,
        })
    }

    /// One round without diagnostics. Returns the margin and loss of the
    /// prediction made before the update.
    pub fn train_step(&mut self, ex: &SparseExample) -> Result<Progress> {
        Ok(self.advance(ex, false)?.progress)
    }

    fn round_penalty(&self, x: &WeightVector, t: u64) -> f64 {
        self.config.penalty.weighted_psi(self.config.round_penalty_weight(t), x)
    }

    fn advance(&mut self, ex: &SparseExample, full: bool) -> Result<Outcome> {
        let cfg = self.config.clone();
        let family = cfg.family;
        let t = self.t + 1;
        let lambda = cfg.penalty.lambda;
        let alpha_t = cfg.penalty.alpha(t);
        let w_t = cfg.round_penalty_weight(t);
        let weight_cum = self.weight_cum + w_t;
        let numeric = |message: String| Error::Numeric { round: t, message };

        // Weight on Ψ inside this round's objective.
        let objective_weight = if family.exact_penalty() { weight_cum } else { w_t };
        let (l1, radius) = match cfg.penalty.kind {
            PenaltyKind::L1 => (objective_weight * lambda, None),
            PenaltyKind::BallIndicator { radius } => (0.0, (objective_weight > 0.0).then_some(radius)),
        };

        let margin = self.margin(ex);
        let label = ex.label();
        let ew = ex.weight();
        let loss = ew * cfg.loss.value(margin, label).map_err(|e| numeric(e.to_string()))?;
        let s_lin = ew * cfg.loss.derivative_unchecked(margin, label);
        if !s_lin.is_finite() || !loss.is_finite() {
            return Err(numeric(format!("non-finite gradient at margin {margin}")));
        }

        let sigma_prev_global = self.sigma_global;
        let sigma_global = match cfg.rate.mode {
            RateMode::GlobalScalar => cfg.rate.global_cumulative(t, cfg.sigma_floor),
            RateMode::PerCoordinateAdaptive => 0.0,
        };

        // Coordinates this round moves.
        let mut work = Vec::with_capacity(ex.features().len() + self.live.len());
        for &(coord, theta) in ex.features() {
            let slot = self.slot_for(coord);
            self.mark[slot] = t;
            work.push((slot, theta));
        }
        if cfg.eager() {
            for &slot in &self.live {
                if self.mark[slot] != t {
                    self.mark[slot] = t;
                    work.push((slot, 0.0));
                }
            }
        }
        if cfg.is_ball() {
            // Ball solves sum over coordinates; a fixed order keeps them reproducible.
            work.sort_by_key(|&(slot, _)| self.keys[slot]);
        }

        let work: Vec<Work> = work
            .into_iter()
            .map(|(slot, theta)| {
                let s = &self.slots[slot];
                let x_old = self.weight_of(slot);
                let g = s_lin * theta;
                let grad_sq = s.grad_sq + g * g;
                let (sigma_prev, sigma_new) = match cfg.rate.mode {
                    RateMode::GlobalScalar => (sigma_prev_global, sigma_global),
                    RateMode::PerCoordinateAdaptive => {
                        (s.sigma, cfg.rate.adaptive_cumulative(grad_sq, cfg.sigma_floor))
                    }
                };
                let sigma_step = sigma_new - sigma_prev;
                let z_pre = if family.exact_penalty() { s.z } else { -sigma_prev * x_old };
                let z_mid = if family.centered_at_iterate() { z_pre - sigma_step * x_old } else { z_pre };
                let center = (family.centered_at_iterate() && !family.exact_penalty()).then_some(x_old);
                Work { slot, theta, sigma_new, sigma_step, grad_sq, z_mid, center }
            })
            .collect();

        let s = match cfg.loss_handling {
            LossHandling::Linearized => s_lin,
            LossHandling::Implicit => solve_margin_fixed_point(cfg.loss, label, ew, |s| {
                match radius {
                    Some(r) => {
                        let x = ball_points(&work, s, r);
                        work.iter().zip(&x).map(|(w, xi)| w.theta * xi).sum()
                    }
                    None => work
                        .iter()
                        .filter(|w| w.theta != 0.0)
                        .map(|w| w.theta * l1_point(w, s, l1))
                        .sum(),
                }
            })
            .map_err(|e| numeric(e.to_string()))?,
        };

        let x_new = points(&work, s, l1, radius);
        if let Some(bad) = x_new.iter().find(|v| !v.is_finite()) {
            return Err(numeric(format!("non-finite iterate {bad}")));
        }

        // Diagnostics that need the pre-commit state.
        let mut diagnostics = None;
        let mut phi_entries = Vec::new();
        let mut delta = 0.0;
        let mut implicit_shift = 0.0;
        if full && cfg.loss_handling == LossHandling::Implicit {
            let x_bar = points(&work, s_lin, l1, radius);
            let d = self.implicit_advantage(&work, &x_new, &x_bar, s, l1, radius.is_some(), ex);
            delta = d.0;
            implicit_shift = d.1;
        }

        // Commit.
        let penalty_total = weight_cum * lambda;
        for (w, &xn) in work.iter().zip(&x_new) {
            let gp = s * w.theta;
            let z_lin = w.z_mid + gp;
            let slot = &mut self.slots[w.slot];
            slot.grad_sq = w.grad_sq;
            slot.sigma = w.sigma_new;
            if family.exact_penalty() {
                slot.z = z_lin;
                slot.x = xn;
            } else {
                let z_new = -w.sigma_new * xn;
                if full {
                    phi_entries.push((self.keys[w.slot], z_new - z_lin));
                }
                slot.z = z_new;
                slot.anchor = penalty_total;
                slot.x = if w.sigma_new > 0.0 { xn } else { 0.0 };
            }
        }
        self.t = t;
        self.alpha_cum += alpha_t;
        self.weight_cum = weight_cum;
        self.sigma_global = sigma_global;
        if cfg.eager() {
            self.live = work.iter().map(|w| w.slot).filter(|&slot| self.weight_of(slot) != 0.0).collect();
        }

        if full {
            let base = match cfg.rate.mode {
                RateMode::GlobalScalar => sigma_global - sigma_prev_global,
                RateMode::PerCoordinateAdaptive => {
                    if t == 1 {
                        cfg.sigma_floor
                    } else {
                        0.0
                    }
                }
            };
            let extra: WeightVector = work
                .iter()
                .filter(|_| cfg.rate.mode == RateMode::PerCoordinateAdaptive)
                .map(|w| (self.keys[w.slot], w.sigma_step - base))
                .collect();
            let g: WeightVector = ex.features().iter().map(|&(c, v)| (c, s * v)).collect();
            diagnostics = Some(Diagnostics {
                g,
                phi: phi_entries.into_iter().collect(),
                sigma_added: SigmaIncrement { base, extra },
                delta,
                implicit_shift,
            });
        }

        Ok(Outcome { progress: Progress { margin, loss }, diagnostics })
    }

    /// `h_{0:t}(x_t) − h_{0:t}(x_{t+1}) − R_t(x_t)`, where `h_{0:t}` is the
    /// objective minimized by `x_{t+1}`. Call after committing round `t`.
    fn ledger_between(&self, before: &WeightVector, after: &WeightVector, added: &SigmaIncrement) -> f64 {
        let family = self.config.family;
        let c_exact = match self.config.penalty.kind {
            PenaltyKind::L1 if family.exact_penalty() => self.penalty_total(),
            _ => 0.0,
        };
        let coords: BTreeSet<Coord> = before.coords().chain(after.coords()).collect();
        let mut total = 0.0;
        for c in coords {
            let (a, b) = (before.get(c), after.get(c));
            total += self.z(c) * (a - b) + 0.5 * self.sigma(c) * (a * a - b * b) + c_exact * (a.abs() - b.abs());
            if !family.centered_at_iterate() {
                total -= 0.5 * added.at(c) * a * a;
            }
        }
        total
    }

    /// `(δ_t, ‖x̄ − x*‖_∞)` for implicit point `x*` and linearized point `x̄`.
    #[allow(clippy::too_many_arguments)]
    fn implicit_advantage(
        &self,
        work: &[Work],
        x_star: &[f64],
        x_bar: &[f64],
        s: f64,
        l1: f64,
        ball: bool,
        ex: &SparseExample,
    ) -> (f64, f64) {
        let kind = self.config.loss;
        let label = ex.label();
        let ew = ex.weight();
        let mut quad = 0.0;
        let mut shift = 0.0f64;
        let (mut m_bar, mut m_star) = (0.0, 0.0);
        let mut breg_psi = 0.0;
        for (w, (&xs, &xb)) in work.iter().zip(x_star.iter().zip(x_bar)) {
            let d = xb - xs;
            quad += 0.5 * w.sigma_new * d * d;
            shift = shift.max(d.abs());
            m_bar += w.theta * xb;
            m_star += w.theta * xs;
            let phi = -(w.z_mid + s * w.theta + w.sigma_new * xs);
            breg_psi += if ball { -phi * d } else { l1 * xb.abs() - phi * xb };
        }
        let value = |m: f64| ew * kind.value(m, label).unwrap_or(f64::INFINITY);
        let breg_loss = value(m_bar) - value(m_star) - s * (m_bar - m_star);
        let breg_loss = if breg_loss.is_finite() { breg_loss.max(0.0) } else { 0.0 };
        (0.5 * (quad + breg_loss + breg_psi.max(0.0)), shift)
    }
}

struct Diagnostics {
    g: WeightVector,
    phi: WeightVector,
    sigma_added: SigmaIncrement,
    delta: f64,
    implicit_shift: f64,
}

struct Outcome {
    progress: Progress,
    diagnostics: Option<Diagnostics>,
}

fn l1_point(w: &Work, s: f64, l1: f64) -> f64 {
    if w.sigma_new <= 0.0 {
        return 0.0;
    }
    let u = match w.center {
        Some(c) => c - s * w.theta / w.sigma_new,
        None => -(w.z_mid + s * w.theta) / w.sigma_new,
    };
    soft_threshold(u, l1 / w.sigma_new)
}

fn ball_points(work: &[Work], s: f64, radius: f64) -> Vec<f64> {
    let a: Vec<f64> = work.iter().map(|w| w.z_mid + s * w.theta).collect();
    let q: Vec<f64> = work.iter().map(|w| w.sigma_new).collect();
    ball_argmin(&a, &q, radius).x
}

fn points(work: &[Work], s: f64, l1: f64, radius: Option<f64>) -> Vec<f64> {
    match radius {
        Some(r) => ball_points(work, s, r),
        None => work.iter().map(|w| l1_point(w, s, l1)).collect(),
    }
}
