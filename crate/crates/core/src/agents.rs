//! Observer/actor model.
//!
//! An agent perceives one noisy sample of the contrast difference, answers
//! by its sign, and reports its confidence `|x| / σ`. The same confidence
//! drives its motor behaviour: more confident agents respond sooner, start
//! pushing earlier and push harder. During the group phase an agent yields
//! once it has felt its partner overpowering it for `yield_dwell` seconds.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trials::Choice;

/// Log-scale spread of the multiplicative response-time noise.
pub const RT_LOG_SD: f64 = 0.2;

/// Sensed forces below this magnitude (N) do not count as opposition in the
/// stochastic yield mode.
const OPPOSITION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum YieldMode {
    /// Yield iff the partner pushes harder; the more confident agent always
    /// prevails.
    #[default]
    Deterministic,
    /// At the end of every opposed dwell window, yield with probability
    /// `partner / (own + partner)` using sensed force as a confidence proxy.
    Stochastic,
}

/// What a yielded agent does with its residual force `resist_gain * magnitude`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FollowerStyle {
    /// Keep pushing, weakly, toward the original choice (negative work).
    #[default]
    Resist,
    /// Push weakly toward the partner's side.
    Comply,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentProfile {
    /// Perceptual noise (% contrast).
    #[serde(rename = "sigma_pct")]
    pub sigma: f64,
    #[serde(rename = "bias_pct")]
    pub bias: f64,
    #[serde(rename = "rt_base_s")]
    pub rt_base: f64,
    #[serde(rename = "rt_gain_s")]
    pub rt_gain: f64,
    #[serde(rename = "onset_base_s")]
    pub onset_base: f64,
    #[serde(rename = "onset_gain_s")]
    pub onset_gain: f64,
    /// N per unit of confidence.
    #[serde(rename = "force_gain_n")]
    pub force_gain: f64,
    /// Constant offset added to the confidence-proportional force (N).
    #[serde(rename = "force_floor_n")]
    pub force_floor: f64,
    #[serde(rename = "f_max_n")]
    pub f_max: f64,
    #[serde(rename = "yield_dwell_s")]
    pub yield_dwell: f64,
    pub resist_gain: f64,
    pub yield_mode: YieldMode,
    pub follower_style: FollowerStyle,
    pub seed: u64,
}

impl Default for AgentProfile {
    fn default() -> Self {
        Self {
            sigma: 4.0,
            bias: 0.0,
            rt_base: 0.4,
            rt_gain: 1.0,
            onset_base: 0.2,
            onset_gain: 1.0,
            force_gain: 0.5,
            force_floor: 0.1,
            f_max: 2.0,
            yield_dwell: 0.3,
            resist_gain: 0.3,
            yield_mode: YieldMode::Deterministic,
            follower_style: FollowerStyle::Resist,
            seed: 0,
        }
    }
}

impl AgentProfile {
    pub fn with_curve(sigma: f64, bias: f64) -> Self {
        Self {
            sigma,
            bias,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.sigma,
            self.bias,
            self.rt_base,
            self.rt_gain,
            self.onset_base,
            self.onset_gain,
            self.force_gain,
            self.force_floor,
            self.f_max,
            self.yield_dwell,
            self.resist_gain,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("agent profile values must be finite"));
        }
        if self.sigma <= 0.0 {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if self.f_max <= 0.0 {
            return Err(Error::invalid(format!("f_max must be positive, got {}", self.f_max)));
        }
        let gains = [
            ("rt_base", self.rt_base),
            ("rt_gain", self.rt_gain),
            ("onset_base", self.onset_base),
            ("onset_gain", self.onset_gain),
            ("force_gain", self.force_gain),
            ("force_floor", self.force_floor),
            ("yield_dwell", self.yield_dwell),
        ];
        if let Some((name, v)) = gains.iter().find(|(_, v)| *v < 0.0) {
            return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
        }
        if !(0.0..=1.0).contains(&self.resist_gain) {
            return Err(Error::invalid(format!(
                "resist_gain must lie in [0, 1], got {}",
                self.resist_gain
            )));
        }
        Ok(())
    }

    /// Group-phase force onset, non-increasing in confidence.
    pub fn onset_time(&self, confidence: f64) -> f64 {
        self.onset_base + self.onset_gain / (1.0 + confidence)
    }

    /// Force magnitude the agent intends to apply, capped at `f_max`.
    pub fn force_magnitude(&self, confidence: f64) -> f64 {
        (self.force_floor + self.force_gain * confidence).min(self.f_max)
    }

    /// Noise-free response time.
    pub fn rt_mode(&self, confidence: f64) -> f64 {
        self.rt_base + self.rt_gain / (1.0 + confidence)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percept {
    /// Internal decision variable (% contrast).
    pub x: f64,
    pub choice: Choice,
    pub confidence: f64,
    /// `x` was exactly zero and a coin picked the choice.
    pub coin_flip: bool,
}

impl Percept {
    pub fn from_sample<R: Rng + ?Sized>(x: f64, sigma: f64, rng: &mut R) -> Self {
        let (choice, coin_flip) = match Choice::from_sign(x) {
            Some(c) => (c, false),
            None => (
                if rng.random_bool(0.5) {
                    Choice::Second
                } else {
                    Choice::First
                },
                true,
            ),
        };
        Percept {
            x,
            choice,
            confidence: x.abs() / sigma,
            coin_flip,
        }
    }
}

/// One noisy look at the stimulus: `x ~ N(ΔC + b, σ)`.
pub fn perceive<R: Rng + ?Sized>(profile: &AgentProfile, delta_c: f64, rng: &mut R) -> Percept {
    let z: f64 = StandardNormal.sample(rng);
    let x = delta_c + profile.bias + profile.sigma * z;
    Percept::from_sample(x, profile.sigma, rng)
}

/// `(rt_base + rt_gain / (1 + confidence)) * exp(RT_LOG_SD * z)`.
pub fn individual_rt<R: Rng + ?Sized>(percept: &Percept, profile: &AgentProfile, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    profile.rt_mode(percept.confidence) * (RT_LOG_SD * z).exp()
}

/// Group-phase force controller for one agent.
#[derive(Debug, Clone)]
pub struct Negotiator {
    profile: AgentProfile,
    own: Choice,
    target: Choice,
    magnitude: f64,
    onset: f64,
    opposing_since: Option<f64>,
    yielded_at: Option<f64>,
}

impl Negotiator {
    pub fn new(profile: &AgentProfile, percept: &Percept) -> Self {
        Self {
            profile: *profile,
            own: percept.choice,
            target: percept.choice,
            magnitude: profile.force_magnitude(percept.confidence),
            onset: profile.onset_time(percept.confidence),
            opposing_since: None,
            yielded_at: None,
        }
    }

    pub fn onset_time(&self) -> f64 {
        self.onset
    }

    pub fn intended_magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Side the agent currently accepts as the group answer.
    pub fn target(&self) -> Choice {
        self.target
    }

    pub fn yielded_at(&self) -> Option<f64> {
        self.yielded_at
    }

    /// Force (N, signed along the handle axis) applied at time `t` given the
    /// coupling force currently felt from the partner.
    pub fn force<R: Rng + ?Sized>(&mut self, t: f64, partner_force_sensed: f64, rng: &mut R) -> f64 {
        if t < self.onset {
            return 0.0;
        }
        if self.yielded_at.is_none() && self.should_yield(t, partner_force_sensed, rng) {
            self.yielded_at = Some(t);
            self.target = self.own.opposite();
        }
        match self.yielded_at {
            None => self.own.sign() * self.magnitude,
            Some(_) => {
                let residual = self.profile.resist_gain * self.magnitude;
                match self.profile.follower_style {
                    FollowerStyle::Resist => self.own.sign() * residual,
                    FollowerStyle::Comply => self.target.sign() * residual,
                }
            }
        }
    }

    fn should_yield<R: Rng + ?Sized>(&mut self, t: f64, sensed: f64, rng: &mut R) -> bool {
        let against = sensed * self.own.sign() < 0.0;
        let opposed = match self.profile.yield_mode {
            YieldMode::Deterministic => against && sensed.abs() > self.magnitude,
            YieldMode::Stochastic => against && sensed.abs() > OPPOSITION_EPS,
        };
        if !opposed {
            self.opposing_since = None;
            return false;
        }
        let since = *self.opposing_since.get_or_insert(t);
        if t - since < self.profile.yield_dwell - 1e-9 {
            return false;
        }
        match self.profile.yield_mode {
            YieldMode::Deterministic => true,
            YieldMode::Stochastic => {
                // steady state of the coupling: sensed = (own + partner) / 2
                let partner = (2.0 * sensed.abs() - self.magnitude).max(0.0);
                let total = partner + self.magnitude;
                let p = if total > 0.0 { partner / total } else { 0.5 };
                if rng.random_bool(p.clamp(0.0, 1.0)) {
                    true
                } else {
                    self.opposing_since = Some(t);
                    false
                }
            }
        }
    }
}

/// Snapshot of one agent's controller inputs at a single instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegotiationState {
    pub t: f64,
    pub own_pos: f64,
    pub partner_force_sensed: f64,
    /// Start of the current unbroken stretch of opposition, if any.
    pub opposing_since: Option<f64>,
}

/// Force applied at `state.t` by an agent whose history is summarised by
/// `state`. `own_pos` does not enter the policy.
pub fn negotiation_force<R: Rng + ?Sized>(
    percept: &Percept,
    profile: &AgentProfile,
    state: &NegotiationState,
    rng: &mut R,
) -> f64 {
    let mut n = Negotiator::new(profile, percept);
    n.opposing_since = state.opposing_since;
    n.force(state.t, state.partner_force_sensed, rng)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn percept(x: f64, sigma: f64) -> Percept {
        Percept::from_sample(x, sigma, &mut ChaCha8Rng::seed_from_u64(0))
    }

    #[test]
    fn defaults_are_valid() {
        AgentProfile::default().validate().unwrap();
    }

    #[test]
    fn validation_catches_bad_values() {
        let bad = [
            AgentProfile { sigma: 0.0, ..Default::default() },
            AgentProfile { f_max: 0.0, ..Default::default() },
            AgentProfile { force_gain: -1.0, ..Default::default() },
            AgentProfile { resist_gain: 1.5, ..Default::default() },
            AgentProfile { onset_base: f64::NAN, ..Default::default() },
        ];
        for p in bad {
            assert!(p.validate().is_err(), "{p:?}");
        }
    }

    #[test]
    fn noiseless_perception() {
        let p = AgentProfile::with_curve(1e-6, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let per = perceive(&p, 15.0, &mut rng);
        assert_eq!(per.choice, Choice::Second);
        assert!((per.confidence / 1.5e7 - 1.0).abs() < 1e-4);
        assert!(!per.coin_flip);
    }

    #[test]
    fn zero_sample_is_coin_flipped() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = Percept::from_sample(0.0, 2.0, &mut rng);
        assert!(p.coin_flip);
        assert_eq!(p.confidence, 0.0);
    }

    #[test]
    fn rt_limits() {
        let p = AgentProfile::default();
        assert!((p.rt_mode(1e12) - p.rt_base).abs() < 1e-9);
        assert_eq!(p.rt_mode(0.0), p.rt_base + p.rt_gain);
    }

    #[test]
    fn onset_gate_and_magnitude() {
        let profile = AgentProfile {
            force_floor: 0.0,
            ..Default::default()
        };
        let per = percept(2.0, 4.0); // confidence 0.5
        let mut n = Negotiator::new(&profile, &per);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let t_on = 0.2 + 1.0 / 1.5;
        assert!((n.onset_time() - t_on).abs() < 1e-15);
        assert_eq!(n.force(t_on - 1e-3, 0.0, &mut rng), 0.0);
        assert!((n.force(t_on + 1e-3, 0.0, &mut rng) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn magnitude_is_capped() {
        let p = AgentProfile::default();
        assert_eq!(p.force_magnitude(1e6), p.f_max);
        assert!(p.force_magnitude(0.0) <= p.f_max);
    }

    #[test]
    fn deterministic_yield_after_dwell() {
        let profile = AgentProfile::default();
        let per = percept(-1.0, 4.0); // wants First, pushes negative
        let mut n = Negotiator::new(&profile, &per);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = n.intended_magnitude();
        let start = n.onset_time();
        let mut t = start;
        // partner pushes toward Second harder than our own magnitude
        while t < start + profile.yield_dwell - 0.01 {
            assert_eq!(n.force(t, 2.0 * m, &mut rng), -m);
            t += 0.001;
        }
        assert!(n.yielded_at().is_none());
        for _ in 0..20 {
            n.force(t, 2.0 * m, &mut rng);
            t += 0.001;
        }
        assert!(n.yielded_at().is_some());
        assert_eq!(n.target(), Choice::Second);
        // resist style: residual force still points at the original choice
        assert!((n.force(t, 2.0 * m, &mut rng) - (-profile.resist_gain * m)).abs() < 1e-15);
    }

    #[test]
    fn interrupted_opposition_resets_dwell() {
        let profile = AgentProfile::default();
        let per = percept(1.0, 4.0);
        let mut n = Negotiator::new(&profile, &per);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = n.intended_magnitude();
        let mut t = n.onset_time();
        for i in 0..2000 {
            // every 200 ms the partner lets go for a step
            let sensed = if i % 200 == 199 { 0.0 } else { -2.0 * m };
            n.force(t, sensed, &mut rng);
            t += 0.001;
        }
        assert!(n.yielded_at().is_none());
    }

    #[test]
    fn weaker_opposition_never_yields() {
        let profile = AgentProfile::default();
        let per = percept(8.0, 4.0);
        let mut n = Negotiator::new(&profile, &per);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = n.intended_magnitude();
        let mut t = n.onset_time();
        for _ in 0..5000 {
            n.force(t, -0.9 * m, &mut rng);
            t += 0.001;
        }
        assert!(n.yielded_at().is_none());
    }

    #[test]
    fn comply_style_pushes_toward_partner() {
        let profile = AgentProfile {
            follower_style: FollowerStyle::Comply,
            ..Default::default()
        };
        let per = percept(1.0, 4.0);
        let mut n = Negotiator::new(&profile, &per);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = n.intended_magnitude();
        let mut t = n.onset_time();
        let mut last = 0.0;
        for _ in 0..400 {
            last = n.force(t, -2.0 * m, &mut rng);
            t += 0.001;
        }
        assert!(last < 0.0);
        assert!((last + profile.resist_gain * m).abs() < 1e-15);
    }

    #[test]
    fn stochastic_mode_eventually_yields_to_stronger_partner() {
        let profile = AgentProfile {
            yield_mode: YieldMode::Stochastic,
            ..Default::default()
        };
        let per = percept(1.0, 4.0);
        let mut yielded = 0;
        for seed in 0..50 {
            let mut n = Negotiator::new(&profile, &per);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = n.intended_magnitude();
            let mut t = n.onset_time();
            // sensed = (own + partner) / 2 with partner = 4 m
            for _ in 0..3000 {
                n.force(t, -2.5 * m, &mut rng);
                t += 0.001;
            }
            yielded += n.yielded_at().is_some() as usize;
        }
        // p = 0.8 per 0.3 s window over ~10 windows
        assert_eq!(yielded, 50);
    }

    #[test]
    fn stateless_force_matches_controller() {
        let profile = AgentProfile::default();
        let per = percept(3.0, 4.0);
        let on = profile.onset_time(per.confidence);
        let st = |t, sensed, since| NegotiationState {
            t,
            own_pos: 0.0,
            partner_force_sensed: sensed,
            opposing_since: since,
        };
        let m = profile.force_magnitude(per.confidence);
        let rng = &mut ChaCha8Rng::seed_from_u64(0);
        assert_eq!(negotiation_force(&per, &profile, &st(on - 0.01, 0.0, None), rng), 0.0);
        assert_eq!(negotiation_force(&per, &profile, &st(on + 0.01, 0.0, None), rng), m);
        let yielded = negotiation_force(&per, &profile, &st(on + 0.5, -3.0, Some(on)), rng);
        assert!((yielded - profile.resist_gain * m).abs() < 1e-15);
    }
}
