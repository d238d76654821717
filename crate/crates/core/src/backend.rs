//! Deterministic simulated backends.
//!
//! A profile stands in for a real model: it has a load-time range, a token
//! throughput, a linear energy law, a memory footprint and a per-domain
//! latent quality. All sampling goes through caller-provided seeded streams.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;

use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::{Error, Result};

/// Quality entry every profile must carry for queries of unknown domain.
pub const FALLBACK_DOMAIN: &str = "other";
pub const FEEDBACK_NOISE_SD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianLaw {
    pub mean: f64,
    pub stddev: f64,
}

/// How the energy bill relates to the generated tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum EnergyCoupling {
    /// Energy is charged for the same tokens that drive latency.
    #[default]
    Coupled,
    /// Energy is charged for an independent draw from the token law, so
    /// latency and energy decorrelate.
    Independent,
}

/// Cold-start load range used when a profile does not set one.
pub const DEFAULT_LOAD_TIME: Interval = Interval { lo: 1.5, hi: 2.0 };

#[cfg(feature = "serde")]
fn default_load_time() -> Interval {
    DEFAULT_LOAD_TIME
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct BackendProfile {
    pub profile_id: String,
    pub domain_tag: String,
    #[cfg_attr(feature = "serde", serde(default = "default_load_time"))]
    pub load_time_s: Interval,
    pub tokens_per_second: f64,
    pub base_latency_s: f64,
    pub energy_per_token_j: f64,
    pub energy_per_load_j: f64,
    pub footprint_mb: f64,
    /// Latent quality on the 1..=5 scale, keyed by query domain.
    pub quality: BTreeMap<String, GaussianLaw>,
    /// Generated length as a fraction of `max_tokens`.
    pub token_count_law: GaussianLaw,
    #[cfg_attr(feature = "serde", serde(default))]
    pub energy_coupling: EnergyCoupling,
}

impl BackendProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidProfile {
            profile: self.profile_id.clone(),
            reason,
        };
        let Interval { lo, hi } = self.load_time_s;
        if !(0.0..=60.0).contains(&lo) || !(0.0..=60.0).contains(&hi) || lo > hi {
            return Err(bad(format!("load_time_s [{lo}, {hi}] must lie within [0, 60] with lo <= hi")));
        }
        for (name, v) in [
            ("tokens_per_second", self.tokens_per_second),
            ("energy_per_token_j", self.energy_per_token_j),
            ("footprint_mb", self.footprint_mb),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(bad(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [
            ("base_latency_s", self.base_latency_s),
            ("energy_per_load_j", self.energy_per_load_j),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(bad(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !self.quality.contains_key(FALLBACK_DOMAIN) {
            return Err(bad(format!("quality has no `{FALLBACK_DOMAIN}` entry")));
        }
        for (domain, q) in &self.quality {
            if !(1.0..=5.0).contains(&q.mean) || !(q.stddev >= 0.0) {
                return Err(bad(format!(
                    "quality[{domain}] = ({}, {}) needs mean in [1, 5] and stddev >= 0",
                    q.mean, q.stddev
                )));
            }
        }
        let t = self.token_count_law;
        if !(t.mean > 0.0 && t.mean <= 1.0) || !(t.stddev >= 0.0) {
            return Err(bad(format!(
                "token_count_law ({}, {}) needs mean in (0, 1] and stddev >= 0",
                t.mean, t.stddev
            )));
        }
        Ok(())
    }

    pub fn quality_for(&self, domain: Option<&str>) -> Option<&GaussianLaw> {
        domain
            .and_then(|d| self.quality.get(d))
            .or_else(|| self.quality.get(FALLBACK_DOMAIN))
    }

    pub fn service_time(&self, tokens: u32) -> f64 {
        self.base_latency_s + f64::from(tokens) / self.tokens_per_second
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub tokens_generated: u32,
    pub service_time_s: f64,
    pub energy_j: f64,
    pub latent_quality: f64,
    pub cold_start: bool,
}

/// Samples a load duration uniformly from the profile's load-time range.
pub fn load<R: Rng + ?Sized>(profile: &BackendProfile, rng: &mut R) -> f64 {
    let Interval { lo, hi } = profile.load_time_s;
    if lo == hi {
        return lo;
    }
    Uniform::new_inclusive(lo, hi)
        .map(|u| u.sample(rng))
        .unwrap_or(lo)
}

fn gaussian<R: Rng + ?Sized>(law: GaussianLaw, scale: f64, rng: &mut R) -> f64 {
    let sd = law.stddev * scale;
    if sd == 0.0 {
        return law.mean * scale;
    }
    Normal::new(law.mean * scale, sd)
        .map(|n| n.sample(rng))
        .unwrap_or(law.mean * scale)
}

fn draw_tokens<R: Rng + ?Sized>(law: GaussianLaw, max_tokens: u32, rng: &mut R) -> u32 {
    let raw = libm::round(gaussian(law, f64::from(max_tokens), rng));
    raw.clamp(1.0, f64::from(max_tokens)) as u32
}

/// Simulates one inference on a resident model.
pub fn infer<R: Rng + ?Sized>(
    profile: &BackendProfile,
    max_tokens: u32,
    domain: Option<&str>,
    rng: &mut R,
    cold_start: bool,
) -> Result<InferenceResult> {
    if max_tokens == 0 {
        return Err(Error::OutOfRange {
            what: "max_tokens",
            value: 0.0,
        });
    }
    let quality = *profile.quality_for(domain).ok_or_else(|| Error::InvalidProfile {
        profile: profile.profile_id.clone(),
        reason: format!("quality has no `{FALLBACK_DOMAIN}` entry"),
    })?;
    let tokens = draw_tokens(profile.token_count_law, max_tokens, rng);
    let billed = match profile.energy_coupling {
        EnergyCoupling::Coupled => tokens,
        EnergyCoupling::Independent => draw_tokens(profile.token_count_law, max_tokens, rng),
    };
    let latent_quality = gaussian(quality, 1.0, rng).clamp(1.0, 5.0);
    let load_energy = if cold_start { profile.energy_per_load_j } else { 0.0 };
    Ok(InferenceResult {
        tokens_generated: tokens,
        service_time_s: profile.service_time(tokens),
        energy_j: f64::from(billed) * profile.energy_per_token_j + load_energy,
        latent_quality,
        cold_start,
    })
}

/// The client's 1..=5 rating of a response: latent quality plus
/// `Normal(0, noise_sd)`, rounded and clamped.
pub fn feedback_rating<R: Rng + ?Sized>(latent_quality: f64, noise_sd: f64, rng: &mut R) -> u8 {
    let noisy = latent_quality + gaussian(GaussianLaw { mean: 0.0, stddev: noise_sd }, 1.0, rng);
    libm::round(noisy).clamp(1.0, 5.0) as u8
}

#[cfg(test)]
pub(crate) fn profile(id: &str) -> BackendProfile {
    let mut quality = BTreeMap::new();
    quality.insert(FALLBACK_DOMAIN.into(), GaussianLaw { mean: 3.0, stddev: 0.0 });
    BackendProfile {
        profile_id: id.into(),
        domain_tag: "medical".into(),
        load_time_s: DEFAULT_LOAD_TIME,
        tokens_per_second: 64.0,
        base_latency_s: 0.5,
        energy_per_token_j: 2.0,
        energy_per_load_j: 100.0,
        footprint_mb: 2048.0,
        quality,
        token_count_law: GaussianLaw { mean: 0.5, stddev: 0.0 },
        energy_coupling: EnergyCoupling::Coupled,
    }
}
