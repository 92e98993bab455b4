use std::collections::BTreeMap;
use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::UserId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum QuotaMode {
    /// At most q(u) accepted shares in each step.
    #[default]
    PerStep,
    /// At most q(u) accepted shares over the whole run.
    Lifetime,
}

/// Parameters of the preference-salience sharing process. Share propensity is
/// `σ(a·pref(u,i) + b·pref(v,i) + c)` for sender `u`, recipient `v`, item `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct CascadeConfig {
    /// Minimum sender preference for an item to be shareable at all.
    pub pref_threshold: f64,
    /// Steps an item stays salient after it is received or seeded.
    pub salience_window: u32,
    /// `a`, weight on the sender's own preference.
    pub sender_weight: f64,
    /// `b`, weight on the recipient's preference.
    pub recipient_weight: f64,
    /// `c`.
    pub bias: f64,
    /// Default q(u); `None` means no cap.
    pub quota: Option<u32>,
    pub quota_overrides: BTreeMap<UserId, u32>,
    pub quota_mode: QuotaMode,
    pub max_steps: u32,
}

impl Default for CascadeConfig {
    fn default() -> Self {
        Self {
            pref_threshold: 0.2,
            salience_window: 2,
            sender_weight: 3.0,
            recipient_weight: 1.0,
            bias: -2.0,
            quota: None,
            quota_overrides: BTreeMap::new(),
            quota_mode: QuotaMode::PerStep,
            max_steps: 50,
        }
    }
}

impl CascadeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.pref_threshold) {
            return Err(Error::validation(format!("pref_threshold {} outside [0, 1]", self.pref_threshold)));
        }
        if self.salience_window == 0 || self.max_steps == 0 {
            return Err(Error::validation("salience_window and max_steps must be at least 1"));
        }
        let (a, b) = (self.sender_weight, self.recipient_weight);
        if !(a.is_finite() && b.is_finite()) || b < 0.0 || a < b {
            return Err(Error::validation(format!(
                "weights must satisfy sender_weight >= recipient_weight >= 0, got a={a}, b={b}"
            )));
        }
        if self.bias.is_nan() {
            return Err(Error::validation("bias is NaN"));
        }
        Ok(())
    }

    pub fn quota_of(&self, node: &UserId) -> Option<u32> {
        self.quota_overrides.get(node).copied().or(self.quota)
    }

    /// Flat `key=value` text; `quota.<user>` lines carry overrides.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "pref_threshold={}", self.pref_threshold);
        let _ = writeln!(s, "salience_window={}", self.salience_window);
        let _ = writeln!(s, "sender_weight={}", self.sender_weight);
        let _ = writeln!(s, "recipient_weight={}", self.recipient_weight);
        let _ = writeln!(s, "bias={}", self.bias);
        match self.quota {
            Some(q) => {
                let _ = writeln!(s, "quota={q}");
            }
            None => s.push_str("quota=unlimited\n"),
        }
        let mode = match self.quota_mode {
            QuotaMode::PerStep => "per_step",
            QuotaMode::Lifetime => "lifetime",
        };
        let _ = writeln!(s, "quota_mode={mode}");
        let _ = writeln!(s, "max_steps={}", self.max_steps);
        for (u, q) in &self.quota_overrides {
            let _ = writeln!(s, "quota.{u}={q}");
        }
        s
    }

    /// Parses `key=value` lines onto the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::validation(format!("config line {}: expected key=value", n + 1)))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::validation(format!("config line {}: {e}", n + 1)))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::validation(format!("bad value {v:?} for {key}")))
        }
        match key {
            "pref_threshold" => self.pref_threshold = num(key, value)?,
            "salience_window" => self.salience_window = num(key, value)?,
            "sender_weight" => self.sender_weight = num(key, value)?,
            "recipient_weight" => self.recipient_weight = num(key, value)?,
            "bias" => self.bias = num(key, value)?,
            "max_steps" => self.max_steps = num(key, value)?,
            "quota" => {
                self.quota = if value == "unlimited" { None } else { Some(num(key, value)?) };
            }
            "quota_mode" => {
                self.quota_mode = match value {
                    "per_step" => QuotaMode::PerStep,
                    "lifetime" => QuotaMode::Lifetime,
                    other => return Err(Error::validation(format!("unknown quota_mode {other:?}"))),
                }
            }
            other => {
                let Some(user) = other.strip_prefix("quota.") else {
                    return Err(Error::validation(format!("unknown config key {other:?}")));
                };
                self.quota_overrides.insert(UserId::new(user)?, num(key, value)?);
            }
        }
        Ok(())
    }
}
