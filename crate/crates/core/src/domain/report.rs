use num_rational::Ratio;
use serde::{Deserialize, Serialize};

/// Exact fraction of episodes won.
pub type WinRate = Ratio<u32>;

/// Serializes a [`WinRate`] as `"2/3"` (or `"1"`, `"0"`).
pub mod ratio_serde {
    use super::WinRate;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &WinRate, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<WinRate, D::Error> {
        let text = String::deserialize(d)?;
        parse(&text).map_err(D::Error::custom)
    }

    pub fn parse(text: &str) -> Result<WinRate, String> {
        let text = text.trim();
        let (num, den) = match text.split_once('/') {
            Some((n, d)) => (n.trim(), d.trim()),
            None => (text, "1"),
        };
        let num: u32 = num.parse().map_err(|_| format!("bad numerator in `{text}`"))?;
        let den: u32 = den.parse().map_err(|_| format!("bad denominator in `{text}`"))?;
        if den == 0 {
            return Err(format!("zero denominator in `{text}`"));
        }
        if num > den {
            return Err(format!("`{text}` exceeds 1"));
        }
        Ok(WinRate::new(num, den))
    }
}

/// Whole-number percentage, rounded half up: 2/3 -> 67.
pub fn percent(rate: WinRate) -> u32 {
    let num = u64::from(*rate.numer());
    let den = u64::from(*rate.denom());
    ((num * 200 + den) / (2 * den)) as u32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub win: bool,
    /// Completion time in ticks.
    pub ticks: u32,
    pub damage_dealt: f64,
    pub damage_taken: f64,
    pub surviving_hp_fraction: f64,
    pub seed: u64,
    /// Digest of the per-tick state trace, 16 hex chars.
    pub trace_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    #[serde(with = "ratio_serde")]
    pub win_rate: WinRate,
    pub episodes: Vec<EpisodeMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl PerformanceReport {
    pub fn from_episodes(episodes: Vec<EpisodeMetrics>) -> Self {
        assert!(!episodes.is_empty(), "a report needs at least one episode");
        let wins = episodes.iter().filter(|e| e.win).count() as u32;
        Self {
            win_rate: WinRate::new(wins, episodes.len() as u32),
            episodes,
            error: None,
        }
    }

    /// Evaluation could not run; the win rate defaults to zero.
    pub fn failed(error: impl Into<String>) -> Self {
        Self {
            win_rate: WinRate::from_integer(0),
            episodes: Vec::new(),
            error: Some(error.into()),
        }
    }

    pub fn wins(&self) -> usize {
        self.episodes.iter().filter(|e| e.win).count()
    }

    pub fn is_consistent(&self) -> bool {
        match &self.error {
            Some(_) => self.win_rate == WinRate::from_integer(0),
            None => {
                !self.episodes.is_empty()
                    && self.win_rate == WinRate::new(self.wins() as u32, self.episodes.len() as u32)
            }
        }
    }

    /// Short single-line summary for prompts and feedback.
    pub fn summary(&self) -> String {
        if let Some(err) = &self.error {
            let first = err.lines().next().unwrap_or_default();
            return format!("win rate 0% (error: {first})");
        }
        let n = self.episodes.len() as f64;
        let mean = |f: fn(&EpisodeMetrics) -> f64| self.episodes.iter().map(f).sum::<f64>() / n;
        format!(
            "win rate {}% ({}/{} episodes), mean ticks {:.0}, mean damage dealt {:.0}, mean damage taken {:.0}, mean surviving hp {:.0}%",
            percent(self.win_rate),
            self.wins(),
            self.episodes.len(),
            mean(|e| f64::from(e.ticks)),
            mean(|e| e.damage_dealt),
            mean(|e| e.damage_taken),
            100.0 * mean(|e| e.surviving_hp_fraction),
        )
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}
