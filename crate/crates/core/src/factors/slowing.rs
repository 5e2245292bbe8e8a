//! Exponential slowing-down of a raw signal and the implied rebalancing flow.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{CrowdingError, Result};
use crate::panel::Panel;

/// Overall position scale `A`.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Scale {
    Fixed(f64),
    /// Chosen so the pooled standard deviation of the slowed position is 1.
    #[default]
    Auto,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::Fixed(a) => write!(f, "{a}"),
            Scale::Auto => f.write_str("auto"),
        }
    }
}

impl FromStr for Scale {
    type Err = CrowdingError;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Scale::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|a| a.is_finite())
            .map(Scale::Fixed)
            .ok_or_else(|| CrowdingError::InvalidParameter(format!("scale must be `auto` or a number, got {s:?}")))
    }
}

impl Serialize for Scale {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scale::Fixed(a) => s.serialize_f64(*a),
            Scale::Auto => s.serialize_str("auto"),
        }
    }
}

impl<'de> Deserialize<'de> for Scale {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Text(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(a) => Ok(Scale::Fixed(a)),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Slowed position together with the scale actually applied.
#[derive(Clone, Debug, PartialEq)]
pub struct Slowed {
    pub pi: Panel,
    pub scale: f64,
}

/// `pi_t = e^{-1/D} pi_{t-1} + A s_t`, the recursive form of the exponential
/// moving sum `A Σ_{t'≤t} s_{t'} e^{-(t-t')/D}`.
///
/// A stock's position is missing until its first valid signal; after that a
/// missing signal contributes nothing and the position keeps decaying. With
/// [`Scale::Auto`] and an identically zero position, `A` falls back to 1.
pub fn slow_signal(s: &Panel, d: f64, scale: Scale) -> Result<Slowed> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(CrowdingError::InvalidParameter(format!(
            "slowing timescale D must be positive, got {d}"
        )));
    }
    let a = match scale {
        Scale::Fixed(a) => a,
        Scale::Auto => 1.0,
    };
    let decay = (-1.0 / d).exp();
    let n = s.n_dates();
    let mut values = vec![f64::NAN; s.values().len()];
    for (i, row) in s.rows().enumerate() {
        let out = &mut values[i * n..(i + 1) * n];
        let mut state: Option<f64> = None;
        for (t, &x) in row.iter().enumerate() {
            state = match (state, x.is_nan()) {
                (None, true) => None,
                (None, false) => Some(a * x),
                (Some(p), true) => Some(decay * p),
                (Some(p), false) => Some(decay * p + a * x),
            };
            out[t] = state.unwrap_or(f64::NAN);
        }
    }
    let mut pi = s.with_values(values);
    let mut applied = a;
    if scale == Scale::Auto {
        let sd = pooled_std(pi.values());
        if sd > 0.0 {
            applied = 1.0 / sd;
            pi = pi.map(|v| v * applied);
        }
    }
    Ok(Slowed { pi, scale: applied })
}

/// Population standard deviation over the present cells.
pub fn pooled_std(values: &[f64]) -> f64 {
    let (mut n, mut sum) = (0usize, 0.0);
    for &v in values.iter().filter(|v| !v.is_nan()) {
        n += 1;
        sum += v;
    }
    if n == 0 {
        return 0.0;
    }
    let mean = sum / n as f64;
    let ss: f64 = values
        .iter()
        .filter(|v| !v.is_nan())
        .map(|v| (v - mean) * (v - mean))
        .sum();
    (ss / n as f64).sqrt()
}

/// Day-over-day change of the slowed position: the trades needed to track it.
/// Missing on each stock's first day and around any missing position.
pub fn expected_flow(pi: &Panel) -> Panel {
    let n = pi.n_dates();
    let mut values = vec![f64::NAN; pi.values().len()];
    for (i, row) in pi.rows().enumerate() {
        for t in 1..n {
            values[i * n + t] = row[t] - row[t - 1];
        }
    }
    pi.with_values(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::StockId;
    use chrono::NaiveDate;
    use std::sync::Arc;

    fn series(values: Vec<f64>) -> Panel {
        let start = NaiveDate::from_ymd_opt(2000, 1, 1).unwrap();
        let dates: Vec<NaiveDate> = (0..values.len())
            .map(|k| start + chrono::Days::new(k as u64))
            .collect();
        let stocks: Arc<[StockId]> = vec![StockId::new("X")].into();
        Panel::new(stocks, dates.into(), values).unwrap()
    }

    #[test]
    fn impulse_response() {
        let d = 7.0;
        let mut s = vec![0.0; 30];
        s[0] = 1.0;
        let pi = slow_signal(&series(s), d, Scale::Fixed(1.0)).unwrap().pi;
        for k in 0..30 {
            let want = (-(k as f64) / d).exp();
            assert!((pi.get(0, k).unwrap() - want).abs() <= 1e-14 * want.max(1e-300), "k={k}");
        }
    }

    #[test]
    fn constant_signal_steady_state() {
        // Geometric series closed form c / (1 - e^{-1/D}); 25·D steps leave
        // a relative truncation error of e^{-25}.
        let (d, c) = (10.0, 0.3);
        let steps = (25.0 * d) as usize;
        let pi = slow_signal(&series(vec![c; steps]), d, Scale::Fixed(1.0)).unwrap().pi;
        let want = c / (1.0 - (-1.0 / d).exp());
        let got = pi.get(0, steps - 1).unwrap();
        assert!(((got - want) / want).abs() < 1e-9, "{got} vs {want}");
    }

    #[test]
    fn tiny_timescale_passes_signal_through() {
        let s = vec![0.1, -0.2, 0.3, 0.05];
        let pi = slow_signal(&series(s.clone()), 1e-6, Scale::Fixed(1.0)).unwrap().pi;
        for (t, want) in s.into_iter().enumerate() {
            assert_eq!(pi.get(0, t).unwrap(), want);
        }
    }

    #[test]
    fn rejects_non_positive_d() {
        let p = series(vec![1.0]);
        assert!(slow_signal(&p, 0.0, Scale::Auto).is_err());
        assert!(slow_signal(&p, -3.0, Scale::Auto).is_err());
        assert!(slow_signal(&p, f64::NAN, Scale::Auto).is_err());
    }

    #[test]
    fn auto_scale_gives_unit_std() {
        let s: Vec<f64> = (0..200).map(|t| ((t as f64) * 0.37).sin()).collect();
        let out = slow_signal(&series(s), 12.0, Scale::Auto).unwrap();
        assert!((pooled_std(out.pi.values()) - 1.0).abs() < 1e-9);
        assert!(out.scale > 0.0);
    }

    #[test]
    fn position_missing_before_first_signal() {
        let pi = slow_signal(&series(vec![f64::NAN, 1.0, f64::NAN, 0.0]), 2.0, Scale::Fixed(1.0))
            .unwrap()
            .pi;
        assert_eq!(pi.get(0, 0), None);
        assert_eq!(pi.get(0, 1), Some(1.0));
        assert_eq!(pi.get(0, 2), Some((-0.5f64).exp()));
    }

    #[test]
    fn flow_of_constant_is_zero() {
        let dp = expected_flow(&series(vec![2.0; 5]));
        assert_eq!(dp.get(0, 0), None);
        assert!((1..5).all(|t| dp.get(0, t) == Some(0.0)));
    }

    #[test]
    fn flow_of_impulse() {
        let (d, a) = (5.0, 2.0);
        let mut s = vec![f64::NAN; 3];
        s.extend([1.0, 0.0, 0.0, 0.0]);
        let pi = slow_signal(&series(s), d, Scale::Fixed(a)).unwrap().pi;
        let mut padded = pi.values().to_vec();
        padded[2] = 0.0; // flat position the day before the impulse
        let dp = expected_flow(&pi.with_values(padded));
        assert_eq!(dp.get(0, 3), Some(a));
        for k in 1..4 {
            let want = a * ((-(k as f64) / d).exp() - (-((k - 1) as f64) / d).exp());
            let got = dp.get(0, 3 + k).unwrap();
            assert!(got < 0.0);
            assert!((got - want).abs() < 1e-14);
        }
    }

    #[test]
    fn flow_missing_around_gap() {
        let dp = expected_flow(&series(vec![1.0, 2.0, f64::NAN, 4.0, 5.0]));
        assert_eq!(dp.get(0, 1), Some(1.0));
        assert_eq!(dp.get(0, 2), None);
        assert_eq!(dp.get(0, 3), None);
        assert_eq!(dp.get(0, 4), Some(1.0));
    }

    #[test]
    fn scale_parsing() {
        assert_eq!("auto".parse::<Scale>().unwrap(), Scale::Auto);
        assert_eq!("2.5".parse::<Scale>().unwrap(), Scale::Fixed(2.5));
        assert!("x".parse::<Scale>().is_err());
        let v: Scale = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(v, Scale::Auto);
        let v: Scale = serde_json::from_str("1.5").unwrap();
        assert_eq!(v, Scale::Fixed(1.5));
    }
}
