//! `@timing` strings: `every N (hour|min|sec) [base [yyyy:mm:dd:]hh:mm:ss]` or `anytime`.

use std::fmt;

use crate::DslError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Unit {
    Hour,
    Min,
    Sec,
}

impl Unit {
    pub fn seconds(self) -> u64 {
        match self {
            Unit::Hour => 3600,
            Unit::Min => 60,
            Unit::Sec => 1,
        }
    }
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Unit::Hour => "hour",
            Unit::Min => "min",
            Unit::Sec => "sec",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Base {
    pub date: Option<(u32, u32, u32)>,
    pub time: (u32, u32, u32),
}

impl fmt::Display for Base {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some((y, m, d)) = self.date {
            write!(f, "{y:04}:{m:02}:{d:02}:")?;
        }
        let (h, m, s) = self.time;
        write!(f, "{h:02}:{m:02}:{s:02}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TimingSpec {
    /// The base offset is kept for printing only; every period starts at tick zero.
    Every { n: u64, unit: Unit, base: Option<Base> },
    Anytime,
}

impl TimingSpec {
    pub fn period_seconds(&self) -> Option<u64> {
        match self {
            TimingSpec::Every { n, unit, .. } => Some(n * unit.seconds()),
            TimingSpec::Anytime => None,
        }
    }
}

impl fmt::Display for TimingSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimingSpec::Anytime => f.write_str("anytime"),
            TimingSpec::Every { n, unit, base } => {
                write!(f, "every {n} {unit}")?;
                if let Some(b) = base {
                    write!(f, " base {b}")?;
                }
                Ok(())
            }
        }
    }
}

fn words(s: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in s.char_indices() {
        match (c.is_whitespace(), start) {
            (true, Some(b)) => {
                out.push((b, &s[b..i]));
                start = None;
            }
            (false, None) => start = Some(i),
            _ => {}
        }
    }
    if let Some(b) = start {
        out.push((b, &s[b..]));
    }
    out
}

fn parse_base(off: usize, w: &str) -> Result<Base, DslError> {
    let bad = || DslError::syntax(off, format!("bad base `{w}`"));
    let parts: Vec<u32> = w
        .split(':')
        .map(|p| if p.is_empty() { Err(()) } else { p.parse().map_err(|_| ()) })
        .collect::<Result<_, _>>()
        .map_err(|_| bad())?;
    let (date, time) = match parts.as_slice() {
        [h, m, s] => (None, (*h, *m, *s)),
        [y, mo, d, h, m, s] => {
            if !(1..=12).contains(mo) || !(1..=31).contains(d) {
                return Err(bad());
            }
            (Some((*y, *mo, *d)), (*h, *m, *s))
        }
        _ => return Err(bad()),
    };
    if time.0 >= 24 || time.1 >= 60 || time.2 >= 60 {
        return Err(bad());
    }
    Ok(Base { date, time })
}

/// Parse a timing string. Errors carry byte offsets into `s`.
pub fn parse_timing(s: &str) -> Result<TimingSpec, DslError> {
    let ws = words(s);
    match ws.as_slice() {
        [(_, "anytime")] => Ok(TimingSpec::Anytime),
        [(_, "every"), (on, n), (uo, unit), rest @ ..] => {
            let n: u64 = n
                .parse()
                .map_err(|_| DslError::syntax(*on, format!("bad period `{n}`")))?;
            if n == 0 {
                return Err(DslError::syntax(*on, "period must be at least 1"));
            }
            let unit = match *unit {
                "hour" => Unit::Hour,
                "min" => Unit::Min,
                "sec" => Unit::Sec,
                other => return Err(DslError::syntax(*uo, format!("unknown unit `{other}`"))),
            };
            let base = match rest {
                [] => None,
                [(_, "base"), (bo, b)] => Some(parse_base(*bo, b)?),
                [(o, w), ..] => return Err(DslError::syntax(*o, format!("unexpected `{w}`"))),
            };
            Ok(TimingSpec::Every { n, unit, base })
        }
        [(o, w), ..] => Err(DslError::syntax(*o, format!("expected `every` or `anytime`, found `{w}`"))),
        [] => Err(DslError::syntax(0, "empty timing")),
    }
}

/// Convert to logical ticks of `tick_seconds` each. `anytime` is one tick.
pub fn timing_to_ticks(spec: &TimingSpec, tick_seconds: u64) -> Result<u64, DslError> {
    match spec.period_seconds() {
        None => Ok(1),
        Some(p) => seconds_to_ticks(p, tick_seconds),
    }
}

pub fn seconds_to_ticks(seconds: u64, tick_seconds: u64) -> Result<u64, DslError> {
    if tick_seconds == 0 || seconds == 0 || seconds % tick_seconds != 0 {
        return Err(DslError::IndivisiblePeriod { seconds, tick_seconds });
    }
    Ok(seconds / tick_seconds)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monitoring_timings() {
        assert_eq!(
            parse_timing("every 5 sec base 00:00:00").unwrap(),
            TimingSpec::Every {
                n: 5,
                unit: Unit::Sec,
                base: Some(Base {
                    date: None,
                    time: (0, 0, 0)
                })
            }
        );
        assert_eq!(parse_timing("anytime").unwrap(), TimingSpec::Anytime);
        assert_eq!(
            parse_timing("every 2 hour base 2024:03:01:12:30:00").unwrap().to_string(),
            "every 2 hour base 2024:03:01:12:30:00"
        );
        assert_eq!(parse_timing("every 1 min").unwrap().period_seconds(), Some(60));
    }

    #[test]
    fn zero_period_is_rejected_at_its_offset() {
        assert_eq!(
            parse_timing("every 0 sec base 00:00:00"),
            Err(DslError::syntax(6, "period must be at least 1"))
        );
    }

    #[test]
    fn malformed() {
        assert!(matches!(parse_timing("every 5 days"), Err(DslError::Syntax { offset: 8, .. })));
        assert!(matches!(parse_timing("every 5 sec base 25:00:00"), Err(DslError::Syntax { offset: 17, .. })));
        assert!(matches!(parse_timing("sometimes"), Err(DslError::Syntax { offset: 0, .. })));
        assert!(parse_timing("every 5 sec base 1:2").is_err());
    }

    #[test]
    fn ticks() {
        let min = parse_timing("every 1 min").unwrap();
        assert_eq!(timing_to_ticks(&min, 5).unwrap(), 12);
        assert_eq!(timing_to_ticks(&TimingSpec::Anytime, 7).unwrap(), 1);
        let five = parse_timing("every 5 sec").unwrap();
        assert_eq!(
            timing_to_ticks(&five, 2),
            Err(DslError::IndivisiblePeriod {
                seconds: 5,
                tick_seconds: 2
            })
        );
    }
}
