//! Line formats:
//!
//! ```text
//! rule <id> when <metric><op><value>@<window>s [and ...] within <x>,<y>,<r> emit <event_type> severity <level>
//! sub <hardware_id> area <x>,<y>,<r> types <t1,t2> mode <active|passive>
//! ```
//!
//! Blank lines and lines starting with `#` are skipped by the multi-line
//! parsers.

use std::collections::BTreeSet;

use super::{AlertSubscription, Comparator, Condition, Metric, Mode, OntologyRule, ParseError, Severity};
use crate::msgcore::{ActivityCentre, CentreId, HardwareId, Position};

type Res<T> = Result<T, String>;

struct Tokens<'a> {
    inner: std::iter::Peekable<std::str::SplitWhitespace<'a>>,
}

impl<'a> Tokens<'a> {
    fn new(line: &'a str) -> Self {
        Self {
            inner: line.split_whitespace().peekable(),
        }
    }

    fn next(&mut self, what: &str) -> Res<&'a str> {
        self.inner
            .next()
            .ok_or_else(|| format!("expected {what}, found end of line"))
    }

    fn keyword(&mut self, kw: &str) -> Res<()> {
        match self.inner.next() {
            Some(t) if t == kw => Ok(()),
            Some(t) => Err(format!("expected `{kw}`, found `{t}`")),
            None => Err(format!("expected `{kw}`, found end of line")),
        }
    }

    fn peek(&mut self) -> Option<&'a str> {
        self.inner.peek().copied()
    }

    fn end(&mut self) -> Res<()> {
        match self.inner.next() {
            None => Ok(()),
            Some(t) => Err(format!("unexpected trailing `{t}`")),
        }
    }
}

fn number(s: &str, what: &str) -> Res<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("{what}: `{s}` is not a finite number")),
    }
}

fn area(s: &str, id: u64) -> Res<ActivityCentre> {
    let parts: Vec<&str> = s.split(',').collect();
    let [x, y, r] = parts[..] else {
        return Err(format!("area `{s}` must be <x>,<y>,<r>"));
    };
    let centre = Position::new(number(x, "area x")?, number(y, "area y")?);
    ActivityCentre::new(CentreId(id), centre, number(r, "area radius")?).map_err(|e| e.to_string())
}

fn condition(s: &str) -> Res<Condition> {
    let op_at = s
        .find(['<', '>', '='])
        .ok_or_else(|| format!("condition `{s}` has no comparator"))?;
    let (name, rest) = s.split_at(op_at);
    let metric = Metric::from_name(name).ok_or_else(|| format!("unknown metric `{name}`"))?;
    let (op, rest) = if let Some(r) = rest.strip_prefix(">=") {
        (Comparator::Ge, r)
    } else if let Some(r) = rest.strip_prefix("<=") {
        (Comparator::Le, r)
    } else if let Some(r) = rest.strip_prefix('>') {
        (Comparator::Gt, r)
    } else if let Some(r) = rest.strip_prefix('<') {
        (Comparator::Lt, r)
    } else {
        (Comparator::Eq, &rest[1..])
    };
    let (value, window) = rest
        .split_once('@')
        .ok_or_else(|| format!("condition `{s}` needs @<window>s"))?;
    let threshold = number(value, "threshold")?;
    let window = window
        .strip_suffix('s')
        .and_then(|w| w.parse::<u64>().ok())
        .filter(|w| *w > 0)
        .ok_or_else(|| format!("window `{window}` must be a positive whole number of seconds like `60s`"))?;
    Ok(Condition {
        metric,
        op,
        threshold,
        window,
    })
}

fn rule_inner(line: &str, area_id: u64) -> Res<OntologyRule> {
    let mut t = Tokens::new(line);
    t.keyword("rule")?;
    let id = t.next("rule id")?.to_string();
    t.keyword("when")?;
    let mut conditions = vec![condition(t.next("condition")?)?];
    while t.peek() == Some("and") {
        t.keyword("and")?;
        conditions.push(condition(t.next("condition")?)?);
    }
    t.keyword("within")?;
    let area = area(t.next("area")?, area_id)?;
    t.keyword("emit")?;
    let event_type = t.next("event type")?.to_string();
    t.keyword("severity")?;
    let level = t.next("severity level")?;
    let severity = Severity::from_name(level).ok_or_else(|| format!("unknown severity `{level}`"))?;
    t.end()?;
    Ok(OntologyRule {
        id,
        conditions,
        area,
        event_type,
        severity,
    })
}

fn sub_inner(line: &str, area_id: u64) -> Res<AlertSubscription> {
    let mut t = Tokens::new(line);
    t.keyword("sub")?;
    let raw = t.next("hardware id")?;
    let subscriber = raw
        .parse::<u64>()
        .map(HardwareId)
        .map_err(|_| format!("hardware id `{raw}` is not an unsigned integer"))?;
    t.keyword("area")?;
    let area = area(t.next("area")?, area_id)?;
    t.keyword("types")?;
    let event_types: BTreeSet<String> = t
        .next("event types")?
        .split(',')
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect();
    if event_types.is_empty() {
        return Err("subscription lists no event types".into());
    }
    t.keyword("mode")?;
    let mode = match t.next("mode")? {
        "active" => Mode::Active,
        "passive" => Mode::Passive,
        other => return Err(format!("mode must be active or passive, found `{other}`")),
    };
    t.end()?;
    Ok(AlertSubscription {
        subscriber,
        area,
        event_types,
        mode,
    })
}

pub fn parse_rule(line: &str) -> Result<OntologyRule, ParseError> {
    rule_inner(line, 0).map_err(|message| ParseError { line: 1, message })
}

pub fn parse_subscription(line: &str) -> Result<AlertSubscription, ParseError> {
    sub_inner(line, 0).map_err(|message| ParseError { line: 1, message })
}

fn parse_lines<T>(text: &str, f: impl Fn(&str, u64) -> Res<T>) -> Result<Vec<T>, ParseError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let item = f(line, out.len() as u64).map_err(|message| ParseError { line: i + 1, message })?;
        out.push(item);
    }
    Ok(out)
}

/// Parses a rule file. Each rule's area gets the rule's ordinal as its id.
pub fn parse_rules(text: &str) -> Result<Vec<OntologyRule>, ParseError> {
    parse_lines(text, rule_inner)
}

pub fn parse_subscriptions(text: &str) -> Result<Vec<AlertSubscription>, ParseError> {
    parse_lines(text, sub_inner)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLOOD: &str =
        "rule flood when water_level>3@60s and humidity>90@60s within 0,0,500 emit flood severity emergency_warning";

    #[test]
    fn flood_rule() {
        let r = parse_rule(FLOOD).unwrap();
        assert_eq!(r.id, "flood");
        assert_eq!(r.conditions.len(), 2);
        assert_eq!(r.conditions[0].metric, Metric::WaterLevel);
        assert_eq!(r.conditions[0].op, Comparator::Gt);
        assert_eq!(r.conditions[0].threshold, 3.0);
        assert_eq!(r.conditions[1].window, 60);
        assert_eq!(r.area.radius, 500.0);
        assert_eq!(r.event_type, "flood");
        assert_eq!(r.severity, Severity::EmergencyWarning);
    }

    #[test]
    fn comparators() {
        for (text, op) in [
            (">=", Comparator::Ge),
            ("<=", Comparator::Le),
            ("<", Comparator::Lt),
            (">", Comparator::Gt),
            ("=", Comparator::Eq),
        ] {
            let line = format!("rule r when noise{text}70.5@30s within 1,2,3 emit din severity advice");
            let r = parse_rule(&line).unwrap();
            assert_eq!(r.conditions[0].op, op, "{text}");
            assert_eq!(r.conditions[0].threshold, 70.5);
        }
    }

    #[test]
    fn subscription() {
        let s = parse_subscription("sub 42 area 10,-5,200 types flood,fire mode passive").unwrap();
        assert_eq!(s.subscriber, HardwareId(42));
        assert_eq!(s.area.centre, Position::new(10.0, -5.0));
        assert_eq!(s.event_types, BTreeSet::from(["fire".to_string(), "flood".to_string()]));
        assert_eq!(s.mode, Mode::Passive);
    }

    #[test]
    fn errors_name_the_line() {
        let text = format!("# rules\n{FLOOD}\n\nrule bad when water_level>x@60s within 0,0,1 emit f severity advice\n");
        let err = parse_rules(&text).unwrap_err();
        assert_eq!(err.line, 4);
        assert!(err.message.contains("threshold"), "{err}");
    }

    #[test]
    fn rejects_malformed() {
        for bad in [
            "rule r when water_level>3@60 within 0,0,1 emit f severity advice",
            "rule r when water_level>3@0s within 0,0,1 emit f severity advice",
            "rule r when depth>3@60s within 0,0,1 emit f severity advice",
            "rule r when water_level>3@60s within 0,0,0 emit f severity advice",
            "rule r when water_level>3@60s within 0,0 emit f severity advice",
            "rule r when water_level>3@60s within 0,0,1 emit f severity panic",
            "rule r when water_level>3@60s within 0,0,1 emit f severity advice extra",
            "rule r water_level>3@60s within 0,0,1 emit f severity advice",
        ] {
            assert!(parse_rule(bad).is_err(), "{bad}");
        }
        for bad in [
            "sub x area 0,0,1 types a mode active",
            "sub 1 area 0,0,1 types , mode active",
            "sub 1 area 0,0,1 types a mode loud",
            "sub 1 area 0,0,-1 types a mode active",
        ] {
            assert!(parse_subscription(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn rule_areas_are_numbered() {
        let text = format!("{FLOOD}\n{}", FLOOD.replace("flood when", "flood2 when"));
        let rules = parse_rules(&text).unwrap();
        assert_eq!(rules[0].area.id, CentreId(0));
        assert_eq!(rules[1].area.id, CentreId(1));
    }
}
