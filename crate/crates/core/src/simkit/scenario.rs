//! Scenario documents: a single JSON object with `"schema": 1`.
//!
//! Parsing reports the JSON path plus line and column of the first bad
//! value. [`Scenario::diagnostics`] then checks everything the type system
//! cannot, naming the offending field in each finding.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use super::geometry::Extent;
use super::SimError;
use crate::dtnproto::{EnergyCosts, IslandId, Role};
use crate::eventflow::{
    parse_rules, parse_subscriptions, AlertSubscription, Forecast, Mention, Metric, Mode, OntologyRule, Trigger,
    TriggerSpec,
};
use crate::msgcore::{CentreId, HardwareId, Position, Priority, Sensitivity};
use crate::secstream::SharedSecret;

pub const SCHEMA_VERSION: u32 = 1;

/// `[x, y]` in metres.
pub type Point = [f64; 2];

pub(crate) fn pos(p: Point) -> Position {
    Position::new(p[0], p[1])
}

/// Messages per contact: a number, or `"unlimited"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Limited(usize),
    Unlimited,
}

impl Budget {
    pub fn limit(self) -> Option<usize> {
        match self {
            Budget::Limited(n) => Some(n),
            Budget::Unlimited => None,
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::Limited(16)
    }
}

impl Serialize for Budget {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Budget::Limited(n) => s.serialize_u64(*n as u64),
            Budget::Unlimited => s.serialize_str("unlimited"),
        }
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Budget;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative message count or \"unlimited\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Budget, E> {
                Ok(Budget::Limited(v as usize))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Budget, E> {
                if v == "unlimited" {
                    Ok(Budget::Unlimited)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscSpec {
    pub centre: Point,
    pub radius: f64,
}

/// An island is a disc or a polygon. `anchor` is where super mules stop;
/// it defaults to the disc centre or the mean of the polygon's vertices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IslandSpec {
    pub id: IslandId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disc: Option<DiscSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Point>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CentreSpec {
    pub id: CentreId,
    pub centre: Point,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSpec {
    pub island: IslandId,
    pub dwell: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub at: Option<Point>,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MobilitySpec {
    #[default]
    Static,
    /// Pick a point, walk to it at a speed drawn from `speed`, pause for a
    /// time drawn from `pause`, repeat. Confined walkers stay inside their
    /// island; others roam the bounding box of all islands.
    RandomWaypoint {
        speed: [f64; 2],
        pause: [u64; 2],
        #[serde(default = "yes")]
        confined: bool,
    },
    /// Visit islands in order at `speed` m/s, dwelling at each.
    Itinerary {
        speed: f64,
        stops: Vec<StopSpec>,
        #[serde(default)]
        repeat: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: HardwareId,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub island: Option<IslandId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Point>,
    /// Message capacity; absent is unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub buffer: Option<usize>,
    /// Energy units; absent is unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default)]
    pub mobility: MobilitySpec,
    /// Half-open `[from, to)` windows with internet access.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub backhaul: Vec<[u64; 2]>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureSpec {
    pub node: HardwareId,
    pub offline_at: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub online_at: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    Node(HardwareId),
    Centre(CentreId),
}

/// Message generation at one source. Exactly one of `times`, `every` or
/// `rate` sets the schedule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficSpec {
    pub source: HardwareId,
    pub destination: Destination,
    #[serde(default = "normal")]
    pub priority: Priority,
    #[serde(default = "low_sensitive")]
    pub sensitivity: Sensitivity,
    /// Defaults to the destination node for unicast traffic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readers: Option<Vec<HardwareId>>,
    pub ttl: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub times: Vec<u64>,
    /// Fixed period in seconds, from `start` up to `end` or `count` messages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub every: Option<u64>,
    /// Poisson arrivals per second between `start` and `end`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<u64>,
}

fn normal() -> Priority {
    Priority::Normal
}

fn low_sensitive() -> Sensitivity {
    Sensitivity::LowSensitive
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedContact {
    pub time: u64,
    pub a: HardwareId,
    pub b: HardwareId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReadingSpec {
    pub time: u64,
    pub metric: Metric,
    pub value: f64,
}

/// Constant `value` every `every` seconds over `[from, to]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesSpec {
    pub metric: Metric,
    pub from: u64,
    pub to: u64,
    pub every: u64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub id: HardwareId,
    pub position: Point,
    /// Protection applied on the way to the stream manager.
    #[serde(default = "low_sensitive")]
    pub tier: Sensitivity,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub readings: Vec<ReadingSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub series: Vec<SeriesSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: u32,
    pub duration: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub tick: u64,
    pub radio_range: f64,
    #[serde(default)]
    pub contact_budget: Budget,
    /// Seconds per key interval.
    #[serde(default = "sixty")]
    pub key_interval: u64,
    /// Derived from the seed when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secret: Option<SharedSecret>,
    #[serde(default)]
    pub energy_costs: EnergyCosts,
    /// Probability that a bundle picked up by a super mule, or a sensor
    /// packet on its way to the stream manager, is corrupted.
    #[serde(default)]
    pub tamper_rate: f64,
    pub islands: Vec<IslandSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub centres: Vec<CentreSpec>,
    pub nodes: Vec<NodeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<FailureSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub traffic: Vec<TrafficSpec>,
    /// When present, replaces radio-range contact detection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contacts: Option<Vec<ScriptedContact>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sensors: Vec<SensorSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub forecasts: Vec<Forecast>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mentions: Vec<Mention>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub triggers: Vec<Trigger>,
    #[serde(default = "quiet")]
    pub trigger_quiet_period: u64,
    /// Rule lines; see [`crate::eventflow::parse_rule`].
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub subscriptions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subscription_file: Option<PathBuf>,
    #[serde(default = "alert_ttl")]
    pub alert_ttl: u64,
    #[serde(skip)]
    includes: Includes,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct Includes {
    rules: Option<String>,
    subscriptions: Option<String>,
}

fn one() -> u64 {
    1
}
fn sixty() -> u64 {
    60
}
fn quiet() -> u64 {
    crate::eventflow::TriggerState::DEFAULT_QUIET_PERIOD
}
fn alert_ttl() -> u64 {
    7200
}

/// Name of the last object key written before `line:column`. Syntax errors
/// carry no path of their own; the key just before them is the best guess.
fn last_key(text: &str, line: usize, column: usize) -> Option<String> {
    let mut upto = String::new();
    for (i, l) in text.lines().enumerate() {
        if i + 1 == line {
            upto.extend(l.chars().take(column));
            break;
        }
        upto.push_str(l);
        upto.push('\n');
    }
    let colon = upto.rfind(':')?;
    let before = upto[..colon].trim_end().strip_suffix('"')?;
    let open = before.rfind('"')?;
    Some(before[open + 1..].to_string())
}

/// One validation finding. `path` uses JSON-path style, e.g. `nodes[3].position`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

struct Findings(Vec<Diagnostic>);

impl Findings {
    fn add(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.0.push(Diagnostic {
            path: path.into(),
            message: message.into(),
        });
    }
}

fn finite(p: Point) -> bool {
    p[0].is_finite() && p[1].is_finite()
}

impl Scenario {
    /// Parses a scenario document. Include files are not read; see
    /// [`Scenario::load`] and [`Scenario::read_includes`].
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let inner = e.into_inner();
            let (line, column) = (inner.line(), inner.column());
            if path == "?" || path == "." {
                path = last_key(text, line, column).unwrap_or_else(|| "document".into());
            }
            let mut message = inner.to_string();
            if let Some(cut) = message.rfind(" at line ") {
                message.truncate(cut);
            }
            SimError::Parse {
                path,
                line,
                column,
                message,
            }
        })
    }

    /// Reads and parses `path`, then any rule or subscription files it names.
    /// Include paths are taken relative to the working directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| SimError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut s = Self::from_json(&text)?;
        s.read_includes()?;
        Ok(s)
    }

    pub fn read_includes(&mut self) -> Result<(), SimError> {
        let read = |p: &PathBuf| {
            std::fs::read_to_string(p).map_err(|source| SimError::Io {
                path: p.clone(),
                source,
            })
        };
        if let Some(p) = &self.rule_file {
            self.includes.rules = Some(read(p)?);
        }
        if let Some(p) = &self.subscription_file {
            self.includes.subscriptions = Some(read(p)?);
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn budget(&self) -> Option<usize> {
        self.contact_budget.limit()
    }

    /// Rules from inline lines and the rule file, in that order.
    pub fn parsed_rules(&self) -> Result<Vec<OntologyRule>, Diagnostic> {
        let inline = self.rules.join("\n");
        let mut rules = parse_rules(&inline).map_err(|e| Diagnostic {
            path: format!("rules[{}]", e.line - 1),
            message: e.message,
        })?;
        if let Some(text) = self.included(&self.rule_file, &self.includes.rules, "rule_file")? {
            let more = parse_rules(text).map_err(|e| Diagnostic {
                path: "rule_file".into(),
                message: e.to_string(),
            })?;
            rules.extend(more);
        }
        Ok(rules)
    }

    pub fn parsed_subscriptions(&self) -> Result<Vec<AlertSubscription>, Diagnostic> {
        let inline = self.subscriptions.join("\n");
        let mut subs = parse_subscriptions(&inline).map_err(|e| Diagnostic {
            path: format!("subscriptions[{}]", e.line - 1),
            message: e.message,
        })?;
        if let Some(text) = self.included(
            &self.subscription_file,
            &self.includes.subscriptions,
            "subscription_file",
        )? {
            let more = parse_subscriptions(text).map_err(|e| Diagnostic {
                path: "subscription_file".into(),
                message: e.to_string(),
            })?;
            subs.extend(more);
        }
        Ok(subs)
    }

    fn included<'a>(
        &self,
        file: &Option<PathBuf>,
        text: &'a Option<String>,
        field: &str,
    ) -> Result<Option<&'a str>, Diagnostic> {
        match (file, text) {
            (None, _) => Ok(None),
            (Some(_), Some(t)) => Ok(Some(t.as_str())),
            (Some(p), None) => Err(Diagnostic {
                path: field.into(),
                message: format!("{} has not been read", p.display()),
            }),
        }
    }

    pub fn extents(&self) -> BTreeMap<IslandId, Extent> {
        self.islands
            .iter()
            .filter_map(|i| Extent::from_spec(i).map(|e| (i.id, e)))
            .collect()
    }

    /// Every problem with the scenario; empty means it can run.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut f = Findings(Vec::new());
        self.check_globals(&mut f);
        let extents = self.check_islands(&mut f);
        let centres = self.check_centres(&mut f);
        let roles = self.check_nodes(&mut f, &extents);
        self.check_failures(&mut f, &roles);
        self.check_traffic(&mut f, &roles, &centres);
        self.check_contacts(&mut f, &roles);
        self.check_eventflow(&mut f, &roles);
        f.0
    }

    fn check_globals(&self, f: &mut Findings) {
        if self.schema != SCHEMA_VERSION {
            f.add(
                "schema",
                format!("unsupported schema {}, expected {SCHEMA_VERSION}", self.schema),
            );
        }
        if self.duration == 0 {
            f.add("duration", "must be positive");
        }
        if self.tick == 0 {
            f.add("tick", "must be positive");
        }
        if !(self.radio_range.is_finite() && self.radio_range >= 0.0) {
            f.add("radio_range", "must be a finite non-negative distance");
        }
        if self.key_interval == 0 {
            f.add("key_interval", "must be positive");
        }
        if let Some(s) = &self.secret {
            if let Err(e) = s.check() {
                f.add("secret.seed_prime", e.to_string());
            }
        }
        let c = &self.energy_costs;
        if !(c.per_send.is_finite() && c.per_send >= 0.0) {
            f.add("energy_costs.per_send", "must be finite and non-negative");
        }
        if !(c.per_receive.is_finite() && c.per_receive >= 0.0) {
            f.add("energy_costs.per_receive", "must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.tamper_rate) {
            f.add("tamper_rate", "must be a probability in [0, 1]");
        }
        if self.alert_ttl == 0 {
            f.add("alert_ttl", "must be positive");
        }
    }

    fn check_islands(&self, f: &mut Findings) -> BTreeMap<IslandId, Extent> {
        let mut out = BTreeMap::new();
        for (i, isl) in self.islands.iter().enumerate() {
            let at = format!("islands[{i}]");
            if out.contains_key(&isl.id) {
                f.add(format!("{at}.id"), format!("island {} is declared twice", isl.id));
                continue;
            }
            match (&isl.disc, &isl.polygon) {
                (Some(d), None) => {
                    if !finite(d.centre) {
                        f.add(format!("{at}.disc.centre"), "must be finite");
                        continue;
                    }
                    if !(d.radius.is_finite() && d.radius > 0.0) {
                        f.add(format!("{at}.disc.radius"), "must be positive");
                        continue;
                    }
                }
                (None, Some(p)) => {
                    if p.len() < 3 {
                        f.add(format!("{at}.polygon"), "needs at least three vertices");
                        continue;
                    }
                    if !p.iter().all(|v| finite(*v)) {
                        f.add(format!("{at}.polygon"), "vertices must be finite");
                        continue;
                    }
                }
                _ => {
                    f.add(at.clone(), "give exactly one of `disc` or `polygon`");
                    continue;
                }
            }
            if isl.anchor.is_some_and(|a| !finite(a)) {
                f.add(format!("{at}.anchor"), "must be finite");
                continue;
            }
            let extent = Extent::from_spec(isl).expect("checked above");
            out.insert(isl.id, extent);
        }
        if self.islands.is_empty() {
            f.add("islands", "at least one island is required");
        }
        out
    }

    fn check_centres(&self, f: &mut Findings) -> BTreeSet<CentreId> {
        let mut ids = BTreeSet::new();
        for (i, c) in self.centres.iter().enumerate() {
            if !ids.insert(c.id) {
                f.add(format!("centres[{i}].id"), format!("centre {} is declared twice", c.id));
            }
            if !finite(c.centre) {
                f.add(format!("centres[{i}].centre"), "must be finite");
            }
            if !(c.radius.is_finite() && c.radius > 0.0) {
                f.add(format!("centres[{i}].radius"), "must be positive");
            }
        }
        ids
    }

    /// Returns the role of every registered id (first declaration wins; a
    /// repeated id is a forged identity and is rejected at registration).
    fn check_nodes(
        &self,
        f: &mut Findings,
        extents: &BTreeMap<IslandId, Extent>,
    ) -> BTreeMap<HardwareId, (Role, Option<IslandId>)> {
        let mut roles = BTreeMap::new();
        let mut servers = 0;
        let mut collectors: BTreeMap<IslandId, usize> = BTreeMap::new();
        for (i, n) in self.nodes.iter().enumerate() {
            let at = format!("nodes[{i}]");
            if let Entry::Vacant(e) = roles.entry(n.id) {
                e.insert((n.role, n.island));
                if n.role == Role::BackhaulServer {
                    servers += 1;
                }
                if let (Role::Collector, Some(isl)) = (n.role, n.island) {
                    *collectors.entry(isl).or_default() += 1;
                }
            } else {
                // a sybil attempt: validated as a node but never registered
            }
            if n.role.has_island() {
                match n.island {
                    None => f.add(
                        format!("{at}.island"),
                        format!("node {} ({}) needs an island", n.id, n.role.name()),
                    ),
                    Some(isl) if !extents.contains_key(&isl) => f.add(
                        format!("{at}.island"),
                        format!("node {} names unknown island {isl}", n.id),
                    ),
                    _ => {}
                }
            } else if n.island.is_some() {
                f.add(
                    format!("{at}.island"),
                    format!("node {} ({}) does not belong to an island", n.id, n.role.name()),
                );
            }
            match (n.role, n.position) {
                (Role::BackhaulServer, _) => {}
                (_, None) => f.add(format!("{at}.position"), format!("node {} needs a position", n.id)),
                (_, Some(p)) if !finite(p) => f.add(format!("{at}.position"), "must be finite"),
                (role, Some(p)) => {
                    if let Some(ext) = n.island.and_then(|isl| extents.get(&isl)) {
                        if role.has_island() && !ext.contains(pos(p)) {
                            f.add(
                                format!("{at}.position"),
                                format!(
                                    "node {} at ({}, {}) lies outside island {}",
                                    n.id,
                                    p[0],
                                    p[1],
                                    n.island.expect("has island")
                                ),
                            );
                        }
                    }
                }
            }
            if n.buffer == Some(0) {
                f.add(format!("{at}.buffer"), "must be positive when given");
            }
            if n.energy.is_some_and(|e| !(e.is_finite() && e >= 0.0)) {
                f.add(format!("{at}.energy"), "must be finite and non-negative");
            }
            self.check_mobility(f, &at, n, extents);
            for (k, w) in n.backhaul.iter().enumerate() {
                if w[0] >= w[1] {
                    f.add(format!("{at}.backhaul[{k}]"), "window must satisfy from < to");
                }
            }
            if !n.backhaul.is_empty() && !matches!(n.role, Role::Collector | Role::AuxCollector | Role::Generator) {
                f.add(
                    format!("{at}.backhaul"),
                    format!("{} nodes do not uplink", n.role.name()),
                );
            }
        }
        if servers > 1 {
            f.add("nodes", "at most one backhaul_server may be declared");
        }
        for (isl, n) in collectors {
            if n > 1 {
                f.add(
                    "nodes",
                    format!("island {isl} declares {n} collectors; use aux_collector for standbys"),
                );
            }
        }
        let uplinks = self.nodes.iter().any(|n| !n.backhaul.is_empty());
        if uplinks && servers == 0 {
            f.add("nodes", "backhaul windows need a backhaul_server node");
        }
        roles
    }

    fn check_mobility(&self, f: &mut Findings, at: &str, n: &NodeSpec, extents: &BTreeMap<IslandId, Extent>) {
        let at = format!("{at}.mobility");
        match &n.mobility {
            MobilitySpec::Static => {}
            MobilitySpec::RandomWaypoint { speed, pause, confined } => {
                if n.role == Role::SuperMule {
                    f.add(at.clone(), "super mules cross islands by itinerary only");
                }
                if n.role == Role::BackhaulServer {
                    f.add(at.clone(), "the backhaul server does not move");
                }
                if !(speed[0].is_finite() && speed[0] > 0.0 && speed[1] >= speed[0] && speed[1].is_finite()) {
                    f.add(format!("{at}.speed"), "needs 0 < min <= max");
                }
                if pause[0] > pause[1] {
                    f.add(format!("{at}.pause"), "needs min <= max");
                }
                if *confined && n.island.is_none() {
                    f.add(format!("{at}.confined"), "a confined walker needs an island");
                }
            }
            MobilitySpec::Itinerary { speed, stops, .. } => {
                if n.role == Role::BackhaulServer {
                    f.add(at.clone(), "the backhaul server does not move");
                }
                if !(speed.is_finite() && *speed > 0.0) {
                    f.add(format!("{at}.speed"), "must be positive");
                }
                if stops.is_empty() {
                    f.add(format!("{at}.stops"), "needs at least one stop");
                }
                for (k, s) in stops.iter().enumerate() {
                    if !extents.contains_key(&s.island) {
                        f.add(
                            format!("{at}.stops[{k}].island"),
                            format!("unknown island {}", s.island),
                        );
                    }
                    if s.at.is_some_and(|p| !finite(p)) {
                        f.add(format!("{at}.stops[{k}].at"), "must be finite");
                    }
                }
                if n.role != Role::SuperMule {
                    let own = n.island;
                    if stops.iter().any(|s| Some(s.island) != own) {
                        f.add(at.clone(), "only super mules may travel to other islands");
                    }
                }
            }
        }
    }

    fn check_failures(&self, f: &mut Findings, roles: &BTreeMap<HardwareId, (Role, Option<IslandId>)>) {
        for (i, fl) in self.failures.iter().enumerate() {
            if !roles.contains_key(&fl.node) {
                f.add(format!("failures[{i}].node"), format!("unknown node {}", fl.node));
            }
            if fl.online_at.is_some_and(|on| on <= fl.offline_at) {
                f.add(format!("failures[{i}].online_at"), "must come after offline_at");
            }
        }
    }

    fn check_traffic(
        &self,
        f: &mut Findings,
        roles: &BTreeMap<HardwareId, (Role, Option<IslandId>)>,
        centres: &BTreeSet<CentreId>,
    ) {
        for (i, t) in self.traffic.iter().enumerate() {
            let at = format!("traffic[{i}]");
            match roles.get(&t.source) {
                None => f.add(format!("{at}.source"), format!("unknown node {}", t.source)),
                Some((r, _)) if *r != Role::Generator => f.add(
                    format!("{at}.source"),
                    format!("node {} is a {}, not a generator", t.source, r.name()),
                ),
                _ => {}
            }
            match t.destination {
                Destination::Node(d) => match roles.get(&d) {
                    None => f.add(format!("{at}.destination"), format!("unknown node {d}")),
                    Some((r, _)) if !r.has_island() => f.add(
                        format!("{at}.destination"),
                        format!("node {d} is a {} and cannot receive messages", r.name()),
                    ),
                    _ => {}
                },
                Destination::Centre(c) => {
                    if !centres.contains(&c) {
                        f.add(format!("{at}.destination"), format!("unknown centre {c}"));
                    }
                }
            }
            if let Some(readers) = &t.readers {
                for (k, r) in readers.iter().enumerate() {
                    if !roles.contains_key(r) {
                        f.add(format!("{at}.readers[{k}]"), format!("unknown node {r}"));
                    }
                }
            }
            let readers_empty = match (&t.readers, t.destination) {
                (Some(r), _) => r.is_empty(),
                (None, Destination::Node(_)) => false,
                (None, Destination::Centre(_)) => true,
            };
            if t.sensitivity.is_protected() && readers_empty {
                f.add(
                    format!("{at}.readers"),
                    "protected traffic needs a non-empty readers list",
                );
            }
            if t.ttl == 0 {
                f.add(format!("{at}.ttl"), "must be positive");
            }
            let modes = [!t.times.is_empty(), t.every.is_some(), t.rate.is_some()];
            if modes.iter().filter(|m| **m).count() != 1 {
                f.add(at.clone(), "give exactly one of `times`, `every` or `rate`");
            }
            if let Some((k, _)) = t.times.iter().enumerate().find(|(_, x)| **x > self.duration) {
                f.add(format!("{at}.times[{k}]"), "lies beyond the scenario duration");
            }
            if t.every == Some(0) {
                f.add(format!("{at}.every"), "must be positive");
            }
            if t.rate.is_some_and(|r| !(r.is_finite() && r > 0.0)) {
                f.add(format!("{at}.rate"), "must be positive");
            }
            if let (Some(s), Some(e)) = (t.start, t.end) {
                if s > e {
                    f.add(format!("{at}.end"), "must not precede start");
                }
            }
        }
    }

    fn check_contacts(&self, f: &mut Findings, roles: &BTreeMap<HardwareId, (Role, Option<IslandId>)>) {
        let Some(contacts) = &self.contacts else { return };
        for (i, c) in contacts.iter().enumerate() {
            for (field, id) in [("a", c.a), ("b", c.b)] {
                match roles.get(&id) {
                    None => f.add(format!("contacts[{i}].{field}"), format!("unknown node {id}")),
                    Some((Role::BackhaulServer, _)) => {
                        f.add(format!("contacts[{i}].{field}"), "the backhaul server has no radio")
                    }
                    _ => {}
                }
            }
            if c.a == c.b {
                f.add(format!("contacts[{i}]"), "a node cannot meet itself");
            }
            if c.time > self.duration {
                f.add(format!("contacts[{i}].time"), "lies beyond the scenario duration");
            }
        }
    }

    fn check_eventflow(&self, f: &mut Findings, roles: &BTreeMap<HardwareId, (Role, Option<IslandId>)>) {
        let mut ids = BTreeSet::new();
        for (i, s) in self.sensors.iter().enumerate() {
            let at = format!("sensors[{i}]");
            if !ids.insert(s.id) {
                f.add(format!("{at}.id"), format!("sensor {} is declared twice", s.id));
            }
            if !finite(s.position) {
                f.add(format!("{at}.position"), "must be finite");
            }
            let mut last: BTreeMap<Metric, u64> = BTreeMap::new();
            for (k, r) in s.readings.iter().enumerate() {
                if last.get(&r.metric).is_some_and(|t| *t > r.time) {
                    f.add(format!("{at}.readings[{k}].time"), "readings must not go back in time");
                }
                last.insert(r.metric, r.time);
                if !r.value.is_finite() {
                    f.add(format!("{at}.readings[{k}].value"), "must be finite");
                }
            }
            for (k, r) in s.series.iter().enumerate() {
                if r.every == 0 {
                    f.add(format!("{at}.series[{k}].every"), "must be positive");
                }
                if r.from > r.to {
                    f.add(format!("{at}.series[{k}]"), "needs from <= to");
                }
                if !r.value.is_finite() {
                    f.add(format!("{at}.series[{k}].value"), "must be finite");
                }
            }
        }
        let mut trig = BTreeSet::new();
        for (i, t) in self.triggers.iter().enumerate() {
            if !trig.insert(t.id.as_str()) {
                f.add(
                    format!("triggers[{i}].id"),
                    format!("trigger `{}` is declared twice", t.id),
                );
            }
            match &t.spec {
                TriggerSpec::SensorThreshold { sustain, threshold, .. } => {
                    if *sustain == 0 {
                        f.add(format!("triggers[{i}].sustain"), "must be positive");
                    }
                    if !threshold.is_finite() {
                        f.add(format!("triggers[{i}].threshold"), "must be finite");
                    }
                }
                TriggerSpec::SocialTopicBurst { window, .. } => {
                    if *window == 0 {
                        f.add(format!("triggers[{i}].window"), "must be positive");
                    }
                }
                TriggerSpec::WeatherForecast { .. } => {}
            }
        }
        if self.trigger_quiet_period == 0 {
            f.add("trigger_quiet_period", "must be positive");
        }
        if let Err(d) = self.parsed_rules() {
            f.0.push(d);
        }
        match self.parsed_subscriptions() {
            Err(d) => f.0.push(d),
            Ok(subs) => {
                for s in &subs {
                    if !roles.contains_key(&s.subscriber) {
                        f.add(
                            "subscriptions",
                            format!("subscriber {} is not a registered node", s.subscriber),
                        );
                    }
                }
                let server = roles.values().any(|(r, _)| *r == Role::BackhaulServer);
                if subs.iter().any(|s| s.mode == Mode::Active) && !server {
                    f.add(
                        "subscriptions",
                        "active subscriptions need a backhaul_server to send from",
                    );
                }
            }
        }
    }
}
