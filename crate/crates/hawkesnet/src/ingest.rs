//! Check-in ingestion: parsing, filtering and conversion to event catalogs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use chrono::{DateTime, NaiveDate};
use hawkesnet_core::{Event, EventCatalog, Region};

use crate::error::{data, Error, Result};
use crate::io::dense_ids;

/// Upper bound on the events handed to a fit.
pub const MAX_EVENTS: usize = 10_000;

/// Mean Earth radius in kilometres.
pub const EARTH_RADIUS_KM: f64 = 6371.0088;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckinRecord {
    pub user: String,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub lat: f64,
    pub lon: f64,
}

impl CheckinRecord {
    pub fn new(user: impl Into<String>, timestamp: i64, lat: f64, lon: f64) -> Result<Self> {
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(data(format!("coordinates ({lat}, {lon}) out of range")));
        }
        Ok(Self { user: user.into(), timestamp, lat, lon })
    }
}

/// Undirected friendships, stored once per pair with the smaller id first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FriendEdgeList {
    pairs: BTreeSet<(String, String)>,
}

impl FriendEdgeList {
    /// Self-pairs are dropped and duplicates merged.
    pub fn new<I, S>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for (a, b) in pairs {
            let (a, b): (String, String) = (a.into(), b.into());
            match a.cmp(&b) {
                std::cmp::Ordering::Less => set.insert((a, b)),
                std::cmp::Ordering::Greater => set.insert((b, a)),
                std::cmp::Ordering::Equal => false,
            };
        }
        Self { pairs: set }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(a, b)| (a.as_str(), b.as_str()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn adjacency(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for (a, b) in self.pairs() {
            adj.entry(a).or_default().insert(b);
            adj.entry(b).or_default().insert(a);
        }
        adj
    }

    /// Number of friends of every user with at least one.
    pub fn degrees(&self) -> BTreeMap<&str, usize> {
        self.adjacency().into_iter().map(|(u, n)| (u, n.len())).collect()
    }
}

/// Accepts seconds since the epoch or an RFC 3339 time.
pub fn parse_timestamp(s: &str) -> Option<i64> {
    if let Ok(v) = s.parse::<i64>() {
        return Some(v);
    }
    if let Ok(v) = s.parse::<f64>() {
        return v.is_finite().then_some(v.floor() as i64);
    }
    DateTime::parse_from_rfc3339(s).ok().map(|d| d.timestamp())
}

/// Midnight UTC of a calendar date, in seconds since the epoch.
pub fn date_timestamp(year: i32, month: u32, day: u32) -> Option<i64> {
    NaiveDate::from_ymd_opt(year, month, day)?.and_hms_opt(0, 0, 0).map(|d| d.and_utc().timestamp())
}

fn lines(path: &Path) -> Result<impl Iterator<Item = (u64, std::io::Result<String>)>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(f).lines().enumerate().map(|(k, l)| (k as u64 + 1, l)))
}

fn split(line: &str) -> Vec<&str> {
    if line.contains('\t') { line.split('\t') } else { line.split(',') }.map(str::trim).collect()
}

/// Reads check-ins from either a `user,timestamp,lat,lon` CSV with that
/// header, or a headerless tab-separated `user time lat lon [location]`
/// file as distributed with the Gowalla data.
pub fn read_checkins(path: &Path) -> Result<Vec<CheckinRecord>> {
    let mut out = Vec::new();
    for (line_no, line) in lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f = split(&line);
        if line_no == 1 && f.first() == Some(&"user") {
            if f.len() < 4 || f[1..4] != ["timestamp", "lat", "lon"] {
                return Err(Error::parse(path, 1, format!("expected header `user,timestamp,lat,lon`, found `{line}`")));
            }
            continue;
        }
        if f.len() < 4 {
            return Err(Error::parse(path, line_no, format!("malformed row: {} fields, expected at least 4", f.len())));
        }
        let malformed = |what: &str, v: &str| Error::parse(path, line_no, format!("malformed row: `{v}` is not a valid {what}"));
        let ts = parse_timestamp(f[1]).ok_or_else(|| malformed("timestamp", f[1]))?;
        let lat: f64 = f[2].parse().map_err(|_| malformed("latitude", f[2]))?;
        let lon: f64 = f[3].parse().map_err(|_| malformed("longitude", f[3]))?;
        let rec = CheckinRecord::new(f[0], ts, lat, lon).map_err(|e| Error::parse(path, line_no, e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Reads `user_a,user_b` pairs (CSV with that header, or headerless
/// tab-separated). Both directions of a pair may appear.
pub fn read_friendships(path: &Path) -> Result<FriendEdgeList> {
    let mut pairs = Vec::new();
    for (line_no, line) in lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let f = split(&line);
        if line_no == 1 && f.first() == Some(&"user_a") {
            continue;
        }
        if f.len() != 2 || f[0].is_empty() || f[1].is_empty() {
            return Err(Error::parse(path, line_no, "malformed row: expected two user ids"));
        }
        pairs.push((f[0].to_owned(), f[1].to_owned()));
    }
    Ok(FriendEdgeList::new(pairs))
}

/// Keeps records with `south ≤ lat ≤ north` and `west ≤ lon ≤ east`.
pub fn bbox_filter(records: &[CheckinRecord], north: f64, south: f64, east: f64, west: f64) -> Result<Vec<CheckinRecord>> {
    if !(north > south) || !(east > west) {
        return Err(data(format!("inverted bounding box N {north} S {south} E {east} W {west}")));
    }
    Ok(records
        .iter()
        .filter(|r| south <= r.lat && r.lat <= north && west <= r.lon && r.lon <= east)
        .cloned()
        .collect())
}

/// Records with `start ≤ timestamp < end`.
pub fn time_filter(records: &[CheckinRecord], start: i64, end: i64) -> Result<Vec<CheckinRecord>> {
    if end <= start {
        return Err(data(format!("empty time window [{start}, {end})")));
    }
    Ok(records.iter().filter(|r| start <= r.timestamp && r.timestamp < end).cloned().collect())
}

pub fn record_counts(records: &[CheckinRecord]) -> HashMap<&str, usize> {
    let mut c = HashMap::new();
    for r in records {
        *c.entry(r.user.as_str()).or_insert(0) += 1;
    }
    c
}

/// Keeps every record of users with between `min_count` and `max_count`
/// records inclusive.
pub fn activity_filter(records: &[CheckinRecord], min_count: usize, max_count: usize) -> Result<Vec<CheckinRecord>> {
    if min_count > max_count {
        return Err(data(format!("activity bounds {min_count} > {max_count}")));
    }
    let counts = record_counts(records);
    Ok(records
        .iter()
        .filter(|r| (min_count..=max_count).contains(&counts[r.user.as_str()]))
        .cloned()
        .collect())
}

pub fn users(records: &[CheckinRecord]) -> BTreeSet<String> {
    records.iter().map(|r| r.user.clone()).collect()
}

pub fn restrict_to(records: &[CheckinRecord], keep: &BTreeSet<String>) -> Vec<CheckinRecord> {
    records.iter().filter(|r| keep.contains(&r.user)).cloned().collect()
}

/// Largest connected component of the friendship graph induced on `users`.
/// Among equally large components the one holding the lexicographically
/// smallest user wins.
pub fn lcc_restrict(edges: &FriendEdgeList, users: &BTreeSet<String>) -> BTreeSet<String> {
    let mut adj: BTreeMap<&str, Vec<&str>> = users.iter().map(|u| (u.as_str(), Vec::new())).collect();
    for (a, b) in edges.pairs() {
        if users.contains(a) && users.contains(b) {
            adj.get_mut(a).expect("member").push(b);
            adj.get_mut(b).expect("member").push(a);
        }
    }
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    let mut best: BTreeSet<&str> = BTreeSet::new();
    // users are visited in sorted order, so the first component of a given
    // size holds the smallest member among its equals
    for &start in adj.keys() {
        if seen.contains(start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start];
        seen.insert(start);
        while let Some(u) = stack.pop() {
            comp.insert(u);
            for &v in &adj[u] {
                if seen.insert(v) {
                    stack.push(v);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.into_iter().map(str::to_owned).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EgoNetwork {
    pub users: BTreeSet<String>,
    pub edges: FriendEdgeList,
}

/// The center, its friends and every friendship among them.
pub fn ego_network(edges: &FriendEdgeList, center: &str) -> Result<EgoNetwork> {
    let adj = edges.adjacency();
    let Some(friends) = adj.get(center) else {
        return Err(data(format!("unknown ego center `{center}`")));
    };
    let mut users: BTreeSet<String> = friends.iter().map(|s| (*s).to_owned()).collect();
    users.insert(center.to_owned());
    let induced = edges.pairs().filter(|(a, b)| users.contains(*a) && users.contains(*b));
    Ok(EgoNetwork { edges: FriendEdgeList::new(induced), users })
}

/// Like [`ego_network`] but also accepts a center with no friendships,
/// provided it is among `known`.
pub fn ego_network_among(edges: &FriendEdgeList, center: &str, known: &BTreeSet<String>) -> Result<EgoNetwork> {
    match ego_network(edges, center) {
        Ok(e) => Ok(e),
        Err(_) if known.contains(center) => {
            Ok(EgoNetwork { users: BTreeSet::from([center.to_owned()]), edges: FriendEdgeList::default() })
        }
        Err(e) => Err(e),
    }
}

/// User with the most friends among `users`; ties go to the smallest id.
pub fn most_connected(edges: &FriendEdgeList, users: &BTreeSet<String>) -> Option<(String, usize)> {
    let mut deg: BTreeMap<&str, usize> = users.iter().map(|u| (u.as_str(), 0)).collect();
    for (a, b) in edges.pairs() {
        if users.contains(a) && users.contains(b) {
            *deg.get_mut(a).expect("member") += 1;
            *deg.get_mut(b).expect("member") += 1;
        }
    }
    let mut best: Option<(&str, usize)> = None;
    for (u, d) in deg {
        if best.is_none_or(|(_, bd)| d > bd) {
            best = Some((u, d));
        }
    }
    best.map(|(u, d)| (u.to_owned(), d))
}

/// Local equirectangular projection about `(lat0, lon0)`, in kilometres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equirectangular {
    pub lat0: f64,
    pub lon0: f64,
}

impl Equirectangular {
    /// Centred on the midpoint of the records' bounding box.
    pub fn centred(records: &[CheckinRecord]) -> Self {
        let (mut la0, mut la1, mut lo0, mut lo1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for r in records {
            la0 = la0.min(r.lat);
            la1 = la1.max(r.lat);
            lo0 = lo0.min(r.lon);
            lo1 = lo1.max(r.lon);
        }
        if records.is_empty() {
            return Self { lat0: 0.0, lon0: 0.0 };
        }
        Self { lat0: 0.5 * (la0 + la1), lon0: 0.5 * (lo0 + lo1) }
    }

    pub fn project(&self, lat: f64, lon: f64) -> (f64, f64) {
        let k = EARTH_RADIUS_KM * std::f64::consts::PI / 180.0;
        ((lon - self.lon0) * self.lat0.to_radians().cos() * k, (lat - self.lat0) * k)
    }
}

#[derive(Debug, Clone)]
pub struct IngestedCatalog {
    pub catalog: EventCatalog,
    /// User id of every node index.
    pub users: Vec<String>,
    pub projection: Equirectangular,
    pub time_origin: i64,
}

/// Times in days since `time_origin` (default: the earliest record),
/// positions projected about the bounding-box centre, users indexed in
/// [`dense_ids`] order. The horizon defaults to the last event time (one day
/// if every record shares a single instant).
pub fn to_catalog(
    records: &[CheckinRecord],
    time_origin: Option<i64>,
    horizon_days: Option<f64>,
    projection: Option<Equirectangular>,
) -> Result<IngestedCatalog> {
    if records.is_empty() {
        return Err(data("no check-ins left to convert"));
    }
    if records.len() > MAX_EVENTS {
        return Err(data(format!("{} check-ins exceed the limit of {MAX_EVENTS} events per fit", records.len())));
    }
    let origin = time_origin.unwrap_or_else(|| records.iter().map(|r| r.timestamp).min().expect("nonempty"));
    let proj = projection.unwrap_or_else(|| Equirectangular::centred(records));
    let users = dense_ids(records.iter().map(|r| r.user.as_str()));
    let index: HashMap<&str, usize> = users.iter().enumerate().map(|(k, u)| (u.as_str(), k)).collect();
    let mut events = Vec::with_capacity(records.len());
    for r in records {
        if r.timestamp < origin {
            return Err(data(format!("check-in at {} precedes the time origin {origin}", r.timestamp)));
        }
        let (x, y) = proj.project(r.lat, r.lon);
        events.push(Event::new(index[r.user.as_str()], (r.timestamp - origin) as f64 / 86_400.0, x, y));
    }
    let last = events.iter().map(|e| e.t).fold(0.0, f64::max);
    let horizon = horizon_days.unwrap_or(if last > 0.0 { last } else { 1.0 });
    let region = Region::bounding(&events);
    let catalog = EventCatalog::new(events, horizon, region, users.len())?;
    Ok(IngestedCatalog { catalog, users, projection: proj, time_origin: origin })
}

/// North, south, east and west bounds in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub north: f64,
    pub south: f64,
    pub east: f64,
    pub west: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Restriction {
    /// Largest connected component of the friendship graph.
    Lcc,
    /// 1-ego network of the user with the most friends.
    EgoOfMostConnected,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub bbox: BoundingBox,
    /// `[start, end)` in seconds since the epoch.
    pub window: (i64, i64),
    pub activity: Option<(usize, usize)>,
    pub restriction: Restriction,
}

fn april_to_october_2010() -> (i64, i64) {
    (date_timestamp(2010, 4, 1).expect("valid date"), date_timestamp(2010, 11, 1).expect("valid date"))
}

pub fn preset(name: &str) -> Option<Preset> {
    let window = april_to_october_2010();
    let p = match name {
        "nyc" => Preset {
            name: "nyc",
            bbox: BoundingBox { north: 40.92, south: 40.48, east: -73.70, west: -74.26 },
            window,
            activity: Some((100, 500)),
            restriction: Restriction::Lcc,
        },
        "la" => Preset {
            name: "la",
            bbox: BoundingBox { north: 34.34, south: 33.70, east: -118.16, west: -118.67 },
            window,
            activity: Some((150, 1000)),
            restriction: Restriction::Lcc,
        },
        "sf" => Preset {
            name: "sf",
            bbox: BoundingBox { north: 37.93, south: 37.64, east: -122.28, west: -123.17 },
            window,
            activity: None,
            restriction: Restriction::EgoOfMostConnected,
        },
        _ => return None,
    };
    Some(p)
}

/// Record and user counts after each pipeline stage.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Stage {
    pub stage: String,
    pub users: usize,
    pub records: usize,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub records: Vec<CheckinRecord>,
    pub stages: Vec<Stage>,
    /// Ego of an ego-network restriction.
    pub center: Option<(String, usize)>,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineSpec {
    pub bbox: Option<BoundingBox>,
    pub window: Option<(i64, i64)>,
    pub activity: Option<(usize, usize)>,
    pub restriction: Option<Restriction>,
    /// Explicit ego center; overrides the restriction.
    pub ego: Option<String>,
}

impl From<Preset> for PipelineSpec {
    fn from(p: Preset) -> Self {
        Self {
            bbox: Some(p.bbox),
            window: Some(p.window),
            activity: p.activity,
            restriction: Some(p.restriction),
            ego: None,
        }
    }
}

/// Window, bounding box, activity filter, then the friendship restriction.
pub fn run_pipeline(records: &[CheckinRecord], friends: Option<&FriendEdgeList>, spec: &PipelineSpec) -> Result<PipelineOutput> {
    let mut stages = Vec::new();
    let note = |stages: &mut Vec<Stage>, name: &str, r: &[CheckinRecord]| {
        stages.push(Stage { stage: name.to_owned(), users: users(r).len(), records: r.len() });
    };
    note(&mut stages, "input", records);
    let mut cur = records.to_vec();
    if let Some((start, end)) = spec.window {
        cur = time_filter(&cur, start, end)?;
        note(&mut stages, "time window", &cur);
    }
    if let Some(b) = spec.bbox {
        cur = bbox_filter(&cur, b.north, b.south, b.east, b.west)?;
        note(&mut stages, "bounding box", &cur);
    }
    if let Some((lo, hi)) = spec.activity {
        cur = activity_filter(&cur, lo, hi)?;
        note(&mut stages, "activity", &cur);
    }
    let needs_friends = spec.ego.is_some() || spec.restriction.is_some();
    let mut center = None;
    if needs_friends {
        let friends = friends.ok_or_else(|| data("a friendship file is required for LCC or ego restriction"))?;
        let present = users(&cur);
        let keep = match (&spec.ego, spec.restriction) {
            (Some(c), _) => {
                center = Some((c.clone(), friends.degrees().get(c.as_str()).copied().unwrap_or(0)));
                ego_network_among(friends, c, &present)?.users
            }
            (None, Some(Restriction::Lcc)) => lcc_restrict(friends, &present),
            (None, Some(Restriction::EgoOfMostConnected)) => {
                let (c, d) = most_connected(friends, &present).ok_or_else(|| data("no users left for an ego network"))?;
                let ego = ego_network_among(friends, &c, &present)?;
                center = Some((c, d));
                ego.users.intersection(&present).cloned().collect()
            }
            (None, None) => unreachable!("checked above"),
        };
        cur = restrict_to(&cur, &keep);
        let name = if spec.ego.is_some() || spec.restriction == Some(Restriction::EgoOfMostConnected) { "ego network" } else { "lcc" };
        note(&mut stages, name, &cur);
    }
    Ok(PipelineOutput { records: cur, stages, center })
}
