//! Canonical dataset types and the three CSV formats they travel in.
//!
//! * snapshots: `date,source_id,target_id,position,list_kind`
//! * views: `video_id,date,views`
//! * metadata: `video_id,artist_id,upload_date,genres` (genres `|`-joined)
//!
//! Parsing is strict: a malformed row, a gap in the dates or a negative
//! view count is an error. Nothing is imputed.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SNAPSHOTS_HEADER: [&str; 5] = ["date", "source_id", "target_id", "position", "list_kind"];
pub const VIEWS_HEADER: [&str; 3] = ["video_id", "date", "views"];
pub const METADATA_HEADER: [&str; 4] = ["video_id", "artist_id", "upload_date", "genres"];

pub const SNAPSHOTS_FILE: &str = "snapshots.csv";
pub const VIEWS_FILE: &str = "views.csv";
pub const METADATA_FILE: &str = "metadata.csv";

/// Opaque video identifier: non-empty, no whitespace.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VideoId(String);

impl VideoId {
    pub fn new(token: impl Into<String>) -> Result<Self> {
        let token = token.into();
        if token.is_empty() {
            return Err(Error::data("empty video id"));
        }
        if token.chars().any(char::is_whitespace) {
            return Err(Error::data(format!("video id {token:?} contains whitespace")));
        }
        Ok(VideoId(token))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VideoId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for VideoId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        VideoId::new(s)
    }
}

impl TryFrom<String> for VideoId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        VideoId::new(s)
    }
}

impl From<VideoId> for String {
    fn from(id: VideoId) -> String {
        id.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListKind {
    Relevant,
    Recommended,
}

impl ListKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ListKind::Relevant => "relevant",
            ListKind::Recommended => "recommended",
        }
    }
}

impl FromStr for ListKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relevant" => Ok(ListKind::Relevant),
            "recommended" => Ok(ListKind::Recommended),
            other => Err(Error::data(format!("unknown list kind {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ListEntry {
    pub target: VideoId,
    pub position: u32,
}

/// A ranked list of targets shown for one source on one day.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedList {
    source: VideoId,
    kind: ListKind,
    entries: Vec<ListEntry>,
}

impl RankedList {
    /// Builds a list, sorting entries by position and rejecting duplicate
    /// positions, duplicate targets, non-positive positions and self-loops.
    pub fn new(source: VideoId, kind: ListKind, mut entries: Vec<ListEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.position);
        let mut seen = BTreeSet::new();
        for (i, e) in entries.iter().enumerate() {
            if e.position == 0 {
                return Err(Error::data(format!("{source}: position must be >= 1")));
            }
            if e.target == source {
                return Err(Error::data(format!("{source}: self-loop in {} list", kind.as_str())));
            }
            if i > 0 && entries[i - 1].position == e.position {
                return Err(Error::data(format!(
                    "{source}: duplicate position {} in {} list",
                    e.position,
                    kind.as_str()
                )));
            }
            if !seen.insert(&e.target) {
                return Err(Error::data(format!(
                    "{source}: target {} listed twice in {} list",
                    e.target,
                    kind.as_str()
                )));
            }
        }
        Ok(RankedList { source, kind, entries })
    }

    pub fn source(&self) -> &VideoId {
        &self.source
    }

    pub fn kind(&self) -> ListKind {
        self.kind
    }

    pub fn entries(&self) -> &[ListEntry] {
        &self.entries
    }

    pub fn position_of(&self, target: &VideoId) -> Option<u32> {
        self.entries.iter().find(|e| &e.target == target).map(|e| e.position)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DailySnapshot {
    date: NaiveDate,
    relevant: BTreeMap<VideoId, RankedList>,
    recommended: BTreeMap<VideoId, RankedList>,
}

impl DailySnapshot {
    pub fn new(date: NaiveDate) -> Self {
        DailySnapshot { date, relevant: BTreeMap::new(), recommended: BTreeMap::new() }
    }

    pub fn date(&self) -> NaiveDate {
        self.date
    }

    /// Inserts a list; a second list for the same source and kind is an error.
    pub fn insert(&mut self, list: RankedList) -> Result<()> {
        let map = match list.kind {
            ListKind::Relevant => &mut self.relevant,
            ListKind::Recommended => &mut self.recommended,
        };
        if map.contains_key(&list.source) {
            return Err(Error::data(format!(
                "{}: two {} lists for one day",
                list.source,
                list.kind.as_str()
            )));
        }
        map.insert(list.source.clone(), list);
        Ok(())
    }

    pub fn lists(&self, kind: ListKind) -> &BTreeMap<VideoId, RankedList> {
        match kind {
            ListKind::Relevant => &self.relevant,
            ListKind::Recommended => &self.recommended,
        }
    }

    pub fn row_count(&self) -> usize {
        self.relevant.values().chain(self.recommended.values()).map(|l| l.entries.len()).sum()
    }
}

/// Consecutive run of calendar days.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationWindow {
    pub start: NaiveDate,
    pub len: usize,
}

impl ObservationWindow {
    pub fn date(&self, index: usize) -> NaiveDate {
        self.start + chrono::Days::new(index as u64)
    }

    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        let offset = (date - self.start).num_days();
        (offset >= 0 && (offset as usize) < self.len).then_some(offset as usize)
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len).map(|i| self.date(i))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DynamicNetwork {
    window: ObservationWindow,
    snapshots: Vec<DailySnapshot>,
}

impl DynamicNetwork {
    /// Requires at least one snapshot and strictly consecutive dates.
    pub fn new(mut snapshots: Vec<DailySnapshot>) -> Result<Self> {
        snapshots.sort_by_key(|s| s.date());
        let first = snapshots
            .first()
            .ok_or_else(|| Error::data("dynamic network has no snapshots"))?
            .date();
        for (i, s) in snapshots.iter().enumerate() {
            let expected = first + chrono::Days::new(i as u64);
            if s.date() != expected {
                return Err(Error::data(format!(
                    "snapshot dates not consecutive: expected {expected}, found {}",
                    s.date()
                )));
            }
        }
        let window = ObservationWindow { start: first, len: snapshots.len() };
        Ok(DynamicNetwork { window, snapshots })
    }

    pub fn window(&self) -> ObservationWindow {
        self.window
    }

    pub fn snapshots(&self) -> &[DailySnapshot] {
        &self.snapshots
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewSeries {
    pub id: VideoId,
    pub start_date: NaiveDate,
    pub values: Vec<u64>,
}

impl ViewSeries {
    pub fn end_date(&self) -> NaiveDate {
        self.start_date + chrono::Days::new(self.values.len() as u64 - 1)
    }

    /// Values restricted to `window`, or `None` if the series does not cover it.
    pub fn slice(&self, window: &ObservationWindow) -> Option<&[u64]> {
        let offset = (window.start - self.start_date).num_days();
        if offset < 0 {
            return None;
        }
        let offset = offset as usize;
        self.values.get(offset..offset + window.len)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub id: VideoId,
    pub artist_id: String,
    pub genres: BTreeSet<String>,
    pub upload_date: NaiveDate,
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| Error::data(format!("bad date {s:?}: {e}")))
}

fn check_header(record: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = record.iter().collect();
    if found != expected {
        return Err(Error::parse(1, format!("expected header {:?}, found {:?}", expected.join(","), found.join(","))));
    }
    Ok(())
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(input)
}

fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

fn with_line<T>(line: u64, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Data(msg) => Error::parse(line, msg),
        other => other,
    })
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::parse(line, e.to_string())
}

/// Parses the snapshot CSV into a validated [`DynamicNetwork`].
pub fn parse_snapshots<R: Read>(input: R) -> Result<DynamicNetwork> {
    let mut rdr = reader(input);
    check_header(rdr.headers().map_err(csv_error)?, &SNAPSHOTS_HEADER)?;

    type Key = (NaiveDate, VideoId, ListKind);
    let mut groups: BTreeMap<Key, Vec<(ListEntry, u64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let row = with_line(line, (|| {
            let date = parse_date(&record[0])?;
            let source = VideoId::new(&record[1])?;
            let target = VideoId::new(&record[2])?;
            let position: i64 = record[3]
                .trim()
                .parse()
                .map_err(|_| Error::data(format!("bad position {:?}", &record[3])))?;
            if position <= 0 {
                return Err(Error::data(format!("position must be >= 1, got {position}")));
            }
            let position = u32::try_from(position).map_err(|_| Error::data("position out of range"))?;
            if source == target {
                return Err(Error::data(format!("self-loop on {source}")));
            }
            let kind: ListKind = record[4].parse()?;
            Ok((date, source, target, position, kind))
        })())?;
        let (date, source, target, position, kind) = row;
        groups.entry((date, source, kind)).or_default().push((ListEntry { target, position }, line));
    }

    let mut days: BTreeMap<NaiveDate, DailySnapshot> = BTreeMap::new();
    for ((date, source, kind), mut rows) in groups {
        rows.sort_by_key(|(e, _)| e.position);
        for pair in rows.windows(2) {
            if pair[0].0.position == pair[1].0.position {
                return Err(Error::parse(
                    pair[1].1,
                    format!("duplicate position {} for ({date}, {source}, {})", pair[1].0.position, kind.as_str()),
                ));
            }
        }
        let first_line = rows[0].1;
        let entries = rows.into_iter().map(|(e, _)| e).collect();
        let list = with_line(first_line, RankedList::new(source, kind, entries))?;
        days.entry(date).or_insert_with(|| DailySnapshot::new(date)).insert(list)?;
    }
    DynamicNetwork::new(days.into_values().collect())
}

/// Writes the canonical form: sorted by date, source, list kind, position.
pub fn write_snapshots<W: Write>(net: &DynamicNetwork, output: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(output);
    wtr.write_record(SNAPSHOTS_HEADER)?;
    for snap in net.snapshots() {
        let date = snap.date().to_string();
        let mut lists: Vec<&RankedList> = snap.relevant.values().chain(snap.recommended.values()).collect();
        lists.sort_by(|a, b| (&a.source, a.kind).cmp(&(&b.source, b.kind)));
        for list in lists {
            for e in &list.entries {
                wtr.write_record([
                    date.as_str(),
                    list.source.as_str(),
                    e.target.as_str(),
                    &e.position.to_string(),
                    list.kind.as_str(),
                ])?;
            }
        }
    }
    wtr.flush().map_err(|e| Error::io("<snapshots>", e))?;
    Ok(())
}

/// Parses the views CSV. Each id must have contiguous, non-duplicated dates.
pub fn parse_views<R: Read>(input: R) -> Result<Vec<ViewSeries>> {
    let mut rdr = reader(input);
    check_header(rdr.headers().map_err(csv_error)?, &VIEWS_HEADER)?;
    let mut rows: BTreeMap<VideoId, Vec<(NaiveDate, u64, u64)>> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let (id, date, views) = with_line(line, (|| {
            let id = VideoId::new(&record[0])?;
            let date = parse_date(&record[1])?;
            let raw = record[2].trim();
            let views: i64 = raw.parse().map_err(|_| Error::data(format!("bad view count {raw:?}")))?;
            if views < 0 {
                return Err(Error::data(format!("negative view count {views} for {id}")));
            }
            Ok((id, date, views as u64))
        })())?;
        rows.entry(id).or_default().push((date, views, line));
    }

    let mut out = Vec::with_capacity(rows.len());
    for (id, mut days) in rows {
        days.sort_by_key(|d| d.0);
        for pair in days.windows(2) {
            let gap = (pair[1].0 - pair[0].0).num_days();
            if gap == 0 {
                return Err(Error::parse(pair[1].2, format!("duplicate date {} for {id}", pair[1].0)));
            }
            if gap != 1 {
                return Err(Error::parse(
                    pair[1].2,
                    format!("gap in views for {id} between {} and {}", pair[0].0, pair[1].0),
                ));
            }
        }
        let start_date = days[0].0;
        out.push(ViewSeries { id, start_date, values: days.into_iter().map(|d| d.1).collect() });
    }
    Ok(out)
}

pub fn write_views<W: Write>(series: &[ViewSeries], output: W) -> Result<()> {
    let mut sorted: Vec<&ViewSeries> = series.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut wtr = csv::Writer::from_writer(output);
    wtr.write_record(VIEWS_HEADER)?;
    for s in sorted {
        for (i, v) in s.values.iter().enumerate() {
            let date = s.start_date + chrono::Days::new(i as u64);
            wtr.write_record([s.id.as_str(), &date.to_string(), &v.to_string()])?;
        }
    }
    wtr.flush().map_err(|e| Error::io("<views>", e))?;
    Ok(())
}

pub fn parse_metadata<R: Read>(input: R) -> Result<Vec<VideoMeta>> {
    let mut rdr = reader(input);
    check_header(rdr.headers().map_err(csv_error)?, &METADATA_HEADER)?;
    let mut out: BTreeMap<VideoId, VideoMeta> = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(csv_error)?;
        let line = line_of(&record);
        let meta = with_line(line, (|| {
            let id = VideoId::new(&record[0])?;
            let artist_id = record[1].to_string();
            if artist_id.is_empty() {
                return Err(Error::data(format!("empty artist id for {id}")));
            }
            let upload_date = parse_date(&record[2])?;
            let genres = record[3].split('|').filter(|g| !g.is_empty()).map(str::to_string).collect();
            Ok(VideoMeta { id, artist_id, genres, upload_date })
        })())?;
        if out.contains_key(&meta.id) {
            return Err(Error::parse(line, format!("duplicate metadata for {}", meta.id)));
        }
        out.insert(meta.id.clone(), meta);
    }
    Ok(out.into_values().collect())
}

pub fn write_metadata<W: Write>(metadata: &[VideoMeta], output: W) -> Result<()> {
    let mut sorted: Vec<&VideoMeta> = metadata.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let mut wtr = csv::Writer::from_writer(output);
    wtr.write_record(METADATA_HEADER)?;
    for m in sorted {
        let genres = m.genres.iter().map(String::as_str).collect::<Vec<_>>().join("|");
        wtr.write_record([m.id.as_str(), &m.artist_id, &m.upload_date.to_string(), &genres])?;
    }
    wtr.flush().map_err(|e| Error::io("<metadata>", e))?;
    Ok(())
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub videos: usize,
    pub artists: usize,
    pub days: usize,
    pub external_targets: usize,
    /// Mean number of in-corpus relevant-list entries per day.
    pub edges_per_day: f64,
    pub warnings: Vec<String>,
}

/// Validated, immutable dataset. View series are stored aligned to the
/// network's observation window.
#[derive(Clone, Debug)]
pub struct Dataset {
    metadata: BTreeMap<VideoId, VideoMeta>,
    views: BTreeMap<VideoId, Vec<u64>>,
    network: DynamicNetwork,
    corpus: BTreeSet<VideoId>,
    external: BTreeSet<VideoId>,
    summary: DatasetSummary,
}

/// Cross-checks the three inputs. The corpus is the set of ids with
/// metadata; ids referenced only by snapshots are flagged external.
pub fn validate_dataset(metadata: Vec<VideoMeta>, views: Vec<ViewSeries>, network: DynamicNetwork) -> Result<Dataset> {
    let window = network.window();
    let metadata: BTreeMap<VideoId, VideoMeta> = metadata.into_iter().map(|m| (m.id.clone(), m)).collect();
    let corpus: BTreeSet<VideoId> = metadata.keys().cloned().collect();
    let mut warnings = Vec::new();

    let mut series: BTreeMap<VideoId, ViewSeries> = BTreeMap::new();
    for s in views {
        if s.values.is_empty() {
            return Err(Error::data(format!("empty view series for {}", s.id)));
        }
        if series.contains_key(&s.id) {
            return Err(Error::data(format!("duplicate view series for {}", s.id)));
        }
        series.insert(s.id.clone(), s);
    }

    let mut aligned = BTreeMap::new();
    for id in &corpus {
        let s = series
            .get(id)
            .ok_or_else(|| Error::data(format!("in-corpus video {id} has no view series")))?;
        let values = s.slice(&window).ok_or_else(|| {
            Error::data(format!(
                "view series for {id} ({}..{}) does not cover window {}..{}",
                s.start_date,
                s.end_date(),
                window.start,
                window.date(window.len - 1)
            ))
        })?;
        if metadata[id].upload_date > s.start_date {
            warnings.push(format!("{id}: upload date {} after first observation {}", metadata[id].upload_date, s.start_date));
        }
        aligned.insert(id.clone(), values.to_vec());
    }
    let orphans = series.keys().filter(|id| !corpus.contains(*id)).count();
    if orphans > 0 {
        warnings.push(format!("{orphans} view series without metadata ignored"));
    }

    let mut external = BTreeSet::new();
    let mut in_corpus_edges = 0usize;
    for snap in network.snapshots() {
        for list in snap.relevant.values().chain(snap.recommended.values()) {
            if !corpus.contains(&list.source) {
                external.insert(list.source.clone());
            }
            for e in &list.entries {
                if !corpus.contains(&e.target) {
                    external.insert(e.target.clone());
                } else if list.kind == ListKind::Relevant && corpus.contains(&list.source) {
                    in_corpus_edges += 1;
                }
            }
        }
    }

    let artists: BTreeSet<&str> = metadata.values().map(|m| m.artist_id.as_str()).collect();
    let summary = DatasetSummary {
        videos: corpus.len(),
        artists: artists.len(),
        days: window.len,
        external_targets: external.len(),
        edges_per_day: in_corpus_edges as f64 / window.len as f64,
        warnings,
    };
    Ok(Dataset { metadata, views: aligned, network, corpus, external, summary })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

impl Dataset {
    /// Loads `snapshots.csv`, `views.csv` and `metadata.csv` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Dataset> {
        let network = parse_snapshots(open(&dir.join(SNAPSHOTS_FILE))?)?;
        let views = parse_views(open(&dir.join(VIEWS_FILE))?)?;
        let metadata = parse_metadata(open(&dir.join(METADATA_FILE))?)?;
        validate_dataset(metadata, views, network)
    }

    pub fn network(&self) -> &DynamicNetwork {
        &self.network
    }

    pub fn window(&self) -> ObservationWindow {
        self.network.window()
    }

    pub fn corpus(&self) -> &BTreeSet<VideoId> {
        &self.corpus
    }

    pub fn external(&self) -> &BTreeSet<VideoId> {
        &self.external
    }

    pub fn summary(&self) -> &DatasetSummary {
        &self.summary
    }

    pub fn metadata(&self) -> &BTreeMap<VideoId, VideoMeta> {
        &self.metadata
    }

    pub fn meta(&self, id: &VideoId) -> Option<&VideoMeta> {
        self.metadata.get(id)
    }

    /// Window-aligned daily views of an in-corpus video.
    pub fn views(&self, id: &VideoId) -> Option<&[u64]> {
        self.views.get(id).map(Vec::as_slice)
    }

    pub fn all_views(&self) -> &BTreeMap<VideoId, Vec<u64>> {
        &self.views
    }

    pub fn mean_views(&self, id: &VideoId) -> Option<f64> {
        self.views(id).map(|v| v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64)
    }
}
