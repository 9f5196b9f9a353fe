//! Tracking, event and roster ingestion, and per-shot sample assembly.
//!
//! File formats:
//!
//! * `tracking.jsonl`: one frame per line,
//!   `{"game_id", "t", "ball": [x, y, z], "players": [{"id", "team", "x", "y"}, ...]}`
//!   in court feet and seconds. In-play frames carry exactly 10 players.
//! * tracking CSV: `game_id,t,ball_x,ball_y,ball_z` followed by
//!   `p{i}_id,p{i}_team,p{i}_x,p{i}_y` for `i = 1..=10` (empty cells for
//!   frames without players).
//! * `events.csv`: `shot_id,game_id,shooter_id,release_frame,outcome,hoop_end`.
//!   `release_frame` indexes the game's time-sorted frames.
//! * `roster.csv`: `player_id,height_in,position`.
//!
//! Per-row problems (unparseable lines, bad player counts, duplicate
//! timestamps) are counted in a [`LoadReport`]; structural problems such as
//! missing columns or timestamps running backwards abort the load.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    court_xy_to_local, to_local_frame, CourtGeometry, GameId, GeometryError, HoopEnd, PlayerId, Xy,
    Xyz,
};
use crate::trajectory::RejectReason;

pub const PLAYERS_IN_PLAY: usize = 10;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("game {game}: timestamp {t} at line {line} runs backwards (previous {prev})")]
    NonMonotone { game: String, line: usize, t: f64, prev: f64 },
    #[error("game {0} is not contiguous in the tracking stream")]
    NonContiguousGame(String),
    #[error("shot {shot_id}: release frame {index} out of range ({len} frames)")]
    ReleaseOutOfRange { shot_id: String, index: usize, len: usize },
    #[error("shot {0}: game has no tracking frames")]
    UnknownGame(String),
    #[error("shooter {0} is not on the floor in the release frame")]
    ShooterNotOnCourt(String),
    #[error("no opposing players in the release frame")]
    NoOpponents,
    #[error("defender is co-located with the shooter; contest angle undefined")]
    DefenderCoLocated,
    #[error("shooter is co-located with the rim")]
    ShooterAtRim,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackingFormat {
    Jsonl,
    Csv,
}

impl std::str::FromStr for TrackingFormat {
    type Err = IngestError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(TrackingFormat::Jsonl),
            "csv" => Ok(TrackingFormat::Csv),
            other => Err(IngestError::Schema(format!("unknown tracking format {other:?}"))),
        }
    }
}

impl TrackingFormat {
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => TrackingFormat::Csv,
            _ => TrackingFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlayerPosition {
    pub id: PlayerId,
    pub team: String,
    pub xy: Xy,
}

/// One 25 Hz snapshot, court coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackingFrame {
    pub game_id: GameId,
    pub t: f64,
    pub ball: Xyz,
    pub players: Vec<PlayerPosition>,
}

impl TrackingFrame {
    pub fn player(&self, id: &PlayerId) -> Option<&PlayerPosition> {
        self.players.iter().find(|p| &p.id == id)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct PlayerRecord {
    pub id: String,
    pub team: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct FrameRecord {
    pub game_id: String,
    pub t: f64,
    pub ball: [f64; 3],
    pub players: Vec<PlayerRecord>,
}

impl From<&TrackingFrame> for FrameRecord {
    fn from(f: &TrackingFrame) -> Self {
        FrameRecord {
            game_id: f.game_id.to_string(),
            t: f.t,
            ball: [f.ball.x, f.ball.y, f.ball.z],
            players: f
                .players
                .iter()
                .map(|p| PlayerRecord { id: p.id.to_string(), team: p.team.clone(), x: p.xy.x, y: p.xy.y })
                .collect(),
        }
    }
}

fn frame_from_record(r: FrameRecord) -> Result<TrackingFrame, String> {
    let game_id = GameId::new(r.game_id).map_err(|e| e.to_string())?;
    let finite = r.t.is_finite() && r.ball.iter().all(|v| v.is_finite());
    if !finite {
        return Err("non-finite time or ball coordinate".into());
    }
    if !(r.players.is_empty() || r.players.len() == PLAYERS_IN_PLAY) {
        return Err(format!("expected 0 or {PLAYERS_IN_PLAY} players, found {}", r.players.len()));
    }
    let mut players = Vec::with_capacity(r.players.len());
    for p in r.players {
        if !(p.x.is_finite() && p.y.is_finite()) {
            return Err("non-finite player coordinate".into());
        }
        let id = PlayerId::new(p.id).map_err(|e| e.to_string())?;
        players.push(PlayerPosition { id, team: p.team, xy: Xy::new(p.x, p.y) });
    }
    Ok(TrackingFrame { game_id, t: r.t, ball: Xyz::new(r.ball[0], r.ball[1], r.ball[2]), players })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowRejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: usize,
    pub accepted: usize,
    pub rejected: Vec<RowRejection>,
}

impl LoadReport {
    pub fn rejected_count(&self) -> usize {
        self.rejected.len()
    }

    fn reject(&mut self, line: usize, reason: impl Into<String>) {
        self.rejected.push(RowRejection { line, reason: reason.into() });
    }

    pub fn merge(&mut self, other: LoadReport) {
        self.rows += other.rows;
        self.accepted += other.accepted;
        self.rejected.extend(other.rejected);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LoadOptions {
    /// Timestamps within this many seconds of the previous frame are treated
    /// as duplicates and rejected; larger backward steps abort the load.
    pub timestamp_tolerance: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { timestamp_tolerance: 1e-6 }
    }
}

/// Frames grouped by game, time-sorted.
#[derive(Debug, Clone, Default)]
pub struct TrackingData {
    pub games: BTreeMap<GameId, Vec<TrackingFrame>>,
    pub report: LoadReport,
}

impl TrackingData {
    pub fn frame_count(&self) -> usize {
        self.games.values().map(Vec::len).sum()
    }
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

/// A line number and either the parsed frame or why it was rejected.
type NumberedRow = (usize, Result<TrackingFrame, String>);

/// Row source shared by the whole-file loader and the streaming reader.
enum RowSource {
    Jsonl { lines: std::io::Lines<BufReader<Box<dyn Read>>>, line_no: usize },
    Csv { reader: csv::Reader<Box<dyn Read>>, columns: CsvColumns, line_no: usize },
}

struct CsvColumns {
    game_id: usize,
    t: usize,
    ball: [usize; 3],
    players: Vec<[usize; 4]>,
}

impl CsvColumns {
    fn from_headers(h: &csv::StringRecord) -> Result<Self, IngestError> {
        let find = |name: &str| {
            h.iter()
                .position(|c| c.trim() == name)
                .ok_or_else(|| IngestError::Schema(format!("tracking csv is missing column {name:?}")))
        };
        let mut players = Vec::new();
        for i in 1..=PLAYERS_IN_PLAY {
            players.push([
                find(&format!("p{i}_id"))?,
                find(&format!("p{i}_team"))?,
                find(&format!("p{i}_x"))?,
                find(&format!("p{i}_y"))?,
            ]);
        }
        Ok(CsvColumns {
            game_id: find("game_id")?,
            t: find("t")?,
            ball: [find("ball_x")?, find("ball_y")?, find("ball_z")?],
            players,
        })
    }

    fn parse(&self, rec: &csv::StringRecord) -> Result<FrameRecord, String> {
        let get = |i: usize| rec.get(i).map(str::trim).unwrap_or("");
        let num = |i: usize| get(i).parse::<f64>().map_err(|_| format!("bad number {:?}", get(i)));
        let mut players = Vec::new();
        for cols in &self.players {
            if get(cols[0]).is_empty() {
                continue;
            }
            players.push(PlayerRecord {
                id: get(cols[0]).to_string(),
                team: get(cols[1]).to_string(),
                x: num(cols[2])?,
                y: num(cols[3])?,
            });
        }
        Ok(FrameRecord {
            game_id: get(self.game_id).to_string(),
            t: num(self.t)?,
            ball: [num(self.ball[0])?, num(self.ball[1])?, num(self.ball[2])?],
            players,
        })
    }
}

impl RowSource {
    fn new(reader: Box<dyn Read>, format: TrackingFormat) -> Result<Self, IngestError> {
        Ok(match format {
            TrackingFormat::Jsonl => RowSource::Jsonl { lines: BufReader::new(reader).lines(), line_no: 0 },
            TrackingFormat::Csv => {
                let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
                let columns = CsvColumns::from_headers(reader.headers()?)?;
                RowSource::Csv { reader, columns, line_no: 1 }
            }
        })
    }

    /// Next `(line number, parsed frame or rejection reason)`.
    fn next_row(&mut self) -> Option<Result<NumberedRow, IngestError>> {
        match self {
            RowSource::Jsonl { lines, line_no } => loop {
                let line = lines.next()?;
                *line_no += 1;
                let line = match line {
                    Ok(l) => l,
                    Err(e) => return Some(Err(IngestError::Io { path: "<tracking>".into(), source: e })),
                };
                if line.trim().is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<FrameRecord>(&line)
                    .map_err(|e| e.to_string())
                    .and_then(frame_from_record);
                return Some(Ok((*line_no, parsed)));
            },
            RowSource::Csv { reader, columns, line_no } => {
                let mut rec = csv::StringRecord::new();
                match reader.read_record(&mut rec) {
                    Ok(false) => None,
                    Ok(true) => {
                        *line_no += 1;
                        let parsed = columns.parse(&rec).and_then(frame_from_record);
                        Some(Ok((*line_no, parsed)))
                    }
                    Err(e) => {
                        *line_no += 1;
                        Some(Ok((*line_no, Err(e.to_string()))))
                    }
                }
            }
        }
    }
}

/// Appends a frame to a game, enforcing time order.
fn push_frame(
    frames: &mut Vec<TrackingFrame>,
    frame: TrackingFrame,
    line: usize,
    opts: &LoadOptions,
    report: &mut LoadReport,
) -> Result<(), IngestError> {
    if let Some(prev) = frames.last() {
        let dt = frame.t - prev.t;
        if dt < -opts.timestamp_tolerance {
            return Err(IngestError::NonMonotone {
                game: frame.game_id.to_string(),
                line,
                t: frame.t,
                prev: prev.t,
            });
        }
        if dt <= opts.timestamp_tolerance {
            report.reject(line, "duplicate timestamp");
            return Ok(());
        }
    }
    frames.push(frame);
    report.accepted += 1;
    Ok(())
}

/// Load a whole tracking file into memory.
pub fn load_tracking(path: &Path, format: TrackingFormat) -> Result<TrackingData, IngestError> {
    load_tracking_with(path, format, &LoadOptions::default())
}

pub fn load_tracking_with(
    path: &Path,
    format: TrackingFormat,
    opts: &LoadOptions,
) -> Result<TrackingData, IngestError> {
    read_tracking(Box::new(open(path)?), format, opts)
}

pub fn read_tracking(
    reader: Box<dyn Read>,
    format: TrackingFormat,
    opts: &LoadOptions,
) -> Result<TrackingData, IngestError> {
    let mut src = RowSource::new(reader, format)?;
    let mut data = TrackingData::default();
    while let Some(row) = src.next_row() {
        let (line, parsed) = row?;
        data.report.rows += 1;
        match parsed {
            Ok(frame) => {
                let frames = data.games.entry(frame.game_id.clone()).or_default();
                push_frame(frames, frame, line, opts, &mut data.report)?;
            }
            Err(reason) => data.report.reject(line, reason),
        }
    }
    Ok(data)
}

/// Streams games one at a time from a file whose frames are grouped by game.
///
/// Memory stays bounded by the largest game, which matters for full seasons.
pub struct GameStream {
    src: RowSource,
    opts: LoadOptions,
    pending: Option<(usize, TrackingFrame)>,
    seen: std::collections::HashSet<GameId>,
    report: LoadReport,
    done: bool,
}

impl GameStream {
    pub fn open(path: &Path, format: TrackingFormat, opts: LoadOptions) -> Result<Self, IngestError> {
        Self::from_reader(Box::new(open(path)?), format, opts)
    }

    pub fn from_reader(reader: Box<dyn Read>, format: TrackingFormat, opts: LoadOptions) -> Result<Self, IngestError> {
        Ok(Self {
            src: RowSource::new(reader, format)?,
            opts,
            pending: None,
            seen: Default::default(),
            report: LoadReport::default(),
            done: false,
        })
    }

    /// Row counts for everything read so far.
    pub fn report(&self) -> &LoadReport {
        &self.report
    }

    fn next_frame(&mut self) -> Result<Option<(usize, TrackingFrame)>, IngestError> {
        if let Some(p) = self.pending.take() {
            return Ok(Some(p));
        }
        while let Some(row) = self.src.next_row() {
            let (line, parsed) = row?;
            self.report.rows += 1;
            match parsed {
                Ok(frame) => return Ok(Some((line, frame))),
                Err(reason) => self.report.reject(line, reason),
            }
        }
        Ok(None)
    }

    fn next_game(&mut self) -> Result<Option<(GameId, Vec<TrackingFrame>)>, IngestError> {
        let Some((line, first)) = self.next_frame()? else {
            return Ok(None);
        };
        let game = first.game_id.clone();
        if !self.seen.insert(game.clone()) {
            return Err(IngestError::NonContiguousGame(game.to_string()));
        }
        let mut frames = Vec::new();
        push_frame(&mut frames, first, line, &self.opts, &mut self.report)?;
        while let Some((line, frame)) = self.next_frame()? {
            if frame.game_id != game {
                self.pending = Some((line, frame));
                break;
            }
            push_frame(&mut frames, frame, line, &self.opts, &mut self.report)?;
        }
        Ok(Some((game, frames)))
    }
}

impl Iterator for GameStream {
    type Item = Result<(GameId, Vec<TrackingFrame>), IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_game() {
            Ok(Some(g)) => Some(Ok(g)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Make,
    Miss,
}

impl Outcome {
    pub fn from_flag(made: bool) -> Self {
        if made {
            Outcome::Make
        } else {
            Outcome::Miss
        }
    }

    pub fn is_make(self) -> bool {
        self == Outcome::Make
    }

    pub fn as_f64(self) -> f64 {
        if self.is_make() {
            1.0
        } else {
            0.0
        }
    }
}

/// One row of `events.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EventTag {
    pub shot_id: String,
    pub game_id: GameId,
    pub shooter: PlayerId,
    pub release_frame: usize,
    pub outcome: Outcome,
    pub hoop_end: HoopEnd,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct EventRow {
    pub shot_id: String,
    pub game_id: String,
    pub shooter_id: String,
    pub release_frame: usize,
    pub outcome: u8,
    pub hoop_end: String,
}

impl From<&EventTag> for EventRow {
    fn from(e: &EventTag) -> Self {
        EventRow {
            shot_id: e.shot_id.clone(),
            game_id: e.game_id.to_string(),
            shooter_id: e.shooter.to_string(),
            release_frame: e.release_frame,
            outcome: u8::from(e.outcome.is_make()),
            hoop_end: e.hoop_end.to_string(),
        }
    }
}

impl TryFrom<EventRow> for EventTag {
    type Error = String;
    fn try_from(r: EventRow) -> Result<Self, String> {
        let outcome = match r.outcome {
            0 => Outcome::Miss,
            1 => Outcome::Make,
            other => return Err(format!("outcome must be 0 or 1, found {other}")),
        };
        if r.shot_id.trim().is_empty() {
            return Err("empty shot_id".into());
        }
        Ok(EventTag {
            shot_id: r.shot_id,
            game_id: GameId::new(r.game_id).map_err(|e| e.to_string())?,
            shooter: PlayerId::new(r.shooter_id).map_err(|e| e.to_string())?,
            release_frame: r.release_frame,
            outcome,
            hoop_end: r.hoop_end.parse().map_err(|e: GeometryError| e.to_string())?,
        })
    }
}

fn require_headers(reader: &mut csv::Reader<impl Read>, required: &[&str], what: &str) -> Result<(), IngestError> {
    let headers = reader.headers()?.clone();
    for col in required {
        if !headers.iter().any(|h| h.trim() == *col) {
            return Err(IngestError::Schema(format!("{what} is missing column {col:?}")));
        }
    }
    Ok(())
}

fn read_csv_rows<R, T, F>(reader: R, required: &[&str], what: &str, convert: F) -> Result<(Vec<T>, LoadReport), IngestError>
where
    R: Read,
    T: Sized,
    F: Fn(csv::StringRecord, &csv::StringRecord) -> Result<T, String>,
{
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    require_headers(&mut rdr, required, what)?;
    let headers = rdr.headers()?.clone();
    let mut out = Vec::new();
    let mut report = LoadReport::default();
    for (i, rec) in rdr.records().enumerate() {
        report.rows += 1;
        let line = i + 2;
        match rec.map_err(|e| e.to_string()).and_then(|r| convert(r, &headers)) {
            Ok(v) => {
                out.push(v);
                report.accepted += 1;
            }
            Err(reason) => report.reject(line, reason),
        }
    }
    Ok((out, report))
}

pub const EVENT_COLUMNS: [&str; 6] = ["shot_id", "game_id", "shooter_id", "release_frame", "outcome", "hoop_end"];
pub const ROSTER_COLUMNS: [&str; 3] = ["player_id", "height_in", "position"];

pub fn read_events(reader: impl Read) -> Result<(Vec<EventTag>, LoadReport), IngestError> {
    read_csv_rows(reader, &EVENT_COLUMNS, "events csv", |rec, headers| {
        let row: EventRow = rec.deserialize(Some(headers)).map_err(|e| e.to_string())?;
        EventTag::try_from(row)
    })
}

pub fn load_events(path: &Path) -> Result<(Vec<EventTag>, LoadReport), IngestError> {
    read_events(open(path)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RosterRecord {
    pub player: PlayerId,
    pub height_in: f64,
    pub position: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct RosterRow {
    pub player_id: String,
    pub height_in: f64,
    pub position: String,
}

pub const MIN_HEIGHT_IN: f64 = 60.0;
pub const MAX_HEIGHT_IN: f64 = 96.0;

/// Player heights and positions keyed by id.
#[derive(Debug, Clone, Default)]
pub struct Roster {
    pub players: BTreeMap<PlayerId, RosterRecord>,
}

impl Roster {
    pub fn from_records(records: impl IntoIterator<Item = RosterRecord>) -> Self {
        Roster { players: records.into_iter().map(|r| (r.player.clone(), r)).collect() }
    }

    pub fn height(&self, id: &PlayerId) -> Option<f64> {
        self.players.get(id).map(|r| r.height_in)
    }
}

pub fn read_roster(reader: impl Read) -> Result<(Roster, LoadReport), IngestError> {
    let (records, report) = read_csv_rows(reader, &ROSTER_COLUMNS, "roster csv", |rec, headers| {
        let row: RosterRow = rec.deserialize(Some(headers)).map_err(|e| e.to_string())?;
        if !(MIN_HEIGHT_IN..=MAX_HEIGHT_IN).contains(&row.height_in) {
            return Err(format!("height {} in outside [{MIN_HEIGHT_IN}, {MAX_HEIGHT_IN}]", row.height_in));
        }
        Ok(RosterRecord {
            player: PlayerId::new(row.player_id).map_err(|e| e.to_string())?,
            height_in: row.height_in,
            position: row.position,
        })
    })?;
    Ok((Roster::from_records(records), report))
}

pub fn load_roster(path: &Path) -> Result<(Roster, LoadReport), IngestError> {
    read_roster(open(path)?)
}

/// Closest opposing player to `shooter` in the release frame (planar
/// distance). Ties go to the lexicographically smaller id.
pub fn nearest_defender(
    frames: &[TrackingFrame],
    release_index: usize,
    shooter: &PlayerId,
) -> Result<(PlayerId, f64), IngestError> {
    let frame = frames.get(release_index).ok_or_else(|| IngestError::ReleaseOutOfRange {
        shot_id: String::new(),
        index: release_index,
        len: frames.len(),
    })?;
    let me = frame.player(shooter).ok_or_else(|| IngestError::ShooterNotOnCourt(shooter.to_string()))?;
    frame
        .players
        .iter()
        .filter(|p| p.team != me.team)
        .map(|p| (p, (p.xy - me.xy).norm()))
        .min_by(|(a, da), (b, db)| da.total_cmp(db).then_with(|| a.id.cmp(&b.id)))
        .map(|(p, d)| (p.id.clone(), d))
        .ok_or(IngestError::NoOpponents)
}

/// Signed angle in degrees, in (−180, 180], between the shooter→rim ray and
/// the shooter→defender ray. Positive when the defender is on the shooter's
/// right.
pub fn contest_angle(shooter_xy: Xy, defender_xy: Xy, rim_xy: Xy) -> Result<f64, IngestError> {
    let to_rim = rim_xy - shooter_xy;
    let to_def = defender_xy - shooter_xy;
    if to_rim.norm() == 0.0 {
        return Err(IngestError::ShooterAtRim);
    }
    if to_def.norm() == 0.0 {
        return Err(IngestError::DefenderCoLocated);
    }
    let cross = to_rim.x * to_def.y - to_rim.y * to_def.x;
    let dot = to_rim.dot(&to_def);
    // atan2 is counter-clockwise positive; clockwise is the shooter's right.
    let mut deg = -cross.atan2(dot).to_degrees();
    if deg <= -180.0 {
        deg += 360.0;
    }
    Ok(deg)
}

/// One assembled three-point attempt. Positions are in the rim-local frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotEvent {
    pub shot_id: String,
    pub game_id: GameId,
    pub shooter: PlayerId,
    pub defender: PlayerId,
    pub release_index: usize,
    pub hoop_end: HoopEnd,
    pub shooter_xy: Xy,
    pub defender_xy: Xy,
    /// Nearest defender distance at release, feet.
    pub ndd: f64,
    pub defender_height: f64,
    /// `None` when the defender stands exactly on the shooter.
    pub contest_angle: Option<f64>,
    pub outcome: Outcome,
    pub samples: Vec<Xyz>,
    pub sample_times: Vec<f64>,
    pub insufficient_samples: bool,
}

impl ShotEvent {
    /// Largest time step between consecutive samples.
    pub fn max_gap(&self) -> f64 {
        self.sample_times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub min_samples: usize,
    /// Hard cap on frames collected after release.
    pub max_flight_frames: usize,
    /// A time jump larger than this ends the sample window (next possession).
    pub break_gap: f64,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { min_samples: 5, max_flight_frames: 100, break_gap: 1.0 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub events: Vec<ShotEvent>,
    /// Shots dropped before trajectory fitting.
    pub rejected: Vec<(String, RejectReason)>,
}

/// Ball samples from the release frame through the first descending pass
/// through rim height after the highest frame of the flight (inclusive), in
/// the local frame. Anchoring on the apex keeps a noisy early dip below the
/// rim from truncating the window.
fn collect_samples(
    frames: &[TrackingFrame],
    release: usize,
    hoop: HoopEnd,
    rim_height: f64,
    cfg: &ExtractConfig,
) -> Result<(Vec<Xyz>, Vec<f64>), IngestError> {
    let mut span: Vec<&TrackingFrame> = Vec::new();
    for f in frames[release..].iter().take(cfg.max_flight_frames + 1) {
        if span.last().is_some_and(|p| f.t - p.t > cfg.break_gap) {
            break;
        }
        span.push(f);
    }
    let apex = span
        .iter()
        .enumerate()
        .fold(0, |best, (i, f)| if f.ball.z > span[best].ball.z { i } else { best });
    let end = (apex + 1..span.len())
        .find(|&i| span[i - 1].ball.z > rim_height && span[i].ball.z <= rim_height)
        .unwrap_or(span.len().saturating_sub(1));
    let mut samples = Vec::with_capacity(end + 1);
    let mut times = Vec::with_capacity(end + 1);
    for f in &span[..=end.min(span.len().saturating_sub(1))] {
        samples.push(to_local_frame(f.ball, hoop)?);
        times.push(f.t);
    }
    Ok((samples, times))
}

/// Assemble shot events for one game. `tags` must all belong to this game.
pub fn extract_game_shots(
    frames: &[TrackingFrame],
    tags: &[&EventTag],
    roster: &Roster,
    geometry: &CourtGeometry,
    cfg: &ExtractConfig,
) -> Result<Extraction, IngestError> {
    let mut out = Extraction::default();
    for tag in tags {
        if tag.release_frame >= frames.len() {
            return Err(IngestError::ReleaseOutOfRange {
                shot_id: tag.shot_id.clone(),
                index: tag.release_frame,
                len: frames.len(),
            });
        }
        let (defender, ndd) = match nearest_defender(frames, tag.release_frame, &tag.shooter) {
            Ok(d) => d,
            Err(IngestError::NoOpponents) => {
                out.rejected.push((tag.shot_id.clone(), RejectReason::NoDefender));
                continue;
            }
            Err(IngestError::ShooterNotOnCourt(_)) => {
                out.rejected.push((tag.shot_id.clone(), RejectReason::UnknownPlayer));
                continue;
            }
            Err(e) => return Err(e),
        };
        let Some(defender_height) = roster.height(&defender) else {
            out.rejected.push((tag.shot_id.clone(), RejectReason::UnknownPlayer));
            continue;
        };
        let frame = &frames[tag.release_frame];
        let shooter_xy = court_xy_to_local(frame.player(&tag.shooter).expect("checked above").xy, tag.hoop_end);
        let defender_xy = court_xy_to_local(frame.player(&defender).expect("nearest exists").xy, tag.hoop_end);
        let angle = contest_angle(shooter_xy, defender_xy, geometry.rim_xy()).ok();
        let (samples, sample_times) =
            collect_samples(frames, tag.release_frame, tag.hoop_end, geometry.rim_height(), cfg)?;
        out.events.push(ShotEvent {
            shot_id: tag.shot_id.clone(),
            game_id: tag.game_id.clone(),
            shooter: tag.shooter.clone(),
            defender,
            release_index: tag.release_frame,
            hoop_end: tag.hoop_end,
            shooter_xy,
            defender_xy,
            ndd,
            defender_height,
            contest_angle: angle,
            outcome: tag.outcome,
            insufficient_samples: samples.len() < cfg.min_samples,
            samples,
            sample_times,
        });
    }
    Ok(out)
}

/// Group event tags by game, preserving file order within each game.
pub fn tags_by_game(tags: &[EventTag]) -> HashMap<GameId, Vec<&EventTag>> {
    let mut map: HashMap<GameId, Vec<&EventTag>> = HashMap::new();
    for t in tags {
        map.entry(t.game_id.clone()).or_default().push(t);
    }
    map
}

/// Assemble shot events for every tagged shot across all games.
pub fn extract_shot_events(
    games: &BTreeMap<GameId, Vec<TrackingFrame>>,
    tags: &[EventTag],
    roster: &Roster,
    geometry: &CourtGeometry,
    cfg: &ExtractConfig,
) -> Result<Extraction, IngestError> {
    let by_game = tags_by_game(tags);
    let mut out = Extraction::default();
    for tag in tags {
        if !games.contains_key(&tag.game_id) {
            return Err(IngestError::UnknownGame(tag.shot_id.clone()));
        }
    }
    for (game, frames) in games {
        if let Some(game_tags) = by_game.get(game) {
            let part = extract_game_shots(frames, game_tags, roster, geometry, cfg)?;
            out.events.extend(part.events);
            out.rejected.extend(part.rejected);
        }
    }
    Ok(out)
}
