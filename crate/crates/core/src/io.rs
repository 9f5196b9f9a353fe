//! Writers and readers for the on-disk formats.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use crate::ingest::{EventRow, EventTag, FrameRecord, RosterRecord, RosterRow, TrackingFrame, EVENT_COLUMNS};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File { path: String, source: std::io::Error },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File { path: path.display().to_string(), source }
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(true).from_writer(w)
}

/// Serialize rows to a CSV file with a header line.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), IoError> {
    let mut w = csv_writer(File::create(path).map_err(file_err(path))?);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, IoError> {
    read_csv_from(File::open(path).map_err(file_err(path))?)
}

pub fn read_csv_from<T: DeserializeOwned>(r: impl Read) -> Result<Vec<T>, IoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(BufReader::new(r));
    rdr.deserialize().map(|row| row.map_err(IoError::from)).collect()
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(file_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = std::fs::read_to_string(path).map_err(file_err(path))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_frame_jsonl(w: &mut impl Write, frame: &TrackingFrame) -> Result<(), IoError> {
    serde_json::to_writer(&mut *w, &FrameRecord::from(frame))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn write_event<W: Write>(w: &mut csv::Writer<W>, tag: &EventTag) -> Result<(), IoError> {
    w.serialize(EventRow::from(tag))?;
    Ok(())
}

pub fn write_events(w: impl Write, tags: &[EventTag]) -> Result<(), IoError> {
    let mut w = csv_writer(w);
    if tags.is_empty() {
        w.write_record(EVENT_COLUMNS)?;
    }
    for t in tags {
        write_event(&mut w, t)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_roster(w: impl Write, roster: &[RosterRecord]) -> Result<(), IoError> {
    let mut w = csv_writer(w);
    for r in roster {
        w.serialize(RosterRow { player_id: r.player.to_string(), height_in: r.height_in, position: r.position.clone() })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_tracking_jsonl(w: impl Write, frames: &[TrackingFrame]) -> Result<(), IoError> {
    let mut w = std::io::BufWriter::new(w);
    for f in frames {
        write_frame_jsonl(&mut w, f)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{GameId, HoopEnd, PlayerId, Xy, Xyz};
    use crate::ingest::{read_events, read_roster, read_tracking, LoadOptions, Outcome, PlayerPosition, TrackingFormat};

    #[test]
    fn tracking_round_trip() {
        let players = (0..10)
            .map(|i| PlayerPosition {
                id: PlayerId::new(format!("P{i}")).unwrap(),
                team: if i < 5 { "A".into() } else { "B".into() },
                xy: Xy::new(10.0 + i as f64 * 0.37, 20.01),
            })
            .collect::<Vec<_>>();
        let frames: Vec<TrackingFrame> = (0..3)
            .map(|k| TrackingFrame {
                game_id: GameId::new("G1").unwrap(),
                t: k as f64 * 0.04,
                ball: Xyz::new(30.1234, 25.5, 7.0 + k as f64 * 0.1),
                players: players.clone(),
            })
            .collect();
        let mut buf = Vec::new();
        write_tracking_jsonl(&mut buf, &frames).unwrap();
        let data = read_tracking(Box::new(std::io::Cursor::new(buf)), TrackingFormat::Jsonl, &LoadOptions::default()).unwrap();
        assert_eq!(data.games[&GameId::new("G1").unwrap()], frames);
    }

    #[test]
    fn events_and_roster_round_trip() {
        let tags = vec![EventTag {
            shot_id: "S1".into(),
            game_id: GameId::new("G1").unwrap(),
            shooter: PlayerId::new("P1").unwrap(),
            release_frame: 12,
            outcome: Outcome::Miss,
            hoop_end: HoopEnd::Right,
        }];
        let mut buf = Vec::new();
        write_events(&mut buf, &tags).unwrap();
        assert_eq!(read_events(&buf[..]).unwrap().0, tags);

        let roster = vec![RosterRecord { player: PlayerId::new("P1").unwrap(), height_in: 79.5, position: "F".into() }];
        let mut buf = Vec::new();
        write_roster(&mut buf, &roster).unwrap();
        let (r, _) = read_roster(&buf[..]).unwrap();
        assert_eq!(r.players.into_values().collect::<Vec<_>>(), roster);
    }
}
