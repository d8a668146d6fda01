//! Trajectory CSVs in the highD `tracks` column layout: reading, writing,
//! cut-in event extraction and per-frame feature export.
//!
//! Positions are read as vehicle centers. Raw highD files anchor `x, y` at
//! the bounding-box corner; pass them through [`bbox_to_center`] first.
//! `width` is the extent along `x` (vehicle length) and `height` the extent
//! along `y` (vehicle width), as in highD.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{build_scenario, ScenarioKind, ScenarioParams};
use crate::error::{Error, Result};
use crate::kinematics::{VehicleDims, DEFAULT_LANE_WIDTH_M};
use crate::metrics::{compute_features, SurrogateFeatures};

pub const TRACK_COLUMNS: [&str; 9] = ["frame", "id", "x", "y", "width", "height", "xVelocity", "yVelocity", "laneId"];
pub const FEATURE_COLUMNS: [&str; 5] = ["frame", "dhw", "thw", "ttc", "ittc"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackRow {
    pub frame: u64,
    pub track_id: u64,
    pub x_m: f64,
    pub y_m: f64,
    /// Extent along `x`.
    pub length_m: f64,
    /// Extent along `y`.
    pub width_m: f64,
    pub x_vel_mps: f64,
    pub y_vel_mps: f64,
    pub lane_id: i64,
}

impl TrackRow {
    fn dims(&self) -> VehicleDims {
        VehicleDims {
            width_m: self.width_m,
            length_m: self.length_m,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    /// Skip malformed rows and report them as warnings.
    Lenient,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseWarning {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrackSet {
    pub frame_rate_hz: f64,
    /// Rows per track, ordered by frame.
    pub tracks: BTreeMap<u64, Vec<TrackRow>>,
    pub warnings: Vec<ParseWarning>,
}

impl TrackSet {
    pub fn from_rows(rows: impl IntoIterator<Item = TrackRow>, frame_rate_hz: f64) -> Result<Self> {
        let mut tracks: BTreeMap<u64, Vec<TrackRow>> = BTreeMap::new();
        for r in rows {
            tracks.entry(r.track_id).or_default().push(r);
        }
        for (id, rows) in tracks.iter_mut() {
            rows.sort_by_key(|r| r.frame);
            if let Some(w) = rows.windows(2).find(|w| w[0].frame == w[1].frame) {
                return Err(Error::invalid(format!("track {id} has frame {} twice", w[0].frame)));
            }
        }
        Ok(Self {
            frame_rate_hz,
            tracks,
            warnings: Vec::new(),
        })
    }

    pub fn rows(&self) -> impl Iterator<Item = &TrackRow> {
        self.tracks.values().flatten()
    }

    fn at(&self, track: u64, frame: u64) -> Option<&TrackRow> {
        let rows = self.tracks.get(&track)?;
        rows.binary_search_by_key(&frame, |r| r.frame).ok().map(|i| &rows[i])
    }
}

/// Shifts highD bounding-box corner coordinates to vehicle centers.
pub fn bbox_to_center(rows: &mut [TrackRow]) {
    for r in rows {
        r.x_m += r.length_m / 2.0;
        r.y_m += r.width_m / 2.0;
    }
}

fn parse_row(rec: &csv::StringRecord, cols: &[usize; 9]) -> std::result::Result<TrackRow, String> {
    let field = |i: usize| rec.get(cols[i]).unwrap_or("").trim();
    let int = |i: usize| field(i).parse::<u64>().map_err(|_| format!("{}: expected integer, got {:?}", TRACK_COLUMNS[i], field(i)));
    let num = |i: usize| {
        field(i)
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{}: expected finite number, got {:?}", TRACK_COLUMNS[i], field(i)))
    };
    let row = TrackRow {
        frame: int(0)?,
        track_id: int(1)?,
        x_m: num(2)?,
        y_m: num(3)?,
        length_m: num(4)?,
        width_m: num(5)?,
        x_vel_mps: num(6)?,
        y_vel_mps: num(7)?,
        lane_id: field(8).parse::<i64>().map_err(|_| format!("laneId: expected integer, got {:?}", field(8)))?,
    };
    if !(row.length_m > 0.0 && row.width_m > 0.0) {
        return Err(format!("vehicle dimensions must be > 0, got {} x {}", row.length_m, row.width_m));
    }
    Ok(row)
}

/// Reads a tracks CSV. Columns are located by name; extra columns are
/// ignored. A header-only or empty file gives an empty set.
pub fn read_tracks_csv(path: impl AsRef<Path>, frame_rate_hz: f64, mode: ParseMode) -> Result<TrackSet> {
    let path = path.as_ref();
    if !(frame_rate_hz.is_finite() && frame_rate_hz > 0.0) {
        return Err(Error::invalid(format!("frame rate must be > 0, got {frame_rate_hz}")));
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(file);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Ok(TrackSet {
            frame_rate_hz,
            ..TrackSet::default()
        });
    }
    let mut cols = [0usize; 9];
    for (slot, name) in cols.iter_mut().zip(TRACK_COLUMNS) {
        *slot = header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema(format!("{}: missing column `{name}`", path.display())))?;
    }

    let mut rows = Vec::new();
    let mut warnings = Vec::new();
    let mut seen: BTreeMap<(u64, u64), u64> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let parsed = parse_row(&rec, &cols).and_then(|r| match seen.insert((r.track_id, r.frame), line) {
            Some(first) => Err(format!("track {} frame {} already given on line {first}", r.track_id, r.frame)),
            None => Ok(r),
        });
        match (parsed, mode) {
            (Ok(r), _) => rows.push(r),
            (Err(message), ParseMode::Strict) => return Err(Error::Parse { line, message }),
            (Err(message), ParseMode::Lenient) => warnings.push(ParseWarning { line, message }),
        }
    }
    let mut set = TrackSet::from_rows(rows, frame_rate_hz)?;
    set.warnings = warnings;
    Ok(set)
}

/// `%.6g`-style formatting; non-finite values as `inf`, `-inf`, `nan`.
pub fn fmt_sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-5..6).contains(&exp) {
        let s = format!("{x:.5e}");
        let (mantissa, e) = s.split_once('e').expect("exponent form");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        return format!("{mantissa}e{e}");
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn write_tracks_csv(path: impl AsRef<Path>, rows: &[TrackRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TRACK_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.frame.to_string(),
            r.track_id.to_string(),
            fmt_sig6(r.x_m),
            fmt_sig6(r.y_m),
            fmt_sig6(r.length_m),
            fmt_sig6(r.width_m),
            fmt_sig6(r.x_vel_mps),
            fmt_sig6(r.y_vel_mps),
            r.lane_id.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Lane id of lateral position `y_m`; lane centers at `k * lane_width`,
/// the ego lane (`k = 0`) is lane 1.
pub fn lane_id_at(y_m: f64, lane_width_m: f64) -> i64 {
    (y_m / lane_width_m).round() as i64 + 1
}

pub const GENERATED_EGO_ID: u64 = 1;
pub const GENERATED_OTHER_ID: u64 = 2;

/// Open-loop export of a scenario: the ego holds `v_e0`, the other vehicle
/// follows its plan. One frame per simulation step, so the frame rate is
/// `1 / dt_s`.
pub fn scenario_tracks(params: &ScenarioParams) -> Result<Vec<TrackRow>> {
    let sc = build_scenario(params)?;
    let p = &sc.params;
    let mut rows = Vec::with_capacity(2 * (p.steps() + 1));
    for i in 0..=p.steps() {
        let t = i as f64 * p.dt_s;
        let ego = sc.ego0;
        let other = sc.other_at(t);
        for (id, x, y, vx, vy, dims) in [
            (GENERATED_EGO_ID, ego.pos_long_m + ego.vel_long_mps * t, ego.pos_lat_m, ego.vel_long_mps, 0.0, p.ego_dims),
            (GENERATED_OTHER_ID, other.pos_long_m, other.pos_lat_m, other.vel_long_mps, other.vel_lat_mps, p.other_dims),
        ] {
            rows.push(TrackRow {
                frame: i as u64,
                track_id: id,
                x_m: x,
                y_m: y,
                length_m: dims.length_m,
                width_m: dims.width_m,
                x_vel_mps: vx,
                y_vel_mps: vy,
                lane_id: lane_id_at(y, p.lane_width_m),
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtractOptions {
    /// Largest bumper gap at the lane crossing that still counts as a cut-in.
    pub min_gap_m: f64,
    /// Lateral speed below which the cutting vehicle counts as lane-keeping.
    pub lateral_speed_threshold_mps: f64,
    pub lane_width_m: f64,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        Self {
            min_gap_m: 100.0,
            lateral_speed_threshold_mps: 0.01,
            lane_width_m: DEFAULT_LANE_WIDTH_M,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutInEvent {
    pub ego_track: u64,
    pub cut_track: u64,
    /// Onset of the cutting vehicle's lateral motion.
    pub start_frame: u64,
    /// First frame with the cutting vehicle in the ego lane.
    pub crossing_frame: u64,
    /// End of the lateral motion, or the last shared frame.
    pub end_frame: u64,
    /// Scenario reconstructed from the states at `start_frame`.
    pub params: ScenarioParams,
}

/// Signed bumper gap from `follower` to `leader` along the follower's
/// direction of travel.
fn gap_ahead(follower: &TrackRow, leader: &TrackRow) -> f64 {
    let dir = if follower.x_vel_mps < 0.0 { -1.0 } else { 1.0 };
    dir * (leader.x_m - follower.x_m) - (follower.length_m + leader.length_m) / 2.0
}

fn moving_laterally(prev: &TrackRow, cur: &TrackRow, threshold: f64) -> bool {
    let sign = (cur.y_m - prev.y_m).signum();
    sign != 0.0 && cur.y_vel_mps.abs() > threshold && cur.y_vel_mps.signum() == sign
}

/// Finds cut-ins: a track entering the lane of a track behind it with a
/// bumper gap of at most `min_gap_m`. The event starts where the lateral
/// motion leading to the crossing began.
pub fn extract_cut_in_events(set: &TrackSet, opts: &ExtractOptions) -> Vec<CutInEvent> {
    let mut events = Vec::new();
    for (&cut_id, cut_rows) in &set.tracks {
        for (k, w) in cut_rows.windows(2).enumerate() {
            let (before, cross) = (&w[0], &w[1]);
            if before.lane_id == cross.lane_id || cross.frame != before.frame + 1 {
                continue;
            }
            for (&ego_id, _) in set.tracks.iter().filter(|(&id, _)| id != cut_id) {
                let Some(ego) = set.at(ego_id, cross.frame) else { continue };
                if ego.lane_id != cross.lane_id {
                    continue;
                }
                let gap = gap_ahead(ego, cross);
                if !(gap >= 0.0 && gap <= opts.min_gap_m) {
                    continue;
                }
                if let Some(ev) = build_event(set, opts, ego_id, cut_id, cut_rows, k + 1) {
                    events.push(ev);
                }
            }
        }
    }
    events.sort_by_key(|e| (e.start_frame, e.ego_track, e.cut_track));
    events
}

fn build_event(set: &TrackSet, opts: &ExtractOptions, ego_id: u64, cut_id: u64, cut_rows: &[TrackRow], cross: usize) -> Option<CutInEvent> {
    let thr = opts.lateral_speed_threshold_mps;
    let shared = |i: usize| set.at(ego_id, cut_rows[i].frame).is_some();
    let contiguous = |i: usize| cut_rows[i].frame + 1 == cut_rows[i + 1].frame;

    let mut start = cross;
    while start > 0 && contiguous(start - 1) && shared(start - 1) && moving_laterally(&cut_rows[start - 1], &cut_rows[start], thr) {
        start -= 1;
    }
    let mut end = cross;
    while end + 1 < cut_rows.len() && contiguous(end) && shared(end + 1) && moving_laterally(&cut_rows[end], &cut_rows[end + 1], thr) {
        end += 1;
    }

    let ego = set.at(ego_id, cut_rows[start].frame)?;
    let cut = &cut_rows[start];
    let dt = 1.0 / set.frame_rate_hz;
    let lc_duration_s = ((cut_rows[end].frame - cut.frame) as f64 * dt).max(dt);
    let defaults = ScenarioParams::<f64>::default();
    let params = ScenarioParams {
        kind: ScenarioKind::CutIn,
        v_e0: ego.x_vel_mps.abs(),
        v_o0: cut.x_vel_mps.abs(),
        d_x0: gap_ahead(ego, cut),
        d_y0: (cut.y_m - ego.y_m).abs(),
        lc_start_s: 0.0,
        lc_duration_s,
        duration_s: defaults.duration_s.max(lc_duration_s),
        dt_s: dt,
        ego_dims: ego.dims(),
        other_dims: cut.dims(),
        lane_width_m: opts.lane_width_m,
        lead_speed_profile: Vec::new(),
    };
    Some(CutInEvent {
        ego_track: ego_id,
        cut_track: cut_id,
        start_frame: cut.frame,
        crossing_frame: cut_rows[cross].frame,
        end_frame: cut_rows[end].frame,
        params,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureRow {
    pub frame: u64,
    /// `None` on frames where the two vehicles overlap longitudinally.
    pub features: Option<SurrogateFeatures>,
    pub dhw_m: f64,
}

impl FeatureRow {
    pub fn overlapping(&self) -> bool {
        self.features.is_none()
    }
}

/// Per-frame DHW, THW, TTC and ITTC for the event pair, ego following,
/// over every shared frame from event start to end.
pub fn export_features(event: &CutInEvent, set: &TrackSet) -> Result<Vec<FeatureRow>> {
    let cut_rows = set
        .tracks
        .get(&event.cut_track)
        .ok_or_else(|| Error::invalid(format!("track {} not in set", event.cut_track)))?;
    if !set.tracks.contains_key(&event.ego_track) {
        return Err(Error::invalid(format!("track {} not in set", event.ego_track)));
    }
    let mut out = Vec::new();
    for cut in cut_rows.iter().filter(|r| (event.start_frame..=event.end_frame).contains(&r.frame)) {
        let Some(ego) = set.at(event.ego_track, cut.frame) else { continue };
        let gap = gap_ahead(ego, cut);
        let dir = if ego.x_vel_mps < 0.0 { -1.0 } else { 1.0 };
        let v_follow = dir * ego.x_vel_mps;
        let rel = v_follow - dir * cut.x_vel_mps;
        let features = if gap < 0.0 {
            None
        } else {
            Some(compute_features(gap, v_follow.max(0.0), rel)?)
        };
        out.push(FeatureRow {
            frame: cut.frame,
            features,
            dhw_m: gap,
        });
    }
    Ok(out)
}

/// Overlap frames write `nan` in the THW, TTC and ITTC columns.
pub fn write_features_csv(path: impl AsRef<Path>, rows: &[FeatureRow]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(out, "{}", FEATURE_COLUMNS.join(",")).map_err(io)?;
    for r in rows {
        let (thw, ttc, ittc) = r
            .features
            .map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.thw_s, f.ttc_s, f.ittc_per_s));
        writeln!(
            out,
            "{},{},{},{},{}",
            r.frame,
            fmt_sig6(r.dhw_m),
            fmt_sig6(thw),
            fmt_sig6(ttc),
            fmt_sig6(ittc)
        )
        .map_err(io)?;
    }
    out.flush().map_err(io)
}
