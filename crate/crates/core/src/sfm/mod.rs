//! Pseudo-ground-truth generation from cross-view matches and the
//! progressive (two-round) training schedule with loss-ranked filtering.

mod filter;
mod matcher;
mod pseudo_gt;

pub use filter::{filter_matches, progressive_step, ProgressiveSchedule};
pub use matcher::{load_match_file, match_overlap, save_match_file, Match, MatchPair, MatchSet};
pub use pseudo_gt::{build_pseudo_gt, dump_pseudo_gt, PseudoGtStats};

#[derive(Debug)]
pub enum SfmError {
    Parse(String),
    Io(std::io::Error),
    Geometry(crate::geometry::GeometryError),
}

impl std::fmt::Display for SfmError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SfmError::Parse(msg) => write!(f, "match file parse: {msg}"),
            SfmError::Io(e) => write!(f, "sfm io: {e}"),
            SfmError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SfmError {}
