//! Plain-text solution dumps:
//!
//! ```text
//! agent 0: (0,0)->(1,0)->(1,1)
//! agent 1: (3,2)
//! flowtime 2
//! normalized_cost 1.000000
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::{Path, Solution};
use crate::grid::GridMap;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DumpError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: ({x},{y}) is not a passable cell")]
    BadCell { line: usize, x: usize, y: usize },
    #[error("missing {0} line")]
    Missing(&'static str),
}

pub fn format_solution(map: &GridMap, solution: &Solution) -> String {
    let mut out = String::new();
    for (i, path) in solution.paths.iter().enumerate() {
        write!(out, "agent {i}: ").unwrap();
        for (t, &v) in path.iter().enumerate() {
            let (x, y) = map.coords(v);
            if t > 0 {
                out.push_str("->");
            }
            write!(out, "({x},{y})").unwrap();
        }
        out.push('\n');
    }
    writeln!(out, "flowtime {}", solution.flowtime).unwrap();
    writeln!(out, "normalized_cost {:.6}", solution.normalized_cost).unwrap();
    out
}

/// Parses a dump. Flowtime and normalized cost are taken as written so a
/// verifier can compare them against the paths.
pub fn parse_solution(map: &GridMap, text: &str) -> Result<Solution, DumpError> {
    let mut paths: Vec<Path> = Vec::new();
    let mut flowtime = None;
    let mut normalized = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let s = raw.trim();
        if s.is_empty() {
            continue;
        }
        let syntax = |message: &str| DumpError::Syntax {
            line,
            message: message.to_string(),
        };
        if let Some(rest) = s.strip_prefix("agent ") {
            let (id, body) = rest.split_once(':').ok_or_else(|| syntax("expected ':'"))?;
            let id: usize = id.trim().parse().map_err(|_| syntax("bad agent id"))?;
            if id != paths.len() {
                return Err(syntax("agents must be listed in order"));
            }
            let mut path = Path::new();
            for cell in body.split("->") {
                let cell = cell.trim();
                let inner = cell
                    .strip_prefix('(')
                    .and_then(|c| c.strip_suffix(')'))
                    .ok_or_else(|| syntax("expected (x,y)"))?;
                let (x, y) = inner
                    .split_once(',')
                    .ok_or_else(|| syntax("expected (x,y)"))?;
                let x: usize = x.trim().parse().map_err(|_| syntax("bad x coordinate"))?;
                let y: usize = y.trim().parse().map_err(|_| syntax("bad y coordinate"))?;
                let v = map
                    .vertex_at(x, y)
                    .ok_or(DumpError::BadCell { line, x, y })?;
                path.push(v);
            }
            paths.push(path);
        } else if let Some(rest) = s.strip_prefix("flowtime ") {
            flowtime = Some(rest.trim().parse().map_err(|_| syntax("bad flowtime"))?);
        } else if let Some(rest) = s.strip_prefix("normalized_cost ") {
            normalized = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| syntax("bad normalized cost"))?,
            );
        } else {
            return Err(syntax("unrecognized line"));
        }
    }
    Ok(Solution {
        paths,
        flowtime: flowtime.ok_or(DumpError::Missing("flowtime"))?,
        normalized_cost: normalized.ok_or(DumpError::Missing("normalized_cost"))?,
    })
}
