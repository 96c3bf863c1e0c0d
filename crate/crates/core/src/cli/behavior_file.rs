//! Line-oriented behavior files.
//!
//! ```text
//! # comment
//! N m1 .. mN d
//! p(0..0|x) p(0..1|x) ...        one line per setting tuple x
//! ```
//!
//! Setting tuples and outcome tuples run in lexicographic order with the first
//! party most significant.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::quantum::{Behavior, Scenario};

pub fn parse_behavior(text: &str) -> Result<Behavior> {
    let mut lines = text
        .lines()
        .map(str::trim)
        .enumerate()
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("behavior file is empty".into()))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| Error::Parse(format!("bad header token {t:?}"))))
        .collect::<Result<_>>()?;
    let n = *nums.first().ok_or_else(|| Error::Parse("missing party count".into()))?;
    if nums.len() != n + 2 {
        return Err(Error::Parse(format!("header needs N, {n} setting counts and d; got {} numbers", nums.len())));
    }
    let sc = Scenario::new(nums[1..=n].to_vec(), nums[n + 1])?;
    let cols = sc.outcome_tuples();
    let mut table = Vec::with_capacity(sc.setting_tuples() * cols);
    for _ in 0..sc.setting_tuples() {
        let (lineno, line) = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("expected {} probability rows", sc.setting_tuples())))?;
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Parse(format!("line {}: bad number {t:?}", lineno + 1))))
            .collect::<Result<_>>()?;
        if row.len() != cols {
            return Err(Error::Parse(format!("line {}: expected {cols} probabilities, got {}", lineno + 1, row.len())));
        }
        table.extend(row);
    }
    if let Some((lineno, _)) = lines.next() {
        return Err(Error::Parse(format!("line {}: unexpected trailing data", lineno + 1)));
    }
    Behavior::new(sc, table)
}

pub fn format_behavior(b: &Behavior) -> String {
    let sc = b.scenario();
    let mut s = String::new();
    let ms: Vec<String> = sc.settings().iter().map(|m| m.to_string()).collect();
    let _ = writeln!(s, "{} {} {}", sc.parties(), ms.join(" "), sc.outcomes());
    for x in 0..sc.setting_tuples() {
        let row: Vec<String> = b.row(x).iter().map(|p| format!("{p:e}")).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    s
}
