//! Helper creation and reuse across accepted programs.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dsl::RewardProgram;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseRecord {
    pub generation: usize,
    /// Helper hashes first seen in this generation.
    pub new_helpers: usize,
    /// Helper occurrences in this generation's programs whose hash was seen
    /// in an earlier generation.
    pub reused_helpers: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReuseReport {
    pub per_generation: Vec<ReuseRecord>,
    /// Accepted programs containing each hash.
    pub programs_per_helper: BTreeMap<String, usize>,
    /// Static call sites per hash, summed over accepted programs.
    pub calls_per_helper: BTreeMap<String, usize>,
}

/// `history` holds, per generation in ascending order, the programs
/// accepted in that generation.
pub fn analyze_reuse(history: &[(usize, Vec<RewardProgram>)]) -> ReuseReport {
    let mut report = ReuseReport::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (generation, programs) in history {
        let mut fresh: HashSet<&str> = HashSet::new();
        let mut reused = 0;
        for p in programs {
            let mut hashes: Vec<&str> = p.helper_hashes().collect();
            hashes.sort_unstable();
            hashes.dedup();
            for h in &hashes {
                *report.programs_per_helper.entry(h.to_string()).or_insert(0) += 1;
                if seen.contains(*h) {
                    reused += 1;
                } else {
                    fresh.insert(h);
                }
            }
            let calls = p.helper_call_counts();
            for (name, hash) in &p.helpers {
                *report.calls_per_helper.entry(hash.clone()).or_insert(0) += calls.get(name).copied().unwrap_or(0);
            }
        }
        report.per_generation.push(ReuseRecord {
            generation: *generation,
            new_helpers: fresh.len(),
            reused_helpers: reused,
        });
        seen.extend(fresh.into_iter().map(str::to_string));
    }
    report
}

/// New-helper counts summed over the first and last thirds of the records.
pub fn thirds(records: &[ReuseRecord]) -> (usize, usize) {
    let n = records.len();
    let k = n.div_ceil(3);
    let first = records[..k.min(n)].iter().map(|r| r.new_helpers).sum();
    let last = records[n.saturating_sub(k)..].iter().map(|r| r.new_helpers).sum();
    (first, last)
}
