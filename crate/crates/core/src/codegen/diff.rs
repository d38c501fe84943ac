// Line diff between two renders, based on a longest common subsequence.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::{SectionOwner, SourceDocument};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffOp {
    Insert,
    Delete,
    Replace,
}

/// One contiguous change. Ranges are line indices; `lines` holds the new
/// lines including their terminators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiffHunk {
    pub op: DiffOp,
    pub old_range: Range<usize>,
    pub new_range: Range<usize>,
    pub lines: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub owner: Option<SectionOwner>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScriptDiff {
    pub hunks: Vec<DiffHunk>,
}

impl ScriptDiff {
    pub fn is_empty(&self) -> bool {
        self.hunks.is_empty()
    }

    /// Rebuilds the new text from the old one.
    pub fn apply(&self, old: &str) -> String {
        let old_lines = split_lines(old);
        let mut out = String::with_capacity(old.len());
        let mut cursor = 0;
        for h in &self.hunks {
            for line in &old_lines[cursor..h.old_range.start] {
                out.push_str(line);
            }
            for line in &h.lines {
                out.push_str(line);
            }
            cursor = h.old_range.end;
        }
        for line in &old_lines[cursor..] {
            out.push_str(line);
        }
        out
    }

    /// Number of lines inserted plus lines deleted.
    pub fn edit_distance(&self) -> usize {
        self.hunks
            .iter()
            .map(|h| h.old_range.len() + h.new_range.len())
            .sum()
    }
}

/// Splits text into lines that keep their `\n`, so joining them gives the
/// input back exactly.
pub fn split_lines(text: &str) -> Vec<&str> {
    text.split_inclusive('\n').collect()
}

/// Minimal line diff of two texts.
pub fn diff_scripts(old_text: &str, new_text: &str) -> ScriptDiff {
    let old = split_lines(old_text);
    let new = split_lines(new_text);
    diff_lines(&old, &new)
}

/// Diff of two rendered documents, with each hunk attributed to the section
/// it touches.
pub fn diff_documents(old: &SourceDocument, new: &SourceDocument) -> ScriptDiff {
    let mut diff = diff_scripts(&old.render(), &new.render());
    let old_owners = old.line_owners();
    let new_owners = new.line_owners();
    for h in &mut diff.hunks {
        h.owner = match h.op {
            DiffOp::Delete => old_owners.get(h.old_range.start).copied(),
            DiffOp::Insert | DiffOp::Replace => new_owners.get(h.new_range.start).copied(),
        };
    }
    diff
}

pub fn diff_lines(old: &[&str], new: &[&str]) -> ScriptDiff {
    let prefix = old.iter().zip(new).take_while(|(a, b)| a == b).count();
    let suffix = old[prefix..]
        .iter()
        .rev()
        .zip(new[prefix..].iter().rev())
        .take_while(|(a, b)| a == b)
        .count();
    let a = &old[prefix..old.len() - suffix];
    let b = &new[prefix..new.len() - suffix];

    // lcs[i][j] = LCS length of a[i..] and b[j..]
    let (n, m) = (a.len(), b.len());
    let mut lcs = vec![0u32; (n + 1) * (m + 1)];
    let idx = |i: usize, j: usize| i * (m + 1) + j;
    for i in (0..n).rev() {
        for j in (0..m).rev() {
            lcs[idx(i, j)] = if a[i] == b[j] {
                lcs[idx(i + 1, j + 1)] + 1
            } else {
                lcs[idx(i + 1, j)].max(lcs[idx(i, j + 1)])
            };
        }
    }

    let mut hunks = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < n || j < m {
        if i < n && j < m && a[i] == b[j] {
            i += 1;
            j += 1;
            continue;
        }
        let (si, sj) = (i, j);
        while (i < n || j < m) && !(i < n && j < m && a[i] == b[j]) {
            if j < m && (i == n || lcs[idx(i, j + 1)] >= lcs[idx(i + 1, j)]) {
                j += 1;
            } else {
                i += 1;
            }
        }
        let op = match (i > si, j > sj) {
            (true, true) => DiffOp::Replace,
            (true, false) => DiffOp::Delete,
            _ => DiffOp::Insert,
        };
        hunks.push(DiffHunk {
            op,
            old_range: prefix + si..prefix + i,
            new_range: prefix + sj..prefix + j,
            lines: b[sj..j].iter().map(|s| s.to_string()).collect(),
            owner: None,
        });
    }
    ScriptDiff { hunks }
}
