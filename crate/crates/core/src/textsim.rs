//! Gestalt pattern-matching similarity (Ratcliff/Obershelp).
//!
//! Characters are Unicode scalar values. No junk heuristic is applied: the
//! score is the exact gestalt recursion, so results do not depend on the
//! corpus the strings came from.

/// Longest contiguous block common to two character slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CommonBlock {
    pub start_a: usize,
    pub start_b: usize,
    pub len: usize,
}

/// Finds the longest contiguous substring common to `a` and `b`.
///
/// Ties resolve to the smallest `start_a`, then the smallest `start_b`.
/// Returns length 0 with starts (0, 0) when the slices share no character.
pub fn longest_common_block(a: &[char], b: &[char]) -> CommonBlock {
    let mut scratch = vec![0u32; b.len() + 1];
    longest_common_block_in(a, b, &mut scratch)
}

// Suffix-match DP over end positions, O(|a|·|b|) time and O(|b|) space.
// End positions are scanned in ascending (i, j) order and the best block is
// replaced only on strictly greater length; for a fixed maximal length the
// first block encountered has the smallest end_a, hence the smallest start_a,
// then the smallest start_b.
fn longest_common_block_in(a: &[char], b: &[char], row: &mut Vec<u32>) -> CommonBlock {
    row.clear();
    row.resize(b.len() + 1, 0);
    let mut best = CommonBlock {
        start_a: 0,
        start_b: 0,
        len: 0,
    };
    for (i, &ca) in a.iter().enumerate() {
        // row[j+1] holds the match length ending at (i, j) once written;
        // diag carries the not-yet-overwritten previous-row value at j.
        let mut diag = 0u32;
        for j in 0..b.len() {
            let above = row[j + 1];
            if ca == b[j] {
                let len = diag as usize + 1;
                row[j + 1] = len as u32;
                if len > best.len {
                    best = CommonBlock {
                        start_a: i + 1 - len,
                        start_b: j + 1 - len,
                        len,
                    };
                }
            } else {
                row[j + 1] = 0;
            }
            diag = above;
        }
    }
    best
}

/// Ratcliff/Obershelp similarity of two strings in [0, 1].
///
/// Score is 2·M / (|a| + |b|) where M counts characters matched by
/// recursively taking the longest common block and re-matching the unmatched
/// left and right remainders. Two empty strings score 1.0 by convention.
pub fn ratcliff_obershelp(a: &str, b: &str) -> f64 {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    ratcliff_obershelp_chars(&a, &b)
}

/// Same as [`ratcliff_obershelp`] on pre-decoded character slices.
///
/// The pair scan caches decoded text, so the hot path avoids re-walking
/// UTF-8 for every comparison.
pub fn ratcliff_obershelp_chars(a: &[char], b: &[char]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let matched = gestalt_matched(a, b);
    2.0 * matched as f64 / (a.len() + b.len()) as f64
}

/// Total characters matched by the gestalt recursion.
fn gestalt_matched(a: &[char], b: &[char]) -> usize {
    let mut scratch = vec![0u32; b.len() + 1];
    let mut matched = 0usize;
    // (a_lo, a_hi, b_lo, b_hi) half-open regions still to match.
    let mut stack = vec![(0usize, a.len(), 0usize, b.len())];
    while let Some((a_lo, a_hi, b_lo, b_hi)) = stack.pop() {
        if a_lo >= a_hi || b_lo >= b_hi {
            continue;
        }
        let block = longest_common_block_in(&a[a_lo..a_hi], &b[b_lo..b_hi], &mut scratch);
        if block.len == 0 {
            continue;
        }
        matched += block.len;
        let (sa, sb) = (a_lo + block.start_a, b_lo + block.start_b);
        stack.push((a_lo, sa, b_lo, sb));
        stack.push((sa + block.len, a_hi, sb + block.len, b_hi));
    }
    matched
}

/// Cheap upper bound on the similarity score from character multisets.
///
/// Matched characters can never exceed the multiset intersection, so
/// `2·I / (|a| + |b|)` bounds the score from above. Both inputs must be
/// sorted. Used to prune pairs that cannot reach a threshold.
pub fn similarity_upper_bound(sorted_a: &[char], sorted_b: &[char]) -> f64 {
    if sorted_a.is_empty() && sorted_b.is_empty() {
        return 1.0;
    }
    if sorted_a.is_empty() || sorted_b.is_empty() {
        return 0.0;
    }
    let mut i = 0;
    let mut j = 0;
    let mut common = 0usize;
    while i < sorted_a.len() && j < sorted_b.len() {
        match sorted_a[i].cmp(&sorted_b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    2.0 * common as f64 / (sorted_a.len() + sorted_b.len()) as f64
}
