//! Plot-ready CSV tables.

use crate::evaluation::state_feature_usage;
use crate::inference::ModelState;

use super::csv::format_value;

/// One row per feature, most used first: `rank,feature,v_0,…,v_{D-1}`.
pub fn feature_images_csv(state: &ModelState) -> String {
    let d = state.dict.n_dims();
    let mut out = String::from("rank,feature");
    for j in 0..d {
        out.push_str(&format!(",v{j}"));
    }
    out.push('\n');
    for (rank, u) in state_feature_usage(state).iter().enumerate() {
        out.push_str(&format!("{rank},{}", u.feature));
        for j in 0..d {
            out.push(',');
            out.push_str(&format_value(state.dict.a[(u.feature, j)]));
        }
        out.push('\n');
    }
    out
}

/// `rank,feature,contributions`, most used first.
pub fn feature_usage_csv(state: &ModelState) -> String {
    let mut out = String::from("rank,feature,contributions\n");
    for (rank, u) in state_feature_usage(state).iter().enumerate() {
        out.push_str(&format!("{rank},{},{}\n", u.feature, u.contributions));
    }
    out
}

/// Number of active instances of every feature at every row; columns in
/// popularity order (`row,f<k>,…`).
pub fn instance_heatmap_csv(state: &ModelState) -> String {
    let usage = state_feature_usage(state);
    let alloc = &state.alloc;
    let n = alloc.n_rows();
    let mut counts = vec![vec![0u32; usage.len()]; n];
    for (c, u) in usage.iter().enumerate() {
        for (start, &l) in alloc.column(u.feature).iter().enumerate() {
            for row in counts.iter_mut().skip(start).take(l as usize) {
                row[c] += 1;
            }
        }
    }
    let mut out = String::from("row");
    for u in &usage {
        out.push_str(&format!(",f{}", u.feature));
    }
    out.push('\n');
    for (r, row) in counts.iter().enumerate() {
        out.push_str(&r.to_string());
        for c in row {
            out.push_str(&format!(",{c}"));
        }
        out.push('\n');
    }
    out
}
