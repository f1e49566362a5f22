//! Dense linear assignment by shortest augmenting paths.
//!
//! Jonker–Volgenant style: column reduction seeds the duals, then each free row
//! is routed along a Dijkstra shortest path in reduced costs. Worst case
//! `O(n³)`; the reduction step usually settles most rows cheaply.

use crate::error::{LabError, Result};

/// Optimal one-to-one matching of rows to columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub row_to_col: Vec<usize>,
    pub total_cost: f64,
}

/// Solves `min_σ Σ_i cost[i][σ(i)]` for a row-major `n × n` matrix.
pub fn solve(cost: &[f64], n: usize) -> Result<Assignment> {
    if cost.len() != n * n {
        return Err(LabError::DimensionMismatch {
            expected: n * n,
            found: cost.len(),
        });
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(LabError::InvalidInput("non-finite assignment cost".into()));
    }
    if n == 0 {
        return Ok(Assignment {
            row_to_col: Vec::new(),
            total_cost: 0.0,
        });
    }

    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut col4row = vec![NONE; n];
    let mut row4col = vec![NONE; n];

    // Column reduction: v_j = min_i c_ij, greedy assignment of unique minima.
    for j in 0..n {
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for i in 0..n {
            let c = cost[i * n + j];
            if c < best {
                best = c;
                arg = i;
            }
        }
        v[j] = best;
        if col4row[arg] == NONE {
            col4row[arg] = j;
            row4col[j] = arg;
        }
    }
    for i in 0..n {
        if col4row[i] != NONE {
            u[i] = cost[i * n + col4row[i]] - v[col4row[i]];
        }
    }
    // Keep dual feasibility u_i + v_j <= c_ij for the seeded rows.
    for i in 0..n {
        if col4row[i] != NONE {
            let row = &cost[i * n..(i + 1) * n];
            let m = row
                .iter()
                .zip(&v)
                .map(|(c, vj)| c - vj)
                .fold(f64::INFINITY, f64::min);
            u[i] = m;
            if (row[col4row[i]] - v[col4row[i]]) > m {
                // Current column is not tight; release the row.
                row4col[col4row[i]] = NONE;
                col4row[i] = NONE;
            }
        }
    }

    let mut shortest = vec![f64::INFINITY; n];
    let mut path = vec![NONE; n];
    let mut in_sr = vec![false; n];
    let mut in_sc = vec![false; n];
    let mut remaining: Vec<usize> = Vec::with_capacity(n);
    let mut sr_list: Vec<usize> = Vec::with_capacity(n);
    let mut sc_list: Vec<usize> = Vec::with_capacity(n);

    for cur_row in 0..n {
        if col4row[cur_row] != NONE {
            continue;
        }
        shortest.iter_mut().for_each(|s| *s = f64::INFINITY);
        path.iter_mut().for_each(|p| *p = NONE);
        for &i in &sr_list {
            in_sr[i] = false;
        }
        for &j in &sc_list {
            in_sc[j] = false;
        }
        sr_list.clear();
        sc_list.clear();
        remaining.clear();
        remaining.extend((0..n).rev());

        let mut min_val = 0.0;
        let mut i = cur_row;
        let sink;
        loop {
            in_sr[i] = true;
            sr_list.push(i);
            let row = &cost[i * n..(i + 1) * n];
            let ui = u[i];
            let mut lowest = f64::INFINITY;
            let mut index = NONE;
            for (it, &j) in remaining.iter().enumerate() {
                let r = min_val + row[j] - ui - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                let s = shortest[j];
                if s < lowest || (s == lowest && row4col[j] == NONE) {
                    lowest = s;
                    index = it;
                }
            }
            if index == NONE || !lowest.is_finite() {
                return Err(LabError::Numerical("assignment infeasible".into()));
            }
            min_val = lowest;
            let j = remaining.swap_remove(index);
            in_sc[j] = true;
            sc_list.push(j);
            if row4col[j] == NONE {
                sink = j;
                break;
            }
            i = row4col[j];
        }

        u[cur_row] += min_val;
        for &r in &sr_list {
            if r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for &j in &sc_list {
            v[j] -= min_val - shortest[j];
        }

        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            let prev = std::mem::replace(&mut col4row[r], j);
            if r == cur_row {
                break;
            }
            j = prev;
        }
    }

    let total_cost = crate::stats::compensated_sum((0..n).map(|i| cost[i * n + col4row[i]]));
    Ok(Assignment {
        row_to_col: col4row,
        total_cost,
    })
}
