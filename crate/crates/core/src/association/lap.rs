//! Rectangular linear assignment by shortest augmenting paths (Jonker-Volgenant
//! style, with row/column potentials).

/// Cost entries at or above this value are infeasible.
pub const FORBIDDEN: f64 = 1e30;

#[derive(Clone, Debug, PartialEq)]
pub struct Assignment {
    /// Column assigned to each row.
    pub row_to_col: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment of every row of a row-major `rows × cols` matrix
/// (`rows ≤ cols`) to a distinct column. `None` when no feasible assignment
/// avoids the forbidden entries.
pub fn solve(cost: &[f64], rows: usize, cols: usize) -> Option<Assignment> {
    assert!(rows <= cols, "more rows ({rows}) than columns ({cols})");
    assert_eq!(cost.len(), rows * cols);
    if rows == 0 {
        return Some(Assignment {
            row_to_col: vec![],
            cost: 0.0,
        });
    }
    let inf = f64::INFINITY;
    // 1-based rows; column 0 is the virtual root of each search.
    let mut u = vec![0.0; rows + 1];
    let mut v = vec![0.0; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];
    let mut minv = vec![inf; cols + 1];
    let mut used = vec![false; cols + 1];
    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let row = &cost[(i0 - 1) * cols..i0 * cols];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let c = row[j - 1];
                if c < FORBIDDEN {
                    let reduced = c - u[i0] - v[j];
                    if reduced < minv[j] {
                        minv[j] = reduced;
                        way[j] = j0;
                    }
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return None;
            }
            for j in 0..=cols {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; rows];
    for j in 1..=cols {
        if owner[j] != 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    let total = row_to_col
        .iter()
        .enumerate()
        .map(|(r, &c)| cost[r * cols + c])
        .sum();
    Some(Assignment {
        row_to_col,
        cost: total,
    })
}
