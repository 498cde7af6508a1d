//! Murty's k-best assignment over the extended cost matrix.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::lap::{self, FORBIDDEN};
use super::{build_cost_matrix, AssignmentVector, AssociationProblem, CostMatrix};

struct Node {
    cost: f64,
    seq: u64,
    row_to_col: Vec<usize>,
    /// Rows fixed to a column in this subspace.
    forced: Vec<Option<usize>>,
    excluded: Vec<(usize, usize)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap on "better": lower cost, then earlier creation.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Best assignment under the node's constraints, solved from scratch.
fn solve_subspace(c: &CostMatrix, forced: &[Option<usize>], excluded: &[(usize, usize)]) -> Option<(f64, Vec<usize>)> {
    let free: Vec<usize> = (0..c.rows).filter(|&r| forced[r].is_none()).collect();
    let mut col_used = vec![false; c.cols];
    let mut fixed_cost = 0.0;
    for (r, f) in forced.iter().enumerate() {
        if let Some(col) = *f {
            col_used[col] = true;
            fixed_cost += c.get(r, col);
        }
    }
    let mut sub = Vec::with_capacity(free.len() * c.cols);
    for &r in &free {
        sub.extend((0..c.cols).map(|col| if col_used[col] { FORBIDDEN } else { c.get(r, col) }));
    }
    let position: Vec<Option<usize>> = {
        let mut pos = vec![None; c.rows];
        for (k, &r) in free.iter().enumerate() {
            pos[r] = Some(k);
        }
        pos
    };
    for &(r, col) in excluded {
        if let Some(k) = position[r] {
            sub[k * c.cols + col] = FORBIDDEN;
        }
    }
    let solution = lap::solve(&sub, free.len(), c.cols)?;
    let mut row_to_col: Vec<usize> = forced.iter().map(|f| f.unwrap_or(0)).collect();
    for (k, &r) in free.iter().enumerate() {
        row_to_col[r] = solution.row_to_col[k];
    }
    Some((fixed_cost + solution.cost, row_to_col))
}

fn to_gamma(c: &CostMatrix, row_to_col: &[usize]) -> AssignmentVector {
    AssignmentVector(row_to_col.iter().map(|&col| c.value_of(col)).collect())
}

/// Up to `t` distinct positive 1-1 vectors in non-increasing weight order.
pub fn murty_ranked(problem: &AssociationProblem, t: usize) -> Vec<AssignmentVector> {
    if t == 0 {
        return vec![];
    }
    let c = build_cost_matrix(problem);
    let p = c.rows;
    let Some((cost, row_to_col)) = solve_subspace(&c, &vec![None; p], &[]) else {
        return vec![];
    };
    let mut seq = 0;
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        cost,
        seq,
        row_to_col,
        forced: vec![None; p],
        excluded: vec![],
    });
    let mut out = Vec::with_capacity(t);
    while let Some(node) = heap.pop() {
        out.push(to_gamma(&c, &node.row_to_col));
        if out.len() == t {
            break;
        }
        // Partition the rest of this subspace: child k keeps the first k free
        // rows at their current columns and bans row k's column.
        let mut forced = node.forced.clone();
        for r in 0..p {
            if node.forced[r].is_some() {
                continue;
            }
            let mut excluded = node.excluded.clone();
            excluded.push((r, node.row_to_col[r]));
            if let Some((cost, row_to_col)) = solve_subspace(&c, &forced, &excluded) {
                seq += 1;
                heap.push(Node {
                    cost,
                    seq,
                    row_to_col,
                    forced: forced.clone(),
                    excluded,
                });
            }
            forced[r] = Some(node.row_to_col[r]);
        }
    }
    out
}

/// Highest-weight positive 1-1 vector.
pub fn optimal_assignment(problem: &AssociationProblem) -> AssignmentVector {
    murty_ranked(problem, 1)
        .pop()
        .unwrap_or_else(|| AssignmentVector(vec![-1; problem.rows()]))
}
