//! CONCOR block model with four positions and their roles.
//!
//! Each node's profile is its binary out-row followed by its binary
//! in-column. When two nodes `i` and `j` are compared, the entries for `i`
//! and `j` in the second profile are swapped, so that "i sends to j" lines up
//! with "j sends to i" and the self positions line up with each other.
//! Without this alignment two mutually tied nodes look maximally different.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::SpilloverNetwork;

pub const N_BLOCKS: usize = 4;
pub const DEFAULT_MAX_DEPTH: usize = 2;
pub const DEFAULT_CONVERGENCE: f64 = 0.2;
pub const MAX_ITERATIONS: usize = 50;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BlockError {
    #[error("need at least 4 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("assignment has {got} entries for {expected} nodes")]
    AssignmentLength { expected: usize, got: usize },
    #[error("block id {0} outside 1..=4")]
    BadBlockId(usize),
    #[error("max_depth must be 1 or 2, got {0}")]
    BadDepth(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockRole {
    BilateralSpillover,
    MainBenefit,
    MainSpillover,
    Brokers,
}

impl BlockRole {
    pub fn label(self) -> &'static str {
        match self {
            BlockRole::BilateralSpillover => "bilateral-spillover",
            BlockRole::MainBenefit => "main-benefit",
            BlockRole::MainSpillover => "main-spillover",
            BlockRole::Brokers => "brokers",
        }
    }
}

/// Result of [`concor_split`]: block ids `1..=4` per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcorSplit {
    pub assignment: Vec<usize>,
    /// Some split fell back to node order because the correlations were
    /// undefined or put every node on one side.
    pub degenerate: bool,
    /// Some split hit the iteration cap before meeting the tolerance.
    pub unconverged: bool,
}

fn binary(net: &SpilloverNetwork) -> Vec<Vec<bool>> {
    let n = net.n_nodes();
    (0..n).map(|i| (0..n).map(|j| net.has_edge(i, j)).collect()).collect()
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn profile(adj: &[Vec<bool>], node: usize, swap: Option<(usize, usize)>) -> Vec<f64> {
    let n = adj.len();
    let pos = |k: usize| match swap {
        Some((a, b)) if k == a => b,
        Some((a, b)) if k == b => a,
        _ => k,
    };
    let mut v = Vec::with_capacity(2 * n);
    v.extend((0..n).map(|k| adj[node][pos(k)] as u8 as f64));
    v.extend((0..n).map(|k| adj[pos(k)][node] as u8 as f64));
    v
}

fn is_constant(adj: &[Vec<bool>], node: usize) -> bool {
    let p = profile(adj, node, None);
    p.iter().all(|v| *v == p[0])
}

enum Split {
    Done(Vec<usize>, Vec<usize>),
    Degenerate,
}

/// Splits `members` (all with non-constant profiles) into two sides.
fn bisect(adj: &[Vec<bool>], members: &[usize], tol: f64, unconverged: &mut bool) -> Split {
    let m = members.len();
    if m < 2 {
        return Split::Done(members.to_vec(), vec![]);
    }
    let mut corr = DMatrix::identity(m, m);
    for a in 0..m {
        for b in a + 1..m {
            let (i, j) = (members[a], members[b]);
            let Some(r) = pearson(&profile(adj, i, None), &profile(adj, j, Some((i, j)))) else {
                return Split::Degenerate;
            };
            corr[(a, b)] = r;
            corr[(b, a)] = r;
        }
    }
    if m == 2 {
        // correlations of two-entry columns are always +-1; use the profiles
        return if corr[(0, 1)] < 0.0 {
            Split::Done(vec![members[0]], vec![members[1]])
        } else {
            Split::Done(members.to_vec(), vec![])
        };
    }
    let converged = |c: &DMatrix<f64>| {
        (0..m).all(|a| (0..m).all(|b| a == b || (1.0 - c[(a, b)].abs()) <= tol))
    };
    let mut iterations = 0;
    while !converged(&corr) {
        if iterations == MAX_ITERATIONS {
            *unconverged = true;
            break;
        }
        let cols: Vec<Vec<f64>> = (0..m).map(|a| corr.column(a).iter().copied().collect()).collect();
        let mut next = DMatrix::identity(m, m);
        for a in 0..m {
            for b in a + 1..m {
                let Some(r) = pearson(&cols[a], &cols[b]) else {
                    return Split::Degenerate;
                };
                next[(a, b)] = r;
                next[(b, a)] = r;
            }
        }
        corr = next;
        iterations += 1;
    }
    let (mut left, mut right) = (Vec::new(), Vec::new());
    for a in 0..m {
        if corr[(0, a)] >= 0.0 {
            left.push(members[a]);
        } else {
            right.push(members[a]);
        }
    }
    if right.is_empty() && m > 2 {
        return Split::Degenerate;
    }
    Split::Done(left, right)
}

fn split_by_order(members: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let half = members.len().div_ceil(2);
    (members[..half].to_vec(), members[half..].to_vec())
}

/// Recursive CONCOR bisection into up to four blocks (ids `1..=4`, some
/// possibly empty). Nodes without ties are set aside and later join the
/// block of their lowest-index neighbour, or block 1.
pub fn concor_split(net: &SpilloverNetwork, max_depth: usize, convergence: f64) -> Result<ConcorSplit, BlockError> {
    let n = net.n_nodes();
    if n < 4 {
        return Err(BlockError::TooFewNodes(n));
    }
    if !(1..=2).contains(&max_depth) {
        return Err(BlockError::BadDepth(max_depth));
    }
    let adj = binary(net);
    let active: Vec<usize> = (0..n).filter(|&i| !is_constant(&adj, i)).collect();
    let mut degenerate = false;
    let mut unconverged = false;
    let mut halve = |members: &[usize], degenerate: &mut bool| match bisect(&adj, members, convergence, &mut unconverged) {
        Split::Done(l, r) => (l, r),
        Split::Degenerate => {
            *degenerate = true;
            split_by_order(members)
        }
    };
    let (left, right) = halve(&active, &mut degenerate);
    let groups: Vec<Vec<usize>> = if max_depth == 1 {
        vec![left, vec![], right, vec![]]
    } else {
        let (l1, l2) = halve(&left, &mut degenerate);
        let (r1, r2) = halve(&right, &mut degenerate);
        vec![l1, l2, r1, r2]
    };
    let mut assignment = vec![0usize; n];
    for (g, members) in groups.iter().enumerate() {
        for &i in members {
            assignment[i] = g + 1;
        }
    }
    for i in 0..n {
        if assignment[i] == 0 {
            assignment[i] = (0..n)
                .find(|&j| j != i && assignment[j] != 0 && (adj[i][j] || adj[j][i]))
                .map_or(1, |j| assignment[j]);
        }
    }
    Ok(ConcorSplit {
        assignment,
        degenerate,
        unconverged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockRow {
    pub block: usize,
    pub size: usize,
    pub received_inside: usize,
    pub received_outside: usize,
    pub sent_inside: usize,
    pub sent_outside: usize,
    pub expected_internal_ratio: f64,
    /// Zero when the block sends nothing.
    pub actual_internal_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockStats {
    pub n_nodes: usize,
    pub blocks: Vec<BlockRow>,
}

fn check_assignment(n: usize, assignment: &[usize]) -> Result<(), BlockError> {
    if assignment.len() != n {
        return Err(BlockError::AssignmentLength {
            expected: n,
            got: assignment.len(),
        });
    }
    if let Some(b) = assignment.iter().find(|b| !(1..=N_BLOCKS).contains(*b)) {
        return Err(BlockError::BadBlockId(*b));
    }
    Ok(())
}

/// Inside/outside send and receive counts per block.
pub fn block_stats(net: &SpilloverNetwork, assignment: &[usize]) -> Result<BlockStats, BlockError> {
    let n = net.n_nodes();
    check_assignment(n, assignment)?;
    let mut rows: Vec<BlockRow> = (1..=N_BLOCKS)
        .map(|block| BlockRow {
            block,
            size: assignment.iter().filter(|b| **b == block).count(),
            received_inside: 0,
            received_outside: 0,
            sent_inside: 0,
            sent_outside: 0,
            expected_internal_ratio: 0.0,
            actual_internal_ratio: 0.0,
        })
        .collect();
    for (i, j, _) in net.edges() {
        let (bi, bj) = (assignment[i] - 1, assignment[j] - 1);
        if bi == bj {
            rows[bi].sent_inside += 1;
            rows[bj].received_inside += 1;
        } else {
            rows[bi].sent_outside += 1;
            rows[bj].received_outside += 1;
        }
    }
    for r in &mut rows {
        if r.size > 0 {
            r.expected_internal_ratio = (r.size - 1) as f64 / (n - 1) as f64;
        }
        let sent = r.sent_inside + r.sent_outside;
        if sent > 0 {
            r.actual_internal_ratio = r.sent_inside as f64 / sent as f64;
        }
    }
    Ok(BlockStats { n_nodes: n, blocks: rows })
}

/// Role of `block` (1-based) by whether it receives from outside and
/// whether its internal send ratio reaches the expected ratio. `None` for
/// an empty or unknown block.
pub fn classify_block(stats: &BlockStats, block: usize) -> Option<BlockRole> {
    let r = stats.blocks.iter().find(|r| r.block == block)?;
    if r.size == 0 {
        return None;
    }
    // sent_inside / sent >= (g_k - 1) / (g - 1), in integers
    let sent = r.sent_inside + r.sent_outside;
    let reaches = r.sent_inside * (stats.n_nodes - 1) >= (r.size - 1) * sent;
    Some(match (r.received_outside == 0, reaches) {
        (true, true) => BlockRole::BilateralSpillover,
        (false, true) => BlockRole::MainBenefit,
        (true, false) => BlockRole::MainSpillover,
        (false, false) => BlockRole::Brokers,
    })
}

/// Block-to-block densities and the image obtained by thresholding them
/// strictly above the overall network density.
pub fn image_matrix(net: &SpilloverNetwork, assignment: &[usize]) -> Result<(DMatrix<f64>, DMatrix<u8>), BlockError> {
    let n = net.n_nodes();
    check_assignment(n, assignment)?;
    let mut sizes = [0usize; N_BLOCKS];
    for b in assignment {
        sizes[b - 1] += 1;
    }
    let mut counts = DMatrix::<f64>::zeros(N_BLOCKS, N_BLOCKS);
    for (i, j, _) in net.edges() {
        counts[(assignment[i] - 1, assignment[j] - 1)] += 1.0;
    }
    let nd = net.density();
    let density = DMatrix::from_fn(N_BLOCKS, N_BLOCKS, |r, c| {
        let possible = if r == c {
            sizes[r] * sizes[r].saturating_sub(1)
        } else {
            sizes[r] * sizes[c]
        };
        if possible == 0 {
            0.0
        } else {
            counts[(r, c)] / possible as f64
        }
    });
    let image = density.map(|d| u8::from(d > nd));
    Ok((density, image))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockPartition {
    pub node_ids: Vec<String>,
    pub assignment: Vec<usize>,
    pub block_sizes: Vec<usize>,
    pub roles: Vec<Option<BlockRole>>,
    pub stats: BlockStats,
    pub density_matrix: DMatrix<f64>,
    pub image_matrix: DMatrix<u8>,
    pub degenerate: bool,
    pub unconverged: bool,
}

/// CONCOR split followed by block statistics, roles and image.
pub fn block_model(net: &SpilloverNetwork, max_depth: usize, convergence: f64) -> Result<BlockPartition, BlockError> {
    let split = concor_split(net, max_depth, convergence)?;
    let stats = block_stats(net, &split.assignment)?;
    let (density_matrix, image_matrix) = image_matrix(net, &split.assignment)?;
    Ok(BlockPartition {
        node_ids: net.node_ids().to_vec(),
        block_sizes: stats.blocks.iter().map(|r| r.size).collect(),
        roles: (1..=N_BLOCKS).map(|b| classify_block(&stats, b)).collect(),
        assignment: split.assignment,
        stats,
        density_matrix,
        image_matrix,
        degenerate: split.degenerate,
        unconverged: split.unconverged,
    })
}

impl BlockPartition {
    /// One row per block in the layout of a send/receive table.
    pub fn to_csv(&self) -> String {
        let mut s = String::from(
            "block,size,members,received_inside,received_outside,sent_inside,sent_outside,expected_internal_ratio,actual_internal_ratio,role\n",
        );
        for (k, r) in self.stats.blocks.iter().enumerate() {
            let members: Vec<&str> = self
                .assignment
                .iter()
                .enumerate()
                .filter(|(_, b)| **b == r.block)
                .map(|(i, _)| self.node_ids[i].as_str())
                .collect();
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{}",
                r.block,
                r.size,
                members.join(" "),
                r.received_inside,
                r.received_outside,
                r.sent_inside,
                r.sent_outside,
                r.expected_internal_ratio,
                r.actual_internal_ratio,
                self.roles[k].map_or("", BlockRole::label)
            );
        }
        s
    }

    pub fn matrix_csv<T: std::fmt::Display + nalgebra::Scalar>(m: &DMatrix<T>) -> String {
        let mut s = String::from("block,1,2,3,4\n");
        for r in 0..m.nrows() {
            let _ = write!(s, "{}", r + 1);
            for c in 0..m.ncols() {
                let _ = write!(s, ",{}", m[(r, c)]);
            }
            s.push('\n');
        }
        s
    }

    /// Inter-block image graph.
    pub fn image_dot(&self, name: &str) -> String {
        let mut s = format!("digraph \"{name}\" {{\n");
        for b in 0..N_BLOCKS {
            let role = self.roles[b].map_or("empty", BlockRole::label);
            let _ = writeln!(s, "  \"B{}\" [label=\"Block {} ({})\\n{} nodes\"];", b + 1, b + 1, role, self.block_sizes[b]);
        }
        for r in 0..N_BLOCKS {
            for c in 0..N_BLOCKS {
                if self.image_matrix[(r, c)] == 1 {
                    let _ = writeln!(s, "  \"B{}\" -> \"B{}\" [label=\"{:.3}\"];", r + 1, c + 1, self.density_matrix[(r, c)]);
                }
            }
        }
        s.push_str("}\n");
        s
    }
}

/// Whether two assignments describe the same partition up to relabelling.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(n: usize, edges: &[(usize, usize)]) -> SpilloverNetwork {
        let e: Vec<_> = edges.iter().map(|&(i, j)| (i, j, 1.0)).collect();
        SpilloverNetwork::from_edges(n, &e).unwrap()
    }

    #[test]
    fn two_mutual_pairs_split_at_depth_one() {
        let g = net(4, &[(0, 1), (1, 0), (2, 3), (3, 2)]);
        let s = concor_split(&g, 1, DEFAULT_CONVERGENCE).unwrap();
        assert!(!s.degenerate);
        assert!(same_partition(&s.assignment, &[1, 1, 3, 3]));
    }

    #[test]
    fn all_ones_falls_back_to_node_order() {
        let edges: Vec<_> = (0..6).flat_map(|i| (0..6).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let s = concor_split(&net(6, &edges), 2, DEFAULT_CONVERGENCE).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.assignment, vec![1, 1, 2, 3, 3, 4]);
    }

    #[test]
    fn isolated_nodes_follow_tie_break() {
        // node 4 is isolated and lands in block 1
        let g = net(5, &[(0, 1), (1, 0), (2, 3), (3, 2)]);
        let s = concor_split(&g, 2, DEFAULT_CONVERGENCE).unwrap();
        assert_eq!(s.assignment[4], 1);
        assert_eq!(s.assignment.len(), 5);
    }

    #[test]
    fn too_few_nodes() {
        assert_eq!(concor_split(&net(3, &[]), 2, 0.2), Err(BlockError::TooFewNodes(3)));
    }

    /// Blocks {0,1,2} and {3,4,5}.
    fn six_node() -> (SpilloverNetwork, Vec<usize>) {
        let g = net(
            6,
            &[(0, 1), (1, 0), (1, 2), (2, 0), (0, 3), (3, 4), (4, 5), (5, 3), (5, 2), (4, 1), (3, 0)],
        );
        (g, vec![1, 1, 1, 2, 2, 2])
    }

    #[test]
    fn six_node_tally() {
        let (g, a) = six_node();
        let s = block_stats(&g, &a).unwrap();
        let b1 = &s.blocks[0];
        let b2 = &s.blocks[1];
        // block 1 sends 0->1, 1->0, 1->2, 2->0 inside and 0->3 outside
        assert_eq!((b1.sent_inside, b1.sent_outside), (4, 1));
        // it receives 5->2, 4->1, 3->0 from block 2
        assert_eq!((b1.received_inside, b1.received_outside), (4, 3));
        assert_eq!((b2.sent_inside, b2.sent_outside), (3, 3));
        assert_eq!((b2.received_inside, b2.received_outside), (3, 1));
        assert!((b1.expected_internal_ratio - 0.4).abs() < 1e-15);
        assert!((b1.actual_internal_ratio - 0.8).abs() < 1e-15);
        assert_eq!(classify_block(&s, 1), Some(BlockRole::MainBenefit));
        assert_eq!(classify_block(&s, 2), Some(BlockRole::MainBenefit));
        assert_eq!(classify_block(&s, 3), None);

        let (d, img) = image_matrix(&g, &a).unwrap();
        assert!((d[(0, 0)] - 4.0 / 6.0).abs() < 1e-12);
        assert!((d[(0, 1)] - 1.0 / 9.0).abs() < 1e-12);
        assert!((d[(1, 0)] - 3.0 / 9.0).abs() < 1e-12);
        assert!((d[(1, 1)] - 3.0 / 6.0).abs() < 1e-12);
        // overall density 11/30
        assert_eq!((img[(0, 0)], img[(0, 1)], img[(1, 0)], img[(1, 1)]), (1, 0, 0, 1));
    }

    #[test]
    fn expected_ratio_for_three_of_sixteen() {
        let g = net(16, &[(0, 1)]);
        let mut a = vec![2usize; 16];
        a[..3].fill(1);
        let s = block_stats(&g, &a).unwrap();
        assert!((s.blocks[0].expected_internal_ratio - 2.0 / 15.0).abs() < 1e-15);
        assert_eq!(format!("{:.2}", 100.0 * s.blocks[0].expected_internal_ratio), "13.33");
    }

    #[test]
    fn role_table_corners() {
        let row = |size, ri, ro, si, so| BlockRow {
            block: 1,
            size,
            received_inside: ri,
            received_outside: ro,
            sent_inside: si,
            sent_outside: so,
            expected_internal_ratio: 0.0,
            actual_internal_ratio: 0.0,
        };
        let stats = |r| BlockStats { n_nodes: 16, blocks: vec![r] };
        // 17/39 = 43.59% against 4/15 for a 5-node block, receiving from outside
        assert_eq!(classify_block(&stats(row(5, 17, 4, 17, 22)), 1), Some(BlockRole::MainBenefit));
        // 3/25 = 12% below 2/15, receiving 13 from outside
        assert_eq!(classify_block(&stats(row(3, 3, 13, 3, 22)), 1), Some(BlockRole::Brokers));
        assert_eq!(classify_block(&stats(row(3, 0, 0, 0, 5)), 1), Some(BlockRole::MainSpillover));
        assert_eq!(classify_block(&stats(row(3, 2, 0, 2, 0)), 1), Some(BlockRole::BilateralSpillover));
    }

    #[test]
    fn strict_image_threshold() {
        let edges: Vec<_> = (0..4).flat_map(|i| (0..4).filter(move |&j| j != i).map(move |j| (i, j))).collect();
        let (d, img) = image_matrix(&net(4, &edges), &[1, 2, 3, 4]).unwrap();
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(img.iter().filter(|v| **v == 1).count(), 0);
        let (d, img) = image_matrix(&net(4, &[]), &[1, 1, 2, 2]).unwrap();
        assert!(d.iter().all(|v| *v == 0.0) && img.iter().all(|v| *v == 0));
    }

    #[test]
    fn single_block_has_no_outside_sends() {
        let g = net(4, &[(0, 1), (2, 3)]);
        let s = block_stats(&g, &[1, 1, 1, 1]).unwrap();
        assert_eq!(s.blocks[0].sent_outside, 0);
        assert_eq!(s.blocks[0].actual_internal_ratio, 1.0);
    }

    #[test]
    fn bad_assignment() {
        let g = net(4, &[]);
        assert!(matches!(block_stats(&g, &[1, 2]), Err(BlockError::AssignmentLength { .. })));
        assert_eq!(block_stats(&g, &[1, 2, 5, 1]), Err(BlockError::BadBlockId(5)));
    }
}
