//! Dense transportation simplex on a bipartite instance.
//!
//! The solver keeps a spanning-tree basis of `m + n - 1` cells, prices the
//! non-basic cells with dual variables recomputed from the tree on every
//! pivot, and pivots on the most negative reduced cost. If an unusually
//! degenerate instance exceeds a pivot budget under that rule, it switches
//! to Bland's least-index rule, which cannot cycle. Before returning, the
//! solution is checked against the optimality conditions; a failed check is
//! reported as an error rather than silently returned.
//!
//! All tie-breaking is by index order, so a given instance always produces
//! the same pivots, the same flows, and bit-identical objective values.

use crate::error::{Error, Result};

pub(crate) struct TransportInstance {
    pub supply: Vec<f64>,
    pub demand: Vec<f64>,
    /// Row-major `supply.len() x demand.len()` costs.
    pub cost: Vec<f64>,
}

pub(crate) struct TransportSolution {
    pub value: f64,
    /// Basic cells `(row, col, flow)`; flows below the cleanup threshold
    /// are reported as zero.
    pub flows: Vec<(usize, usize, f64)>,
}

struct Basis {
    /// Cells currently in the basis.
    cells: Vec<(usize, usize)>,
    flows: Vec<f64>,
    member: Vec<bool>,
}

impl TransportInstance {
    fn m(&self) -> usize {
        self.supply.len()
    }

    fn n(&self) -> usize {
        self.demand.len()
    }

    fn cost_at(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n() + j]
    }
}

pub(crate) fn solve(instance: &TransportInstance) -> Result<TransportSolution> {
    let m = instance.m();
    let n = instance.n();
    if m == 0 || n == 0 {
        return Ok(TransportSolution {
            value: 0.0,
            flows: Vec::new(),
        });
    }
    let total_supply: f64 = instance.supply.iter().sum();
    let total_demand: f64 = instance.demand.iter().sum();
    let mass_scale = total_supply.abs().max(total_demand.abs()).max(1.0);
    if (total_supply - total_demand).abs() > 1e-9 * mass_scale {
        return Err(Error::MassMismatch {
            left: total_supply,
            right: total_demand,
        });
    }

    let cost_scale = instance.cost.iter().fold(1.0f64, |a, &c| a.max(c.abs()));
    let enter_tol = 1e-12 * cost_scale;

    let mut basis = northwest_corner(instance);
    let dantzig_budget = 200 * (m + n);
    let hard_budget = 1000 * (m + n) + 10_000;
    let mut pivots = 0usize;
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; n];

    loop {
        compute_duals(instance, &basis, &mut u, &mut v)?;
        let bland = pivots >= dantzig_budget;
        let entering = match find_entering(instance, &basis, &u, &v, enter_tol, bland) {
            Some(cell) => cell,
            None => break,
        };
        pivot(instance, &mut basis, entering)?;
        pivots += 1;
        if pivots > hard_budget {
            return Err(Error::SolverFailure(format!(
                "pivot budget exhausted after {pivots} pivots on a {m}x{n} instance"
            )));
        }
    }

    verify(instance, &basis, &mut u, &mut v, cost_scale)?;

    let mut order: Vec<usize> = (0..basis.cells.len()).collect();
    order.sort_unstable_by_key(|&k| basis.cells[k]);
    let mut value = 0.0;
    let mut flows = Vec::with_capacity(order.len());
    for k in order {
        let (i, j) = basis.cells[k];
        let f = basis.flows[k].max(0.0);
        value += f * instance.cost_at(i, j);
        flows.push((i, j, f));
    }
    Ok(TransportSolution { value, flows })
}

/// Staircase initial basis: exactly `m + n - 1` cells, connected by
/// construction. Ties advance the row so the cell count never drifts.
fn northwest_corner(instance: &TransportInstance) -> Basis {
    let m = instance.m();
    let n = instance.n();
    let mut ra = instance.supply.clone();
    let mut rb = instance.demand.clone();
    let mut cells = Vec::with_capacity(m + n - 1);
    let mut flows = Vec::with_capacity(m + n - 1);
    let mut member = vec![false; m * n];
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let f = ra[i].min(rb[j]).max(0.0);
        cells.push((i, j));
        flows.push(f);
        member[i * n + j] = true;
        ra[i] -= f;
        rb[j] -= f;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i < m - 1 && (ra[i] <= rb[j] || j == n - 1) {
            i += 1;
        } else {
            j += 1;
        }
    }
    Basis {
        cells,
        flows,
        member,
    }
}

/// Solves `u_i + v_j = c_ij` over the basis tree with `u_0 = 0`.
fn compute_duals(
    instance: &TransportInstance,
    basis: &Basis,
    u: &mut [f64],
    v: &mut [f64],
) -> Result<()> {
    let m = instance.m();
    let n = instance.n();
    let mut row_cells: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut col_cells: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (k, &(i, j)) in basis.cells.iter().enumerate() {
        row_cells[i].push(k);
        col_cells[j].push(k);
    }
    let mut u_known = vec![false; m];
    let mut v_known = vec![false; n];
    u[0] = 0.0;
    u_known[0] = true;
    // Nodes are rows 0..m then columns m..m+n.
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(0usize);
    let mut settled = 1usize;
    while let Some(node) = queue.pop_front() {
        if node < m {
            for &k in &row_cells[node] {
                let (_, j) = basis.cells[k];
                if !v_known[j] {
                    v[j] = instance.cost_at(node, j) - u[node];
                    v_known[j] = true;
                    settled += 1;
                    queue.push_back(m + j);
                }
            }
        } else {
            let j = node - m;
            for &k in &col_cells[j] {
                let (i, _) = basis.cells[k];
                if !u_known[i] {
                    u[i] = instance.cost_at(i, j) - v[j];
                    u_known[i] = true;
                    settled += 1;
                    queue.push_back(i);
                }
            }
        }
    }
    if settled != m + n {
        return Err(Error::SolverFailure(
            "basis does not span the instance".to_string(),
        ));
    }
    Ok(())
}

fn find_entering(
    instance: &TransportInstance,
    basis: &Basis,
    u: &[f64],
    v: &[f64],
    tol: f64,
    bland: bool,
) -> Option<(usize, usize)> {
    let n = instance.n();
    let mut best: Option<((usize, usize), f64)> = None;
    for (i, &ui) in u.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            if basis.member[i * n + j] {
                continue;
            }
            let reduced = instance.cost_at(i, j) - ui - vj;
            if reduced < -tol {
                if bland {
                    return Some((i, j));
                }
                match best {
                    Some((_, r)) if r <= reduced => {}
                    _ => best = Some(((i, j), reduced)),
                }
            }
        }
    }
    best.map(|(cell, _)| cell)
}

/// Brings `entering` into the basis: finds the unique cycle it closes,
/// shifts flow around it, and drops the blocking cell.
fn pivot(
    instance: &TransportInstance,
    basis: &mut Basis,
    entering: (usize, usize),
) -> Result<()> {
    let m = instance.m();
    let n = instance.n();
    // The cycle is the entering cell plus the tree path from its column
    // node back to its row node. Edges along that path alternate signs,
    // starting negative at the column end.
    let path = tree_path(basis, m, n, entering)?;
    let mut delta = f64::INFINITY;
    let mut leaving: Option<usize> = None;
    for (pos, &k) in path.iter().enumerate() {
        if pos % 2 == 0 {
            let f = basis.flows[k];
            let replace = match leaving {
                None => true,
                Some(cur) => {
                    f < delta || (f == delta && basis.cells[k] < basis.cells[cur])
                }
            };
            if replace {
                delta = f;
                leaving = Some(k);
            }
        }
    }
    let leaving = leaving.ok_or_else(|| {
        Error::SolverFailure("pivot cycle has no leaving cell".to_string())
    })?;
    for (pos, &k) in path.iter().enumerate() {
        if pos % 2 == 0 {
            basis.flows[k] -= delta;
        } else {
            basis.flows[k] += delta;
        }
    }
    let (li, lj) = basis.cells[leaving];
    basis.member[li * n + lj] = false;
    basis.member[entering.0 * n + entering.1] = true;
    basis.cells[leaving] = entering;
    basis.flows[leaving] = delta;
    Ok(())
}

/// Basis cells on the tree path from the column node of `entering` to its
/// row node, in walk order.
fn tree_path(
    basis: &Basis,
    m: usize,
    n: usize,
    entering: (usize, usize),
) -> Result<Vec<usize>> {
    let mut adjacency: Vec<Vec<(usize, usize)>> = vec![Vec::new(); m + n];
    for (k, &(i, j)) in basis.cells.iter().enumerate() {
        adjacency[i].push((k, m + j));
        adjacency[m + j].push((k, i));
    }
    let start = m + entering.1;
    let goal = entering.0;
    // Iterative depth-first walk; parent edges reconstruct the path.
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; m + n];
    let mut visited = vec![false; m + n];
    visited[start] = true;
    let mut stack = vec![start];
    while let Some(node) = stack.pop() {
        if node == goal {
            break;
        }
        for &(k, next) in &adjacency[node] {
            if !visited[next] {
                visited[next] = true;
                parent[next] = Some((k, node));
                stack.push(next);
            }
        }
    }
    if !visited[goal] {
        return Err(Error::SolverFailure(
            "entering cell is not connected to the basis tree".to_string(),
        ));
    }
    let mut path = Vec::new();
    let mut node = goal;
    while node != start {
        let (k, prev) = parent[node]
            .ok_or_else(|| Error::SolverFailure("broken tree path".to_string()))?;
        path.push(k);
        node = prev;
    }
    path.reverse();
    Ok(path)
}

/// Optimality and feasibility checks on the final basis: dual feasibility
/// of every cell, nonnegative flows, and marginals matching the instance.
fn verify(
    instance: &TransportInstance,
    basis: &Basis,
    u: &mut [f64],
    v: &mut [f64],
    cost_scale: f64,
) -> Result<()> {
    let m = instance.m();
    let n = instance.n();
    compute_duals(instance, basis, u, v)?;
    let dual_tol = 1e-8 * cost_scale;
    for (i, &ui) in u.iter().enumerate() {
        for (j, &vj) in v.iter().enumerate() {
            let reduced = instance.cost_at(i, j) - ui - vj;
            if reduced < -dual_tol {
                return Err(Error::SolverFailure(format!(
                    "reduced cost {reduced:e} at ({i},{j}) violates optimality"
                )));
            }
        }
    }
    let mut row_sum = vec![0.0; m];
    let mut col_sum = vec![0.0; n];
    for (k, &(i, j)) in basis.cells.iter().enumerate() {
        let f = basis.flows[k];
        if f < -1e-12 {
            return Err(Error::SolverFailure(format!(
                "negative flow {f:e} at ({i},{j})"
            )));
        }
        row_sum[i] += f.max(0.0);
        col_sum[j] += f.max(0.0);
    }
    for (i, &shipped) in row_sum.iter().enumerate() {
        if (shipped - instance.supply[i]).abs() > 1e-10 {
            return Err(Error::SolverFailure(format!(
                "row {i} ships {} against supply {}",
                shipped, instance.supply[i]
            )));
        }
    }
    for (j, &received) in col_sum.iter().enumerate() {
        if (received - instance.demand[j]).abs() > 1e-10 {
            return Err(Error::SolverFailure(format!(
                "column {j} receives {} against demand {}",
                received, instance.demand[j]
            )));
        }
    }
    Ok(())
}
