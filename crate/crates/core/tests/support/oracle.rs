//! Exhaustive warping-path enumeration, used as an independent reference
//! for the dynamic-programming DTW.

use pickup_auth::Exact;

/// Backward step from a cell; the derived ordering is the tie-break
/// preference (diagonal first).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Back {
    Diagonal,
    Vertical,
    Horizontal,
}

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub cost: Exact,
    pub path: Vec<(usize, usize)>,
    pub distance: Exact,
    pub paths_seen: usize,
}

fn in_band(i: usize, j: usize, n: usize, m: usize, band: Option<usize>) -> bool {
    band.is_none_or(|r| i.abs_diff(j) <= r.max(n.abs_diff(m)))
}

/// Walks every path backward from the end cell. Among minimum-cost paths
/// the reported one has the smallest backward step sequence.
pub fn enumerate(x: &[Exact], y: &[Exact], band: Option<usize>) -> OracleResult {
    let (n, m) = (x.len(), y.len());
    let mut best: Option<(Exact, Vec<Back>, Vec<(usize, usize)>)> = None;
    let mut seen = 0;
    let mut steps = Vec::new();
    let mut cells = vec![(n - 1, m - 1)];
    walk(x, y, band, &mut cells, &mut steps, &mut best, &mut seen);
    let (cost, _, mut path) = best.expect("at least one path");
    path.reverse();
    let distance = cost / Exact::from_integer(path.len() as i64);
    OracleResult {
        cost,
        path,
        distance,
        paths_seen: seen,
    }
}

fn walk(
    x: &[Exact],
    y: &[Exact],
    band: Option<usize>,
    cells: &mut Vec<(usize, usize)>,
    steps: &mut Vec<Back>,
    best: &mut Option<(Exact, Vec<Back>, Vec<(usize, usize)>)>,
    seen: &mut usize,
) {
    let (n, m) = (x.len(), y.len());
    let &(i, j) = cells.last().unwrap();
    if (i, j) == (0, 0) {
        *seen += 1;
        let cost: Exact = cells
            .iter()
            .map(|&(a, b)| if x[a] > y[b] { x[a] - y[b] } else { y[b] - x[a] })
            .sum();
        let better = match best {
            None => true,
            Some((c, s, _)) => cost < *c || (cost == *c && *steps < *s),
        };
        if better {
            *best = Some((cost, steps.clone(), cells.clone()));
        }
        return;
    }
    let moves = [
        (Back::Diagonal, i.checked_sub(1).zip(j.checked_sub(1))),
        (Back::Vertical, i.checked_sub(1).map(|a| (a, j))),
        (Back::Horizontal, j.checked_sub(1).map(|b| (i, b))),
    ];
    for (step, next) in moves {
        let Some((a, b)) = next else { continue };
        if !in_band(a, b, n, m, band) {
            continue;
        }
        cells.push((a, b));
        steps.push(step);
        walk(x, y, band, cells, steps, best, seen);
        cells.pop();
        steps.pop();
    }
}

/// Number of unconstrained warping paths between lengths `n` and `m`
/// (the Delannoy number D(n-1, m-1)).
pub fn path_count(n: usize, m: usize) -> u64 {
    let mut d = vec![vec![1u64; m]; n];
    for i in 1..n {
        for j in 1..m {
            d[i][j] = d[i - 1][j] + d[i][j - 1] + d[i - 1][j - 1];
        }
    }
    d[n - 1][m - 1]
}
