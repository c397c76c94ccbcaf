//! Dominance, nondominated sorting and 2-D hypervolume. All objectives are
//! maximized.

/// `a` dominates `b`: no worse in both objectives and better in at least one.
pub fn dominates(a: [f64; 2], b: [f64; 2]) -> bool {
    a[0] >= b[0] && a[1] >= b[1] && (a[0] > b[0] || a[1] > b[1])
}

/// Indices of the nondominated points, in input order. Points tied on both
/// objectives are all kept.
pub fn pareto_front(points: &[[f64; 2]]) -> Vec<usize> {
    // sort by first objective descending, second descending; a point is on
    // the front iff its second objective beats everything strictly better in
    // the first, or ties the best second objective among equal-first points
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[b][0]
            .total_cmp(&points[a][0])
            .then(points[b][1].total_cmp(&points[a][1]))
    });
    let mut front = Vec::new();
    let mut best_y = f64::NEG_INFINITY;
    let mut k = 0;
    while k < order.len() {
        // group of equal first objective
        let x = points[order[k]][0];
        let mut end = k;
        while end < order.len() && points[order[end]][0] == x {
            end += 1;
        }
        let group_max = points[order[k]][1];
        if group_max > best_y {
            for &i in &order[k..end] {
                if points[i][1] == group_max {
                    front.push(i);
                }
            }
            best_y = group_max;
        }
        k = end;
    }
    front.sort_unstable();
    front
}

/// Fast nondominated sort; returns front number per point (0 = best).
pub fn nondominated_ranks(points: &[[f64; 2]]) -> Vec<usize> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in i + 1..n {
            if dominates(points[i], points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(points[j], points[i]) {
                dominates_list[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut rank = vec![0; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = r;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        r += 1;
    }
    rank
}

/// Crowding distance within one front; boundary points get infinity.
pub fn crowding_distance(points: &[[f64; 2]], members: &[usize]) -> Vec<f64> {
    let m = members.len();
    let mut d = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    for k in 0..2 {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| points[members[a]][k].total_cmp(&points[members[b]][k]).then(a.cmp(&b)));
        let lo = points[members[order[0]]][k];
        let hi = points[members[order[m - 1]]][k];
        d[order[0]] = f64::INFINITY;
        d[order[m - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..m - 1 {
                let gap = points[members[order[w + 1]]][k] - points[members[order[w - 1]]][k];
                d[order[w]] += gap / (hi - lo);
            }
        }
    }
    d
}

/// Area dominated by `points` and bounded below by `reference`.
pub fn hypervolume(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut front: Vec<[f64; 2]> = pareto_front(points)
        .into_iter()
        .map(|i| points[i])
        .filter(|p| p[0] > reference[0] && p[1] > reference[1])
        .collect();
    front.sort_by(|a, b| b[0].total_cmp(&a[0]));
    let mut area = 0.0;
    let mut y_prev = reference[1];
    for p in front {
        if p[1] > y_prev {
            area += (p[0] - reference[0]) * (p[1] - y_prev);
            y_prev = p[1];
        }
    }
    area
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_point_is_front() {
        assert_eq!(pareto_front(&[[0.3, 0.4]]), vec![0]);
    }

    #[test]
    fn ties_are_kept() {
        let p = [[1.0, 1.0], [1.0, 1.0], [0.5, 0.5]];
        assert_eq!(pareto_front(&p), vec![0, 1]);
        assert_eq!(nondominated_ranks(&p), vec![0, 0, 1]);
    }

    #[test]
    fn equal_first_objective() {
        let p = [[1.0, 0.2], [1.0, 0.5], [0.8, 0.9]];
        assert_eq!(pareto_front(&p), vec![1, 2]);
    }

    #[test]
    fn hypervolume_rectangles() {
        assert_eq!(hypervolume(&[[1.0, 1.0]], [0.0, 0.0]), 1.0);
        // staircase 2x1 + 1x(2-1)
        assert_eq!(hypervolume(&[[2.0, 1.0], [1.0, 2.0]], [0.0, 0.0]), 3.0);
        assert_eq!(hypervolume(&[[-1.0, 5.0]], [0.0, 0.0]), 0.0);
    }

    #[test]
    fn crowding_boundaries_infinite() {
        let p = [[0.0, 3.0], [1.0, 2.0], [2.0, 1.0], [3.0, 0.0]];
        let d = crowding_distance(&p, &[0, 1, 2, 3]);
        assert!(d[0].is_infinite() && d[3].is_infinite());
        assert!((d[1] - 4.0 / 3.0).abs() < 1e-12);
    }
}
