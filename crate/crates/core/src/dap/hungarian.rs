//! O(n³) Hungarian method (shortest augmenting paths with potentials).

use serde::{Deserialize, Serialize};

use super::{DapError, Sense};

/// An optimal assignment `i ↦ π(i)` together with its objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Permutation2D {
    /// 1-based image of each row, `pi[i-1] = π(i)`.
    pub pi: Vec<usize>,
    pub value: f64,
}

impl Permutation2D {
    pub fn n(&self) -> usize {
        self.pi.len()
    }

    pub fn is_bijection(&self) -> bool {
        let n = self.pi.len();
        let mut seen = vec![false; n];
        self.pi
            .iter()
            .all(|&j| (1..=n).contains(&j) && !std::mem::replace(&mut seen[j - 1], true))
    }
}

/// Solves the 2-dimensional assignment problem exactly.
pub fn solve_hungarian(costs: &[Vec<f64>], sense: Sense) -> Result<Permutation2D, DapError> {
    let n = costs.len();
    if n == 0 || costs.iter().any(|r| r.len() != n) {
        return Err(DapError::NotSquare);
    }
    if let Some(index) = costs.iter().flatten().position(|a| !a.is_finite()) {
        return Err(DapError::NonFiniteCost { index });
    }
    let sign = sense.sign();
    let a = |i: usize, j: usize| sign * costs[i - 1][j - 1];

    // 1-based arrays; column 0 is a virtual source.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = a(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
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

    let mut pi = vec![0usize; n];
    for j in 1..=n {
        pi[owner[j] - 1] = j;
    }
    let value = pi.iter().enumerate().map(|(i, &j)| costs[i][j - 1]).sum();
    Ok(Permutation2D { pi, value })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(rows: &[&[f64]]) -> Permutation2D {
        let owned: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
        solve_hungarian(&owned, Sense::Minimize).unwrap()
    }

    #[test]
    fn off_diagonal_cheaper() {
        let p = solve(&[&[4.0, 1.0], &[2.0, 3.0]]);
        assert_eq!(p.pi, vec![2, 1]);
        assert_eq!(p.value, 3.0);
    }

    #[test]
    fn zero_diagonal() {
        let p = solve(&[&[0.0, 1.0], &[1.0, 0.0]]);
        assert_eq!(p.pi, vec![1, 2]);
        assert_eq!(p.value, 0.0);
    }

    #[test]
    fn identity_cheaper() {
        let p = solve(&[&[1.0, 2.0], &[3.0, 0.0]]);
        assert_eq!(p.pi, vec![1, 2]);
        assert_eq!(p.value, 1.0);
    }

    #[test]
    fn maximize() {
        let owned = vec![vec![4.0, 1.0], vec![2.0, 3.0]];
        let p = solve_hungarian(&owned, Sense::Maximize).unwrap();
        assert_eq!(p.pi, vec![1, 2]);
        assert_eq!(p.value, 7.0);
        assert!(p.is_bijection());
    }

    #[test]
    fn malformed() {
        assert!(solve_hungarian(&[], Sense::Minimize).is_err());
        assert!(solve_hungarian(&[vec![1.0, 2.0]], Sense::Minimize).is_err());
        assert!(solve_hungarian(&[vec![f64::NAN]], Sense::Minimize).is_err());
    }
}
