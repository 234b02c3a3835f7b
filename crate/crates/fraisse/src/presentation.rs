//! Finitely presented abelian groups `Z^n / rowspace(R)` with a word problem
//! solved through a diagonal (Smith) form `U R V = D`. A vector `x` has
//! normal form `(x V)_i mod d_i`.

/// Relators are rows; each row has one coefficient per generator.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Presentation {
    pub generators: usize,
    pub relators: Vec<Vec<i64>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SmithForm {
    /// Column transform, `generators x generators`.
    v: Vec<Vec<i128>>,
    /// Diagonal entries per coordinate; 0 marks a free coordinate.
    d: Vec<i128>,
}

impl Presentation {
    pub fn new(generators: usize) -> Self {
        Presentation { generators, relators: vec![] }
    }

    pub fn relate(&mut self, row: Vec<i64>) {
        debug_assert_eq!(row.len(), self.generators);
        if row.iter().any(|&c| c != 0) {
            self.relators.push(row);
        }
    }

    pub fn unit(&self, i: usize) -> Vec<i64> {
        let mut v = vec![0; self.generators];
        v[i] = 1;
        v
    }

    pub fn smith(&self) -> SmithForm {
        let n = self.generators;
        let mut a: Vec<Vec<i128>> = self.relators.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
        let m = a.len();
        let mut v: Vec<Vec<i128>> = (0..n).map(|i| (0..n).map(|j| (i == j) as i128).collect()).collect();
        let mut d = vec![0i128; n];
        let swap_cols = |a: &mut Vec<Vec<i128>>, v: &mut Vec<Vec<i128>>, i: usize, j: usize| {
            for row in a.iter_mut().chain(v.iter_mut()) {
                row.swap(i, j);
            }
        };
        // col_j -= q * col_i
        let sub_col = |a: &mut Vec<Vec<i128>>, v: &mut Vec<Vec<i128>>, i: usize, j: usize, q: i128| {
            for row in a.iter_mut().chain(v.iter_mut()) {
                row[j] -= q * row[i];
            }
        };
        let mut t = 0;
        while t < m.min(n) {
            let pivot = (t..m)
                .flat_map(|i| (t..n).map(move |j| (i, j)))
                .filter(|&(i, j)| a[i][j] != 0)
                .min_by_key(|&(i, j)| a[i][j].abs());
            let Some((pi, pj)) = pivot else { break };
            a.swap(t, pi);
            swap_cols(&mut a, &mut v, t, pj);
            loop {
                let mut done = true;
                for i in t + 1..m {
                    let q = a[i][t].div_euclid(a[t][t]);
                    if q != 0 {
                        let (top, rest) = a.split_at_mut(i);
                        for (x, y) in rest[0].iter_mut().zip(&top[t]) {
                            *x -= q * y;
                        }
                    }
                    if a[i][t] != 0 {
                        done = false;
                    }
                }
                for j in t + 1..n {
                    let q = a[t][j].div_euclid(a[t][t]);
                    if q != 0 {
                        sub_col(&mut a, &mut v, t, j, q);
                    }
                    if a[t][j] != 0 {
                        done = false;
                    }
                }
                if done {
                    break;
                }
                let next = (t..m)
                    .map(|i| (i, t))
                    .chain((t..n).map(|j| (t, j)))
                    .filter(|&(i, j)| a[i][j] != 0)
                    .min_by_key(|&(i, j)| a[i][j].abs())
                    .unwrap();
                a.swap(t, next.0);
                swap_cols(&mut a, &mut v, t, next.1);
            }
            d[t] = a[t][t].abs();
            t += 1;
        }
        SmithForm { v, d }
    }

    /// The same word problem when every generator has order dividing the
    /// prime `q`: Gauss-Jordan elimination mod `q`, one coordinate of
    /// modulus `q` per free column.
    pub fn smith_mod_prime(&self, q: i64) -> SmithForm {
        let n = self.generators;
        let inv = |a: i64| (1..q).find(|b| a * b % q == 1).unwrap();
        // pivot column -> reduced row with a 1 there and zeros at other pivots
        let mut rows: Vec<Option<Vec<i64>>> = vec![None; n];
        for r in &self.relators {
            let mut row: Vec<i64> = r.iter().map(|&x| x.rem_euclid(q)).collect();
            for c in 0..n {
                if row[c] != 0 {
                    if let Some(pr) = &rows[c] {
                        let k = row[c];
                        for (x, y) in row.iter_mut().zip(pr) {
                            *x = (*x - k * y).rem_euclid(q);
                        }
                    }
                }
            }
            let Some(c) = row.iter().position(|&x| x != 0) else { continue };
            let k = inv(row[c]);
            row.iter_mut().for_each(|x| *x = *x * k % q);
            for other in rows.iter_mut().flatten() {
                let k = other[c];
                if k != 0 {
                    for (x, y) in other.iter_mut().zip(&row) {
                        *x = (*x - k * y).rem_euclid(q);
                    }
                }
            }
            rows[c] = Some(row);
        }
        let free: Vec<usize> = (0..n).filter(|&c| rows[c].is_none()).collect();
        let v = (0..n)
            .map(|i| {
                free.iter()
                    .map(|&f| match &rows[i] {
                        Some(r) => (-r[f]).rem_euclid(q) as i128,
                        None => (i == f) as i128,
                    })
                    .collect()
            })
            .collect();
        SmithForm { v, d: vec![q as i128; free.len()] }
    }
}

impl SmithForm {
    pub fn normal_form(&self, x: &[i64]) -> Vec<i128> {
        let n = self.d.len();
        (0..n)
            .map(|j| {
                let y: i128 = x.iter().zip(&self.v).map(|(&xi, row)| xi as i128 * row[j]).sum();
                if self.d[j] == 0 {
                    y
                } else {
                    y.rem_euclid(self.d[j])
                }
            })
            .collect()
    }

    /// Normal form of the `i`-th generator.
    pub fn generator(&self, i: usize) -> Vec<i128> {
        self.reduce(self.v[i].clone())
    }

    pub fn equal(&self, x: &[i64], y: &[i64]) -> bool {
        self.normal_form(x) == self.normal_form(y)
    }

    pub fn is_zero(&self, x: &[i64]) -> bool {
        self.normal_form(x).iter().all(|&c| c == 0)
    }

    pub fn free_rank(&self) -> usize {
        self.d.iter().filter(|&&d| d == 0).count()
    }

    /// Nontrivial cyclic factors `Z/d` (d > 1), unsorted.
    pub fn torsion(&self) -> Vec<i128> {
        self.d.iter().copied().filter(|&d| d > 1).collect()
    }

    fn reduce(&self, mut y: Vec<i128>) -> Vec<i128> {
        for (c, &d) in y.iter_mut().zip(&self.d) {
            if d != 0 {
                *c = c.rem_euclid(d);
            }
        }
        y
    }

    pub fn zero(&self) -> Vec<i128> {
        vec![0; self.d.len()]
    }

    /// Sum of two normal forms.
    pub fn add(&self, x: &[i128], y: &[i128]) -> Vec<i128> {
        x.iter()
            .zip(y)
            .zip(&self.d)
            .map(|((a, b), &d)| match a + b {
                s if d != 0 && s >= d => s - d,
                s => s,
            })
            .collect()
    }

    pub fn scale(&self, x: &[i128], k: i128) -> Vec<i128> {
        self.reduce(x.iter().map(|a| a * k).collect())
    }

    pub fn order(&self) -> Option<u128> {
        (self.free_rank() == 0).then(|| self.torsion().iter().fold(1u128, |acc, &d| acc.saturating_mul(d as u128)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    #[test]
    fn cyclic_three() {
        let mut p = Presentation::new(1);
        p.relate(vec![3]);
        let s = p.smith();
        assert!(s.is_zero(&[3]));
        assert!(s.equal(&[4], &[1]));
        assert_eq!(s.order(), Some(3));
    }

    #[test]
    fn free_rank_and_torsion() {
        let mut p = Presentation::new(3);
        p.relate(vec![2, 4, 0]);
        p.relate(vec![0, 6, 0]);
        let s = p.smith();
        assert_eq!(s.free_rank(), 1);
        let mut t = s.torsion();
        t.sort();
        assert_eq!(t, vec![2, 6]);
    }

    /// Quotient of the box prod Z/k_i by extra relators, by union-find over
    /// all box points.
    fn brute_classes(ks: &[i64], extra: &[Vec<i64>]) -> HashMap<Vec<i64>, usize> {
        let mut points = vec![vec![]];
        for &k in ks {
            points = points.into_iter().flat_map(|p: Vec<i64>| (0..k).map(move |c| [p.clone(), vec![c]].concat())).collect();
        }
        let idx: HashMap<Vec<i64>, usize> = points.iter().cloned().enumerate().map(|(i, p)| (p, i)).collect();
        let mut parent: Vec<usize> = (0..points.len()).collect();
        fn find(p: &mut Vec<usize>, x: usize) -> usize {
            if p[x] != x {
                let r = find(p, p[x]);
                p[x] = r;
            }
            p[x]
        }
        for p in &points {
            for r in extra {
                let q: Vec<i64> = p.iter().zip(r).zip(ks).map(|((a, b), k)| (a + b).rem_euclid(*k)).collect();
                let (x, y) = (find(&mut parent, idx[p]), find(&mut parent, idx[&q]));
                parent[x] = y;
            }
        }
        points.iter().map(|p| (p.clone(), find(&mut parent, idx[p]))).collect()
    }

    proptest! {
        #[test]
        fn prime_reduction_agrees_with_the_diagonal_form(
            q in prop::sample::select(vec![2i64, 3, 5]),
            rels in proptest::collection::vec(proptest::collection::vec(-4i64..5, 4), 0..5),
            x in proptest::collection::vec(-6i64..7, 4),
            y in proptest::collection::vec(-6i64..7, 4),
        ) {
            let mut p = Presentation::new(4);
            for i in 0..4 {
                let mut row = vec![0; 4];
                row[i] = q;
                p.relate(row);
            }
            for r in rels {
                p.relate(r);
            }
            let (full, fast) = (p.smith(), p.smith_mod_prime(q));
            prop_assert_eq!(full.equal(&x, &y), fast.equal(&x, &y));
            prop_assert_eq!(full.order(), fast.order());
            for i in 0..4 {
                prop_assert_eq!(fast.generator(i), fast.normal_form(&p.unit(i)));
            }
        }

        #[test]
        fn word_problem_matches_brute_force(
            ks in proptest::collection::vec(1i64..5, 1..4),
            extra in proptest::collection::vec(proptest::collection::vec(-3i64..4, 3), 0..3),
            x in proptest::collection::vec(-6i64..7, 3),
            y in proptest::collection::vec(-6i64..7, 3),
        ) {
            let n = ks.len();
            let extra: Vec<Vec<i64>> = extra.into_iter().map(|r| r[..n].to_vec()).collect();
            let mut p = Presentation::new(n);
            for (i, &k) in ks.iter().enumerate() {
                let mut row = vec![0; n];
                row[i] = k;
                p.relate(row);
            }
            for r in &extra {
                p.relate(r.clone());
            }
            let s = p.smith();
            let classes = brute_classes(&ks, &extra);
            let reduce = |v: &[i64]| v[..n].iter().zip(&ks).map(|(a, k)| a.rem_euclid(*k)).collect::<Vec<_>>();
            let (cx, cy) = (classes[&reduce(&x)], classes[&reduce(&y)]);
            prop_assert_eq!(s.equal(&x[..n], &y[..n]), cx == cy);
            let distinct: std::collections::HashSet<usize> = classes.values().copied().collect();
            prop_assert_eq!(s.order(), Some(distinct.len() as u128));
        }
    }
}
