//! Exact long-run distribution of a finite continuous-rate chain started
//! from the uniform distribution.
//!
//! Recurrent behaviour is split into closed communicating classes. Each class
//! gets its own stationary vector (GTH elimination, subtraction-free), weighted
//! by the probability that a uniform start is absorbed into it.

use crate::scalar::Scalar;

/// `rates` is row-major `m×m` with nonnegative off-diagonal entries; the
/// diagonal is ignored. Returns the limit of uniform-start power iteration on
/// the uniformised chain.
pub(crate) fn uniform_start_limit<S: Scalar>(rates: &[S], m: usize) -> Vec<S> {
    let rate = |i: usize, j: usize| if i == j { S::zero() } else { rates[i * m + j] };
    let comp = strongly_connected(m, |i, j| rate(i, j) > S::zero());
    let n_comp = comp.iter().copied().max().map_or(0, |c| c + 1);

    let mut closed = vec![true; n_comp];
    for i in 0..m {
        for j in 0..m {
            if rate(i, j) > S::zero() && comp[i] != comp[j] {
                closed[comp[i]] = false;
            }
        }
    }

    let transient: Vec<usize> = (0..m).filter(|&i| !closed[comp[i]]).collect();
    let mut t_pos = vec![usize::MAX; m];
    for (k, &i) in transient.iter().enumerate() {
        t_pos[i] = k;
    }

    let inv_m = S::one() / S::from_count(m as u64);
    let mut w = vec![S::zero(); m];
    for c in (0..n_comp).filter(|&c| closed[c]) {
        let members: Vec<usize> = (0..m).filter(|&i| comp[i] == c).collect();

        // mass entering class c from a uniform start
        let mut mass = S::from_count(members.len() as u64) * inv_m;
        if !transient.is_empty() {
            let h = absorption(&transient, &t_pos, m, &rate, &members);
            mass += h.iter().copied().sum::<S>() * inv_m;
        }
        if mass <= S::zero() {
            continue;
        }

        let pi = gth(&members, &rate);
        for (&i, &p) in members.iter().zip(&pi) {
            w[i] = mass * p;
        }
    }
    let total: S = w.iter().copied().sum();
    for x in w.iter_mut() {
        *x /= total;
    }
    w
}

/// Probability of absorption into `target` from each transient state.
fn absorption<S: Scalar>(
    transient: &[usize],
    t_pos: &[usize],
    m: usize,
    rate: &impl Fn(usize, usize) -> S,
    target: &[usize],
) -> Vec<S> {
    let k = transient.len();
    // S_i h_i − Σ_{j∈T} r_ij h_j = Σ_{c∈target} r_ic
    let mut a = vec![S::zero(); k * k];
    let mut b = vec![S::zero(); k];
    for (row, &i) in transient.iter().enumerate() {
        let out: S = (0..m).map(|j| rate(i, j)).sum();
        a[row * k + row] = out;
        for (col, &j) in transient.iter().enumerate() {
            if col != row {
                a[row * k + col] -= rate(i, j);
            }
        }
        b[row] = target.iter().map(|&c| rate(i, c)).sum();
    }
    debug_assert!(transient.iter().all(|&i| t_pos[i] < k));
    solve(&mut a, &mut b, k);
    b.iter().map(|x| x.max(S::zero()).min(S::one())).collect()
}

/// Gaussian elimination with partial pivoting; solution left in `b`.
fn solve<S: Scalar>(a: &mut [S], b: &mut [S], k: usize) {
    for col in 0..k {
        let pivot = (col..k)
            .max_by(|&x, &y| a[x * k + col].abs().partial_cmp(&a[y * k + col].abs()).unwrap())
            .unwrap();
        if pivot != col {
            for j in 0..k {
                a.swap(col * k + j, pivot * k + j);
            }
            b.swap(col, pivot);
        }
        let d = a[col * k + col];
        if d == S::zero() {
            continue;
        }
        for row in col + 1..k {
            let f = a[row * k + col] / d;
            if f == S::zero() {
                continue;
            }
            for j in col..k {
                let v = a[col * k + j];
                a[row * k + j] -= f * v;
            }
            let v = b[col];
            b[row] -= f * v;
        }
    }
    for col in (0..k).rev() {
        let mut acc = b[col];
        for j in col + 1..k {
            acc -= a[col * k + j] * b[j];
        }
        let d = a[col * k + col];
        b[col] = if d == S::zero() { S::zero() } else { acc / d };
    }
}

/// Stationary distribution of an irreducible class by GTH state reduction.
fn gth<S: Scalar>(members: &[usize], rate: &impl Fn(usize, usize) -> S) -> Vec<S> {
    let k = members.len();
    if k == 1 {
        return vec![S::one()];
    }
    let mut p = vec![S::zero(); k * k];
    for (a, &i) in members.iter().enumerate() {
        for (b, &j) in members.iter().enumerate() {
            if a != b {
                p[a * k + b] = rate(i, j);
            }
        }
    }
    for l in (1..k).rev() {
        let s: S = (0..l).map(|j| p[l * k + j]).sum();
        if s <= S::zero() {
            continue;
        }
        for i in 0..l {
            let pil = p[i * k + l];
            if pil == S::zero() {
                continue;
            }
            for j in 0..l {
                if i != j {
                    let plj = p[l * k + j];
                    p[i * k + j] += pil * plj / s;
                }
            }
        }
    }
    let mut pi = vec![S::zero(); k];
    pi[0] = S::one();
    for l in 1..k {
        let s: S = (0..l).map(|j| p[l * k + j]).sum();
        let inflow: S = (0..l).map(|i| pi[i] * p[i * k + l]).sum();
        pi[l] = if s > S::zero() { inflow / s } else { S::zero() };
    }
    let total: S = pi.iter().copied().sum();
    pi.iter().map(|&x| x / total).collect()
}

/// Tarjan's algorithm; returns a component id per vertex.
fn strongly_connected(m: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<usize> {
    struct Tarjan<'a, F: Fn(usize, usize) -> bool> {
        m: usize,
        edge: &'a F,
        index: Vec<usize>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        comp: Vec<usize>,
        next_index: usize,
        next_comp: usize,
    }

    impl<F: Fn(usize, usize) -> bool> Tarjan<'_, F> {
        fn visit(&mut self, v: usize) {
            self.index[v] = self.next_index;
            self.low[v] = self.next_index;
            self.next_index += 1;
            self.stack.push(v);
            self.on_stack[v] = true;
            for u in 0..self.m {
                if u == v || !(self.edge)(v, u) {
                    continue;
                }
                if self.index[u] == usize::MAX {
                    self.visit(u);
                    self.low[v] = self.low[v].min(self.low[u]);
                } else if self.on_stack[u] {
                    self.low[v] = self.low[v].min(self.index[u]);
                }
            }
            if self.low[v] == self.index[v] {
                loop {
                    let u = self.stack.pop().unwrap();
                    self.on_stack[u] = false;
                    self.comp[u] = self.next_comp;
                    if u == v {
                        break;
                    }
                }
                self.next_comp += 1;
            }
        }
    }

    let mut t = Tarjan {
        m,
        edge: &edge,
        index: vec![usize::MAX; m],
        low: vec![0; m],
        on_stack: vec![false; m],
        stack: Vec::with_capacity(m),
        comp: vec![usize::MAX; m],
        next_index: 0,
        next_comp: 0,
    };
    for v in 0..m {
        if t.index[v] == usize::MAX {
            t.visit(v);
        }
    }
    t.comp
}
