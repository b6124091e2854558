//! Sparse matrices and the iterative solvers behind the PDE lab: Galerkin multigrid on a
//! square lattice, preconditioned CG, preconditioned MINRES and single-vector LOBPCG.

use crate::error::{Error, Result};

/// Compressed sparse rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    pub n_rows: usize,
    pub n_cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl Csr {
    /// Duplicate entries are summed; columns come out sorted within each row.
    pub fn from_triplets(n_rows: usize, n_cols: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut indptr = vec![0usize; n_rows + 1];
        let mut indices = Vec::with_capacity(trip.len());
        let mut data: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in trip {
            assert!(i < n_rows && j < n_cols, "triplet out of range");
            if last == Some((i, j)) {
                *data.last_mut().expect("previous entry") += v;
                continue;
            }
            indices.push(j);
            data.push(v);
            indptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n_rows {
            indptr[i + 1] += indptr[i];
        }
        Csr { n_rows, n_cols, indptr, indices, data }
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.data[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate().take(self.n_rows) {
            let mut s = 0.0;
            for k in self.indptr[i]..self.indptr[i + 1] {
                s += self.data[k] * x[self.indices[k]];
            }
            *yi = s;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_rows];
        self.matvec(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Csr {
        let mut count = vec![0usize; self.n_cols + 1];
        for &j in &self.indices {
            count[j + 1] += 1;
        }
        for j in 0..self.n_cols {
            count[j + 1] += count[j];
        }
        let mut next = count.clone();
        let mut indices = vec![0; self.nnz()];
        let mut data = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                let k = next[j];
                indices[k] = i;
                data[k] = v;
                next[j] += 1;
            }
        }
        Csr { n_rows: self.n_cols, n_cols: self.n_rows, indptr: count, indices, data }
    }

    pub fn matmul(&self, b: &Csr) -> Csr {
        assert_eq!(self.n_cols, b.n_rows);
        let mut acc = vec![0.0; b.n_cols];
        let mut seen = vec![usize::MAX; b.n_cols];
        let mut cols: Vec<usize> = Vec::new();
        let mut indptr = vec![0usize; self.n_rows + 1];
        let mut indices = Vec::new();
        let mut data = Vec::new();
        for i in 0..self.n_rows {
            cols.clear();
            for (k, a) in self.row(i) {
                for (j, v) in b.row(k) {
                    if seen[j] != i {
                        seen[j] = i;
                        acc[j] = 0.0;
                        cols.push(j);
                    }
                    acc[j] += a * v;
                }
            }
            cols.sort_unstable();
            for &j in &cols {
                indices.push(j);
                data.push(acc[j]);
            }
            indptr[i + 1] = indices.len();
        }
        Csr { n_rows: self.n_rows, n_cols: b.n_cols, indptr, indices, data }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, i)).collect()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j)).abs());
            }
        }
        worst
    }

    /// `self + diag(d)`.
    pub fn add_diagonal(&self, d: &[f64]) -> Csr {
        let mut trip: Vec<(usize, usize, f64)> = Vec::with_capacity(self.nnz() + self.n_rows);
        for i in 0..self.n_rows {
            trip.extend(self.row(i).map(|(j, v)| (i, j, v)));
            trip.push((i, i, d[i]));
        }
        Csr::from_triplets(self.n_rows, self.n_cols, trip)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dense Cholesky factor `L` (row-major, lower triangle).
#[derive(Clone, Debug)]
pub struct DenseCholesky {
    n: usize,
    l: Vec<f64>,
}

impl DenseCholesky {
    pub fn new(a: &Csr) -> Result<Self> {
        let n = a.n_rows;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                l[i * n + j] = v;
            }
        }
        for j in 0..n {
            let mut d = l[j * n + j];
            for k in 0..j {
                d -= l[j * n + k] * l[j * n + k];
            }
            if !(d > 0.0) {
                return Err(Error::Numerical("coarse matrix is not positive definite".into()));
            }
            let d = d.sqrt();
            l[j * n + j] = d;
            for i in j + 1..n {
                let mut s = l[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k];
                }
                l[i * n + j] = s / d;
            }
            for i in 0..j {
                l[i * n + j] = 0.0;
            }
        }
        Ok(DenseCholesky { n, l })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * n + k] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * y[k];
            }
            y[i] = s / self.l[i * n + i];
        }
        y
    }
}

struct Level {
    a: Csr,
    diag: Vec<f64>,
    p: Csr,
    r: Csr,
}

/// Symmetric V-cycle (forward Gauss–Seidel before, backward after, exact coarse solve)
/// with bilinear prolongation on the lattice and Galerkin coarse operators.
pub struct Multigrid {
    levels: Vec<Level>,
    coarse_a: Csr,
    coarse: DenseCholesky,
    pub sweeps: usize,
}

/// Unknown `k` sits at lattice position `nodes[k]` of an `m × m` lattice.
pub fn lattice_prolongation(m: usize, nodes: &[(usize, usize)]) -> (Csr, usize, Vec<(usize, usize)>) {
    let mc = m / 2 + 1;
    let mut id = vec![usize::MAX; mc * mc];
    let mut coarse_nodes = Vec::new();
    let mut trip = Vec::with_capacity(nodes.len() * 4);
    let weights = |i: usize| -> Vec<(usize, f64)> {
        if i % 2 == 0 {
            vec![(i / 2, 1.0)]
        } else {
            vec![((i - 1) / 2, 0.5), ((i + 1) / 2, 0.5)]
        }
    };
    for (k, &(i, j)) in nodes.iter().enumerate() {
        for (ci, wi) in weights(i) {
            for &(cj, wj) in &weights(j) {
                let slot = ci * mc + cj;
                if id[slot] == usize::MAX {
                    id[slot] = coarse_nodes.len();
                    coarse_nodes.push((ci, cj));
                }
                trip.push((k, id[slot], wi * wj));
            }
        }
    }
    let nc = coarse_nodes.len();
    (Csr::from_triplets(nodes.len(), nc, trip), mc, coarse_nodes)
}

impl Multigrid {
    pub fn new(a: &Csr, m: usize, nodes: &[(usize, usize)]) -> Result<Self> {
        let mut levels = Vec::new();
        let mut a_cur = a.clone();
        let mut m_cur = m;
        let mut nodes_cur = nodes.to_vec();
        while a_cur.n_rows > 600 && m_cur > 3 {
            let (p, mc, coarse_nodes) = lattice_prolongation(m_cur, &nodes_cur);
            let r = p.transpose();
            let ac = r.matmul(&a_cur.matmul(&p));
            let diag = a_cur.diagonal();
            levels.push(Level { a: a_cur, diag, p, r });
            a_cur = ac;
            m_cur = mc;
            nodes_cur = coarse_nodes;
        }
        let coarse = DenseCholesky::new(&a_cur)?;
        Ok(Multigrid { levels, coarse_a: a_cur, coarse, sweeps: 1 })
    }

    pub fn depth(&self) -> usize {
        self.levels.len() + 1
    }

    pub fn coarse_size(&self) -> usize {
        self.coarse_a.n_rows
    }

    /// `x ≈ A⁻¹ b` by one V-cycle from zero.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        self.cycle(0, b)
    }

    fn cycle(&self, l: usize, b: &[f64]) -> Vec<f64> {
        if l == self.levels.len() {
            return self.coarse.solve(b);
        }
        let lev = &self.levels[l];
        let n = b.len();
        let mut x = vec![0.0; n];
        for _ in 0..self.sweeps {
            gauss_seidel(&lev.a, &lev.diag, b, &mut x, true);
        }
        let ax = lev.a.mul(&x);
        let res: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rc = lev.r.mul(&res);
        let ec = self.cycle(l + 1, &rc);
        let e = lev.p.mul(&ec);
        axpy(1.0, &e, &mut x);
        for _ in 0..self.sweeps {
            gauss_seidel(&lev.a, &lev.diag, b, &mut x, false);
        }
        x
    }
}

fn gauss_seidel(a: &Csr, diag: &[f64], b: &[f64], x: &mut [f64], forward: bool) {
    let n = a.n_rows;
    let mut step = |i: usize| {
        let mut s = b[i];
        for (j, v) in a.row(i) {
            if j != i {
                s -= v * x[j];
            }
        }
        x[i] = s / diag[i];
    };
    if forward {
        (0..n).for_each(&mut step);
    } else {
        (0..n).rev().for_each(&mut step);
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

/// Preconditioned CG for SPD `A`, relative residual `tol` in the Euclidean norm.
pub fn pcg<P: Fn(&[f64]) -> Vec<f64>>(a: &Csr, b: &[f64], x: &mut [f64], prec: P, tol: f64, max_iter: usize) -> Result<SolveStats> {
    let bn = norm(b).max(f64::MIN_POSITIVE);
    let ax = a.mul(x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z = prec(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 0..max_iter {
        let rn = norm(&r);
        if rn <= tol * bn {
            return Ok(SolveStats { iterations: it, residual: rn / bn });
        }
        let ap = a.mul(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Numerical("CG met a non-positive curvature direction".into()));
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        z = prec(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    Err(Error::NoConvergence(format!("CG did not reach {tol:e} in {max_iter} iterations")))
}

/// Preconditioned MINRES for symmetric (possibly indefinite) `A` with an SPD
/// preconditioner; stops when the preconditioned residual drops by `tol`.
pub fn minres<F: Fn(&[f64]) -> Vec<f64>, P: Fn(&[f64]) -> Vec<f64>>(
    apply_a: F,
    b: &[f64],
    prec: P,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveStats)> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let mut r1 = b.to_vec();
    let mut y = prec(&r1);
    let beta1 = dot(&r1, &y);
    if beta1 < 0.0 {
        return Err(Error::Numerical("preconditioner is not positive definite".into()));
    }
    let beta1 = beta1.sqrt();
    if beta1 == 0.0 {
        return Ok((x, SolveStats { iterations: 0, residual: 0.0 }));
    }
    let mut r2 = r1.clone();
    let (mut oldb, mut beta, mut dbar, mut epsln, mut phibar) = (0.0, beta1, 0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    for itn in 1..=max_iter {
        let s = 1.0 / beta;
        let v: Vec<f64> = y.iter().map(|yi| s * yi).collect();
        y = apply_a(&v);
        if itn >= 2 {
            axpy(-beta / oldb, &r1, &mut y);
        }
        let alfa = dot(&v, &y);
        axpy(-alfa / beta, &r2, &mut y);
        r1 = std::mem::replace(&mut r2, y);
        y = prec(&r2);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(Error::Numerical("preconditioner is not positive definite".into()));
        }
        beta = bb.sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;
        let w1 = std::mem::replace(&mut w2, w);
        w = v.iter().zip(&w1).zip(&w2).map(|((vi, a), b)| (vi - oldeps * a - delta * b) / gamma).collect();
        axpy(phi, &w, &mut x);
        if phibar <= tol * beta1 || beta == 0.0 {
            return Ok((x, SolveStats { iterations: itn, residual: phibar / beta1 }));
        }
    }
    Err(Error::NoConvergence(format!("MINRES did not reach {tol:e} in {max_iter} iterations")))
}

/// Smallest eigenpair of `A x = λ W x` with `W` a positive diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenPair {
    pub lambda: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
    /// `‖Ax − λWx‖_{W⁻¹} / λ`.
    pub residual: f64,
}

/// Single-vector LOBPCG; the vector is `W`-normalized and oriented to have a positive sum.
pub fn lobpcg<P: Fn(&[f64]) -> Vec<f64>>(a: &Csr, wdiag: &[f64], x0: &[f64], prec: P, tol: f64, max_iter: usize) -> Result<EigenPair> {
    let n = x0.len();
    let wdot = |u: &[f64], v: &[f64]| -> f64 { u.iter().zip(v).zip(wdiag).map(|((a, b), w)| a * b * w).sum() };
    let normalize = |u: &mut Vec<f64>, au: &mut Vec<f64>| -> f64 {
        let s = wdot(u, u).sqrt();
        if s > 0.0 {
            u.iter_mut().for_each(|v| *v /= s);
            au.iter_mut().for_each(|v| *v /= s);
        }
        s
    };
    let mut x = x0.to_vec();
    let mut ax = a.mul(&x);
    if normalize(&mut x, &mut ax) == 0.0 {
        return Err(Error::Numerical("zero start vector".into()));
    }
    let mut p: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut lambda = dot(&x, &ax);
    for it in 0..max_iter {
        let r: Vec<f64> = (0..n).map(|i| ax[i] - lambda * wdiag[i] * x[i]).collect();
        let rn = r.iter().zip(wdiag).map(|(ri, w)| ri * ri / w).sum::<f64>().sqrt();
        if rn <= tol * lambda.abs() {
            if x.iter().sum::<f64>() < 0.0 {
                x.iter_mut().for_each(|v| *v = -*v);
            }
            return Ok(EigenPair { lambda, vector: x, iterations: it, residual: rn / lambda.abs() });
        }
        // W-orthonormal search basis [x, T r, p]
        let mut basis: Vec<(Vec<f64>, Vec<f64>)> = vec![(x.clone(), ax.clone())];
        let w = prec(&r);
        let aw = a.mul(&w);
        let mut cands = vec![(w, aw)];
        if let Some(pp) = p.take() {
            cands.push(pp);
        }
        for (mut u, mut au) in cands {
            let before = wdot(&u, &u).sqrt();
            for _ in 0..2 {
                for (b, ab) in &basis {
                    let c = wdot(&u, b);
                    axpy(-c, b, &mut u);
                    axpy(-c, ab, &mut au);
                }
            }
            let s = normalize(&mut u, &mut au);
            if s > 1e-10 * before {
                basis.push((u, au));
            }
        }
        let k = basis.len();
        let mut h = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                h[i][j] = dot(&basis[i].0, &basis[j].1);
            }
        }
        for i in 0..k {
            for j in 0..i {
                let s = 0.5 * (h[i][j] + h[j][i]);
                h[i][j] = s;
                h[j][i] = s;
            }
        }
        let (vals, vecs) = jacobi_eigen(&h);
        let imin = (0..k).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).expect("nonempty");
        let c: Vec<f64> = (0..k).map(|i| vecs[i][imin]).collect();
        let mut xn = vec![0.0; n];
        let mut axn = vec![0.0; n];
        let mut pn = vec![0.0; n];
        let mut apn = vec![0.0; n];
        for (i, (b, ab)) in basis.iter().enumerate() {
            axpy(c[i], b, &mut xn);
            axpy(c[i], ab, &mut axn);
            if i > 0 {
                axpy(c[i], b, &mut pn);
                axpy(c[i], ab, &mut apn);
            }
        }
        normalize(&mut xn, &mut axn);
        x = xn;
        ax = axn;
        lambda = dot(&x, &ax);
        if k > 1 {
            p = Some((pn, apn));
        }
    }
    Err(Error::NoConvergence(format!("eigen solver did not reach {tol:e} in {max_iter} iterations")))
}

/// Cyclic Jacobi for a small symmetric matrix; eigenvectors are the columns.
pub fn jacobi_eigen(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut v = vec![vec![0.0; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        let scale: f64 = (0..n).map(|i| a[i][i] * a[i][i]).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-30 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q] == 0.0 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplace_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn transpose_and_matmul() {
        let a = Csr::from_triplets(2, 3, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (0, 2, 1.0)]);
        assert_eq!(a.get(0, 2), 3.0);
        let at = a.transpose();
        assert_eq!(at.get(2, 0), 3.0);
        let aat = a.matmul(&at);
        assert_eq!(aat.get(0, 0), 10.0);
        assert_eq!(aat.get(1, 1), 9.0);
        assert_eq!(aat.get(0, 1), 0.0);
    }

    #[test]
    fn solvers_on_1d_laplacian() {
        let n = 50;
        let a = laplace_1d(n);
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let chol = DenseCholesky::new(&a).unwrap();
        let exact = chol.solve(&b);
        pcg(&a, &b, &mut x, |r| r.to_vec(), 1e-12, 500).unwrap();
        for i in 0..n {
            assert!((x[i] - exact[i]).abs() < 1e-8);
        }
        // indefinite shift
        let sh = a.add_diagonal(&vec![-0.5; n]);
        let (y, _) = minres(|v| sh.mul(v), &b, |r| r.to_vec(), 1e-12, 500).unwrap();
        let back = sh.mul(&y);
        for i in 0..n {
            assert!((back[i] - 1.0).abs() < 1e-8);
        }
        let w = vec![1.0; n];
        let e = lobpcg(&a, &w, &vec![1.0; n], |r| chol.solve(r), 1e-10, 500).unwrap();
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((e.lambda - exact).abs() < 1e-12);
    }

    #[test]
    fn jacobi_small() {
        let (vals, vecs) = jacobi_eigen(&[vec![2.0, 1.0], vec![1.0, 2.0]]);
        let mut s = vals.clone();
        s.sort_by(f64::total_cmp);
        assert!((s[0] - 1.0).abs() < 1e-14 && (s[1] - 3.0).abs() < 1e-14);
        let i = if vals[0] < vals[1] { 0 } else { 1 };
        assert!((vecs[0][i] + vecs[1][i]).abs() < 1e-14);
    }
}
