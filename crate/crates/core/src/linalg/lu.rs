//! Left-looking sparse LU with threshold partial pivoting.
//!
//! Columns are processed in a fill-reducing order; each column of `L` and `U`
//! is obtained from a sparse triangular solve whose nonzero pattern is found
//! by depth-first search in the graph of `L`.

use num_traits::Float;

use super::ordering::{self, Graph, Ordering};
use super::sparse::SparseMatrix;
use super::LinalgError;

/// Relative threshold below which an off-diagonal pivot is preferred over the
/// diagonal entry.
const DIAG_PREFERENCE: f64 = 0.1;
/// Pivots smaller than this times max|A| are rejected.
const SINGULAR_REL: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct Factorization<T> {
    n: usize,
    /// Column permutation: step k eliminates original column `q[k]`.
    q: Vec<usize>,
    /// Row permutation: original row i became pivot row `pinv[i]`.
    pinv: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<u32>,
    lx: Vec<T>,
    up: Vec<usize>,
    ui: Vec<u32>,
    ux: Vec<T>,
}

pub fn factorize<T: Float>(a: &SparseMatrix<T>) -> Result<Factorization<T>, LinalgError> {
    factorize_with(a, Ordering::default())
}

pub fn factorize_with<T: Float>(
    a: &SparseMatrix<T>,
    kind: Ordering,
) -> Result<Factorization<T>, LinalgError> {
    if a.n_rows() != a.n_cols() {
        return Err(LinalgError::NotSquare {
            n_rows: a.n_rows(),
            n_cols: a.n_cols(),
        });
    }
    let n = a.n_rows();
    let (offs, adj) = a.symmetric_adjacency();
    let q = ordering::compute(kind, &Graph::new(&offs, &adj));
    drop((offs, adj));

    // column access to A
    let at = a.transpose();
    let ap = at.row_offsets();
    let ai = at.col_indices();
    let ax = at.values();

    let tiny = T::from(SINGULAR_REL).unwrap() * a.max_abs();
    let pref = T::from(DIAG_PREFERENCE).unwrap();

    const NONE: usize = usize::MAX;
    let mut pinv = vec![NONE; n];
    let guess = 4 * a.nnz() + n;
    let mut lp = Vec::with_capacity(n + 1);
    let mut li: Vec<u32> = Vec::with_capacity(guess);
    let mut lx: Vec<T> = Vec::with_capacity(guess);
    let mut up = Vec::with_capacity(n + 1);
    let mut ui: Vec<u32> = Vec::with_capacity(guess);
    let mut ux: Vec<T> = Vec::with_capacity(guess);

    let mut x = vec![T::zero(); n];
    let mut xi = vec![0usize; n];
    let mut stack = vec![0usize; n];
    let mut pstack = vec![0usize; n];
    let mut mark = vec![0usize; n];

    for k in 0..n {
        lp.push(li.len());
        up.push(ui.len());
        let col = q[k];
        let stamp = k + 1;

        // nonzero pattern of L \ A(:, col) in topological order xi[top..n]
        let mut top = n;
        for p in ap[col]..ap[col + 1] {
            let start = ai[p];
            if mark[start] == stamp {
                continue;
            }
            let mut head = 0usize;
            stack[0] = start;
            loop {
                let j = stack[head];
                let jc = pinv[j];
                if mark[j] != stamp {
                    mark[j] = stamp;
                    pstack[head] = if jc == NONE { 0 } else { lp[jc] };
                }
                let end = if jc == NONE { 0 } else { lp[jc + 1] };
                let mut done = true;
                let mut p2 = pstack[head];
                while p2 < end {
                    let i = li[p2] as usize;
                    p2 += 1;
                    if mark[i] != stamp {
                        pstack[head] = p2;
                        head += 1;
                        stack[head] = i;
                        done = false;
                        break;
                    }
                }
                if done {
                    top -= 1;
                    xi[top] = j;
                    if head == 0 {
                        break;
                    }
                    head -= 1;
                }
            }
        }

        // numeric sparse triangular solve
        for &i in &xi[top..n] {
            x[i] = T::zero();
        }
        for p in ap[col]..ap[col + 1] {
            x[ai[p]] = ax[p];
        }
        for px in top..n {
            let j = xi[px];
            let jc = pinv[j];
            if jc == NONE {
                continue;
            }
            let xj = x[j];
            for p in lp[jc] + 1..lp[jc + 1] {
                let r = li[p] as usize;
                x[r] = x[r] - lx[p] * xj;
            }
        }

        // choose pivot among rows not yet pivotal
        let mut ipiv = NONE;
        let mut best = -T::one();
        for &i in &xi[top..n] {
            if pinv[i] == NONE {
                let t = x[i].abs();
                if t > best {
                    best = t;
                    ipiv = i;
                }
            } else {
                ui.push(pinv[i] as u32);
                ux.push(x[i]);
            }
        }
        if ipiv == NONE || best <= tiny {
            return Err(LinalgError::SingularMatrix { row: col });
        }
        if pinv[col] == NONE && mark[col] == stamp && x[col].abs() >= best * pref {
            ipiv = col;
        }
        let pivot = x[ipiv];
        ui.push(k as u32);
        ux.push(pivot);
        pinv[ipiv] = k;
        li.push(ipiv as u32);
        lx.push(T::one());
        for &i in &xi[top..n] {
            if pinv[i] == NONE {
                li.push(i as u32);
                lx.push(x[i] / pivot);
            }
            x[i] = T::zero();
        }
    }
    lp.push(li.len());
    up.push(ui.len());
    for r in li.iter_mut() {
        *r = pinv[*r as usize] as u32;
    }
    li.shrink_to_fit();
    lx.shrink_to_fit();
    ui.shrink_to_fit();
    ux.shrink_to_fit();

    Ok(Factorization {
        n,
        q,
        pinv,
        lp,
        li,
        lx,
        up,
        ui,
        ux,
    })
}

impl<T: Float> Factorization<T> {
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Stored entries of `L` and `U`.
    pub fn fill(&self) -> usize {
        self.li.len() + self.ui.len()
    }

    pub fn solve(&self, b: &[T]) -> Result<Vec<T>, LinalgError> {
        if b.len() != self.n {
            return Err(LinalgError::DimensionMismatch {
                expected: self.n,
                found: b.len(),
            });
        }
        let mut x = vec![T::zero(); self.n];
        for (i, &bi) in b.iter().enumerate() {
            x[self.pinv[i]] = bi;
        }
        for j in 0..self.n {
            let xj = x[j];
            if xj == T::zero() {
                continue;
            }
            for p in self.lp[j] + 1..self.lp[j + 1] {
                let r = self.li[p] as usize;
                x[r] = x[r] - self.lx[p] * xj;
            }
        }
        for j in (0..self.n).rev() {
            let d = self.up[j + 1] - 1;
            x[j] = x[j] / self.ux[d];
            let xj = x[j];
            if xj == T::zero() {
                continue;
            }
            for p in self.up[j]..d {
                let r = self.ui[p] as usize;
                x[r] = x[r] - self.ux[p] * xj;
            }
        }
        let mut out = vec![T::zero(); self.n];
        for k in 0..self.n {
            out[self.q[k]] = x[k];
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn residual(a: &SparseMatrix<f64>, x: &[f64], b: &[f64]) -> f64 {
        let ax = a.mul_vec(x).unwrap();
        let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
        let nb: f64 = b.iter().map(|v| v * v).sum();
        (r / nb.max(1e-300)).sqrt()
    }

    fn random_spd(n: usize, seed: u64) -> SparseMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut trip = Vec::new();
        let mut diag = vec![0.0; n];
        for i in 0..n {
            for _ in 0..3 {
                let j = rng.gen_range(0..n);
                if j == i {
                    continue;
                }
                let v: f64 = rng.gen_range(-1.0..1.0);
                trip.push((i, j, v));
                trip.push((j, i, v));
                diag[i] += v.abs();
                diag[j] += v.abs();
            }
        }
        for (i, d) in diag.into_iter().enumerate() {
            trip.push((i, i, d + 1.0));
        }
        SparseMatrix::from_triplets(n, n, &trip).unwrap()
    }

    #[test]
    fn identity_solve() {
        let f = factorize(&SparseMatrix::<f64>::identity(3)).unwrap();
        assert_eq!(f.solve(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(f.solve(&[0.0; 3]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn permutation_forces_pivoting() {
        let a = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        let f = factorize(&a).unwrap();
        assert_eq!(f.solve(&[3.0, 7.0]).unwrap(), vec![7.0, 3.0]);
    }

    #[test]
    fn diagonal_solve() {
        let a = SparseMatrix::from_dense(&[vec![2.0, 0.0], vec![0.0, 4.0]]);
        let f = factorize(&a).unwrap();
        assert_eq!(f.solve(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
    }

    #[test]
    fn random_spd_multiply_back() {
        let a = random_spd(50, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let b: Vec<f64> = (0..50).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for kind in [
            Ordering::Natural,
            Ordering::ReverseCuthillMckee,
            Ordering::NestedDissection,
        ] {
            let f = factorize_with(&a, kind).unwrap();
            let x = f.solve(&b).unwrap();
            assert!(residual(&a, &x, &b) <= 1e-10, "{kind:?}");
        }
    }

    #[test]
    fn indefinite_saddle_point() {
        // [[M, B^T], [B, 0]] with M = I(3), B = [1 1 0; 0 1 1]
        let a = SparseMatrix::from_dense(&[
            vec![1.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0, 1.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0, 0.0],
        ]);
        let b = [1.0, -2.0, 0.5, 3.0, -1.0];
        let x = factorize(&a).unwrap().solve(&b).unwrap();
        assert!(residual(&a, &x, &b) <= 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(
            factorize(&a),
            Err(LinalgError::SingularMatrix { .. })
        ));
        let z = SparseMatrix::<f64>::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        assert!(matches!(
            factorize(&z),
            Err(LinalgError::SingularMatrix { .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let f = factorize(&SparseMatrix::<f64>::identity(2)).unwrap();
        assert!(matches!(
            f.solve(&[1.0]),
            Err(LinalgError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        ));
    }

    #[test]
    fn deterministic_bitwise() {
        let a = random_spd(200, 3);
        let b: Vec<f64> = (0..200).map(|i| (i as f64).sin()).collect();
        let x1 = factorize(&a).unwrap().solve(&b).unwrap();
        let x2 = factorize(&a).unwrap().solve(&b).unwrap();
        assert!(x1.iter().zip(&x2).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
