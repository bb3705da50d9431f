//! Small dense linear-algebra helpers: signatures, ranks, null spaces and
//! symplectic / Hermitian Gram–Schmidt.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Max-abs entry of a matrix.
pub fn max_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, v| acc.max(v.abs()))
}

/// Max-abs entry of a vector.
pub fn max_abs_vec<T: Real>(v: &DVector<T>) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// `x^T m y` for a bilinear form given by its matrix.
pub fn bilinear<T: Real>(m: &DMatrix<T>, x: &DVector<T>, y: &DVector<T>) -> T {
    let mut acc = T::zero();
    for i in 0..m.nrows() {
        let mut row = T::zero();
        for j in 0..m.ncols() {
            row += m[(i, j)] * y[j];
        }
        acc += x[i] * row;
    }
    acc
}

/// Counts (positive, negative, zero) eigenvalues of a symmetric matrix.
/// An eigenvalue counts as zero when `|mu| <= rel_tol * max|mu|`.
pub fn signature<T: Real>(m: &DMatrix<T>, rel_tol: T) -> (usize, usize, usize) {
    let sym = (m + m.transpose()) * T::lit(0.5);
    let eig = SymmetricEigen::new(sym);
    let scale = eig
        .eigenvalues
        .iter()
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    let thr = rel_tol * scale.max(T::tiny());
    let mut counts = (0, 0, 0);
    for &mu in eig.eigenvalues.iter() {
        if mu > thr {
            counts.0 += 1;
        } else if mu < -thr {
            counts.1 += 1;
        } else {
            counts.2 += 1;
        }
    }
    counts
}

/// Numerical rank from singular values relative to the largest one.
pub fn rank<T: Real>(m: &DMatrix<T>, rel_tol: T) -> usize {
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.iter().fold(T::zero(), |acc, v| acc.max(*v));
    if smax == T::zero() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Orthonormal basis of the span of `cols`, built by modified Gram–Schmidt in
/// the given order. Columns whose residual norm falls below `tol` times the
/// largest input norm are skipped.
pub fn column_basis<T: Real>(cols: &[DVector<T>], tol: T) -> Vec<DVector<T>> {
    let scale = cols
        .iter()
        .fold(T::zero(), |acc, c| acc.max(c.norm()))
        .max(T::tiny());
    let mut basis: Vec<DVector<T>> = Vec::new();
    for c in cols {
        let mut v = c.clone();
        // two passes keep orthogonality at machine precision
        for _ in 0..2 {
            for b in &basis {
                let d = b.dot(&v);
                v.axpy(-d, b, T::one());
            }
        }
        let nv = v.norm();
        if nv > tol * scale {
            basis.push(v / nv);
        }
    }
    basis
}

/// Basis of the null space of `m` (right singular vectors whose singular value
/// is at most `tol`, absolute).
pub fn null_space<T: Real>(m: &DMatrix<T>, tol: T) -> Vec<DVector<T>> {
    let ncols = m.ncols();
    let padded = if m.nrows() < ncols {
        let mut p = DMatrix::zeros(ncols, ncols);
        p.view_mut((0, 0), (m.nrows(), ncols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("requested V^T");
    let mut out = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol {
            out.push(vt.row(i).transpose());
        }
    }
    out
}

/// Projects `v` onto the Euclidean orthogonal complement of an orthonormal family.
pub fn reject<T: Real>(v: &DVector<T>, basis: &[DVector<T>]) -> DVector<T> {
    let mut r = v.clone();
    for b in basis {
        let d = b.dot(&r);
        r.axpy(-d, b, T::one());
    }
    r
}

/// Symplectic Gram–Schmidt.
///
/// From a spanning family of a symplectic subspace, returns a Darboux basis
/// ordered `[e_1..e_m, f_1..f_m]` with `omega(e_i, f_j) = delta_ij` and all other
/// pairings zero. Fails if the span is degenerate for `omega`.
pub fn symplectic_gram_schmidt<T: Real>(
    omega: &DMatrix<T>,
    vectors: &[DVector<T>],
    tol: T,
) -> Result<Vec<DVector<T>>> {
    let scale = vectors
        .iter()
        .fold(T::zero(), |acc, c| acc.max(c.norm()))
        .max(T::tiny());
    let mut pool: Vec<DVector<T>> = vectors.to_vec();
    let mut es = Vec::new();
    let mut fs = Vec::new();
    loop {
        pool.retain(|v| v.norm() > tol.sqrt() * scale);
        if pool.is_empty() {
            break;
        }
        // largest remaining vector seeds the next pair
        let (ie, _) = pool
            .iter()
            .enumerate()
            .fold((0, T::zero()), |best, (i, v)| {
                let nv = v.norm();
                if nv > best.1 {
                    (i, nv)
                } else {
                    best
                }
            });
        let e = pool[ie].clone() / pool[ie].norm();
        let mut best = (usize::MAX, T::zero());
        for (i, v) in pool.iter().enumerate() {
            if i == ie {
                continue;
            }
            let w = bilinear(omega, &e, v).abs() / v.norm();
            if w > best.1 {
                best = (i, w);
            }
        }
        if best.0 == usize::MAX || best.1 <= tol.sqrt() {
            return Err(Error::NotSymplectic);
        }
        let f_raw = pool[best.0].clone();
        let f = &f_raw / bilinear(omega, &e, &f_raw);
        let (lo, hi) = if ie < best.0 {
            (ie, best.0)
        } else {
            (best.0, ie)
        };
        pool.remove(hi);
        pool.remove(lo);
        for v in pool.iter_mut() {
            let ve = bilinear(omega, v, &e);
            let vf = bilinear(omega, v, &f);
            *v = &*v - &e * vf + &f * ve;
        }
        es.push(e);
        fs.push(f);
    }
    es.extend(fs);
    Ok(es)
}

/// Pseudo-unitary frame for a complex structure.
///
/// `omega` is a symplectic form and `j` a compatible complex structure
/// (`j^2 = -1`, `j` in sp), so that `h(x, y) = omega(x, j y)` is the real part of
/// the Hermitian form `<x, y> = omega(x, j y) - i omega(x, y)`. Returns complex
/// basis vectors `e_1..e_{n+1}` with `<e_a, e_b> = g_a delta_ab`, `g_a = ±1`,
/// positives first. `seeds` (each with `h(s, s) > 0`) are placed first, in order.
pub fn hermitian_frame<T: Real>(
    omega: &DMatrix<T>,
    j: &DMatrix<T>,
    seeds: &[DVector<T>],
    tol: T,
) -> Result<(Vec<DVector<T>>, Vec<i8>)> {
    let dim = omega.nrows();
    let half = dim / 2;
    let h = omega * j;
    let herm = |x: &DVector<T>, y: &DVector<T>| bilinear(&h, x, y);
    let mut frame: Vec<DVector<T>> = Vec::new();
    let mut signs: Vec<i8> = Vec::new();

    let project = |v: &DVector<T>, frame: &[DVector<T>], signs: &[i8]| {
        let mut r = v.clone();
        for (e, &g) in frame.iter().zip(signs) {
            let je = j * e;
            let g = T::lit(g as f64);
            let a = herm(&r, e) * g;
            let b = herm(&r, &je) * g;
            r = r - e * a - je * b;
        }
        r
    };

    for s in seeds {
        let r = project(s, &frame, &signs);
        let hn = herm(&r, &r);
        if hn <= tol * r.norm_squared() {
            return Err(Error::Conditioning(
                "seed is not positive for the Hermitian form".into(),
            ));
        }
        frame.push(r / hn.sqrt());
        signs.push(1);
    }

    while frame.len() < half {
        let mut cands: Vec<DVector<T>> = (0..dim)
            .map(|i| {
                project(
                    &DVector::from_fn(dim, |r, _| if r == i { T::one() } else { T::zero() }),
                    &frame,
                    &signs,
                )
            })
            .collect();
        cands.retain(|c| c.norm() > tol.sqrt());
        let ratio = |c: &DVector<T>| herm(c, c).abs() / c.norm_squared();
        let mut best: Option<(DVector<T>, T)> = None;
        for c in &cands {
            let r = ratio(c);
            if best.as_ref().map_or(true, |b| r > b.1) {
                best = Some((c.clone(), r));
            }
        }
        // all candidates null: polarize pairs
        if best.as_ref().map_or(true, |b| b.1 < T::lit(1e-3)) {
            for a in 0..cands.len() {
                for b in (a + 1)..cands.len() {
                    for c in [&cands[a] + &cands[b], &cands[a] + j * &cands[b]] {
                        let r = ratio(&c);
                        if best.as_ref().map_or(true, |bb| r > bb.1) {
                            best = Some((c, r));
                        }
                    }
                }
            }
        }
        let (c, r) = best
            .ok_or_else(|| Error::Conditioning("Hermitian frame ran out of candidates".into()))?;
        if r < tol.sqrt() {
            return Err(Error::Conditioning("Hermitian form is degenerate".into()));
        }
        let hn = herm(&c, &c);
        frame.push(&c / hn.abs().sqrt());
        signs.push(if hn > T::zero() { 1 } else { -1 });
    }

    // positives first, keeping seeds and the relative order otherwise
    let nseed = seeds.len();
    let mut order: Vec<usize> = (nseed..frame.len()).collect();
    order.sort_by_key(|&i| if signs[i] > 0 { 0 } else { 1 });
    let mut out_f: Vec<DVector<T>> = frame[..nseed].to_vec();
    let mut out_s: Vec<i8> = signs[..nseed].to_vec();
    for i in order {
        out_f.push(frame[i].clone());
        out_s.push(signs[i]);
    }
    Ok((out_f, out_s))
}

/// `exp(tau A)` for a generator with `A^2 = lambda Id`.
pub fn exp_generator<T: Real>(a: &DMatrix<T>, lambda: T, tau: T) -> DMatrix<T> {
    let n = a.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let eps = T::lit(1e-300_f64.max(0.0));
    if lambda > eps {
        let k = lambda.sqrt();
        id * (k * tau).cosh() + a * ((k * tau).sinh() / k)
    } else if lambda < -eps {
        let k = (-lambda).sqrt();
        id * (k * tau).cos() + a * ((k * tau).sin() / k)
    } else {
        id + a * tau
    }
}

/// Pfaffian magnitude of an antisymmetric matrix, `sqrt(|det|)`.
pub fn pfaffian_abs<T: Real>(m: &DMatrix<T>) -> T {
    m.clone().determinant().abs().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn std_omega(h: usize) -> DMatrix<f64> {
        let mut o = DMatrix::zeros(2 * h, 2 * h);
        for i in 0..h {
            o[(i, h + i)] = 1.0;
            o[(h + i, i)] = -1.0;
        }
        o
    }

    #[test]
    fn signature_counts() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -1.0, 0.0, 3.0]));
        assert_eq!(signature(&m, 1e-9), (2, 1, 1));
    }

    #[test]
    fn darboux_basis_from_spanning_set() {
        let o = std_omega(3);
        let cols: Vec<_> = (0..6)
            .map(|i| o.column(i).into_owned() + DVector::from_element(6, 0.1 * i as f64))
            .collect();
        let b = symplectic_gram_schmidt(&o, &cols, 1e-12).unwrap();
        assert_eq!(b.len(), 6);
        let t = DMatrix::from_columns(&b);
        let g = t.transpose() * &o * &t;
        assert!((g - std_omega(3)).abs().max() < 1e-12);
    }

    #[test]
    fn degenerate_span_rejected() {
        let o = std_omega(2);
        let cols = vec![
            DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 1.0, 0.0, 0.0]),
        ];
        assert_eq!(
            symplectic_gram_schmidt(&o, &cols, 1e-12),
            Err(Error::NotSymplectic)
        );
    }

    #[test]
    fn hermitian_frame_of_indefinite_form() {
        let o = std_omega(3);
        let g = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0, 1.0, -1.0, 1.0]));
        let j = -(&o * g);
        let (frame, signs) = hermitian_frame(&o, &j, &[], 1e-12).unwrap();
        assert_eq!(signs, vec![1, 1, -1]);
        let h = &o * &j;
        for (a, ea) in frame.iter().enumerate() {
            for (b, eb) in frame.iter().enumerate() {
                let expect = if a == b { signs[a] as f64 } else { 0.0 };
                assert!((bilinear(&h, ea, eb) - expect).abs() < 1e-12);
                assert!(bilinear(&h, ea, &(&j * eb)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_exponential_matches_series() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let e = exp_generator(&a, -4.0, 0.3);
        assert!((e - (a * 0.3).exp()).abs().max() < 1e-12);
    }
}
