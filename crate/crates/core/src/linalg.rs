//! Exact linear algebra over a field (Q(t) generically, Q after
//! specialization): row reduction, rank, kernels, and greedy selection of
//! independent vectors. Dimensions here are tiny (module levels), so plain
//! fraction-arithmetic Gaussian elimination is the right tool.

use crate::scalar::ScalarK;

/// Field operations needed by the eliminations.
pub trait Field: Clone + PartialEq {
    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
}

impl Field for ScalarK {
    fn zero() -> Self {
        ScalarK::zero()
    }
    fn one() -> Self {
        ScalarK::one()
    }
    fn is_zero(&self) -> bool {
        self.is_zero()
    }
    fn add(&self, o: &Self) -> Self {
        self.add_ref(o)
    }
    fn sub(&self, o: &Self) -> Self {
        self.sub_ref(o)
    }
    fn mul(&self, o: &Self) -> Self {
        self.mul_ref(o)
    }
    fn div(&self, o: &Self) -> Self {
        self.div_ref(o).expect("division by zero in elimination")
    }
    fn neg(&self) -> Self {
        self.neg_ref()
    }
}

impl Field for num_rational::BigRational {
    fn zero() -> Self {
        num_traits::Zero::zero()
    }
    fn one() -> Self {
        num_traits::One::one()
    }
    fn is_zero(&self) -> bool {
        num_traits::Zero::is_zero(self)
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
}

/// Row-echelon accumulator for incremental independence tests.
pub struct RowSpace<F: Field> {
    ncols: usize,
    /// Echelon rows with their pivot columns, pivot normalized to 1.
    rows: Vec<(usize, Vec<F>)>,
}

impl<F: Field> RowSpace<F> {
    pub fn new(ncols: usize) -> Self {
        RowSpace { ncols, rows: vec![] }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduce a vector against the current rows; returns the remainder.
    pub fn reduce(&self, mut v: Vec<F>) -> Vec<F> {
        assert_eq!(v.len(), self.ncols);
        for (p, row) in &self.rows {
            if !v[*p].is_zero() {
                let c = v[*p].clone();
                for j in 0..self.ncols {
                    v[j] = v[j].sub(&c.mul(&row[j]));
                }
            }
        }
        v
    }

    /// Try to insert; returns true if the vector was independent.
    pub fn insert(&mut self, v: Vec<F>) -> bool {
        let r = self.reduce(v);
        if let Some(p) = r.iter().position(|c| !c.is_zero()) {
            let pivot = r[p].clone();
            let row: Vec<F> = r.iter().map(|c| c.div(&pivot)).collect();
            self.rows.push((p, row));
            // keep rows sorted by pivot for determinism
            self.rows.sort_by_key(|(p, _)| *p);
            true
        } else {
            false
        }
    }

    /// Does the vector lie in the current span?
    pub fn contains(&self, v: Vec<F>) -> bool {
        self.reduce(v).iter().all(|c| c.is_zero())
    }
}

/// Kernel basis of the column-combination problem: given vectors v_1..v_k
/// (as rows of length n), find all (c_1..c_k) with sum c_i v_i = 0.
/// Returned combinations are echelonized and deterministic.
pub fn kernel_of_combinations<F: Field>(vectors: &[Vec<F>]) -> Vec<Vec<F>> {
    let k = vectors.len();
    if k == 0 {
        return vec![];
    }
    let n = vectors[0].len();
    // Augment each row with identity bookkeeping; eliminate on the first n
    // columns; rows whose leading n columns vanish give kernel combinations.
    let mut rows: Vec<(Vec<F>, Vec<F>)> = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let mut id = vec![F::zero(); k];
            id[i] = F::one();
            (v.clone(), id)
        })
        .collect();
    let mut kernel = vec![];
    let mut used_pivots: Vec<usize> = vec![];
    for i in 0..k {
        // reduce row i against previous pivot rows
        let (mut v, mut id) = rows[i].clone();
        for (j, &p) in used_pivots.iter().enumerate() {
            if !v[p].is_zero() {
                let c = v[p].clone();
                let (rv, rid) = &rows[j];
                for t in 0..n {
                    v[t] = v[t].sub(&c.mul(&rv[t]));
                }
                for t in 0..k {
                    id[t] = id[t].sub(&c.mul(&rid[t]));
                }
            }
        }
        if let Some(p) = v.iter().position(|c| !c.is_zero()) {
            let pivot = v[p].clone();
            let v: Vec<F> = v.iter().map(|c| c.div(&pivot)).collect();
            let id: Vec<F> = id.iter().map(|c| c.div(&pivot)).collect();
            let j = used_pivots.len();
            rows[j] = (v, id);
            used_pivots.push(p);
        } else {
            kernel.push(id);
        }
    }
    kernel
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(n: i64) -> ScalarK {
        ScalarK::from_int(n)
    }

    #[test]
    fn rank_and_kernel() {
        let v1 = vec![s(1), s(2), s(0)];
        let v2 = vec![s(0), s(1), s(1)];
        let v3 = vec![s(1), s(3), s(1)]; // v1 + v2
        let mut rs = RowSpace::new(3);
        assert!(rs.insert(v1.clone()));
        assert!(rs.insert(v2.clone()));
        assert!(!rs.insert(v3.clone()));
        assert_eq!(rs.rank(), 2);
        let ker = kernel_of_combinations(&[v1, v2, v3]);
        assert_eq!(ker.len(), 1);
        let c = &ker[0];
        // c0*v1 + c1*v2 + c2*v3 = 0 with c nonzero
        assert!(c.iter().any(|x| !x.is_zero()));
    }
}
