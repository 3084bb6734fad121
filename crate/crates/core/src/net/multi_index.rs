use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Orders of differentiation per input variable.
///
/// The zero multi-index denotes the undifferentiated value.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(orders: Vec<u32>) -> Self {
        MultiIndex(orders)
    }

    pub fn zero(vars: usize) -> Self {
        MultiIndex(vec![0; vars])
    }

    /// Unit index: one derivative with respect to `var`.
    pub fn unit(vars: usize, var: usize) -> Self {
        let mut orders = vec![0; vars];
        orders[var] = 1;
        MultiIndex(orders)
    }

    /// Builds the index for differentiating once per listed variable, in any order.
    pub fn from_vars(vars: usize, which: &[usize]) -> Self {
        let mut orders = vec![0; vars];
        for &v in which {
            orders[v] += 1;
        }
        MultiIndex(orders)
    }

    pub fn orders(&self) -> &[u32] {
        &self.0
    }

    pub fn vars(&self) -> usize {
        self.0.len()
    }

    pub fn total_order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&o| o == 0)
    }

    /// Product of factorials of the entries, the ratio between a partial
    /// derivative and the matching Taylor coefficient.
    pub fn factorial(&self) -> f64 {
        self.0
            .iter()
            .map(|&o| (1..=o).map(f64::from).product::<f64>())
            .product()
    }

    pub fn checked_add(&self, other: &MultiIndex) -> Option<MultiIndex> {
        if self.vars() != other.vars() {
            return None;
        }
        Some(MultiIndex(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, o) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{o}")?;
        }
        write!(f, ")")
    }
}

/// All multi-indices of `vars` variables with total order exactly `degree`,
/// ordered with the first variable's exponent descending.
pub fn indices_of_degree(vars: usize, degree: u32) -> Vec<MultiIndex> {
    fn rec(vars: usize, degree: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == vars {
            prefix.push(degree);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for first in (0..=degree).rev() {
            prefix.push(first);
            rec(vars, degree - first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if vars == 0 {
        if degree == 0 {
            out.push(MultiIndex(Vec::new()));
        }
        return out;
    }
    rec(vars, degree, &mut Vec::with_capacity(vars), &mut out);
    out
}

/// Graded ordering of every multi-index with total order at most `order`.
pub fn graded_indices(vars: usize, order: u32) -> Vec<MultiIndex> {
    (0..=order)
        .flat_map(|d| indices_of_degree(vars, d))
        .collect()
}

/// Canonical dense layout of truncated multivariate Taylor coefficients.
///
/// Holds the graded index list plus a precomputed convolution table so that
/// products of truncated series cost one pass over the table.
#[derive(Debug, Clone)]
pub struct JetLayout {
    vars: usize,
    order: u32,
    indices: Vec<MultiIndex>,
    lookup: HashMap<MultiIndex, usize>,
    factorials: Vec<f64>,
    products: Vec<(usize, usize, usize)>,
}

impl JetLayout {
    pub fn new(vars: usize, order: u32) -> Self {
        let indices = graded_indices(vars, order);
        let lookup: HashMap<MultiIndex, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.clone(), i))
            .collect();
        let factorials = indices.iter().map(MultiIndex::factorial).collect();
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if a.total_order() + b.total_order() > order {
                    continue;
                }
                let sum = a.checked_add(b).expect("same arity");
                products.push((i, j, lookup[&sum]));
            }
        }
        JetLayout {
            vars,
            order,
            indices,
            lookup,
            factorials,
            products,
        }
    }

    pub fn vars(&self) -> usize {
        self.vars
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn position(&self, index: &MultiIndex) -> Option<usize> {
        self.lookup.get(index).copied()
    }

    pub fn factorial(&self, pos: usize) -> f64 {
        self.factorials[pos]
    }

    /// Position of the unit index for `var`, if the layout has order ≥ 1.
    pub fn unit_position(&self, var: usize) -> Option<usize> {
        if self.order == 0 {
            None
        } else {
            Some(1 + var)
        }
    }

    /// Truncated product `out = a * b`.
    pub fn mul(&self, a: &[f64], b: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &(i, j, k) in &self.products {
            out[k] += a[i] * b[j];
        }
    }

    /// Adjoint of [`JetLayout::mul`]: accumulates cotangents of both factors.
    pub fn mul_adjoint(
        &self,
        a: &[f64],
        b: &[f64],
        out_bar: &[f64],
        a_bar: &mut [f64],
        b_bar: &mut [f64],
    ) {
        for &(i, j, k) in &self.products {
            a_bar[i] += out_bar[k] * b[j];
            b_bar[j] += out_bar[k] * a[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: u64, k: u64) -> u64 {
        (1..=k).fold(1, |acc, i| acc * (n - k + i) / i)
    }

    #[test]
    fn graded_order_two_vars() {
        let idx = graded_indices(2, 2);
        let got: Vec<Vec<u32>> = idx.iter().map(|m| m.orders().to_vec()).collect();
        assert_eq!(
            got,
            vec![
                vec![0, 0],
                vec![1, 0],
                vec![0, 1],
                vec![2, 0],
                vec![1, 1],
                vec![0, 2]
            ]
        );
    }

    #[test]
    fn layout_sizes_match_binomial() {
        for vars in 1..=4 {
            for order in 0..=5 {
                let layout = JetLayout::new(vars, order);
                assert_eq!(
                    layout.len() as u64,
                    binom(u64::from(order) + vars as u64, vars as u64)
                );
            }
        }
    }

    #[test]
    fn unit_positions_follow_zero_index() {
        let layout = JetLayout::new(3, 2);
        for v in 0..3 {
            let pos = layout.unit_position(v).unwrap();
            assert_eq!(layout.indices()[pos], MultiIndex::unit(3, v));
        }
    }

    #[test]
    fn truncated_product_of_univariate_series() {
        // (1 + x)(1 + x) = 1 + 2x + x^2, truncated at order 2
        let layout = JetLayout::new(1, 2);
        let a = [1.0, 1.0, 0.0];
        let mut out = [0.0; 3];
        layout.mul(&a, &a, &mut out);
        assert_eq!(out, [1.0, 2.0, 1.0]);
    }

    #[test]
    fn factorial_of_mixed_index() {
        assert_eq!(MultiIndex::new(vec![2, 3]).factorial(), 12.0);
        assert_eq!(MultiIndex::zero(2).factorial(), 1.0);
    }
}
