use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{indices_of_degree, MultiIndex};

/// Default cap on the number of library monomials.
pub const DEFAULT_TERM_CAP: u128 = 1_000_000;

/// Candidate library shape: derivatives up to order `m`, monomials up to degree `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LibrarySpec {
    pub max_order: u32,
    pub max_degree: u32,
    pub n_space: usize,
    pub n_out: usize,
    /// Append raw `t` and `x` columns after the monomials.
    #[serde(default)]
    pub include_coords: bool,
    /// Prepend a constant column.
    #[serde(default)]
    pub include_bias: bool,
}

impl LibrarySpec {
    pub fn new(max_order: u32, max_degree: u32, n_space: usize, n_out: usize) -> Self {
        LibrarySpec {
            max_order,
            max_degree,
            n_space,
            n_out,
            include_coords: false,
            include_bias: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_degree < 1 {
            return Err(Error::Config("monomial degree k must be at least 1".into()));
        }
        if self.n_out < 1 {
            return Err(Error::Config("at least one output is required".into()));
        }
        if self.n_space == 0 && self.max_order > 0 {
            return Err(Error::Config(
                "derivative order m > 0 needs at least one space variable".into(),
            ));
        }
        Ok(())
    }
}

/// One partial derivative `∂^α u_i` of a single output with respect to space.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DerivativeTerm {
    pub output: usize,
    pub index: MultiIndex,
}

impl DerivativeTerm {
    pub fn order(&self) -> u32 {
        self.index.total_order()
    }
}

/// Names used to render and parse library terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermNaming {
    pub space: Vec<String>,
    pub outputs: Vec<String>,
}

impl TermNaming {
    pub fn new(space: Vec<String>, outputs: Vec<String>) -> Self {
        TermNaming { space, outputs }
    }

    pub fn derivative_name(&self, d: &DerivativeTerm) -> String {
        let base = &self.outputs[d.output];
        if d.index.is_zero() {
            return base.clone();
        }
        let single = self.space.iter().all(|s| s.chars().count() == 1);
        let parts: Vec<&str> = d
            .index
            .orders()
            .iter()
            .enumerate()
            .flat_map(|(i, &o)| std::iter::repeat(self.space[i].as_str()).take(o as usize))
            .collect();
        let sub = if single { parts.concat() } else { parts.join(",") };
        format!("{base}_{sub}")
    }

    pub fn term_name(&self, term: &Term) -> String {
        term.factors
            .iter()
            .map(|(d, e)| {
                let n = self.derivative_name(d);
                if *e == 1 {
                    n
                } else {
                    format!("{n}^{e}")
                }
            })
            .collect::<Vec<_>>()
            .join("*")
    }

    /// Parses a canonical term name against a derivative list.
    pub fn parse_term(&self, name: &str, derivatives: &[DerivativeTerm]) -> Result<Term> {
        let lookup: HashMap<String, &DerivativeTerm> = derivatives
            .iter()
            .map(|d| (self.derivative_name(d), d))
            .collect();
        let mut factors: Vec<(DerivativeTerm, u32)> = Vec::new();
        for piece in name.split('*') {
            let (base, exp) = match piece.rsplit_once('^') {
                Some((b, e)) => (
                    b,
                    e.parse::<u32>()
                        .map_err(|_| Error::Config(format!("bad exponent in term {name:?}")))?,
                ),
                None => (piece, 1),
            };
            let d = lookup
                .get(base)
                .ok_or_else(|| Error::Config(format!("unknown factor {base:?} in term {name:?}")))?;
            match factors.iter_mut().find(|(f, _)| f == *d) {
                Some((_, e)) => *e += exp,
                None => factors.push(((*d).clone(), exp)),
            }
        }
        Ok(Term::from_factors(factors, derivatives))
    }
}

/// Monomial in derivative terms, factors kept in library order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Term {
    pub factors: Vec<(DerivativeTerm, u32)>,
}

impl Term {
    fn from_factors(mut factors: Vec<(DerivativeTerm, u32)>, order: &[DerivativeTerm]) -> Term {
        let pos = |d: &DerivativeTerm| order.iter().position(|o| o == d).unwrap_or(usize::MAX);
        factors.sort_by_key(|(d, _)| pos(d));
        Term { factors }
    }

    pub fn single(d: DerivativeTerm) -> Term {
        Term {
            factors: vec![(d, 1)],
        }
    }

    pub fn degree(&self) -> u32 {
        self.factors.iter().map(|(_, e)| e).sum()
    }

    /// Highest derivative order among the factors.
    pub fn max_order(&self) -> u32 {
        self.factors.iter().map(|(d, _)| d.order()).max().unwrap_or(0)
    }

    /// True when no factor is differentiated in space.
    pub fn is_pointwise(&self) -> bool {
        self.max_order() == 0
    }

    /// Total derivative count along each space axis, counting exponents.
    pub fn axis_orders(&self, n_space: usize) -> Vec<u32> {
        let mut out = vec![0; n_space];
        for (d, e) in &self.factors {
            for (i, o) in d.index.orders().iter().enumerate() {
                out[i] += o * e;
            }
        }
        out
    }
}

impl fmt::Display for DerivativeTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "u{}{}", self.output, self.index)
    }
}

/// 𝓜 = M (1 + Σ_{i=1..m} C(i+N−1, N−1)).
pub fn count_derivative_terms(n_space: usize, n_out: usize, max_order: u32) -> u128 {
    if n_space == 0 {
        return n_out as u128;
    }
    let per_output = (1..=u128::from(max_order))
        .map(|i| binomial(i + n_space as u128 - 1, n_space as u128 - 1))
        .fold(1u128, u128::saturating_add);
    (n_out as u128).saturating_mul(per_output)
}

/// 𝓚 = Σ_{i=1..k} C(i+𝓜−1, 𝓜−1).
pub fn count_monomials(n_derivatives: u128, max_degree: u32) -> u128 {
    if n_derivatives == 0 {
        return 0;
    }
    (1..=u128::from(max_degree))
        .map(|i| binomial(i + n_derivatives - 1, n_derivatives - 1))
        .fold(0, u128::saturating_add)
}

/// Saturates at `u128::MAX`.
pub(crate) fn binomial(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 1..=k {
        // acc·(n−k+i) is divisible by i; split the product to delay overflow
        let g = gcd(acc, i);
        let (a, d) = (acc / g, i / g);
        match a.checked_mul((n - k + i) / d) {
            Some(v) => acc = v,
            None => return u128::MAX,
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Every `∂^α u_i` with `|α| ≤ m`: by order, then output, then graded index order.
pub fn enumerate_derivative_terms(n_space: usize, n_out: usize, max_order: u32) -> Result<Vec<DerivativeTerm>> {
    if n_space == 0 && max_order > 0 {
        return Err(Error::Config(
            "derivative order m > 0 needs at least one space variable".into(),
        ));
    }
    let mut out = Vec::new();
    for order in 0..=max_order {
        let indices = if n_space == 0 {
            vec![MultiIndex::zero(0)]
        } else {
            indices_of_degree(n_space, order)
        };
        for output in 0..n_out {
            for index in &indices {
                out.push(DerivativeTerm {
                    output,
                    index: index.clone(),
                });
            }
        }
    }
    Ok(out)
}

/// All monomials of degree 1..=k in the given derivative terms, degree first,
/// then lexicographic in factor positions.
pub fn enumerate_monomials(derivatives: &[DerivativeTerm], max_degree: u32) -> Result<Vec<Term>> {
    enumerate_monomials_capped(derivatives, max_degree, DEFAULT_TERM_CAP)
}

pub fn enumerate_monomials_capped(
    derivatives: &[DerivativeTerm],
    max_degree: u32,
    cap: u128,
) -> Result<Vec<Term>> {
    if max_degree < 1 {
        return Err(Error::Config("monomial degree k must be at least 1".into()));
    }
    let count = count_monomials(derivatives.len() as u128, max_degree);
    if count > cap {
        return Err(Error::SizeGuard {
            what: "monomial library",
            count,
            cap,
        });
    }
    let mut out = Vec::with_capacity(count as usize);
    for degree in 1..=max_degree as usize {
        let mut combo = vec![0usize; degree];
        loop {
            let mut factors: Vec<(DerivativeTerm, u32)> = Vec::new();
            for &i in &combo {
                match factors.last_mut() {
                    Some((d, e)) if *d == derivatives[i] => *e += 1,
                    _ => factors.push((derivatives[i].clone(), 1)),
                }
            }
            out.push(Term { factors });
            // next non-decreasing combination
            let mut pos = degree;
            while pos > 0 && combo[pos - 1] == derivatives.len() - 1 {
                pos -= 1;
            }
            if pos == 0 {
                break;
            }
            let v = combo[pos - 1] + 1;
            combo[pos - 1..].iter_mut().for_each(|c| *c = v);
        }
    }
    Ok(out)
}
