//! Age-mixing machinery: from a raw survey contact matrix to the
//! symmetric matrix of inter-group edge frequencies.
//!
//! Survey matrices report the average contacts a member of group `i` has
//! with group `j`. At population level those rates rarely balance, so the
//! group-level edge totals are symmetrized with the usual reciprocity
//! correction before being divided by the number of potential pairs. The
//! correction depends on the local group sizes, which is why it is applied
//! even to matrices that were already corrected with national statistics:
//! with identical statistics a second correction is a no-op.

use serde::Serialize;

use crate::error::{Error, Result};

/// Raw survey contact matrix; entry `(i, j)` is the average number of
/// contacts a member of group `i` reports with members of group `j`.
#[derive(Debug, Clone)]
pub struct ContactMatrix {
    n: usize,
    values: Vec<f64>,
}

impl ContactMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<ContactMatrix> {
        if n == 0 {
            return Err(Error::Config("contact matrix must have n >= 1".into()));
        }
        if values.len() != n * n {
            return Err(Error::Config(format!(
                "contact matrix needs {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(
                "contact matrix entries must be finite and nonnegative".into(),
            ));
        }
        Ok(ContactMatrix { n, values })
    }

    pub fn group_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Symmetric estimate of the total number of edges between group pairs.
#[derive(Debug, Clone)]
pub struct GroupAdjacency {
    n: usize,
    values: Vec<f64>,
}

impl GroupAdjacency {
    pub fn group_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

/// Symmetric matrix of inter-group edge frequencies.
#[derive(Debug, Clone, Serialize)]
pub struct MixingMatrix {
    n: usize,
    values: Vec<f64>,
    /// True when the upper triangle (i <= j) sums to 1.
    normalized: bool,
}

impl MixingMatrix {
    /// Builds a matrix from explicit entries, enforcing symmetry and
    /// nonnegativity.
    pub fn from_values(n: usize, values: Vec<f64>) -> Result<MixingMatrix> {
        if values.len() != n * n || n == 0 {
            return Err(Error::Config("mixing matrix shape mismatch".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let v = values[i * n + j];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::Config(
                        "mixing matrix entries must be finite and nonnegative".into(),
                    ));
                }
                if v != values[j * n + i] {
                    return Err(Error::Config(format!(
                        "mixing matrix must be symmetric, differs at ({i}, {j})"
                    )));
                }
            }
        }
        let mut m = MixingMatrix {
            n,
            values,
            normalized: false,
        };
        m.normalized = (m.upper_triangle_sum() - 1.0).abs() <= 1e-9;
        Ok(m)
    }

    pub fn group_count(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn upper_triangle_sum(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in i..self.n {
                s += self.get(i, j);
            }
        }
        s
    }

    /// Rescales so that the upper triangle sums to 1; the model is
    /// invariant under this, it only fixes the reported scale.
    pub fn normalized(mut self) -> Result<MixingMatrix> {
        let s = self.upper_triangle_sum();
        if s <= 0.0 {
            return Err(Error::DegenerateModel(
                "mixing matrix is identically zero".into(),
            ));
        }
        for v in &mut self.values {
            *v /= s;
        }
        self.normalized = true;
        Ok(self)
    }

    /// Multiplies every entry by `c > 0`; exposed for scale-invariance
    /// checks and diagnostics.
    pub fn scaled(mut self, c: f64) -> Result<MixingMatrix> {
        if c <= 0.0 || !c.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "scale factor must be positive, got {c}"
            )));
        }
        for v in &mut self.values {
            *v *= c;
        }
        self.normalized = (self.upper_triangle_sum() - 1.0).abs() <= 1e-9;
        Ok(self)
    }
}

/// Number of unordered vertex pairs between groups `i` and `j`:
/// `|Vi|*|Vj|` off the diagonal, `|Vi|*(|Vi|-1)/2` on it.
pub fn pair_counts(group_sizes: &[u64]) -> Vec<f64> {
    let n = group_sizes.len();
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            m[i * n + j] = if i == j {
                let s = group_sizes[i] as f64;
                s * (s - 1.0) / 2.0
            } else {
                group_sizes[i] as f64 * group_sizes[j] as f64
            };
        }
    }
    m
}

/// Reciprocity correction: estimates total edges between group pairs as
/// the arithmetic mean of the two one-sided survey totals; intra-group
/// totals are halved because each edge is reported by both endpoints.
pub fn reciprocity_correct(gamma: &ContactMatrix, group_sizes: &[u64]) -> Result<GroupAdjacency> {
    let n = gamma.group_count();
    if group_sizes.len() != n {
        return Err(Error::Config(format!(
            "contact matrix has {n} groups but {} sizes were given",
            group_sizes.len()
        )));
    }
    if group_sizes.contains(&0) {
        return Err(Error::Config("group sizes must be at least 1".into()));
    }
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let a = if i == j {
                0.5 * gamma.get(i, i) * group_sizes[i] as f64
            } else {
                0.5 * (gamma.get(i, j) * group_sizes[i] as f64
                    + gamma.get(j, i) * group_sizes[j] as f64)
            };
            values[i * n + j] = a;
            values[j * n + i] = a;
        }
    }
    Ok(GroupAdjacency { n, values })
}

/// Divides the corrected edge totals by the pair counts, yielding the
/// per-pair edge frequency for each group pair.
pub fn edge_frequency_matrix(
    adjacency: &GroupAdjacency,
    group_sizes: &[u64],
) -> Result<MixingMatrix> {
    let n = adjacency.group_count();
    if group_sizes.len() != n {
        return Err(Error::Config(format!(
            "adjacency has {n} groups but {} sizes were given",
            group_sizes.len()
        )));
    }
    if group_sizes.contains(&0) {
        return Err(Error::Config("group sizes must be at least 1".into()));
    }
    let m = pair_counts(group_sizes);
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let alpha = adjacency.get(i, j);
            let pairs = m[i * n + j];
            let s = if alpha == 0.0 {
                0.0
            } else if pairs == 0.0 {
                // Only possible on the diagonal with a singleton group.
                return Err(Error::DegenerateGroup(i));
            } else {
                alpha / pairs
            };
            values[i * n + j] = s;
            values[j * n + i] = s;
        }
    }
    MixingMatrix::from_values(n, values)
}

/// Constant matrix `1/n^2`: age-homogeneous mixing, the baseline in which
/// groups have no effect on the edge probability.
pub fn homogeneous(n: usize) -> Result<MixingMatrix> {
    if n == 0 {
        return Err(Error::Config("need at least one age group".into()));
    }
    let v = 1.0 / (n * n) as f64;
    MixingMatrix::from_values(n, vec![v; n * n])
}
