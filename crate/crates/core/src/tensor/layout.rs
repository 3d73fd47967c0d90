use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled tensor factor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subsystem {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labeled subsystems.
///
/// Basis indices are row-major: the first subsystem is the most significant
/// digit. Every tensor operation addresses subsystems by label.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Subsystem>", into = "Vec<Subsystem>")]
pub struct SystemLayout {
    subsystems: Vec<Subsystem>,
}

impl SystemLayout {
    pub fn new<I, S>(subsystems: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: Into<String>,
    {
        let subsystems: Vec<Subsystem> = subsystems
            .into_iter()
            .map(|(label, dim)| Subsystem { label: label.into(), dim })
            .collect();
        Self::from_subsystems(subsystems)
    }

    fn from_subsystems(subsystems: Vec<Subsystem>) -> Result<Self> {
        for (i, s) in subsystems.iter().enumerate() {
            if s.dim == 0 {
                return Err(Error::InvalidLayout(format!("subsystem `{}` has dimension 0", s.label)));
            }
            if subsystems[..i].iter().any(|o| o.label == s.label) {
                return Err(Error::DuplicateLabel(s.label.clone()));
            }
        }
        Ok(Self { subsystems })
    }

    pub fn single(label: impl Into<String>, dim: usize) -> Result<Self> {
        Self::new([(label.into(), dim)])
    }

    pub fn subsystems(&self) -> &[Subsystem] {
        &self.subsystems
    }

    pub fn len(&self) -> usize {
        self.subsystems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subsystems.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.subsystems.iter().map(|s| s.dim).product()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.subsystems.iter().map(|s| s.label.as_str())
    }

    pub fn contains(&self, label: &str) -> bool {
        self.subsystems.iter().any(|s| s.label == label)
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.subsystems
            .iter()
            .position(|s| s.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.subsystems[self.position(label)?].dim)
    }

    /// Combined dimension of a set of labels.
    pub fn dim_of_all(&self, labels: &[&str]) -> Result<usize> {
        labels.iter().map(|l| self.dim_of(l)).product()
    }

    pub fn concat(&self, other: &SystemLayout) -> Result<Self> {
        let mut subsystems = self.subsystems.clone();
        subsystems.extend(other.subsystems.iter().cloned());
        Self::from_subsystems(subsystems)
    }

    /// Layout of the given labels, in the given order.
    pub fn select(&self, labels: &[&str]) -> Result<Self> {
        let subsystems = labels
            .iter()
            .map(|l| self.position(l).map(|p| self.subsystems[p].clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_subsystems(subsystems)
    }

    /// Layout of the given labels, in this layout's order.
    pub fn select_in_order(&self, labels: &[&str]) -> Result<Self> {
        for l in labels {
            self.position(l)?;
        }
        Self::from_subsystems(
            self.subsystems
                .iter()
                .filter(|s| labels.contains(&s.label.as_str()))
                .cloned()
                .collect(),
        )
    }

    /// Everything except the given labels, in this layout's order.
    pub fn without(&self, labels: &[&str]) -> Result<Self> {
        for l in labels {
            self.position(l)?;
        }
        Ok(Self {
            subsystems: self
                .subsystems
                .iter()
                .filter(|s| !labels.contains(&s.label.as_str()))
                .cloned()
                .collect(),
        })
    }

    pub fn relabel(&self, from: &str, to: &str) -> Result<Self> {
        let pos = self.position(from)?;
        let mut subsystems = self.subsystems.clone();
        subsystems[pos].label = to.to_string();
        Self::from_subsystems(subsystems)
    }

    /// Index table for a bipartition `group | rest`.
    ///
    /// `group` is taken in the order given, `rest` in layout order. Entry
    /// `g * rest_dim + r` holds the full-space index of `(g, r)`.
    pub(crate) fn split(&self, group: &[&str]) -> Result<IndexSplit> {
        let mut group_pos = Vec::with_capacity(group.len());
        for l in group {
            let p = self.position(l)?;
            if group_pos.contains(&p) {
                return Err(Error::DuplicateLabel((*l).to_string()));
            }
            group_pos.push(p);
        }
        let n = self.subsystems.len();
        let mut strides = vec![1usize; n];
        for i in (0..n.saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * self.subsystems[i + 1].dim;
        }
        let rest_pos: Vec<usize> = (0..n).filter(|p| !group_pos.contains(p)).collect();
        let offsets = |positions: &[usize]| -> Vec<usize> {
            let mut out = vec![0usize];
            for &p in positions {
                let dim = self.subsystems[p].dim;
                let mut next = Vec::with_capacity(out.len() * dim);
                for &base in &out {
                    for digit in 0..dim {
                        next.push(base + digit * strides[p]);
                    }
                }
                out = next;
            }
            out
        };
        let g_off = offsets(&group_pos);
        let r_off = offsets(&rest_pos);
        let mut map = Vec::with_capacity(g_off.len() * r_off.len());
        for &g in &g_off {
            for &r in &r_off {
                map.push(g + r);
            }
        }
        Ok(IndexSplit { group_dim: g_off.len(), rest_dim: r_off.len(), map })
    }
}

impl TryFrom<Vec<Subsystem>> for SystemLayout {
    type Error = Error;
    fn try_from(v: Vec<Subsystem>) -> Result<Self> {
        Self::from_subsystems(v)
    }
}

impl From<SystemLayout> for Vec<Subsystem> {
    fn from(l: SystemLayout) -> Self {
        l.subsystems
    }
}

impl fmt::Display for SystemLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, s) in self.subsystems.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}:{}", s.label, s.dim)?;
        }
        write!(f, ")")
    }
}

pub(crate) struct IndexSplit {
    pub group_dim: usize,
    pub rest_dim: usize,
    pub map: Vec<usize>,
}

impl IndexSplit {
    #[inline]
    pub fn full(&self, g: usize, r: usize) -> usize {
        self.map[g * self.rest_dim + r]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_labels() {
        let err = SystemLayout::new([("a", 2), ("a", 3)]).unwrap_err();
        assert!(matches!(err, Error::DuplicateLabel(l) if l == "a"));
    }

    #[test]
    fn total_dim_is_product() {
        let l = SystemLayout::new([("a", 2), ("b", 3), ("c", 4)]).unwrap();
        assert_eq!(l.total_dim(), 24);
    }

    #[test]
    fn split_matches_row_major_digits() {
        let l = SystemLayout::new([("a", 2), ("b", 3), ("c", 2)]).unwrap();
        let s = l.split(&["c", "a"]).unwrap();
        assert_eq!((s.group_dim, s.rest_dim), (4, 3));
        // g = (c, a) = (1, 1), r = b = 2  ->  a*6 + b*2 + c = 6 + 4 + 1
        assert_eq!(s.full(3, 2), 11);
    }

    #[test]
    fn unknown_label_is_reported() {
        let l = SystemLayout::new([("a", 2)]).unwrap();
        assert!(matches!(l.select(&["z"]), Err(Error::UnknownLabel(_))));
    }
}
