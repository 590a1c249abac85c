use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use super::LightField;
use crate::{Error, Result};

/// Named view sampling patterns.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ViewPattern {
    /// The four extreme angular coordinates.
    Corners4,
    /// `{0, (N-1)/2, N-1}` on both axes.
    Grid3x3,
    /// Explicit `(s, t)` list.
    Custom(Vec<(usize, usize)>),
    /// Every view of the grid, row-major.
    Full,
}

impl fmt::Display for ViewPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ViewPattern::Corners4 => f.write_str("corners4"),
            ViewPattern::Grid3x3 => f.write_str("grid3x3"),
            ViewPattern::Full => f.write_str("full"),
            ViewPattern::Custom(ix) => {
                let parts: Vec<String> = ix.iter().map(|(s, t)| format!("{s}:{t}")).collect();
                write!(f, "custom({})", parts.join(";"))
            }
        }
    }
}

impl FromStr for ViewPattern {
    type Err = Error;

    /// `corners4`, `grid3x3`, `full` or `custom(s:t;s:t;...)`.
    fn from_str(text: &str) -> Result<Self> {
        match text.trim() {
            "corners4" => Ok(ViewPattern::Corners4),
            "grid3x3" => Ok(ViewPattern::Grid3x3),
            "full" => Ok(ViewPattern::Full),
            other => {
                let inner = other
                    .strip_prefix("custom(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::InvalidConfig(format!("unknown view pattern {other:?}")))?;
                let indices = inner
                    .split(';')
                    .filter(|p| !p.trim().is_empty())
                    .map(|p| {
                        let (s, t) = p
                            .split_once(':')
                            .ok_or_else(|| Error::InvalidConfig(format!("bad view index {p:?}")))?;
                        let parse = |v: &str| {
                            v.trim().parse::<usize>().map_err(|_| Error::InvalidConfig(format!("bad view index {p:?}")))
                        };
                        Ok((parse(s)?, parse(t)?))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ViewPattern::Custom(indices))
            }
        }
    }
}

/// A validated set of `n` distinct angular coordinates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewSelection {
    indices: Vec<(usize, usize)>,
    pattern: ViewPattern,
}

impl ViewSelection {
    /// Resolves `pattern` on an `n x n` angular grid.
    pub fn from_pattern(n: usize, pattern: &ViewPattern) -> Result<Self> {
        let infeasible = |reason: &str| Error::InfeasiblePattern {
            pattern: pattern.to_string(),
            n,
            reason: reason.to_string(),
        };
        let indices = match pattern {
            ViewPattern::Corners4 => {
                if n < 2 {
                    return Err(infeasible("needs at least 2 views per axis"));
                }
                vec![(0, 0), (0, n - 1), (n - 1, 0), (n - 1, n - 1)]
            }
            ViewPattern::Grid3x3 => {
                if n < 3 || (n - 1) % 2 != 0 {
                    return Err(infeasible("needs an odd grid of at least 3 views per axis"));
                }
                let axis = [0, (n - 1) / 2, n - 1];
                axis.iter().flat_map(|&s| axis.iter().map(move |&t| (s, t))).collect()
            }
            ViewPattern::Full => (0..n).flat_map(|s| (0..n).map(move |t| (s, t))).collect(),
            ViewPattern::Custom(ix) => {
                if ix.is_empty() {
                    return Err(infeasible("empty selection"));
                }
                let mut seen = HashSet::new();
                for &(s, t) in ix {
                    if s >= n || t >= n {
                        return Err(infeasible(&format!("({s}, {t}) is outside the grid")));
                    }
                    if !seen.insert((s, t)) {
                        return Err(infeasible(&format!("({s}, {t}) is repeated")));
                    }
                }
                ix.clone()
            }
        };
        Ok(ViewSelection { indices, pattern: pattern.clone() })
    }

    pub fn indices(&self) -> &[(usize, usize)] {
        &self.indices
    }

    pub fn pattern(&self) -> &ViewPattern {
        &self.pattern
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Errors if any index falls outside an `n x n` grid.
    pub fn check_grid(&self, n: usize) -> Result<()> {
        match self.indices.iter().find(|(s, t)| *s >= n || *t >= n) {
            Some(&(s, t)) => Err(Error::InfeasiblePattern {
                pattern: self.pattern.to_string(),
                n,
                reason: format!("({s}, {t}) is outside the grid"),
            }),
            None => Ok(()),
        }
    }
}

/// Resolves `pattern` on the angular grid of `lf`.
pub fn sample_views(lf: &LightField, pattern: &ViewPattern) -> Result<ViewSelection> {
    ViewSelection::from_pattern(lf.angular_resolution(), pattern)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_patterns_on_nine_by_nine() {
        let c = ViewSelection::from_pattern(9, &ViewPattern::Corners4).unwrap();
        assert_eq!(c.indices(), &[(0, 0), (0, 8), (8, 0), (8, 8)]);
        let g = ViewSelection::from_pattern(9, &ViewPattern::Grid3x3).unwrap();
        assert_eq!(g.len(), 9);
        assert!(g.indices().iter().all(|(s, t)| [0, 4, 8].contains(s) && [0, 4, 8].contains(t)));
    }

    #[test]
    fn infeasible_patterns() {
        for (n, p) in [
            (2, ViewPattern::Grid3x3),
            (4, ViewPattern::Grid3x3),
            (3, ViewPattern::Custom(vec![(0, 3)])),
            (3, ViewPattern::Custom(vec![(1, 1), (1, 1)])),
        ] {
            assert!(matches!(ViewSelection::from_pattern(n, &p), Err(Error::InfeasiblePattern { .. })));
        }
    }

    #[test]
    fn pattern_text_round_trips() {
        for p in [
            ViewPattern::Corners4,
            ViewPattern::Grid3x3,
            ViewPattern::Full,
            ViewPattern::Custom(vec![(1, 2), (0, 0)]),
        ] {
            assert_eq!(p.to_string().parse::<ViewPattern>().unwrap(), p);
        }
        assert!("diagonal".parse::<ViewPattern>().is_err());
    }
}
