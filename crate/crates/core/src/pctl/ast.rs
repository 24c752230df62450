use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparison {
    Ge,
    Gt,
    Lt,
    Le,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Ge => value >= threshold,
            Comparison::Gt => value > threshold,
            Comparison::Lt => value < threshold,
            Comparison::Le => value <= threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Ge => ">=",
            Comparison::Gt => ">",
            Comparison::Lt => "<",
            Comparison::Le => "<=",
        }
    }

    /// Whether larger values are the "good" side of the comparison.
    pub fn is_lower_bound(self) -> bool {
        matches!(self, Comparison::Ge | Comparison::Gt)
    }
}

/// `~ threshold` or `=?`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Bound {
    Query,
    Compare(Comparison, f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StateFormula {
    True,
    Label(String),
    Not(Box<StateFormula>),
    And(Box<StateFormula>, Box<StateFormula>),
    /// `P~p [ψ]` nested inside a state formula.
    Prob {
        cmp: Comparison,
        threshold: f64,
        path: Box<PathFormula>,
    },
}

impl StateFormula {
    pub fn not(f: StateFormula) -> Self {
        StateFormula::Not(Box::new(f))
    }

    pub fn and(a: StateFormula, b: StateFormula) -> Self {
        StateFormula::And(Box::new(a), Box::new(b))
    }

    /// `a | b` as `!(!a & !b)`.
    pub fn or(a: StateFormula, b: StateFormula) -> Self {
        Self::not(Self::and(Self::not(a), Self::not(b)))
    }

    /// `a => b` as `!(a & !b)`.
    pub fn implies(a: StateFormula, b: StateFormula) -> Self {
        Self::not(Self::and(a, Self::not(b)))
    }

    pub fn visit_labels<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            StateFormula::True => {}
            StateFormula::Label(l) => f(l),
            StateFormula::Not(a) => a.visit_labels(f),
            StateFormula::And(a, b) => {
                a.visit_labels(f);
                b.visit_labels(f);
            }
            StateFormula::Prob { path, .. } => path.visit_labels(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PathFormula {
    Next(StateFormula),
    Until(StateFormula, StateFormula),
    BoundedUntil(StateFormula, StateFormula, u64),
}

impl PathFormula {
    fn visit_labels<'a>(&'a self, f: &mut impl FnMut(&'a str)) {
        match self {
            PathFormula::Next(a) => a.visit_labels(f),
            PathFormula::Until(a, b) | PathFormula::BoundedUntil(a, b, _) => {
                a.visit_labels(f);
                b.visit_labels(f);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RewardFormula {
    /// `C<=k`: reward accumulated over the first `k` steps.
    Cumulative(u64),
    /// `F Φ`: reward accumulated before first reaching `Φ`.
    Reach(StateFormula),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PctlQuery {
    Prob {
        bound: Bound,
        path: PathFormula,
    },
    /// `reward: None` selects the model's only reward structure.
    Reward {
        reward: Option<String>,
        bound: Bound,
        formula: RewardFormula,
    },
}

impl PctlQuery {
    pub fn bound(&self) -> Bound {
        match self {
            PctlQuery::Prob { bound, .. } | PctlQuery::Reward { bound, .. } => *bound,
        }
    }

    pub fn is_quantitative(&self) -> bool {
        self.bound() == Bound::Query
    }

    pub fn is_probability(&self) -> bool {
        matches!(self, PctlQuery::Prob { .. })
    }

    /// The same query with its bound replaced by `=?`.
    pub fn as_quantitative(&self) -> PctlQuery {
        let mut q = self.clone();
        match &mut q {
            PctlQuery::Prob { bound, .. } | PctlQuery::Reward { bound, .. } => *bound = Bound::Query,
        }
        q
    }

    /// Every atomic proposition the query mentions.
    pub fn labels(&self) -> Vec<&str> {
        let mut out = Vec::new();
        match self {
            PctlQuery::Prob { path, .. } => path.visit_labels(&mut |l| out.push(l)),
            PctlQuery::Reward { formula: RewardFormula::Reach(f), .. } => f.visit_labels(&mut |l| out.push(l)),
            PctlQuery::Reward { .. } => {}
        }
        out
    }
}

fn write_label(f: &mut fmt::Formatter<'_>, name: &str) -> fmt::Result {
    write!(f, "\"{name}\"")
}

impl StateFormula {
    fn fmt_prec(&self, f: &mut fmt::Formatter<'_>, prec: u8) -> fmt::Result {
        match self {
            StateFormula::True => f.write_str("true"),
            StateFormula::Not(a) if **a == StateFormula::True => f.write_str("false"),
            StateFormula::Label(l) => write_label(f, l),
            StateFormula::Not(a) => {
                f.write_str("!")?;
                a.fmt_prec(f, 2)
            }
            StateFormula::And(a, b) => {
                if prec > 1 {
                    f.write_str("(")?;
                }
                a.fmt_prec(f, 1)?;
                f.write_str(" & ")?;
                b.fmt_prec(f, 2)?;
                if prec > 1 {
                    f.write_str(")")?;
                }
                Ok(())
            }
            StateFormula::Prob { cmp, threshold, path } => {
                write!(f, "P{}{} [ {} ]", cmp.symbol(), threshold, path)
            }
        }
    }
}

impl fmt::Display for StateFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.fmt_prec(f, 0)
    }
}

impl fmt::Display for PathFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let operand = |f: &mut fmt::Formatter<'_>, s: &StateFormula| s.fmt_prec(f, 2);
        match self {
            PathFormula::Next(a) => {
                f.write_str("X ")?;
                operand(f, a)
            }
            PathFormula::Until(a, b) => {
                operand(f, a)?;
                f.write_str(" U ")?;
                operand(f, b)
            }
            PathFormula::BoundedUntil(a, b, k) => {
                operand(f, a)?;
                write!(f, " U<={k} ")?;
                operand(f, b)
            }
        }
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Query => f.write_str("=?"),
            Bound::Compare(c, t) => write!(f, "{}{}", c.symbol(), t),
        }
    }
}

impl fmt::Display for PctlQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PctlQuery::Prob { bound, path } => write!(f, "P{bound} [ {path} ]"),
            PctlQuery::Reward { reward, bound, formula } => {
                f.write_str("R")?;
                if let Some(r) = reward {
                    write!(f, "{{\"{r}\"}}")?;
                }
                write!(f, "{bound} [ ")?;
                match formula {
                    RewardFormula::Cumulative(k) => write!(f, "C<={k}")?,
                    RewardFormula::Reach(s) => {
                        f.write_str("F ")?;
                        s.fmt_prec(f, 2)?;
                    }
                }
                f.write_str(" ]")
            }
        }
    }
}
