use super::ast::{Bound, Comparison, PathFormula, PctlQuery, RewardFormula, StateFormula};
use super::PctlError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Str(String),
    Num(String),
    Sym(&'static str),
    End,
}

const SYMBOLS: [&str; 16] = ["<=", ">=", "=?", "=>", "<", ">", "=", "!", "&", "|", "(", ")", "[", "]", "{", "}"];

/// Single capital letters that name temporal or query operators elsewhere.
const FOREIGN_OPERATORS: [&str; 6] = ["G", "W", "S", "L", "A", "E"];

fn tokenize(src: &str) -> Result<Vec<(Tok, usize)>, PctlError> {
    let mut out = Vec::new();
    let mut i = 0;
    let b = src.as_bytes();
    while i < b.len() {
        let c = b[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'"' {
            let end = src[i + 1..].find('"').ok_or_else(|| PctlError::syntax(i, "unterminated label"))?;
            out.push((Tok::Str(src[i + 1..i + 1 + end].to_string()), i));
            i += end + 2;
        } else if c.is_ascii_alphabetic() || c == b'_' {
            let len = src[i..].find(|ch: char| !(ch.is_ascii_alphanumeric() || ch == '_')).unwrap_or(src.len() - i);
            out.push((Tok::Word(src[i..i + len].to_string()), i));
            i += len;
        } else if c.is_ascii_digit() || c == b'.' {
            let mut n = i;
            while n < b.len() && (b[n].is_ascii_digit() || b[n] == b'.') {
                n += 1;
            }
            if n < b.len() && (b[n] == b'e' || b[n] == b'E') {
                n += 1;
                if n < b.len() && (b[n] == b'+' || b[n] == b'-') {
                    n += 1;
                }
                while n < b.len() && b[n].is_ascii_digit() {
                    n += 1;
                }
            }
            out.push((Tok::Num(src[i..n].to_string()), i));
            i = n;
        } else if let Some(s) = SYMBOLS.iter().find(|s| src[i..].starts_with(**s)) {
            out.push((Tok::Sym(s), i));
            i += s.len();
        } else {
            let ch = src[i..].chars().next().unwrap_or('?');
            return Err(PctlError::syntax(i, format!("unexpected character `{ch}`")));
        }
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

/// Parses a query such as `P>=0.75 [ !"collision" U "done" ]` or
/// `R{"time"}=? [ F "done" ]`.
///
/// Besides `!` and `&`, state formulas accept `|`, `=>` and `false` as
/// abbreviations, and path formulas accept `F Φ` and `F<=k Φ` for
/// `true U Φ` and `true U<=k Φ`.
pub fn parse_query(text: &str) -> Result<PctlQuery, PctlError> {
    let mut p = Parser { toks: tokenize(text)?, pos: 0 };
    let q = p.query()?;
    p.expect_end()?;
    Ok(q)
}

/// Parses a standalone state formula.
pub fn parse_state_formula(text: &str) -> Result<StateFormula, PctlError> {
    let mut p = Parser { toks: tokenize(text)?, pos: 0 };
    let f = p.formula()?;
    p.expect_end()?;
    Ok(f)
}

impl Parser {
    fn current(&self) -> &(Tok, usize) {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn peek(&self) -> &Tok {
        &self.current().0
    }

    fn offset(&self) -> usize {
        self.current().1
    }

    /// Returns the current token and advances; `pos` may move past the end
    /// marker so callers can always step back by one.
    fn bump(&mut self) -> Tok {
        let t = self.peek().clone();
        self.pos += 1;
        t
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Tok::Sym(x) if *x == s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if matches!(self.peek(), Tok::Word(x) if x == w) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), PctlError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn expect_end(&mut self) -> Result<(), PctlError> {
        if *self.peek() == Tok::End {
            Ok(())
        } else {
            Err(self.unexpected("end of query"))
        }
    }

    fn unexpected(&self, wanted: &str) -> PctlError {
        if let Tok::Word(w) = self.peek() {
            if FOREIGN_OPERATORS.contains(&w.as_str()) {
                return PctlError::UnknownOperator(w.clone());
            }
        }
        let found = match self.peek() {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::End => "end of query".to_string(),
        };
        PctlError::syntax(self.offset(), format!("expected {wanted}, found {found}"))
    }

    fn query(&mut self) -> Result<PctlQuery, PctlError> {
        let at = self.offset();
        match self.bump() {
            Tok::Word(w) if w == "P" => {
                let bound = self.bound(true)?;
                self.expect_sym("[")?;
                let path = self.path()?;
                self.expect_sym("]")?;
                Ok(PctlQuery::Prob { bound, path })
            }
            Tok::Word(w) if w == "R" => {
                let reward = if self.eat_sym("{") {
                    let name = match self.bump() {
                        Tok::Str(s) | Tok::Word(s) => s,
                        _ => return Err(PctlError::syntax(at, "expected a reward structure name")),
                    };
                    self.expect_sym("}")?;
                    Some(name)
                } else {
                    None
                };
                let bound = self.bound(false)?;
                self.expect_sym("[")?;
                let formula = if self.eat_word("C") {
                    self.expect_sym("<=")?;
                    RewardFormula::Cumulative(self.step_bound()?)
                } else if self.eat_word("F") {
                    RewardFormula::Reach(self.unary()?)
                } else {
                    return Err(self.unexpected("`C<=k` or `F`"));
                };
                self.expect_sym("]")?;
                Ok(PctlQuery::Reward { reward, bound, formula })
            }
            Tok::Word(w) if w.len() == 1 && w.chars().all(|c| c.is_ascii_uppercase()) => {
                Err(PctlError::UnknownOperator(w))
            }
            _ => {
                self.pos -= 1;
                Err(self.unexpected("`P` or `R`"))
            }
        }
    }

    fn bound(&mut self, probability: bool) -> Result<Bound, PctlError> {
        if self.eat_sym("=?") {
            return Ok(Bound::Query);
        }
        let cmp = self.comparison()?;
        let at = self.offset();
        let value = self.number()?;
        if probability && !(0.0..=1.0).contains(&value) {
            return Err(PctlError::syntax(at, format!("probability bound {value} is outside [0, 1]")));
        }
        if !probability && !(value >= 0.0 && value.is_finite()) {
            return Err(PctlError::syntax(at, format!("reward bound {value} must be non-negative")));
        }
        Ok(Bound::Compare(cmp, value))
    }

    fn comparison(&mut self) -> Result<Comparison, PctlError> {
        let cmp = match self.peek() {
            Tok::Sym(">=") => Comparison::Ge,
            Tok::Sym(">") => Comparison::Gt,
            Tok::Sym("<") => Comparison::Lt,
            Tok::Sym("<=") => Comparison::Le,
            Tok::Sym("=") => return Err(PctlError::UnknownOperator("=".into())),
            _ => return Err(self.unexpected("a comparison or `=?`")),
        };
        self.bump();
        Ok(cmp)
    }

    fn number(&mut self) -> Result<f64, PctlError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(n) => n.parse().map_err(|_| PctlError::syntax(at, format!("bad number `{n}`"))),
            _ => {
                self.pos -= 1;
                Err(self.unexpected("a number"))
            }
        }
    }

    fn step_bound(&mut self) -> Result<u64, PctlError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(n) => match n.parse::<u64>() {
                Ok(k) if k >= 1 => Ok(k),
                _ => Err(PctlError::syntax(at, format!("step bound `{n}` must be a positive integer"))),
            },
            _ => {
                self.pos -= 1;
                Err(self.unexpected("a step bound"))
            }
        }
    }

    fn path(&mut self) -> Result<PathFormula, PctlError> {
        if self.eat_word("X") {
            return Ok(PathFormula::Next(self.unary()?));
        }
        if self.eat_word("F") {
            return if self.eat_sym("<=") {
                let k = self.step_bound()?;
                Ok(PathFormula::BoundedUntil(StateFormula::True, self.unary()?, k))
            } else {
                Ok(PathFormula::Until(StateFormula::True, self.unary()?))
            };
        }
        let lhs = self.formula()?;
        if !self.eat_word("U") {
            return Err(self.unexpected("`U`"));
        }
        if self.eat_sym("<=") {
            let k = self.step_bound()?;
            Ok(PathFormula::BoundedUntil(lhs, self.formula()?, k))
        } else {
            Ok(PathFormula::Until(lhs, self.formula()?))
        }
    }

    fn formula(&mut self) -> Result<StateFormula, PctlError> {
        let lhs = self.disjunction()?;
        if self.eat_sym("=>") {
            Ok(StateFormula::implies(lhs, self.formula()?))
        } else {
            Ok(lhs)
        }
    }

    fn disjunction(&mut self) -> Result<StateFormula, PctlError> {
        let mut lhs = self.conjunction()?;
        while self.eat_sym("|") {
            lhs = StateFormula::or(lhs, self.conjunction()?);
        }
        Ok(lhs)
    }

    fn conjunction(&mut self) -> Result<StateFormula, PctlError> {
        let mut lhs = self.unary()?;
        while self.eat_sym("&") {
            lhs = StateFormula::and(lhs, self.unary()?);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<StateFormula, PctlError> {
        if self.eat_sym("!") {
            return Ok(StateFormula::not(self.unary()?));
        }
        if self.eat_sym("(") {
            let f = self.formula()?;
            self.expect_sym(")")?;
            return Ok(f);
        }
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(StateFormula::Label(s))
            }
            Tok::Word(w) if w == "true" => {
                self.bump();
                Ok(StateFormula::True)
            }
            Tok::Word(w) if w == "false" => {
                self.bump();
                Ok(StateFormula::not(StateFormula::True))
            }
            Tok::Word(w) if w == "P" => {
                self.bump();
                let Bound::Compare(cmp, threshold) = self.bound(true)? else {
                    return Err(PctlError::syntax(self.offset(), "nested `P` needs a comparison bound"));
                };
                self.expect_sym("[")?;
                let path = self.path()?;
                self.expect_sym("]")?;
                Ok(StateFormula::Prob { cmp, threshold, path: Box::new(path) })
            }
            Tok::Word(w) if w.len() == 1 && w.chars().all(|c| c.is_ascii_uppercase()) => {
                Err(PctlError::UnknownOperator(w))
            }
            _ => Err(self.unexpected("a state formula")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robot_constraint() {
        let q = parse_query(r#"P>=0.75 [ !"collision" U "done" ]"#).unwrap();
        assert_eq!(
            q,
            PctlQuery::Prob {
                bound: Bound::Compare(Comparison::Ge, 0.75),
                path: PathFormula::Until(
                    StateFormula::not(StateFormula::Label("collision".into())),
                    StateFormula::Label("done".into())
                ),
            }
        );
    }

    #[test]
    fn reward_queries() {
        let q = parse_query(r#"R{"risk"}<=100 [ C<=2000 ]"#).unwrap();
        assert_eq!(
            q,
            PctlQuery::Reward {
                reward: Some("risk".into()),
                bound: Bound::Compare(Comparison::Le, 100.0),
                formula: RewardFormula::Cumulative(2000),
            }
        );
        let q = parse_query(r#"R{"time"}=? [ F "done" ]"#).unwrap();
        assert!(matches!(q, PctlQuery::Reward { formula: RewardFormula::Reach(_), bound: Bound::Query, .. }));
    }

    #[test]
    fn next_true() {
        assert_eq!(
            parse_query("P=? [ X true ]").unwrap(),
            PctlQuery::Prob { bound: Bound::Query, path: PathFormula::Next(StateFormula::True) }
        );
    }

    #[test]
    fn sugar_expands() {
        let q = parse_query(r#"P=? [ F<=3 "a" | "b" ]"#);
        // `F` binds a unary operand, so the disjunction needs parentheses.
        assert!(q.is_err());
        let q = parse_query(r#"P=? [ F<=3 ("a" | "b") ]"#).unwrap();
        let a = StateFormula::Label("a".into());
        let b = StateFormula::Label("b".into());
        assert_eq!(
            q,
            PctlQuery::Prob {
                bound: Bound::Query,
                path: PathFormula::BoundedUntil(StateFormula::True, StateFormula::or(a, b), 3)
            }
        );
    }

    #[test]
    fn nested_probability() {
        let q = parse_query(r#"P=? [ true U P>0.5 [ X "a" ] ]"#).unwrap();
        let PctlQuery::Prob { path: PathFormula::Until(_, StateFormula::Prob { cmp, .. }), .. } = q else {
            panic!("{q:?}")
        };
        assert_eq!(cmp, Comparison::Gt);
    }

    #[test]
    fn errors() {
        assert!(matches!(parse_query(r#"P=? [ G "a" ]"#), Err(PctlError::UnknownOperator(op)) if op == "G"));
        assert!(matches!(parse_query("Q=? [ X true ]"), Err(PctlError::UnknownOperator(_))));
        assert!(matches!(parse_query("P>=1.5 [ X true ]"), Err(PctlError::Syntax { .. })));
        assert!(matches!(parse_query(r#"P=? [ "a" U<=0 "b" ]"#), Err(PctlError::Syntax { .. })));
        assert!(matches!(parse_query("P=? [ X true"), Err(PctlError::Syntax { .. })));
        assert!(matches!(parse_query(r#"R=? [ C<=2.5 ]"#), Err(PctlError::Syntax { .. })));
    }

    #[test]
    fn display_reparses() {
        for src in [
            r#"P>=0.75 [ !"collision" U "done" ]"#,
            r#"R{"time"}=? [ F "done" ]"#,
            r#"P=? [ ("a" | !"b") & "c" U<=4 false ]"#,
            r#"R<=3 [ C<=10 ]"#,
            r#"P=? [ X P<0.2 [ "a" U "b" ] ]"#,
        ] {
            let q = parse_query(src).unwrap();
            assert_eq!(parse_query(&q.to_string()).unwrap(), q, "{src} -> {q}");
        }
    }
}
