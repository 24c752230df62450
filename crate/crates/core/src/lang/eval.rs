use std::fmt;

use super::ast::{BinOp, Func, UnOp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Int(i64),
    Real(f64),
    Bool(bool),
}

impl Value {
    pub fn as_f64(self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(i as f64),
            Value::Real(r) => Some(r),
            Value::Bool(_) => None,
        }
    }

    pub fn as_bool(self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(b),
            _ => None,
        }
    }

    /// Integer encoding used for state variables (booleans as 0/1).
    pub fn as_state_int(self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(i),
            Value::Bool(b) => Some(b as i64),
            Value::Real(r) if r.fract() == 0.0 && r.abs() < 9.0e15 => Some(r as i64),
            Value::Real(_) => None,
        }
    }

    /// Parses `true`, `false`, an integer or a real.
    pub fn parse(text: &str) -> Option<Value> {
        match text.trim() {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            t => t.parse().map(Value::Int).ok().or_else(|| t.parse().ok().map(Value::Real)),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Bool(b) => write!(f, "{b}"),
        }
    }
}

/// Expression with constants and formulas resolved and variables indexed.
#[derive(Debug, Clone, PartialEq)]
pub enum CExpr {
    Const(Value),
    Var { index: usize, boolean: bool },
    Unary(UnOp, Box<CExpr>),
    Binary(BinOp, Box<CExpr>, Box<CExpr>),
    Ite(Box<CExpr>, Box<CExpr>, Box<CExpr>),
    Call(Func, Vec<CExpr>),
}

fn type_error(what: &str, v: Value) -> String {
    format!("expected {what}, found {v}")
}

fn num(v: Value) -> Result<f64, String> {
    v.as_f64().ok_or_else(|| type_error("a number", v))
}

fn boolean(v: Value) -> Result<bool, String> {
    v.as_bool().ok_or_else(|| type_error("a boolean", v))
}

impl CExpr {
    pub fn eval(&self, vars: &[i64]) -> Result<Value, String> {
        Ok(match self {
            CExpr::Const(v) => *v,
            CExpr::Var { index, boolean } => {
                let x = vars[*index];
                if *boolean {
                    Value::Bool(x != 0)
                } else {
                    Value::Int(x)
                }
            }
            CExpr::Unary(UnOp::Not, a) => Value::Bool(!boolean(a.eval(vars)?)?),
            CExpr::Unary(UnOp::Neg, a) => match a.eval(vars)? {
                Value::Int(i) => Value::Int(i.checked_neg().ok_or("integer overflow")?),
                Value::Real(r) => Value::Real(-r),
                v => return Err(type_error("a number", v)),
            },
            CExpr::Binary(op, a, b) => {
                // Short-circuit so guards like `x>0 & 1/x>1` stay defined.
                match op {
                    BinOp::And => return Ok(Value::Bool(boolean(a.eval(vars)?)? && boolean(b.eval(vars)?)?)),
                    BinOp::Or => return Ok(Value::Bool(boolean(a.eval(vars)?)? || boolean(b.eval(vars)?)?)),
                    BinOp::Implies => return Ok(Value::Bool(!boolean(a.eval(vars)?)? || boolean(b.eval(vars)?)?)),
                    _ => {}
                }
                binary(*op, a.eval(vars)?, b.eval(vars)?)?
            }
            CExpr::Ite(c, a, b) => {
                if boolean(c.eval(vars)?)? {
                    a.eval(vars)?
                } else {
                    b.eval(vars)?
                }
            }
            CExpr::Call(f, args) => {
                let vals = args.iter().map(|a| a.eval(vars)).collect::<Result<Vec<_>, _>>()?;
                call(*f, &vals)?
            }
        })
    }

    /// Evaluates subtrees that do not depend on variables.
    pub fn fold(self) -> CExpr {
        let folded = match self {
            CExpr::Unary(op, a) => CExpr::Unary(op, Box::new(a.fold())),
            CExpr::Binary(op, a, b) => CExpr::Binary(op, Box::new(a.fold()), Box::new(b.fold())),
            CExpr::Ite(c, a, b) => CExpr::Ite(Box::new(c.fold()), Box::new(a.fold()), Box::new(b.fold())),
            CExpr::Call(f, args) => CExpr::Call(f, args.into_iter().map(CExpr::fold).collect()),
            other => other,
        };
        if folded.is_constant() {
            if let Ok(v) = folded.eval(&[]) {
                return CExpr::Const(v);
            }
        }
        folded
    }

    fn is_constant(&self) -> bool {
        match self {
            CExpr::Const(_) => true,
            CExpr::Var { .. } => false,
            CExpr::Unary(_, a) => a.is_constant(),
            CExpr::Binary(_, a, b) => a.is_constant() && b.is_constant(),
            CExpr::Ite(c, a, b) => c.is_constant() && a.is_constant() && b.is_constant(),
            CExpr::Call(_, args) => args.iter().all(CExpr::is_constant),
        }
    }
}

fn binary(op: BinOp, a: Value, b: Value) -> Result<Value, String> {
    use Value::*;
    Ok(match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul => match (a, b) {
            (Int(x), Int(y)) => {
                let r = match op {
                    BinOp::Add => x.checked_add(y),
                    BinOp::Sub => x.checked_sub(y),
                    _ => x.checked_mul(y),
                };
                Int(r.ok_or("integer overflow")?)
            }
            _ => {
                let (x, y) = (num(a)?, num(b)?);
                Real(match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    _ => x * y,
                })
            }
        },
        BinOp::Div => {
            let (x, y) = (num(a)?, num(b)?);
            if y == 0.0 {
                return Err("division by zero".into());
            }
            Real(x / y)
        }
        BinOp::Eq | BinOp::Ne => {
            let eq = match (a, b) {
                (Bool(x), Bool(y)) => x == y,
                (Int(x), Int(y)) => x == y,
                (Bool(_), _) | (_, Bool(_)) => return Err(format!("cannot compare {a} with {b}")),
                _ => num(a)? == num(b)?,
            };
            Bool(if op == BinOp::Eq { eq } else { !eq })
        }
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            let (x, y) = match (a, b) {
                (Int(x), Int(y)) => (x as f64, y as f64),
                _ => (num(a)?, num(b)?),
            };
            Bool(match op {
                BinOp::Lt => x < y,
                BinOp::Le => x <= y,
                BinOp::Gt => x > y,
                _ => x >= y,
            })
        }
        BinOp::And | BinOp::Or | BinOp::Implies => {
            unreachable!("handled by short-circuit evaluation")
        }
    })
}

fn call(f: Func, args: &[Value]) -> Result<Value, String> {
    use Value::*;
    Ok(match f {
        Func::Min | Func::Max => {
            if args.iter().all(|v| matches!(v, Int(_))) {
                let ints = args.iter().filter_map(|v| if let Int(i) = v { Some(*i) } else { None });
                Int(if f == Func::Min { ints.min() } else { ints.max() }.ok_or("no arguments")?)
            } else {
                let mut acc = num(args[0])?;
                for v in &args[1..] {
                    let x = num(*v)?;
                    acc = if f == Func::Min { acc.min(x) } else { acc.max(x) };
                }
                Real(acc)
            }
        }
        Func::Floor => Int(num(args[0])?.floor() as i64),
        Func::Ceil => Int(num(args[0])?.ceil() as i64),
        Func::Mod => match (args[0], args[1]) {
            (Int(_), Int(0)) => return Err("modulo by zero".into()),
            (Int(x), Int(y)) => Int(x.rem_euclid(y)),
            (a, b) => return Err(format!("mod expects integers, found {a} and {b}")),
        },
    })
}
