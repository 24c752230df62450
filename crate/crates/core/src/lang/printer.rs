use std::fmt::Write as _;

use super::ast::*;

/// Pretty-prints an AST back to source. Binary operands are fully parenthesised.
pub fn print(ast: &ModelAst) -> String {
    let mut s = String::from("dtmc\n\n");
    if !ast.controller_params.is_empty() {
        let _ = writeln!(s, "// @controller-params: {}\n", ast.controller_params.join(","));
    }
    for c in &ast.constants {
        let ty = match c.ty {
            ConstType::Int => "int",
            ConstType::Double => "double",
            ConstType::Bool => "bool",
        };
        match &c.value {
            Some(v) => {
                let _ = writeln!(s, "const {ty} {} = {};", c.name, expr(v));
            }
            None => {
                let _ = writeln!(s, "const {ty} {};", c.name);
            }
        }
    }
    for f in &ast.formulas {
        let _ = writeln!(s, "formula {} = {};", f.name, expr(&f.expr));
    }
    for m in &ast.modules {
        s.push('\n');
        if let Some(role) = m.role {
            let _ = writeln!(s, "// @role: {}", role.name());
        }
        let _ = writeln!(s, "module {}", m.name);
        for v in &m.vars {
            let ty = match &v.ty {
                VarType::Bool => "bool".to_string(),
                VarType::Range(lo, hi) => format!("[{}..{}]", expr(lo), expr(hi)),
            };
            match &v.init {
                Some(init) => {
                    let _ = writeln!(s, "  {} : {ty} init {};", v.name, expr(init));
                }
                None => {
                    let _ = writeln!(s, "  {} : {ty};", v.name);
                }
            }
        }
        for c in &m.commands {
            let branches: Vec<String> = c
                .branches
                .iter()
                .map(|b| match &b.prob {
                    Some(p) => format!("{} : {}", expr(p), updates(&b.updates)),
                    None => updates(&b.updates),
                })
                .collect();
            let _ = writeln!(
                s,
                "  [{}] {} -> {};",
                c.action.as_deref().unwrap_or(""),
                expr(&c.guard),
                branches.join(" + ")
            );
        }
        s.push_str("endmodule\n");
    }
    for r in &ast.rewards {
        s.push('\n');
        if r.name.is_empty() {
            s.push_str("rewards\n");
        } else {
            let _ = writeln!(s, "rewards \"{}\"", r.name);
        }
        for item in &r.items {
            let prefix = match &item.kind {
                RewardKind::State => String::new(),
                RewardKind::Transition(a) => format!("[{}] ", a.as_deref().unwrap_or("")),
            };
            let _ = writeln!(s, "  {prefix}{} : {};", expr(&item.guard), expr(&item.value));
        }
        s.push_str("endrewards\n");
    }
    if !ast.labels.is_empty() {
        s.push('\n');
    }
    for l in &ast.labels {
        let _ = writeln!(s, "label \"{}\" = {};", l.name, expr(&l.expr));
    }
    s
}

fn updates(us: &[Assignment]) -> String {
    if us.is_empty() {
        return "true".to_string();
    }
    us.iter().map(|a| format!("({}'={})", a.var, expr(&a.value))).collect::<Vec<_>>().join(" & ")
}

pub fn expr(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Int(i) => i.to_string(),
        ExprKind::Real(r) => format!("{r:?}"),
        ExprKind::Bool(b) => b.to_string(),
        ExprKind::Ident(n) => n.clone(),
        ExprKind::Unary(UnOp::Not, a) => format!("!{}", atom(a)),
        ExprKind::Unary(UnOp::Neg, a) => format!("-{}", atom(a)),
        ExprKind::Binary(op, a, b) => format!("{} {} {}", atom(a), op.symbol(), atom(b)),
        ExprKind::Ite(c, a, b) => format!("{} ? {} : {}", atom(c), atom(a), atom(b)),
        ExprKind::Call(f, args) => {
            format!("{}({})", f.name(), args.iter().map(expr).collect::<Vec<_>>().join(", "))
        }
    }
}

fn atom(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Binary(..) | ExprKind::Ite(..) | ExprKind::Unary(..) => format!("({})", expr(e)),
        ExprKind::Real(r) if *r < 0.0 => format!("({})", expr(e)),
        ExprKind::Int(i) if *i < 0 => format!("({})", expr(e)),
        _ => expr(e),
    }
}
