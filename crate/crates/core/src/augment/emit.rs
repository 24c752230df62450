use std::collections::BTreeSet;

use super::AugmentError;
use crate::lang::{
    print, Assignment, BinOp, Branch, Command, ConstDecl, ConstType, Expr, ExprKind, ModelAst, Role, Span, UnOp,
    VarDecl, VarType,
};
use crate::uncertainty::{verdict_bits, verdicts_from_index, ConfusionTensor};

fn e(kind: ExprKind) -> Expr {
    Expr::new(kind, Span::default())
}

fn ident(name: &str) -> Expr {
    e(ExprKind::Ident(name.to_string()))
}

fn int(i: i64) -> Expr {
    e(ExprKind::Int(i))
}

fn bin(op: BinOp, a: Expr, b: Expr) -> Expr {
    e(ExprKind::Binary(op, Box::new(a), Box::new(b)))
}

fn assign(var: &str, value: Expr) -> Assignment {
    Assignment { var: var.to_string(), value, span: Span::default() }
}

/// Integer value of a closed expression over literals and defined constants.
fn const_int(ast: &ModelAst, x: &Expr, depth: usize) -> Option<i64> {
    if depth > 64 {
        return None;
    }
    match &x.kind {
        ExprKind::Int(i) => Some(*i),
        ExprKind::Ident(name) => {
            let c = ast.constants.iter().find(|c| &c.name == name)?;
            const_int(ast, c.value.as_ref()?, depth + 1)
        }
        ExprKind::Unary(UnOp::Neg, a) => const_int(ast, a, depth + 1).map(|v| -v),
        ExprKind::Binary(op, a, b) => {
            let (a, b) = (const_int(ast, a, depth + 1)?, const_int(ast, b, depth + 1)?);
            match op {
                BinOp::Add => a.checked_add(b),
                BinOp::Sub => a.checked_sub(b),
                BinOp::Mul => a.checked_mul(b),
                _ => None,
            }
        }
        _ => None,
    }
}

/// Truth value of `x` when it does not depend on any variable.
fn const_bool(ast: &ModelAst, x: &Expr) -> Option<bool> {
    match &x.kind {
        ExprKind::Bool(b) => Some(*b),
        ExprKind::Unary(UnOp::Not, a) => const_bool(ast, a).map(|b| !b),
        ExprKind::Binary(BinOp::And, a, b) => match (const_bool(ast, a), const_bool(ast, b)) {
            (Some(false), _) | (_, Some(false)) => Some(false),
            (Some(true), Some(true)) => Some(true),
            _ => None,
        },
        ExprKind::Binary(BinOp::Or, a, b) => match (const_bool(ast, a), const_bool(ast, b)) {
            (Some(true), _) | (_, Some(true)) => Some(true),
            (Some(false), Some(false)) => Some(false),
            _ => None,
        },
        ExprKind::Binary(op, a, b) => {
            let (a, b) = (const_int(ast, a, 0)?, const_int(ast, b, 0)?);
            Some(match op {
                BinOp::Eq => a == b,
                BinOp::Ne => a != b,
                BinOp::Lt => a < b,
                BinOp::Le => a <= b,
                BinOp::Gt => a > b,
                BinOp::Ge => a >= b,
                _ => return None,
            })
        }
        _ => None,
    }
}

fn substitute(x: &Expr, var: &str, value: i64) -> Expr {
    let kind = match &x.kind {
        ExprKind::Ident(n) if n == var => ExprKind::Int(value),
        ExprKind::Unary(op, a) => ExprKind::Unary(*op, Box::new(substitute(a, var, value))),
        ExprKind::Binary(op, a, b) => {
            ExprKind::Binary(*op, Box::new(substitute(a, var, value)), Box::new(substitute(b, var, value)))
        }
        ExprKind::Ite(c, a, b) => ExprKind::Ite(
            Box::new(substitute(c, var, value)),
            Box::new(substitute(a, var, value)),
            Box::new(substitute(b, var, value)),
        ),
        ExprKind::Call(f, args) => ExprKind::Call(*f, args.iter().map(|a| substitute(a, var, value)).collect()),
        other => other.clone(),
    };
    Expr::new(kind, x.span)
}

/// Whether `x`, with formulas expanded, mentions `var`.
fn mentions(ast: &ModelAst, x: &Expr, var: &str, depth: usize) -> bool {
    let mut found = false;
    x.visit_idents(&mut |name, _| {
        if name == var {
            found = true;
        } else if depth < 64 {
            if let Some(f) = ast.formulas.iter().find(|f| f.name == name) {
                found |= mentions(ast, &f.expr, var, depth + 1);
            }
        }
    });
    found
}

fn conjunction(parts: Vec<Expr>) -> Expr {
    parts.into_iter().reduce(|a, b| bin(BinOp::And, a, b)).unwrap_or_else(|| e(ExprKind::Bool(true)))
}

/// Source text of the DNN-perception counterpart of `ast`.
///
/// The environment module gains a predicted class `khat` and one boolean per
/// verifier. Every environment branch is split over the predictions for the
/// class it moves to, weighted by the exact count ratio, and every controller
/// command is copied once per prediction with the true class replaced by the
/// predicted one and its parameters renamed `<name>_k<khat>_v<bits>`.
/// Environment commands must set the class to a constant or leave it unchanged.
pub fn emit_pm(ast: &ModelAst, tensor: &ConfusionTensor) -> Result<String, AugmentError> {
    let fail = |m: String| AugmentError::Emit(m);
    let env_index = ast
        .modules
        .iter()
        .position(|m| m.role == Some(Role::Environment))
        .ok_or_else(|| AugmentError::MissingRoles("no environment module".into()))?;
    let ctrl_index = ast
        .modules
        .iter()
        .position(|m| m.role == Some(Role::Controller))
        .ok_or_else(|| AugmentError::MissingRoles("no controller module".into()))?;
    let k_decl =
        ast.modules[env_index].vars.first().ok_or_else(|| fail("environment module has no class variable".into()))?;
    let k_name = k_decl.name.clone();
    let classes = match &k_decl.ty {
        VarType::Range(lo, hi) => (const_int(ast, lo, 0), const_int(ast, hi, 0)),
        VarType::Bool => (None, None),
    };
    if classes != (Some(1), Some(tensor.classes() as i64)) {
        return Err(AugmentError::ArityMismatch {
            model: classes.1.unwrap_or(0).max(0) as usize,
            tensor: tensor.classes(),
        });
    }
    if ast.modules[env_index].vars.len() > 1 {
        return Err(AugmentError::AlreadyAugmented);
    }
    let n = tensor.verifiers();
    let k_count = tensor.classes() as u32;
    let khat = "khat".to_string();
    let verdict_names: Vec<String> = (1..=n).map(|i| format!("v{i}")).collect();
    let taken: BTreeSet<&str> = ast
        .constants
        .iter()
        .map(|c| c.name.as_str())
        .chain(ast.formulas.iter().map(|f| f.name.as_str()))
        .chain(ast.modules.iter().flat_map(|m| m.vars.iter().map(|v| v.name.as_str())))
        .collect();
    if let Some(clash) = std::iter::once(&khat).chain(&verdict_names).find(|n| taken.contains(n.as_str())) {
        return Err(fail(format!("identifier `{clash}` is already in use")));
    }

    let mut out = ast.clone();

    let env = &mut out.modules[env_index];
    let k_init = k_decl.init.clone().unwrap_or_else(|| int(1));
    env.vars.push(VarDecl {
        name: khat.clone(),
        ty: VarType::Range(int(1), int(k_count as i64)),
        init: Some(k_init),
        span: Span::default(),
    });
    for v in &verdict_names {
        env.vars.push(VarDecl {
            name: v.clone(),
            ty: VarType::Bool,
            init: Some(e(ExprKind::Bool(true))),
            span: Span::default(),
        });
    }
    let perceive = |b: &Branch, class: u32| -> Vec<Branch> {
        tensor
            .support(class)
            .into_iter()
            .map(|(kp, vi, _)| {
                let r = tensor.ratio(class, kp, vi);
                let ratio = bin(BinOp::Div, int(r.numerator as i64), int(r.denominator as i64));
                let prob = match &b.prob {
                    Some(p) => bin(BinOp::Mul, p.clone(), ratio),
                    None => ratio,
                };
                let mut updates = b.updates.clone();
                updates.push(assign(&khat, int(kp as i64)));
                for (name, bit) in verdict_names.iter().zip(verdicts_from_index(n, vi)) {
                    updates.push(assign(name, e(ExprKind::Bool(bit))));
                }
                Branch { prob: Some(prob), updates }
            })
            .collect()
    };
    let mut env_commands = Vec::new();
    for c in &env.commands {
        let mut targets = Vec::with_capacity(c.branches.len());
        for b in &c.branches {
            match b.updates.iter().find(|a| a.var == k_name) {
                Some(a) => match const_int(ast, &a.value, 0) {
                    Some(v) if (1..=k_count as i64).contains(&v) => targets.push(Some(v as u32)),
                    _ => {
                        return Err(fail(format!(
                            "line {}: the new value of `{k_name}` must be a constant class",
                            c.span.line
                        )))
                    }
                },
                None => targets.push(None),
            }
        }
        let splits: Vec<Option<u32>> =
            if targets.iter().any(Option::is_none) { (1..=k_count).map(Some).collect() } else { vec![None] };
        for current in splits {
            let guard = match current {
                Some(j) => {
                    let g = bin(BinOp::And, c.guard.clone(), bin(BinOp::Eq, ident(&k_name), int(j as i64)));
                    if const_bool(ast, &substitute(&g, &k_name, j as i64)) == Some(false) {
                        continue;
                    }
                    g
                }
                None => c.guard.clone(),
            };
            let branches = c
                .branches
                .iter()
                .zip(&targets)
                .flat_map(|(b, t)| perceive(b, t.or(current).expect("split commands fix the current class")))
                .collect();
            env_commands.push(Command { action: c.action.clone(), guard, branches, span: c.span });
        }
    }
    env.commands = env_commands;

    let controller_params: BTreeSet<&str> = ast.controller_params.iter().map(String::as_str).collect();
    let mut new_params: Vec<String> = Vec::new();
    let ctrl = &mut out.modules[ctrl_index];
    let mut ctrl_commands = Vec::new();
    for c in &ctrl.commands {
        for j in 1..=k_count {
            let guard = substitute(&c.guard, &k_name, j as i64);
            if mentions(ast, &guard, &k_name, 0) {
                return Err(fail(format!("line {}: controller guard reads `{k_name}` through a formula", c.span.line)));
            }
            let fixed = const_bool(ast, &guard);
            if fixed == Some(false) {
                continue;
            }
            for vi in 0..tensor.num_outcomes() {
                let verdicts = verdicts_from_index(n, vi);
                let mut parts = vec![bin(BinOp::Eq, ident(&khat), int(j as i64))];
                for (name, &bit) in verdict_names.iter().zip(&verdicts) {
                    let v = ident(name);
                    parts.push(if bit { v } else { e(ExprKind::Unary(UnOp::Not, Box::new(v))) });
                }
                if fixed.is_none() {
                    parts.push(guard.clone());
                }
                let suffix = format!("_k{j}_v{}", verdict_bits(&verdicts));
                let branches = c
                    .branches
                    .iter()
                    .map(|b| {
                        let prob = b.prob.as_ref().map(|p| match &p.kind {
                            ExprKind::Ident(name) if controller_params.contains(name.as_str()) => {
                                let renamed = format!("{name}{suffix}");
                                if !new_params.contains(&renamed) {
                                    new_params.push(renamed.clone());
                                }
                                Expr::new(ExprKind::Ident(renamed), p.span)
                            }
                            _ => substitute(p, &k_name, j as i64),
                        });
                        Branch { prob, updates: b.updates.clone() }
                    })
                    .collect();
                ctrl_commands.push(Command {
                    action: c.action.clone(),
                    guard: conjunction(parts),
                    branches,
                    span: c.span,
                });
            }
        }
    }
    ctrl.commands = ctrl_commands;

    out.constants.retain(|c| !controller_params.contains(c.name.as_str()));
    for name in &new_params {
        out.constants.push(ConstDecl { name: name.clone(), ty: ConstType::Double, value: None, span: Span::default() });
    }
    out.controller_params = new_params;
    Ok(print(&out))
}
