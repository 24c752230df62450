use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::ast::*;
use super::eval::{CExpr, Value};
use super::LangError;
use crate::markov::{
    ExplicitPdtmc, ModelBuilder, StateId, StateTuple, Weight, DEFAULT_STATE_CAP, STOCHASTIC_TOLERANCE,
};

#[derive(Debug, Clone)]
pub struct BuildOptions {
    /// Values replacing (or supplying) constant definitions.
    pub constants: BTreeMap<String, Value>,
    /// Constants kept symbolic in addition to the undefined ones.
    pub params: BTreeSet<String>,
    pub state_cap: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { constants: BTreeMap::new(), params: BTreeSet::new(), state_cap: DEFAULT_STATE_CAP }
    }
}

impl BuildOptions {
    pub fn with_constant(mut self, name: &str, value: Value) -> Self {
        self.constants.insert(name.to_string(), value);
        self
    }

    pub fn with_param(mut self, name: &str) -> Self {
        self.params.insert(name.to_string());
        self
    }
}

struct Var {
    name: String,
    lo: i64,
    hi: i64,
    init: i64,
    boolean: bool,
}

enum Prob {
    One,
    Expr(CExpr),
    Param(String),
}

struct CBranch {
    prob: Prob,
    updates: Vec<(usize, CExpr)>,
}

struct CCommand {
    guard: CExpr,
    branches: Vec<CBranch>,
    span: Span,
}

struct Ctx<'a> {
    consts: HashMap<String, Value>,
    params: BTreeSet<String>,
    var_index: HashMap<&'a str, usize>,
    vars: Vec<Var>,
    formulas: HashMap<&'a str, &'a Expr>,
}

fn invalid(span: Span, message: impl Into<String>) -> LangError {
    LangError::InvalidExpression { line: span.line, col: span.col, message: message.into() }
}

impl<'a> Ctx<'a> {
    fn compile(&self, e: &Expr) -> Result<CExpr, LangError> {
        Ok(match &e.kind {
            ExprKind::Int(i) => CExpr::Const(Value::Int(*i)),
            ExprKind::Real(r) => CExpr::Const(Value::Real(*r)),
            ExprKind::Bool(b) => CExpr::Const(Value::Bool(*b)),
            ExprKind::Ident(name) => {
                if let Some(v) = self.consts.get(name) {
                    CExpr::Const(*v)
                } else if let Some(&i) = self.var_index.get(name.as_str()) {
                    CExpr::Var { index: i, boolean: self.vars[i].boolean }
                } else if let Some(f) = self.formulas.get(name.as_str()) {
                    self.compile(f)?
                } else if self.params.contains(name) {
                    return Err(invalid(
                        e.span,
                        format!("parameter `{name}` may only appear as a whole branch probability"),
                    ));
                } else {
                    return Err(LangError::UnboundIdentifier {
                        name: name.clone(),
                        line: e.span.line,
                        col: e.span.col,
                    });
                }
            }
            ExprKind::Unary(op, a) => CExpr::Unary(*op, Box::new(self.compile(a)?)),
            ExprKind::Binary(op, a, b) => CExpr::Binary(*op, Box::new(self.compile(a)?), Box::new(self.compile(b)?)),
            ExprKind::Ite(c, a, b) => {
                CExpr::Ite(Box::new(self.compile(c)?), Box::new(self.compile(a)?), Box::new(self.compile(b)?))
            }
            ExprKind::Call(f, args) => CExpr::Call(*f, args.iter().map(|a| self.compile(a)).collect::<Result<_, _>>()?),
        }
        .fold())
    }

    fn constant(&self, e: &Expr) -> Result<Value, LangError> {
        self.compile(e)?.eval(&[]).map_err(|m| invalid(e.span, m))
    }
}

fn resolve_constants(
    ast: &ModelAst,
    opts: &BuildOptions,
) -> Result<(HashMap<String, Value>, BTreeSet<String>), LangError> {
    let declared: HashMap<&str, &ConstDecl> = ast.constants.iter().map(|c| (c.name.as_str(), c)).collect();
    for name in opts.constants.keys() {
        if !declared.contains_key(name.as_str()) {
            return Err(LangError::UnknownOverride(name.clone()));
        }
    }
    for name in &opts.params {
        if !declared.contains_key(name.as_str()) {
            return Err(LangError::UnboundIdentifier { name: name.clone(), line: 0, col: 0 });
        }
    }
    let mut params = BTreeSet::new();
    for c in &ast.constants {
        let symbolic = c.value.is_none() || opts.params.contains(&c.name) || ast.controller_params.contains(&c.name);
        if symbolic && !opts.constants.contains_key(&c.name) {
            params.insert(c.name.clone());
        }
    }

    let mut values: HashMap<String, Value> = HashMap::new();
    for (name, v) in &opts.constants {
        values.insert(name.clone(), *v);
    }
    fn resolve(
        name: &str,
        declared: &HashMap<&str, &ConstDecl>,
        params: &BTreeSet<String>,
        values: &mut HashMap<String, Value>,
    ) -> Result<(), LangError> {
        if values.contains_key(name) || params.contains(name) {
            return Ok(());
        }
        let decl = declared[name];
        let expr = decl.value.as_ref().expect("undefined constants are parameters");
        let mut deps = Vec::new();
        expr.visit_idents(&mut |n, _| deps.push(n.to_string()));
        for d in deps {
            if declared.contains_key(d.as_str()) {
                resolve(&d, declared, params, values)?;
            }
        }
        let ctx = Ctx {
            consts: values.clone(),
            params: params.clone(),
            var_index: HashMap::new(),
            vars: Vec::new(),
            formulas: HashMap::new(),
        };
        let v = ctx.constant(expr)?;
        values.insert(name.to_string(), v);
        Ok(())
    }
    for c in &ast.constants {
        resolve(&c.name, &declared, &params, &mut values)?;
    }

    for c in &ast.constants {
        let Some(v) = values.get_mut(&c.name) else {
            continue;
        };
        *v = match (c.ty, *v) {
            (ConstType::Double, Value::Int(i)) => Value::Real(i as f64),
            (ConstType::Int, Value::Int(_))
            | (ConstType::Double, Value::Real(_))
            | (ConstType::Bool, Value::Bool(_)) => *v,
            (ty, v) => {
                return Err(invalid(c.span, format!("constant `{}` of type {ty:?} cannot hold {v}", c.name)));
            }
        };
    }
    Ok((values, params))
}

/// Builds the reachable state space of `ast` by breadth-first exploration.
pub fn build(ast: &ModelAst, opts: &BuildOptions) -> Result<ExplicitPdtmc, LangError> {
    let (consts, params) = resolve_constants(ast, opts)?;
    let mut ctx = Ctx {
        consts,
        params,
        var_index: HashMap::new(),
        vars: Vec::new(),
        formulas: ast.formulas.iter().map(|f| (f.name.as_str(), &f.expr)).collect(),
    };

    let mut var_module = Vec::new();
    for (mi, m) in ast.modules.iter().enumerate() {
        for v in &m.vars {
            let (lo, hi, boolean) = match &v.ty {
                VarType::Bool => (0, 1, true),
                VarType::Range(lo, hi) => {
                    let range_err = |message: String| LangError::RangeError {
                        name: v.name.clone(),
                        line: v.span.line,
                        col: v.span.col,
                        message,
                    };
                    let lo = ctx
                        .constant(lo)?
                        .as_state_int()
                        .ok_or_else(|| range_err("lower bound is not an integer".into()))?;
                    let hi = ctx
                        .constant(hi)?
                        .as_state_int()
                        .ok_or_else(|| range_err("upper bound is not an integer".into()))?;
                    if lo > hi {
                        return Err(range_err(format!("empty range [{lo}..{hi}]")));
                    }
                    (lo, hi, false)
                }
            };
            let init = match &v.init {
                Some(e) => {
                    ctx.constant(e)?.as_state_int().ok_or_else(|| invalid(v.span, "initial value is not an integer"))?
                }
                None => lo,
            };
            if init < lo || init > hi {
                return Err(LangError::RangeError {
                    name: v.name.clone(),
                    line: v.span.line,
                    col: v.span.col,
                    message: format!("initial value {init} outside [{lo}..{hi}]"),
                });
            }
            ctx.var_index.insert(v.name.as_str(), ctx.vars.len());
            ctx.vars.push(Var { name: v.name.clone(), lo, hi, init, boolean });
            var_module.push(mi);
        }
    }

    let projection = Projection::new(ast, &var_module, &ctx.vars)?;

    let mut unlabelled = Vec::new();
    let mut by_action: BTreeMap<String, Vec<Vec<CCommand>>> = BTreeMap::new();
    let mut action_order: Vec<String> = Vec::new();
    for (mi, m) in ast.modules.iter().enumerate() {
        for c in &m.commands {
            let branches = c
                .branches
                .iter()
                .map(|b| {
                    let prob = match &b.prob {
                        None => Prob::One,
                        Some(Expr { kind: ExprKind::Ident(n), .. }) if ctx.params.contains(n) => Prob::Param(n.clone()),
                        Some(e) => Prob::Expr(ctx.compile(e)?),
                    };
                    let updates = b
                        .updates
                        .iter()
                        .map(|a| Ok((ctx.var_index[a.var.as_str()], ctx.compile(&a.value)?)))
                        .collect::<Result<_, LangError>>()?;
                    Ok(CBranch { prob, updates })
                })
                .collect::<Result<Vec<_>, LangError>>()?;
            let cmd = CCommand { guard: ctx.compile(&c.guard)?, branches, span: c.span };
            match &c.action {
                None => unlabelled.push(cmd),
                Some(a) => {
                    let per_module = by_action.entry(a.clone()).or_insert_with(|| {
                        action_order.push(a.clone());
                        (0..ast.modules.len()).map(|_| Vec::new()).collect()
                    });
                    per_module[mi].push(cmd);
                }
            }
        }
    }
    let has_commands = !unlabelled.is_empty() || !by_action.is_empty();

    let labels: Vec<(String, CExpr)> =
        ast.labels.iter().map(|l| Ok((l.name.clone(), ctx.compile(&l.expr)?))).collect::<Result<_, LangError>>()?;
    struct CReward {
        kind: RewardKind,
        guard: CExpr,
        value: CExpr,
        span: Span,
    }
    let rewards: Vec<(String, Vec<CReward>)> = ast
        .rewards
        .iter()
        .map(|r| {
            let items = r
                .items
                .iter()
                .map(|i| {
                    Ok(CReward {
                        kind: i.kind.clone(),
                        guard: ctx.compile(&i.guard)?,
                        value: ctx.compile(&i.value)?,
                        span: i.span,
                    })
                })
                .collect::<Result<_, LangError>>()?;
            Ok((r.name.clone(), items))
        })
        .collect::<Result<_, LangError>>()?;

    let mut b = ModelBuilder::new().with_state_cap(opts.state_cap);
    let param_ids: HashMap<&str, _> = ctx.params.iter().map(|p| (p.as_str(), b.param(p))).collect();
    let reward_idx: Vec<usize> = rewards.iter().map(|(n, _)| b.reward(n)).collect();
    for (name, _) in &labels {
        b.declare_label(name);
    }

    let init: Vec<i64> = ctx.vars.iter().map(|v| v.init).collect();
    let mut valuations: Vec<Vec<i64>> = Vec::new();
    let mut queue = VecDeque::new();
    let intern =
        |b: &mut ModelBuilder, vals: Vec<i64>, valuations: &mut Vec<Vec<i64>>, queue: &mut VecDeque<StateId>| {
            let tuple = projection.tuple(&vals, &ctx.vars)?;
            let (id, fresh) = b.intern(tuple).map_err(LangError::from)?;
            if fresh {
                valuations.push(vals);
                queue.push_back(id);
            }
            Ok::<StateId, LangError>(id)
        };
    let s0 = intern(&mut b, init, &mut valuations, &mut queue)?;
    b.set_initial(s0);
    b.add_label("init", s0);

    let eval_at = |e: &CExpr, vals: &[i64], span: Span| e.eval(vals).map_err(|m| invalid(span, m));
    let eval_bool = |e: &CExpr, vals: &[i64], span: Span| {
        eval_at(e, vals, span)?.as_bool().ok_or_else(|| invalid(span, "expected a boolean"))
    };
    let describe = |vals: &[i64]| -> String {
        ctx.vars.iter().zip(vals).map(|(v, x)| format!("{}={}", v.name, x)).collect::<Vec<_>>().join(", ")
    };

    while let Some(s) = queue.pop_front() {
        let vals = valuations[s.index()].clone();

        for (name, e) in &labels {
            if eval_bool(e, &vals, Span::default())? {
                b.add_label(name, s);
            }
        }
        for ((_, items), &ri) in rewards.iter().zip(&reward_idx) {
            let mut total = 0.0;
            for item in items.iter().filter(|i| i.kind == RewardKind::State) {
                if eval_bool(&item.guard, &vals, item.span)? {
                    total += reward_value(&item.value, &vals, item.span)?;
                }
            }
            if total != 0.0 {
                b.add_state_reward(ri, s, total)?;
            }
        }

        // Each choice is (action, branches); several enabled choices are resolved uniformly.
        let mut choices: Vec<(Option<&str>, Vec<(Weight, Vec<i64>)>, Span)> = Vec::new();
        for c in &unlabelled {
            if eval_bool(&c.guard, &vals, c.span)? {
                let branches = expand(&[c], &vals, &param_ids, &ctx)?;
                choices.push((None, branches, c.span));
            }
        }
        for action in &action_order {
            let per_module = &by_action[action];
            let mut enabled: Vec<Vec<&CCommand>> = Vec::new();
            let mut blocked = false;
            for cmds in per_module.iter().filter(|c| !c.is_empty()) {
                let mut on = Vec::new();
                for c in cmds {
                    if eval_bool(&c.guard, &vals, c.span)? {
                        on.push(c);
                    }
                }
                if on.is_empty() {
                    blocked = true;
                    break;
                }
                enabled.push(on);
            }
            if blocked {
                continue;
            }
            let mut combos: Vec<Vec<&CCommand>> = vec![Vec::new()];
            for on in &enabled {
                combos = combos
                    .into_iter()
                    .flat_map(|prefix| {
                        on.iter().map(move |c| {
                            let mut p = prefix.clone();
                            p.push(*c);
                            p
                        })
                    })
                    .collect();
            }
            for combo in combos {
                let branches = expand(&combo, &vals, &param_ids, &ctx)?;
                choices.push((Some(action.as_str()), branches, combo[0].span));
            }
        }

        if choices.is_empty() {
            if has_commands {
                return Err(LangError::CompositionDeadlock { state: describe(&vals) });
            }
            b.add_transition(s, s, Weight::constant(1.0))?;
            continue;
        }

        for (action, branches, span) in &choices {
            if branches.iter().all(|(w, _)| w.is_constant()) {
                let sum: f64 = branches.iter().map(|(w, _)| w.coeff).sum();
                if (sum - 1.0).abs() > STOCHASTIC_TOLERANCE {
                    return Err(LangError::RowSum {
                        state: describe(&vals),
                        action: action.unwrap_or("").to_string(),
                        line: span.line,
                        sum,
                    });
                }
            }
        }

        let share = 1.0 / choices.len() as f64;
        // target -> (total weight, weighted reward per structure)
        let mut acc: BTreeMap<StateId, (f64, Vec<f64>)> = BTreeMap::new();
        for (action, branches, _) in choices {
            let mut item_rewards = vec![0.0; rewards.len()];
            for (ri, (_, items)) in rewards.iter().enumerate() {
                for item in items {
                    let RewardKind::Transition(a) = &item.kind else {
                        continue;
                    };
                    if a.as_deref() == action && eval_bool(&item.guard, &vals, item.span)? {
                        item_rewards[ri] += reward_value(&item.value, &vals, item.span)?;
                    }
                }
            }
            for (w, target) in branches {
                let w = w.scaled(share);
                let t = intern(&mut b, target, &mut valuations, &mut queue)?;
                b.add_transition(s, t, w)?;
                let entry = acc.entry(t).or_insert_with(|| (0.0, vec![0.0; rewards.len()]));
                entry.0 += w.coeff;
                for (slot, r) in entry.1.iter_mut().zip(&item_rewards) {
                    *slot += w.coeff * r;
                }
            }
        }
        for (t, (total, weighted)) in acc {
            for (ri, wr) in weighted.into_iter().enumerate() {
                if wr != 0.0 && total > 0.0 {
                    b.add_transition_reward(reward_idx[ri], s, t, wr / total)?;
                }
            }
        }
    }

    Ok(b.finish()?)
}

fn reward_value(e: &CExpr, vals: &[i64], span: Span) -> Result<f64, LangError> {
    let v = e.eval(vals).map_err(|m| invalid(span, m))?;
    let x = v.as_f64().ok_or_else(|| invalid(span, "reward must be numeric"))?;
    if !x.is_finite() || x < 0.0 {
        return Err(invalid(span, format!("reward value {x} is negative or not finite")));
    }
    Ok(x)
}

/// Product distribution of the commands in `combo` at valuation `vals`.
fn expand(
    combo: &[&CCommand],
    vals: &[i64],
    param_ids: &HashMap<&str, crate::markov::ParamId>,
    ctx: &Ctx,
) -> Result<Vec<(Weight, Vec<i64>)>, LangError> {
    let mut dist: Vec<(Weight, Vec<i64>)> = vec![(Weight::constant(1.0), vals.to_vec())];
    for c in combo {
        let mut next = Vec::new();
        for (w, partial) in &dist {
            for br in &c.branches {
                let bw = match &br.prob {
                    Prob::One => Weight::constant(1.0),
                    Prob::Param(p) => Weight::param(param_ids[p.as_str()]),
                    Prob::Expr(e) => {
                        let p = e
                            .eval(vals)
                            .map_err(|m| invalid(c.span, m))?
                            .as_f64()
                            .ok_or_else(|| invalid(c.span, "probability must be numeric"))?;
                        if !p.is_finite() || p < 0.0 {
                            return Err(invalid(c.span, format!("probability {p} is negative or not finite")));
                        }
                        Weight::constant(p)
                    }
                };
                if bw.coeff == 0.0 {
                    continue;
                }
                let param = match (w.param, bw.param) {
                    (Some(_), Some(_)) => {
                        return Err(invalid(
                            c.span,
                            "synchronising two parametric branches yields a product of parameters",
                        ))
                    }
                    (a, b) => a.or(b),
                };
                let mut target = partial.clone();
                for (var, e) in &br.updates {
                    let x = e
                        .eval(vals)
                        .map_err(|m| invalid(c.span, m))?
                        .as_state_int()
                        .ok_or_else(|| invalid(c.span, "update value is not an integer"))?;
                    let v = &ctx.vars[*var];
                    if x < v.lo || x > v.hi {
                        return Err(LangError::RangeError {
                            name: v.name.clone(),
                            line: c.span.line,
                            col: c.span.col,
                            message: format!("update to {x} leaves [{}..{}]", v.lo, v.hi),
                        });
                    }
                    target[*var] = x;
                }
                next.push((Weight { coeff: w.coeff * bw.coeff, param }, target));
            }
        }
        dist = next;
    }
    Ok(dist)
}

/// Maps variable valuations onto `(z, k, t, c)` using module roles.
/// Where each variable lands in the state tuple. The environment module's
/// first variable is the true class `k`; an optional second integer variable
/// is the predicted class and any further booleans are verifier verdicts.
struct Projection {
    z: Vec<usize>,
    k: Option<usize>,
    khat: Option<usize>,
    v: Vec<usize>,
    t: Option<usize>,
    c: Vec<usize>,
}

impl Projection {
    fn new(ast: &ModelAst, var_module: &[usize], vars: &[Var]) -> Result<Self, LangError> {
        let mut p = Projection { z: Vec::new(), k: None, khat: None, v: Vec::new(), t: None, c: Vec::new() };
        for (vi, &mi) in var_module.iter().enumerate() {
            let m = &ast.modules[mi];
            match m.role {
                Some(Role::Environment) => {
                    if p.k.is_none() {
                        p.k = Some(vi);
                    } else if p.khat.is_none() && p.v.is_empty() && !vars[vi].boolean {
                        p.khat = Some(vi);
                    } else if vars[vi].boolean && p.khat.is_some() {
                        p.v.push(vi);
                    } else {
                        return Err(LangError::Roles(format!(
                            "environment module `{}` may declare the class, then a predicted class and boolean verdicts; `{}` does not fit",
                            m.name, vars[vi].name
                        )));
                    }
                }
                Some(Role::Turn) => {
                    if p.t.replace(vi).is_some() {
                        return Err(LangError::Roles(format!(
                            "module `{}` has more than one variable, but its role admits exactly one",
                            m.name
                        )));
                    }
                }
                Some(Role::Controller) => p.c.push(vi),
                _ => p.z.push(vi),
            }
        }
        Ok(p)
    }

    fn tuple(&self, vals: &[i64], vars: &[Var]) -> Result<StateTuple, LangError> {
        let class = |i: usize| {
            if vals[i] >= 1 {
                Ok(vals[i] as u32)
            } else {
                Err(LangError::Roles(format!("class variable `{}` must be at least 1", vars[i].name)))
            }
        };
        let k = match self.k {
            Some(i) => class(i)?,
            None => 1,
        };
        let t = match self.t {
            Some(i) if (1..=3).contains(&vals[i]) => vals[i] as u8,
            Some(i) => return Err(LangError::Roles(format!("turn variable `{}` must stay in 1..3", vars[i].name))),
            None => 1,
        };
        let tuple =
            StateTuple::new(self.z.iter().map(|&i| vals[i]).collect(), k, t, self.c.iter().map(|&i| vals[i]).collect());
        Ok(match self.khat {
            Some(i) => tuple.with_perception(class(i)?, self.v.iter().map(|&j| vals[j] != 0).collect()),
            None => tuple,
        })
    }
}
