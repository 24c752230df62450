use std::collections::{HashMap, HashSet};

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::LangError;

pub fn parse(source: &str) -> Result<ModelAst, LangError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens, pos: 0 };
    let ast = p.model()?;
    check(&ast)?;
    Ok(ast)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, offset: usize) -> &Tok {
        let i = (self.pos + offset).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].span
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn unexpected(&self, wanted: &str) -> LangError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(i) => format!("`{i}`"),
            Tok::Real(r) => format!("`{r}`"),
            Tok::Str(s) => format!("\"{s}\""),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Annotation(k, _) => format!("annotation @{k}"),
            Tok::Eof => "end of input".to_string(),
        };
        LangError::syntax(self.span(), format!("expected {wanted}, found {found}"))
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), LangError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{s}`")))
        }
    }

    fn ident(&mut self) -> Result<(String, Span), LangError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_keyword(&s) => {
                let span = self.bump().span;
                Ok((s, span))
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn string(&mut self) -> Result<String, LangError> {
        match self.peek().clone() {
            Tok::Str(s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("quoted name")),
        }
    }

    fn model(&mut self) -> Result<ModelAst, LangError> {
        let mut ast = ModelAst::default();
        let _ = self.eat_kw("dtmc") || self.eat_kw("probabilistic");
        let mut pending_role: Option<(Role, Span)> = None;
        loop {
            let span = self.span();
            match self.peek().clone() {
                Tok::Eof => break,
                Tok::Annotation(key, value) => {
                    self.bump();
                    match key.as_str() {
                        "role" => {
                            let role = Role::from_name(&value)
                                .ok_or_else(|| LangError::syntax(span, format!("unknown role `{value}`")))?;
                            pending_role = Some((role, span));
                        }
                        "controller-params" => ast
                            .controller_params
                            .extend(value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from)),
                        _ => return Err(LangError::syntax(span, format!("unknown annotation @{key}"))),
                    }
                }
                Tok::Ident(kw) => match kw.as_str() {
                    "const" => ast.constants.push(self.constant()?),
                    "formula" => ast.formulas.push(self.formula()?),
                    "label" => ast.labels.push(self.label()?),
                    "module" => {
                        let role = pending_role.take().map(|(r, _)| r);
                        ast.modules.push(self.module(role)?);
                    }
                    "rewards" => ast.rewards.push(self.rewards()?),
                    _ => return Err(self.unexpected("declaration")),
                },
                _ => return Err(self.unexpected("declaration")),
            }
        }
        if let Some((_, span)) = pending_role {
            return Err(LangError::syntax(span, "role annotation not followed by a module"));
        }
        Ok(ast)
    }

    fn constant(&mut self) -> Result<ConstDecl, LangError> {
        let span = self.bump().span;
        let ty = if self.eat_kw("int") {
            ConstType::Int
        } else if self.eat_kw("double") {
            ConstType::Double
        } else if self.eat_kw("bool") {
            ConstType::Bool
        } else {
            ConstType::Int
        };
        let (name, _) = self.ident()?;
        let value = if self.eat_sym("=") { Some(self.expr()?) } else { None };
        self.expect_sym(";")?;
        Ok(ConstDecl { name, ty, value, span })
    }

    fn formula(&mut self) -> Result<FormulaDecl, LangError> {
        let span = self.bump().span;
        let (name, _) = self.ident()?;
        self.expect_sym("=")?;
        let expr = self.expr()?;
        self.expect_sym(";")?;
        Ok(FormulaDecl { name, expr, span })
    }

    fn label(&mut self) -> Result<LabelDecl, LangError> {
        let span = self.bump().span;
        let name = self.string()?;
        self.expect_sym("=")?;
        let expr = self.expr()?;
        self.expect_sym(";")?;
        Ok(LabelDecl { name, expr, span })
    }

    fn module(&mut self, role: Option<Role>) -> Result<ModuleAst, LangError> {
        let span = self.bump().span;
        let (name, _) = self.ident()?;
        let mut vars = Vec::new();
        let mut commands = Vec::new();
        loop {
            if self.eat_kw("endmodule") {
                break;
            }
            if self.is_sym("[") {
                commands.push(self.command()?);
            } else if matches!(self.peek(), Tok::Ident(s) if !is_keyword(s)) && commands.is_empty() {
                vars.push(self.var_decl()?);
            } else {
                return Err(self.unexpected("variable declaration, command or `endmodule`"));
            }
        }
        Ok(ModuleAst { name, role, vars, commands, span })
    }

    fn var_decl(&mut self) -> Result<VarDecl, LangError> {
        let (name, span) = self.ident()?;
        self.expect_sym(":")?;
        let ty = if self.eat_kw("bool") {
            VarType::Bool
        } else {
            self.expect_sym("[")?;
            let lo = self.expr()?;
            self.expect_sym("..")?;
            let hi = self.expr()?;
            self.expect_sym("]")?;
            VarType::Range(lo, hi)
        };
        let init = if self.eat_kw("init") { Some(self.expr()?) } else { None };
        self.expect_sym(";")?;
        Ok(VarDecl { name, ty, init, span })
    }

    fn action(&mut self) -> Result<Option<String>, LangError> {
        self.expect_sym("[")?;
        let action = if self.is_sym("]") { None } else { Some(self.ident()?.0) };
        self.expect_sym("]")?;
        Ok(action)
    }

    fn command(&mut self) -> Result<Command, LangError> {
        let span = self.span();
        let action = self.action()?;
        let guard = self.expr()?;
        self.expect_sym("->")?;
        let mut branches = vec![self.branch()?];
        while self.eat_sym("+") {
            branches.push(self.branch()?);
        }
        self.expect_sym(";")?;
        if branches.len() > 1 && branches.iter().any(|b| b.prob.is_none()) {
            return Err(LangError::syntax(span, "every branch of a multi-branch command needs a probability"));
        }
        Ok(Command { action, guard, branches, span })
    }

    fn starts_update(&self) -> bool {
        self.is_kw("true") && matches!(self.peek_at(1), Tok::Sym(";") | Tok::Sym("+"))
            || self.is_sym("(") && matches!(self.peek_at(1), Tok::Ident(_)) && matches!(self.peek_at(2), Tok::Sym("'"))
    }

    fn branch(&mut self) -> Result<Branch, LangError> {
        if self.starts_update() {
            return Ok(Branch { prob: None, updates: self.updates()? });
        }
        let prob = self.expr()?;
        self.expect_sym(":")?;
        Ok(Branch { prob: Some(prob), updates: self.updates()? })
    }

    fn updates(&mut self) -> Result<Vec<Assignment>, LangError> {
        if self.eat_kw("true") {
            return Ok(Vec::new());
        }
        let mut out = vec![self.assignment()?];
        while self.eat_sym("&") {
            out.push(self.assignment()?);
        }
        Ok(out)
    }

    fn assignment(&mut self) -> Result<Assignment, LangError> {
        self.expect_sym("(")?;
        let (var, span) = self.ident()?;
        self.expect_sym("'")?;
        self.expect_sym("=")?;
        let value = self.expr()?;
        self.expect_sym(")")?;
        Ok(Assignment { var, value, span })
    }

    fn rewards(&mut self) -> Result<RewardBlock, LangError> {
        let span = self.bump().span;
        let name = if matches!(self.peek(), Tok::Str(_)) { self.string()? } else { String::new() };
        let mut items = Vec::new();
        while !self.eat_kw("endrewards") {
            let span = self.span();
            let kind = if self.is_sym("[") { RewardKind::Transition(self.action()?) } else { RewardKind::State };
            let guard = self.expr()?;
            self.expect_sym(":")?;
            let value = self.expr()?;
            self.expect_sym(";")?;
            items.push(RewardItem { kind, guard, value, span });
        }
        Ok(RewardBlock { name, items, span })
    }

    pub fn expr(&mut self) -> Result<Expr, LangError> {
        let cond = self.implies()?;
        if self.is_sym("?") {
            let span = self.bump().span;
            let a = self.expr()?;
            self.expect_sym(":")?;
            let b = self.expr()?;
            return Ok(Expr::new(ExprKind::Ite(Box::new(cond), Box::new(a), Box::new(b)), span));
        }
        Ok(cond)
    }

    fn implies(&mut self) -> Result<Expr, LangError> {
        let lhs = self.or()?;
        if self.is_sym("=>") {
            let span = self.bump().span;
            let rhs = self.implies()?;
            return Ok(Expr::new(ExprKind::Binary(BinOp::Implies, Box::new(lhs), Box::new(rhs)), span));
        }
        Ok(lhs)
    }

    fn left_assoc(
        &mut self,
        ops: &[(&str, BinOp)],
        next: fn(&mut Self) -> Result<Expr, LangError>,
    ) -> Result<Expr, LangError> {
        let mut lhs = next(self)?;
        'outer: loop {
            for (sym, op) in ops {
                if self.is_sym(sym) {
                    let span = self.bump().span;
                    let rhs = next(self)?;
                    lhs = Expr::new(ExprKind::Binary(*op, Box::new(lhs), Box::new(rhs)), span);
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn or(&mut self) -> Result<Expr, LangError> {
        self.left_assoc(&[("|", BinOp::Or)], Self::and)
    }

    fn and(&mut self) -> Result<Expr, LangError> {
        self.left_assoc(&[("&", BinOp::And)], Self::not)
    }

    fn not(&mut self) -> Result<Expr, LangError> {
        if self.is_sym("!") {
            let span = self.bump().span;
            let e = self.not()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Not, Box::new(e)), span));
        }
        self.relation()
    }

    fn relation(&mut self) -> Result<Expr, LangError> {
        let lhs = self.additive()?;
        let ops = [
            ("=", BinOp::Eq),
            ("!=", BinOp::Ne),
            ("<=", BinOp::Le),
            (">=", BinOp::Ge),
            ("<", BinOp::Lt),
            (">", BinOp::Gt),
        ];
        for (sym, op) in ops {
            if self.is_sym(sym) {
                let span = self.bump().span;
                let rhs = self.additive()?;
                return Ok(Expr::new(ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)), span));
            }
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, LangError> {
        self.left_assoc(&[("+", BinOp::Add), ("-", BinOp::Sub)], Self::multiplicative)
    }

    fn multiplicative(&mut self) -> Result<Expr, LangError> {
        self.left_assoc(&[("*", BinOp::Mul), ("/", BinOp::Div)], Self::unary)
    }

    fn unary(&mut self) -> Result<Expr, LangError> {
        if self.is_sym("-") {
            let span = self.bump().span;
            let e = self.unary()?;
            return Ok(Expr::new(ExprKind::Unary(UnOp::Neg, Box::new(e)), span));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Expr, LangError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(i) => {
                self.bump();
                Ok(Expr::new(ExprKind::Int(i), span))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(Expr::new(ExprKind::Real(r), span))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Ident(name) if name == "true" || name == "false" => {
                self.bump();
                Ok(Expr::new(ExprKind::Bool(name == "true"), span))
            }
            Tok::Ident(name) => {
                if let Some(func) = Func::from_name(&name) {
                    if matches!(self.peek_at(1), Tok::Sym("(")) {
                        self.bump();
                        self.bump();
                        let mut args = vec![self.expr()?];
                        while self.eat_sym(",") {
                            args.push(self.expr()?);
                        }
                        self.expect_sym(")")?;
                        let arity_ok = match func {
                            Func::Min | Func::Max => !args.is_empty(),
                            Func::Floor | Func::Ceil => args.len() == 1,
                            Func::Mod => args.len() == 2,
                        };
                        if !arity_ok {
                            return Err(LangError::syntax(
                                span,
                                format!("wrong number of arguments to {}", func.name()),
                            ));
                        }
                        return Ok(Expr::new(ExprKind::Call(func, args), span));
                    }
                }
                let (name, span) = self.ident()?;
                Ok(Expr::new(ExprKind::Ident(name), span))
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}

const KEYWORDS: [&str; 17] = [
    "dtmc",
    "probabilistic",
    "const",
    "int",
    "double",
    "bool",
    "formula",
    "label",
    "module",
    "endmodule",
    "rewards",
    "endrewards",
    "init",
    "true",
    "false",
    "min",
    "max",
];

fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Constant,
    Formula,
    Var,
}

/// Name resolution, duplicate detection and cycle detection.
fn check(ast: &ModelAst) -> Result<(), LangError> {
    let mut names: HashMap<&str, Kind> = HashMap::new();
    let ast_names: Vec<(&str, Kind, Span)> = ast
        .constants
        .iter()
        .map(|c| (c.name.as_str(), Kind::Constant, c.span))
        .chain(ast.formulas.iter().map(|f| (f.name.as_str(), Kind::Formula, f.span)))
        .chain(ast.modules.iter().flat_map(|m| m.vars.iter().map(|v| (v.name.as_str(), Kind::Var, v.span))))
        .collect();
    for (name, kind, span) in ast_names {
        if names.insert(name, kind).is_some() {
            return Err(LangError::DuplicateIdentifier { name: name.to_string(), line: span.line, col: span.col });
        }
    }

    let mut seen = HashSet::new();
    for m in &ast.modules {
        if !seen.insert(m.name.as_str()) {
            return Err(LangError::DuplicateIdentifier { name: m.name.clone(), line: m.span.line, col: m.span.col });
        }
    }
    let mut seen = HashSet::new();
    for l in &ast.labels {
        if !seen.insert(l.name.as_str()) || l.name == "init" {
            return Err(LangError::DuplicateIdentifier { name: l.name.clone(), line: l.span.line, col: l.span.col });
        }
    }
    let mut seen = HashSet::new();
    for r in &ast.rewards {
        if !seen.insert(r.name.as_str()) {
            return Err(LangError::DuplicateIdentifier { name: r.name.clone(), line: r.span.line, col: r.span.col });
        }
    }
    for p in &ast.controller_params {
        if !matches!(names.get(p.as_str()), Some(Kind::Constant)) {
            return Err(LangError::UnboundIdentifier { name: p.clone(), line: 0, col: 0 });
        }
    }

    let resolve = |e: &Expr, allow_vars: bool| -> Result<(), LangError> {
        let mut err = None;
        e.visit_idents(&mut |name, span| {
            if err.is_some() {
                return;
            }
            match names.get(name) {
                None => {
                    err = Some(LangError::UnboundIdentifier { name: name.to_string(), line: span.line, col: span.col })
                }
                Some(Kind::Var) if !allow_vars => {
                    err = Some(LangError::RangeError {
                        name: name.to_string(),
                        line: span.line,
                        col: span.col,
                        message: "must be a constant expression".into(),
                    })
                }
                _ => {}
            }
        });
        err.map_or(Ok(()), Err)
    };

    for c in &ast.constants {
        if let Some(v) = &c.value {
            resolve(v, false)?;
        }
    }
    for f in &ast.formulas {
        resolve(&f.expr, true)?;
    }
    for l in &ast.labels {
        resolve(&l.expr, true)?;
    }
    for m in &ast.modules {
        let own: HashSet<&str> = m.vars.iter().map(|v| v.name.as_str()).collect();
        for v in &m.vars {
            if let VarType::Range(lo, hi) = &v.ty {
                resolve(lo, false)?;
                resolve(hi, false)?;
            }
            if let Some(init) = &v.init {
                resolve(init, false)?;
            }
        }
        for c in &m.commands {
            resolve(&c.guard, true)?;
            for b in &c.branches {
                if let Some(p) = &b.prob {
                    resolve(p, true)?;
                }
                let mut assigned = HashSet::new();
                for a in &b.updates {
                    if !own.contains(a.var.as_str()) {
                        return Err(LangError::ForeignUpdate {
                            var: a.var.clone(),
                            module: m.name.clone(),
                            line: a.span.line,
                            col: a.span.col,
                        });
                    }
                    if !assigned.insert(a.var.as_str()) {
                        return Err(LangError::DuplicateIdentifier {
                            name: format!("{}'", a.var),
                            line: a.span.line,
                            col: a.span.col,
                        });
                    }
                    resolve(&a.value, true)?;
                }
            }
        }
    }
    for r in &ast.rewards {
        for item in &r.items {
            resolve(&item.guard, true)?;
            resolve(&item.value, true)?;
        }
    }

    check_cycles(ast)
}

fn check_cycles(ast: &ModelAst) -> Result<(), LangError> {
    let defs: HashMap<&str, &Expr> = ast
        .constants
        .iter()
        .filter_map(|c| c.value.as_ref().map(|v| (c.name.as_str(), v)))
        .chain(ast.formulas.iter().map(|f| (f.name.as_str(), &f.expr)))
        .collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: HashMap<&str, u8> = HashMap::new();
    fn visit<'a>(
        name: &'a str,
        defs: &HashMap<&'a str, &'a Expr>,
        state: &mut HashMap<&'a str, u8>,
    ) -> Result<(), LangError> {
        match state.get(name) {
            Some(2) => return Ok(()),
            Some(1) => return Err(LangError::CyclicDefinition { name: name.to_string() }),
            _ => {}
        }
        let Some(expr) = defs.get(name) else {
            return Ok(());
        };
        state.insert(name, 1);
        let mut deps = Vec::new();
        expr.visit_idents(&mut |n, _| deps.push(n));
        for d in deps {
            visit(d, defs, state)?;
        }
        state.insert(name, 2);
        Ok(())
    }
    let mut names: Vec<&str> = defs.keys().copied().collect();
    names.sort_unstable();
    for name in names {
        visit(name, &defs, &mut state)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_of_ternary_and_relations() {
        let ast = parse("formula f = 1 + 2 * 3 > 4 & true ? 1 : 2;").unwrap();
        match &ast.formulas[0].expr.kind {
            ExprKind::Ite(c, _, _) => assert!(matches!(c.kind, ExprKind::Binary(BinOp::And, _, _))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn branches_with_and_without_probabilities() {
        let src = "module m x : [0..2] init 0; [a] x=0 -> 0.5:(x'=1) + 0.5:(x'=2); [] x>0 -> (x'=0); [] x=2 -> true; endmodule";
        let ast = parse(src).unwrap();
        let m = &ast.modules[0];
        assert_eq!(m.commands.len(), 3);
        assert_eq!(m.commands[0].branches.len(), 2);
        assert!(m.commands[1].branches[0].prob.is_none());
        assert!(m.commands[2].branches[0].updates.is_empty());
    }

    #[test]
    fn parenthesised_probability_is_not_an_update() {
        let src = "const double p = 0.2; module m x : [0..1]; [] true -> (1-p):(x'=0) + p:(x'=1); endmodule";
        let ast = parse(src).unwrap();
        assert!(ast.modules[0].commands[0].branches[0].prob.is_some());
    }

    #[test]
    fn unbound_identifier_reports_position() {
        let err = parse("module m x : [0..1];\n[] y=0 -> true; endmodule").unwrap_err();
        assert!(matches!(err, LangError::UnboundIdentifier { ref name, line: 2, col: 4 } if name == "y"));
    }

    #[test]
    fn duplicate_variable_across_modules() {
        let err = parse("module a x : bool; endmodule module b x : bool; endmodule").unwrap_err();
        assert!(matches!(err, LangError::DuplicateIdentifier { .. }));
    }

    #[test]
    fn update_of_foreign_variable() {
        let err = parse("module a x : bool; endmodule module b y : bool; [] true -> (x'=true); endmodule").unwrap_err();
        assert!(matches!(err, LangError::ForeignUpdate { .. }));
    }

    #[test]
    fn range_bounds_must_be_constant() {
        let err = parse("module a x : [0..1]; y : [0..x]; endmodule").unwrap_err();
        assert!(matches!(err, LangError::RangeError { .. }));
    }

    #[test]
    fn cyclic_formulas_are_rejected() {
        let err = parse("formula a = b + 1; formula b = a;").unwrap_err();
        assert!(matches!(err, LangError::CyclicDefinition { .. }));
    }

    #[test]
    fn roles_attach_to_next_module() {
        let src = "// @role: environment\nmodule e k : [1..2]; endmodule\nmodule p q : bool; endmodule";
        let ast = parse(src).unwrap();
        assert_eq!(ast.roles(), vec![Some(Role::Environment), None]);
    }

    #[test]
    fn syntax_error_position() {
        let err = parse("module m x : [0..1]\nendmodule").unwrap_err();
        assert!(matches!(err, LangError::Syntax { line: 2, .. }));
    }
}
