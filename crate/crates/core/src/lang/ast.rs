use std::fmt;

/// Source position. Equality ignores positions so that ASTs compare structurally.
#[derive(Debug, Clone, Copy, Default)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
    Implies,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "=",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Implies => "=>",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Min,
    Max,
    Floor,
    Ceil,
    Mod,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Min => "min",
            Func::Max => "max",
            Func::Floor => "floor",
            Func::Ceil => "ceil",
            Func::Mod => "mod",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "min" => Func::Min,
            "max" => Func::Max,
            "floor" => Func::Floor,
            "ceil" => Func::Ceil,
            "mod" => Func::Mod,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Int(i64),
    Real(f64),
    Bool(bool),
    Ident(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ite(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Calls `f` on every identifier in the expression.
    pub fn visit_idents<'a>(&'a self, f: &mut impl FnMut(&'a str, Span)) {
        match &self.kind {
            ExprKind::Ident(name) => f(name, self.span),
            ExprKind::Unary(_, e) => e.visit_idents(f),
            ExprKind::Binary(_, a, b) => {
                a.visit_idents(f);
                b.visit_idents(f);
            }
            ExprKind::Ite(c, a, b) => {
                c.visit_idents(f);
                a.visit_idents(f);
                b.visit_idents(f);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.visit_idents(f)),
            ExprKind::Int(_) | ExprKind::Real(_) | ExprKind::Bool(_) => {}
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstType {
    Int,
    Double,
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstDecl {
    pub name: String,
    pub ty: ConstType,
    /// `None` leaves the constant undefined; undefined constants become parameters.
    pub value: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormulaDecl {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelDecl {
    pub name: String,
    pub expr: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VarType {
    Range(Expr, Expr),
    Bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub ty: VarType,
    pub init: Option<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub var: String,
    pub value: Expr,
    pub span: Span,
}

/// One `prob : update` alternative. An empty update list is `true`.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// `None` when the command has a single branch without a probability.
    pub prob: Option<Expr>,
    pub updates: Vec<Assignment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Command {
    pub action: Option<String>,
    pub guard: Expr,
    pub branches: Vec<Branch>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Managed,
    Environment,
    Controller,
    Turn,
    Plain,
}

impl Role {
    pub fn name(self) -> &'static str {
        match self {
            Role::Managed => "managed",
            Role::Environment => "environment",
            Role::Controller => "controller",
            Role::Turn => "turn",
            Role::Plain => "plain",
        }
    }

    pub fn from_name(name: &str) -> Option<Role> {
        Some(match name {
            "managed" => Role::Managed,
            "environment" => Role::Environment,
            "controller" => Role::Controller,
            "turn" => Role::Turn,
            "plain" => Role::Plain,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModuleAst {
    pub name: String,
    pub role: Option<Role>,
    pub vars: Vec<VarDecl>,
    pub commands: Vec<Command>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RewardKind {
    State,
    /// Transition reward on commands with the given action (`None` for `[]`).
    Transition(Option<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardItem {
    pub kind: RewardKind,
    pub guard: Expr,
    pub value: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardBlock {
    pub name: String,
    pub items: Vec<RewardItem>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ModelAst {
    pub constants: Vec<ConstDecl>,
    pub formulas: Vec<FormulaDecl>,
    pub labels: Vec<LabelDecl>,
    pub modules: Vec<ModuleAst>,
    pub rewards: Vec<RewardBlock>,
    /// Names listed in a `// @controller-params:` annotation.
    pub controller_params: Vec<String>,
}

impl ModelAst {
    pub fn module(&self, name: &str) -> Option<&ModuleAst> {
        self.modules.iter().find(|m| m.name == name)
    }

    pub fn roles(&self) -> Vec<Option<Role>> {
        self.modules.iter().map(|m| m.role).collect()
    }
}
