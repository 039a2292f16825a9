//! Surface syntax tree and its canonical printer.

use std::fmt;

use zdps_core::Mode;

use crate::timing::TimingSpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Gt,
    Le,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Lt => "<",
            BinOp::Gt => ">",
            BinOp::Le => "<=",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Name of the combinator the operator lowers to.
    pub fn combinator(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::Div => "div",
            BinOp::Lt => "lt",
            BinOp::Gt => "gt",
            BinOp::Le => "le",
            BinOp::Ge => "ge",
            BinOp::Eq => "eq",
            BinOp::Ne => "ne",
            BinOp::And => "and",
            BinOp::Or => "or",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Not,
    Neg,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
        }
    }

    pub fn combinator(self) -> &'static str {
        match self {
            UnOp::Not => "not",
            UnOp::Neg => "neg",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SExpr {
    Name(String),
    Number(String),
    Str(String),
    This,
    Member(Box<SExpr>, String),
    Call {
        recv: Option<Box<SExpr>>,
        name: String,
        args: Vec<SExpr>,
    },
    Binary(BinOp, Box<SExpr>, Box<SExpr>),
    Unary(UnOp, Box<SExpr>),
    New { class: String, args: Vec<SExpr> },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ClassDecl {
    pub name: String,
    pub timing: Option<TimingSpec>,
    pub mode: Option<Mode>,
    /// Seconds between checkpoints.
    pub checkpoint_interval: Option<u64>,
    pub persistent: Vec<(String, Option<SExpr>)>,
    pub derived: Vec<(String, SExpr)>,
    /// (slot, class)
    pub upstreams: Vec<(String, String)>,
    pub methods: Vec<(String, SExpr)>,
}

impl ClassDecl {
    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(Mode::Union)
    }

    /// Signal names in schema order: persistent first, then derived.
    pub fn signals(&self) -> impl Iterator<Item = &str> {
        self.persistent
            .iter()
            .map(|(n, _)| n.as_str())
            .chain(self.derived.iter().map(|(n, _)| n.as_str()))
    }

    pub fn has_signal(&self, n: &str) -> bool {
        self.signals().any(|s| s == n)
    }

    pub fn slot_class(&self, n: &str) -> Option<&str> {
        self.upstreams.iter().find(|(s, _)| s == n).map(|(_, c)| c.as_str())
    }

    pub fn has_method(&self, n: &str) -> bool {
        self.methods.iter().any(|(m, _)| m == n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Let { name: String, value: SExpr },
    Expr(SExpr),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Program {
    pub classes: Vec<ClassDecl>,
    pub main: Vec<Stmt>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDecl> {
        self.classes.iter().find(|c| c.name == name)
    }
}

fn write_args(f: &mut fmt::Formatter<'_>, args: &[SExpr]) -> fmt::Result {
    f.write_str("(")?;
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_str(")")
}

fn write_str_lit(f: &mut fmt::Formatter<'_>, s: &str) -> fmt::Result {
    f.write_str("\"")?;
    for c in s.chars() {
        if c == '"' || c == '\\' {
            f.write_str("\\")?;
        }
        write!(f, "{c}")?;
    }
    f.write_str("\"")
}

/// Postfix binds tighter than prefix, so a unary receiver needs parentheses.
fn write_recv(f: &mut fmt::Formatter<'_>, r: &SExpr) -> fmt::Result {
    match r {
        SExpr::Unary(..) => write!(f, "({r})."),
        _ => write!(f, "{r}."),
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SExpr::Name(n) | SExpr::Number(n) => f.write_str(n),
            SExpr::Str(s) => write_str_lit(f, s),
            SExpr::This => f.write_str("this"),
            SExpr::Member(r, n) => {
                write_recv(f, r)?;
                f.write_str(n)
            }
            SExpr::Call { recv, name, args } => {
                if let Some(r) = recv {
                    write_recv(f, r)?;
                }
                f.write_str(name)?;
                write_args(f, args)
            }
            SExpr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            SExpr::Unary(op, e) => write!(f, "{}({e})", op.symbol()),
            SExpr::New { class, args } => {
                write!(f, "new {class}")?;
                write_args(f, args)
            }
        }
    }
}

impl fmt::Display for ClassDecl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(t) = &self.timing {
            f.write_str("@timing(")?;
            write_str_lit(f, &t.to_string())?;
            f.write_str(")\n")?;
        }
        if let Some(m) = self.mode {
            writeln!(f, "@mode(\"{m}\")")?;
        }
        if let Some(n) = self.checkpoint_interval {
            writeln!(f, "@checkpointInterval({n})")?;
        }
        writeln!(f, "signal class {} {{", self.name)?;
        for (slot, class) in &self.upstreams {
            writeln!(f, "  {class} {slot};")?;
        }
        for (n, e) in &self.persistent {
            match e {
                Some(e) => writeln!(f, "  persistent signal {n} = {e};")?,
                None => writeln!(f, "  persistent signal {n};")?,
            }
        }
        for (n, e) in &self.derived {
            writeln!(f, "  signal {n} = {e};")?;
        }
        for (n, e) in &self.methods {
            writeln!(f, "  {n}() {{ {e}; }}")?;
        }
        writeln!(f, "}}")
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.classes {
            writeln!(f, "{c}")?;
        }
        if !self.main.is_empty() {
            writeln!(f, "main {{")?;
            for s in &self.main {
                match s {
                    Stmt::Let { name, value } => writeln!(f, "  let {name} = {value};")?,
                    Stmt::Expr(e) => writeln!(f, "  {e};")?,
                }
            }
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}
