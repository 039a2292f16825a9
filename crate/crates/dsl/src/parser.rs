use zdps_core::Mode;

use crate::ast::{BinOp, ClassDecl, Program, SExpr, Stmt, UnOp};
use crate::lexer::{lex, Tok, Token};
use crate::timing::parse_timing;
use crate::DslError;

pub fn parse_program(src: &str) -> Result<Program, DslError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut prog = Program::default();
    loop {
        match p.peek() {
            Tok::Eof => return Ok(prog),
            Tok::Name(n) if n == "main" => {
                p.bump();
                prog.main = p.main_block()?;
            }
            _ => prog.classes.push(p.class_decl()?),
        }
    }
}

/// Parse a single expression.
pub fn parse_expr(src: &str) -> Result<SExpr, DslError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.expr()?;
    match p.peek() {
        Tok::Eof => Ok(e),
        _ => Err(p.unexpected("end of input")),
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

const BINARY_LEVELS: [&[(&str, BinOp)]; 6] = [
    &[("||", BinOp::Or)],
    &[("&&", BinOp::And)],
    &[("==", BinOp::Eq), ("!=", BinOp::Ne)],
    &[("<=", BinOp::Le), (">=", BinOp::Ge), ("<", BinOp::Lt), (">", BinOp::Gt)],
    &[("+", BinOp::Add), ("-", BinOp::Sub)],
    &[("*", BinOp::Mul), ("/", BinOp::Div)],
];

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].offset
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> DslError {
        let found = match self.peek() {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Number(n) => format!("number `{n}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        };
        DslError::syntax(self.offset(), format!("expected {wanted}, found {found}"))
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == w)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), DslError> {
        if self.eat(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn keyword(&mut self, w: &str) -> Result<(), DslError> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{w}`")))
        }
    }

    fn name(&mut self) -> Result<String, DslError> {
        match self.peek().clone() {
            Tok::Name(n) => {
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected("a name")),
        }
    }

    fn annotation(&mut self, c: &mut ClassDecl) -> Result<(), DslError> {
        self.expect("@")?;
        let at = self.offset();
        let name = self.name()?;
        self.expect("(")?;
        let arg_at = self.offset();
        let arg = self.bump();
        self.expect(")")?;
        match (name.as_str(), arg) {
            ("timing", Tok::Str(s)) => {
                // shift offsets inside the string to the source position
                c.timing = Some(parse_timing(&s).map_err(|e| e.shifted(arg_at + 1))?);
            }
            ("mode", Tok::Str(s)) => {
                c.mode = Some(match s.as_str() {
                    "union" => Mode::Union,
                    "intersection" => Mode::Intersection,
                    _ => return Err(DslError::syntax(arg_at, format!("unknown mode {s:?}"))),
                })
            }
            ("checkpointInterval", Tok::Number(n)) => {
                let v: u64 = n
                    .parse()
                    .ok()
                    .filter(|v| *v > 0)
                    .ok_or_else(|| DslError::syntax(arg_at, "checkpoint interval must be a positive integer"))?;
                c.checkpoint_interval = Some(v);
            }
            ("timing" | "mode" | "checkpointInterval", _) => {
                return Err(DslError::syntax(arg_at, format!("bad argument for @{name}")))
            }
            _ => return Err(DslError::syntax(at, format!("unknown annotation @{name}"))),
        }
        Ok(())
    }

    fn class_decl(&mut self) -> Result<ClassDecl, DslError> {
        let mut c = ClassDecl::default();
        while self.is_punct("@") {
            self.annotation(&mut c)?;
        }
        self.keyword("signal")?;
        self.keyword("class")?;
        c.name = self.name()?;
        self.expect("{")?;
        while !self.eat("}") {
            self.member(&mut c)?;
        }
        Ok(c)
    }

    /// `[type] name` where the type is present when two names follow.
    fn typed_name(&mut self) -> Result<String, DslError> {
        if matches!(self.peek_at(1), Tok::Name(_)) {
            self.name()?;
        }
        self.name()
    }

    fn member(&mut self, c: &mut ClassDecl) -> Result<(), DslError> {
        if self.is_word("persistent") {
            self.bump();
            self.keyword("signal")?;
            let mut first = true;
            loop {
                let n = if first { self.typed_name()? } else { self.name()? };
                first = false;
                let init = if self.eat("=") { Some(self.expr()?) } else { None };
                c.persistent.push((n, init));
                if self.eat("...") {
                    // elided columns in hand-abbreviated programs
                    let _ = self.eat(",");
                }
                if !self.eat(",") {
                    break;
                }
                if self.eat("...") && !self.eat(",") {
                    break;
                }
            }
            return self.expect(";");
        }
        if self.is_word("signal") {
            self.bump();
            let mut first = true;
            loop {
                let n = if first { self.typed_name()? } else { self.name()? };
                first = false;
                self.expect("=")?;
                c.derived.push((n, self.expr()?));
                if !self.eat(",") {
                    break;
                }
            }
            return self.expect(";");
        }
        let at = self.offset();
        let first = self.name()?;
        if self.eat("(") {
            if first == c.name {
                // constructor: skip it entirely
                self.skip_balanced(")")?;
                self.expect("{")?;
                return self.skip_balanced("}");
            }
            self.expect(")")?;
            self.expect("{")?;
            if self.is_word("return") {
                self.bump();
            }
            let body = self.expr()?;
            let _ = self.eat(";");
            self.expect("}")?;
            c.methods.push((first, body));
            return Ok(());
        }
        if matches!(self.peek(), Tok::Name(_)) {
            loop {
                let slot = self.name()?;
                c.upstreams.push((slot, first.clone()));
                if !self.eat(",") {
                    break;
                }
            }
            return self.expect(";");
        }
        Err(DslError::syntax(at, format!("cannot parse member starting at `{first}`")))
    }

    /// Skip tokens up to the matching closer; the opener is already consumed.
    fn skip_balanced(&mut self, close: &str) -> Result<(), DslError> {
        let open = if close == ")" { "(" } else { "{" };
        let mut depth = 1;
        loop {
            match self.bump() {
                Tok::Eof => return Err(self.unexpected(&format!("`{close}`"))),
                Tok::Punct(p) if p == open => depth += 1,
                Tok::Punct(p) if p == close => {
                    depth -= 1;
                    if depth == 0 {
                        return Ok(());
                    }
                }
                _ => {}
            }
        }
    }

    fn main_block(&mut self) -> Result<Vec<Stmt>, DslError> {
        self.expect("{")?;
        let mut out = Vec::new();
        while !self.eat("}") {
            let stmt = if self.is_word("let") {
                self.bump();
                let name = self.name()?;
                self.expect("=")?;
                Stmt::Let {
                    name,
                    value: self.expr()?,
                }
            } else if matches!((self.peek(), self.peek_at(1), self.peek_at(2)), (Tok::Name(_), Tok::Name(_), Tok::Punct("="))) {
                self.name()?;
                let name = self.name()?;
                self.expect("=")?;
                Stmt::Let {
                    name,
                    value: self.expr()?,
                }
            } else {
                Stmt::Expr(self.expr()?)
            };
            self.expect(";")?;
            out.push(stmt);
        }
        Ok(out)
    }

    pub fn expr(&mut self) -> Result<SExpr, DslError> {
        self.binary(0)
    }

    fn binary(&mut self, level: usize) -> Result<SExpr, DslError> {
        if level == BINARY_LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.binary(level + 1)?;
        'outer: loop {
            for (sym, op) in BINARY_LEVELS[level] {
                if self.eat(sym) {
                    let rhs = self.binary(level + 1)?;
                    lhs = SExpr::Binary(*op, Box::new(lhs), Box::new(rhs));
                    continue 'outer;
                }
            }
            return Ok(lhs);
        }
    }

    fn unary(&mut self) -> Result<SExpr, DslError> {
        if self.eat("!") {
            return Ok(SExpr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat("-") {
            return Ok(SExpr::Unary(UnOp::Neg, Box::new(self.unary()?)));
        }
        self.postfix()
    }

    fn args(&mut self) -> Result<Vec<SExpr>, DslError> {
        let mut out = Vec::new();
        if self.eat(")") {
            return Ok(out);
        }
        loop {
            out.push(self.expr()?);
            if self.eat(")") {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn postfix(&mut self) -> Result<SExpr, DslError> {
        let mut e = self.primary()?;
        while self.eat(".") {
            let n = self.name()?;
            e = if self.eat("(") {
                SExpr::Call {
                    recv: Some(Box::new(e)),
                    name: n,
                    args: self.args()?,
                }
            } else {
                SExpr::Member(Box::new(e), n)
            };
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<SExpr, DslError> {
        match self.peek().clone() {
            Tok::Number(n) => {
                self.bump();
                Ok(SExpr::Number(n))
            }
            Tok::Str(s) => {
                self.bump();
                Ok(SExpr::Str(s))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Name(n) if n == "this" => {
                self.bump();
                Ok(SExpr::This)
            }
            Tok::Name(n) if n == "new" => {
                self.bump();
                let class = self.name()?;
                self.expect("(")?;
                Ok(SExpr::New {
                    class,
                    args: self.args()?,
                })
            }
            Tok::Name(n) => {
                self.bump();
                if self.eat("(") {
                    Ok(SExpr::Call {
                        recv: None,
                        name: n,
                        args: self.args()?,
                    })
                } else {
                    Ok(SExpr::Name(n))
                }
            }
            _ => Err(self.unexpected("an expression")),
        }
    }
}
