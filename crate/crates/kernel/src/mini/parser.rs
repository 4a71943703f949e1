//! Recursive-descent parser for the supported Python subset.

use std::rc::Rc;

use super::ast::*;
use super::lexer::{tokenize, unescape, LexError, Tok, Token};

pub type SyntaxError = LexError;

pub fn parse_module(src: &str) -> Result<Vec<Stmt>, SyntaxError> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let mut body = Vec::new();
    while !p.at(&Tok::Eof) {
        if p.eat(&Tok::Newline) {
            continue;
        }
        if p.at(&Tok::Indent) {
            return Err(SyntaxError {
                kind: "IndentationError",
                msg: "unexpected indent".into(),
                line: p.line(),
            });
        }
        body.extend(p.statement()?);
    }
    Ok(body)
}

fn parse_expression(src: &str, line: usize) -> Result<Expr, SyntaxError> {
    let mut tokens = tokenize(src.trim()).map_err(|mut e| {
        e.line = line;
        e
    })?;
    for t in &mut tokens {
        t.line = line;
    }
    let mut p = Parser { tokens, pos: 0 };
    let e = p.testlist()?;
    p.eat(&Tok::Newline);
    if !p.at(&Tok::Eof) {
        return Err(p.error("f-string: invalid syntax"));
    }
    Ok(e)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, off: usize) -> &Tok {
        let i = (self.pos + off).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn line(&self) -> usize {
        self.tokens[self.pos].line
    }

    fn at(&self, t: &Tok) -> bool {
        self.peek() == t
    }

    fn at_op(&self, op: &str) -> bool {
        matches!(self.peek(), Tok::Op(o) if *o == op)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Name(n) if n == kw)
    }

    fn advance(&mut self) -> Tok {
        let t = self.tokens[self.pos].tok.clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.at(t) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.at_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.at_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error(&self, msg: impl Into<String>) -> SyntaxError {
        SyntaxError { kind: "SyntaxError", msg: msg.into(), line: self.line() }
    }

    fn expect_op(&mut self, op: &str) -> Result<(), SyntaxError> {
        if self.eat_op(op) {
            Ok(())
        } else if op == ":" {
            Err(self.error("expected ':'"))
        } else {
            Err(self.error("invalid syntax"))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SyntaxError> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            Err(self.error("invalid syntax"))
        }
    }

    fn ident(&mut self) -> Result<String, SyntaxError> {
        match self.peek() {
            Tok::Name(n) if !is_keyword(n) => {
                let n = n.clone();
                self.advance();
                Ok(n)
            }
            _ => Err(self.error("invalid syntax")),
        }
    }

    fn dotted_name(&mut self) -> Result<String, SyntaxError> {
        let mut name = self.ident()?;
        while self.eat_op(".") {
            name.push('.');
            name.push_str(&self.ident()?);
        }
        Ok(name)
    }

    // ---- statements ----

    fn statement(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let line = self.line();
        let compound = match self.peek() {
            Tok::Name(n) => matches!(n.as_str(), "if" | "for" | "while" | "def" | "try" | "with"),
            _ => false,
        };
        if compound {
            let kind = match self.peek() {
                Tok::Name(n) => n.clone(),
                _ => unreachable!(),
            };
            self.advance();
            let kind = match kind.as_str() {
                "if" => self.if_stmt()?,
                "for" => self.for_stmt()?,
                "while" => self.while_stmt()?,
                "def" => self.def_stmt()?,
                "try" => self.try_stmt()?,
                _ => self.with_stmt()?,
            };
            return Ok(vec![Stmt { line, kind }]);
        }
        self.simple_statements()
    }

    fn simple_statements(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        let mut out = Vec::new();
        loop {
            let line = self.line();
            let kind = self.small_statement()?;
            out.push(Stmt { line, kind });
            if self.eat_op(";") {
                if self.at(&Tok::Newline) || self.at(&Tok::Eof) {
                    break;
                }
                continue;
            }
            break;
        }
        if !self.eat(&Tok::Newline) && !self.at(&Tok::Eof) {
            return Err(self.error("invalid syntax"));
        }
        Ok(out)
    }

    fn small_statement(&mut self) -> Result<StmtKind, SyntaxError> {
        if let Tok::Shell(cmd) = self.peek() {
            let cmd = cmd.clone();
            self.advance();
            return Ok(StmtKind::Shell(cmd));
        }
        if let Tok::Name(n) = self.peek() {
            match n.as_str() {
                "pass" => {
                    self.advance();
                    return Ok(StmtKind::Pass);
                }
                "break" => {
                    self.advance();
                    return Ok(StmtKind::Break);
                }
                "continue" => {
                    self.advance();
                    return Ok(StmtKind::Continue);
                }
                "return" => {
                    self.advance();
                    let value = if self.at_end_of_simple() { None } else { Some(self.testlist()?) };
                    return Ok(StmtKind::Return(value));
                }
                "raise" => {
                    self.advance();
                    let value = if self.at_end_of_simple() { None } else { Some(self.test()?) };
                    if self.eat_kw("from") {
                        self.test()?;
                    }
                    return Ok(StmtKind::Raise(value));
                }
                "global" | "nonlocal" => {
                    self.advance();
                    let mut names = vec![self.ident()?];
                    while self.eat_op(",") {
                        names.push(self.ident()?);
                    }
                    return Ok(StmtKind::Global(names));
                }
                "del" => {
                    self.advance();
                    let mut targets = Vec::new();
                    loop {
                        let e = self.expr()?;
                        targets.push(self.to_target(e)?);
                        if !self.eat_op(",") || self.at_end_of_simple() {
                            break;
                        }
                    }
                    return Ok(StmtKind::Del(targets));
                }
                "assert" => {
                    self.advance();
                    let test = self.test()?;
                    let msg = if self.eat_op(",") { Some(self.test()?) } else { None };
                    return Ok(StmtKind::Assert { test, msg });
                }
                "import" => {
                    self.advance();
                    let module = self.dotted_name()?;
                    let alias = if self.eat_kw("as") { Some(self.ident()?) } else { None };
                    if self.at_op(",") {
                        return Err(self.error("multiple imports per statement are not supported"));
                    }
                    return Ok(StmtKind::Import { module, alias });
                }
                "from" => {
                    self.advance();
                    let module = self.dotted_name()?;
                    self.expect_kw("import")?;
                    let paren = self.eat_op("(");
                    let mut names = Vec::new();
                    if self.eat_op("*") {
                        names.push(("*".to_string(), None));
                    } else {
                        loop {
                            let name = self.ident()?;
                            let alias = if self.eat_kw("as") { Some(self.ident()?) } else { None };
                            names.push((name, alias));
                            if !self.eat_op(",") || (paren && self.at_op(")")) {
                                break;
                            }
                        }
                    }
                    if paren {
                        self.expect_op(")")?;
                    }
                    return Ok(StmtKind::FromImport { module, names });
                }
                "yield" | "class" | "async" | "await" => {
                    return Err(self.error(format!("'{n}' is not supported by this kernel")));
                }
                _ => {}
            }
        }
        self.expr_statement()
    }

    fn at_end_of_simple(&self) -> bool {
        matches!(self.peek(), Tok::Newline | Tok::Eof) || self.at_op(";")
    }

    fn expr_statement(&mut self) -> Result<StmtKind, SyntaxError> {
        let first = self.testlist()?;
        let aug = match self.peek() {
            Tok::Op("+=") => Some(BinOp::Add),
            Tok::Op("-=") => Some(BinOp::Sub),
            Tok::Op("*=") => Some(BinOp::Mul),
            Tok::Op("/=") => Some(BinOp::Div),
            Tok::Op("//=") => Some(BinOp::FloorDiv),
            Tok::Op("%=") => Some(BinOp::Mod),
            Tok::Op("**=") => Some(BinOp::Pow),
            _ => None,
        };
        if let Some(op) = aug {
            self.advance();
            let target = self.to_target(first)?;
            if matches!(target, Target::Tuple(_)) {
                return Err(self.error("'tuple' is an illegal expression for augmented assignment"));
            }
            let value = self.testlist()?;
            return Ok(StmtKind::AugAssign { target, op, value });
        }
        if self.at_op(":") {
            // Annotated assignment: `x: int = 1`.
            self.advance();
            self.test()?;
            let target = self.to_target(first)?;
            if self.eat_op("=") {
                let value = self.testlist()?;
                return Ok(StmtKind::Assign { targets: vec![target], value });
            }
            return Ok(StmtKind::Pass);
        }
        if !self.at_op("=") {
            return Ok(StmtKind::Expr(first));
        }
        let mut exprs = vec![first];
        while self.eat_op("=") {
            exprs.push(self.testlist()?);
        }
        let value = exprs.pop().unwrap();
        let targets = exprs.into_iter().map(|e| self.to_target(e)).collect::<Result<_, _>>()?;
        Ok(StmtKind::Assign { targets, value })
    }

    fn to_target(&self, e: Expr) -> Result<Target, SyntaxError> {
        match e {
            Expr::Name(n) => Ok(Target::Name(n)),
            Expr::Subscript(v, i) => Ok(Target::Subscript(v, i)),
            Expr::Attribute(v, a) => Ok(Target::Attribute(v, a)),
            Expr::Tuple(items) | Expr::List(items) => {
                Ok(Target::Tuple(items.into_iter().map(|i| self.to_target(i)).collect::<Result<_, _>>()?))
            }
            Expr::Call(..) => Err(self.error("cannot assign to function call")),
            _ => Err(self.error("cannot assign to literal")),
        }
    }

    fn block(&mut self) -> Result<Vec<Stmt>, SyntaxError> {
        self.expect_op(":")?;
        if !self.eat(&Tok::Newline) {
            return self.simple_statements();
        }
        if !self.eat(&Tok::Indent) {
            return Err(SyntaxError {
                kind: "IndentationError",
                msg: "expected an indented block".into(),
                line: self.line(),
            });
        }
        let mut body = Vec::new();
        while !self.eat(&Tok::Dedent) {
            if self.at(&Tok::Eof) {
                break;
            }
            if self.eat(&Tok::Newline) {
                continue;
            }
            body.extend(self.statement()?);
        }
        Ok(body)
    }

    fn if_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        let mut branches = vec![(self.test()?, self.block()?)];
        let mut orelse = Vec::new();
        loop {
            if self.eat_kw("elif") {
                branches.push((self.test()?, self.block()?));
            } else if self.eat_kw("else") {
                orelse = self.block()?;
                break;
            } else {
                break;
            }
        }
        Ok(StmtKind::If { branches, orelse })
    }

    fn for_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        let target = self.target_list()?;
        self.expect_kw("in")?;
        let iter = self.testlist()?;
        let body = self.block()?;
        let orelse = if self.eat_kw("else") { self.block()? } else { Vec::new() };
        Ok(StmtKind::For { target, iter, body, orelse })
    }

    fn target_list(&mut self) -> Result<Target, SyntaxError> {
        let mut items = vec![self.expr()?];
        let mut tuple = false;
        while self.eat_op(",") {
            tuple = true;
            if self.at_kw("in") || self.at_op("=") {
                break;
            }
            items.push(self.expr()?);
        }
        if tuple {
            self.to_target(Expr::Tuple(items))
        } else {
            self.to_target(items.pop().unwrap())
        }
    }

    fn while_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        let cond = self.test()?;
        let body = self.block()?;
        let orelse = if self.eat_kw("else") { self.block()? } else { Vec::new() };
        Ok(StmtKind::While { cond, body, orelse })
    }

    fn params(&mut self, close: &str) -> Result<Vec<Param>, SyntaxError> {
        let mut params = Vec::new();
        while !self.at_op(close) {
            let name = self.ident()?;
            if close == ")" && self.eat_op(":") {
                self.test()?;
            }
            let default = if self.eat_op("=") { Some(self.test()?) } else { None };
            if default.is_none() && params.iter().any(|p: &Param| p.default.is_some()) {
                return Err(self.error("non-default argument follows default argument"));
            }
            params.push(Param { name, default });
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(params)
    }

    fn def_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        let name = self.ident()?;
        self.expect_op("(")?;
        let params = self.params(")")?;
        self.expect_op(")")?;
        if self.eat_op("->") {
            self.test()?;
        }
        let body = self.block()?;
        Ok(StmtKind::Def(Rc::new(FuncDef { name, params, body })))
    }

    fn try_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        let body = self.block()?;
        let mut handlers = Vec::new();
        while self.eat_kw("except") {
            let mut types = Vec::new();
            let mut name = None;
            if !self.at_op(":") {
                match self.test()? {
                    Expr::Tuple(items) => types = items,
                    e => types.push(e),
                }
                if self.eat_kw("as") {
                    name = Some(self.ident()?);
                }
            }
            let body = self.block()?;
            handlers.push(Handler { types, name, body });
        }
        let orelse = if !handlers.is_empty() && self.eat_kw("else") { self.block()? } else { Vec::new() };
        let finalbody = if self.eat_kw("finally") { self.block()? } else { Vec::new() };
        if handlers.is_empty() && finalbody.is_empty() {
            return Err(self.error("expected 'except' or 'finally' block"));
        }
        Ok(StmtKind::Try { body, handlers, orelse, finalbody })
    }

    fn with_stmt(&mut self) -> Result<StmtKind, SyntaxError> {
        let ctx = self.test()?;
        let target = if self.eat_kw("as") {
            let e = self.expr()?;
            Some(self.to_target(e)?)
        } else {
            None
        };
        if self.at_op(",") {
            return Err(self.error("multiple context managers are not supported"));
        }
        let body = self.block()?;
        Ok(StmtKind::With { ctx, target, body })
    }

    // ---- expressions ----

    /// Comma-separated expressions; more than one (or a trailing comma) forms a tuple.
    fn testlist(&mut self) -> Result<Expr, SyntaxError> {
        let first = self.test()?;
        if !self.at_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.starts_expression() {
                items.push(self.test()?);
            } else {
                break;
            }
        }
        Ok(Expr::Tuple(items))
    }

    fn starts_expression(&self) -> bool {
        match self.peek() {
            Tok::Name(n) => !is_keyword(n) || matches!(n.as_str(), "None" | "True" | "False" | "not" | "lambda"),
            Tok::Int(_) | Tok::Float(_) | Tok::Str { .. } => true,
            Tok::Op(o) => matches!(*o, "(" | "[" | "{" | "-" | "+" | "~" | "..."),
            _ => false,
        }
    }

    fn test(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_kw("lambda") {
            let params = self.params(":")?;
            self.expect_op(":")?;
            let line = self.line();
            let body = self.test()?;
            return Ok(Expr::Lambda(Rc::new(FuncDef {
                name: "<lambda>".into(),
                params,
                body: vec![Stmt { line, kind: StmtKind::Return(Some(body)) }],
            })));
        }
        let body = self.or_test()?;
        if self.at_kw("if") {
            // Only a conditional expression if an `else` follows; comprehension
            // filters are handled by the comprehension parser before we get here.
            self.advance();
            let test = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            return Ok(Expr::IfExp { test: Box::new(test), body: Box::new(body), orelse: Box::new(orelse) });
        }
        Ok(body)
    }

    /// A test without a trailing conditional (used in comprehension filters).
    fn or_test(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.and_test()?;
        while self.eat_kw("or") {
            let right = self.and_test()?;
            left = Expr::Or(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn and_test(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.not_test()?;
        while self.eat_kw("and") {
            let right = self.not_test()?;
            left = Expr::And(Box::new(left), Box::new(right));
        }
        Ok(left)
    }

    fn not_test(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_kw("not") {
            return Ok(Expr::Unary(UnaryOp::Not, Box::new(self.not_test()?)));
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SyntaxError> {
        let left = self.expr()?;
        let mut ops = Vec::new();
        loop {
            let op = match self.peek() {
                Tok::Op("==") => CmpOp::Eq,
                Tok::Op("!=") => CmpOp::Ne,
                Tok::Op("<") => CmpOp::Lt,
                Tok::Op("<=") => CmpOp::Le,
                Tok::Op(">") => CmpOp::Gt,
                Tok::Op(">=") => CmpOp::Ge,
                Tok::Name(n) if n == "in" => CmpOp::In,
                Tok::Name(n) if n == "is" => {
                    if matches!(self.peek_at(1), Tok::Name(m) if m == "not") {
                        self.advance();
                        CmpOp::IsNot
                    } else {
                        CmpOp::Is
                    }
                }
                Tok::Name(n) if n == "not" && matches!(self.peek_at(1), Tok::Name(m) if m == "in") => {
                    self.advance();
                    CmpOp::NotIn
                }
                _ => break,
            };
            self.advance();
            ops.push((op, self.expr()?));
        }
        if ops.is_empty() {
            Ok(left)
        } else {
            Ok(Expr::Compare(Box::new(left), ops))
        }
    }

    fn expr(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.term()?;
        loop {
            let op = if self.at_op("+") {
                BinOp::Add
            } else if self.at_op("-") {
                BinOp::Sub
            } else {
                break;
            };
            self.advance();
            let right = self.term()?;
            left = Expr::BinOp(Box::new(left), op, Box::new(right));
        }
        Ok(left)
    }

    fn term(&mut self) -> Result<Expr, SyntaxError> {
        let mut left = self.factor()?;
        loop {
            let op = match self.peek() {
                Tok::Op("*") => BinOp::Mul,
                Tok::Op("/") => BinOp::Div,
                Tok::Op("//") => BinOp::FloorDiv,
                Tok::Op("%") => BinOp::Mod,
                _ => break,
            };
            self.advance();
            let right = self.factor()?;
            left = Expr::BinOp(Box::new(left), op, Box::new(right));
        }
        Ok(left)
    }

    fn factor(&mut self) -> Result<Expr, SyntaxError> {
        if self.eat_op("-") {
            return Ok(match self.factor()? {
                Expr::Int(i) => Expr::Int(-i),
                Expr::Float(f) => Expr::Float(-f),
                e => Expr::Unary(UnaryOp::Neg, Box::new(e)),
            });
        }
        if self.eat_op("+") {
            return Ok(Expr::Unary(UnaryOp::Pos, Box::new(self.factor()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, SyntaxError> {
        let base = self.primary()?;
        if self.eat_op("**") {
            let exp = self.factor()?;
            return Ok(Expr::BinOp(Box::new(base), BinOp::Pow, Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, SyntaxError> {
        let mut e = self.atom()?;
        loop {
            if self.eat_op("(") {
                let args = self.call_args()?;
                e = Expr::Call(Box::new(e), args);
            } else if self.eat_op("[") {
                let index = self.subscript()?;
                self.expect_op("]")?;
                e = Expr::Subscript(Box::new(e), Box::new(index));
            } else if self.eat_op(".") {
                let attr = match self.advance() {
                    Tok::Name(n) => n,
                    _ => return Err(self.error("invalid syntax")),
                };
                e = Expr::Attribute(Box::new(e), attr);
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> Result<Vec<Arg>, SyntaxError> {
        let mut args = Vec::new();
        while !self.at_op(")") {
            if self.eat_op("*") {
                args.push(Arg::Star(self.test()?));
            } else if self.at_op("**") {
                return Err(self.error("'**' arguments are not supported by this kernel"));
            } else if matches!(self.peek(), Tok::Name(_)) && matches!(self.peek_at(1), Tok::Op("=")) {
                let name = self.ident()?;
                self.advance();
                args.push(Arg::Kw(name, self.test()?));
            } else {
                let e = self.test()?;
                if self.at_kw("for") {
                    let clauses = self.comp_clauses()?;
                    args.push(Arg::Pos(Expr::ListComp { elt: Box::new(e), clauses }));
                } else {
                    args.push(Arg::Pos(e));
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        self.expect_op(")")?;
        Ok(args)
    }

    fn subscript(&mut self) -> Result<Expr, SyntaxError> {
        let mut items = vec![self.slice_item()?];
        let mut tuple = false;
        while self.eat_op(",") {
            tuple = true;
            if self.at_op("]") {
                break;
            }
            items.push(self.slice_item()?);
        }
        Ok(if tuple { Expr::Tuple(items) } else { items.pop().unwrap() })
    }

    fn slice_item(&mut self) -> Result<Expr, SyntaxError> {
        let lower = if self.at_op(":") { None } else { Some(Box::new(self.test()?)) };
        if !self.eat_op(":") {
            return Ok(*lower.unwrap());
        }
        let upper = if self.at_op(":") || self.at_op("]") || self.at_op(",") { None } else { Some(Box::new(self.test()?)) };
        let step = if self.eat_op(":") && !self.at_op("]") && !self.at_op(",") {
            Some(Box::new(self.test()?))
        } else {
            None
        };
        Ok(Expr::Slice(lower, upper, step))
    }

    fn comp_clauses(&mut self) -> Result<Vec<CompClause>, SyntaxError> {
        let mut clauses = Vec::new();
        while self.eat_kw("for") {
            let target = self.target_list()?;
            self.expect_kw("in")?;
            let iter = self.or_test()?;
            let mut conds = Vec::new();
            while self.eat_kw("if") {
                conds.push(self.or_test()?);
            }
            clauses.push(CompClause { target, iter, conds });
        }
        Ok(clauses)
    }

    fn atom(&mut self) -> Result<Expr, SyntaxError> {
        let line = self.line();
        match self.advance() {
            Tok::Int(i) => Ok(Expr::Int(i)),
            Tok::Float(f) => Ok(Expr::Float(f)),
            Tok::Str { value, fstring } => {
                let mut parts = Vec::new();
                let mut any_f = fstring;
                push_str_parts(&mut parts, value, fstring, line)?;
                while let Tok::Str { value, fstring } = self.peek().clone() {
                    self.advance();
                    any_f |= fstring;
                    push_str_parts(&mut parts, value, fstring, line)?;
                }
                if !any_f {
                    let s: String = parts
                        .into_iter()
                        .map(|p| match p {
                            FPart::Lit(s) => s,
                            FPart::Expr { .. } => unreachable!(),
                        })
                        .collect();
                    Ok(Expr::Str(s.into()))
                } else {
                    Ok(Expr::FString(parts))
                }
            }
            Tok::Name(n) => match n.as_str() {
                "None" => Ok(Expr::None),
                "True" => Ok(Expr::Bool(true)),
                "False" => Ok(Expr::Bool(false)),
                _ if is_keyword(&n) => {
                    self.pos -= 1;
                    Err(self.error("invalid syntax"))
                }
                _ => Ok(Expr::Name(n)),
            },
            Tok::Op("...") => Ok(Expr::Ellipsis),
            Tok::Op("(") => {
                if self.eat_op(")") {
                    return Ok(Expr::Tuple(Vec::new()));
                }
                let first = self.test()?;
                if self.at_kw("for") {
                    let clauses = self.comp_clauses()?;
                    self.expect_op(")")?;
                    return Ok(Expr::ListComp { elt: Box::new(first), clauses });
                }
                if self.eat_op(")") {
                    return Ok(first);
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op(")") {
                        break;
                    }
                    items.push(self.test()?);
                }
                self.expect_op(")")?;
                Ok(Expr::Tuple(items))
            }
            Tok::Op("[") => {
                if self.eat_op("]") {
                    return Ok(Expr::List(Vec::new()));
                }
                let first = self.test()?;
                if self.at_kw("for") {
                    let clauses = self.comp_clauses()?;
                    self.expect_op("]")?;
                    return Ok(Expr::ListComp { elt: Box::new(first), clauses });
                }
                let mut items = vec![first];
                while self.eat_op(",") {
                    if self.at_op("]") {
                        break;
                    }
                    items.push(self.test()?);
                }
                self.expect_op("]")?;
                Ok(Expr::List(items))
            }
            Tok::Op("{") => {
                if self.eat_op("}") {
                    return Ok(Expr::Dict(Vec::new()));
                }
                let key = self.test()?;
                if !self.eat_op(":") {
                    return Err(self.error("set literals are not supported by this kernel"));
                }
                let value = self.test()?;
                if self.at_kw("for") {
                    let clauses = self.comp_clauses()?;
                    self.expect_op("}")?;
                    return Ok(Expr::DictComp { key: Box::new(key), value: Box::new(value), clauses });
                }
                let mut items = vec![(key, value)];
                while self.eat_op(",") {
                    if self.at_op("}") {
                        break;
                    }
                    let k = self.test()?;
                    self.expect_op(":")?;
                    items.push((k, self.test()?));
                }
                self.expect_op("}")?;
                Ok(Expr::Dict(items))
            }
            Tok::Shell(_) => {
                self.pos -= 1;
                Err(self.error("invalid syntax"))
            }
            Tok::Indent => {
                self.pos -= 1;
                Err(SyntaxError { kind: "IndentationError", msg: "unexpected indent".into(), line })
            }
            Tok::Eof | Tok::Newline | Tok::Dedent => {
                Err(SyntaxError { kind: "SyntaxError", msg: "invalid syntax".into(), line })
            }
            Tok::Op(_) => {
                self.pos -= 1;
                Err(self.error("invalid syntax"))
            }
        }
    }
}

fn push_str_parts(parts: &mut Vec<FPart>, value: String, fstring: bool, line: usize) -> Result<(), SyntaxError> {
    if !fstring {
        parts.push(FPart::Lit(value));
        return Ok(());
    }
    let chars: Vec<char> = value.chars().collect();
    let mut lit = String::new();
    let mut i = 0;
    let err = |msg: &str| SyntaxError { kind: "SyntaxError", msg: format!("f-string: {msg}"), line };
    while i < chars.len() {
        let c = chars[i];
        if c == '{' && chars.get(i + 1) == Some(&'{') {
            lit.push('{');
            i += 2;
            continue;
        }
        if c == '}' && chars.get(i + 1) == Some(&'}') {
            lit.push('}');
            i += 2;
            continue;
        }
        if c == '}' {
            return Err(err("single '}' is not allowed"));
        }
        if c != '{' {
            lit.push(c);
            i += 1;
            continue;
        }
        if !lit.is_empty() {
            parts.push(FPart::Lit(unescape(&std::mem::take(&mut lit))));
        }
        // Scan to the matching close brace, skipping nested brackets and strings.
        let start = i + 1;
        let mut depth = 0;
        let mut j = start;
        let mut quote: Option<char> = None;
        let mut expr_end = None;
        let mut conv_at = None;
        let mut spec_at = None;
        while j < chars.len() {
            let d = chars[j];
            if let Some(q) = quote {
                if d == q {
                    quote = None;
                }
            } else if d == '\'' || d == '"' {
                quote = Some(d);
            } else if matches!(d, '(' | '[' | '{') {
                depth += 1;
            } else if matches!(d, ')' | ']') {
                depth -= 1;
            } else if d == '}' {
                if depth == 0 {
                    break;
                }
                depth -= 1;
            } else if depth == 0 && d == '!' && chars.get(j + 1) != Some(&'=') && spec_at.is_none() && conv_at.is_none() {
                conv_at = Some(j);
                expr_end.get_or_insert(j);
            } else if depth == 0 && d == ':' && spec_at.is_none() {
                spec_at = Some(j);
                expr_end.get_or_insert(j);
            }
            j += 1;
        }
        if j >= chars.len() {
            return Err(err("expecting '}'"));
        }
        let expr_end = expr_end.unwrap_or(j);
        let expr_src: String = chars[start..expr_end].iter().collect();
        if expr_src.trim().is_empty() {
            return Err(err("valid expression required before '}'"));
        }
        let conversion = conv_at.and_then(|k| chars.get(k + 1).copied());
        let spec = spec_at.map(|k| chars[k + 1..j].iter().collect::<String>());
        let expr = parse_expression(&expr_src, line)?;
        parts.push(FPart::Expr { expr, conversion, spec });
        i = j + 1;
    }
    if !lit.is_empty() {
        parts.push(FPart::Lit(unescape(&lit)));
    }
    Ok(())
}

fn is_keyword(n: &str) -> bool {
    matches!(
        n,
        "False" | "None" | "True" | "and" | "as" | "assert" | "async" | "await" | "break" | "class"
            | "continue" | "def" | "del" | "elif" | "else" | "except" | "finally" | "for" | "from"
            | "global" | "if" | "import" | "in" | "is" | "lambda" | "nonlocal" | "not" | "or"
            | "pass" | "raise" | "return" | "try" | "while" | "with" | "yield"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_common_statements() {
        let src = "import math\nfrom os import path as p\nx = [i * 2 for i in range(3) if i]\n\
                   def f(a, b=2):\n    return a + b\nfor k, v in d.items():\n    print(k)\n\
                   try:\n    1/0\nexcept ZeroDivisionError as e:\n    pass\n!ls\n";
        let body = parse_module(src).unwrap();
        assert_eq!(body.len(), 7);
        assert!(matches!(body[6].kind, StmtKind::Shell(_)));
    }

    #[test]
    fn unexpected_indent_is_reported() {
        let e = parse_module("  x = 1").unwrap_err();
        assert_eq!(e.kind, "IndentationError");
    }

    #[test]
    fn missing_colon_is_syntax_error() {
        let e = parse_module("if x\n    pass").unwrap_err();
        assert_eq!(e.kind, "SyntaxError");
        assert_eq!(e.line, 1);
    }

    #[test]
    fn fstring_parts() {
        let body = parse_module("f'a{x!r}b{y:.2f}{{c}}'").unwrap();
        let StmtKind::Expr(Expr::FString(parts)) = &body[0].kind else { panic!() };
        assert_eq!(parts.len(), 5);
    }

    #[test]
    fn line_numbers_track_source() {
        let body = parse_module("a = 1\n\n# c\nb = (1,\n 2)\nc = 3\n").unwrap();
        let lines: Vec<_> = body.iter().map(|s| s.line).collect();
        assert_eq!(lines, vec![1, 4, 6]);
    }
}
