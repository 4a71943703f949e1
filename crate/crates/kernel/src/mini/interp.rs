//! Tree-walking evaluator.

use std::collections::HashMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::rc::Rc;
use std::thread;
use std::time::{Duration, Instant};

use super::ast::*;
use super::builtins;
use super::parser::parse_module;
use super::value::*;
use crate::{ExecResult, TIMEOUT_ENAME};

const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone)]
pub struct Frame {
    pub file: Rc<str>,
    pub func: Rc<str>,
    pub line: usize,
}

/// A raised exception travelling up the stack.
#[derive(Debug, Clone)]
pub struct PyErr {
    pub exc: Rc<ExcObj>,
    pub frames: Option<Vec<Frame>>,
    /// Set for the execution timeout, which `except` clauses never catch.
    pub uncatchable: bool,
}

impl PyErr {
    pub fn new(type_name: &str, msg: impl Into<String>) -> Self {
        let msg: String = msg.into();
        let args = if msg.is_empty() { vec![] } else { vec![Value::str_val(msg)] };
        PyErr::from_exc(Rc::new(ExcObj { type_name: type_name.into(), args }))
    }

    pub fn from_exc(exc: Rc<ExcObj>) -> Self {
        PyErr { exc, frames: None, uncatchable: false }
    }
}

pub fn err<T>(type_name: &str, msg: impl Into<String>) -> Result<T, PyErr> {
    Err(PyErr::new(type_name, msg))
}

pub enum Ctrl {
    Raise(PyErr),
    Return(Value),
    Break,
    Continue,
}

impl From<PyErr> for Ctrl {
    fn from(e: PyErr) -> Self {
        Ctrl::Raise(e)
    }
}

pub struct Interp {
    pub globals: Env,
    pub workdir: PathBuf,
    pub stdout: String,
    pub stderr: String,
    deadline: Instant,
    frames: Vec<Frame>,
    sources: HashMap<Rc<str>, Vec<String>>,
    /// Exceptions currently being handled, for bare `raise`.
    handling: Vec<PyErr>,
    pub modules: HashMap<String, Value>,
    exec_count: usize,
}

impl Interp {
    pub fn new(workdir: PathBuf) -> Self {
        Interp {
            globals: Scope::root(),
            workdir,
            stdout: String::new(),
            stderr: String::new(),
            deadline: Instant::now() + Duration::from_secs(3600),
            frames: Vec::new(),
            sources: HashMap::new(),
            handling: Vec::new(),
            modules: HashMap::new(),
            exec_count: 0,
        }
    }

    pub fn reset(&mut self) {
        let workdir = std::mem::take(&mut self.workdir);
        *self = Interp::new(workdir);
    }

    pub fn run_cell(&mut self, code: &str, timeout: Duration) -> ExecResult {
        let started = Instant::now();
        self.deadline = started + timeout;
        self.stdout.clear();
        self.stderr.clear();
        self.frames.clear();
        self.handling.clear();
        self.exec_count += 1;
        let file: Rc<str> = format!("<cell-{}>", self.exec_count).into();
        self.sources.insert(file.clone(), code.lines().map(str::to_string).collect());

        let mut result = ExecResult::default();
        match parse_module(code) {
            Err(e) => {
                let line_text = code.lines().nth(e.line.saturating_sub(1)).unwrap_or("").trim();
                result.ename = Some(e.kind.to_string());
                result.evalue = Some(e.msg.clone());
                result.traceback = Some(format!(
                    "  File \"{file}\", line {}\n    {line_text}\n{}: {}",
                    e.line, e.kind, e.msg
                ));
            }
            Ok(body) => {
                self.frames.push(Frame { file: file.clone(), func: "<module>".into(), line: 0 });
                let globals = self.globals.clone();
                let outcome = self.exec_module(&body, &globals);
                self.frames.clear();
                match outcome {
                    Ok(Some(v)) if !matches!(v, Value::None) => result.result_repr = Some(v.repr()),
                    Ok(_) => {}
                    Err(e) => {
                        result.ename = Some(e.exc.type_name.to_string());
                        result.evalue = Some(e.exc.message());
                        result.traceback = Some(self.format_traceback(&e));
                    }
                }
            }
        }
        result.stdout = std::mem::take(&mut self.stdout);
        result.stderr = std::mem::take(&mut self.stderr);
        result.duration_ms = started.elapsed().as_millis() as u64;
        result
    }

    /// Runs top-level statements, returning the value of a trailing expression statement.
    fn exec_module(&mut self, body: &[Stmt], env: &Env) -> Result<Option<Value>, PyErr> {
        let Some((last, init)) = body.split_last() else {
            return Ok(None);
        };
        for stmt in init {
            self.exec_top(stmt, env)?;
        }
        if let StmtKind::Expr(e) = &last.kind {
            self.set_line(last.line);
            self.check_deadline()?;
            return self.eval(e, env).map(Some).map_err(|e| self.with_frames(e));
        }
        self.exec_top(last, env)?;
        Ok(None)
    }

    fn exec_top(&mut self, stmt: &Stmt, env: &Env) -> Result<(), PyErr> {
        match self.exec_stmt(stmt, env) {
            Ok(()) => Ok(()),
            Err(Ctrl::Raise(e)) => Err(e),
            Err(Ctrl::Return(_)) => Err(self.with_frames(PyErr::new("SyntaxError", "'return' outside function"))),
            Err(Ctrl::Break) | Err(Ctrl::Continue) => {
                Err(self.with_frames(PyErr::new("SyntaxError", "'break' outside loop")))
            }
        }
    }

    pub fn format_traceback(&self, e: &PyErr) -> String {
        let mut out = String::from("Traceback (most recent call last):\n");
        for frame in e.frames.iter().flatten() {
            out.push_str(&format!("  File \"{}\", line {}, in {}\n", frame.file, frame.line, frame.func));
            if let Some(text) = self.sources.get(&frame.file).and_then(|s| s.get(frame.line.wrapping_sub(1))) {
                let text = text.trim();
                if !text.is_empty() {
                    out.push_str(&format!("    {text}\n"));
                }
            }
        }
        let msg = e.exc.message();
        if msg.is_empty() {
            out.push_str(&e.exc.type_name);
        } else {
            out.push_str(&format!("{}: {}", e.exc.type_name, msg));
        }
        out
    }

    fn set_line(&mut self, line: usize) {
        if let Some(f) = self.frames.last_mut() {
            f.line = line;
        }
    }

    fn with_frames(&self, mut e: PyErr) -> PyErr {
        if e.frames.is_none() {
            e.frames = Some(self.frames.clone());
        }
        e
    }

    pub fn check_deadline(&self) -> Result<(), PyErr> {
        if Instant::now() >= self.deadline {
            let mut e = PyErr::new(TIMEOUT_ENAME, "cell execution exceeded its timeout");
            e.uncatchable = true;
            return Err(e);
        }
        Ok(())
    }

    pub fn remaining(&self) -> Duration {
        self.deadline.saturating_duration_since(Instant::now())
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let path = Path::new(p);
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.workdir.join(path)
        }
    }

    // ---- statements ----

    fn exec_block(&mut self, body: &[Stmt], env: &Env) -> Result<(), Ctrl> {
        for stmt in body {
            self.exec_stmt(stmt, env)?;
        }
        Ok(())
    }

    fn exec_stmt(&mut self, stmt: &Stmt, env: &Env) -> Result<(), Ctrl> {
        self.set_line(stmt.line);
        let result = self.check_deadline().map_err(Ctrl::from).and_then(|_| self.exec_kind(stmt, env));
        match result {
            Err(Ctrl::Raise(e)) => {
                let e = self.with_frames(e);
                Err(Ctrl::Raise(e))
            }
            other => other,
        }
    }

    fn exec_kind(&mut self, stmt: &Stmt, env: &Env) -> Result<(), Ctrl> {
        match &stmt.kind {
            StmtKind::Expr(e) => {
                self.eval(e, env)?;
            }
            StmtKind::Assign { targets, value } => {
                let v = self.eval(value, env)?;
                for t in targets {
                    self.assign(t, v.clone(), env)?;
                }
            }
            StmtKind::AugAssign { target, op, value } => {
                let current = match target {
                    Target::Name(n) => self.lookup(n, env)?,
                    Target::Subscript(obj, idx) => {
                        let o = self.eval(obj, env)?;
                        let i = self.eval(idx, env)?;
                        builtins::subscript(self, &o, &i)?
                    }
                    Target::Attribute(obj, attr) => {
                        let o = self.eval(obj, env)?;
                        builtins::getattr(self, &o, attr)?
                    }
                    Target::Tuple(_) => unreachable!("rejected by the parser"),
                };
                let rhs = self.eval(value, env)?;
                let result = if let (BinOp::Add, Value::List(l)) = (op, &current) {
                    let items = self.iterate(&rhs)?;
                    l.borrow_mut().extend(items);
                    current.clone()
                } else {
                    self.binop(*op, &current, &rhs)?
                };
                self.assign(target, result, env)?;
            }
            StmtKind::If { branches, orelse } => {
                for (cond, body) in branches {
                    if self.eval(cond, env)?.truthy() {
                        return self.exec_block(body, env);
                    }
                }
                self.exec_block(orelse, env)?;
            }
            StmtKind::For { target, iter, body, orelse } => {
                let it = self.eval(iter, env)?;
                let mut broke = false;
                let each = |interp: &mut Interp, item: Value| -> Result<bool, Ctrl> {
                    interp.check_deadline()?;
                    interp.assign(target, item, env)?;
                    match interp.exec_block(body, env) {
                        Ok(()) | Err(Ctrl::Continue) => Ok(true),
                        Err(Ctrl::Break) => Ok(false),
                        Err(e) => Err(e),
                    }
                };
                if let Value::Range(start, stop, step) = it {
                    let mut i = start;
                    while (step > 0 && i < stop) || (step < 0 && i > stop) {
                        if !each(self, Value::Int(i))? {
                            broke = true;
                            break;
                        }
                        i += step;
                    }
                } else {
                    for item in self.iterate(&it)? {
                        if !each(self, item)? {
                            broke = true;
                            break;
                        }
                    }
                }
                if !broke {
                    self.exec_block(orelse, env)?;
                }
            }
            StmtKind::While { cond, body, orelse } => {
                let mut broke = false;
                while self.eval(cond, env)?.truthy() {
                    self.check_deadline()?;
                    match self.exec_block(body, env) {
                        Ok(()) | Err(Ctrl::Continue) => {}
                        Err(Ctrl::Break) => {
                            broke = true;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if !broke {
                    self.exec_block(orelse, env)?;
                }
            }
            StmtKind::Def(def) => {
                let closure = self.make_closure(def, env)?;
                self.bind(&def.name, closure, env);
            }
            StmtKind::Return(value) => {
                let v = match value {
                    Some(e) => self.eval(e, env)?,
                    None => Value::None,
                };
                return Err(Ctrl::Return(v));
            }
            StmtKind::Pass => {}
            StmtKind::Break => return Err(Ctrl::Break),
            StmtKind::Continue => return Err(Ctrl::Continue),
            StmtKind::Raise(value) => {
                let Some(e) = value else {
                    return match self.handling.last() {
                        Some(active) => Err(Ctrl::Raise(active.clone())),
                        None => Err(PyErr::new("RuntimeError", "No active exception to reraise").into()),
                    };
                };
                let v = self.eval(e, env)?;
                let exc = match v {
                    Value::Exception(exc) => exc,
                    Value::Type(t) if is_exception_class(&t) => Rc::new(ExcObj { type_name: t, args: vec![] }),
                    _ => return Err(PyErr::new("TypeError", "exceptions must derive from BaseException").into()),
                };
                return Err(PyErr::from_exc(exc).into());
            }
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                let outcome = self.exec_try(body, handlers, orelse, env);
                if !finalbody.is_empty() {
                    if let Err(Ctrl::Raise(e)) = &outcome {
                        if e.uncatchable {
                            return outcome;
                        }
                    }
                    self.exec_block(finalbody, env)?;
                }
                return outcome;
            }
            StmtKind::Import { module, alias } => {
                let m = self.import(module)?;
                match alias {
                    Some(a) => self.bind(a, m, env),
                    None => {
                        let top = module.split('.').next().unwrap();
                        let top_module = self.import(top)?;
                        self.bind(top, top_module, env);
                    }
                }
            }
            StmtKind::FromImport { module, names } => {
                let m = self.import(module)?;
                let Value::Module(md) = &m else { unreachable!() };
                for (name, alias) in names {
                    if name == "*" {
                        let attrs: Vec<(String, Value)> =
                            md.attrs.borrow().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                        for (k, v) in attrs {
                            self.bind(&k, v, env);
                        }
                        continue;
                    }
                    let v = md.attrs.borrow().get(name).cloned();
                    let v = match v {
                        Some(v) => v,
                        None => match self.import(&format!("{module}.{name}")) {
                            Ok(sub) => sub,
                            Err(_) => {
                                return Err(PyErr::new(
                                    "ImportError",
                                    format!("cannot import name '{name}' from '{module}'"),
                                )
                                .into())
                            }
                        },
                    };
                    self.bind(alias.as_ref().unwrap_or(name), v, env);
                }
            }
            StmtKind::Global(names) => {
                env.globals_decl.borrow_mut().extend(names.iter().cloned());
            }
            StmtKind::Del(targets) => {
                for t in targets {
                    self.delete(t, env)?;
                }
            }
            StmtKind::Assert { test, msg } => {
                if !self.eval(test, env)?.truthy() {
                    let args = match msg {
                        Some(m) => vec![self.eval(m, env)?],
                        None => vec![],
                    };
                    return Err(PyErr::from_exc(Rc::new(ExcObj { type_name: "AssertionError".into(), args })).into());
                }
            }
            StmtKind::With { ctx, target, body } => {
                let v = self.eval(ctx, env)?;
                if let Some(t) = target {
                    self.assign(t, v.clone(), env)?;
                }
                let outcome = self.exec_block(body, env);
                if let Value::File(f) = &v {
                    f.borrow_mut().closed = true;
                }
                return outcome;
            }
            StmtKind::Shell(cmd) => self.run_shell(cmd)?,
        }
        Ok(())
    }

    fn exec_try(&mut self, body: &[Stmt], handlers: &[Handler], orelse: &[Stmt], env: &Env) -> Result<(), Ctrl> {
        let e = match self.exec_block(body, env) {
            Ok(()) => return self.exec_block(orelse, env),
            Err(Ctrl::Raise(e)) if !e.uncatchable => e,
            Err(other) => return Err(other),
        };
        for h in handlers {
            let mut matched = h.types.is_empty();
            for t in &h.types {
                match self.eval(t, env)? {
                    Value::Type(name) if is_exception_class(&name) => {
                        if exception_is_subclass(&e.exc.type_name, &name) {
                            matched = true;
                        }
                    }
                    Value::Tuple(items) => {
                        for item in items.iter() {
                            if let Value::Type(name) = item {
                                if exception_is_subclass(&e.exc.type_name, name) {
                                    matched = true;
                                }
                            }
                        }
                    }
                    _ => {
                        return Err(PyErr::new(
                            "TypeError",
                            "catching classes that do not inherit from BaseException is not allowed",
                        )
                        .into())
                    }
                }
            }
            if matched {
                if let Some(name) = &h.name {
                    self.bind(name, Value::Exception(e.exc.clone()), env);
                }
                self.handling.push(e);
                let outcome = self.exec_block(&h.body, env);
                self.handling.pop();
                return outcome;
            }
        }
        Err(Ctrl::Raise(e))
    }

    fn run_shell(&mut self, cmd: &str) -> Result<(), PyErr> {
        let mut command = Command::new("sh");
        command.arg("-c").arg(cmd);
        #[cfg(unix)]
        std::os::unix::process::CommandExt::process_group(&mut command, 0);
        let mut child = command
            .current_dir(&self.workdir)
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| PyErr::new("OSError", format!("cannot run shell command: {e}")))?;
        let mut out = child.stdout.take().unwrap();
        let mut errp = child.stderr.take().unwrap();
        let out_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = out.read_to_end(&mut buf);
            buf
        });
        let err_reader = thread::spawn(move || {
            let mut buf = Vec::new();
            let _ = errp.read_to_end(&mut buf);
            buf
        });
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break Some(status),
                Ok(None) if Instant::now() >= self.deadline => {
                    kill_group(child.id());
                    let _ = child.kill();
                    let _ = child.wait();
                    break None;
                }
                Ok(None) => thread::sleep(Duration::from_millis(5)),
                Err(e) => return err("OSError", e.to_string()),
            }
        };
        let stdout = out_reader.join().unwrap_or_default();
        let stderr = err_reader.join().unwrap_or_default();
        self.stdout.push_str(&String::from_utf8_lossy(&stdout));
        self.stderr.push_str(&String::from_utf8_lossy(&stderr));
        match status {
            None => self.check_deadline(),
            Some(s) if !s.success() => {
                let code = s.code().map(|c| c.to_string()).unwrap_or_else(|| "signal".into());
                self.stderr.push_str(&format!("exit code {code}\n"));
                Ok(())
            }
            Some(_) => Ok(()),
        }
    }

    fn import(&mut self, name: &str) -> Result<Value, PyErr> {
        if let Some(m) = self.modules.get(name) {
            return Ok(m.clone());
        }
        let m = builtins::make_module(name)
            .ok_or_else(|| PyErr::new("ModuleNotFoundError", format!("No module named '{name}'")))?;
        self.modules.insert(name.to_string(), m.clone());
        Ok(m)
    }

    pub fn make_closure(&mut self, def: &Rc<FuncDef>, env: &Env) -> Result<Value, PyErr> {
        let mut defaults = Vec::with_capacity(def.params.len());
        for p in &def.params {
            defaults.push(match &p.default {
                Some(e) => Some(self.eval(e, env)?),
                None => None,
            });
        }
        let file = self.frames.last().map(|f| f.file.clone()).unwrap_or_else(|| "<unknown>".into());
        Ok(Value::Func(Rc::new(Closure { def: def.clone(), env: env.clone(), defaults, file })))
    }

    // ---- names and targets ----

    fn bind(&mut self, name: &str, value: Value, env: &Env) {
        if env.globals_decl.borrow().iter().any(|g| g == name) {
            self.globals.vars.borrow_mut().insert(name.to_string(), value);
        } else {
            env.vars.borrow_mut().insert(name.to_string(), value);
        }
    }

    fn lookup(&self, name: &str, env: &Env) -> Result<Value, PyErr> {
        if let Some(v) = env.lookup(name) {
            return Ok(v);
        }
        if let Some(v) = self.globals.vars.borrow().get(name) {
            return Ok(v.clone());
        }
        builtins::builtin(name).ok_or_else(|| PyErr::new("NameError", format!("name '{name}' is not defined")))
    }

    fn assign(&mut self, target: &Target, value: Value, env: &Env) -> Result<(), PyErr> {
        match target {
            Target::Name(n) => {
                self.bind(n, value, env);
                Ok(())
            }
            Target::Subscript(obj, idx) => {
                let o = self.eval(obj, env)?;
                let i = self.eval(idx, env)?;
                builtins::set_item(&o, i, value)
            }
            Target::Attribute(obj, attr) => {
                let o = self.eval(obj, env)?;
                match o {
                    Value::Module(m) => {
                        m.attrs.borrow_mut().insert(attr.clone(), value);
                        Ok(())
                    }
                    other => err(
                        "AttributeError",
                        format!("'{}' object attribute '{attr}' is read-only", other.type_name()),
                    ),
                }
            }
            Target::Tuple(targets) => {
                let items = self.iterate(&value)?;
                if items.len() > targets.len() {
                    return err("ValueError", format!("too many values to unpack (expected {})", targets.len()));
                }
                if items.len() < targets.len() {
                    return err(
                        "ValueError",
                        format!("not enough values to unpack (expected {}, got {})", targets.len(), items.len()),
                    );
                }
                for (t, v) in targets.iter().zip(items) {
                    self.assign(t, v, env)?;
                }
                Ok(())
            }
        }
    }

    fn delete(&mut self, target: &Target, env: &Env) -> Result<(), PyErr> {
        match target {
            Target::Name(n) => {
                let removed = env.vars.borrow_mut().remove(n).is_some()
                    || self.globals.vars.borrow_mut().remove(n).is_some();
                if removed {
                    Ok(())
                } else {
                    err("NameError", format!("name '{n}' is not defined"))
                }
            }
            Target::Subscript(obj, idx) => {
                let o = self.eval(obj, env)?;
                let i = self.eval(idx, env)?;
                builtins::del_item(&o, &i)
            }
            Target::Attribute(..) => err("AttributeError", "cannot delete attribute"),
            Target::Tuple(ts) => {
                for t in ts {
                    self.delete(t, env)?;
                }
                Ok(())
            }
        }
    }

    // ---- expressions ----

    pub fn eval(&mut self, expr: &Expr, env: &Env) -> Result<Value, PyErr> {
        Ok(match expr {
            Expr::None => Value::None,
            Expr::Ellipsis => Value::Ellipsis,
            Expr::Bool(b) => Value::Bool(*b),
            Expr::Int(i) => Value::Int(*i),
            Expr::Float(f) => Value::Float(*f),
            Expr::Str(s) => Value::Str(s.clone()),
            Expr::FString(parts) => {
                let mut out = String::new();
                for part in parts {
                    match part {
                        FPart::Lit(s) => out.push_str(s),
                        FPart::Expr { expr, conversion, spec } => {
                            let v = self.eval(expr, env)?;
                            let v = match conversion {
                                Some('r') => Value::str_val(v.repr()),
                                Some('s') => Value::str_val(v.str()),
                                _ => v,
                            };
                            out.push_str(&builtins::format_value(&v, spec.as_deref().unwrap_or(""))?);
                        }
                    }
                }
                Value::str_val(out)
            }
            Expr::Name(n) => self.lookup(n, env)?,
            Expr::List(items) => {
                let vals = items.iter().map(|e| self.eval(e, env)).collect::<Result<_, _>>()?;
                Value::list(vals)
            }
            Expr::Tuple(items) => {
                let vals: Vec<Value> = items.iter().map(|e| self.eval(e, env)).collect::<Result<_, _>>()?;
                Value::Tuple(vals.into())
            }
            Expr::Dict(items) => {
                let mut d = Dict::default();
                for (k, v) in items {
                    let k = self.eval(k, env)?;
                    let v = self.eval(v, env)?;
                    builtins::check_hashable(&k)?;
                    d.insert(k, v);
                }
                Value::Dict(Rc::new(std::cell::RefCell::new(d)))
            }
            Expr::ListComp { elt, clauses } => {
                let scope = Scope::child(env);
                let mut out = Vec::new();
                self.comprehend(clauses, &scope, &mut |interp, scope| {
                    out.push(interp.eval(elt, scope)?);
                    Ok(())
                })?;
                Value::list(out)
            }
            Expr::DictComp { key, value, clauses } => {
                let scope = Scope::child(env);
                let mut d = Dict::default();
                self.comprehend(clauses, &scope, &mut |interp, scope| {
                    let k = interp.eval(key, scope)?;
                    builtins::check_hashable(&k)?;
                    let v = interp.eval(value, scope)?;
                    d.insert(k, v);
                    Ok(())
                })?;
                Value::Dict(Rc::new(std::cell::RefCell::new(d)))
            }
            Expr::BinOp(l, op, r) => {
                let a = self.eval(l, env)?;
                let b = self.eval(r, env)?;
                self.binop(*op, &a, &b)?
            }
            Expr::Unary(op, e) => {
                let v = self.eval(e, env)?;
                match (op, &v) {
                    (UnaryOp::Not, _) => Value::Bool(!v.truthy()),
                    (UnaryOp::Neg, Value::Int(i)) => Value::Int(
                        i.checked_neg().ok_or_else(|| PyErr::new("OverflowError", "integer overflow"))?,
                    ),
                    (UnaryOp::Neg, Value::Bool(b)) => Value::Int(-(*b as i64)),
                    (UnaryOp::Neg, Value::Float(f)) => Value::Float(-f),
                    (UnaryOp::Pos, Value::Int(_) | Value::Float(_)) => v.clone(),
                    (UnaryOp::Pos, Value::Bool(b)) => Value::Int(*b as i64),
                    _ => {
                        let sym = if *op == UnaryOp::Neg { "-" } else { "+" };
                        return err("TypeError", format!("bad operand type for unary {sym}: '{}'", v.type_name()));
                    }
                }
            }
            Expr::And(l, r) => {
                let a = self.eval(l, env)?;
                if !a.truthy() {
                    a
                } else {
                    self.eval(r, env)?
                }
            }
            Expr::Or(l, r) => {
                let a = self.eval(l, env)?;
                if a.truthy() {
                    a
                } else {
                    self.eval(r, env)?
                }
            }
            Expr::Compare(first, ops) => {
                let mut left = self.eval(first, env)?;
                for (op, rhs) in ops {
                    let right = self.eval(rhs, env)?;
                    if !self.compare(*op, &left, &right)? {
                        return Ok(Value::Bool(false));
                    }
                    left = right;
                }
                Value::Bool(true)
            }
            Expr::IfExp { test, body, orelse } => {
                if self.eval(test, env)?.truthy() {
                    self.eval(body, env)?
                } else {
                    self.eval(orelse, env)?
                }
            }
            Expr::Call(f, args) => {
                let func = self.eval(f, env)?;
                let mut pos = Vec::new();
                let mut kw = Vec::new();
                for a in args {
                    match a {
                        Arg::Pos(e) => pos.push(self.eval(e, env)?),
                        Arg::Star(e) => {
                            let v = self.eval(e, env)?;
                            pos.extend(self.iterate(&v)?);
                        }
                        Arg::Kw(name, e) => kw.push((name.clone(), self.eval(e, env)?)),
                    }
                }
                self.call(&func, pos, kw)?
            }
            Expr::Attribute(obj, attr) => {
                let o = self.eval(obj, env)?;
                builtins::getattr(self, &o, attr)?
            }
            Expr::Subscript(obj, idx) => {
                let o = self.eval(obj, env)?;
                let i = self.eval(idx, env)?;
                builtins::subscript(self, &o, &i)?
            }
            Expr::Slice(a, b, c) => {
                let mut part = |e: &Option<Box<Expr>>| -> Result<Value, PyErr> {
                    match e {
                        Some(e) => self.eval(e, env),
                        None => Ok(Value::None),
                    }
                };
                let items = vec![part(a)?, part(b)?, part(c)?];
                // Slices travel as a tagged tuple; only subscripting consumes them.
                Value::Tuple(vec![Value::Builtin("slice"), Value::Tuple(items.into())].into())
            }
            Expr::Lambda(def) => self.make_closure(def, env)?,
        })
    }

    fn comprehend(
        &mut self,
        clauses: &[CompClause],
        scope: &Env,
        emit: &mut dyn FnMut(&mut Interp, &Env) -> Result<(), PyErr>,
    ) -> Result<(), PyErr> {
        let Some((first, rest)) = clauses.split_first() else {
            return emit(self, scope);
        };
        let it = self.eval(&first.iter, scope)?;
        for item in self.iterate(&it)? {
            self.check_deadline()?;
            self.assign(&first.target, item, scope)?;
            let mut keep = true;
            for c in &first.conds {
                if !self.eval(c, scope)?.truthy() {
                    keep = false;
                    break;
                }
            }
            if keep {
                self.comprehend(rest, scope, emit)?;
            }
        }
        Ok(())
    }

    pub fn call(&mut self, func: &Value, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Result<Value, PyErr> {
        match func {
            Value::Func(c) => self.call_closure(c, pos, kw),
            Value::Builtin(name) => builtins::call_builtin(self, name, pos, kw),
            Value::Method(m) => builtins::call_method(self, &m.0, &m.1, pos, kw),
            Value::Type(t) => builtins::call_type(self, t, pos, kw),
            other => err("TypeError", format!("'{}' object is not callable", other.type_name())),
        }
    }

    fn call_closure(&mut self, c: &Rc<Closure>, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Result<Value, PyErr> {
        let def = &c.def;
        if self.frames.len() >= MAX_DEPTH {
            return err("RecursionError", "maximum recursion depth exceeded");
        }
        if pos.len() > def.params.len() {
            return err(
                "TypeError",
                format!(
                    "{}() takes {} positional arguments but {} were given",
                    def.name,
                    def.params.len(),
                    pos.len()
                ),
            );
        }
        let scope = Scope::child(&c.env);
        let mut slots: Vec<Option<Value>> = pos.into_iter().map(Some).collect();
        slots.resize(def.params.len(), None);
        for (name, v) in kw {
            let Some(idx) = def.params.iter().position(|p| p.name == name) else {
                return err("TypeError", format!("{}() got an unexpected keyword argument '{name}'", def.name));
            };
            if slots[idx].is_some() {
                return err("TypeError", format!("{}() got multiple values for argument '{name}'", def.name));
            }
            slots[idx] = Some(v);
        }
        for (i, p) in def.params.iter().enumerate() {
            let v = match slots[i].take().or_else(|| c.defaults[i].clone()) {
                Some(v) => v,
                None => {
                    return err(
                        "TypeError",
                        format!("{}() missing 1 required positional argument: '{}'", def.name, p.name),
                    )
                }
            };
            scope.vars.borrow_mut().insert(p.name.clone(), v);
        }
        self.frames.push(Frame { file: c.file.clone(), func: def.name.as_str().into(), line: 0 });
        let outcome = self.exec_block(&def.body, &scope);
        self.frames.pop();
        match outcome {
            Ok(()) => Ok(Value::None),
            Err(Ctrl::Return(v)) => Ok(v),
            Err(Ctrl::Raise(e)) => Err(e),
            Err(Ctrl::Break) | Err(Ctrl::Continue) => err("SyntaxError", "'break' outside loop"),
        }
    }

    pub fn iterate(&mut self, v: &Value) -> Result<Vec<Value>, PyErr> {
        builtins::iterate(v)
    }

    pub fn binop(&mut self, op: BinOp, a: &Value, b: &Value) -> Result<Value, PyErr> {
        builtins::binop(op, a, b)
    }

    fn compare(&mut self, op: CmpOp, a: &Value, b: &Value) -> Result<bool, PyErr> {
        Ok(match op {
            CmpOp::Eq => a.py_eq(b),
            CmpOp::Ne => !a.py_eq(b),
            CmpOp::Is => a.is_same(b),
            CmpOp::IsNot => !a.is_same(b),
            CmpOp::In => builtins::contains(b, a)?,
            CmpOp::NotIn => !builtins::contains(b, a)?,
            CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge => {
                let sym = match op {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Gt => ">",
                    _ => ">=",
                };
                let ord = a.py_cmp(b).ok_or_else(|| {
                    PyErr::new(
                        "TypeError",
                        format!(
                            "'{sym}' not supported between instances of '{}' and '{}'",
                            a.type_name(),
                            b.type_name()
                        ),
                    )
                })?;
                match op {
                    CmpOp::Lt => ord.is_lt(),
                    CmpOp::Le => ord.is_le(),
                    CmpOp::Gt => ord.is_gt(),
                    _ => ord.is_ge(),
                }
            }
        })
    }
}

/// Kills the shell and anything it started, so no grandchild keeps the
/// output pipes open.
fn kill_group(pid: u32) {
    #[cfg(unix)]
    let _ = Command::new("kill")
        .args(["-KILL", "--", &format!("-{pid}")])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status();
    #[cfg(not(unix))]
    let _ = pid;
}
