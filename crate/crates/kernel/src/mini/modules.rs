//! Importable modules: math, os, os.path, json, time, csv, sys.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::rc::Rc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::de::{self, Deserializer as _, MapAccess, SeqAccess, Visitor};

use super::builtins::{arg, arity, expect_str, iterate, kwarg};
use super::interp::{err, Interp, PyErr};
use super::methods::{file_write, io_error};
use super::value::*;

const MATH_FNS: &[&str] = &[
    "math.sqrt", "math.floor", "math.ceil", "math.log", "math.log10", "math.log2", "math.exp", "math.pow",
    "math.fabs", "math.isnan", "math.isinf", "math.sin", "math.cos", "math.tan", "math.isclose", "math.trunc",
];
const OS_FNS: &[&str] = &["os.listdir", "os.getcwd", "os.makedirs", "os.mkdir", "os.remove", "os.rename"];
const OS_PATH_FNS: &[&str] = &[
    "os.path.exists", "os.path.join", "os.path.isfile", "os.path.isdir", "os.path.basename", "os.path.dirname",
    "os.path.getsize", "os.path.splitext",
];
const JSON_FNS: &[&str] = &["json.loads", "json.dumps", "json.load", "json.dump"];
const TIME_FNS: &[&str] = &["time.time", "time.sleep"];
const CSV_FNS: &[&str] = &["csv.reader"];

fn module(name: &str, fns: &[&'static str], extra: Vec<(&str, Value)>) -> Value {
    let mut attrs = HashMap::new();
    for f in fns {
        attrs.insert(f.rsplit('.').next().unwrap().to_string(), Value::Builtin(f));
    }
    for (k, v) in extra {
        attrs.insert(k.to_string(), v);
    }
    Value::Module(Rc::new(Module { name: name.to_string(), attrs: RefCell::new(attrs) }))
}

pub fn make_module(name: &str) -> Option<Value> {
    Some(match name {
        "math" => module(
            name,
            MATH_FNS,
            vec![
                ("pi", Value::Float(std::f64::consts::PI)),
                ("e", Value::Float(std::f64::consts::E)),
                ("inf", Value::Float(f64::INFINITY)),
                ("nan", Value::Float(f64::NAN)),
            ],
        ),
        "os" => module(name, OS_FNS, vec![("path", make_module("os.path")?), ("sep", Value::str_val("/"))]),
        "os.path" => module(name, OS_PATH_FNS, vec![("sep", Value::str_val("/"))]),
        "json" => module(name, JSON_FNS, vec![("JSONDecodeError", Value::Type("JSONDecodeError".into()))]),
        "time" => module(name, TIME_FNS, vec![]),
        "csv" => module(name, CSV_FNS, vec![]),
        "sys" => module(
            name,
            &[],
            vec![
                ("version", Value::str_val("3.11.0 (nbfix mini kernel)")),
                ("argv", Value::list(vec![Value::str_val("kernel")])),
            ],
        ),
        _ => return None,
    })
}

fn num(v: &Value, fname: &str) -> Result<f64, PyErr> {
    v.as_f64()
        .ok_or_else(|| PyErr::new("TypeError", format!("{fname}() argument must be a real number, not '{}'", v.type_name())))
}

fn domain() -> PyErr {
    PyErr::new("ValueError", "math domain error")
}

fn to_int(f: f64) -> Result<Value, PyErr> {
    if f.is_nan() {
        return err("ValueError", "cannot convert float NaN to integer");
    }
    if f.is_infinite() {
        return err("OverflowError", "cannot convert float infinity to integer");
    }
    Ok(Value::Int(f as i64))
}

pub fn call_module_fn(interp: &mut Interp, name: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Result<Value, PyErr> {
    let short = name.rsplit('.').next().unwrap();
    match name {
        "math.sqrt" | "math.exp" | "math.fabs" | "math.sin" | "math.cos" | "math.tan" | "math.log10" | "math.log2" => {
            arity(short, &pos, 1, 1)?;
            let x = num(&pos[0], short)?;
            let r = match short {
                "sqrt" if x < 0.0 => return Err(domain()),
                "sqrt" => x.sqrt(),
                "exp" => x.exp(),
                "fabs" => x.abs(),
                "sin" => x.sin(),
                "cos" => x.cos(),
                "tan" => x.tan(),
                _ if x <= 0.0 => return Err(domain()),
                "log10" => x.log10(),
                _ => x.log2(),
            };
            Ok(Value::Float(r))
        }
        "math.log" => {
            arity("log", &pos, 1, 2)?;
            let x = num(&pos[0], "log")?;
            if x <= 0.0 {
                return Err(domain());
            }
            match pos.get(1) {
                Some(b) => Ok(Value::Float(x.ln() / num(b, "log")?.ln())),
                None => Ok(Value::Float(x.ln())),
            }
        }
        "math.floor" | "math.ceil" | "math.trunc" => {
            arity(short, &pos, 1, 1)?;
            if let Value::Int(_) | Value::Bool(_) = pos[0] {
                return Ok(Value::Int(pos[0].as_int().unwrap()));
            }
            let x = num(&pos[0], short)?;
            to_int(match short {
                "floor" => x.floor(),
                "ceil" => x.ceil(),
                _ => x.trunc(),
            })
        }
        "math.pow" => {
            arity("pow", &pos, 2, 2)?;
            Ok(Value::Float(num(&pos[0], "pow")?.powf(num(&pos[1], "pow")?)))
        }
        "math.isnan" => Ok(Value::Bool(num(pos.first().unwrap_or(&Value::None), "isnan")?.is_nan())),
        "math.isinf" => Ok(Value::Bool(num(pos.first().unwrap_or(&Value::None), "isinf")?.is_infinite())),
        "math.isclose" => {
            arity("isclose", &pos, 2, 2)?;
            let (a, b) = (num(&pos[0], "isclose")?, num(&pos[1], "isclose")?);
            let rel = kwarg(&kw, "rel_tol").and_then(|v| v.as_f64()).unwrap_or(1e-9);
            let abs = kwarg(&kw, "abs_tol").and_then(|v| v.as_f64()).unwrap_or(0.0);
            Ok(Value::Bool(a == b || (a - b).abs() <= (rel * a.abs().max(b.abs())).max(abs)))
        }
        "os.getcwd" => Ok(Value::str_val(interp.workdir.to_string_lossy().to_string())),
        "os.listdir" => {
            let shown = match arg(&pos, &kw, 0, "path") {
                Some(p) => expect_str(&p, "path")?.to_string(),
                None => ".".into(),
            };
            let dir = interp.resolve_path(&shown);
            let mut names: Vec<String> = fs::read_dir(&dir)
                .map_err(|e| io_error(&e, &shown))?
                .filter_map(|entry| entry.ok().map(|e| e.file_name().to_string_lossy().to_string()))
                .collect();
            names.sort();
            Ok(Value::list(names.into_iter().map(Value::str_val).collect()))
        }
        "os.makedirs" | "os.mkdir" => {
            arity(short, &pos, 1, 2)?;
            let shown = expect_str(&pos[0], "path")?;
            let path = interp.resolve_path(&shown);
            let exist_ok = kwarg(&kw, "exist_ok").is_some_and(|v| v.truthy());
            if path.exists() && !(exist_ok && path.is_dir()) {
                return Err(io_error(&std::io::Error::from(std::io::ErrorKind::AlreadyExists), &shown));
            }
            let result = if short == "mkdir" { fs::create_dir(&path) } else { fs::create_dir_all(&path) };
            result.map_err(|e| io_error(&e, &shown))?;
            Ok(Value::None)
        }
        "os.remove" => {
            arity("remove", &pos, 1, 1)?;
            let shown = expect_str(&pos[0], "path")?;
            fs::remove_file(interp.resolve_path(&shown)).map_err(|e| io_error(&e, &shown))?;
            Ok(Value::None)
        }
        "os.rename" => {
            arity("rename", &pos, 2, 2)?;
            let from = expect_str(&pos[0], "src")?;
            let to = expect_str(&pos[1], "dst")?;
            fs::rename(interp.resolve_path(&from), interp.resolve_path(&to)).map_err(|e| io_error(&e, &from))?;
            Ok(Value::None)
        }
        "os.path.exists" | "os.path.isfile" | "os.path.isdir" | "os.path.getsize" => {
            arity(short, &pos, 1, 1)?;
            let shown = expect_str(&pos[0], "path")?;
            let path = interp.resolve_path(&shown);
            Ok(match short {
                "exists" => Value::Bool(path.exists()),
                "isfile" => Value::Bool(path.is_file()),
                "isdir" => Value::Bool(path.is_dir()),
                _ => Value::Int(fs::metadata(&path).map_err(|e| io_error(&e, &shown))?.len() as i64),
            })
        }
        "os.path.join" => {
            arity("join", &pos, 1, usize::MAX)?;
            let mut out = String::new();
            for p in &pos {
                let p = expect_str(p, "join() argument")?;
                if p.starts_with('/') || out.is_empty() {
                    out = p.to_string();
                } else if out.ends_with('/') {
                    out.push_str(&p);
                } else {
                    out = format!("{out}/{p}");
                }
            }
            Ok(Value::str_val(out))
        }
        "os.path.basename" | "os.path.dirname" => {
            arity(short, &pos, 1, 1)?;
            let p = expect_str(&pos[0], "path")?;
            let (head, tail) = match p.rfind('/') {
                Some(i) => (&p[..i], &p[i + 1..]),
                None => ("", &*p),
            };
            let head = if head.is_empty() && p.starts_with('/') { "/" } else { head };
            Ok(Value::str_val(if short == "basename" { tail } else { head }))
        }
        "os.path.splitext" => {
            arity("splitext", &pos, 1, 1)?;
            let p = expect_str(&pos[0], "path")?;
            let name_start = p.rfind('/').map_or(0, |i| i + 1);
            let (root, ext) = match p[name_start..].rfind('.') {
                Some(i) if i > 0 => p.split_at(name_start + i),
                _ => (&*p, ""),
            };
            Ok(Value::Tuple(vec![Value::str_val(root), Value::str_val(ext)].into()))
        }
        "json.loads" => {
            arity("loads", &pos, 1, 1)?;
            let text = expect_str(&pos[0], "the JSON object")?;
            json_loads(&text)
        }
        "json.load" => {
            arity("load", &pos, 1, 1)?;
            let read = interp.getattr_call(&pos[0], "read")?;
            json_loads(&expect_str(&read, "the JSON object")?)
        }
        "json.dumps" | "json.dump" => {
            let n = if short == "dump" { 2 } else { 1 };
            arity(short, &pos, n, n)?;
            let indent = match kwarg(&kw, "indent") {
                None | Some(Value::None) => None,
                Some(Value::Str(s)) => Some(s.to_string()),
                Some(v) => Some(" ".repeat(v.as_int().unwrap_or(0).max(0) as usize)),
            };
            let sort_keys = kwarg(&kw, "sort_keys").is_some_and(|v| v.truthy());
            let mut out = String::new();
            json_dump(&pos[0], indent.as_deref(), sort_keys, 0, &mut out)?;
            if short == "dump" {
                let Value::File(f) = &pos[1] else {
                    return err("AttributeError", format!("'{}' object has no attribute 'write'", pos[1].type_name()));
                };
                file_write(interp, f, &out)?;
                return Ok(Value::None);
            }
            Ok(Value::str_val(out))
        }
        "time.time" => Ok(Value::Float(
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        )),
        "time.sleep" => {
            arity("sleep", &pos, 1, 1)?;
            let secs = num(&pos[0], "sleep")?;
            if secs < 0.0 {
                return err("ValueError", "sleep length must be non-negative");
            }
            let wanted = Duration::from_secs_f64(secs);
            let remaining = interp.remaining();
            std::thread::sleep(wanted.min(remaining));
            if wanted > remaining {
                interp.check_deadline()?;
            }
            Ok(Value::None)
        }
        "csv.reader" => {
            arity("reader", &pos, 1, 1)?;
            let mut rows = Vec::new();
            for line in iterate(&pos[0])? {
                let line = expect_str(&line, "csv line")?;
                let line = line.trim_end_matches(['\n', '\r']);
                rows.push(Value::list(split_csv(line).into_iter().map(Value::str_val).collect()));
            }
            Ok(Value::list(rows))
        }
        other => err("AttributeError", format!("unknown function '{other}'")),
    }
}

fn split_csv(line: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut quoted = false;
    let mut chars = line.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '"' if quoted && chars.peek() == Some(&'"') => {
                current.push('"');
                chars.next();
            }
            '"' => quoted = !quoted,
            ',' if !quoted => fields.push(std::mem::take(&mut current)),
            c => current.push(c),
        }
    }
    fields.push(current);
    fields
}

impl Interp {
    /// Calls a zero-argument method by name, e.g. `f.read()`.
    pub fn getattr_call(&mut self, obj: &Value, name: &str) -> Result<Value, PyErr> {
        let m = super::builtins::getattr(self, obj, name)?;
        self.call(&m, vec![], vec![])
    }
}

// ---- json ----

struct ValueVisitor;

impl<'de> Visitor<'de> for ValueVisitor {
    type Value = Value;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_bool<E>(self, v: bool) -> Result<Value, E> {
        Ok(Value::Bool(v))
    }

    fn visit_i64<E>(self, v: i64) -> Result<Value, E> {
        Ok(Value::Int(v))
    }

    fn visit_u64<E>(self, v: u64) -> Result<Value, E> {
        Ok(i64::try_from(v).map(Value::Int).unwrap_or(Value::Float(v as f64)))
    }

    fn visit_f64<E>(self, v: f64) -> Result<Value, E> {
        Ok(Value::Float(v))
    }

    fn visit_str<E>(self, v: &str) -> Result<Value, E> {
        Ok(Value::str_val(v))
    }

    fn visit_unit<E>(self) -> Result<Value, E> {
        Ok(Value::None)
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<Value, A::Error> {
        let mut items = Vec::new();
        while let Some(v) = seq.next_element_seed(Seed)? {
            items.push(v);
        }
        Ok(Value::list(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Value, A::Error> {
        let mut d = Dict::default();
        while let Some(k) = map.next_key::<String>()? {
            let v = map.next_value_seed(Seed)?;
            d.insert(Value::str_val(k), v);
        }
        Ok(Value::Dict(Rc::new(RefCell::new(d))))
    }
}

struct Seed;

impl<'de> de::DeserializeSeed<'de> for Seed {
    type Value = Value;

    fn deserialize<D: de::Deserializer<'de>>(self, d: D) -> Result<Value, D::Error> {
        d.deserialize_any(ValueVisitor)
    }
}

fn json_loads(text: &str) -> Result<Value, PyErr> {
    let mut de = serde_json::Deserializer::from_str(text);
    let result = (&mut de).deserialize_any(ValueVisitor).and_then(|v| de.end().map(|_| v));
    result.map_err(|e| {
        let (line, col) = (e.line().max(1), e.column().max(1));
        let char_offset: usize =
            text.split('\n').take(line - 1).map(|l| l.chars().count() + 1).sum::<usize>() + col - 1;
        let full = e.to_string();
        let msg = full.split(" at line ").next().unwrap_or(&full);
        let msg = match e.classify() {
            serde_json::error::Category::Eof if text.trim().is_empty() => "Expecting value".to_string(),
            _ => {
                let mut chars = msg.chars();
                chars.next().map(|c| c.to_uppercase().chain(chars).collect()).unwrap_or_default()
            }
        };
        PyErr::new("JSONDecodeError", format!("{msg}: line {line} column {col} (char {char_offset})"))
    })
}

fn json_str(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{8}' => out.push_str("\\b"),
            '\u{c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 || (c as u32) > 0x7e => {
                let mut buf = [0u16; 2];
                for unit in c.encode_utf16(&mut buf) {
                    out.push_str(&format!("\\u{unit:04x}"));
                }
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

fn json_key(k: &Value) -> Result<String, PyErr> {
    Ok(match k {
        Value::Str(s) => s.to_string(),
        Value::Int(i) => i.to_string(),
        Value::Float(f) => float_repr(*f),
        Value::Bool(true) => "true".into(),
        Value::Bool(false) => "false".into(),
        Value::None => "null".into(),
        other => {
            return err(
                "TypeError",
                format!("keys must be str, int, float, bool or None, not {}", other.type_name()),
            )
        }
    })
}

fn json_dump(v: &Value, indent: Option<&str>, sort_keys: bool, depth: usize, out: &mut String) -> Result<(), PyErr> {
    let newline = |out: &mut String, depth: usize| {
        if let Some(ind) = indent {
            out.push('\n');
            out.push_str(&ind.repeat(depth));
        }
    };
    let item_sep = if indent.is_some() { "," } else { ", " };
    match v {
        Value::None => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Int(i) => out.push_str(&i.to_string()),
        Value::Float(f) if f.is_nan() => out.push_str("NaN"),
        Value::Float(f) if f.is_infinite() => out.push_str(if *f > 0.0 { "Infinity" } else { "-Infinity" }),
        Value::Float(f) => out.push_str(&float_repr(*f)),
        Value::Str(s) => json_str(s, out),
        Value::List(_) | Value::Tuple(_) => {
            let items = iterate(v)?;
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push_str(item_sep);
                }
                newline(out, depth + 1);
                json_dump(item, indent, sort_keys, depth + 1, out)?;
            }
            if !items.is_empty() {
                newline(out, depth);
            }
            out.push(']');
        }
        Value::Dict(d) => {
            let mut entries: Vec<(String, Value)> = Vec::new();
            for (k, val) in d.borrow().entries.iter() {
                entries.push((json_key(k)?, val.clone()));
            }
            if sort_keys {
                entries.sort_by(|a, b| a.0.cmp(&b.0));
            }
            out.push('{');
            for (i, (k, val)) in entries.iter().enumerate() {
                if i > 0 {
                    out.push_str(item_sep);
                }
                newline(out, depth + 1);
                json_str(k, out);
                out.push_str(": ");
                json_dump(val, indent, sort_keys, depth + 1, out)?;
            }
            if !entries.is_empty() {
                newline(out, depth);
            }
            out.push('}');
        }
        other => return err("TypeError", format!("Object of type {} is not JSON serializable", other.type_name())),
    }
    Ok(())
}
