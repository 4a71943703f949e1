//! Methods on builtin values and the file object.

use std::cell::RefCell;
use std::fs::{self, OpenOptions};
use std::io::{ErrorKind, Write};
use std::rc::Rc;

use super::builtins::{arg, arity, check_hashable, expect_int, expect_str, iterate, kwarg, sort_values};
use super::format::str_format;
use super::interp::{err, Interp, PyErr};
use super::value::*;

const STR_METHODS: &[&str] = &[
    "split", "rsplit", "strip", "lstrip", "rstrip", "lower", "upper", "replace", "startswith", "endswith", "join",
    "format", "find", "index", "count", "splitlines", "isdigit", "isalpha", "isalnum", "isspace", "title",
    "capitalize", "zfill", "center", "ljust", "rjust", "encode",
];
const LIST_METHODS: &[&str] =
    &["append", "extend", "pop", "insert", "remove", "index", "count", "sort", "reverse", "copy", "clear"];
const DICT_METHODS: &[&str] = &["get", "keys", "values", "items", "pop", "update", "setdefault", "copy", "clear"];
const TUPLE_METHODS: &[&str] = &["index", "count"];
const FILE_METHODS: &[&str] = &["read", "readline", "readlines", "write", "close", "writelines"];

pub fn has_method(obj: &Value, name: &str) -> bool {
    let table = match obj {
        Value::Str(_) => STR_METHODS,
        Value::List(_) => LIST_METHODS,
        Value::Dict(_) => DICT_METHODS,
        Value::Tuple(_) => TUPLE_METHODS,
        Value::File(_) => FILE_METHODS,
        _ => return false,
    };
    table.contains(&name)
}

pub fn call_method(
    interp: &mut Interp,
    recv: &Value,
    name: &str,
    pos: Vec<Value>,
    kw: Vec<(String, Value)>,
) -> Result<Value, PyErr> {
    match recv {
        Value::Str(s) => str_method(s, name, pos, kw),
        Value::List(l) => list_method(interp, l, name, pos, kw),
        Value::Dict(d) => dict_method(d, name, pos, kw),
        Value::Tuple(t) => seq_method(t, name, &pos, "tuple"),
        Value::File(f) => file_method(interp, f, name, pos),
        other => err("AttributeError", format!("'{}' object has no attribute '{name}'", other.type_name())),
    }
}

fn opt_str(v: Option<Value>, what: &str) -> Result<Option<Rc<str>>, PyErr> {
    match v {
        None | Some(Value::None) => Ok(None),
        Some(v) => expect_str(&v, what).map(Some),
    }
}

fn str_method(s: &Rc<str>, name: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Result<Value, PyErr> {
    let text: &str = s;
    let out = |v: String| Ok(Value::str_val(v));
    match name {
        "split" | "rsplit" => {
            arity(name, &pos, 0, 2)?;
            let sep = opt_str(arg(&pos, &kw, 0, "sep"), "sep")?;
            let maxsplit = match arg(&pos, &kw, 1, "maxsplit") {
                Some(v) => expect_int(&v, "maxsplit")?,
                None => -1,
            };
            let limit = if maxsplit < 0 { usize::MAX } else { maxsplit as usize + 1 };
            let parts: Vec<String> = match (&sep, name) {
                (Some(sep), _) if sep.is_empty() => return err("ValueError", "empty separator"),
                (Some(sep), "split") => text.splitn(limit, &**sep).map(str::to_string).collect(),
                (Some(sep), _) => {
                    let mut v: Vec<String> = text.rsplitn(limit, &**sep).map(str::to_string).collect();
                    v.reverse();
                    v
                }
                (None, "split") => split_whitespace(text, limit),
                (None, _) => {
                    let rev: String = text.chars().rev().collect();
                    let mut v: Vec<String> =
                        split_whitespace(&rev, limit).into_iter().map(|p| p.chars().rev().collect()).collect();
                    v.reverse();
                    v
                }
            };
            Ok(Value::list(parts.into_iter().map(Value::str_val).collect()))
        }
        "strip" | "lstrip" | "rstrip" => {
            arity(name, &pos, 0, 1)?;
            let chars = opt_str(pos.first().cloned(), "strip arg")?;
            let pred = |c: char| match &chars {
                Some(set) => set.contains(c),
                None => c.is_whitespace(),
            };
            out(match name {
                "strip" => text.trim_matches(pred),
                "lstrip" => text.trim_start_matches(pred),
                _ => text.trim_end_matches(pred),
            }
            .to_string())
        }
        "lower" => out(text.to_lowercase()),
        "upper" => out(text.to_uppercase()),
        "title" => {
            let mut result = String::new();
            let mut prev_alpha = false;
            for c in text.chars() {
                if prev_alpha {
                    result.extend(c.to_lowercase());
                } else {
                    result.extend(c.to_uppercase());
                }
                prev_alpha = c.is_alphabetic();
            }
            out(result)
        }
        "capitalize" => {
            let mut chars = text.chars();
            out(match chars.next() {
                Some(c) => c.to_uppercase().chain(chars.flat_map(char::to_lowercase)).collect(),
                None => String::new(),
            })
        }
        "replace" => {
            arity("replace", &pos, 2, 3)?;
            let old = expect_str(&pos[0], "replace() argument 1")?;
            let new = expect_str(&pos[1], "replace() argument 2")?;
            match pos.get(2) {
                Some(n) => {
                    let n = expect_int(n, "count")?;
                    if n < 0 {
                        out(text.replace(&*old, &new))
                    } else {
                        out(text.replacen(&*old, &new, n as usize))
                    }
                }
                None => out(text.replace(&*old, &new)),
            }
        }
        "startswith" | "endswith" => {
            arity(name, &pos, 1, 1)?;
            let options = match &pos[0] {
                Value::Tuple(t) => t.to_vec(),
                other => vec![other.clone()],
            };
            for o in options {
                let o = expect_str(&o, &format!("{name} first arg"))?;
                let hit = if name == "startswith" { text.starts_with(&*o) } else { text.ends_with(&*o) };
                if hit {
                    return Ok(Value::Bool(true));
                }
            }
            Ok(Value::Bool(false))
        }
        "join" => {
            arity("join", &pos, 1, 1)?;
            let mut parts = Vec::new();
            for (i, item) in iterate(&pos[0])?.into_iter().enumerate() {
                match item {
                    Value::Str(p) => parts.push(p.to_string()),
                    other => {
                        return err(
                            "TypeError",
                            format!("sequence item {i}: expected str instance, {} found", other.type_name()),
                        )
                    }
                }
            }
            out(parts.join(text))
        }
        "format" => str_format(text, &pos, &kw).map(Value::str_val),
        "find" | "index" => {
            arity(name, &pos, 1, 1)?;
            let sub = expect_str(&pos[0], "must be str")?;
            match text.find(&*sub) {
                Some(byte) => Ok(Value::Int(text[..byte].chars().count() as i64)),
                None if name == "find" => Ok(Value::Int(-1)),
                None => err("ValueError", "substring not found"),
            }
        }
        "count" => {
            arity("count", &pos, 1, 1)?;
            let sub = expect_str(&pos[0], "must be str")?;
            if sub.is_empty() {
                return Ok(Value::Int(text.chars().count() as i64 + 1));
            }
            Ok(Value::Int(text.matches(&*sub).count() as i64))
        }
        "splitlines" => Ok(Value::list(text.lines().map(Value::str_val).collect())),
        "isdigit" => Ok(Value::Bool(!text.is_empty() && text.chars().all(|c| c.is_ascii_digit()))),
        "isalpha" => Ok(Value::Bool(!text.is_empty() && text.chars().all(char::is_alphabetic))),
        "isalnum" => Ok(Value::Bool(!text.is_empty() && text.chars().all(char::is_alphanumeric))),
        "isspace" => Ok(Value::Bool(!text.is_empty() && text.chars().all(char::is_whitespace))),
        "zfill" => {
            arity("zfill", &pos, 1, 1)?;
            let width = expect_int(&pos[0], "width")?.max(0) as usize;
            let len = text.chars().count();
            if len >= width {
                return out(text.to_string());
            }
            let (sign, digits) = match text.strip_prefix(['+', '-']) {
                Some(rest) => (&text[..1], rest),
                None => ("", text),
            };
            out(format!("{sign}{}{digits}", "0".repeat(width - len)))
        }
        "center" | "ljust" | "rjust" => {
            arity(name, &pos, 1, 2)?;
            let width = expect_int(&pos[0], "width")?.max(0) as usize;
            let fill = match pos.get(1) {
                Some(f) => expect_str(f, "fill character")?.chars().next().unwrap_or(' '),
                None => ' ',
            };
            let len = text.chars().count();
            let pad = width.saturating_sub(len);
            let (left, right) = match name {
                "ljust" => (0, pad),
                "rjust" => (pad, 0),
                _ => {
                    let left = pad / 2 + (pad & width & 1);
                    (left, pad - left)
                }
            };
            let f = fill.to_string();
            out(format!("{}{text}{}", f.repeat(left), f.repeat(right)))
        }
        "encode" => out(text.to_string()),
        _ => err("AttributeError", format!("'str' object has no attribute '{name}'")),
    }
}

fn split_whitespace(text: &str, limit: usize) -> Vec<String> {
    let mut parts = Vec::new();
    let mut rest = text.trim_start();
    while !rest.is_empty() {
        if parts.len() + 1 == limit {
            parts.push(rest.to_string());
            break;
        }
        let end = rest.find(char::is_whitespace).unwrap_or(rest.len());
        parts.push(rest[..end].to_string());
        rest = rest[end..].trim_start();
    }
    parts
}

fn seq_method(items: &[Value], name: &str, pos: &[Value], kind: &str) -> Result<Value, PyErr> {
    match name {
        "index" => {
            arity("index", pos, 1, 1)?;
            items
                .iter()
                .position(|v| v.py_eq(&pos[0]))
                .map(|i| Value::Int(i as i64))
                .ok_or_else(|| PyErr::new("ValueError", format!("{} is not in {kind}", pos[0].repr())))
        }
        "count" => {
            arity("count", pos, 1, 1)?;
            Ok(Value::Int(items.iter().filter(|v| v.py_eq(&pos[0])).count() as i64))
        }
        _ => err("AttributeError", format!("'{kind}' object has no attribute '{name}'")),
    }
}

fn list_method(
    interp: &mut Interp,
    l: &Rc<RefCell<Vec<Value>>>,
    name: &str,
    pos: Vec<Value>,
    kw: Vec<(String, Value)>,
) -> Result<Value, PyErr> {
    match name {
        "append" => {
            arity("append", &pos, 1, 1)?;
            l.borrow_mut().push(pos[0].clone());
        }
        "extend" => {
            arity("extend", &pos, 1, 1)?;
            let items = iterate(&pos[0])?;
            l.borrow_mut().extend(items);
        }
        "insert" => {
            arity("insert", &pos, 2, 2)?;
            let mut items = l.borrow_mut();
            let len = items.len() as i64;
            let i = expect_int(&pos[0], "index")?;
            let i = if i < 0 { (i + len).max(0) } else { i.min(len) };
            items.insert(i as usize, pos[1].clone());
        }
        "pop" => {
            arity("pop", &pos, 0, 1)?;
            let mut items = l.borrow_mut();
            if items.is_empty() {
                return err("IndexError", "pop from empty list");
            }
            let len = items.len() as i64;
            let i = match pos.first() {
                Some(v) => expect_int(v, "index")?,
                None => -1,
            };
            let i = if i < 0 { i + len } else { i };
            if !(0..len).contains(&i) {
                return err("IndexError", "pop index out of range");
            }
            return Ok(items.remove(i as usize));
        }
        "remove" => {
            arity("remove", &pos, 1, 1)?;
            let mut items = l.borrow_mut();
            match items.iter().position(|v| v.py_eq(&pos[0])) {
                Some(i) => {
                    items.remove(i);
                }
                None => return err("ValueError", "list.remove(x): x not in list"),
            }
        }
        "index" | "count" => {
            let items = l.borrow().clone();
            return seq_method(&items, name, &pos, "list");
        }
        "sort" => {
            arity("sort", &pos, 0, 0)?;
            let key = kwarg(&kw, "key").filter(|k| !matches!(k, Value::None));
            let reverse = kwarg(&kw, "reverse").is_some_and(|r| r.truthy());
            let items = l.borrow().clone();
            let sorted = sort_values(interp, items, key, reverse)?;
            *l.borrow_mut() = sorted;
        }
        "reverse" => l.borrow_mut().reverse(),
        "copy" => return Ok(Value::list(l.borrow().clone())),
        "clear" => l.borrow_mut().clear(),
        _ => return err("AttributeError", format!("'list' object has no attribute '{name}'")),
    }
    Ok(Value::None)
}

fn dict_method(d: &Rc<RefCell<Dict>>, name: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Result<Value, PyErr> {
    match name {
        "get" => {
            arity("get", &pos, 1, 2)?;
            check_hashable(&pos[0])?;
            Ok(d.borrow().get(&pos[0]).cloned().unwrap_or_else(|| pos.get(1).cloned().unwrap_or(Value::None)))
        }
        "keys" => Ok(Value::list(d.borrow().entries.iter().map(|(k, _)| k.clone()).collect())),
        "values" => Ok(Value::list(d.borrow().entries.iter().map(|(_, v)| v.clone()).collect())),
        "items" => Ok(Value::list(
            d.borrow().entries.iter().map(|(k, v)| Value::Tuple(vec![k.clone(), v.clone()].into())).collect(),
        )),
        "pop" => {
            arity("pop", &pos, 1, 2)?;
            check_hashable(&pos[0])?;
            let removed = d.borrow_mut().remove(&pos[0]);
            match (removed, pos.get(1)) {
                (Some(v), _) => Ok(v),
                (None, Some(default)) => Ok(default.clone()),
                (None, None) => Err(PyErr::from_exc(Rc::new(ExcObj {
                    type_name: "KeyError".into(),
                    args: vec![pos[0].clone()],
                }))),
            }
        }
        "update" => {
            arity("update", &pos, 0, 1)?;
            if let Some(src) = pos.first() {
                let entries = match src {
                    Value::Dict(o) => o.borrow().entries.clone(),
                    other => {
                        let mut entries = Vec::new();
                        for item in iterate(other)? {
                            let pair = iterate(&item)?;
                            if pair.len() != 2 {
                                return err("ValueError", "dictionary update sequence element has wrong length");
                            }
                            check_hashable(&pair[0])?;
                            entries.push((pair[0].clone(), pair[1].clone()));
                        }
                        entries
                    }
                };
                let mut target = d.borrow_mut();
                for (k, v) in entries {
                    target.insert(k, v);
                }
            }
            for (k, v) in kw {
                d.borrow_mut().insert(Value::str_val(k), v);
            }
            Ok(Value::None)
        }
        "setdefault" => {
            arity("setdefault", &pos, 1, 2)?;
            check_hashable(&pos[0])?;
            let mut target = d.borrow_mut();
            if let Some(v) = target.get(&pos[0]) {
                return Ok(v.clone());
            }
            let v = pos.get(1).cloned().unwrap_or(Value::None);
            target.insert(pos[0].clone(), v.clone());
            Ok(v)
        }
        "copy" => Ok(Value::Dict(Rc::new(RefCell::new(d.borrow().clone())))),
        "clear" => {
            d.borrow_mut().entries.clear();
            Ok(Value::None)
        }
        _ => err("AttributeError", format!("'dict' object has no attribute '{name}'")),
    }
}

// ---- files ----

fn os_error(e: &std::io::Error, shown: &str) -> PyErr {
    let (ename, errno, text) = match e.kind() {
        ErrorKind::NotFound => ("FileNotFoundError", 2, "No such file or directory"),
        ErrorKind::PermissionDenied => ("PermissionError", 13, "Permission denied"),
        ErrorKind::AlreadyExists => ("FileExistsError", 17, "File exists"),
        ErrorKind::IsADirectory => ("IsADirectoryError", 21, "Is a directory"),
        _ => ("OSError", e.raw_os_error().unwrap_or(5), "Input/output error"),
    };
    PyErr::new(ename, format!("[Errno {errno}] {text}: {}", str_repr(shown)))
}

pub fn io_error(e: &std::io::Error, shown: &str) -> PyErr {
    os_error(e, shown)
}

pub fn open_file(interp: &mut Interp, pos: &[Value], kw: &[(String, Value)]) -> Result<Value, PyErr> {
    arity("open", pos, 1, 3)?;
    let name = expect_str(&pos[0], "file")?.to_string();
    let mode = match arg(pos, kw, 1, "mode") {
        Some(m) => expect_str(&m, "mode")?.to_string(),
        None => "r".into(),
    };
    let path = interp.resolve_path(&name);
    if path.is_dir() {
        return Err(os_error(&std::io::Error::from(ErrorKind::IsADirectory), &name));
    }
    let base = mode.replace(['t', 'b', '+'], "");
    let mut content = Vec::new();
    match base.as_str() {
        "r" => {
            let text = fs::read(&path).map_err(|e| os_error(&e, &name))?;
            content = String::from_utf8_lossy(&text).chars().collect();
        }
        "w" => {
            fs::write(&path, "").map_err(|e| os_error(&e, &name))?;
        }
        "a" | "x" => {
            let mut opts = OpenOptions::new();
            opts.append(true);
            if base == "x" {
                opts.create_new(true);
            } else {
                opts.create(true);
            }
            opts.open(&path).map_err(|e| os_error(&e, &name))?;
        }
        _ => return err("ValueError", format!("invalid mode: '{mode}'")),
    }
    Ok(Value::File(Rc::new(RefCell::new(FileObj { name, path, mode, content, pos: 0, closed: false }))))
}

fn check_open(f: &FileObj) -> Result<(), PyErr> {
    if f.closed {
        err("ValueError", "I/O operation on closed file.")
    } else {
        Ok(())
    }
}

fn readable(f: &FileObj) -> Result<(), PyErr> {
    check_open(f)?;
    if f.mode.contains('r') || f.mode.contains('+') {
        Ok(())
    } else {
        err("UnsupportedOperation", "not readable")
    }
}

pub fn file_write(interp: &mut Interp, f: &Rc<RefCell<FileObj>>, text: &str) -> Result<(), PyErr> {
    let _ = interp;
    let f = f.borrow();
    check_open(&f)?;
    if f.mode.starts_with('r') && !f.mode.contains('+') {
        return err("UnsupportedOperation", "not writable");
    }
    let mut file = OpenOptions::new().append(true).open(&f.path).map_err(|e| os_error(&e, &f.name))?;
    file.write_all(text.as_bytes()).map_err(|e| os_error(&e, &f.name))
}

fn read_line(f: &mut FileObj) -> String {
    let mut line = String::new();
    while f.pos < f.content.len() {
        let c = f.content[f.pos];
        f.pos += 1;
        line.push(c);
        if c == '\n' {
            break;
        }
    }
    line
}

pub fn file_lines(f: &mut FileObj) -> Result<Vec<Value>, PyErr> {
    readable(f)?;
    let mut lines = Vec::new();
    loop {
        let line = read_line(f);
        if line.is_empty() {
            return Ok(lines);
        }
        lines.push(Value::str_val(line));
    }
}

fn file_method(interp: &mut Interp, f: &Rc<RefCell<FileObj>>, name: &str, pos: Vec<Value>) -> Result<Value, PyErr> {
    match name {
        "read" => {
            let mut file = f.borrow_mut();
            readable(&file)?;
            let n = match pos.first() {
                Some(Value::None) | None => usize::MAX,
                Some(v) => expect_int(v, "size")?.max(0) as usize,
            };
            let end = file.pos.saturating_add(n).min(file.content.len());
            let text: String = file.content[file.pos..end].iter().collect();
            file.pos = end;
            Ok(Value::str_val(text))
        }
        "readline" => {
            let mut file = f.borrow_mut();
            readable(&file)?;
            Ok(Value::str_val(read_line(&mut file)))
        }
        "readlines" => Ok(Value::list(file_lines(&mut f.borrow_mut())?)),
        "write" => {
            arity("write", &pos, 1, 1)?;
            let text = match &pos[0] {
                Value::Str(s) => s.clone(),
                other => {
                    return err("TypeError", format!("write() argument must be str, not {}", other.type_name()))
                }
            };
            file_write(interp, f, &text)?;
            Ok(Value::Int(text.chars().count() as i64))
        }
        "writelines" => {
            arity("writelines", &pos, 1, 1)?;
            for line in iterate(&pos[0])? {
                file_write(interp, f, &expect_str(&line, "line")?)?;
            }
            Ok(Value::None)
        }
        "close" => {
            f.borrow_mut().closed = true;
            Ok(Value::None)
        }
        _ => err("AttributeError", format!("'TextIOWrapper' object has no attribute '{name}'")),
    }
}
