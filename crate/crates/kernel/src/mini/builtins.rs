//! Builtin functions, operators and container protocols.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::rc::Rc;

use super::ast::BinOp;
use super::interp::{err, Interp, PyErr};
use super::value::*;

pub use super::format::format_value;
pub use super::methods::{call_method, has_method};
pub use super::modules::make_module;

const FUNCTIONS: &[&str] = &[
    "print", "len", "repr", "sum", "min", "max", "sorted", "reversed", "enumerate", "zip", "abs", "round",
    "isinstance", "open", "map", "filter", "any", "all", "hasattr", "getattr", "divmod", "chr", "ord", "pow",
    "format", "callable",
];

const TYPES: &[&str] = &["int", "float", "str", "bool", "list", "tuple", "dict", "range", "type", "object"];

pub fn builtin(name: &str) -> Option<Value> {
    if let Some(f) = FUNCTIONS.iter().find(|f| **f == name) {
        return Some(Value::Builtin(f));
    }
    if TYPES.contains(&name) || is_exception_class(name) {
        return Some(Value::Type(name.into()));
    }
    None
}

/// Positional-or-keyword argument lookup.
pub fn arg(pos: &[Value], kw: &[(String, Value)], idx: usize, name: &str) -> Option<Value> {
    pos.get(idx).cloned().or_else(|| kw.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone()))
}

pub fn kwarg(kw: &[(String, Value)], name: &str) -> Option<Value> {
    kw.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone())
}

pub fn arity(fname: &str, pos: &[Value], min: usize, max: usize) -> Result<(), PyErr> {
    if pos.len() < min {
        return err("TypeError", format!("{fname}() takes at least {min} argument(s) ({} given)", pos.len()));
    }
    if pos.len() > max {
        return err("TypeError", format!("{fname}() takes at most {max} argument(s) ({} given)", pos.len()));
    }
    Ok(())
}

pub fn expect_str(v: &Value, what: &str) -> Result<Rc<str>, PyErr> {
    match v {
        Value::Str(s) => Ok(s.clone()),
        other => err("TypeError", format!("{what} must be str, not {}", other.type_name())),
    }
}

pub fn expect_int(v: &Value, what: &str) -> Result<i64, PyErr> {
    v.as_int().ok_or_else(|| {
        PyErr::new("TypeError", format!("{what} must be an integer, not '{}'", v.type_name()))
    })
}

pub fn check_hashable(v: &Value) -> Result<(), PyErr> {
    if v.is_hashable() {
        Ok(())
    } else {
        err("TypeError", format!("unhashable type: '{}'", v.type_name()))
    }
}

pub fn call_builtin(interp: &mut Interp, name: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Result<Value, PyErr> {
    if name.contains('.') {
        return super::modules::call_module_fn(interp, name, pos, kw);
    }
    match name {
        "print" => {
            let sep = match kwarg(&kw, "sep") {
                Some(Value::None) | None => " ".to_string(),
                Some(v) => expect_str(&v, "sep")?.to_string(),
            };
            let end = match kwarg(&kw, "end") {
                Some(Value::None) | None => "\n".to_string(),
                Some(v) => expect_str(&v, "end")?.to_string(),
            };
            let text: Vec<String> = pos.iter().map(Value::str).collect();
            let line = format!("{}{}", text.join(&sep), end);
            match kwarg(&kw, "file") {
                Some(Value::File(f)) => super::methods::file_write(interp, &f, &line)?,
                _ => interp.stdout.push_str(&line),
            }
            Ok(Value::None)
        }
        "len" => {
            arity("len", &pos, 1, 1)?;
            Ok(Value::Int(length(&pos[0])?))
        }
        "repr" => {
            arity("repr", &pos, 1, 1)?;
            Ok(Value::str_val(pos[0].repr()))
        }
        "sum" => {
            arity("sum", &pos, 1, 2)?;
            let mut total = arg(&pos, &kw, 1, "start").unwrap_or(Value::Int(0));
            if matches!(total, Value::Str(_)) {
                return err("TypeError", "sum() can't sum strings [use ''.join(seq) instead]");
            }
            for item in iterate(&pos[0])? {
                total = binop(BinOp::Add, &total, &item)?;
            }
            Ok(total)
        }
        "min" | "max" => {
            let items = if pos.len() == 1 { iterate(&pos[0])? } else { pos.clone() };
            let key = kwarg(&kw, "key").filter(|k| !matches!(k, Value::None));
            if items.is_empty() {
                return match kwarg(&kw, "default") {
                    Some(d) => Ok(d),
                    None => err("ValueError", format!("{name}() iterable argument is empty")),
                };
            }
            let mut best = items[0].clone();
            let mut best_key = apply_key(interp, &key, &best)?;
            for item in items.into_iter().skip(1) {
                let k = apply_key(interp, &key, &item)?;
                let ord = order(&k, &best_key)?;
                let better = if name == "min" { ord.is_lt() } else { ord.is_gt() };
                if better {
                    best = item;
                    best_key = k;
                }
            }
            Ok(best)
        }
        "sorted" => {
            arity("sorted", &pos, 1, 1)?;
            let items = iterate(&pos[0])?;
            let key = kwarg(&kw, "key").filter(|k| !matches!(k, Value::None));
            let reverse = kwarg(&kw, "reverse").is_some_and(|r| r.truthy());
            Ok(Value::list(sort_values(interp, items, key, reverse)?))
        }
        "reversed" => {
            arity("reversed", &pos, 1, 1)?;
            if matches!(pos[0], Value::Dict(_)) {
                return err("TypeError", "'dict' object is not reversible");
            }
            let mut items = iterate(&pos[0])?;
            items.reverse();
            Ok(Value::list(items))
        }
        "enumerate" => {
            arity("enumerate", &pos, 1, 2)?;
            let start = match arg(&pos, &kw, 1, "start") {
                Some(v) => expect_int(&v, "start")?,
                None => 0,
            };
            let items = iterate(&pos[0])?;
            Ok(Value::list(
                items
                    .into_iter()
                    .enumerate()
                    .map(|(i, v)| Value::Tuple(vec![Value::Int(start + i as i64), v].into()))
                    .collect(),
            ))
        }
        "zip" => {
            let seqs: Vec<Vec<Value>> = pos.iter().map(iterate).collect::<Result<_, _>>()?;
            let n = seqs.iter().map(Vec::len).min().unwrap_or(0);
            Ok(Value::list(
                (0..n).map(|i| Value::Tuple(seqs.iter().map(|s| s[i].clone()).collect::<Vec<_>>().into())).collect(),
            ))
        }
        "abs" => {
            arity("abs", &pos, 1, 1)?;
            match &pos[0] {
                Value::Int(i) => Ok(Value::Int(i.abs())),
                Value::Bool(b) => Ok(Value::Int(*b as i64)),
                Value::Float(f) => Ok(Value::Float(f.abs())),
                other => err("TypeError", format!("bad operand type for abs(): '{}'", other.type_name())),
            }
        }
        "round" => {
            arity("round", &pos, 1, 2)?;
            let ndigits = arg(&pos, &kw, 1, "ndigits").filter(|v| !matches!(v, Value::None));
            match (&pos[0], ndigits) {
                (Value::Int(_) | Value::Bool(_), None) => Ok(Value::Int(pos[0].as_int().unwrap())),
                (Value::Int(i), Some(_)) => Ok(Value::Int(*i)),
                (Value::Float(f), None) => {
                    if !f.is_finite() {
                        return err("OverflowError", "cannot convert float infinity to integer");
                    }
                    Ok(Value::Int(f.round_ties_even() as i64))
                }
                (Value::Float(f), Some(n)) => {
                    let n = expect_int(&n, "ndigits")?;
                    if n >= 0 {
                        Ok(Value::Float(format!("{:.*}", n as usize, f).parse().unwrap_or(*f)))
                    } else {
                        let scale = 10f64.powi((-n) as i32);
                        Ok(Value::Float((f / scale).round_ties_even() * scale))
                    }
                }
                (other, _) => {
                    err("TypeError", format!("type {} doesn't define __round__ method", other.type_name()))
                }
            }
        }
        "isinstance" => {
            arity("isinstance", &pos, 2, 2)?;
            let classes: Vec<Value> = match &pos[1] {
                Value::Tuple(t) => t.to_vec(),
                other => vec![other.clone()],
            };
            for c in classes {
                let Value::Type(t) = c else {
                    return err("TypeError", "isinstance() arg 2 must be a type, a tuple of types, or a union");
                };
                if is_instance(&pos[0], &t) {
                    return Ok(Value::Bool(true));
                }
            }
            Ok(Value::Bool(false))
        }
        "open" => super::methods::open_file(interp, &pos, &kw),
        "map" => {
            arity("map", &pos, 2, usize::MAX)?;
            let seqs: Vec<Vec<Value>> = pos[1..].iter().map(iterate).collect::<Result<_, _>>()?;
            let n = seqs.iter().map(Vec::len).min().unwrap_or(0);
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                let args = seqs.iter().map(|s| s[i].clone()).collect();
                out.push(interp.call(&pos[0], args, vec![])?);
            }
            Ok(Value::list(out))
        }
        "filter" => {
            arity("filter", &pos, 2, 2)?;
            let mut out = Vec::new();
            for item in iterate(&pos[1])? {
                let keep = match &pos[0] {
                    Value::None => item.truthy(),
                    f => interp.call(f, vec![item.clone()], vec![])?.truthy(),
                };
                if keep {
                    out.push(item);
                }
            }
            Ok(Value::list(out))
        }
        "any" | "all" => {
            arity(name, &pos, 1, 1)?;
            let want = name == "any";
            for item in iterate(&pos[0])? {
                if item.truthy() == want {
                    return Ok(Value::Bool(want));
                }
            }
            Ok(Value::Bool(!want))
        }
        "hasattr" => {
            arity("hasattr", &pos, 2, 2)?;
            let attr = expect_str(&pos[1], "attribute name")?;
            Ok(Value::Bool(getattr(interp, &pos[0], &attr).is_ok()))
        }
        "getattr" => {
            arity("getattr", &pos, 2, 3)?;
            let attr = expect_str(&pos[1], "attribute name")?;
            match getattr(interp, &pos[0], &attr) {
                Ok(v) => Ok(v),
                Err(_) if pos.len() == 3 => Ok(pos[2].clone()),
                Err(e) => Err(e),
            }
        }
        "divmod" => {
            arity("divmod", &pos, 2, 2)?;
            let q = binop(BinOp::FloorDiv, &pos[0], &pos[1])?;
            let r = binop(BinOp::Mod, &pos[0], &pos[1])?;
            Ok(Value::Tuple(vec![q, r].into()))
        }
        "chr" => {
            arity("chr", &pos, 1, 1)?;
            let i = expect_int(&pos[0], "chr() argument")?;
            let c = u32::try_from(i)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| PyErr::new("ValueError", "chr() arg not in range(0x110000)"))?;
            Ok(Value::str_val(c.to_string()))
        }
        "ord" => {
            arity("ord", &pos, 1, 1)?;
            let s = expect_str(&pos[0], "ord() argument")?;
            let mut chars = s.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) => Ok(Value::Int(c as i64)),
                _ => err(
                    "TypeError",
                    format!("ord() expected a character, but string of length {} found", s.chars().count()),
                ),
            }
        }
        "pow" => {
            arity("pow", &pos, 2, 2)?;
            binop(BinOp::Pow, &pos[0], &pos[1])
        }
        "format" => {
            arity("format", &pos, 1, 2)?;
            let spec = match pos.get(1) {
                Some(s) => expect_str(s, "format spec")?.to_string(),
                None => String::new(),
            };
            Ok(Value::str_val(format_value(&pos[0], &spec)?))
        }
        "callable" => {
            arity("callable", &pos, 1, 1)?;
            Ok(Value::Bool(matches!(
                pos[0],
                Value::Func(_) | Value::Builtin(_) | Value::Method(_) | Value::Type(_)
            )))
        }
        other => err("NameError", format!("name '{other}' is not defined")),
    }
}

pub fn call_type(interp: &mut Interp, t: &str, pos: Vec<Value>, kw: Vec<(String, Value)>) -> Result<Value, PyErr> {
    if is_exception_class(t) {
        return Ok(Value::Exception(Rc::new(ExcObj { type_name: t.into(), args: pos })));
    }
    match t {
        "int" => {
            arity("int", &pos, 0, 2)?;
            let Some(v) = pos.first() else { return Ok(Value::Int(0)) };
            match v {
                Value::Int(_) | Value::Bool(_) => Ok(Value::Int(v.as_int().unwrap())),
                Value::Float(f) => {
                    if f.is_nan() {
                        return err("ValueError", "cannot convert float NaN to integer");
                    }
                    if f.is_infinite() {
                        return err("OverflowError", "cannot convert float infinity to integer");
                    }
                    Ok(Value::Int(f.trunc() as i64))
                }
                Value::Str(s) => {
                    let base = match pos.get(1) {
                        Some(b) => expect_int(b, "base")? as u32,
                        None => 10,
                    };
                    let cleaned: String = s.trim().replace('_', "");
                    i64::from_str_radix(&cleaned, base).map(Value::Int).map_err(|_| {
                        PyErr::new("ValueError", format!("invalid literal for int() with base {base}: {}", str_repr(s)))
                    })
                }
                other => err(
                    "TypeError",
                    format!(
                        "int() argument must be a string, a bytes-like object or a real number, not '{}'",
                        other.type_name()
                    ),
                ),
            }
        }
        "float" => {
            arity("float", &pos, 0, 1)?;
            let Some(v) = pos.first() else { return Ok(Value::Float(0.0)) };
            match v {
                Value::Int(_) | Value::Bool(_) | Value::Float(_) => Ok(Value::Float(v.as_f64().unwrap())),
                Value::Str(s) => parse_float(s.trim()).map(Value::Float).ok_or_else(|| {
                    PyErr::new("ValueError", format!("could not convert string to float: {}", str_repr(s)))
                }),
                other => err(
                    "TypeError",
                    format!("float() argument must be a string or a real number, not '{}'", other.type_name()),
                ),
            }
        }
        "str" => {
            arity("str", &pos, 0, 1)?;
            Ok(Value::str_val(pos.first().map(Value::str).unwrap_or_default()))
        }
        "bool" => {
            arity("bool", &pos, 0, 1)?;
            Ok(Value::Bool(pos.first().is_some_and(Value::truthy)))
        }
        "list" => {
            arity("list", &pos, 0, 1)?;
            Ok(Value::list(match pos.first() {
                Some(v) => iterate(v)?,
                None => vec![],
            }))
        }
        "tuple" => {
            arity("tuple", &pos, 0, 1)?;
            let items = match pos.first() {
                Some(v) => iterate(v)?,
                None => vec![],
            };
            Ok(Value::Tuple(items.into()))
        }
        "dict" => {
            arity("dict", &pos, 0, 1)?;
            let mut d = Dict::default();
            if let Some(src) = pos.first() {
                if let Value::Dict(other) = src {
                    d = other.borrow().clone();
                } else {
                    for (i, item) in iterate(src)?.into_iter().enumerate() {
                        let pair = iterate(&item)?;
                        if pair.len() != 2 {
                            return err(
                                "ValueError",
                                format!(
                                    "dictionary update sequence element #{i} has length {}; 2 is required",
                                    pair.len()
                                ),
                            );
                        }
                        check_hashable(&pair[0])?;
                        d.insert(pair[0].clone(), pair[1].clone());
                    }
                }
            }
            for (k, v) in kw {
                d.insert(Value::str_val(k), v);
            }
            Ok(Value::Dict(Rc::new(RefCell::new(d))))
        }
        "range" => {
            arity("range", &pos, 1, 3)?;
            let ints: Vec<i64> = pos
                .iter()
                .map(|v| {
                    v.as_int().ok_or_else(|| {
                        PyErr::new(
                            "TypeError",
                            format!("'{}' object cannot be interpreted as an integer", v.type_name()),
                        )
                    })
                })
                .collect::<Result<_, _>>()?;
            let (start, stop, step) = match ints.as_slice() {
                [stop] => (0, *stop, 1),
                [start, stop] => (*start, *stop, 1),
                [start, stop, step] => (*start, *stop, *step),
                _ => unreachable!(),
            };
            if step == 0 {
                return err("ValueError", "range() arg 3 must not be zero");
            }
            Ok(Value::Range(start, stop, step))
        }
        "type" => {
            arity("type", &pos, 1, 1)?;
            Ok(Value::Type(pos[0].type_name().into()))
        }
        "object" => err("TypeError", "object() instances are not supported"),
        other => {
            let _ = (interp, kw);
            err("TypeError", format!("cannot create '{other}' instances"))
        }
    }
}

fn parse_float(s: &str) -> Option<f64> {
    let lower = s.to_ascii_lowercase();
    match lower.trim_start_matches(['+', '-']) {
        "inf" | "infinity" | "nan" => {}
        body if body.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | 'e' | '+' | '-' | '_')) => {}
        _ => return None,
    }
    lower.replace('_', "").parse().ok()
}

pub fn is_instance(v: &Value, class: &str) -> bool {
    let t = v.type_name();
    t == class
        || (class == "object")
        || (class == "int" && matches!(v, Value::Bool(_)))
        || (matches!(v, Value::Exception(_)) && exception_is_subclass(&t, class))
}

fn apply_key(interp: &mut Interp, key: &Option<Value>, v: &Value) -> Result<Value, PyErr> {
    match key {
        Some(f) => interp.call(f, vec![v.clone()], vec![]),
        None => Ok(v.clone()),
    }
}

fn order(a: &Value, b: &Value) -> Result<Ordering, PyErr> {
    a.py_cmp(b).ok_or_else(|| {
        PyErr::new(
            "TypeError",
            format!("'<' not supported between instances of '{}' and '{}'", a.type_name(), b.type_name()),
        )
    })
}

/// Stable sort; `reverse` keeps equal elements in their original order.
pub fn sort_values(
    interp: &mut Interp,
    items: Vec<Value>,
    key: Option<Value>,
    reverse: bool,
) -> Result<Vec<Value>, PyErr> {
    let mut keyed: Vec<(Value, Value)> = Vec::with_capacity(items.len());
    for item in items {
        keyed.push((apply_key(interp, &key, &item)?, item));
    }
    let mut failure = None;
    keyed.sort_by(|(a, _), (b, _)| match order(a, b) {
        Ok(o) if reverse => o.reverse(),
        Ok(o) => o,
        Err(e) => {
            failure.get_or_insert(e);
            Ordering::Equal
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(keyed.into_iter().map(|(_, v)| v).collect()),
    }
}

pub fn length(v: &Value) -> Result<i64, PyErr> {
    Ok(match v {
        Value::Str(s) => s.chars().count() as i64,
        Value::List(l) => l.borrow().len() as i64,
        Value::Tuple(t) => t.len() as i64,
        Value::Dict(d) => d.borrow().entries.len() as i64,
        Value::Range(a, b, s) => range_len(*a, *b, *s),
        other => return err("TypeError", format!("object of type '{}' has no len()", other.type_name())),
    })
}

pub fn iterate(v: &Value) -> Result<Vec<Value>, PyErr> {
    Ok(match v {
        Value::List(l) => l.borrow().clone(),
        Value::Tuple(t) => t.to_vec(),
        Value::Str(s) => s.chars().map(|c| Value::str_val(c.to_string())).collect(),
        Value::Dict(d) => d.borrow().entries.iter().map(|(k, _)| k.clone()).collect(),
        Value::Range(start, stop, step) => {
            let n = range_len(*start, *stop, *step);
            (0..n).map(|i| Value::Int(start + i * step)).collect()
        }
        Value::File(f) => super::methods::file_lines(&mut f.borrow_mut())?,
        other => return err("TypeError", format!("'{}' object is not iterable", other.type_name())),
    })
}

pub fn contains(container: &Value, item: &Value) -> Result<bool, PyErr> {
    Ok(match container {
        Value::Str(s) => match item {
            Value::Str(sub) => s.contains(&**sub),
            other => {
                return err(
                    "TypeError",
                    format!("'in <string>' requires string as left operand, not {}", other.type_name()),
                )
            }
        },
        Value::Dict(d) => {
            check_hashable(item)?;
            d.borrow().get(item).is_some()
        }
        Value::Range(a, b, s) => match item.as_int() {
            Some(i) => {
                let n = range_len(*a, *b, *s);
                n > 0 && (i - a) % s == 0 && (0..n).contains(&((i - a) / s))
            }
            None => false,
        },
        Value::List(_) | Value::Tuple(_) | Value::File(_) => iterate(container)?.iter().any(|v| v.py_eq(item)),
        other => return err("TypeError", format!("argument of type '{}' is not iterable", other.type_name())),
    })
}

// ---- arithmetic ----

fn unsupported(op: BinOp, a: &Value, b: &Value) -> PyErr {
    PyErr::new(
        "TypeError",
        format!("unsupported operand type(s) for {}: '{}' and '{}'", op.symbol(), a.type_name(), b.type_name()),
    )
}

fn overflow() -> PyErr {
    PyErr::new("OverflowError", "integer result too large")
}

pub fn binop(op: BinOp, a: &Value, b: &Value) -> Result<Value, PyErr> {
    use Value::*;
    match (a, b) {
        (Int(_) | Bool(_), Int(_) | Bool(_)) => int_op(op, a.as_int().unwrap(), b.as_int().unwrap()),
        (Int(_) | Bool(_) | Float(_), Int(_) | Bool(_) | Float(_)) => {
            float_op(op, a.as_f64().unwrap(), b.as_f64().unwrap())
        }
        (Str(x), Str(y)) if op == BinOp::Add => Ok(Value::str_val(format!("{x}{y}"))),
        (Str(_), other) if op == BinOp::Add => err(
            "TypeError",
            format!("can only concatenate str (not \"{}\") to str", other.type_name()),
        ),
        (Str(s), Int(_) | Bool(_)) | (Int(_) | Bool(_), Str(s)) if op == BinOp::Mul => {
            let n = a.as_int().or(b.as_int()).unwrap().max(0) as usize;
            Ok(Value::str_val(s.repeat(n)))
        }
        (Str(fmt), args) if op == BinOp::Mod => super::format::percent_format(fmt, args).map(Value::str_val),
        (List(x), List(y)) if op == BinOp::Add => {
            let mut items = x.borrow().clone();
            items.extend(y.borrow().iter().cloned());
            Ok(Value::list(items))
        }
        (List(_), other) if op == BinOp::Add => err(
            "TypeError",
            format!("can only concatenate list (not \"{}\") to list", other.type_name()),
        ),
        (List(l), Int(_) | Bool(_)) | (Int(_) | Bool(_), List(l)) if op == BinOp::Mul => {
            let n = a.as_int().or(b.as_int()).unwrap().max(0) as usize;
            let items = l.borrow();
            Ok(Value::list(items.iter().cloned().cycle().take(items.len() * n).collect()))
        }
        (Tuple(x), Tuple(y)) if op == BinOp::Add => {
            Ok(Value::Tuple(x.iter().chain(y.iter()).cloned().collect::<Vec<_>>().into()))
        }
        (Tuple(t), Int(_) | Bool(_)) | (Int(_) | Bool(_), Tuple(t)) if op == BinOp::Mul => {
            let n = a.as_int().or(b.as_int()).unwrap().max(0) as usize;
            Ok(Value::Tuple(t.iter().cloned().cycle().take(t.len() * n).collect::<Vec<_>>().into()))
        }
        _ => Err(unsupported(op, a, b)),
    }
}

fn int_op(op: BinOp, a: i64, b: i64) -> Result<Value, PyErr> {
    Ok(Value::Int(match op {
        BinOp::Add => a.checked_add(b).ok_or_else(overflow)?,
        BinOp::Sub => a.checked_sub(b).ok_or_else(overflow)?,
        BinOp::Mul => a.checked_mul(b).ok_or_else(overflow)?,
        BinOp::Div => {
            if b == 0 {
                return err("ZeroDivisionError", "division by zero");
            }
            return Ok(Value::Float(a as f64 / b as f64));
        }
        BinOp::FloorDiv => {
            if b == 0 {
                return err("ZeroDivisionError", "integer division or modulo by zero");
            }
            let q = a.wrapping_div(b);
            if a % b != 0 && ((a < 0) != (b < 0)) {
                q - 1
            } else {
                q
            }
        }
        BinOp::Mod => {
            if b == 0 {
                return err("ZeroDivisionError", "integer modulo by zero");
            }
            let r = a.wrapping_rem(b);
            if r != 0 && ((r < 0) != (b < 0)) {
                r + b
            } else {
                r
            }
        }
        BinOp::Pow => {
            if b < 0 {
                return float_op(op, a as f64, b as f64);
            }
            let exp = u32::try_from(b).map_err(|_| overflow())?;
            a.checked_pow(exp).ok_or_else(overflow)?
        }
    }))
}

fn float_op(op: BinOp, a: f64, b: f64) -> Result<Value, PyErr> {
    Ok(Value::Float(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b == 0.0 {
                return err("ZeroDivisionError", "float division by zero");
            }
            a / b
        }
        BinOp::FloorDiv => {
            if b == 0.0 {
                return err("ZeroDivisionError", "float floor division by zero");
            }
            (a / b).floor()
        }
        BinOp::Mod => {
            if b == 0.0 {
                return err("ZeroDivisionError", "float modulo");
            }
            let r = a % b;
            if r != 0.0 && ((r < 0.0) != (b < 0.0)) {
                r + b
            } else {
                r
            }
        }
        BinOp::Pow => {
            if a == 0.0 && b < 0.0 {
                return err("ZeroDivisionError", "0.0 cannot be raised to a negative power");
            }
            a.powf(b)
        }
    }))
}

// ---- subscripting ----

/// Slice bounds packed by the evaluator as `(slice, (start, stop, step))`.
fn as_slice(v: &Value) -> Option<[Value; 3]> {
    if let Value::Tuple(t) = v {
        if let [Value::Builtin("slice"), Value::Tuple(parts)] = &t[..] {
            return Some([parts[0].clone(), parts[1].clone(), parts[2].clone()]);
        }
    }
    None
}

fn slice_indices(bounds: &[Value; 3], len: i64) -> Result<Vec<i64>, PyErr> {
    let get = |v: &Value| -> Result<Option<i64>, PyErr> {
        match v {
            Value::None => Ok(None),
            other => other.as_int().map(Some).ok_or_else(|| {
                PyErr::new(
                    "TypeError",
                    "slice indices must be integers or None or have an __index__ method",
                )
            }),
        }
    };
    let step = get(&bounds[2])?.unwrap_or(1);
    if step == 0 {
        return err("ValueError", "slice step cannot be zero");
    }
    let clamp = |i: i64, lo: i64, hi: i64| {
        let i = if i < 0 { i + len } else { i };
        i.clamp(lo, hi)
    };
    let (start, stop) = if step > 0 {
        (
            get(&bounds[0])?.map_or(0, |i| clamp(i, 0, len)),
            get(&bounds[1])?.map_or(len, |i| clamp(i, 0, len)),
        )
    } else {
        (
            get(&bounds[0])?.map_or(len - 1, |i| clamp(i, -1, len - 1)),
            get(&bounds[1])?.map_or(-1, |i| clamp(i, -1, len - 1)),
        )
    };
    let mut out = Vec::new();
    let mut i = start;
    while (step > 0 && i < stop) || (step < 0 && i > stop) {
        out.push(i);
        i += step;
    }
    Ok(out)
}

fn index(idx: &Value, len: usize, kind: &str) -> Result<usize, PyErr> {
    let Some(i) = idx.as_int() else {
        return err(
            "TypeError",
            format!("{kind} indices must be integers or slices, not {}", idx.type_name()),
        );
    };
    let adjusted = if i < 0 { i + len as i64 } else { i };
    if adjusted < 0 || adjusted >= len as i64 {
        return err("IndexError", format!("{kind} index out of range"));
    }
    Ok(adjusted as usize)
}

pub fn subscript(interp: &mut Interp, obj: &Value, idx: &Value) -> Result<Value, PyErr> {
    let _ = interp;
    let slice = as_slice(idx);
    match obj {
        Value::List(l) => {
            let items = l.borrow();
            match slice {
                Some(b) => Ok(Value::list(
                    slice_indices(&b, items.len() as i64)?.into_iter().map(|i| items[i as usize].clone()).collect(),
                )),
                None => Ok(items[index(idx, items.len(), "list")?].clone()),
            }
        }
        Value::Tuple(t) => match slice {
            Some(b) => Ok(Value::Tuple(
                slice_indices(&b, t.len() as i64)?
                    .into_iter()
                    .map(|i| t[i as usize].clone())
                    .collect::<Vec<_>>()
                    .into(),
            )),
            None => Ok(t[index(idx, t.len(), "tuple")?].clone()),
        },
        Value::Str(s) => {
            let chars: Vec<char> = s.chars().collect();
            match slice {
                Some(b) => Ok(Value::str_val(
                    slice_indices(&b, chars.len() as i64)?.into_iter().map(|i| chars[i as usize]).collect::<String>(),
                )),
                None => Ok(Value::str_val(chars[index(idx, chars.len(), "string")?].to_string())),
            }
        }
        Value::Range(a, b, s) => {
            let n = range_len(*a, *b, *s);
            match slice {
                Some(bounds) => {
                    Ok(Value::list(slice_indices(&bounds, n)?.into_iter().map(|i| Value::Int(a + i * s)).collect()))
                }
                None => Ok(Value::Int(a + index(idx, n as usize, "range object")? as i64 * s)),
            }
        }
        Value::Dict(d) => {
            check_hashable(idx)?;
            d.borrow().get(idx).cloned().ok_or_else(|| {
                PyErr::from_exc(Rc::new(ExcObj { type_name: "KeyError".into(), args: vec![idx.clone()] }))
            })
        }
        Value::Type(t) => Ok(Value::Type(t.clone())),
        other => err("TypeError", format!("'{}' object is not subscriptable", other.type_name())),
    }
}

pub fn set_item(obj: &Value, idx: Value, value: Value) -> Result<(), PyErr> {
    match obj {
        Value::List(l) => {
            if let Some(b) = as_slice(&idx) {
                let replacement = iterate(&value)?;
                let mut items = l.borrow_mut();
                let positions = slice_indices(&b, items.len() as i64)?;
                let step_one = matches!(b[2], Value::None) || b[2].as_int() == Some(1);
                if step_one {
                    let start = positions.first().copied().unwrap_or_else(|| {
                        let s = b[0].as_int().unwrap_or(0);
                        let len = items.len() as i64;
                        (if s < 0 { s + len } else { s }).clamp(0, len)
                    }) as usize;
                    let end = start + positions.len();
                    items.splice(start..end, replacement);
                } else {
                    if positions.len() != replacement.len() {
                        return err(
                            "ValueError",
                            format!(
                                "attempt to assign sequence of size {} to extended slice of size {}",
                                replacement.len(),
                                positions.len()
                            ),
                        );
                    }
                    for (p, v) in positions.into_iter().zip(replacement) {
                        items[p as usize] = v;
                    }
                }
                return Ok(());
            }
            let mut items = l.borrow_mut();
            let len = items.len();
            let i = index(&idx, len, "list").map_err(|e| {
                if &*e.exc.type_name == "IndexError" {
                    PyErr::new("IndexError", "list assignment index out of range")
                } else {
                    e
                }
            })?;
            items[i] = value;
            Ok(())
        }
        Value::Dict(d) => {
            check_hashable(&idx)?;
            d.borrow_mut().insert(idx, value);
            Ok(())
        }
        other => err("TypeError", format!("'{}' object does not support item assignment", other.type_name())),
    }
}

pub fn del_item(obj: &Value, idx: &Value) -> Result<(), PyErr> {
    match obj {
        Value::List(l) => {
            let mut items = l.borrow_mut();
            if let Some(b) = as_slice(idx) {
                let mut positions = slice_indices(&b, items.len() as i64)?;
                positions.sort_unstable();
                for p in positions.into_iter().rev() {
                    items.remove(p as usize);
                }
                return Ok(());
            }
            let len = items.len();
            let i = index(idx, len, "list")?;
            items.remove(i);
            Ok(())
        }
        Value::Dict(d) => {
            check_hashable(idx)?;
            d.borrow_mut().remove(idx).map(|_| ()).ok_or_else(|| {
                PyErr::from_exc(Rc::new(ExcObj { type_name: "KeyError".into(), args: vec![idx.clone()] }))
            })
        }
        other => err("TypeError", format!("'{}' object does not support item deletion", other.type_name())),
    }
}

pub fn getattr(interp: &mut Interp, obj: &Value, attr: &str) -> Result<Value, PyErr> {
    let _ = interp;
    match obj {
        Value::Module(m) => m.attrs.borrow().get(attr).cloned().ok_or_else(|| {
            PyErr::new("AttributeError", format!("module '{}' has no attribute '{attr}'", m.name))
        }),
        Value::Exception(e) if attr == "args" => Ok(Value::Tuple(e.args.clone().into())),
        Value::File(f) => {
            let f = f.borrow();
            match attr {
                "name" => return Ok(Value::str_val(f.name.as_str())),
                "mode" => return Ok(Value::str_val(f.mode.as_str())),
                "closed" => return Ok(Value::Bool(f.closed)),
                _ => {}
            }
            drop(f);
            method_or_error(obj, attr)
        }
        Value::Type(t) if attr == "__name__" => Ok(Value::str_val(t.clone())),
        Value::Func(c) if attr == "__name__" => Ok(Value::str_val(c.def.name.as_str())),
        Value::Float(f) if attr == "real" => Ok(Value::Float(*f)),
        Value::Int(i) if attr == "real" => Ok(Value::Int(*i)),
        _ => method_or_error(obj, attr),
    }
}

fn method_or_error(obj: &Value, attr: &str) -> Result<Value, PyErr> {
    if has_method(obj, attr) {
        Ok(Value::Method(Rc::new((obj.clone(), attr.to_string()))))
    } else {
        err("AttributeError", format!("'{}' object has no attribute '{attr}'", obj.type_name()))
    }
}
