//! Format-spec mini-language, `str.format` and printf-style `%`.

use super::interp::{err, PyErr};
use super::value::*;

#[derive(Default)]
struct Spec {
    fill: Option<char>,
    align: Option<char>,
    sign: Option<char>,
    zero: bool,
    width: usize,
    grouping: Option<char>,
    precision: Option<usize>,
    kind: Option<char>,
}

fn parse_spec(spec: &str) -> Result<Spec, PyErr> {
    let chars: Vec<char> = spec.chars().collect();
    let mut s = Spec::default();
    let mut i = 0;
    let is_align = |c: char| matches!(c, '<' | '>' | '^' | '=');
    if chars.len() >= 2 && is_align(chars[1]) {
        s.fill = Some(chars[0]);
        s.align = Some(chars[1]);
        i = 2;
    } else if !chars.is_empty() && is_align(chars[0]) {
        s.align = Some(chars[0]);
        i = 1;
    }
    if i < chars.len() && matches!(chars[i], '+' | '-' | ' ') {
        s.sign = Some(chars[i]);
        i += 1;
    }
    if i < chars.len() && chars[i] == '#' {
        i += 1;
    }
    if i < chars.len() && chars[i] == '0' {
        s.zero = true;
        i += 1;
    }
    let start = i;
    while i < chars.len() && chars[i].is_ascii_digit() {
        i += 1;
    }
    if i > start {
        s.width = chars[start..i].iter().collect::<String>().parse().unwrap_or(0);
    }
    if i < chars.len() && matches!(chars[i], ',' | '_') {
        s.grouping = Some(chars[i]);
        i += 1;
    }
    if i < chars.len() && chars[i] == '.' {
        i += 1;
        let start = i;
        while i < chars.len() && chars[i].is_ascii_digit() {
            i += 1;
        }
        if i == start {
            return err("ValueError", "Format specifier missing precision");
        }
        s.precision = chars[start..i].iter().collect::<String>().parse().ok();
    }
    if i < chars.len() {
        s.kind = Some(chars[i]);
        i += 1;
    }
    if i != chars.len() {
        return err("ValueError", "Invalid format specifier");
    }
    Ok(s)
}

pub fn format_value(v: &Value, spec: &str) -> Result<String, PyErr> {
    if spec.is_empty() {
        return Ok(v.str());
    }
    let s = parse_spec(spec)?;
    let unknown = |c: char| {
        PyErr::new("ValueError", format!("Unknown format code '{c}' for object of type '{}'", v.type_name()))
    };
    match v {
        Value::Int(_) | Value::Bool(_) | Value::Float(_) => {
            let is_float = matches!(v, Value::Float(_));
            let float_kind = matches!(s.kind, Some('f' | 'F' | 'e' | 'E' | 'g' | 'G' | '%'));
            let (negative, body) = if is_float || float_kind || s.precision.is_some() {
                let f = v.as_f64().unwrap();
                let body = format_float(f.abs(), s.kind, s.precision, is_float)
                    .ok_or_else(|| unknown(s.kind.unwrap_or('?')))?;
                (f.is_sign_negative() && f != 0.0, body)
            } else {
                let i = v.as_int().unwrap();
                let mag = i.unsigned_abs();
                let body = match s.kind {
                    None | Some('d') | Some('n') => mag.to_string(),
                    Some('x') => format!("{mag:x}"),
                    Some('X') => format!("{mag:X}"),
                    Some('o') => format!("{mag:o}"),
                    Some('b') => format!("{mag:b}"),
                    Some(c) => return Err(unknown(c)),
                };
                (i < 0, body)
            };
            let body = match s.grouping {
                Some(sep) => group_digits(&body, sep),
                None => body,
            };
            let sign = match (negative, s.sign) {
                (true, _) => "-",
                (false, Some('+')) => "+",
                (false, Some(' ')) => " ",
                _ => "",
            };
            let (fill, align) = if s.zero && s.align.is_none() {
                ('0', '=')
            } else {
                (s.fill.unwrap_or(' '), s.align.unwrap_or('>'))
            };
            Ok(pad(sign, &body, s.width, fill, align))
        }
        _ => {
            if let Some(c) = s.kind.filter(|c| *c != 's') {
                return Err(unknown(c));
            }
            if s.sign.is_some() {
                return err("ValueError", "Sign not allowed in string format specifier");
            }
            let mut text = v.str();
            if let Some(p) = s.precision {
                text = text.chars().take(p).collect();
            }
            Ok(pad("", &text, s.width, s.fill.unwrap_or(' '), s.align.unwrap_or('<')))
        }
    }
}

fn pad(sign: &str, body: &str, width: usize, fill: char, align: char) -> String {
    let len = sign.chars().count() + body.chars().count();
    let gap = width.saturating_sub(len);
    let f = |n: usize| fill.to_string().repeat(n);
    match align {
        '<' => format!("{sign}{body}{}", f(gap)),
        '^' => format!("{}{sign}{body}{}", f(gap / 2), f(gap - gap / 2)),
        '=' => format!("{sign}{}{body}", f(gap)),
        _ => format!("{}{sign}{body}", f(gap)),
    }
}

fn group_digits(body: &str, sep: char) -> String {
    let (int_part, rest) = match body.find(|c: char| !c.is_ascii_digit()) {
        Some(i) => body.split_at(i),
        None => (body, ""),
    };
    let digits: Vec<char> = int_part.chars().collect();
    let mut out = String::new();
    for (i, c) in digits.iter().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(sep);
        }
        out.push(*c);
    }
    out + rest
}

/// Formats a non-negative magnitude; the caller adds the sign.
fn format_float(f: f64, kind: Option<char>, precision: Option<usize>, is_float: bool) -> Option<String> {
    if f.is_infinite() {
        return Some(if kind.is_some_and(|k| k.is_uppercase()) { "INF" } else { "inf" }.into());
    }
    if f.is_nan() {
        return Some(if kind.is_some_and(|k| k.is_uppercase()) { "NAN" } else { "nan" }.into());
    }
    Some(match kind {
        Some('f' | 'F') => format!("{:.*}", precision.unwrap_or(6), f),
        Some('%') => format!("{:.*}%", precision.unwrap_or(6), f * 100.0),
        Some('e') => sci(f, precision.unwrap_or(6)),
        Some('E') => sci(f, precision.unwrap_or(6)).to_uppercase(),
        Some('g') => general(f, precision.unwrap_or(6), false),
        Some('G') => general(f, precision.unwrap_or(6), false).to_uppercase(),
        None => match precision {
            Some(p) => general(f, p, true),
            None if is_float => float_repr(f),
            None => general(f, 6, true),
        },
        Some(_) => return None,
    })
}

fn sci(f: f64, precision: usize) -> String {
    let s = format!("{:.*e}", precision, f);
    let (mantissa, exp) = s.split_once('e').unwrap();
    let exp: i32 = exp.parse().unwrap();
    format!("{mantissa}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

fn general(f: f64, precision: usize, keep_point: bool) -> String {
    let p = precision.max(1);
    if f == 0.0 {
        return if keep_point { "0.0".into() } else { "0".into() };
    }
    let rounded = format!("{:.*e}", p - 1, f);
    let exp: i32 = rounded.split_once('e').unwrap().1.parse().unwrap();
    let strip = |s: String| -> String {
        if s.contains('.') {
            let t = s.trim_end_matches('0').trim_end_matches('.').to_string();
            if keep_point && !t.contains('.') {
                format!("{t}.0")
            } else {
                t
            }
        } else {
            s
        }
    };
    if exp >= -4 && exp < p as i32 {
        strip(format!("{:.*}", (p as i32 - 1 - exp).max(0) as usize, f))
    } else {
        let s = sci(f, p - 1);
        let (mantissa, e) = s.split_once('e').unwrap();
        let m = mantissa.trim_end_matches('0').trim_end_matches('.');
        format!("{m}e{e}")
    }
}

pub fn str_format(template: &str, pos: &[Value], kw: &[(String, Value)]) -> Result<String, PyErr> {
    let chars: Vec<char> = template.chars().collect();
    let mut out = String::new();
    let mut auto = 0usize;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c == '{' && chars.get(i + 1) == Some(&'{') {
            out.push('{');
            i += 2;
            continue;
        }
        if c == '}' && chars.get(i + 1) == Some(&'}') {
            out.push('}');
            i += 2;
            continue;
        }
        if c == '}' {
            return err("ValueError", "Single '}' encountered in format string");
        }
        if c != '{' {
            out.push(c);
            i += 1;
            continue;
        }
        let Some(close) = chars[i..].iter().position(|c| *c == '}').map(|p| p + i) else {
            return err("ValueError", "Single '{' encountered in format string");
        };
        let field: String = chars[i + 1..close].iter().collect();
        i = close + 1;
        let (head, spec) = field.split_once(':').unwrap_or((&field, ""));
        let (name, conversion) = match head.split_once('!') {
            Some((n, conv)) => (n, conv.chars().next()),
            None => (head, None),
        };
        let value = if name.is_empty() {
            let v = pos.get(auto).cloned();
            auto += 1;
            v.ok_or_else(|| PyErr::new("IndexError", format!("Replacement index {} out of range for positional args tuple", auto - 1)))?
        } else if let Ok(idx) = name.parse::<usize>() {
            pos.get(idx).cloned().ok_or_else(|| {
                PyErr::new("IndexError", format!("Replacement index {idx} out of range for positional args tuple"))
            })?
        } else {
            kw.iter().find(|(k, _)| k == name).map(|(_, v)| v.clone()).ok_or_else(|| {
                PyErr::from_exc(std::rc::Rc::new(ExcObj {
                    type_name: "KeyError".into(),
                    args: vec![Value::str_val(name)],
                }))
            })?
        };
        let value = match conversion {
            Some('r') => Value::str_val(value.repr()),
            Some('s') => Value::str_val(value.str()),
            _ => value,
        };
        out.push_str(&format_value(&value, spec)?);
    }
    Ok(out)
}

pub fn percent_format(template: &str, args: &Value) -> Result<String, PyErr> {
    let values: Vec<Value> = match args {
        Value::Tuple(t) => t.to_vec(),
        other => vec![other.clone()],
    };
    let chars: Vec<char> = template.chars().collect();
    let mut out = String::new();
    let mut next = 0usize;
    let mut i = 0;
    while i < chars.len() {
        if chars[i] != '%' {
            out.push(chars[i]);
            i += 1;
            continue;
        }
        i += 1;
        let start = i;
        while i < chars.len() && (chars[i].is_ascii_digit() || matches!(chars[i], '-' | '+' | ' ' | '.' | '#')) {
            i += 1;
        }
        let Some(&conv) = chars.get(i) else {
            return err("ValueError", "incomplete format");
        };
        i += 1;
        if conv == '%' {
            out.push('%');
            continue;
        }
        let flags: String = chars[start..i - 1].iter().collect();
        let v = values
            .get(next)
            .cloned()
            .ok_or_else(|| PyErr::new("TypeError", "not enough arguments for format string"))?;
        next += 1;
        let left = flags.starts_with('-');
        let flags = flags.trim_start_matches('-');
        let spec = match conv {
            's' => {
                let s = v.str();
                format_value(&Value::str_val(s), &format!("{}{flags}", if left { "<" } else { ">" }))?
            }
            'r' => format_value(&Value::str_val(v.repr()), &format!("{}{flags}", if left { "<" } else { ">" }))?,
            'd' | 'i' | 'f' | 'F' | 'e' | 'E' | 'g' | 'G' | 'x' | 'X' | 'o' => {
                if v.as_f64().is_none() {
                    return err(
                        "TypeError",
                        format!("%{conv} format: a real number is required, not {}", v.type_name()),
                    );
                }
                let (v, code) = match conv {
                    'd' | 'i' => (Value::Int(v.as_f64().unwrap().trunc() as i64), 'd'),
                    'x' | 'X' | 'o' => (Value::Int(v.as_int().unwrap_or(v.as_f64().unwrap() as i64)), conv),
                    _ => (Value::Float(v.as_f64().unwrap()), conv),
                };
                format_value(&v, &format!("{}{flags}{code}", if left { "<" } else { "" }))?
            }
            other => {
                return err("ValueError", format!("unsupported format character '{other}' (0x{:x})", other as u32))
            }
        };
        out.push_str(&spec);
    }
    if next < values.len() && matches!(args, Value::Tuple(_)) {
        return err("TypeError", "not all arguments converted during string formatting");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(v: Value, spec: &str) -> String {
        format_value(&v, spec).unwrap()
    }

    #[test]
    fn numeric_specs() {
        assert_eq!(f(Value::Float(1.23456), ".2f"), "1.23");
        assert_eq!(f(Value::Float(0.5), ".1%"), "50.0%");
        assert_eq!(f(Value::Int(1234567), ","), "1,234,567");
        assert_eq!(f(Value::Int(42), "05d"), "00042");
        assert_eq!(f(Value::Int(-42), "05d"), "-0042");
        assert_eq!(f(Value::Float(12345.678), "e"), "1.234568e+04");
        assert_eq!(f(Value::Float(0.0001234), "g"), "0.0001234");
        assert_eq!(f(Value::Float(1234567.0), "g"), "1.23457e+06");
        assert_eq!(f(Value::Int(7), ">4"), "   7");
        assert_eq!(f(Value::Int(255), "x"), "ff");
        assert_eq!(f(Value::Int(3), ".2f"), "3.00");
        assert_eq!(f(Value::Float(2.0), ".3"), "2.0");
    }

    #[test]
    fn string_specs() {
        assert_eq!(f(Value::str_val("ab"), "<4"), "ab  ");
        assert_eq!(f(Value::str_val("ab"), "*^6"), "**ab**");
        assert_eq!(f(Value::str_val("abcdef"), ".3"), "abc");
    }

    #[test]
    fn format_and_percent() {
        let out = str_format("{} + {x} = {0!r}", &[Value::str_val("a")], &[("x".into(), Value::Int(2))]).unwrap();
        assert_eq!(out, "a + 2 = 'a'");
        assert_eq!(str_format("{{}}", &[], &[]).unwrap(), "{}");
        let args = Value::Tuple(vec![Value::str_val("n"), Value::Float(1.5)].into());
        assert_eq!(percent_format("%s=%.2f%%", &args).unwrap(), "n=1.50%");
        assert_eq!(percent_format("%5d|%-3s|", &Value::Tuple(vec![Value::Int(7), Value::str_val("a")].into())).unwrap(), "    7|a  |");
    }
}
