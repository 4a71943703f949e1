//! Tokenizer with Python's indentation rules.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    /// String literal. `fstring` literals keep their raw template body.
    Str { value: String, fstring: bool },
    Op(&'static str),
    /// A `!command` line; holds the command text after the bang.
    Shell(String),
    Newline,
    Indent,
    Dedent,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Name(n) => write!(f, "{n}"),
            Tok::Int(i) => write!(f, "{i}"),
            Tok::Float(x) => write!(f, "{x}"),
            Tok::Str { .. } => write!(f, "string literal"),
            Tok::Op(o) => write!(f, "{o}"),
            Tok::Shell(_) => write!(f, "shell command"),
            Tok::Newline => write!(f, "newline"),
            Tok::Indent => write!(f, "indent"),
            Tok::Dedent => write!(f, "dedent"),
            Tok::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LexError {
    /// `SyntaxError` or `IndentationError`.
    pub kind: &'static str,
    pub msg: String,
    pub line: usize,
}

// Longest first so that greedy matching works.
const OPS: &[&str] = &[
    "**=", "//=", "...", "->", "**", "//", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=",
    "+", "-", "*", "/", "%", "<", ">", "=", "(", ")", "[", "]", "{", "}", ",", ":", ".", ";",
    "@", "&", "|", "^", "~",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LexError> {
    Lexer { chars: src.chars().collect(), pos: 0, line: 1, out: Vec::new(), indents: vec![0], depth: 0 }
        .run()
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    out: Vec<Token>,
    indents: Vec<usize>,
    /// Bracket nesting; newlines inside brackets are not significant.
    depth: usize,
}

impl Lexer {
    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn push(&mut self, tok: Tok) {
        self.out.push(Token { tok, line: self.line });
    }

    fn err(&self, msg: impl Into<String>) -> LexError {
        LexError { kind: "SyntaxError", msg: msg.into(), line: self.line }
    }

    fn run(mut self) -> Result<Vec<Token>, LexError> {
        let mut at_line_start = true;
        while self.pos < self.chars.len() {
            if at_line_start && self.depth == 0 {
                // Blank lines leave us at the start of the next line.
                at_line_start = self.handle_indentation()?;
                continue;
            }
            let c = self.peek().unwrap();
            match c {
                '\n' => {
                    self.pos += 1;
                    if self.depth == 0 {
                        self.push(Tok::Newline);
                        at_line_start = true;
                    }
                    self.line += 1;
                }
                ' ' | '\t' | '\r' | '\x0c' => self.pos += 1,
                '#' => self.skip_comment(),
                '\\' if self.peek_at(1) == Some('\n') => {
                    self.pos += 2;
                    self.line += 1;
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => {
                    self.number()?
                }
                c if is_ident_start(c) => self.name_or_string()?,
                '"' | '\'' => self.string(false, false)?,
                _ => self.op()?,
            }
        }
        if !matches!(self.out.last().map(|t| &t.tok), None | Some(Tok::Newline) | Some(Tok::Dedent)) {
            self.push(Tok::Newline);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent);
        }
        self.push(Tok::Eof);
        Ok(self.out)
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.pos += 1;
        }
    }

    /// Measures the indentation of a new logical line and emits
    /// Indent/Dedent tokens. Returns true if the line was blank (consumed).
    fn handle_indentation(&mut self) -> Result<bool, LexError> {
        let mut width = 0;
        let mut p = self.pos;
        while let Some(&c) = self.chars.get(p) {
            match c {
                ' ' => width += 1,
                '\t' => width = (width / 8 + 1) * 8,
                '\x0c' | '\r' => {}
                _ => break,
            }
            p += 1;
        }
        match self.chars.get(p) {
            None => {
                self.pos = p;
                return Ok(true);
            }
            Some('\n') => {
                self.pos = p + 1;
                self.line += 1;
                return Ok(true);
            }
            Some('#') => {
                self.pos = p;
                self.skip_comment();
                if self.peek() == Some('\n') {
                    self.pos += 1;
                    self.line += 1;
                }
                return Ok(true);
            }
            _ => {}
        }
        self.pos = p;
        let current = *self.indents.last().unwrap();
        if width > current {
            self.indents.push(width);
            self.push(Tok::Indent);
        } else if width < current {
            while *self.indents.last().unwrap() > width {
                self.indents.pop();
                self.push(Tok::Dedent);
            }
            if *self.indents.last().unwrap() != width {
                return Err(LexError {
                    kind: "IndentationError",
                    msg: "unindent does not match any outer indentation level".into(),
                    line: self.line,
                });
            }
        }
        if self.peek() == Some('!') && self.peek_at(1) != Some('=') {
            self.pos += 1;
            let start = self.pos;
            self.skip_comment();
            let cmd: String = self.chars[start..self.pos].iter().collect();
            self.push(Tok::Shell(cmd.trim().to_string()));
        }
        Ok(false)
    }

    fn number(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        if self.peek() == Some('0') && matches!(self.peek_at(1), Some('x' | 'X' | 'o' | 'O' | 'b' | 'B')) {
            let radix = match self.peek_at(1).unwrap().to_ascii_lowercase() {
                'x' => 16,
                'o' => 8,
                _ => 2,
            };
            self.pos += 2;
            let digits_start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') {
                self.pos += 1;
            }
            let digits: String = self.chars[digits_start..self.pos].iter().filter(|&&c| c != '_').collect();
            let v = i64::from_str_radix(&digits, radix).map_err(|_| self.err("invalid number literal"))?;
            self.push(Tok::Int(v));
            return Ok(());
        }
        let mut is_float = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == '_' {
                self.pos += 1;
            } else if c == '.' && !is_float {
                is_float = true;
                self.pos += 1;
            } else if c == 'e' || c == 'E' {
                let sign = matches!(self.peek_at(1), Some('+' | '-'));
                let digit_at = if sign { 2 } else { 1 };
                if self.peek_at(digit_at).is_some_and(|d| d.is_ascii_digit()) {
                    is_float = true;
                    self.pos += digit_at;
                } else {
                    break;
                }
            } else {
                break;
            }
        }
        let text: String = self.chars[start..self.pos].iter().filter(|&&c| c != '_').collect();
        if self.peek().is_some_and(is_ident_start) {
            return Err(self.err("invalid decimal literal"));
        }
        if is_float {
            let v: f64 = text.parse().map_err(|_| self.err("invalid number literal"))?;
            self.push(Tok::Float(v));
        } else {
            match text.parse::<i64>() {
                Ok(v) => self.push(Tok::Int(v)),
                // Too large for the integer model; degrade to a float.
                Err(_) => self.push(Tok::Float(text.parse().map_err(|_| self.err("invalid number literal"))?)),
            }
        }
        Ok(())
    }

    fn name_or_string(&mut self) -> Result<(), LexError> {
        let start = self.pos;
        while self.peek().is_some_and(is_ident_char) {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        if matches!(self.peek(), Some('"' | '\'')) {
            let lower = word.to_ascii_lowercase();
            if matches!(lower.as_str(), "r" | "f" | "rf" | "fr" | "b" | "rb" | "br" | "u") {
                return self.string(lower.contains('r'), lower.contains('f'));
            }
        }
        self.push(Tok::Name(word));
        Ok(())
    }

    fn string(&mut self, raw: bool, fstring: bool) -> Result<(), LexError> {
        let quote = self.peek().unwrap();
        let triple = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        let start_line = self.line;
        let mut value = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(LexError {
                    kind: "SyntaxError",
                    msg: if triple {
                        "unterminated triple-quoted string literal".into()
                    } else {
                        "unterminated string literal".into()
                    },
                    line: start_line,
                });
            };
            if c == quote {
                if !triple {
                    self.pos += 1;
                    break;
                }
                if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                    self.pos += 3;
                    break;
                }
            }
            if c == '\n' {
                if !triple {
                    return Err(LexError {
                        kind: "SyntaxError",
                        msg: "unterminated string literal".into(),
                        line: start_line,
                    });
                }
                self.line += 1;
            }
            if c == '\\' {
                let next = self.peek_at(1);
                if raw || fstring {
                    // f-strings are unescaped after template parsing.
                    value.push('\\');
                    if let Some(n) = next {
                        value.push(n);
                        if n == '\n' {
                            self.line += 1;
                        }
                        self.pos += 2;
                    } else {
                        self.pos += 1;
                    }
                    continue;
                }
                self.pos += 2;
                match next {
                    Some('\n') => self.line += 1,
                    Some(n) => self.escape(n, &mut value)?,
                    None => return Err(self.err("unterminated string literal")),
                }
                continue;
            }
            value.push(c);
            self.pos += 1;
        }
        self.push(Tok::Str { value, fstring });
        Ok(())
    }

    fn escape(&mut self, n: char, value: &mut String) -> Result<(), LexError> {
        match n {
            'n' => value.push('\n'),
            't' => value.push('\t'),
            'r' => value.push('\r'),
            '0' => value.push('\0'),
            '\\' => value.push('\\'),
            '\'' => value.push('\''),
            '"' => value.push('"'),
            'x' | 'u' => {
                let len = if n == 'x' { 2 } else { 4 };
                let hex: String = self.chars.get(self.pos..self.pos + len).unwrap_or(&[]).iter().collect();
                let code = u32::from_str_radix(&hex, 16).map_err(|_| self.err("truncated escape sequence"))?;
                value.push(char::from_u32(code).unwrap_or('\u{fffd}'));
                self.pos += len;
            }
            other => {
                value.push('\\');
                value.push(other);
            }
        }
        Ok(())
    }

    fn op(&mut self) -> Result<(), LexError> {
        for op in OPS {
            let len = op.len();
            if self.chars.len() >= self.pos + len
                && self.chars[self.pos..self.pos + len].iter().copied().eq(op.chars())
            {
                self.pos += len;
                match *op {
                    "(" | "[" | "{" => self.depth += 1,
                    ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                    _ => {}
                }
                self.push(Tok::Op(op));
                return Ok(());
            }
        }
        Err(self.err(format!("invalid character '{}'", self.peek().unwrap())))
    }
}

/// Resolves backslash escapes in an f-string literal segment.
pub fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some('\\') => out.push('\\'),
            Some('\'') => out.push('\''),
            Some('"') => out.push('"'),
            Some('\n') => {}
            Some(o) => {
                out.push('\\');
                out.push(o);
            }
            None => out.push('\\'),
        }
    }
    out
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c.is_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c == '_' || c.is_alphanumeric()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation_produces_block_tokens() {
        let t = toks("if x:\n    y = 1\nz\n");
        assert!(t.contains(&Tok::Indent));
        assert!(t.contains(&Tok::Dedent));
        assert_eq!(t.last(), Some(&Tok::Eof));
    }

    #[test]
    fn newlines_inside_brackets_are_ignored() {
        let t = toks("f(1,\n  2)\n");
        assert_eq!(t.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn shell_lines_are_single_tokens() {
        assert_eq!(toks("!ls -la\n")[0], Tok::Shell("ls -la".into()));
        assert_eq!(toks("  !ls")[1], Tok::Shell("ls".into()));
    }

    #[test]
    fn bad_dedent_is_indentation_error() {
        let e = tokenize("if x:\n    a\n  b\n").unwrap_err();
        assert_eq!(e.kind, "IndentationError");
    }

    #[test]
    fn strings_and_numbers() {
        assert_eq!(toks("'a\\nb'")[0], Tok::Str { value: "a\nb".into(), fstring: false });
        assert_eq!(toks("1_000")[0], Tok::Int(1000));
        assert_eq!(toks("2.5e3")[0], Tok::Float(2500.0));
        assert_eq!(toks("0x1F")[0], Tok::Int(31));
        assert!(matches!(toks("f'{x}'")[0], Tok::Str { fstring: true, .. }));
    }
}
