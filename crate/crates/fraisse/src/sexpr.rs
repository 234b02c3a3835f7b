//! Minimal s-expression reader with line/column positions. Atoms are runs of
//! characters other than whitespace, parentheses, `;` and `"`; double-quoted
//! strings are atoms too. `;` starts a comment running to end of line.

use std::fmt;

use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Sexp {
    Atom(String, Pos),
    List(Vec<Sexp>, Pos),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{pos}: {msg}")]
pub struct ParseError {
    pub pos: Pos,
    pub msg: String,
}

impl ParseError {
    pub fn new(pos: Pos, msg: impl Into<String>) -> Self {
        Self { pos, msg: msg.into() }
    }
}

impl Sexp {
    pub fn pos(&self) -> Pos {
        match self {
            Sexp::Atom(_, p) | Sexp::List(_, p) => *p,
        }
    }

    pub fn atom(&self) -> Option<&str> {
        match self {
            Sexp::Atom(s, _) => Some(s),
            Sexp::List(..) => None,
        }
    }

    pub fn list(&self) -> Option<&[Sexp]> {
        match self {
            Sexp::List(v, _) => Some(v),
            Sexp::Atom(..) => None,
        }
    }

    pub fn expect_atom(&self, what: &str) -> Result<&str, ParseError> {
        self.atom().ok_or_else(|| ParseError::new(self.pos(), format!("expected {what}, found a list")))
    }

    pub fn expect_list(&self, what: &str) -> Result<&[Sexp], ParseError> {
        self.list().ok_or_else(|| ParseError::new(self.pos(), format!("expected {what}, found an atom")))
    }

    /// Splits `(head rest...)`, checking the head atom.
    pub fn form(&self, head: &str) -> Result<&[Sexp], ParseError> {
        let items = self.expect_list(&format!("({head} ...)"))?;
        match items.first().and_then(Sexp::atom) {
            Some(h) if h == head => Ok(&items[1..]),
            _ => Err(ParseError::new(self.pos(), format!("expected ({head} ...)"))),
        }
    }

    pub fn head(&self) -> Option<&str> {
        self.list().and_then(|l| l.first()).and_then(Sexp::atom)
    }
}

pub fn parse_all(src: &str) -> Result<Vec<Sexp>, ParseError> {
    let mut r = Reader { chars: src.chars().collect(), i: 0, line: 1, col: 1 };
    let mut out = Vec::new();
    loop {
        r.skip_ws();
        if r.i >= r.chars.len() {
            return Ok(out);
        }
        out.push(r.read()?);
    }
}

/// Parses exactly one top-level form.
pub fn parse_one(src: &str) -> Result<Sexp, ParseError> {
    let mut all = parse_all(src)?;
    match all.len() {
        1 => Ok(all.pop().unwrap()),
        0 => Err(ParseError::new(Pos { line: 1, col: 1 }, "empty input")),
        _ => Err(ParseError::new(all[1].pos(), "expected a single form")),
    }
}

struct Reader {
    chars: Vec<char>,
    i: usize,
    line: usize,
    col: usize,
}

impl Reader {
    fn pos(&self) -> Pos {
        Pos { line: self.line, col: self.col }
    }

    fn bump(&mut self) -> char {
        let c = self.chars[self.i];
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        c
    }

    fn skip_ws(&mut self) {
        while self.i < self.chars.len() {
            match self.chars[self.i] {
                ';' => {
                    while self.i < self.chars.len() && self.chars[self.i] != '\n' {
                        self.bump();
                    }
                }
                c if c.is_whitespace() => {
                    self.bump();
                }
                _ => break,
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, ParseError> {
        let start = self.pos();
        match self.chars[self.i] {
            '(' => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    if self.i >= self.chars.len() {
                        return Err(ParseError::new(start, "unclosed parenthesis"));
                    }
                    if self.chars[self.i] == ')' {
                        self.bump();
                        return Ok(Sexp::List(items, start));
                    }
                    items.push(self.read()?);
                }
            }
            ')' => Err(ParseError::new(start, "unexpected `)`")),
            '"' => {
                self.bump();
                let mut s = String::new();
                loop {
                    if self.i >= self.chars.len() {
                        return Err(ParseError::new(start, "unterminated string"));
                    }
                    match self.bump() {
                        '"' => return Ok(Sexp::Atom(s, start)),
                        '\\' if self.i < self.chars.len() => s.push(self.bump()),
                        c => s.push(c),
                    }
                }
            }
            _ => {
                let mut s = String::new();
                while self.i < self.chars.len() {
                    let c = self.chars[self.i];
                    if c.is_whitespace() || matches!(c, '(' | ')' | ';' | '"') {
                        break;
                    }
                    s.push(self.bump());
                }
                Ok(Sexp::Atom(s, start))
            }
        }
    }
}

/// Writes an atom, quoting it when it would not read back as a bare atom.
pub fn atom_text(s: &str) -> String {
    let bare = !s.is_empty()
        && !s.chars().any(|c| c.is_whitespace() || matches!(c, '(' | ')' | ';' | '"' | '\\'));
    if bare {
        s.to_string()
    } else {
        let escaped: String = s
            .chars()
            .flat_map(|c| if c == '"' || c == '\\' { vec!['\\', c] } else { vec![c] })
            .collect();
        format!("\"{escaped}\"")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positions_are_one_based() {
        let forms = parse_all("; header\n(a (b c)\n  d)").unwrap();
        assert_eq!(forms.len(), 1);
        let items = forms[0].list().unwrap();
        assert_eq!(items[0].pos(), Pos { line: 2, col: 2 });
        assert_eq!(items[2].pos(), Pos { line: 3, col: 3 });
    }

    #[test]
    fn errors_report_location() {
        let e = parse_all("(a\n (b)").unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 1 });
        let e = parse_all("a )").unwrap_err();
        assert_eq!(e.pos, Pos { line: 1, col: 3 });
    }

    #[test]
    fn quoted_atoms_round_trip() {
        for s in ["plain", "with space", "a(b)", "q\"uote", ""] {
            let text = atom_text(s);
            assert_eq!(parse_one(&text).unwrap().atom(), Some(s));
        }
    }
}
