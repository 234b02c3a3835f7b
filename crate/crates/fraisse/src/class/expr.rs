//! Class expressions such as `param(graphs, sets)` or
//! `genfun(abgrp, (G G)->G, depth=2)`.

use std::fmt;
use std::sync::Arc;

use super::{ClassError, ClassHandle, EqQuot, EqRelRaw, GenBij, GenFun, GenPred, GenSub, Graphs, Linear, ParamClass, Sets};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClassExpr {
    Sets,
    Graphs,
    Vec(u32),
    AbGrp,
    EqRelQ,
    EqRelRaw,
    Param(Box<ClassExpr>, Box<ClassExpr>),
    GenPred { base: Box<ClassExpr>, sort: String, arity: usize },
    GenFun { base: Box<ClassExpr>, args: Vec<String>, result: String, depth: usize },
    GenBij { base: Box<ClassExpr>, sort: String, window: usize },
    EqQuot { base: Box<ClassExpr>, sort: String },
    GenSub(Box<ClassExpr>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Open,
    Close,
    Comma,
    Arrow,
    Equals,
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ClassError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = vec![];
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = i + 1;
        match c {
            c if c.is_whitespace() => i += 1,
            '(' => {
                out.push((Tok::Open, col));
                i += 1;
            }
            ')' => {
                out.push((Tok::Close, col));
                i += 1;
            }
            ',' => {
                out.push((Tok::Comma, col));
                i += 1;
            }
            '=' => {
                out.push((Tok::Equals, col));
                i += 1;
            }
            '-' if chars.get(i + 1) == Some(&'>') => {
                out.push((Tok::Arrow, col));
                i += 2;
            }
            c if c.is_alphanumeric() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || (chars[i] == '-' && chars.get(i + 1) != Some(&'>'))) {
                    i += 1;
                }
                out.push((Tok::Ident(chars[start..i].iter().collect()), col));
            }
            _ => return Err(ClassError::Expression(format!("column {col}: unexpected `{c}`"))),
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.1)
    }

    fn fail<T>(&self, msg: &str) -> Result<T, ClassError> {
        Err(ClassError::Expression(format!("column {}: {msg}", self.col())))
    }

    fn eat(&mut self, tok: Tok) -> Result<(), ClassError> {
        if self.toks.get(self.pos).map(|t| &t.0) == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            self.fail(&format!("expected {}", describe(&tok)))
        }
    }

    fn peek_is(&self, tok: &Tok) -> bool {
        self.toks.get(self.pos).map(|t| &t.0) == Some(tok)
    }

    fn ident(&mut self) -> Result<String, ClassError> {
        match self.toks.get(self.pos) {
            Some((Tok::Ident(s), _)) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => self.fail("expected a name"),
        }
    }

    fn number(&mut self) -> Result<usize, ClassError> {
        let col = self.col();
        let s = self.ident()?;
        s.parse().map_err(|_| ClassError::Expression(format!("column {col}: expected a number, found `{s}`")))
    }

    /// `, key=value` or nothing; returns the default when absent.
    fn option(&mut self, key: &str, default: usize) -> Result<usize, ClassError> {
        if !self.peek_is(&Tok::Comma) {
            return Ok(default);
        }
        self.eat(Tok::Comma)?;
        let col = self.col();
        let k = self.ident()?;
        if k != key {
            return Err(ClassError::Expression(format!("column {col}: expected `{key}=`, found `{k}`")));
        }
        self.eat(Tok::Equals)?;
        self.number()
    }

    fn expr(&mut self) -> Result<ClassExpr, ClassError> {
        let col = self.col();
        let head = self.ident()?;
        let e = match head.as_str() {
            "sets" => ClassExpr::Sets,
            "graphs" => ClassExpr::Graphs,
            "abgrp" => ClassExpr::AbGrp,
            "eqrel-q" => ClassExpr::EqRelQ,
            "eqrel-raw" => ClassExpr::EqRelRaw,
            "vec" => {
                self.eat(Tok::Open)?;
                let q = self.number()?;
                self.eat(Tok::Close)?;
                ClassExpr::Vec(q as u32)
            }
            "param" => {
                self.eat(Tok::Open)?;
                let a = self.expr()?;
                self.eat(Tok::Comma)?;
                let b = self.expr()?;
                self.eat(Tok::Close)?;
                ClassExpr::Param(Box::new(a), Box::new(b))
            }
            "gensub" => {
                self.eat(Tok::Open)?;
                let a = self.expr()?;
                self.eat(Tok::Close)?;
                ClassExpr::GenSub(Box::new(a))
            }
            "genpred" | "genbij" | "eqquot" => {
                self.eat(Tok::Open)?;
                let base = Box::new(self.expr()?);
                self.eat(Tok::Comma)?;
                let sort = self.ident()?;
                let e = match head.as_str() {
                    "genpred" => {
                        let arity = if self.peek_is(&Tok::Comma) {
                            self.eat(Tok::Comma)?;
                            self.number()?
                        } else {
                            1
                        };
                        ClassExpr::GenPred { base, sort, arity }
                    }
                    "genbij" => ClassExpr::GenBij { base, sort, window: self.option("window", 1)? },
                    _ => ClassExpr::EqQuot { base, sort },
                };
                self.eat(Tok::Close)?;
                e
            }
            "genfun" => {
                self.eat(Tok::Open)?;
                let base = Box::new(self.expr()?);
                self.eat(Tok::Comma)?;
                self.eat(Tok::Open)?;
                let mut args = vec![];
                while !self.peek_is(&Tok::Close) {
                    args.push(self.ident()?);
                }
                self.eat(Tok::Close)?;
                self.eat(Tok::Arrow)?;
                let result = self.ident()?;
                let depth = self.option("depth", 1)?;
                self.eat(Tok::Close)?;
                ClassExpr::GenFun { base, args, result, depth }
            }
            other => return Err(ClassError::Expression(format!("column {col}: unknown class `{other}`"))),
        };
        Ok(e)
    }
}

fn describe(t: &Tok) -> &'static str {
    match t {
        Tok::Ident(_) => "a name",
        Tok::Open => "`(`",
        Tok::Close => "`)`",
        Tok::Comma => "`,`",
        Tok::Arrow => "`->`",
        Tok::Equals => "`=`",
    }
}

impl ClassExpr {
    pub fn parse(src: &str) -> Result<Self, ClassError> {
        let mut p = Parser { toks: lex(src)?, pos: 0, end: src.chars().count() + 1 };
        let e = p.expr()?;
        if p.pos != p.toks.len() {
            return p.fail("trailing input");
        }
        Ok(e)
    }

    pub fn build(&self) -> Result<ClassHandle, ClassError> {
        let sort_of = |base: &ClassHandle, name: &str| {
            base.signature()
                .sort(name)
                .ok_or_else(|| ClassError::Expression(format!("{} has no sort `{name}`", base.name())))
        };
        Ok(match self {
            ClassExpr::Sets => Arc::new(Sets::new()),
            ClassExpr::Graphs => Arc::new(Graphs::new()),
            ClassExpr::Vec(q) => Arc::new(Linear::vector_space(*q)?),
            ClassExpr::AbGrp => Arc::new(Linear::abelian_groups()),
            ClassExpr::EqRelQ => Arc::new(EqQuot::new(Arc::new(Sets::with_sort("V")), 0)?.with_label("eqrel-q")),
            ClassExpr::EqRelRaw => Arc::new(EqRelRaw::new()),
            ClassExpr::Param(a, b) => {
                let (k0, kp) = (a.build()?, b.build()?);
                if k0.parameterized().is_some() || kp.parameterized().is_some() {
                    return Err(ClassError::Expression("nested parameterization".into()));
                }
                Arc::new(ParamClass::new(k0, kp)?)
            }
            ClassExpr::GenPred { base, sort, arity } => {
                let b = base.build()?;
                let s = sort_of(&b, sort)?;
                Arc::new(GenPred::new(b, s, *arity)?)
            }
            ClassExpr::GenFun { base, args, result, depth } => {
                let b = base.build()?;
                let a = args.iter().map(|n| sort_of(&b, n)).collect::<Result<Vec<_>, _>>()?;
                let r = sort_of(&b, result)?;
                Arc::new(GenFun::new(b, a, r, *depth)?)
            }
            ClassExpr::GenBij { base, sort, window } => {
                let b = base.build()?;
                let s = sort_of(&b, sort)?;
                Arc::new(GenBij::new(b, s, *window)?)
            }
            ClassExpr::EqQuot { base, sort } => {
                let b = base.build()?;
                let s = sort_of(&b, sort)?;
                Arc::new(EqQuot::new(b, s)?)
            }
            ClassExpr::GenSub(base) => Arc::new(GenSub::new(base.build()?)?),
        })
    }
}

impl fmt::Display for ClassExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassExpr::Sets => write!(f, "sets"),
            ClassExpr::Graphs => write!(f, "graphs"),
            ClassExpr::Vec(q) => write!(f, "vec({q})"),
            ClassExpr::AbGrp => write!(f, "abgrp"),
            ClassExpr::EqRelQ => write!(f, "eqrel-q"),
            ClassExpr::EqRelRaw => write!(f, "eqrel-raw"),
            ClassExpr::Param(a, b) => write!(f, "param({a},{b})"),
            ClassExpr::GenPred { base, sort, arity: 1 } => write!(f, "genpred({base},{sort})"),
            ClassExpr::GenPred { base, sort, arity } => write!(f, "genpred({base},{sort},{arity})"),
            ClassExpr::GenFun { base, args, result, depth } => write!(f, "genfun({base},({})->{result},depth={depth})", args.join(" ")),
            ClassExpr::GenBij { base, sort, window } => write!(f, "genbij({base},{sort},window={window})"),
            ClassExpr::EqQuot { base, sort } => write!(f, "eqquot({base},{sort})"),
            ClassExpr::GenSub(base) => write!(f, "gensub({base})"),
        }
    }
}

pub fn parse_class(src: &str) -> Result<ClassHandle, ClassError> {
    ClassExpr::parse(src)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_print_back_to_their_class_names() {
        for src in [
            "param(graphs, sets)",
            "genfun(abgrp, (G G)->G, depth=2)",
            "genpred(vec(2), V)",
            "genbij(sets, S, window=3)",
            "eqquot(graphs, V)",
            "gensub(vec(2))",
            "eqrel-q",
        ] {
            let e = ClassExpr::parse(src).unwrap();
            let class = e.build().unwrap();
            assert_eq!(class.name(), e.to_string(), "{src}");
        }
    }

    #[test]
    fn errors_carry_columns() {
        let err = ClassExpr::parse("param(graphs sets)").unwrap_err().to_string();
        assert!(err.contains("column 14"), "{err}");
        assert!(parse_class("genpred(graphs, W)").is_err());
        assert!(parse_class("param(param(sets,sets),sets)").is_err());
        assert!(parse_class("gensub(abgrp)").is_err());
    }
}
