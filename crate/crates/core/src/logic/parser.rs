//! Line-oriented MLN file format.
//!
//! ```text
//! // comment
//! type person = 3
//! predicate Friends(person, person)
//! 1.5 Friends(x, y) ^ Smokes(x) => Smokes(y)
//! ```
//!
//! Operators by increasing precedence: `<=>`, `=>` (right-associative), `v`,
//! `^`, `!`. `x != y` is a variable disequality. `domain` is accepted as an
//! alias of `type`.

use super::{Clause, Formula, MlnModel, PredId, Signature, Var, VarId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    LParen,
    RParen,
    Comma,
    Not,
    And,
    Implies,
    Iff,
    Neq,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(text: &str, line: usize, col0: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        let (tok, len) = if rest.starts_with("<=>") {
            (Tok::Iff, 3)
        } else if rest.starts_with("=>") {
            (Tok::Implies, 2)
        } else if rest.starts_with("!=") {
            (Tok::Neq, 2)
        } else {
            match c {
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                ',' => (Tok::Comma, 1),
                '!' => (Tok::Not, 1),
                '^' => (Tok::And, 1),
                c if c.is_alphanumeric() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    let word: String = chars[start..i].iter().collect();
                    out.push(Token {
                        tok: Tok::Ident(word),
                        col,
                    });
                    continue;
                }
                other => {
                    return Err(syntax(
                        line,
                        col,
                        format!("unexpected character `{}`", other),
                    ))
                }
            }
        };
        out.push(Token { tok, col });
        i += len;
    }
    Ok(out)
}

/// Formula AST with variable names, before variable resolution.
enum Raw {
    Atom {
        pred: String,
        args: Vec<String>,
        col: usize,
    },
    Neq(String, String),
    Not(Box<Raw>),
    And(Vec<Raw>),
    Or(Vec<Raw>),
    Implies(Box<Raw>, Box<Raw>),
    Iff(Box<Raw>, Box<Raw>),
}

struct FormulaParser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    end_col: usize,
}

impl FormulaParser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks
            .get(self.pos)
            .map(|t| t.col)
            .unwrap_or(self.end_col)
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(syntax(self.line, self.col(), format!("expected {}", what)))
        }
    }

    fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(syntax(self.line, self.col(), format!("expected {}", what))),
        }
    }

    fn parse(&mut self) -> Result<Raw> {
        let f = self.iff()?;
        if self.pos < self.toks.len() {
            return Err(syntax(self.line, self.col(), "unexpected trailing input"));
        }
        Ok(f)
    }

    fn iff(&mut self) -> Result<Raw> {
        let mut lhs = self.implies()?;
        while self.peek() == Some(&Tok::Iff) {
            self.pos += 1;
            let rhs = self.implies()?;
            lhs = Raw::Iff(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<Raw> {
        let lhs = self.or()?;
        if self.peek() == Some(&Tok::Implies) {
            self.pos += 1;
            let rhs = self.implies()?;
            return Ok(Raw::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Raw> {
        let mut parts = vec![self.and()?];
        while matches!(self.peek(), Some(Tok::Ident(s)) if s == "v") {
            self.pos += 1;
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Raw::Or(parts)
        })
    }

    fn and(&mut self) -> Result<Raw> {
        let mut parts = vec![self.unary()?];
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Raw::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Raw> {
        match self.peek() {
            Some(Tok::Not) => {
                self.pos += 1;
                Ok(Raw::Not(Box::new(self.unary()?)))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let f = self.iff()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(f)
            }
            Some(Tok::Ident(_)) => {
                let col = self.col();
                let name = self.ident("identifier")?;
                match self.peek() {
                    Some(Tok::LParen) => {
                        self.pos += 1;
                        let mut args = vec![self.ident("variable")?];
                        while self.peek() == Some(&Tok::Comma) {
                            self.pos += 1;
                            args.push(self.ident("variable")?);
                        }
                        self.expect(Tok::RParen, "`)`")?;
                        Ok(Raw::Atom {
                            pred: name,
                            args,
                            col,
                        })
                    }
                    Some(Tok::Neq) => {
                        self.pos += 1;
                        let rhs = self.ident("variable")?;
                        Ok(Raw::Neq(name, rhs))
                    }
                    _ => Err(syntax(self.line, self.col(), "expected `(` or `!=`")),
                }
            }
            _ => Err(syntax(self.line, self.col(), "expected a formula")),
        }
    }
}

/// Resolves names in a raw formula against the signature.
struct Resolver<'a> {
    sig: &'a Signature,
    line: usize,
    vars: Vec<(String, Option<usize>)>,
}

impl Resolver<'_> {
    fn var(&mut self, name: &str) -> VarId {
        if let Some(i) = self.vars.iter().position(|(n, _)| n == name) {
            i
        } else {
            self.vars.push((name.to_string(), None));
            self.vars.len() - 1
        }
    }

    fn resolve(&mut self, raw: Raw) -> Result<Formula> {
        Ok(match raw {
            Raw::Atom { pred, args, col } => {
                let pid: PredId = self
                    .sig
                    .predicate_id(&pred)
                    .ok_or(Error::UnknownPredicate {
                        line: self.line,
                        name: pred.clone(),
                    })?;
                let decl = self.sig.predicate(pid);
                if decl.arity() != args.len() {
                    return Err(Error::ArityMismatch {
                        line: self.line,
                        name: pred,
                        expected: decl.arity(),
                        found: args.len(),
                    });
                }
                let mut ids = Vec::with_capacity(args.len());
                for (j, a) in args.iter().enumerate() {
                    if a.starts_with(|c: char| c.is_uppercase()) {
                        return Err(syntax(
                            self.line,
                            col,
                            format!("`{}` is not a variable; variables are lowercase", a),
                        ));
                    }
                    let v = self.var(a);
                    let ty = decl.args[j];
                    match self.vars[v].1 {
                        None => self.vars[v].1 = Some(ty),
                        Some(prev) if prev != ty => {
                            return Err(Error::TypeConflict {
                                line: self.line,
                                var: a.clone(),
                                first: self.sig.types()[prev].name.clone(),
                                second: self.sig.types()[ty].name.clone(),
                            })
                        }
                        _ => {}
                    }
                    ids.push(v);
                }
                Formula::atom(pid, ids)
            }
            Raw::Neq(a, b) => {
                let a = self.var(&a);
                let b = self.var(&b);
                Formula::Neq(a, b)
            }
            Raw::Not(f) => Formula::negation(self.resolve(*f)?),
            Raw::And(fs) => Formula::and(
                fs.into_iter()
                    .map(|f| self.resolve(f))
                    .collect::<Result<_>>()?,
            ),
            Raw::Or(fs) => Formula::or(
                fs.into_iter()
                    .map(|f| self.resolve(f))
                    .collect::<Result<_>>()?,
            ),
            Raw::Implies(a, b) => Formula::implies(self.resolve(*a)?, self.resolve(*b)?),
            Raw::Iff(a, b) => Formula::iff(self.resolve(*a)?, self.resolve(*b)?),
        })
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find("//") {
        Some(i) => &line[..i],
        None => line,
    }
}

fn leading_ws(line: &str) -> usize {
    line.chars().take_while(|c| c.is_whitespace()).count()
}

/// `type name = size` (or `domain name = size`).
fn parse_type_decl(body: &str, line: usize, col: usize) -> Result<(String, usize)> {
    let (name, size) = body
        .split_once('=')
        .ok_or_else(|| syntax(line, col, "expected `<name> = <size>`"))?;
    let name = name.trim();
    if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
        return Err(syntax(line, col, "invalid type name"));
    }
    let size: usize = size
        .trim()
        .parse()
        .map_err(|_| syntax(line, col, format!("invalid type size `{}`", size.trim())))?;
    if size == 0 {
        return Err(Error::Declaration {
            line,
            message: format!("type `{}` must have size >= 1", name),
        });
    }
    Ok((name.to_string(), size))
}

/// `predicate Name(type, ...)`.
fn parse_pred_decl(body: &str, line: usize, col: usize) -> Result<(String, Vec<String>)> {
    let toks = tokenize(body, line, col)?;
    let mut p = FormulaParser {
        toks: &toks,
        pos: 0,
        line,
        end_col: col + body.len(),
    };
    let name = p.ident("predicate name")?;
    p.expect(Tok::LParen, "`(`")?;
    let mut args = vec![p.ident("type name")?];
    while p.peek() == Some(&Tok::Comma) {
        p.pos += 1;
        args.push(p.ident("type name")?);
    }
    p.expect(Tok::RParen, "`)`")?;
    if p.pos < toks.len() {
        return Err(syntax(line, p.col(), "unexpected trailing input"));
    }
    Ok((name, args))
}

/// Parses the MLN file format into an un-normalized model.
pub fn parse_mln(text: &str) -> Result<MlnModel> {
    let mut types: Vec<(String, usize, usize)> = Vec::new();
    let mut preds: Vec<(String, Vec<String>, usize)> = Vec::new();
    let mut clause_lines: Vec<(usize, usize, &str)> = Vec::new();

    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        let content = strip_comment(raw_line);
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let col = leading_ws(content) + 1;
        let keyword = trimmed.split_whitespace().next().unwrap();
        match keyword {
            "type" | "domain" => {
                let body = &trimmed[keyword.len()..];
                let (name, size) = parse_type_decl(body, line, col + keyword.len())?;
                if types.iter().any(|(n, _, _)| *n == name) {
                    return Err(Error::Declaration {
                        line,
                        message: format!("type `{}` declared twice", name),
                    });
                }
                types.push((name, size, line));
            }
            "predicate" => {
                let body = &trimmed[keyword.len()..];
                let (name, args) = parse_pred_decl(body, line, col + keyword.len())?;
                if preds.iter().any(|(n, _, _)| *n == name) {
                    return Err(Error::Declaration {
                        line,
                        message: format!("predicate `{}` declared twice", name),
                    });
                }
                preds.push((name, args, line));
            }
            _ => clause_lines.push((line, col, trimmed)),
        }
    }

    let mut sig = Signature::new();
    for (name, size, line) in &types {
        sig.add_type(name, *size).map_err(|e| relocate(e, *line))?;
    }
    for (name, args, line) in &preds {
        let ids = args
            .iter()
            .map(|a| {
                sig.type_id(a).ok_or(Error::UnknownType {
                    line: *line,
                    name: a.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sig.add_predicate(name, ids)
            .map_err(|e| relocate(e, *line))?;
    }

    let mut clauses = Vec::new();
    for (line, col, text) in clause_lines {
        let (wtok, rest) = match text.find(char::is_whitespace) {
            Some(i) => (&text[..i], &text[i..]),
            None => return Err(syntax(line, col, "expected `<weight> <formula>`")),
        };
        let weight: f64 = wtok
            .parse()
            .map_err(|_| syntax(line, col, format!("invalid weight `{}`", wtok)))?;
        if !weight.is_finite() {
            return Err(syntax(line, col, "weights must be finite"));
        }
        let fcol = col + wtok.len();
        let toks = tokenize(rest, line, fcol)?;
        let raw = FormulaParser {
            toks: &toks,
            pos: 0,
            line,
            end_col: fcol + rest.len(),
        }
        .parse()?;
        let mut resolver = Resolver {
            sig: &sig,
            line,
            vars: Vec::new(),
        };
        let formula = resolver.resolve(raw)?;
        let mut vars = Vec::with_capacity(resolver.vars.len());
        for (name, ty) in resolver.vars {
            let ty = match ty {
                Some(t) => t,
                None if sig.types().len() == 1 => 0,
                None => {
                    return Err(Error::Declaration {
                        line,
                        message: format!("cannot infer the type of variable `{}`", name),
                    })
                }
            };
            vars.push(Var { name, ty });
        }
        let origin = clauses.len();
        clauses.push(Clause {
            formula,
            vars,
            weight,
            origin,
        });
    }

    Ok(MlnModel::new(sig, clauses))
}

fn relocate(e: Error, line: usize) -> Error {
    match e {
        Error::Declaration { message, .. } => Error::Declaration { line, message },
        other => other,
    }
}
