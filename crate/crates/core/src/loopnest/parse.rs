//! Nest-description documents.
//!
//! ```text
//! # comment
//! param N = 4
//! loop i lower 0 upper N            # optional: step 2
//! let ii = i * 2
//! statement S
//!   read A[i][k]
//!   write C[i][j]
//!   body C[i][j] += A[i][k] * B[k][j];
//! end
//! microkernel gemm
//!   band j k
//!   arg &A[i][0]
//! end
//! annotation #pragma omp parallel for
//! ```
//!
//! Expressions are affine: `*` needs a constant side, `/` (floor division)
//! needs both sides constant. `annotation`, `body` and `arg` take the rest of
//! the line verbatim; elsewhere `#` starts a comment.

use std::collections::HashMap;

use super::{
    AccessMode, AffineExpr, ArrayRef, Body, Let, Loop, LoopNest, LoopNestError, LoopOrigin, LoopTag,
    MicrokernelSpec, Statement,
};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Sym(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
    end: usize,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> LoopNestError {
    LoopNestError::ParseError { line, column, message: message.into() }
}

/// Tokens of `text`, which starts at 1-based column `base`.
fn tokenize(text: &str, line: usize, base: usize) -> Result<Vec<Token>, LoopNestError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        let col = base + text[..pos].chars().count();
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].1.is_ascii_digit() {
                i += 1;
            }
            let s: String = chars[start..i].iter().map(|x| x.1).collect();
            let v = s.parse().map_err(|_| err(line, col, format!("integer `{s}` out of range")))?;
            out.push(Token { tok: Tok::Int(v), col, end: col + (i - start) });
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].1.is_alphanumeric() || chars[i].1 == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().map(|x| x.1).collect();
            out.push(Token { tok: Tok::Ident(s), col, end: col + (i - start) });
        } else if "+-*/()[]=".contains(c) {
            out.push(Token { tok: Tok::Sym(c), col, end: col + 1 });
            i += 1;
        } else {
            return Err(err(line, col, format!("unexpected character `{c}`")));
        }
    }
    Ok(out)
}

/// Names visible to expressions.
#[derive(Default)]
struct Env {
    params: HashMap<String, i64>,
    loop_vars: Vec<String>,
    lets: HashMap<String, AffineExpr>,
}

struct ExprParser<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    env: &'a Env,
    src: &'a str,
    base: usize,
}

impl<'a> ExprParser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map(|t| t.col).unwrap_or_else(|| self.toks.last().map_or(self.base, |t| t.end))
    }

    fn text(&self, from: usize) -> String {
        let (a, b) = (self.toks[from].col - self.base, self.toks[self.pos - 1].end - self.base);
        self.src.chars().skip(a).take(b - a).collect()
    }

    fn non_affine(&self, from: usize) -> LoopNestError {
        LoopNestError::NonAffineExpression { line: self.line, text: self.text(from) }
    }

    fn expr(&mut self) -> Result<AffineExpr, LoopNestError> {
        let mut acc = self.term()?;
        while let Some(Tok::Sym(c @ ('+' | '-'))) = self.peek() {
            let c = *c;
            self.pos += 1;
            let rhs = self.term()?;
            acc = if c == '+' { acc.add(&rhs) } else { acc.sub(&rhs) };
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<AffineExpr, LoopNestError> {
        let start = self.pos;
        let mut acc = self.unary()?;
        while let Some(Tok::Sym(c @ ('*' | '/'))) = self.peek() {
            let c = *c;
            self.pos += 1;
            let rhs = self.unary()?;
            acc = match (c, acc.as_constant(), rhs.as_constant()) {
                ('*', Some(k), _) => rhs.scale(k),
                ('*', _, Some(k)) => acc.scale(k),
                ('/', Some(_), Some(0)) => return Err(err(self.line, self.col(), "division by zero")),
                ('/', Some(a), Some(b)) => {
                    let q = a / b;
                    AffineExpr::constant(if a % b != 0 && (a < 0) != (b < 0) { q - 1 } else { q })
                }
                _ => return Err(self.non_affine(start)),
            };
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<AffineExpr, LoopNestError> {
        if let Some(Tok::Sym('-')) = self.peek() {
            self.pos += 1;
            return Ok(self.unary()?.scale(-1));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<AffineExpr, LoopNestError> {
        let col = self.col();
        match self.peek().cloned() {
            Some(Tok::Int(v)) => {
                self.pos += 1;
                Ok(AffineExpr::constant(v))
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if let Some(&v) = self.env.params.get(&name) {
                    Ok(AffineExpr::constant(v))
                } else if let Some(e) = self.env.lets.get(&name) {
                    Ok(e.clone())
                } else if self.env.loop_vars.contains(&name) {
                    Ok(AffineExpr::var(name))
                } else {
                    Err(LoopNestError::UnboundParameter { line: self.line, name })
                }
            }
            Some(Tok::Sym('(')) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(t) => Err(err(self.line, col, format!("unexpected {}", describe(&t)))),
            None => Err(err(self.line, col, "expected an expression")),
        }
    }

    fn expect(&mut self, c: char) -> Result<(), LoopNestError> {
        match self.peek() {
            Some(Tok::Sym(x)) if *x == c => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => Err(err(self.line, self.col(), format!("expected `{c}`, found {}", describe(t)))),
            None => Err(err(self.line, self.col(), format!("expected `{c}`"))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Sym(c) => format!("`{c}`"),
    }
}

/// One logical line with its position.
struct Line<'a> {
    no: usize,
    keyword: &'a str,
    /// Text after the keyword and its 1-based starting column.
    rest: &'a str,
    rest_col: usize,
}

impl Line<'_> {
    fn verbatim(&self) -> String {
        self.rest.trim().to_string()
    }

    fn tokens(&self) -> Result<Vec<Token>, LoopNestError> {
        let code = self.rest.split('#').next().unwrap_or("");
        tokenize(code, self.no, self.rest_col)
    }

    fn parse_expr(&self, env: &Env, toks: &[Token]) -> Result<(AffineExpr, String), LoopNestError> {
        let mut p = ExprParser { toks, pos: 0, line: self.no, env, src: self.rest, base: self.rest_col };
        if toks.is_empty() {
            return Err(err(self.no, self.rest_col, "expected an expression"));
        }
        let e = p.expr()?;
        if p.pos != toks.len() {
            return Err(err(self.no, toks[p.pos].col, format!("unexpected {}", describe(&toks[p.pos].tok))));
        }
        Ok((e, p.text(0)))
    }
}

fn ident(line: &Line, t: Option<&Token>, what: &str) -> Result<String, LoopNestError> {
    match t {
        Some(Token { tok: Tok::Ident(s), .. }) => Ok(s.clone()),
        Some(t) => Err(err(line.no, t.col, format!("expected {what}, found {}", describe(&t.tok)))),
        None => Err(err(line.no, line.rest_col, format!("expected {what}"))),
    }
}

fn keyword_pos(toks: &[Token], kw: &str) -> Option<usize> {
    toks.iter().position(|t| t.tok == Tok::Ident(kw.to_string()))
}

enum Block {
    Top,
    Statement(Statement, usize),
    Microkernel(MicrokernelSpec, usize),
}

struct Builder {
    env: Env,
    params: Vec<(String, i64)>,
    annotations: Vec<String>,
    loops: Vec<Loop>,
    lets: Vec<Let>,
    stmt: Option<Statement>,
    microkernel: Option<(MicrokernelSpec, usize)>,
}

/// Parses a nest-description document.
pub fn parse_nest(text: &str) -> Result<LoopNest, LoopNestError> {
    let mut b = Builder {
        env: Env::default(),
        params: Vec::new(),
        annotations: Vec::new(),
        loops: Vec::new(),
        lets: Vec::new(),
        stmt: None,
        microkernel: None,
    };
    let mut block = Block::Top;
    let mut last_line = 0;
    for (i, raw) in text.lines().enumerate() {
        let no = i + 1;
        last_line = no;
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = raw.chars().count() - trimmed.chars().count();
        let kw_len = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
        let keyword = &trimmed[..kw_len];
        let line = Line {
            no,
            keyword,
            rest: &trimmed[kw_len..],
            rest_col: indent + keyword.chars().count() + 1,
        };
        block = match block {
            Block::Top => b.top(&line)?,
            Block::Statement(stmt, start) => b.in_statement(&line, stmt, start)?,
            Block::Microkernel(spec, start) => b.in_microkernel(&line, spec, start)?,
        };
    }
    match block {
        Block::Top => {}
        Block::Statement(_, start) | Block::Microkernel(_, start) => {
            return Err(err(last_line.max(start), 1, format!("block opened on line {start} is missing `end`")));
        }
    }
    b.finish(last_line)
}

impl Builder {
    fn top(&mut self, line: &Line) -> Result<Block, LoopNestError> {
        match line.keyword {
            "param" => {
                let toks = line.tokens()?;
                let name = ident(line, toks.first(), "parameter name")?;
                self.check_fresh(line, &name, toks[0].col)?;
                match toks.get(1) {
                    Some(Token { tok: Tok::Sym('='), .. }) => {}
                    _ => return Err(err(line.no, toks.get(1).map_or(line.rest_col, |t| t.col), "expected `=`")),
                }
                let (e, text) = line.parse_expr(&self.env, &toks[2..])?;
                let v = e.as_constant().ok_or(LoopNestError::NonAffineExpression { line: line.no, text })?;
                self.env.params.insert(name.clone(), v);
                self.params.push((name, v));
            }
            "loop" => {
                if self.stmt.is_some() {
                    return Err(LoopNestError::NotSupported(format!(
                        "line {}: loops after the statement (imperfect nest)",
                        line.no
                    )));
                }
                let toks = line.tokens()?;
                let var = ident(line, toks.first(), "loop variable")?;
                self.check_fresh(line, &var, toks[0].col)?;
                let lo_kw = keyword_pos(&toks, "lower");
                let up_kw = keyword_pos(&toks, "upper");
                let (Some(lo_kw), Some(up_kw)) = (lo_kw, up_kw) else {
                    return Err(err(line.no, line.rest_col, "expected `loop VAR lower EXPR upper EXPR [step N]`"));
                };
                if lo_kw != 1 || up_kw < lo_kw {
                    return Err(err(line.no, toks[1.min(toks.len() - 1)].col, "expected `lower` after the loop variable"));
                }
                let step_kw = keyword_pos(&toks, "step").unwrap_or(toks.len());
                if step_kw < up_kw {
                    return Err(err(line.no, toks[step_kw].col, "`step` must follow `upper`"));
                }
                let (lower, lower_text) = line.parse_expr(&self.env, &toks[lo_kw + 1..up_kw])?;
                let (upper, upper_text) = line.parse_expr(&self.env, &toks[up_kw + 1..step_kw])?;
                let step = if step_kw < toks.len() {
                    let (e, text) = line.parse_expr(&self.env, &toks[step_kw + 1..])?;
                    match e.as_constant() {
                        Some(s) if s > 0 => s,
                        _ => {
                            return Err(err(
                                line.no,
                                toks[step_kw].col,
                                format!("step `{text}` must be a positive constant"),
                            ))
                        }
                    }
                } else {
                    1
                };
                self.env.loop_vars.push(var.clone());
                self.loops.push(Loop {
                    var,
                    lower,
                    upper,
                    extra_upper: None,
                    step,
                    tag: LoopTag::Normal,
                    origin: LoopOrigin::Source { lower_text, upper_text },
                });
            }
            "let" => {
                let toks = line.tokens()?;
                let name = ident(line, toks.first(), "name")?;
                self.check_fresh(line, &name, toks[0].col)?;
                match toks.get(1) {
                    Some(Token { tok: Tok::Sym('='), .. }) => {}
                    _ => return Err(err(line.no, toks.get(1).map_or(line.rest_col, |t| t.col), "expected `=`")),
                }
                let (expr, text) = line.parse_expr(&self.env, &toks[2..])?;
                self.env.lets.insert(name.clone(), expr.clone());
                self.lets.push(Let { name, expr, text });
            }
            "annotation" => self.annotations.push(line.verbatim()),
            "statement" => {
                if self.stmt.is_some() {
                    return Err(LoopNestError::NotSupported(format!(
                        "line {}: more than one statement",
                        line.no
                    )));
                }
                let toks = line.tokens()?;
                let id = ident(line, toks.first(), "statement name")?;
                let stmt = Statement { id, refs: Vec::new(), body: None };
                return Ok(Block::Statement(stmt, line.no));
            }
            "microkernel" => {
                if self.microkernel.is_some() {
                    return Err(err(line.no, 1, "duplicate microkernel block"));
                }
                let toks = line.tokens()?;
                let callee = ident(line, toks.first(), "microkernel function name")?;
                let spec = MicrokernelSpec { callee, band_loop_vars: Vec::new(), call_args: Vec::new() };
                return Ok(Block::Microkernel(spec, line.no));
            }
            other => return Err(err(line.no, line.rest_col - other.chars().count(), format!("unknown directive `{other}`"))),
        }
        Ok(Block::Top)
    }

    fn check_fresh(&self, line: &Line, name: &str, col: usize) -> Result<(), LoopNestError> {
        if self.env.params.contains_key(name) || self.env.lets.contains_key(name) || self.env.loop_vars.iter().any(|v| v == name)
        {
            return Err(err(line.no, col, format!("`{name}` is already defined")));
        }
        Ok(())
    }

    fn in_statement(&mut self, line: &Line, mut stmt: Statement, start: usize) -> Result<Block, LoopNestError> {
        match line.keyword {
            "read" | "write" => {
                let mode = if line.keyword == "read" { AccessMode::Read } else { AccessMode::Write };
                let r = self.parse_ref(line, mode)?;
                if let Some(prev) = stmt.refs.iter().find(|p| p.array == r.array && p.index.len() != r.index.len()) {
                    return Err(err(
                        line.no,
                        line.rest_col,
                        format!("`{}` used with {} and {} subscripts", r.array, prev.index.len(), r.index.len()),
                    ));
                }
                stmt.refs.push(r);
            }
            "body" => stmt.body = Some(line.verbatim()),
            "end" => {
                if stmt.refs.is_empty() {
                    return Err(err(line.no, 1, format!("statement `{}` has no references", stmt.id)));
                }
                self.stmt = Some(stmt);
                return Ok(Block::Top);
            }
            other => {
                return Err(err(
                    line.no,
                    line.rest_col - other.chars().count(),
                    format!("unexpected `{other}` in statement block opened on line {start}"),
                ))
            }
        }
        Ok(Block::Statement(stmt, start))
    }

    fn parse_ref(&self, line: &Line, mode: AccessMode) -> Result<ArrayRef, LoopNestError> {
        let toks = line.tokens()?;
        let array = ident(line, toks.first(), "array name")?;
        let mut index = Vec::new();
        let mut i = 1;
        while i < toks.len() {
            if toks[i].tok != Tok::Sym('[') {
                return Err(err(line.no, toks[i].col, format!("expected `[`, found {}", describe(&toks[i].tok))));
            }
            let mut depth = 0;
            let close = (i..toks.len()).find(|&j| {
                match toks[j].tok {
                    Tok::Sym('[') => depth += 1,
                    Tok::Sym(']') => depth -= 1,
                    _ => {}
                }
                depth == 0
            });
            let Some(close) = close else {
                return Err(err(line.no, toks[i].col, "unclosed `[`"));
            };
            let (e, _) = line.parse_expr(&self.env, &toks[i + 1..close])?;
            index.push(e);
            i = close + 1;
        }
        let text = line.rest.split('#').next().unwrap_or("").trim().to_string();
        Ok(ArrayRef { array, index, text, mode })
    }

    fn in_microkernel(&mut self, line: &Line, mut spec: MicrokernelSpec, start: usize) -> Result<Block, LoopNestError> {
        match line.keyword {
            "band" => {
                for t in line.tokens()? {
                    spec.band_loop_vars.push(ident(line, Some(&t), "band loop variable")?);
                }
            }
            "arg" => spec.call_args.push(line.verbatim()),
            "end" => {
                self.microkernel = Some((spec, start));
                return Ok(Block::Top);
            }
            other => {
                return Err(err(
                    line.no,
                    line.rest_col - other.chars().count(),
                    format!("unexpected `{other}` in microkernel block opened on line {start}"),
                ))
            }
        }
        Ok(Block::Microkernel(spec, start))
    }

    fn finish(mut self, last_line: usize) -> Result<LoopNest, LoopNestError> {
        let stmt = self.stmt.ok_or_else(|| err(last_line.max(1), 1, "document has no statement"))?;
        if self.loops.is_empty() {
            return Err(err(last_line.max(1), 1, "document has no loops"));
        }
        let microkernel = match self.microkernel {
            None => None,
            Some((spec, at)) => {
                let k = spec.band_loop_vars.len();
                let inner: Vec<&str> = self.loops.iter().rev().take(k).rev().map(|l| l.var.as_str()).collect();
                if k == 0 || k >= self.loops.len() || inner != spec.band_loop_vars {
                    return Err(err(
                        at,
                        1,
                        format!("microkernel band `{}` must name the innermost loops", spec.band_loop_vars.join(" ")),
                    ));
                }
                let n = self.loops.len();
                for l in &mut self.loops[n - k..] {
                    l.tag = LoopTag::MicrokernelBand;
                }
                Some(spec)
            }
        };
        Ok(LoopNest {
            params: self.params,
            annotations: self.annotations,
            loops: self.loops,
            lets: self.lets,
            stmt,
            microkernel,
            body: Body::Inline,
        })
    }
}
