//! Closed-form expressions extracted from fully snapped networks.
//!
//! The tree is kept canonical: affine-basis nodes carry no additive
//! constant (those live in the enclosing sum's offset), identity wrappers
//! collapse into slopes, and sums are flat. Canonical form is what makes
//! `parse(render(e)) == e` a structural equality and not just a numeric
//! coincidence.

use crate::error::{Error, Result};
use crate::network::{EdgeActivation, KanNetwork};
use crate::symbolic::library::BasisId;
use std::collections::HashMap;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub enum SymbolicExpression {
    /// A raw input feature.
    Var(String),
    Const(f64),
    /// `c * g(a * arg + b)`; the trailing `+ d` of a snapped edge lives in
    /// the surrounding `Sum`. Identity nodes are canonical with `b = 0`,
    /// `c = 1`, acting as pure slopes.
    Affine {
        basis: BasisId,
        a: f64,
        b: f64,
        c: f64,
        arg: Box<SymbolicExpression>,
    },
    /// `terms[0] + terms[1] + ... + offset`, with no `Const` or nested
    /// `Sum` among the terms.
    Sum {
        terms: Vec<SymbolicExpression>,
        offset: f64,
    },
}

use SymbolicExpression::{Affine, Const, Sum, Var};

/// Canonicalizing sum constructor: flattens nested sums, folds constants
/// into the offset, drops vanished terms, unwraps trivial wrappers.
pub fn sum_of(terms: Vec<SymbolicExpression>, offset: f64) -> SymbolicExpression {
    let mut flat = Vec::with_capacity(terms.len());
    let mut total = offset;
    for term in terms {
        match term {
            Const(v) => total += v,
            Sum {
                terms: inner,
                offset: o,
            } => {
                total += o;
                flat.extend(inner);
            }
            Affine { c, .. } if c == 0.0 => {}
            other => flat.push(other),
        }
    }
    if flat.is_empty() {
        Const(total)
    } else if flat.len() == 1 && total == 0.0 {
        flat.pop().unwrap()
    } else {
        Sum {
            terms: flat,
            offset: total,
        }
    }
}

/// `slope * expr`, preserving canonical form. `slope` must be nonzero.
fn scaled(slope: f64, expr: SymbolicExpression) -> SymbolicExpression {
    debug_assert!(slope != 0.0);
    if slope == 1.0 {
        return expr;
    }
    match expr {
        Const(v) => Const(slope * v),
        Var(n) => Affine {
            basis: BasisId::Identity,
            a: slope,
            b: 0.0,
            c: 1.0,
            arg: Box::new(Var(n)),
        },
        Affine {
            basis: BasisId::Identity,
            a,
            b,
            c,
            arg,
        } => {
            // canonical identity has b = 0, c = 1, but fold generally
            let inner = scaled(slope * a * c, *arg);
            if b == 0.0 {
                inner
            } else {
                sum_of(vec![inner], slope * c * b)
            }
        }
        Affine {
            basis,
            a,
            b,
            c,
            arg,
        } => Affine {
            basis,
            a,
            b,
            c: slope * c,
            arg,
        },
        Sum { terms, offset } => sum_of(
            terms.into_iter().map(|t| scaled(slope, t)).collect(),
            slope * offset,
        ),
    }
}

/// View an expression as `s * core + t` where `core` is not itself an
/// affine wrapper. Falls back to `(1, 0, expr)`.
fn as_affine(expr: &SymbolicExpression) -> (f64, f64, &SymbolicExpression) {
    match expr {
        Affine {
            basis: BasisId::Identity,
            a,
            b,
            c,
            arg,
        } => {
            let (s, t, core) = as_affine(arg);
            (c * a * s, c * (a * t + b), core)
        }
        Sum { terms, offset } if terms.len() == 1 => {
            let (s, t, core) = as_affine(&terms[0]);
            (s, t + offset, core)
        }
        other => (1.0, 0.0, other),
    }
}

/// Expression for one snapped edge applied to a child expression.
/// Returns the non-constant term (if any) and the constant shift that the
/// enclosing sum should absorb.
fn edge_term(
    basis: BasisId,
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    child: &SymbolicExpression,
) -> (Option<SymbolicExpression>, f64) {
    if c == 0.0 {
        return (None, d);
    }
    if basis == BasisId::Constant {
        return (None, c + d);
    }
    let (s, t, core) = as_affine(child);
    let a2 = a * s;
    let b2 = a * t + b;
    if let Const(v) = core {
        return (None, c * basis.eval_guarded(a2 * v + b2) + d);
    }
    if a2 == 0.0 {
        return (None, c * basis.eval_guarded(b2) + d);
    }
    if basis == BasisId::Identity {
        // c * (a2 * core + b2) = (c * a2) * core + c * b2
        return (Some(scaled(c * a2, core.clone())), c * b2 + d);
    }
    (
        Some(Affine {
            basis,
            a: a2,
            b: b2,
            c,
            arg: Box::new(core.clone()),
        }),
        d,
    )
}

/// Turn a fully snapped network into one closed-form expression over the
/// raw (unnormalized) features, producing raw-unit outputs.
pub fn emit_formula(net: &KanNetwork) -> Result<SymbolicExpression> {
    if net.n_outputs() != 1 {
        return Err(Error::InvalidShape(
            "formula emission requires a single output node".into(),
        ));
    }
    let mut pending = Vec::new();
    for (l, layer) in net.layers().iter().enumerate() {
        for j in 0..layer.n_out() {
            for i in 0..layer.n_in() {
                if matches!(layer.edge(j, i), EdgeActivation::Spline { .. }) {
                    pending.push(format!("layers[{l}].edges[{}]", j * layer.n_in() + i));
                }
            }
        }
    }
    if !pending.is_empty() {
        return Err(Error::Unsnapped(format!(
            "still spline-backed: {}",
            pending.join(", ")
        )));
    }

    // normalized inputs as affine wrappers over the raw features; these are
    // always consumed by the first layer's as_affine fold
    let norm = net.input_normalizer();
    let mut nodes: Vec<SymbolicExpression> = net
        .feature_names()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (s, t) = norm.feature_affine(i);
            Affine {
                basis: BasisId::Identity,
                a: s,
                b: t,
                c: 1.0,
                arg: Box::new(Var(name.clone())),
            }
        })
        .collect();

    for layer in net.layers() {
        let mut next = Vec::with_capacity(layer.n_out());
        for j in 0..layer.n_out() {
            let mut terms = Vec::new();
            let mut offset = 0.0;
            for (i, child) in nodes.iter().enumerate() {
                match layer.edge(j, i) {
                    EdgeActivation::Zero => {}
                    EdgeActivation::Symbolic { basis, a, b, c, d } => {
                        let (term, shift) = edge_term(*basis, *a, *b, *c, *d, child);
                        offset += shift;
                        if let Some(t) = term {
                            terms.push(t);
                        }
                    }
                    EdgeActivation::Spline { .. } => unreachable!("checked above"),
                }
            }
            next.push(sum_of(terms, offset));
        }
        nodes = next;
    }

    let denorm = net.output_denormalizer();
    let out = nodes.pop().unwrap();
    let scaled_out = match out {
        Const(v) => Const(denorm.scale * v + denorm.offset),
        Sum { terms, offset } => sum_of(
            terms.into_iter().map(|t| scaled(denorm.scale, t)).collect(),
            denorm.scale * offset + denorm.offset,
        ),
        term => sum_of(vec![scaled(denorm.scale, term)], denorm.offset),
    };
    Ok(scaled_out)
}

impl SymbolicExpression {
    /// Evaluate against named variable values.
    pub fn eval(&self, vars: &HashMap<String, f64>) -> Result<f64> {
        match self {
            Var(name) => vars
                .get(name)
                .copied()
                .ok_or_else(|| Error::MissingColumn(name.clone())),
            Const(v) => Ok(*v),
            Affine { basis, a, b, c, arg } => {
                Ok(c * basis.eval_guarded(a * arg.eval(vars)? + b))
            }
            Sum { terms, offset } => {
                let mut total = *offset;
                for t in terms {
                    total += t.eval(vars)?;
                }
                Ok(total)
            }
        }
    }

    /// Number of nodes, a rough complexity measure for reports.
    pub fn size(&self) -> usize {
        match self {
            Var(_) | Const(_) => 1,
            Affine { arg, .. } => 1 + arg.size(),
            Sum { terms, .. } => 1 + terms.iter().map(|t| t.size()).sum::<usize>(),
        }
    }

    /// Shortest-round-trip rendering; `parse` reconstructs the tree exactly.
    pub fn render_full(&self) -> String {
        self.render(None)
    }

    /// Human-facing rendering with numbers at the given precision and
    /// trailing zeros trimmed. Not meant to be parsed back.
    pub fn render_rounded(&self, decimals: usize) -> String {
        self.render(Some(decimals))
    }

    fn render(&self, decimals: Option<usize>) -> String {
        let mut out = String::new();
        self.write(&mut out, decimals);
        out
    }

    fn write(&self, out: &mut String, dec: Option<usize>) {
        match self {
            Var(name) => out.push_str(name),
            Const(v) => out.push_str(&fmt_num(*v, dec)),
            Affine { basis, a, b, c, arg } => {
                write_affine(out, *basis, *a, *b, *c, arg, dec);
            }
            Sum { terms, offset } => {
                for (k, term) in terms.iter().enumerate() {
                    let mut piece = String::new();
                    term.write(&mut piece, dec);
                    if k == 0 {
                        out.push_str(&piece);
                    } else if let Some(rest) = piece.strip_prefix('-') {
                        out.push_str(" - ");
                        out.push_str(rest);
                    } else {
                        out.push_str(" + ");
                        out.push_str(&piece);
                    }
                }
                if *offset != 0.0 {
                    push_signed(out, *offset, dec);
                }
            }
        }
    }
}

fn write_affine(
    out: &mut String,
    basis: BasisId,
    a: f64,
    b: f64,
    c: f64,
    arg: &SymbolicExpression,
    dec: Option<usize>,
) {
    let inner = render_inner(a, b, arg, dec);
    match basis {
        BasisId::Identity => {
            // canonical identity is a bare slope: c = 1, b = 0
            if c == 1.0 && b == 0.0 {
                out.push_str(&inner);
            } else {
                let _ = write!(out, "{} * ({inner})", fmt_num(c, dec));
            }
            return;
        }
        BasisId::Reciprocal => {
            let _ = write!(out, "{} / ({inner})", fmt_num(c, dec));
            return;
        }
        _ => {}
    }
    if c != 1.0 {
        let _ = write!(out, "{} * ", fmt_num(c, dec));
    }
    match basis {
        BasisId::Constant => out.push('1'),
        BasisId::Square => {
            let _ = write!(out, "({inner})^2");
        }
        BasisId::Cube => {
            let _ = write!(out, "({inner})^3");
        }
        BasisId::Gaussian => {
            let _ = write!(out, "exp(-({inner})^2)");
        }
        named => {
            let _ = write!(out, "{}({inner})", named.name());
        }
    }
}

fn render_inner(a: f64, b: f64, arg: &SymbolicExpression, dec: Option<usize>) -> String {
    let needs_parens = matches!(arg, Affine { .. } | Sum { .. });
    let arg_s = if needs_parens {
        format!("({})", arg.render(dec))
    } else {
        arg.render(dec)
    };
    let mut s = if a == 1.0 {
        arg_s
    } else {
        format!("{} * {}", fmt_num(a, dec), arg_s)
    };
    if b != 0.0 {
        push_signed(&mut s, b, dec);
    }
    s
}

fn push_signed(out: &mut String, v: f64, dec: Option<usize>) {
    if v < 0.0 {
        let _ = write!(out, " - {}", fmt_num(-v, dec));
    } else {
        let _ = write!(out, " + {}", fmt_num(v, dec));
    }
}

fn fmt_num(v: f64, dec: Option<usize>) -> String {
    match dec {
        // Debug formatting of f64 is the shortest string that parses back
        // to the same bits, which is exactly what round-tripping needs
        None => format!("{v:?}"),
        Some(places) => {
            let mut s = format!("{v:.places$}");
            if s.contains('.') {
                while s.ends_with('0') {
                    s.pop();
                }
                if s.ends_with('.') {
                    s.pop();
                }
            }
            if s == "-0" {
                s = "0".into();
            }
            s
        }
    }
}

/// Parse a formula in the canonical rendered grammar back into an
/// expression tree.
pub fn parse(text: &str) -> Result<SymbolicExpression> {
    let tokens = lex(text)?;
    let mut p = Parser {
        tokens,
        at: 0,
        end: text.len(),
    };
    let ast = p.expr()?;
    p.expect_end()?;
    norm_expr(&ast)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    Open,
    Close,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let start = i;
        match bytes[i] {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' => {
                toks.push((Tok::Plus, start));
                i += 1;
            }
            b'-' => {
                toks.push((Tok::Minus, start));
                i += 1;
            }
            b'*' => {
                toks.push((Tok::Star, start));
                i += 1;
            }
            b'/' => {
                toks.push((Tok::Slash, start));
                i += 1;
            }
            b'^' => {
                toks.push((Tok::Caret, start));
                i += 1;
            }
            b'(' => {
                toks.push((Tok::Open, start));
                i += 1;
            }
            b')' => {
                toks.push((Tok::Close, start));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && matches!(bytes[i], b'0'..=b'9' | b'.') {
                    i += 1;
                }
                if i < bytes.len() && matches!(bytes[i], b'e' | b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && matches!(bytes[j], b'+' | b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        i = j;
                        while i < bytes.len() && bytes[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let lit = &text[start..i];
                let v: f64 = lit.parse().map_err(|_| Error::FormulaParse {
                    offset: start,
                    message: format!("bad number literal '{lit}'"),
                })?;
                toks.push((Tok::Num(v), start));
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                while i < bytes.len()
                    && matches!(bytes[i], b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'_')
                {
                    i += 1;
                }
                toks.push((Tok::Ident(text[start..i].to_string()), start));
            }
            other => {
                return Err(Error::FormulaParse {
                    offset: start,
                    message: format!("unexpected character '{}'", other as char),
                })
            }
        }
    }
    Ok(toks)
}

#[derive(Debug, Clone)]
enum Ast {
    Num(f64),
    Var(String),
    Call(String, Box<Ast>),
    Paren(Box<Ast>),
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Pow(Box<Ast>, u32),
}

struct Parser {
    tokens: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.at).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.at).map_or(self.end, |&(_, o)| o)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.at).map(|(t, _)| t.clone());
        self.at += 1;
        t
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::FormulaParse {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn expect_end(&self) -> Result<()> {
        if self.at == self.tokens.len() {
            Ok(())
        } else {
            self.fail("trailing input after expression")
        }
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut left = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.bump();
                    let right = self.term()?;
                    left = Ast::Add(Box::new(left), Box::new(right));
                }
                Some(Tok::Minus) => {
                    self.bump();
                    let right = self.term()?;
                    left = Ast::Sub(Box::new(left), Box::new(right));
                }
                _ => return Ok(left),
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut left = self.factor()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.bump();
                    let right = self.factor()?;
                    left = Ast::Mul(Box::new(left), Box::new(right));
                }
                Some(Tok::Slash) => {
                    self.bump();
                    let right = self.factor()?;
                    left = Ast::Div(Box::new(left), Box::new(right));
                }
                _ => return Ok(left),
            }
        }
    }

    fn factor(&mut self) -> Result<Ast> {
        if matches!(self.peek(), Some(Tok::Minus)) {
            self.bump();
            let inner = self.factor()?;
            return Ok(Ast::Neg(Box::new(inner)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Ast> {
        let base = self.atom()?;
        if matches!(self.peek(), Some(Tok::Caret)) {
            self.bump();
            match self.bump() {
                Some(Tok::Num(v)) if v.fract() == 0.0 && (2.0..=9.0).contains(&v) => {
                    Ok(Ast::Pow(Box::new(base), v as u32))
                }
                _ => {
                    self.at -= 1;
                    self.fail("exponent must be a small integer")
                }
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Ast> {
        match self.bump() {
            Some(Tok::Num(v)) => Ok(Ast::Num(v)),
            Some(Tok::Open) => {
                let inner = self.expr()?;
                match self.bump() {
                    Some(Tok::Close) => Ok(Ast::Paren(Box::new(inner))),
                    _ => {
                        self.at -= 1;
                        self.fail("expected ')'")
                    }
                }
            }
            Some(Tok::Ident(name)) => {
                if matches!(self.peek(), Some(Tok::Open)) {
                    self.bump();
                    let inner = self.expr()?;
                    match self.bump() {
                        Some(Tok::Close) => Ok(Ast::Call(name, Box::new(inner))),
                        _ => {
                            self.at -= 1;
                            self.fail("expected ')' after function argument")
                        }
                    }
                } else {
                    Ok(Ast::Var(name))
                }
            }
            _ => {
                self.at -= 1;
                self.fail("expected a number, name, or '('")
            }
        }
    }
}

/// Fold unary minus over numeric literals.
fn as_num(ast: &Ast) -> Option<f64> {
    match ast {
        Ast::Num(v) => Some(*v),
        Ast::Neg(inner) => as_num(inner).map(|v| -v),
        Ast::Paren(inner) => as_num(inner),
        _ => None,
    }
}

/// Split an Add/Sub spine into signed parts.
fn split_terms<'a>(ast: &'a Ast, sign: f64, out: &mut Vec<(f64, &'a Ast)>) {
    match ast {
        Ast::Add(l, r) => {
            split_terms(l, sign, out);
            split_terms(r, sign, out);
        }
        Ast::Sub(l, r) => {
            split_terms(l, sign, out);
            split_terms(r, -sign, out);
        }
        other => out.push((sign, other)),
    }
}

fn norm_expr(ast: &Ast) -> Result<SymbolicExpression> {
    let mut parts = Vec::new();
    split_terms(ast, 1.0, &mut parts);
    let mut terms = Vec::new();
    let mut offset = 0.0;
    for (sign, part) in parts {
        if let Some(v) = as_num(part) {
            offset += sign * v;
            continue;
        }
        let e = norm_term(part)?;
        match e {
            Const(v) => offset += sign * v,
            other => terms.push(if sign < 0.0 { scaled(-1.0, other) } else { other }),
        }
    }
    Ok(sum_of(terms, offset))
}

fn norm_term(ast: &Ast) -> Result<SymbolicExpression> {
    match ast {
        Ast::Num(v) => Ok(Const(*v)),
        Ast::Var(name) => Ok(Var(name.clone())),
        Ast::Paren(inner) => norm_expr(inner),
        Ast::Add(..) | Ast::Sub(..) => norm_expr(ast),
        Ast::Neg(inner) => {
            let e = norm_term(inner)?;
            Ok(match e {
                Const(v) => Const(-v),
                other => scaled(-1.0, other),
            })
        }
        Ast::Mul(l, r) => {
            let (coeff, rest) = if let Some(v) = as_num(l) {
                (v, r)
            } else if let Some(v) = as_num(r) {
                (v, l)
            } else {
                return Err(Error::FormulaParse {
                    offset: 0,
                    message: "products of two non-constant factors are not supported".into(),
                });
            };
            let e = norm_term(rest)?;
            Ok(match e {
                Const(v) => Const(coeff * v),
                other if coeff == 0.0 => {
                    // 0 * anything: the term vanishes
                    let _ = other;
                    Const(0.0)
                }
                other => scaled(coeff, other),
            })
        }
        Ast::Div(l, r) => {
            let Some(c) = as_num(l) else {
                return Err(Error::FormulaParse {
                    offset: 0,
                    message: "only constant numerators are supported".into(),
                });
            };
            if let Some(v) = as_num(r) {
                return Ok(Const(c / v));
            }
            let (a, b, arg) = affine_of_ast(r)?;
            Ok(Affine {
                basis: BasisId::Reciprocal,
                a,
                b,
                c,
                arg: Box::new(arg),
            })
        }
        Ast::Pow(base, exp) => {
            let basis = match exp {
                2 => BasisId::Square,
                3 => BasisId::Cube,
                _ => {
                    return Err(Error::FormulaParse {
                        offset: 0,
                        message: format!("unsupported exponent {exp}"),
                    })
                }
            };
            let (a, b, arg) = affine_of_ast(base)?;
            Ok(Affine {
                basis,
                a,
                b,
                c: 1.0,
                arg: Box::new(arg),
            })
        }
        Ast::Call(name, inner) => {
            // exp(-(u)^2) is the gaussian's rendered shape
            if name == "exp" {
                if let Ast::Neg(negged) = &**inner {
                    if let Ast::Pow(base, 2) = &**negged {
                        let (a, b, arg) = affine_of_ast(base)?;
                        return Ok(Affine {
                            basis: BasisId::Gaussian,
                            a,
                            b,
                            c: 1.0,
                            arg: Box::new(arg),
                        });
                    }
                }
            }
            let basis = BasisId::from_name(name).ok_or_else(|| Error::FormulaParse {
                offset: 0,
                message: format!("unknown function '{name}'"),
            })?;
            let (a, b, arg) = affine_of_ast(inner)?;
            Ok(Affine {
                basis,
                a,
                b,
                c: 1.0,
                arg: Box::new(arg),
            })
        }
    }
}

/// Interpret an AST as `a * CORE + b` for a function argument position.
fn affine_of_ast(ast: &Ast) -> Result<(f64, f64, SymbolicExpression)> {
    let inner = match ast {
        Ast::Paren(p) => p,
        other => other,
    };
    let mut parts = Vec::new();
    split_terms(inner, 1.0, &mut parts);
    let mut b = 0.0;
    let mut core: Option<(f64, &Ast)> = None;
    let mut multi = false;
    for (sign, part) in &parts {
        if let Some(v) = as_num(part) {
            b += sign * v;
        } else if core.is_some() {
            multi = true;
        } else {
            core = Some((*sign, part));
        }
    }
    if multi {
        // several non-constant terms: the whole thing is the argument
        return Ok((1.0, 0.0, norm_expr(inner)?));
    }
    let Some((sign, part)) = core else {
        return Err(Error::FormulaParse {
            offset: 0,
            message: "function argument has no variable part".into(),
        });
    };
    // peel a leading numeric slope off the remaining term
    let (slope, core_ast) = match part {
        Ast::Mul(l, r) => {
            if let Some(v) = as_num(l) {
                (v, &**r)
            } else if let Some(v) = as_num(r) {
                (v, &**l)
            } else {
                (1.0, part)
            }
        }
        Ast::Neg(x) => (-1.0, &**x),
        other => (1.0, other),
    };
    let arg = match core_ast {
        Ast::Paren(p) => norm_expr(p)?,
        Ast::Var(name) => Var(name.clone()),
        other => norm_term(other)?,
    };
    Ok((sign * slope, b, arg))
}
