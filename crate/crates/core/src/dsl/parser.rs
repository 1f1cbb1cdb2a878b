use std::collections::{BTreeMap, BTreeSet};

use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, ParseErrorKind, SourceSpan};
use crate::scm::{cross_product, key, BinOp, Cpt, Domain, Expr, Func, Mechanism, NoiseSpec, Scm, ValueKey};

const KEYWORDS: [&str; 4] = ["var", "cpt", "real", "edges"];
const MAX_DEPTH: usize = 200;
const DISTRIBUTIONS: [&str; 4] = ["normal", "bernoulli", "uniform", "point"];

#[derive(Debug)]
struct DistCall {
    name: String,
    args: Vec<f64>,
    span: SourceSpan,
}

#[derive(Debug)]
struct CptRow {
    assigns: Vec<(String, f64, SourceSpan)>,
    pmf: Vec<f64>,
    span: SourceSpan,
}

#[derive(Debug)]
enum Body {
    Dist(DistCall),
    Expr {
        expr: Expr,
        vars: Vec<(String, SourceSpan)>,
        noise: Option<DistCall>,
    },
    Cpt {
        span: SourceSpan,
        rows: Vec<CptRow>,
    },
}

#[derive(Debug)]
struct Decl {
    name: String,
    name_span: SourceSpan,
    domain: Option<(Domain, SourceSpan)>,
    body: Body,
}

type PResult<T> = Result<T, ParseError>;

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    source: &'a str,
    // expression-local state
    vars: Vec<(String, SourceSpan)>,
    noise: Option<DistCall>,
    depth: usize,
    errors: Vec<ParseError>,
}

pub(crate) fn parse(source: &str) -> Result<Scm, Vec<ParseError>> {
    let (tokens, mut errors) = tokenize(source);
    let mut p = Parser {
        tokens,
        pos: 0,
        source,
        vars: Vec::new(),
        noise: None,
        depth: 0,
        errors: Vec::new(),
    };
    let mut decls = Vec::new();
    while !p.at_end() {
        match p.decl() {
            Ok(Some(d)) => decls.push(d),
            Ok(None) => {}
            Err(e) => {
                errors.push(e);
                p.recover();
            }
        }
    }
    errors.append(&mut p.errors);
    if decls.is_empty() && errors.is_empty() {
        errors.push(ParseError::new(
            SourceSpan::new(1, 1, 1),
            ParseErrorKind::Syntax,
            "expected at least one declaration",
        ));
    }
    let scm = build(&decls, &mut errors, source);
    errors.sort_by_key(|e| (e.span.line, e.span.column));
    match scm {
        Some(scm) if errors.is_empty() => Ok(scm),
        _ => Err(errors),
    }
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn peek_at(&self, offset: usize) -> Option<&Tok> {
        self.tokens.get(self.pos + offset).map(|t| &t.tok)
    }

    /// Span of the current token, or of the last source character at end of input.
    fn here(&self) -> SourceSpan {
        match self.tokens.get(self.pos) {
            Some(t) => t.span,
            None => end_span(self.source),
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        self.pos += 1;
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> PResult<T> {
        Err(ParseError::new(self.here(), ParseErrorKind::Syntax, message))
    }

    fn unexpected<T>(&self, wanted: &str) -> PResult<T> {
        match self.peek() {
            Some(t) => self.error(format!("expected {wanted}, found {}", t.describe())),
            None => self.error(format!("expected {wanted}, found end of input")),
        }
    }

    fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, tok: &Tok, wanted: &str) -> PResult<Token> {
        if self.peek() == Some(tok) {
            Ok(self.bump())
        } else {
            self.unexpected(wanted)
        }
    }

    fn ident(&mut self, wanted: &str) -> PResult<(String, SourceSpan)> {
        match self.peek() {
            Some(Tok::Ident(_)) => {
                let t = self.bump();
                let Tok::Ident(s) = t.tok else { unreachable!() };
                Ok((s, t.span))
            }
            _ => self.unexpected(wanted),
        }
    }

    /// Skips past the next `;` (or to end of input).
    fn recover(&mut self) {
        while let Some(t) = self.peek() {
            let semi = *t == Tok::Semi;
            self.pos += 1;
            if semi {
                break;
            }
        }
    }

    fn signed_number(&mut self) -> PResult<f64> {
        let neg = self.eat(&Tok::Minus);
        match self.peek() {
            Some(Tok::Number(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(if neg { -v } else { v })
            }
            _ => self.unexpected("a number"),
        }
    }

    fn number_list(&mut self, close: Option<&Tok>) -> PResult<Vec<f64>> {
        let mut out = vec![self.signed_number()?];
        while self.eat(&Tok::Comma) {
            out.push(self.signed_number()?);
        }
        if let Some(close) = close {
            if self.peek() != Some(close) {
                return self.unexpected("`,` or closing bracket");
            }
            self.pos += 1;
        }
        Ok(out)
    }

    fn decl(&mut self) -> PResult<Option<Decl>> {
        let start = self.here();
        let Some(Tok::Ident(word)) = self.peek() else {
            return self.unexpected("`var`");
        };
        if word == "edges" {
            self.pos += 1;
            // swallow a braced block so it yields a single diagnostic
            if self.eat(&Tok::LBrace) {
                while let Some(t) = self.peek() {
                    let close = *t == Tok::RBrace;
                    self.pos += 1;
                    if close {
                        break;
                    }
                }
                self.eat(&Tok::Semi);
            } else {
                self.recover();
            }
            self.errors.push(ParseError::new(
                start,
                ParseErrorKind::Syntax,
                "explicit `edges` blocks are not supported; parents are inferred from mechanisms",
            ));
            return Ok(None);
        }
        if word != "var" {
            return self.unexpected("`var`");
        }
        self.pos += 1;
        let (name, name_span) = self.ident("a variable name")?;
        if KEYWORDS.contains(&name.as_str()) {
            return Err(ParseError::new(
                name_span,
                ParseErrorKind::Syntax,
                format!("`{name}` is a reserved word"),
            ));
        }
        let domain = if self.eat(&Tok::Colon) {
            let span = self.here();
            if self.eat(&Tok::LBrace) {
                Some((Domain::Discrete(self.number_list(Some(&Tok::RBrace))?), span))
            } else if matches!(self.peek(), Some(Tok::Ident(w)) if w == "real") {
                self.pos += 1;
                Some((Domain::Continuous, span))
            } else {
                return self.unexpected("a domain (`{...}` or `real`)");
            }
        } else {
            None
        };
        let body = match self.peek() {
            Some(Tok::Tilde) => {
                self.pos += 1;
                let (dname, span) = self.ident("a distribution")?;
                Body::Dist(self.dist_args(dname, span)?)
            }
            Some(Tok::Assign) => {
                self.pos += 1;
                self.vars.clear();
                self.noise = None;
                let expr = self.expr()?;
                Body::Expr {
                    expr,
                    vars: std::mem::take(&mut self.vars),
                    noise: self.noise.take(),
                }
            }
            Some(Tok::Ident(w)) if w == "cpt" => {
                let span = self.bump().span;
                let mut rows = Vec::new();
                while self.peek() == Some(&Tok::Pipe) {
                    rows.push(self.cpt_row()?);
                }
                if rows.is_empty() {
                    return self.unexpected("`|` starting a CPT row");
                }
                Body::Cpt { span, rows }
            }
            _ => return self.unexpected("`~`, `:=` or `cpt`"),
        };
        self.expect(&Tok::Semi, "`;`")?;
        Ok(Some(Decl {
            name,
            name_span,
            domain,
            body,
        }))
    }

    fn dist_args(&mut self, name: String, span: SourceSpan) -> PResult<DistCall> {
        if !DISTRIBUTIONS.contains(&name.as_str()) {
            return Err(ParseError::new(
                span,
                ParseErrorKind::UnknownSymbol,
                format!("unknown distribution `{name}` (expected one of {})", DISTRIBUTIONS.join(", ")),
            ));
        }
        self.expect(&Tok::LParen, "`(`")?;
        let args = self.number_list(Some(&Tok::RParen))?;
        let expected = match name.as_str() {
            "normal" => Some(2),
            "bernoulli" | "point" => Some(1),
            _ => None,
        };
        if let Some(n) = expected {
            if args.len() != n {
                return Err(ParseError::new(
                    span,
                    ParseErrorKind::Syntax,
                    format!("`{name}` takes {n} argument(s), got {}", args.len()),
                ));
            }
        }
        Ok(DistCall { name, args, span })
    }

    fn cpt_row(&mut self) -> PResult<CptRow> {
        let span = self.expect(&Tok::Pipe, "`|`")?.span;
        let mut assigns = Vec::new();
        if self.peek() != Some(&Tok::Arrow) {
            loop {
                let (parent, pspan) = self.ident("a parent name")?;
                self.expect(&Tok::Equals, "`=`")?;
                let v = self.signed_number()?;
                assigns.push((parent, v, pspan));
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
        }
        self.expect(&Tok::Arrow, "`->`")?;
        let pmf = self.number_list(None)?;
        Ok(CptRow { assigns, pmf, span })
    }

    fn enter(&mut self) -> PResult<()> {
        if self.depth >= MAX_DEPTH {
            return self.error("expression nested too deeply");
        }
        self.depth += 1;
        Ok(())
    }

    fn call_args(&mut self) -> PResult<Vec<Expr>> {
        let mut args = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            args.push(self.expr()?);
        }
        Ok(args)
    }

    fn expr(&mut self) -> PResult<Expr> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Some(Tok::Lt) => BinOp::Lt,
            Some(Tok::Le) => BinOp::Le,
            Some(Tok::Gt) => BinOp::Gt,
            Some(Tok::Ge) => BinOp::Ge,
            Some(Tok::EqEq) => BinOp::Eq,
            Some(Tok::Ne) => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.additive()?;
        if matches!(
            self.peek(),
            Some(Tok::Lt | Tok::Le | Tok::Gt | Tok::Ge | Tok::EqEq | Tok::Ne)
        ) {
            return self.error("comparisons cannot be chained; add parentheses");
        }
        Ok(Expr::bin(op, lhs, rhs))
    }

    fn additive(&mut self) -> PResult<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Plus) => BinOp::Add,
                Some(Tok::Minus) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn term(&mut self) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Star) => BinOp::Mul,
                Some(Tok::Slash) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> PResult<Expr> {
        if self.eat(&Tok::Minus) {
            self.enter()?;
            let inner = self.unary();
            self.depth -= 1;
            return Ok(Expr::neg(inner?));
        }
        self.primary()
    }

    fn primary(&mut self) -> PResult<Expr> {
        match self.peek() {
            Some(Tok::Number(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(Expr::Num(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                self.enter()?;
                let e = self.expr();
                self.depth -= 1;
                let e = e?;
                self.expect(&Tok::RParen, "`)`")?;
                Ok(e)
            }
            Some(Tok::Ident(_)) if self.peek_at(1) == Some(&Tok::LParen) => {
                let (name, span) = self.ident("a name")?;
                if DISTRIBUTIONS.contains(&name.as_str()) {
                    let call = self.dist_args(name, span)?;
                    if self.noise.is_some() {
                        return Err(ParseError::new(
                            span,
                            ParseErrorKind::Syntax,
                            "at most one noise term is allowed per mechanism",
                        ));
                    }
                    self.noise = Some(call);
                    return Ok(Expr::Noise);
                }
                let Some(func) = Func::from_name(&name) else {
                    return Err(ParseError::new(
                        span,
                        ParseErrorKind::UnknownSymbol,
                        format!("unknown function `{name}`"),
                    ));
                };
                self.pos += 1; // (
                self.enter()?;
                let args = self.call_args();
                self.depth -= 1;
                let args = args?;
                self.expect(&Tok::RParen, "`,` or `)`")?;
                let (lo, hi) = func.arity();
                if args.len() < lo || args.len() > hi {
                    return Err(ParseError::new(
                        span,
                        ParseErrorKind::Syntax,
                        format!("`{name}` called with {} argument(s)", args.len()),
                    ));
                }
                Ok(Expr::Call(func, args))
            }
            Some(Tok::Ident(_)) => {
                let (name, span) = self.ident("a name")?;
                if KEYWORDS.contains(&name.as_str()) {
                    return Err(ParseError::new(
                        span,
                        ParseErrorKind::Syntax,
                        format!("`{name}` is a reserved word"),
                    ));
                }
                self.vars.push((name.clone(), span));
                Ok(Expr::Var(name))
            }
            _ => self.unexpected("an expression"),
        }
    }
}

fn end_span(source: &str) -> SourceSpan {
    let (mut line, mut col) = (1, 0);
    let mut last = SourceSpan::new(1, 1, 1);
    for c in source.chars() {
        col += 1;
        last = SourceSpan::new(line, col, 1);
        if c == '\n' {
            line += 1;
            col = 0;
        }
    }
    last
}

fn noise_spec(call: &DistCall) -> Result<NoiseSpec, ParseError> {
    let spec = match call.name.as_str() {
        "normal" => NoiseSpec::Normal {
            mean: call.args[0],
            std: call.args[1],
        },
        "bernoulli" => NoiseSpec::Bernoulli { p: call.args[0] },
        "uniform" => NoiseSpec::Uniform {
            values: call.args.clone(),
        },
        _ => NoiseSpec::Point { value: call.args[0] },
    };
    match spec.parameter_error() {
        Some(msg) => Err(ParseError::new(call.span, ParseErrorKind::DomainMismatch, msg)),
        None => Ok(spec),
    }
}

/// Semantic pass: resolves names in declaration order and builds the model.
fn build(decls: &[Decl], errors: &mut Vec<ParseError>, source: &str) -> Option<Scm> {
    let mut domains: BTreeMap<String, Domain> = BTreeMap::new();
    let mut nodes = Vec::new();
    let before = errors.len();

    for d in decls {
        if domains.contains_key(&d.name) {
            errors.push(ParseError::new(
                d.name_span,
                ParseErrorKind::DuplicateDefinition,
                format!("variable `{}` is already declared", d.name),
            ));
            continue;
        }
        if let Some((Domain::Discrete(values), span)) = &d.domain {
            let mut sorted = values.clone();
            sorted.sort_by(f64::total_cmp);
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                errors.push(ParseError::new(
                    *span,
                    ParseErrorKind::DuplicateDefinition,
                    format!("domain of `{}` lists a value twice", d.name),
                ));
                continue;
            }
        }
        match lower(d, &domains) {
            Ok((domain, mech)) => {
                domains.insert(d.name.clone(), domain.clone());
                nodes.push((d.name.clone(), domain, mech));
            }
            Err(mut errs) => {
                // keep the name known so later references do not cascade
                let domain = d.domain.as_ref().map(|(dom, _)| dom.clone()).unwrap_or(Domain::Continuous);
                domains.insert(d.name.clone(), domain);
                errors.append(&mut errs);
            }
        }
    }
    if errors.len() > before || !errors.is_empty() {
        return None;
    }
    match Scm::from_nodes(nodes) {
        Ok(scm) => Some(scm),
        Err(e) => {
            errors.push(ParseError::new(end_span(source), ParseErrorKind::Syntax, e.to_string()));
            None
        }
    }
}

fn lower(d: &Decl, known: &BTreeMap<String, Domain>) -> Result<(Domain, Mechanism), Vec<ParseError>> {
    let declared = d.domain.as_ref().map(|(dom, _)| dom);
    let domain_span = d.domain.as_ref().map_or(d.name_span, |(_, s)| *s);
    let mismatch = |span: SourceSpan, msg: String| vec![ParseError::new(span, ParseErrorKind::DomainMismatch, msg)];
    match &d.body {
        Body::Dist(call) => {
            let spec = noise_spec(call).map_err(|e| vec![e])?;
            match spec {
                NoiseSpec::Normal { mean, std } => {
                    let domain = declared.cloned().unwrap_or(Domain::Continuous);
                    if std > 0.0 && domain != Domain::Continuous {
                        return Err(mismatch(domain_span, format!("`{}` has Gaussian noise but a discrete domain", d.name)));
                    }
                    if !domain.contains(mean) {
                        return Err(mismatch(call.span, format!("value {mean} is outside the domain of `{}`", d.name)));
                    }
                    let mech = Mechanism::LinearGaussian {
                        weights: BTreeMap::new(),
                        intercept: mean,
                        noise_std: std,
                    };
                    Ok((domain, mech))
                }
                NoiseSpec::Point { value } => {
                    let domain = declared.cloned().unwrap_or_else(|| Domain::Discrete(vec![value]));
                    if !domain.contains(value) {
                        return Err(mismatch(call.span, format!("value {value} is outside the domain of `{}`", d.name)));
                    }
                    Ok((domain, Mechanism::Constant(value)))
                }
                spec => {
                    let support = spec.support().expect("discrete noise");
                    let mut implied: Vec<f64> = Vec::new();
                    for (v, _) in &support {
                        if !implied.contains(v) {
                            implied.push(*v);
                        }
                    }
                    let domain = declared.cloned().unwrap_or(Domain::Discrete(implied));
                    let Domain::Discrete(values) = &domain else {
                        return Err(mismatch(domain_span, format!("`{}` has a discrete distribution but a real domain", d.name)));
                    };
                    let mut pmf = vec![0.0; values.len()];
                    for (v, p) in support {
                        match domain.index_of(v) {
                            Some(i) => pmf[i] += p,
                            None => {
                                return Err(mismatch(call.span, format!("value {v} is outside the domain of `{}`", d.name)))
                            }
                        }
                    }
                    Ok((domain, Mechanism::DiscreteCpt(Cpt::root(pmf))))
                }
            }
        }
        Body::Expr { expr, vars, noise } => {
            let mut errs = Vec::new();
            for (v, span) in vars {
                if !known.contains_key(v) {
                    let hint = if *v == d.name {
                        "a variable cannot depend on itself"
                    } else {
                        "variables must be declared before use"
                    };
                    errs.push(ParseError::new(*span, ParseErrorKind::UnknownSymbol, format!("unknown variable `{v}` ({hint})")));
                }
            }
            let spec = match noise {
                Some(call) => match noise_spec(call) {
                    Ok(s) => Some(s),
                    Err(e) => {
                        errs.push(e);
                        None
                    }
                },
                None => None,
            };
            if !errs.is_empty() {
                return Err(errs);
            }
            let domain = declared.cloned().unwrap_or(Domain::Continuous);
            if domain != Domain::Continuous {
                if let Some(s) = &spec {
                    if s.support().is_none() {
                        return Err(mismatch(domain_span, format!("`{}` has Gaussian noise but a discrete domain", d.name)));
                    }
                }
            }
            Ok((domain, Mechanism::from_expr(expr.clone(), spec)))
        }
        Body::Cpt { span, rows } => lower_cpt(d, *span, rows, known),
    }
}

fn lower_cpt(
    d: &Decl,
    cpt_span: SourceSpan,
    rows: &[CptRow],
    known: &BTreeMap<String, Domain>,
) -> Result<(Domain, Mechanism), Vec<ParseError>> {
    let mut errs = Vec::new();
    let Some((Domain::Discrete(values), _)) = &d.domain else {
        return Err(vec![ParseError::new(
            d.domain.as_ref().map_or(d.name_span, |(_, s)| *s),
            ParseErrorKind::DomainMismatch,
            format!("CPT node `{}` needs a discrete domain such as `{{0, 1}}`", d.name),
        )]);
    };
    // parent set fixed by the first row
    let parents: Vec<String> = rows[0].assigns.iter().map(|(p, _, _)| p.clone()).collect();
    let parent_set: BTreeSet<&String> = parents.iter().collect();
    let mut parent_domains: BTreeMap<&str, &Vec<f64>> = BTreeMap::new();
    for (p, _, span) in &rows[0].assigns {
        match known.get(p) {
            None => errs.push(ParseError::new(*span, ParseErrorKind::UnknownSymbol, format!("unknown variable `{p}` (variables must be declared before use)"))),
            Some(Domain::Continuous) => errs.push(ParseError::new(*span, ParseErrorKind::DomainMismatch, format!("CPT parent `{p}` has a real domain"))),
            Some(Domain::Discrete(v)) => {
                parent_domains.insert(p, v);
            }
        }
    }
    if parent_set.len() != parents.len() {
        errs.push(ParseError::new(rows[0].span, ParseErrorKind::DuplicateDefinition, "a parent is assigned twice in one row"));
    }
    if !errs.is_empty() {
        return Err(errs);
    }

    let mut sorted_parents = parents.clone();
    sorted_parents.sort();
    let mut seen: BTreeMap<ValueKey, SourceSpan> = BTreeMap::new();
    let mut table = Vec::new();
    for row in rows {
        let names: BTreeSet<&String> = row.assigns.iter().map(|(p, _, _)| p).collect();
        if names != parent_set || names.len() != row.assigns.len() {
            errs.push(ParseError::new(row.span, ParseErrorKind::CptShape, format!("row assigns parents {{{}}} but the first row assigns {{{}}}", row.assigns.iter().map(|(p, _, _)| p.as_str()).collect::<Vec<_>>().join(", "), parents.join(", "))));
            continue;
        }
        let mut ok = true;
        for (p, v, span) in &row.assigns {
            let dom = parent_domains[p.as_str()];
            if !dom.iter().any(|x| (x - v).abs() <= crate::scm::VALUE_TOLERANCE) {
                errs.push(ParseError::new(*span, ParseErrorKind::DomainMismatch, format!("value {v} is outside the domain of `{p}`")));
                ok = false;
            }
        }
        if row.pmf.len() != values.len() {
            errs.push(ParseError::new(row.span, ParseErrorKind::CptShape, format!("row has {} probabilities, domain of `{}` has {} values", row.pmf.len(), d.name, values.len())));
            ok = false;
        } else if row.pmf.iter().any(|p| *p < 0.0) {
            errs.push(ParseError::new(row.span, ParseErrorKind::CptShape, "probabilities must be non-negative"));
            ok = false;
        } else {
            let sum: f64 = row.pmf.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                errs.push(ParseError::new(row.span, ParseErrorKind::CptShape, format!("row probabilities sum to {sum}, expected 1")));
                ok = false;
            }
        }
        if !ok {
            continue;
        }
        // canonical key in sorted-parent order
        let mut assign: Vec<(&String, f64)> = row.assigns.iter().map(|(p, v, _)| (p, *v)).collect();
        assign.sort_by(|a, b| a.0.cmp(b.0));
        let vals: Vec<f64> = assign.iter().map(|(_, v)| *v).collect();
        if seen.insert(key(&vals), row.span).is_some() {
            errs.push(ParseError::new(row.span, ParseErrorKind::DuplicateDefinition, "duplicate CPT row"));
            continue;
        }
        table.push((vals, row.pmf.clone()));
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    let doms: Vec<Vec<f64>> = sorted_parents.iter().map(|p| parent_domains[p.as_str()].clone()).collect();
    for assignment in cross_product(&doms) {
        let present = table.iter().any(|(k, _)| {
            k.iter().zip(&assignment).all(|(a, b)| (a - b).abs() <= crate::scm::VALUE_TOLERANCE)
        });
        if !present {
            let label = sorted_parents
                .iter()
                .zip(&assignment)
                .map(|(p, v)| format!("{p}={v}"))
                .collect::<Vec<_>>()
                .join(", ");
            errs.push(ParseError::new(cpt_span, ParseErrorKind::CptShape, format!("CPT of `{}` is missing the row for {label}", d.name)));
        }
    }
    if !errs.is_empty() {
        return Err(errs);
    }
    // snap row keys onto the declared domain values
    let table = table
        .into_iter()
        .map(|(k, pmf)| {
            let snapped = k
                .iter()
                .zip(&sorted_parents)
                .map(|(v, p)| {
                    *parent_domains[p.as_str()]
                        .iter()
                        .find(|x| (*x - v).abs() <= crate::scm::VALUE_TOLERANCE)
                        .unwrap()
                })
                .collect();
            (snapped, pmf)
        })
        .collect();
    Ok((
        Domain::Discrete(values.clone()),
        Mechanism::DiscreteCpt(Cpt::new(sorted_parents, table)),
    ))
}
