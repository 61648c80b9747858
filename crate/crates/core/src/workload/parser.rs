//! Recursive-descent parser for the star-join SELECT subset.

use std::collections::{BTreeMap, BTreeSet};

use super::ast::{AtomicPredicate, CmpOp, JoinEdge, PredicateExpr, QueryShape};
use super::lexer::{tokenize, Tok, Token};
use crate::data::SchemaDef;
use crate::error::{Error, Result};
use crate::value::{Kind, Value};

/// Parse a semicolon-separated SQL script into query shapes.
pub fn parse_workload(text: &str, schema: &SchemaDef) -> Result<Vec<QueryShape>> {
    let tokens = tokenize(text)?;
    let mut queries = Vec::new();
    let mut pending_id: Option<String> = None;
    let mut start = 0;
    let mut i = 0;
    while i <= tokens.len() {
        let at_end = i == tokens.len();
        if at_end || tokens[i].is_sym(";") {
            let mut stmt = &tokens[start..i];
            while let Some(Token {
                tok: Tok::IdComment(id),
                ..
            }) = stmt.first()
            {
                pending_id = Some(id.clone());
                stmt = &stmt[1..];
            }
            if !stmt.is_empty() {
                let id = pending_id
                    .take()
                    .unwrap_or_else(|| format!("Q{}", queries.len() + 1));
                let mut p = StatementParser::new(stmt, schema, tokens.get(i));
                queries.push(p.parse(id)?);
            }
            start = i + 1;
        }
        i += 1;
    }
    let mut seen = BTreeSet::new();
    for q in &queries {
        if !seen.insert(q.id.as_str()) {
            return Err(Error::Schema(format!("duplicate query id '{}'", q.id)));
        }
    }
    Ok(queries)
}

#[derive(Debug, Clone)]
enum Lit {
    Number(String),
    Str(String),
    Date(String),
}

#[derive(Debug, Clone)]
enum Operand {
    Column {
        qualifier: Option<String>,
        name: String,
        line: usize,
        column: usize,
    },
    Literal {
        lit: Lit,
        line: usize,
        column: usize,
    },
}

#[derive(Debug, Clone)]
enum Raw {
    True,
    False,
    And(Vec<Raw>),
    Or(Vec<Raw>),
    Not(Box<Raw>),
    Cmp(Operand, CmpOp, Operand),
    Between {
        column: Operand,
        low: Operand,
        high: Operand,
        negated: bool,
    },
    In {
        column: Operand,
        values: Vec<Operand>,
        negated: bool,
    },
}

struct StatementParser<'a> {
    toks: &'a [Token],
    pos: usize,
    schema: &'a SchemaDef,
    end: (usize, usize),
    aliases: BTreeMap<String, String>,
    relations: Vec<String>,
}

const CLAUSE_KEYWORDS: [&str; 9] = [
    "where", "group", "order", "join", "inner", "on", "having", "limit", "as",
];

impl<'a> StatementParser<'a> {
    fn new(toks: &'a [Token], schema: &'a SchemaDef, terminator: Option<&Token>) -> Self {
        let end = terminator
            .or(toks.last())
            .map(|t| (t.line, t.column))
            .unwrap_or((1, 1));
        StatementParser {
            toks,
            pos: 0,
            schema,
            end,
            aliases: BTreeMap::new(),
            relations: Vec::new(),
        }
    }

    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        self.pos += 1;
        t
    }

    fn here(&self) -> (usize, usize) {
        self.peek().map(|t| (t.line, t.column)).unwrap_or(self.end)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let (line, column) = self.here();
        Err(Error::Parse {
            line,
            column,
            message: message.into(),
        })
    }

    fn error_at<T>(line: usize, column: usize, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            line,
            column,
            message: message.into(),
        })
    }

    fn peek_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_kw(kw))
    }

    fn peek_sym(&self, s: &str) -> bool {
        self.peek().is_some_and(|t| t.is_sym(s))
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.peek_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<()> {
        if self.eat_kw(kw) {
            Ok(())
        } else {
            self.error(format!("expected {}", kw.to_uppercase()))
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<()> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.error(format!("expected '{s}'"))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Token {
                tok: Tok::Ident(s), ..
            }) => {
                self.pos += 1;
                Ok(s.clone())
            }
            _ => self.error("expected identifier"),
        }
    }

    /// Opaque token run up to (not including) one of the stop keywords at depth 0.
    fn opaque_until(&mut self, stops: &[&str]) -> Result<String> {
        let mut depth = 0i32;
        let mut parts = Vec::new();
        while let Some(t) = self.peek() {
            if depth == 0 && stops.iter().any(|k| t.is_kw(k)) {
                break;
            }
            if t.is_sym("(") {
                depth += 1;
            } else if t.is_sym(")") {
                depth -= 1;
                if depth < 0 {
                    return self.error("unbalanced ')'");
                }
            }
            let glue = parts.last().is_some_and(|p: &String| p.ends_with('.') || p.ends_with('('))
                || t.is_sym(".")
                || t.is_sym(",")
                || t.is_sym(")")
                || (t.is_sym("(") && parts.last().is_some_and(|p| p.chars().all(|c| c.is_alphanumeric() || c == '_')));
            let text = t.render();
            match parts.last_mut() {
                Some(last) if glue => last.push_str(&text),
                _ => parts.push(text),
            }
            self.pos += 1;
        }
        if depth != 0 {
            return self.error("unbalanced '('");
        }
        Ok(parts.join(" "))
    }

    fn parse(&mut self, id: String) -> Result<QueryShape> {
        self.expect_kw("select")?;
        let select = self.opaque_until(&["from"])?;
        if select.is_empty() {
            return self.error("empty SELECT list");
        }
        self.expect_kw("from")?;
        let mut conjuncts: Vec<Raw> = Vec::new();
        self.table_ref()?;
        loop {
            if self.eat_sym(",") {
                self.table_ref()?;
            } else if self.peek_kw("join") || self.peek_kw("inner") {
                self.eat_kw("inner");
                self.expect_kw("join")?;
                self.table_ref()?;
                self.expect_kw("on")?;
                conjuncts.push(self.or_expr()?);
            } else {
                break;
            }
        }
        if self.eat_kw("where") {
            conjuncts.push(self.or_expr()?);
        }
        let mut group_by = String::new();
        let mut order_by = String::new();
        if self.eat_kw("group") {
            self.expect_kw("by")?;
            group_by = self.opaque_until(&["order", "having", "limit"])?;
        }
        if self.eat_kw("order") {
            self.expect_kw("by")?;
            order_by = self.opaque_until(&["having", "limit"])?;
        }
        if let Some(t) = self.peek() {
            let what = t.render();
            return self.error(format!("unsupported syntax near '{what}'"));
        }

        let mut joins = Vec::new();
        let mut per_relation: BTreeMap<String, Vec<PredicateExpr>> = BTreeMap::new();
        let mut flat = Vec::new();
        for c in conjuncts {
            flatten_and(c, &mut flat);
        }
        for c in flat {
            if let Raw::Cmp(
                l @ Operand::Column { .. },
                op,
                r @ Operand::Column {
                    line: rl,
                    column: rc,
                    ..
                },
            ) = &c
            {
                let (lrel, lattr) = self.resolve(l)?;
                let (rrel, rattr) = self.resolve(r)?;
                if *op != CmpOp::Eq || lrel == rrel {
                    return Self::error_at(
                        *rl,
                        *rc,
                        "unsupported: only equality joins between distinct relations",
                    );
                }
                joins.push(JoinEdge {
                    left_relation: lrel,
                    left_attribute: lattr,
                    right_relation: rrel,
                    right_attribute: rattr,
                });
                continue;
            }
            let (expr, rels) = self.lower(&c)?;
            match rels.len() {
                0 => {
                    if !matches!(expr, PredicateExpr::True) {
                        return self.error("unsupported: condition references no relation");
                    }
                }
                1 => per_relation
                    .entry(rels.into_iter().next().unwrap())
                    .or_default()
                    .push(expr),
                _ => {
                    return self.error(
                        "unsupported: filter condition spans several relations",
                    )
                }
            }
        }
        let filters = per_relation
            .into_iter()
            .filter_map(|(r, parts)| match PredicateExpr::and(parts) {
                PredicateExpr::True => None,
                e => Some((r, e)),
            })
            .collect();
        Ok(QueryShape {
            id,
            relations: self.relations.clone(),
            joins,
            filters,
            select,
            group_by,
            order_by,
        })
    }

    fn table_ref(&mut self) -> Result<()> {
        let (line, column) = self.here();
        let name = self.ident()?;
        if self.schema.relation(&name).is_none() {
            return Err(Error::Schema(format!(
                "unknown relation '{name}' at line {line}, column {column}"
            )));
        }
        if self.relations.contains(&name) {
            return Self::error_at(line, column, format!("relation '{name}' listed twice"));
        }
        self.relations.push(name.clone());
        self.aliases.insert(name.clone(), name.clone());
        let explicit = self.eat_kw("as");
        if let Some(Token {
            tok: Tok::Ident(alias),
            ..
        }) = self.peek()
        {
            if explicit || !CLAUSE_KEYWORDS.contains(&alias.as_str()) {
                self.pos += 1;
                self.aliases.insert(alias.clone(), name);
            }
        } else if explicit {
            return self.error("expected alias after AS");
        }
        Ok(())
    }

    fn or_expr(&mut self) -> Result<Raw> {
        let mut parts = vec![self.and_expr()?];
        while self.eat_kw("or") {
            parts.push(self.and_expr()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Raw::Or(parts)
        })
    }

    fn and_expr(&mut self) -> Result<Raw> {
        let mut parts = vec![self.not_expr()?];
        while self.eat_kw("and") {
            parts.push(self.not_expr()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Raw::And(parts)
        })
    }

    fn not_expr(&mut self) -> Result<Raw> {
        if self.eat_kw("not") {
            return Ok(Raw::Not(Box::new(self.not_expr()?)));
        }
        self.primary()
    }

    fn primary(&mut self) -> Result<Raw> {
        if self.eat_sym("(") {
            let e = self.or_expr()?;
            self.expect_sym(")")?;
            return Ok(e);
        }
        if self.eat_kw("true") {
            return Ok(Raw::True);
        }
        if self.eat_kw("false") {
            return Ok(Raw::False);
        }
        let left = self.operand()?;
        let negated = self.eat_kw("not");
        if self.eat_kw("between") {
            let low = self.operand()?;
            self.expect_kw("and")?;
            let high = self.operand()?;
            return Ok(Raw::Between {
                column: left,
                low,
                high,
                negated,
            });
        }
        if self.eat_kw("in") {
            self.expect_sym("(")?;
            let mut values = vec![self.operand()?];
            while self.eat_sym(",") {
                values.push(self.operand()?);
            }
            self.expect_sym(")")?;
            return Ok(Raw::In {
                column: left,
                values,
                negated,
            });
        }
        if negated {
            return self.error("expected BETWEEN or IN after NOT");
        }
        let op = match self.next() {
            Some(t) => match &t.tok {
                Tok::Sym("<") => CmpOp::Lt,
                Tok::Sym("<=") => CmpOp::Le,
                Tok::Sym(">") => CmpOp::Gt,
                Tok::Sym(">=") => CmpOp::Ge,
                Tok::Sym("=") => CmpOp::Eq,
                Tok::Sym("<>") | Tok::Sym("!=") => CmpOp::Ne,
                _ => {
                    self.pos -= 1;
                    return self.error(format!(
                        "unsupported: expected comparison operator, found '{}'",
                        t.render()
                    ));
                }
            },
            None => return self.error("expected comparison operator"),
        };
        let right = self.operand()?;
        Ok(Raw::Cmp(left, op, right))
    }

    fn operand(&mut self) -> Result<Operand> {
        let (line, column) = self.here();
        let Some(t) = self.next() else {
            return self.error("expected operand");
        };
        let lit = |lit| Operand::Literal { lit, line, column };
        match &t.tok {
            Tok::Number(n) => Ok(lit(Lit::Number(n.clone()))),
            Tok::Sym("-") => match self.next().map(|t| &t.tok) {
                Some(Tok::Number(n)) => Ok(lit(Lit::Number(format!("-{n}")))),
                _ => Self::error_at(line, column, "expected number after '-'"),
            },
            Tok::Str(s) => Ok(lit(Lit::Str(s.clone()))),
            Tok::Ident(kw) if kw == "date" && matches!(self.peek().map(|t| &t.tok), Some(Tok::Str(_))) => {
                let Some(Tok::Str(s)) = self.next().map(|t| &t.tok) else {
                    unreachable!()
                };
                Ok(lit(Lit::Date(s.clone())))
            }
            Tok::Ident(first) => {
                if self.eat_sym(".") {
                    let name = self.ident()?;
                    Ok(Operand::Column {
                        qualifier: Some(first.clone()),
                        name,
                        line,
                        column,
                    })
                } else {
                    Ok(Operand::Column {
                        qualifier: None,
                        name: first.clone(),
                        line,
                        column,
                    })
                }
            }
            _ => Self::error_at(line, column, format!("unexpected '{}'", t.render())),
        }
    }

    fn resolve(&self, op: &Operand) -> Result<(String, String)> {
        let Operand::Column {
            qualifier,
            name,
            line,
            column,
        } = op
        else {
            return Self::error_at(1, 1, "expected column");
        };
        match qualifier {
            Some(q) => {
                let rel = self.aliases.get(q).ok_or_else(|| {
                    Error::Schema(format!(
                        "unknown relation or alias '{q}' at line {line}, column {column}"
                    ))
                })?;
                let def = self.schema.require(rel)?;
                if def.attribute(name).is_none() {
                    return Err(Error::Schema(format!(
                        "unknown attribute '{rel}.{name}' at line {line}, column {column}"
                    )));
                }
                Ok((rel.clone(), name.clone()))
            }
            None => {
                let owners: Vec<&String> = self
                    .relations
                    .iter()
                    .filter(|r| {
                        self.schema
                            .relation(r)
                            .is_some_and(|d| d.attribute(name).is_some())
                    })
                    .collect();
                match owners.as_slice() {
                    [only] => Ok(((*only).clone(), name.clone())),
                    [] => Err(Error::Schema(format!(
                        "unknown attribute '{name}' at line {line}, column {column}"
                    ))),
                    _ => Err(Error::Schema(format!(
                        "ambiguous attribute '{name}' at line {line}, column {column}"
                    ))),
                }
            }
        }
    }

    fn typed(&self, lit: &Operand, kind: Kind) -> Result<Value> {
        let Operand::Literal { lit, line, column } = lit else {
            let (line, column) = match lit {
                Operand::Column { line, column, .. } => (*line, *column),
                _ => unreachable!(),
            };
            return Self::error_at(line, column, "unsupported: expected a constant");
        };
        let v = match (lit, kind) {
            (Lit::Number(n), Kind::Integer) => Value::parse_as(Kind::Integer, n),
            (Lit::Number(n), Kind::Decimal) => Value::parse_as(Kind::Decimal, n),
            (Lit::Str(s), Kind::Text) => Ok(Value::Text(s.clone())),
            (Lit::Str(s) | Lit::Date(s), Kind::Date) => Value::parse_as(Kind::Date, s),
            (l, k) => Err(format!("constant {l:?} is not compatible with {k}")),
        };
        v.map_err(|m| Error::Type(format!("{m} at line {line}, column {column}")))
    }

    fn lower(&self, raw: &Raw) -> Result<(PredicateExpr, BTreeSet<String>)> {
        match raw {
            Raw::True => Ok((PredicateExpr::True, BTreeSet::new())),
            Raw::False => Ok((PredicateExpr::Not(Box::new(PredicateExpr::True)), BTreeSet::new())),
            Raw::And(v) | Raw::Or(v) => {
                let mut rels = BTreeSet::new();
                let mut parts = Vec::new();
                for r in v {
                    let (e, rs) = self.lower(r)?;
                    rels.extend(rs);
                    parts.push(e);
                }
                let e = if matches!(raw, Raw::And(_)) {
                    PredicateExpr::and(parts)
                } else {
                    PredicateExpr::or(parts)
                };
                Ok((e, rels))
            }
            Raw::Not(inner) => {
                let (e, rels) = self.lower(inner)?;
                Ok((PredicateExpr::Not(Box::new(e)), rels))
            }
            Raw::Cmp(l, op, r) => {
                let (col, op, lit) = match (l, r) {
                    (Operand::Column { .. }, Operand::Literal { .. }) => (l, *op, r),
                    (Operand::Literal { .. }, Operand::Column { .. }) => (r, op.flip(), l),
                    (Operand::Column { line, column, .. }, Operand::Column { .. }) => {
                        return Self::error_at(
                            *line,
                            *column,
                            "unsupported: join condition nested inside OR/NOT",
                        )
                    }
                    (Operand::Literal { line, column, .. }, _) => {
                        return Self::error_at(
                            *line,
                            *column,
                            "unsupported: comparison between constants",
                        )
                    }
                };
                let (rel, attr) = self.resolve(col)?;
                let kind = self.schema.kind_of(&rel, &attr).expect("resolved");
                let constant = self.typed(lit, kind)?;
                let atom = AtomicPredicate::new(rel.clone(), attr, op, constant);
                Ok((PredicateExpr::Atom(atom), BTreeSet::from([rel])))
            }
            Raw::Between {
                column,
                low,
                high,
                negated,
            } => {
                let (rel, attr) = self.resolve(column)?;
                let kind = self.schema.kind_of(&rel, &attr).expect("resolved");
                let e = PredicateExpr::Between {
                    relation: rel.clone(),
                    attribute: attr,
                    low: self.typed(low, kind)?,
                    high: self.typed(high, kind)?,
                };
                let e = if *negated {
                    PredicateExpr::Not(Box::new(e))
                } else {
                    e
                };
                Ok((e, BTreeSet::from([rel])))
            }
            Raw::In {
                column,
                values,
                negated,
            } => {
                let (rel, attr) = self.resolve(column)?;
                let kind = self.schema.kind_of(&rel, &attr).expect("resolved");
                let values = values
                    .iter()
                    .map(|v| self.typed(v, kind))
                    .collect::<Result<Vec<_>>>()?;
                let e = PredicateExpr::In {
                    relation: rel.clone(),
                    attribute: attr,
                    values,
                };
                let e = if *negated {
                    PredicateExpr::Not(Box::new(e))
                } else {
                    e
                };
                Ok((e, BTreeSet::from([rel])))
            }
        }
    }
}

fn flatten_and(raw: Raw, out: &mut Vec<Raw>) {
    match raw {
        Raw::And(parts) => parts.into_iter().for_each(|p| flatten_and(p, out)),
        other => out.push(other),
    }
}

/// Parses one qualified atomic predicate such as `r.a <= 5`, as printed by
/// [`AtomicPredicate`]'s `Display`.
pub fn parse_atomic(text: &str, schema: &SchemaDef) -> Result<AtomicPredicate> {
    let toks = tokenize(text)?;
    let relation = match toks.first() {
        Some(Token {
            tok: Tok::Ident(r), ..
        }) if toks.get(1).is_some_and(|t| t.is_sym(".")) => r.clone(),
        _ => {
            return Err(Error::Parse {
                line: 1,
                column: 1,
                message: format!("expected qualified predicate, found '{text}'"),
            })
        }
    };
    let q = parse_workload(&format!("SELECT * FROM {relation} WHERE {text}"), schema)?;
    match q.first().map(|q| q.filter(&relation)) {
        Some(PredicateExpr::Atom(a)) if q[0].joins.is_empty() => Ok(a.clone()),
        _ => Err(Error::Parse {
            line: 1,
            column: 1,
            message: format!("'{text}' is not a single atomic predicate"),
        }),
    }
}
