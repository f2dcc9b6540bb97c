//! OpenQASM 2.0 reader and writer for the supported gate catalog.

use std::collections::HashSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::{Circuit, GateApp, GateKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QasmError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("unsupported gate `{name}` at line {line}, column {column}")]
    UnsupportedGate { name: String, line: usize, column: usize },
    #[error("unsupported feature at line {line}, column {column}: {feature}")]
    UnsupportedFeature { feature: String, line: usize, column: usize },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Arrow,
    Eq,
    Sym(char),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, QasmError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let advance = |i: &mut usize, line: &mut usize, col: &mut usize| {
        let c = chars[*i];
        *i += 1;
        if c == '\n' {
            *line += 1;
            *col = 1;
        } else {
            *col += 1;
        }
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut col);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut col);
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            advance(&mut i, &mut line, &mut col);
            advance(&mut i, &mut line, &mut col);
            loop {
                if i >= chars.len() {
                    return Err(syntax(tl, tc, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    advance(&mut i, &mut line, &mut col);
                    advance(&mut i, &mut line, &mut col);
                    break;
                }
                advance(&mut i, &mut line, &mut col);
            }
            continue;
        }
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut col);
            }
            Tok::Ident(chars[start..i].iter().collect())
        } else if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                advance(&mut i, &mut line, &mut col);
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while i < j {
                        advance(&mut i, &mut line, &mut col);
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut col);
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let value = text.parse::<f64>().map_err(|_| syntax(tl, tc, &format!("malformed number `{text}`")))?;
            Tok::Number(value)
        } else if c == '"' {
            advance(&mut i, &mut line, &mut col);
            let start = i;
            while i < chars.len() && chars[i] != '"' {
                if chars[i] == '\n' {
                    return Err(syntax(tl, tc, "unterminated string"));
                }
                advance(&mut i, &mut line, &mut col);
            }
            if i >= chars.len() {
                return Err(syntax(tl, tc, "unterminated string"));
            }
            let text = chars[start..i].iter().collect();
            advance(&mut i, &mut line, &mut col);
            Tok::Str(text)
        } else if c == '-' && chars.get(i + 1) == Some(&'>') {
            advance(&mut i, &mut line, &mut col);
            advance(&mut i, &mut line, &mut col);
            Tok::Arrow
        } else if c == '=' && chars.get(i + 1) == Some(&'=') {
            advance(&mut i, &mut line, &mut col);
            advance(&mut i, &mut line, &mut col);
            Tok::Eq
        } else if ";,[](){}+-*/^".contains(c) {
            advance(&mut i, &mut line, &mut col);
            Tok::Sym(c)
        } else {
            return Err(syntax(tl, tc, &format!("unexpected character `{c}`")));
        };
        out.push(Token { tok, line: tl, column: tc });
    }
    out.push(Token { tok: Tok::Eof, line, column: col });
    Ok(out)
}

fn syntax(line: usize, column: usize, message: &str) -> QasmError {
    QasmError::Syntax { line, column, message: message.to_string() }
}

/// A register operand: either one element or the whole register.
enum Operand {
    Bit(usize),
    Whole,
}

struct Register {
    name: String,
    size: usize,
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    qreg: Option<Register>,
    creg: Option<Register>,
    circuit: Option<Circuit>,
    measured: HashSet<usize>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, message: &str) -> QasmError {
        let t = self.peek();
        syntax(t.line, t.column, message)
    }

    fn unsupported(&self, t: &Token, feature: &str) -> QasmError {
        QasmError::UnsupportedFeature { feature: feature.to_string(), line: t.line, column: t.column }
    }

    fn expect_sym(&mut self, c: char) -> Result<(), QasmError> {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            Ok(())
        } else {
            Err(self.error_here(&format!("expected `{c}`")))
        }
    }

    fn eat_sym(&mut self, c: char) -> bool {
        if self.peek().tok == Tok::Sym(c) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_ident(&mut self) -> Result<String, QasmError> {
        match self.peek().tok.clone() {
            Tok::Ident(name) => {
                self.next();
                Ok(name)
            }
            _ => Err(self.error_here("expected identifier")),
        }
    }

    fn expect_index(&mut self) -> Result<usize, QasmError> {
        match self.peek().tok {
            Tok::Number(v) if v >= 0.0 && v.fract() == 0.0 => {
                self.next();
                Ok(v as usize)
            }
            _ => Err(self.error_here("expected non-negative integer")),
        }
    }

    fn program(mut self) -> Result<Circuit, QasmError> {
        if self.peek().tok == Tok::Ident("OPENQASM".into()) {
            self.next();
            match self.next().tok {
                Tok::Number(v) if (v - 2.0).abs() < 1e-12 => {}
                _ => {
                    let t = self.tokens[self.pos - 1].clone();
                    return Err(self.unsupported(&t, "only OPENQASM 2.0 is supported"));
                }
            }
            self.expect_sym(';')?;
        }
        while self.peek().tok != Tok::Eof {
            self.statement()?;
        }
        self.circuit.ok_or_else(|| {
            let t = self.tokens.last().unwrap();
            syntax(t.line, t.column, "missing qreg declaration")
        })
    }

    fn statement(&mut self) -> Result<(), QasmError> {
        let head = self.peek().clone();
        let name = match &head.tok {
            Tok::Ident(name) => name.clone(),
            _ => return Err(self.error_here("expected statement")),
        };
        match name.as_str() {
            "include" => {
                self.next();
                match self.next().tok {
                    Tok::Str(file) if file == "qelib1.inc" => {}
                    Tok::Str(_) => return Err(self.unsupported(&head, "includes other than qelib1.inc")),
                    _ => return Err(syntax(head.line, head.column, "expected include file name")),
                }
                self.expect_sym(';')
            }
            "qreg" | "creg" => {
                self.next();
                let reg = self.expect_ident()?;
                self.expect_sym('[')?;
                let size = self.expect_index()?;
                self.expect_sym(']')?;
                self.expect_sym(';')?;
                self.declare(&head, name == "qreg", reg, size)
            }
            "gate" | "opaque" => Err(self.unsupported(&head, "custom gate definitions")),
            "if" => Err(self.unsupported(&head, "classically controlled operations")),
            "reset" => Err(self.unsupported(&head, "reset")),
            "measure" => {
                self.next();
                let q = self.operand(true)?;
                if self.peek().tok != Tok::Arrow {
                    return Err(self.error_here("expected `->`"));
                }
                self.next();
                let c = self.operand(false)?;
                self.expect_sym(';')?;
                self.measure(&head, q, c)
            }
            "barrier" => {
                self.next();
                let mut qubits = Vec::new();
                loop {
                    match self.operand(true)? {
                        Operand::Bit(q) => qubits.push(q),
                        Operand::Whole => qubits.extend(0..self.qreg.as_ref().unwrap().size),
                    }
                    if !self.eat_sym(',') {
                        break;
                    }
                }
                self.expect_sym(';')?;
                self.circuit_mut(&head)?.add_barrier(qubits).map_err(|e| syntax(head.line, head.column, &e.to_string()))
            }
            _ => self.gate_call(&head, &name),
        }
    }

    fn declare(&mut self, head: &Token, quantum: bool, name: String, size: usize) -> Result<(), QasmError> {
        if quantum {
            if self.qreg.is_some() {
                return Err(self.unsupported(head, "multiple quantum registers"));
            }
            if size == 0 {
                return Err(syntax(head.line, head.column, "quantum register must be non-empty"));
            }
            let clbits = self.creg.as_ref().map_or(0, |r| r.size);
            self.circuit = Some(Circuit::with_clbits(size, clbits));
            self.qreg = Some(Register { name, size });
        } else {
            if self.creg.is_some() {
                return Err(self.unsupported(head, "multiple classical registers"));
            }
            if let Some(c) = self.circuit.as_mut() {
                c.num_clbits = size;
            }
            self.creg = Some(Register { name, size });
        }
        Ok(())
    }

    fn circuit_mut(&mut self, at: &Token) -> Result<&mut Circuit, QasmError> {
        self.circuit.as_mut().ok_or_else(|| syntax(at.line, at.column, "operation before qreg declaration"))
    }

    fn operand(&mut self, quantum: bool) -> Result<Operand, QasmError> {
        let t = self.peek().clone();
        let name = self.expect_ident()?;
        let reg = if quantum { &self.qreg } else { &self.creg };
        let Some(reg) = reg else {
            return Err(syntax(t.line, t.column, &format!("undeclared register `{name}`")));
        };
        if reg.name != name {
            return Err(syntax(t.line, t.column, &format!("undeclared register `{name}`")));
        }
        let size = reg.size;
        if self.eat_sym('[') {
            let idx_tok = self.peek().clone();
            let idx = self.expect_index()?;
            self.expect_sym(']')?;
            if idx >= size {
                return Err(syntax(
                    idx_tok.line,
                    idx_tok.column,
                    &format!("index {idx} out of range for `{name}[{size}]`"),
                ));
            }
            Ok(Operand::Bit(idx))
        } else {
            Ok(Operand::Whole)
        }
    }

    fn measure(&mut self, head: &Token, q: Operand, c: Operand) -> Result<(), QasmError> {
        let pairs: Vec<(usize, usize)> = match (q, c) {
            (Operand::Bit(q), Operand::Bit(c)) => vec![(q, c)],
            (Operand::Whole, Operand::Whole) => {
                let qs = self.qreg.as_ref().unwrap().size;
                let cs = self.creg.as_ref().unwrap().size;
                if qs != cs {
                    return Err(syntax(head.line, head.column, "register sizes differ in measure"));
                }
                (0..qs).map(|i| (i, i)).collect()
            }
            _ => return Err(syntax(head.line, head.column, "measure mixes a register with a single bit")),
        };
        for (q, c) in pairs {
            self.measured.insert(q);
            self.circuit_mut(head)?.measure(q, c).map_err(|e| syntax(head.line, head.column, &e.to_string()))?;
        }
        Ok(())
    }

    fn gate_call(&mut self, head: &Token, name: &str) -> Result<(), QasmError> {
        let kind = match GateKind::from_name(name) {
            Some(kind) if kind.is_unitary() => kind,
            _ => {
                return Err(QasmError::UnsupportedGate { name: name.to_string(), line: head.line, column: head.column })
            }
        };
        self.next();
        let mut params = Vec::new();
        if self.eat_sym('(') && !self.eat_sym(')') {
            loop {
                params.push(self.expr()?);
                if !self.eat_sym(',') {
                    break;
                }
            }
            self.expect_sym(')')?;
        }
        if params.len() != kind.param_count() {
            return Err(syntax(
                head.line,
                head.column,
                &format!("`{name}` takes {} parameters, got {}", kind.param_count(), params.len()),
            ));
        }
        let mut operands = Vec::new();
        loop {
            operands.push(self.operand(true)?);
            if !self.eat_sym(',') {
                break;
            }
        }
        self.expect_sym(';')?;
        if operands.len() != kind.arity() {
            return Err(syntax(
                head.line,
                head.column,
                &format!("`{name}` acts on {} qubits, got {}", kind.arity(), operands.len()),
            ));
        }
        // Whole-register operands broadcast element-wise.
        let width = self.qreg.as_ref().unwrap().size;
        let broadcast = operands.iter().any(|o| matches!(o, Operand::Whole));
        let applications: Vec<Vec<usize>> = if broadcast {
            (0..width)
                .map(|i| {
                    operands
                        .iter()
                        .map(|o| match o {
                            Operand::Bit(q) => *q,
                            Operand::Whole => i,
                        })
                        .collect()
                })
                .collect()
        } else {
            vec![operands
                .iter()
                .map(|o| match o {
                    Operand::Bit(q) => *q,
                    Operand::Whole => unreachable!(),
                })
                .collect()]
        };
        for qubits in applications {
            if qubits.iter().any(|q| self.measured.contains(q)) {
                return Err(self.unsupported(head, "gate after measurement"));
            }
            let gate = GateApp::new(kind, qubits, params.clone());
            self.circuit_mut(head)?.push(gate).map_err(|e| syntax(head.line, head.column, &e.to_string()))?;
        }
        Ok(())
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<f64, QasmError> {
        let mut value = self.term()?;
        loop {
            if self.eat_sym('+') {
                value += self.term()?;
            } else if self.eat_sym('-') {
                value -= self.term()?;
            } else {
                return Ok(value);
            }
        }
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<f64, QasmError> {
        let mut value = self.unary()?;
        loop {
            if self.eat_sym('*') {
                value *= self.unary()?;
            } else if self.peek().tok == Tok::Sym('/') {
                let t = self.next();
                let rhs = self.unary()?;
                if rhs == 0.0 {
                    return Err(syntax(t.line, t.column, "division by zero"));
                }
                value /= rhs;
            } else {
                return Ok(value);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, QasmError> {
        if self.eat_sym('-') {
            return Ok(-self.unary()?);
        }
        if self.eat_sym('+') {
            return self.unary();
        }
        let base = self.primary()?;
        if self.eat_sym('^') {
            return Ok(base.powf(self.unary()?));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<f64, QasmError> {
        let t = self.next();
        match t.tok {
            Tok::Number(v) => Ok(v),
            Tok::Ident(ref name) if name == "pi" => Ok(std::f64::consts::PI),
            Tok::Ident(ref name) => {
                let f: fn(f64) -> f64 = match name.as_str() {
                    "sin" => f64::sin,
                    "cos" => f64::cos,
                    "tan" => f64::tan,
                    "exp" => f64::exp,
                    "ln" => f64::ln,
                    "sqrt" => f64::sqrt,
                    _ => return Err(syntax(t.line, t.column, &format!("unknown identifier `{name}` in expression"))),
                };
                self.expect_sym('(')?;
                let arg = self.expr()?;
                self.expect_sym(')')?;
                Ok(f(arg))
            }
            Tok::Sym('(') => {
                let v = self.expr()?;
                self.expect_sym(')')?;
                Ok(v)
            }
            _ => Err(syntax(t.line, t.column, "expected expression")),
        }
    }
}

/// Parses OpenQASM 2.0 source restricted to the gate catalog.
pub fn parse_qasm(text: &str) -> Result<Circuit, QasmError> {
    let parser = Parser { tokens: lex(text)?, pos: 0, qreg: None, creg: None, circuit: None, measured: HashSet::new() };
    let circuit = parser.program()?;
    for gate in circuit.gates() {
        if let Some(p) = gate.params.iter().find(|p| !p.is_finite()) {
            return Err(syntax(0, 0, &format!("non-finite angle {p} in {}", gate.kind)));
        }
    }
    Ok(circuit)
}

/// Writes a circuit as OpenQASM 2.0 with registers named `q` and `c`.
///
/// Angles use the shortest decimal form that reads back to the same `f64`.
pub fn emit_qasm(c: &Circuit) -> String {
    let mut out = String::from("OPENQASM 2.0;\ninclude \"qelib1.inc\";\n");
    let _ = writeln!(out, "qreg q[{}];", c.num_qubits());
    if c.num_clbits() > 0 {
        let _ = writeln!(out, "creg c[{}];", c.num_clbits());
    }
    let emit_barriers = |out: &mut String, at: usize| {
        for b in c.barriers().iter().filter(|b| b.before == at) {
            let qs: Vec<String> = b.qubits.iter().map(|q| format!("q[{q}]")).collect();
            let _ = writeln!(out, "barrier {};", qs.join(","));
        }
    };
    for (i, gate) in c.gates().iter().enumerate() {
        emit_barriers(&mut out, i);
        out.push_str(gate.kind.name());
        if !gate.params.is_empty() {
            let ps: Vec<String> = gate.params.iter().map(|p| format!("{p:?}")).collect();
            let _ = write!(out, "({})", ps.join(","));
        }
        let qs: Vec<String> = gate.qubits.iter().map(|q| format!("q[{q}]")).collect();
        let _ = writeln!(out, " {};", qs.join(","));
    }
    emit_barriers(&mut out, c.len());
    for (q, cl) in c.measurements() {
        let _ = writeln!(out, "measure q[{q}] -> c[{cl}];");
    }
    out
}
