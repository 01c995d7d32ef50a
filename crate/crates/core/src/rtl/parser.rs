//! Declaration-level module parser.

use std::collections::HashSet;

use super::keywords::{is_data_type_keyword, is_keyword};
use super::lexer::{lex, significant, LexError, Token, TokenKind};
use super::{
    classify_signal, strip_comments, Direction, Parameter, ParseOptions, Port, RtlError,
    RtlModule, SignalDecl, SourceFile, Width,
};

pub fn parse_module(src: &SourceFile) -> Result<RtlModule, RtlError> {
    parse_module_with(src, &ParseOptions::default())
}

pub fn parse_module_with(src: &SourceFile, opts: &ParseOptions) -> Result<RtlModule, RtlError> {
    let text = src.text.as_str();
    let all = lex(text).map_err(|e| match e {
        LexError::UnterminatedBlockComment { line, .. } => RtlError::UnbalancedDelimiters {
            what: "block comment".into(),
            line,
        },
        LexError::UnterminatedString { line, .. } => RtlError::UnbalancedDelimiters {
            what: "string literal".into(),
            line,
        },
    })?;
    let toks = significant(&all);

    if let Some(t) = toks
        .iter()
        .find(|t| t.kind == TokenKind::Directive && t.text(text) == "`include")
    {
        return Err(RtlError::IncludeDirective { line: t.line });
    }

    let starts: Vec<usize> = toks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == TokenKind::Ident && matches!(t.text(text), "module" | "macromodule"))
        .map(|(i, _)| i)
        .collect();
    let ends: Vec<usize> = toks
        .iter()
        .enumerate()
        .filter(|(_, t)| t.kind == TokenKind::Ident && t.text(text) == "endmodule")
        .map(|(i, _)| i)
        .collect();
    match starts.len() {
        0 => return Err(RtlError::NoModuleFound),
        1 => {}
        n => return Err(RtlError::MultipleModules { count: n }),
    }
    let start = starts[0];
    let end = match ends.as_slice() {
        [e] if *e > start => *e,
        [] => {
            return Err(RtlError::UnbalancedDelimiters {
                what: "module/endmodule".into(),
                line: toks[start].line,
            })
        }
        [e] => {
            return Err(RtlError::UnbalancedDelimiters {
                what: "module/endmodule".into(),
                line: toks[*e].line,
            })
        }
        many => return Err(RtlError::MultipleModules { count: many.len() }),
    };
    let region = &toks[start..=end];
    check_balance(region, text)?;

    let body_text = text[toks[start].start..toks[end].end].to_string();
    let stripped_text = strip_comments(&body_text)?;

    let mut parser = ModuleParser {
        cur: Cursor::new(text, region.to_vec()),
        opts,
        parameters: Vec::new(),
        ports: Vec::new(),
        ansi: true,
        internals: Vec::new(),
        genvars: Vec::new(),
        enum_members: Vec::new(),
        typedefs: Vec::new(),
    };
    let name = parser.parse_header()?;
    parser.parse_items(0, Terminator::EndModule)?;

    let ModuleParser {
        parameters,
        mut ports,
        mut internals,
        genvars,
        enum_members,
        typedefs,
        ..
    } = parser;

    let port_names: HashSet<&str> = ports.iter().map(|p| p.name.as_str()).collect();
    internals.retain(|s| !port_names.contains(s.name.as_str()));

    let reset_active_low = mark_clock_reset(&mut ports, opts)?;

    Ok(RtlModule {
        name,
        parameters,
        ports: ports.into_iter().map(|p| p.into_port()).collect::<Result<_, _>>()?,
        internals,
        genvars,
        enum_members,
        typedefs,
        body_text,
        stripped_text,
        reset_active_low,
        register_suffixes: opts.register_suffixes.clone(),
    })
}

fn check_balance(toks: &[Token], text: &str) -> Result<(), RtlError> {
    let mut stack: Vec<(&str, usize)> = Vec::new();
    for t in toks {
        let s = t.text(text);
        let (open, close) = match t.kind {
            TokenKind::Symbol => (matches!(s, "(" | "[" | "{"), matches!(s, ")" | "]" | "}")),
            TokenKind::Ident => (s == "begin", s == "end"),
            _ => (false, false),
        };
        if open {
            stack.push((s, t.line));
        } else if close {
            let expected = match s {
                ")" => "(",
                "]" => "[",
                "}" => "{",
                _ => "begin",
            };
            match stack.pop() {
                Some((o, _)) if o == expected => {}
                Some((o, line)) => {
                    return Err(RtlError::UnbalancedDelimiters {
                        what: format!("`{o}` closed by `{s}`"),
                        line: line.max(t.line),
                    })
                }
                None => {
                    return Err(RtlError::UnbalancedDelimiters {
                        what: format!("`{s}`"),
                        line: t.line,
                    })
                }
            }
        }
    }
    match stack.pop() {
        Some((o, line)) => Err(RtlError::UnbalancedDelimiters { what: format!("`{o}`"), line }),
        None => Ok(()),
    }
}

fn mark_clock_reset(ports: &mut [PendingPort], opts: &ParseOptions) -> Result<bool, RtlError> {
    // `_i` marks an input; `rst_ni` is an active-low input reset
    let base = |name: &str| {
        if let Some(stem) = name.strip_suffix("_ni") {
            format!("{stem}_n")
        } else {
            name.strip_suffix("_i").unwrap_or(name).to_string()
        }
    };
    let clock = match &opts.clock {
        Some(c) => Some(c.clone()),
        None => ports
            .iter()
            .find(|p| matches!(base(&p.name).as_str(), "clk" | "clock"))
            .map(|p| p.name.clone()),
    };
    let reset = match &opts.reset {
        Some(r) => Some(r.clone()),
        None => ports
            .iter()
            .find(|p| {
                matches!(
                    base(&p.name).as_str(),
                    "rst" | "rst_n" | "reset" | "reset_n" | "rstn" | "resetn"
                )
            })
            .map(|p| p.name.clone()),
    };
    for (wanted, what) in [(&clock, "clock"), (&reset, "reset")] {
        if let Some(name) = wanted {
            if !ports.iter().any(|p| &p.name == name) {
                return Err(RtlError::Syntax {
                    line: 0,
                    message: format!("{what} port `{name}` is not a port of the module"),
                });
            }
        }
    }
    for p in ports.iter_mut() {
        p.is_clock = clock.as_deref() == Some(p.name.as_str());
        p.is_reset = reset.as_deref() == Some(p.name.as_str());
    }
    let active_low = opts.reset_active_low.unwrap_or_else(|| {
        reset
            .as_deref()
            .map(|r| {
                let b = base(r);
                b.ends_with("_n") || b == "rstn" || b == "resetn"
            })
            .unwrap_or(false)
    });
    Ok(active_low)
}

struct PendingPort {
    name: String,
    direction: Option<Direction>,
    width: Width,
    data_type: Option<String>,
    is_clock: bool,
    is_reset: bool,
    line: usize,
}

impl PendingPort {
    fn into_port(self) -> Result<Port, RtlError> {
        let direction = self.direction.ok_or_else(|| RtlError::Syntax {
            line: self.line,
            message: format!("port `{}` has no direction declaration", self.name),
        })?;
        Ok(Port {
            name: self.name,
            direction,
            width: self.width,
            data_type: self.data_type,
            is_clock: self.is_clock,
            is_reset: self.is_reset,
        })
    }
}

/// Token cursor with the statement-skipping helpers shared by the module
/// parser and FSM detection.
pub(crate) struct Cursor<'a> {
    pub(crate) src: &'a str,
    pub(crate) toks: Vec<Token>,
    pub(crate) pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str, toks: Vec<Token>) -> Self {
        Cursor { src, toks, pos: 0 }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn peek(&self) -> &'a str {
        self.peek_at(0)
    }

    pub(crate) fn peek_at(&self, n: usize) -> &'a str {
        self.toks.get(self.pos + n).map_or("", |t| t.text(self.src))
    }

    pub(crate) fn kind_at(&self, n: usize) -> Option<TokenKind> {
        self.toks.get(self.pos + n).map(|t| t.kind)
    }

    pub(crate) fn line(&self) -> usize {
        self.toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map_or(0, |t| t.line)
    }

    pub(crate) fn bump(&mut self) -> &'a str {
        let s = self.peek();
        self.pos += 1;
        s
    }

    pub(crate) fn eat(&mut self, s: &str) -> bool {
        if !self.at_end() && self.peek() == s {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), RtlError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.error(format!("expected `{s}`, found `{}`", self.peek())))
        }
    }

    fn ident(&mut self) -> Result<String, RtlError> {
        match self.kind_at(0) {
            Some(TokenKind::Ident) if !is_keyword(self.peek()) => Ok(self.bump().to_string()),
            _ => Err(self.error(format!("expected identifier, found `{}`", self.peek()))),
        }
    }

    fn error(&self, message: String) -> RtlError {
        RtlError::Syntax { line: self.line(), message }
    }

    /// Source text spanning tokens `from..to`.
    pub(crate) fn text_between(&self, from: usize, to: usize) -> String {
        if from >= to || from >= self.toks.len() {
            return String::new();
        }
        let to = to.min(self.toks.len());
        self.src[self.toks[from].start..self.toks[to - 1].end].to_string()
    }

    /// At an opening bracket: skips past its matching close.
    pub(crate) fn skip_group(&mut self) {
        let mut depth = 0usize;
        while !self.at_end() {
            match self.bump() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth = depth.saturating_sub(1);
                    if depth == 0 {
                        return;
                    }
                }
                _ => {}
            }
        }
    }

    /// Skips through the next `;` at bracket depth zero.
    pub(crate) fn skip_to_semicolon(&mut self) {
        while !self.at_end() {
            match self.peek() {
                "(" | "[" | "{" => self.skip_group(),
                ";" => {
                    self.pos += 1;
                    return;
                }
                "endmodule" => return,
                _ => self.pos += 1,
            }
        }
    }

    /// Skips through the keyword closing a block opened by `open`.
    pub(crate) fn skip_block(&mut self, open: &[&str], close: &[&str]) {
        let mut depth = 0usize;
        while !self.at_end() {
            let t = self.bump();
            if open.contains(&t) {
                depth += 1;
            } else if close.contains(&t) {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    break;
                }
            }
        }
        self.skip_end_label();
    }

    fn skip_end_label(&mut self) {
        if self.peek() == ":" && self.kind_at(1) == Some(TokenKind::Ident) {
            self.pos += 2;
        }
    }

    /// Skips one procedural statement.
    pub(crate) fn skip_statement(&mut self) {
        match self.peek() {
            "begin" => self.skip_block(&["begin"], &["end"]),
            "fork" => self.skip_block(&["fork"], &["join", "join_any", "join_none"]),
            "case" | "casez" | "casex" | "randcase" => {
                self.skip_block(&["case", "casez", "casex", "randcase"], &["endcase"])
            }
            "unique" | "unique0" | "priority" => {
                self.pos += 1;
                self.skip_statement();
            }
            "if" => {
                self.pos += 1;
                if self.peek() == "(" {
                    self.skip_group();
                }
                self.skip_statement();
                if self.eat("else") {
                    self.skip_statement();
                }
            }
            "for" | "while" | "repeat" | "foreach" => {
                self.pos += 1;
                if self.peek() == "(" {
                    self.skip_group();
                }
                self.skip_statement();
            }
            "forever" => {
                self.pos += 1;
                self.skip_statement();
            }
            "do" => {
                self.pos += 1;
                self.skip_statement();
                self.skip_to_semicolon();
            }
            "@" => {
                self.pos += 1;
                if self.peek() == "(" {
                    self.skip_group();
                } else {
                    self.pos += 1;
                }
                self.skip_statement();
            }
            "#" => {
                self.pos += 1;
                if self.peek() == "(" {
                    self.skip_group();
                } else {
                    self.pos += 1;
                }
                self.skip_statement();
            }
            ";" => self.pos += 1,
            _ => self.skip_to_semicolon(),
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Terminator {
    EndModule,
    End,
}

struct ModuleParser<'a, 'o> {
    cur: Cursor<'a>,
    opts: &'o ParseOptions,
    parameters: Vec<Parameter>,
    ports: Vec<PendingPort>,
    ansi: bool,
    internals: Vec<SignalDecl>,
    genvars: Vec<String>,
    enum_members: Vec<String>,
    typedefs: Vec<String>,
}

/// Type portion of a declaration.
#[derive(Clone, Default)]
struct DeclType {
    data_type: Option<String>,
    packed: Vec<String>,
}

impl<'a> ModuleParser<'a, '_> {
    fn parse_header(&mut self) -> Result<String, RtlError> {
        self.cur.bump(); // module
        if matches!(self.cur.peek(), "automatic" | "static") {
            self.cur.bump();
        }
        let name = self.cur.ident()?;
        while self.cur.peek() == "import" {
            self.cur.skip_to_semicolon();
        }
        if self.cur.eat("#") {
            self.parse_header_params()?;
        }
        if self.cur.peek() == "(" {
            self.parse_port_list()?;
        }
        self.cur.expect(";")?;
        Ok(name)
    }

    /// Splits a bracketed list at top-level commas; returns token ranges.
    fn split_list(&mut self) -> Result<Vec<(usize, usize)>, RtlError> {
        self.cur.expect("(")?;
        let mut items = Vec::new();
        let mut item_start = self.cur.pos;
        let mut depth = 0usize;
        loop {
            if self.cur.at_end() {
                return Err(self.cur.error("unterminated list".into()));
            }
            match self.cur.peek() {
                "(" | "[" | "{" => depth += 1,
                ")" if depth == 0 => {
                    if self.cur.pos > item_start {
                        items.push((item_start, self.cur.pos));
                    }
                    self.cur.pos += 1;
                    return Ok(items);
                }
                ")" | "]" | "}" => depth -= 1,
                "," if depth == 0 => {
                    items.push((item_start, self.cur.pos));
                    item_start = self.cur.pos + 1;
                }
                _ => {}
            }
            self.cur.pos += 1;
        }
    }

    fn parse_header_params(&mut self) -> Result<(), RtlError> {
        for (from, to) in self.split_list()? {
            let mut i = from;
            while i < to && matches!(self.tok(i), "parameter" | "localparam") {
                i += 1;
            }
            let local = self.tok(from) == "localparam";
            if let Some(p) = self.param_from_range(i, to, local) {
                self.parameters.push(p);
            }
        }
        Ok(())
    }

    fn tok(&self, i: usize) -> &'a str {
        self.cur.toks.get(i).map_or("", |t| t.text(self.cur.src))
    }

    fn param_from_range(&self, from: usize, to: usize, local: bool) -> Option<Parameter> {
        let eq = (from..to).find(|&i| self.tok(i) == "=");
        let name_end = eq.unwrap_or(to);
        // name is the last identifier before `=` (after any type / packed dims)
        let mut j = name_end;
        while j > from {
            j -= 1;
            if self.tok(j) == "]" {
                // step over an unpacked dimension
                let mut depth = 1;
                while j > from && depth > 0 {
                    j -= 1;
                    match self.tok(j) {
                        "]" => depth += 1,
                        "[" => depth -= 1,
                        _ => {}
                    }
                }
                continue;
            }
            break;
        }
        if self.cur.toks[j].kind != TokenKind::Ident || is_keyword(self.tok(j)) {
            return None;
        }
        let default = eq.map(|e| self.cur.text_between(e + 1, to)).unwrap_or_default();
        Some(Parameter { name: self.tok(j).to_string(), default, local })
    }

    fn parse_port_list(&mut self) -> Result<(), RtlError> {
        let items = self.split_list()?;
        let mut prev_dir: Option<Direction> = None;
        let mut prev_type = DeclType::default();
        for (idx, (from, to)) in items.into_iter().enumerate() {
            let line = self.cur.toks[from].line;
            let saved = self.cur.pos;
            self.cur.pos = from;
            let dir = match self.cur.peek() {
                "input" => Some(Direction::Input),
                "output" => Some(Direction::Output),
                "inout" | "ref" => Some(Direction::Inout),
                _ => None,
            };
            if dir.is_some() {
                self.cur.pos += 1;
            }
            if idx == 0 && dir.is_none() && self.cur.pos + 1 == to {
                self.ansi = false;
            }
            if !self.ansi {
                let name = self.cur.ident()?;
                self.cur.pos = saved;
                self.push_port(PendingPort {
                    name,
                    direction: None,
                    width: Width::Bits(1),
                    data_type: None,
                    is_clock: false,
                    is_reset: false,
                    line,
                })?;
                continue;
            }
            // name: last identifier before optional `= default` and unpacked dims
            let eq = (self.cur.pos..to).find(|&i| self.tok(i) == "=");
            let mut name_at = eq.unwrap_or(to);
            loop {
                name_at -= 1;
                if self.tok(name_at) == "]" {
                    let mut depth = 1;
                    while depth > 0 {
                        name_at -= 1;
                        match self.tok(name_at) {
                            "]" => depth += 1,
                            "[" => depth -= 1,
                            _ => {}
                        }
                    }
                    continue;
                }
                break;
            }
            let ty = if self.cur.pos < name_at {
                let end = name_at;
                self.decl_type_until(end)?
            } else if dir.is_none() {
                prev_type.clone()
            } else {
                DeclType::default()
            };
            self.cur.pos = name_at;
            let name = self.cur.ident()?;
            let direction = dir.or(prev_dir).ok_or_else(|| RtlError::Syntax {
                line,
                message: format!("port `{name}` has no direction"),
            })?;
            self.push_port(PendingPort {
                name,
                direction: Some(direction),
                width: Width::from_packed(&ty.packed),
                data_type: ty.data_type.clone(),
                is_clock: false,
                is_reset: false,
                line,
            })?;
            prev_dir = Some(direction);
            prev_type = ty;
            self.cur.pos = saved;
        }
        Ok(())
    }

    fn push_port(&mut self, port: PendingPort) -> Result<(), RtlError> {
        if self.ports.iter().any(|p| p.name == port.name) {
            return Err(RtlError::Syntax {
                line: port.line,
                message: format!("duplicate port `{}`", port.name),
            });
        }
        self.ports.push(port);
        Ok(())
    }

    /// Parses type words and packed dimensions from the cursor up to `end`.
    fn decl_type_until(&mut self, end: usize) -> Result<DeclType, RtlError> {
        let mut words = Vec::new();
        let mut packed = Vec::new();
        while self.cur.pos < end {
            match self.cur.peek() {
                "[" => {
                    let open = self.cur.pos;
                    self.cur.skip_group();
                    packed.push(self.cur.text_between(open + 1, self.cur.pos - 1));
                }
                "enum" => {
                    self.cur.pos += 1;
                    while self.cur.peek() != "{" && self.cur.pos < end {
                        self.cur.pos += 1;
                    }
                    self.parse_enum_members()?;
                    words.push("enum".to_string());
                }
                "struct" | "union" => {
                    self.cur.pos += 1;
                    while self.cur.peek() != "{" && self.cur.pos < end {
                        self.cur.pos += 1;
                    }
                    self.cur.skip_group();
                    words.push("struct".to_string());
                }
                w => {
                    words.push(w.to_string());
                    self.cur.pos += 1;
                }
            }
        }
        let builtin = words.iter().all(|w| {
            is_data_type_keyword(w) || matches!(w.as_str(), "packed" | "const" | "automatic" | "static")
        });
        let data_type = if builtin || words.is_empty() { None } else { Some(words.concat()) };
        Ok(DeclType { data_type, packed })
    }

    fn parse_enum_members(&mut self) -> Result<(), RtlError> {
        self.cur.expect("{")?;
        loop {
            let member = self.cur.ident()?;
            self.enum_members.push(member);
            if self.cur.peek() == "[" {
                self.cur.skip_group();
            }
            if self.cur.eat("=") {
                while !matches!(self.cur.peek(), "," | "}") && !self.cur.at_end() {
                    if matches!(self.cur.peek(), "(" | "[" | "{") {
                        self.cur.skip_group();
                    } else {
                        self.cur.pos += 1;
                    }
                }
            }
            if self.cur.eat(",") {
                continue;
            }
            self.cur.expect("}")?;
            return Ok(());
        }
    }

    fn parse_items(&mut self, gen_depth: u32, term: Terminator) -> Result<(), RtlError> {
        loop {
            if self.cur.at_end() {
                return Err(self.cur.error("unexpected end of module".into()));
            }
            let tok = self.cur.peek();
            match tok {
                "endmodule" => {
                    if term == Terminator::End {
                        return Err(RtlError::UnbalancedDelimiters {
                            what: "generate block".into(),
                            line: self.cur.line(),
                        });
                    }
                    self.cur.pos += 1;
                    return Ok(());
                }
                "end" => {
                    if term == Terminator::EndModule {
                        return Err(RtlError::UnbalancedDelimiters {
                            what: "`end`".into(),
                            line: self.cur.line(),
                        });
                    }
                    self.cur.pos += 1;
                    self.cur.skip_end_label();
                    return Ok(());
                }
                "input" | "output" | "inout" => {
                    let dir = match self.cur.bump() {
                        "input" => Direction::Input,
                        "output" => Direction::Output,
                        _ => Direction::Inout,
                    };
                    self.parse_declaration(Some(dir), gen_depth, false)?;
                }
                "parameter" | "localparam" => {
                    self.cur.pos += 1;
                    self.parse_body_params()?;
                }
                "typedef" => self.parse_typedef()?,
                "genvar" => {
                    self.cur.pos += 1;
                    loop {
                        let g = self.cur.ident()?;
                        self.genvars.push(g);
                        if !self.cur.eat(",") {
                            break;
                        }
                    }
                    self.cur.expect(";")?;
                }
                "generate" | "endgenerate" | ";" => self.cur.pos += 1,
                "for" => self.parse_generate_for(gen_depth)?,
                "if" => self.parse_generate_if(gen_depth)?,
                "begin" => {
                    self.cur.pos += 1;
                    self.cur.skip_end_label();
                    self.parse_items(gen_depth, Terminator::End)?;
                }
                "case" => self.cur.skip_block(&["case"], &["endcase"]),
                "always" | "always_ff" | "always_comb" | "always_latch" | "initial" | "final" => {
                    self.cur.pos += 1;
                    self.cur.skip_statement();
                }
                "function" => self.cur.skip_block(&["function"], &["endfunction"]),
                "task" => self.cur.skip_block(&["task"], &["endtask"]),
                "property" => self.cur.skip_block(&["property"], &["endproperty"]),
                "sequence" => self.cur.skip_block(&["sequence"], &["endsequence"]),
                "clocking" => self.cur.skip_block(&["clocking"], &["endclocking"]),
                "default" if self.cur.peek_at(1) == "clocking" => {
                    self.cur.pos += 1;
                    self.cur.skip_block(&["clocking"], &["endclocking"]);
                }
                "(*" => {
                    while !self.cur.at_end() && self.cur.bump() != "*)" {}
                }
                _ if is_data_type_keyword(tok) => self.parse_declaration(None, gen_depth, false)?,
                _ if self.cur.kind_at(0) == Some(TokenKind::Ident) && !is_keyword(tok) => {
                    if self.looks_like_user_type_decl() {
                        self.parse_declaration(None, gen_depth, true)?;
                    } else {
                        // instance, labelled assertion, or other item
                        self.cur.skip_to_semicolon();
                    }
                }
                _ => self.cur.skip_to_semicolon(),
            }
        }
    }

    /// `type_t name ...;` or `pkg::type_t [packed] name ...;`
    fn looks_like_user_type_decl(&self) -> bool {
        let mut i = 1;
        if self.cur.peek_at(1) == "::" {
            i = 3;
        }
        while self.cur.peek_at(i) == "[" {
            // a packed dimension on a user type; find its close
            let mut depth = 0;
            loop {
                match self.cur.peek_at(i) {
                    "[" => depth += 1,
                    "]" => {
                        depth -= 1;
                        if depth == 0 {
                            break;
                        }
                    }
                    "" => return false,
                    _ => {}
                }
                i += 1;
            }
            i += 1;
        }
        self.cur.kind_at(i) == Some(TokenKind::Ident)
            && !is_keyword(self.cur.peek_at(i))
            && matches!(self.cur.peek_at(i + 1), ";" | "," | "[" | "=")
    }

    fn parse_body_params(&mut self) -> Result<(), RtlError> {
        let start = self.cur.pos;
        self.cur.skip_to_semicolon();
        let end = self.cur.pos - 1;
        // split at top-level commas
        let mut depth = 0usize;
        let mut item = start;
        for i in start..=end {
            match self.tok(i) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                "," | ";" if depth == 0 => {
                    if let Some(p) = self.param_from_range(item, i, true) {
                        self.parameters.push(p);
                    }
                    item = i + 1;
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn parse_typedef(&mut self) -> Result<(), RtlError> {
        self.cur.pos += 1;
        let start = self.cur.pos;
        // find the terminating `;` at depth 0; the name precedes it
        let mut depth = 0usize;
        let mut i = start;
        while i < self.cur.toks.len() {
            match self.tok(i) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                ";" if depth == 0 => break,
                _ => {}
            }
            i += 1;
        }
        if self.tok(start) == "enum" {
            while self.cur.peek() != "{" && self.cur.pos < i {
                self.cur.pos += 1;
            }
            if self.cur.peek() == "{" {
                self.parse_enum_members()?;
            }
        }
        // the name may be followed by unpacked dimensions
        let mut j = i;
        while j > start {
            j -= 1;
            if self.cur.toks[j].kind == TokenKind::Ident && !is_keyword(self.tok(j)) {
                self.typedefs.push(self.tok(j).to_string());
                break;
            }
            if self.tok(j) != "]" {
                break;
            }
            let mut d = 1;
            while d > 0 && j > start {
                j -= 1;
                match self.tok(j) {
                    "]" => d += 1,
                    "[" => d -= 1,
                    _ => {}
                }
            }
        }
        self.cur.pos = (i + 1).min(self.cur.toks.len());
        Ok(())
    }

    fn parse_generate_for(&mut self, gen_depth: u32) -> Result<(), RtlError> {
        self.cur.pos += 1;
        if self.cur.peek() != "(" {
            return Err(self.cur.error("expected `(` after generate `for`".into()));
        }
        if self.cur.peek_at(1) == "genvar" {
            let g = self.cur.peek_at(2).to_string();
            if !self.genvars.contains(&g) {
                self.genvars.push(g);
            }
        }
        self.cur.skip_group();
        self.parse_generate_body(gen_depth + 1)
    }

    fn parse_generate_if(&mut self, gen_depth: u32) -> Result<(), RtlError> {
        self.cur.pos += 1;
        if self.cur.peek() == "(" {
            self.cur.skip_group();
        }
        self.parse_generate_body(gen_depth)?;
        if self.cur.eat("else") {
            if self.cur.peek() == "if" {
                return self.parse_generate_if(gen_depth);
            }
            self.parse_generate_body(gen_depth)?;
        }
        Ok(())
    }

    fn parse_generate_body(&mut self, gen_depth: u32) -> Result<(), RtlError> {
        if self.cur.eat("begin") {
            self.cur.skip_end_label();
            self.parse_items(gen_depth, Terminator::End)
        } else {
            match self.cur.peek() {
                "for" => self.parse_generate_for(gen_depth),
                "if" => self.parse_generate_if(gen_depth),
                t if is_data_type_keyword(t) => self.parse_declaration(None, gen_depth, false),
                "always" | "always_ff" | "always_comb" | "always_latch" | "initial" => {
                    self.cur.pos += 1;
                    self.cur.skip_statement();
                    Ok(())
                }
                _ => {
                    self.cur.skip_to_semicolon();
                    Ok(())
                }
            }
        }
    }

    fn parse_declaration(
        &mut self,
        dir: Option<Direction>,
        gen_depth: u32,
        user_type: bool,
    ) -> Result<(), RtlError> {
        let line = self.cur.line();
        // the type ends right before the first declarator name
        let type_end = self.find_declarator_start(user_type)?;
        let ty = self.decl_type_until(type_end)?;
        loop {
            let name = self.cur.ident()?;
            let mut unpacked = 0u32;
            while self.cur.peek() == "[" {
                self.cur.skip_group();
                unpacked += 1;
            }
            if self.cur.eat("=") {
                while !matches!(self.cur.peek(), "," | ";") && !self.cur.at_end() {
                    if matches!(self.cur.peek(), "(" | "[" | "{") {
                        self.cur.skip_group();
                    } else {
                        self.cur.pos += 1;
                    }
                }
            }
            let width = Width::from_packed(&ty.packed);
            match dir {
                Some(d) => self.declare_port_direction(&name, d, &ty, line)?,
                None => {
                    if let Some(p) = self.ports.iter_mut().find(|p| p.name == name) {
                        // `output q; reg [3:0] q;` refines the port width
                        if p.width == Width::Bits(1) {
                            p.width = width;
                        }
                    } else if !self.internals.iter().any(|s| s.name == name) {
                        self.internals.push(SignalDecl {
                            kind: classify_signal(&name, &self.opts.register_suffixes),
                            name,
                            width,
                            array_depth: unpacked + gen_depth,
                            data_type: ty.data_type.clone(),
                        });
                    }
                }
            }
            if self.cur.eat(",") {
                continue;
            }
            self.cur.expect(";")?;
            return Ok(());
        }
    }

    fn declare_port_direction(
        &mut self,
        name: &str,
        dir: Direction,
        ty: &DeclType,
        line: usize,
    ) -> Result<(), RtlError> {
        let existing = self.ports.iter().position(|p| p.name == name);
        let has_ports = !self.ports.is_empty();
        match existing.map(|i| &mut self.ports[i]) {
            Some(p) => {
                p.direction = Some(dir);
                p.width = Width::from_packed(&ty.packed);
                p.data_type = ty.data_type.clone();
                Ok(())
            }
            None if self.ansi && has_ports => Err(RtlError::Syntax {
                line,
                message: format!("`{name}` declared as a port but not in the port list"),
            }),
            None => self.push_port(PendingPort {
                name: name.to_string(),
                direction: Some(dir),
                width: Width::from_packed(&ty.packed),
                data_type: ty.data_type.clone(),
                is_clock: false,
                is_reset: false,
                line,
            }),
        }
    }

    /// Index of the first declarator identifier of the declaration at the
    /// cursor: the first identifier (outside brackets, past the type) that is
    /// followed by `;`, `,`, `[` or `=`.
    fn find_declarator_start(&self, user_type: bool) -> Result<usize, RtlError> {
        let mut i = self.cur.pos;
        // a user-defined type name (possibly package-qualified) comes first
        let starts_with_name =
            self.cur.toks.get(i).is_some_and(|t| t.kind == TokenKind::Ident) && !is_keyword(self.tok(i));
        let next_is_name = self.cur.kind_at(1) == Some(TokenKind::Ident) || self.tok(i + 1) == "::";
        if starts_with_name && (user_type || next_is_name) {
            i += 1;
            if self.tok(i) == "::" {
                i += 2;
            }
        }
        let mut depth = 0usize;
        while i < self.cur.toks.len() {
            let t = self.tok(i);
            match t {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth = depth.saturating_sub(1),
                ";" if depth == 0 => break,
                _ if depth == 0
                    && self.cur.toks[i].kind == TokenKind::Ident
                    && !is_keyword(t)
                    && matches!(self.tok(i + 1), ";" | "," | "[" | "=")
                    && self.tok(i + 1) != "::" =>
                {
                    return Ok(i);
                }
                _ => {}
            }
            i += 1;
        }
        Err(RtlError::Syntax {
            line: self.cur.line(),
            message: "declaration without a name".into(),
        })
    }
}
