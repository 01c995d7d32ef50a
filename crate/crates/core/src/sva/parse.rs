use crate::rtl::keywords::is_keyword;
use crate::rtl::lexer::{lex_lenient, Token, TokenKind};
use crate::rtl::RtlModule;

use super::{
    Assertion, AssertionBatch, AssertionKind, Directive, LoopKind, LoopWrapper, PropertyDecl, Residue, Side,
    SignalRef,
};

const PAST_LIKE: [&str; 5] = ["$past", "$stable", "$rose", "$fell", "$changed"];

/// Best-effort extraction of labelled assertions from an LLM completion.
/// Never fails; unclassified text is kept as residue.
pub fn parse_batch(text: &str, module: Option<&RtlModule>) -> AssertionBatch {
    let all = lex_lenient(text);
    let sig: Vec<usize> = (0..all.len()).filter(|&i| !all[i].kind.is_trivia()).collect();
    let mut p = BatchParser { text, all: &all, sig, pos: 0, module, batch: AssertionBatch::default(), residue_from: None };
    p.run();
    p.flush_residue(p.sig.len());
    p.collect_comment_residue();
    p.resolve_names();
    p.batch
}

struct BatchParser<'a> {
    text: &'a str,
    all: &'a [Token],
    /// Indices into `all` of non-trivia tokens.
    sig: Vec<usize>,
    pos: usize,
    module: Option<&'a RtlModule>,
    batch: AssertionBatch,
    residue_from: Option<usize>,
}

impl<'a> BatchParser<'a> {
    fn tok(&self, i: usize) -> Option<&'a Token> {
        self.sig.get(i).map(|&j| &self.all[j])
    }

    fn s(&self, i: usize) -> &'a str {
        self.tok(i).map_or("", |t| t.text(self.text))
    }

    fn kind(&self, i: usize) -> Option<TokenKind> {
        self.tok(i).map(|t| t.kind)
    }

    /// Source text spanning significant tokens `a..b`.
    fn span(&self, a: usize, b: usize) -> &'a str {
        if a >= b || a >= self.sig.len() {
            return "";
        }
        let start = self.all[self.sig[a]].start;
        let end = self.all[self.sig[b.min(self.sig.len()) - 1]].end;
        &self.text[start..end]
    }

    fn is_name(&self, i: usize) -> bool {
        self.kind(i) == Some(TokenKind::Ident) && !is_keyword(self.s(i))
    }

    fn run(&mut self) {
        while self.pos < self.sig.len() {
            let start = self.pos;
            let handled = match self.s(self.pos) {
                "property" => self.property_decl(),
                "for" | "foreach" if self.s(self.pos + 1) == "(" => self.wrapper(),
                _ => self.labelled_item(None).is_some(),
            };
            if handled {
                self.flush_residue(start);
            } else {
                self.residue_from.get_or_insert(start);
                self.pos = start + 1;
            }
        }
    }

    fn flush_residue(&mut self, upto: usize) {
        if let Some(from) = self.residue_from.take() {
            let text = self.span(from, upto).to_string();
            if !text.trim().is_empty() {
                let line = self.tok(from).map_or(0, |t| t.line);
                self.batch.unparsed_residue.push(Residue { text, line, comment_only: false });
            }
        }
    }

    /// Comments that did not become a leading comment are residue too.
    fn collect_comment_residue(&mut self) {
        let mut attached = std::collections::HashSet::new();
        for a in &self.batch.assertions {
            if let Some(c) = &a.leading_comment {
                attached.insert(c.clone());
            }
        }
        let mut i = 0;
        let mut extra = Vec::new();
        while i < self.all.len() {
            if self.all[i].kind.is_comment() {
                let (block, next) = comment_block(self.text, self.all, i);
                if !attached.remove(&block) {
                    extra.push(Residue { text: block, line: self.all[i].line, comment_only: true });
                }
                i = next;
            } else {
                i += 1;
            }
        }
        self.batch.unparsed_residue.extend(extra);
        self.batch.unparsed_residue.sort_by_key(|r| r.line);
    }

    /// `property name; ... endproperty [: name]`
    fn property_decl(&mut self) -> bool {
        let start = self.pos;
        let mut i = start + 1;
        while i < self.sig.len() && self.s(i) != "endproperty" {
            i += 1;
        }
        if i >= self.sig.len() {
            return false;
        }
        i += 1;
        if self.s(i) == ":" {
            i += 2;
        }
        let name = if self.is_name(start + 1) { self.s(start + 1).to_string() } else { String::new() };
        let line = self.tok(start).map_or(0, |t| t.line);
        self.batch.property_decls.push(PropertyDecl { name, text: self.span(start, i).to_string(), line });
        self.pos = i;
        true
    }

    /// `for (...) begin [: label] items end [: label]` or the `foreach` form.
    fn wrapper(&mut self) -> bool {
        let start = self.pos;
        let kind = if self.s(start) == "for" { LoopKind::GenerateFor } else { LoopKind::Foreach };
        let Some(close) = self.matching(start + 1) else { return false };
        let (genvar, bound) = match kind {
            LoopKind::GenerateFor => self.for_header(start + 2, close),
            LoopKind::Foreach => self.foreach_header(start + 2, close),
        };
        let mut i = close + 1;
        let has_begin = self.s(i) == "begin";
        if has_begin {
            i += 1;
        }
        let header = self.span(start, i).to_string();
        let mut label = None;
        if has_begin && self.s(i) == ":" && self.is_name(i + 1) {
            label = Some(self.s(i + 1).to_string());
            i += 2;
        }
        let wrapper = LoopWrapper { kind, genvar, bound, header, label };
        let leading = self.leading_comment(start);
        let base = self.batch.assertions.len();
        self.pos = i;
        let mut found = false;
        let mut first = true;
        loop {
            if self.pos >= self.sig.len() {
                break;
            }
            if has_begin && self.s(self.pos) == "end" {
                self.pos += 1;
                if self.s(self.pos) == ":" && self.is_name(self.pos + 1) {
                    self.pos += 2;
                }
                break;
            }
            let before = self.batch.assertions.len();
            if self.labelled_item(Some(&wrapper)).is_some() {
                found = true;
                if first {
                    if let Some(a) = self.batch.assertions.get_mut(before) {
                        if a.leading_comment.is_none() {
                            a.leading_comment = leading.clone();
                        }
                    }
                }
                first = false;
                if !has_begin {
                    break;
                }
            } else {
                // not an assertion: the whole wrapper is residue
                self.pos = start;
                self.batch.assertions.truncate(base);
                return false;
            }
        }
        found
    }

    fn for_header(&self, a: usize, b: usize) -> (String, String) {
        // genvar i = 0 ; i < BOUND ; ...
        let mut i = a;
        while i < b && (self.s(i) == "genvar" || self.s(i) == "int" || self.s(i) == "integer") {
            i += 1;
        }
        let genvar = if self.is_name(i) { self.s(i).to_string() } else { String::new() };
        let semi1 = (a..b).find(|&k| self.s(k) == ";");
        let bound = semi1
            .and_then(|s1| {
                let semi2 = (s1 + 1..b).find(|&k| self.s(k) == ";")?;
                let op = (s1 + 1..semi2).find(|&k| matches!(self.s(k), "<" | "<=" | "!=" | ">" | ">="))?;
                Some(self.span(op + 1, semi2).trim().to_string())
            })
            .unwrap_or_default();
        (genvar, bound)
    }

    fn foreach_header(&self, a: usize, b: usize) -> (String, String) {
        let open = (a..b).find(|&k| self.s(k) == "[");
        let bound = self.span(a, open.unwrap_or(b)).trim().to_string();
        let genvar = open
            .and_then(|o| (o + 1..b).find(|&k| self.is_name(k)))
            .map(|k| self.s(k).to_string())
            .unwrap_or_default();
        (genvar, bound)
    }

    /// Index of the token closing the group opened at `open`.
    fn matching(&self, open: usize) -> Option<usize> {
        let mut depth = 0usize;
        for i in open..self.sig.len() {
            match self.s(i) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => {
                    depth = depth.checked_sub(1)?;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                _ => {}
            }
        }
        None
    }

    /// Index of the `;` ending the statement starting at `i` (begin/end aware).
    fn statement_end(&self, mut i: usize) -> Option<usize> {
        let mut depth = 0i64;
        while i < self.sig.len() {
            match self.s(i) {
                "(" | "[" | "{" | "begin" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                "end" => {
                    depth -= 1;
                    if depth == 0 {
                        return Some(i);
                    }
                }
                ";" if depth <= 0 => return Some(i),
                _ => {}
            }
            if depth < 0 {
                return None;
            }
            i += 1;
        }
        None
    }

    /// `NAME [suffix] : keyword ... ;`
    fn labelled_item(&mut self, wrapper: Option<&LoopWrapper>) -> Option<()> {
        let start = self.pos;
        if !self.is_name(start) {
            return None;
        }
        let mut i = start + 1;
        let mut suffix = None;
        if self.s(i) == "[" {
            let close = self.matching(i)?;
            suffix = Some(self.span(i, close + 1).to_string());
            i = close + 1;
        }
        if self.s(i) != ":" {
            return None;
        }
        let kw_at = i + 1;
        let keyword = self.s(kw_at);
        if self.kind(kw_at) != Some(TokenKind::Ident) || !is_keyword(keyword) || keyword == "begin" {
            return None;
        }
        let end = self.statement_end(kw_at)?;
        let (directive, kind, expr_range) = match keyword {
            "assert" | "assume" | "cover" => {
                let directive = match keyword {
                    "assert" => Directive::Assert,
                    "assume" => Directive::Assume,
                    _ => Directive::Cover,
                };
                if self.s(kw_at + 1) == "property" && self.s(kw_at + 2) == "(" {
                    let close = self.matching(kw_at + 2)?;
                    (directive, None, Some((kw_at + 3, close)))
                } else if self.s(kw_at + 1) == "(" {
                    let close = self.matching(kw_at + 1)?;
                    (directive, Some(AssertionKind::Immediate), Some((kw_at + 2, close)))
                } else {
                    (directive, Some(AssertionKind::Other), None)
                }
            }
            other => (Directive::Other(other.to_string()), Some(AssertionKind::Other), None),
        };
        let declared = self.s(start).to_string();
        let first = self.tok(start)?;
        let mut genvars: Vec<&str> = Vec::new();
        if let Some(w) = wrapper {
            genvars.push(&w.genvar);
        }
        let (expression, pre, post, signals, implication) = match expr_range {
            Some((a, b)) => self.analyze(a, b, &genvars),
            None => (String::new(), String::new(), String::new(), Vec::new(), None),
        };
        let kind = kind.unwrap_or(match implication.as_deref() {
            Some("|->") => AssertionKind::SameCycle,
            Some("|=>") => AssertionKind::NextCycle,
            _ => AssertionKind::Other,
        });
        let leading_comment = if wrapper.is_none() { self.leading_comment(start) } else { None };
        self.batch.assertions.push(Assertion {
            name: declared.clone(),
            declared_name: declared,
            name_suffix: suffix,
            kind,
            directive,
            raw: self.span(start, end + 1).to_string(),
            body: self.span(kw_at, end + 1).to_string(),
            expression,
            precondition: pre,
            postcondition: post,
            signals,
            loop_wrapper: wrapper.cloned(),
            leading_comment,
            line: first.line,
            col: first.col,
        });
        self.pos = end + 1;
        Some(())
    }

    /// Splits the expression at its top-level implication and collects signals.
    #[allow(clippy::type_complexity)]
    fn analyze(
        &self,
        a: usize,
        b: usize,
        genvars: &[&str],
    ) -> (String, String, String, Vec<SignalRef>, Option<String>) {
        let expression = self.span(a, b).trim().to_string();
        // skip a leading clocking event and `disable iff (...)`
        let mut body = a;
        if self.s(body) == "@" && self.s(body + 1) == "(" {
            body = self.matching(body + 1).map_or(b, |c| c + 1);
        }
        if self.s(body) == "disable" && self.s(body + 1) == "iff" && self.s(body + 2) == "(" {
            body = self.matching(body + 2).map_or(b, |c| c + 1);
        }
        let mut depth = 0i64;
        let mut imp = None;
        for i in body..b {
            match self.s(i) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                "|->" | "|=>" if depth == 0 => {
                    imp = Some(i);
                    break;
                }
                _ => {}
            }
        }
        let (pre, post) = match imp {
            Some(k) => (self.span(body, k).trim().to_string(), self.span(k + 1, b).trim().to_string()),
            None => (String::new(), self.span(body, b).trim().to_string()),
        };
        let signals = self.signals(a, b, imp, genvars);
        (expression, pre, post, signals, imp.map(|k| self.s(k).to_string()))
    }

    fn signals(&self, a: usize, b: usize, imp: Option<usize>, genvars: &[&str]) -> Vec<SignalRef> {
        let mut out = Vec::new();
        // close-paren index for each open past-like scope
        let mut past_until: Vec<usize> = Vec::new();
        let mut index_until: Vec<usize> = Vec::new();
        let mut i = a;
        while i < b {
            past_until.retain(|&e| e > i);
            index_until.retain(|&e| e > i);
            let t = self.s(i);
            if PAST_LIKE.contains(&t) && self.s(i + 1) == "(" {
                if let Some(c) = self.matching(i + 1) {
                    past_until.push(c);
                }
                i += 1;
                continue;
            }
            if t == "[" {
                if let Some(c) = self.matching(i) {
                    index_until.push(c);
                }
            }
            if t == "@" && self.s(i + 1) == "(" {
                // clocking event: not signal reads
                i = self.matching(i + 1).map_or(b, |c| c + 1);
                continue;
            }
            if !self.is_name(i) || self.s(i.wrapping_sub(1)) == "." && i > a {
                i += 1;
                continue;
            }
            // dotted chain
            let mut chain = vec![i];
            while self.s(chain[chain.len() - 1] + 1) == "." && self.is_name(chain[chain.len() - 1] + 2) {
                chain.push(chain[chain.len() - 1] + 2);
            }
            let last = *chain.last().expect("non-empty chain");
            if self.s(last + 1) == "(" {
                // function call
                i = last + 1;
                continue;
            }
            let first = self.s(chain[0]);
            let (prefix, name_at) = match self.module {
                Some(m) if chain.len() >= 2 && first == m.name => (Some(first.to_string()), chain[1]),
                Some(_) => (None, chain[0]),
                None if chain.len() >= 2 => (Some(first.to_string()), chain[1]),
                None => (None, chain[0]),
            };
            let name = self.s(name_at);
            if !self.excluded(name, genvars) {
                let tok = self.tok(chain[0]).expect("token exists");
                out.push(SignalRef {
                    name: name.to_string(),
                    prefix,
                    side: match imp {
                        Some(k) if i < k => Side::Pre,
                        Some(_) => Side::Post,
                        None => Side::Whole,
                    },
                    under_past: !past_until.is_empty(),
                    in_index: !index_until.is_empty(),
                    line: tok.line,
                    col: tok.col,
                });
            }
            i = last + 1;
        }
        out
    }

    fn excluded(&self, name: &str, genvars: &[&str]) -> bool {
        if genvars.contains(&name) {
            return true;
        }
        match self.module {
            Some(m) => m.is_constant(name) || m.genvars.iter().any(|g| g == name),
            None => is_all_caps(name),
        }
    }

    /// Comment block ending on the line right before significant token `at`.
    fn leading_comment(&self, at: usize) -> Option<String> {
        let idx = self.sig[at];
        let item_line = self.all[idx].line;
        let mut j = idx;
        let mut first_comment = None;
        let mut expected_line = item_line;
        while j > 0 {
            j -= 1;
            let t = &self.all[j];
            match t.kind {
                TokenKind::Whitespace => continue,
                TokenKind::LineComment | TokenKind::BlockComment => {
                    let end_line = t.line + t.text(self.text).matches('\n').count();
                    let end_line = if t.kind == TokenKind::LineComment { t.line } else { end_line };
                    if end_line + 1 != expected_line {
                        break;
                    }
                    // must start its own line
                    if !self.text[..t.start].rsplit('\n').next().unwrap_or("").trim().is_empty() {
                        break;
                    }
                    first_comment = Some(j);
                    expected_line = t.line;
                }
                _ => break,
            }
        }
        let first = first_comment?;
        let last = (first..idx).rev().find(|&k| self.all[k].kind.is_comment())?;
        Some(self.text[self.all[first].start..self.all[last].end].to_string())
    }

    /// Gives colliding names `_dupN` suffixes; `declared_name` keeps the original.
    fn resolve_names(&mut self) {
        let mut used = std::collections::HashSet::new();
        for a in &mut self.batch.assertions {
            let mut name = a.declared_name.clone();
            let mut n = 1;
            while !used.insert(name.clone()) {
                name = format!("{}_dup{n}", a.declared_name);
                n += 1;
            }
            a.name = name;
        }
    }
}

/// Consecutive comment tokens (separated by whitespace only) starting at `i`.
fn comment_block(text: &str, all: &[Token], i: usize) -> (String, usize) {
    let mut last = i;
    let mut j = i + 1;
    while j < all.len() {
        match all[j].kind {
            TokenKind::Whitespace if all[j].text(text).matches('\n').count() <= 1 => j += 1,
            TokenKind::LineComment | TokenKind::BlockComment => {
                last = j;
                j += 1;
            }
            _ => break,
        }
    }
    (text[all[i].start..all[last].end].to_string(), last + 1)
}

fn is_all_caps(name: &str) -> bool {
    name.chars().any(|c| c.is_ascii_uppercase()) && !name.chars().any(|c| c.is_ascii_lowercase())
}
