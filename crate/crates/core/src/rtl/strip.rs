use super::lexer::{lex, LexError, TokenKind};
use super::RtlError;

/// Removes `//` and `/* */` comments, keeping string literals verbatim.
///
/// Lines that held a comment lose their trailing whitespace, and lines left
/// blank by the removal are dropped. Lines without comments are untouched,
/// so the function is idempotent.
pub fn strip_comments(text: &str) -> Result<String, RtlError> {
    let tokens = lex(text).map_err(|e| match e {
        LexError::UnterminatedBlockComment { line, col } => {
            RtlError::UnterminatedBlockComment { line, col }
        }
        LexError::UnterminatedString { line, .. } => RtlError::UnbalancedDelimiters {
            what: "string literal".into(),
            line,
        },
    })?;

    let mut out = String::with_capacity(text.len());
    let mut line = String::new();
    let mut had_comment = false;

    let flush = |out: &mut String, line: &mut String, had_comment: bool, newline: bool| {
        if had_comment {
            let trimmed = line.trim_end();
            if !trimmed.is_empty() {
                out.push_str(trimmed);
                if newline {
                    out.push('\n');
                }
            }
        } else {
            out.push_str(line);
            if newline {
                out.push('\n');
            }
        }
        line.clear();
    };

    for tok in &tokens {
        let s = tok.text(text);
        if tok.kind.is_comment() {
            had_comment = true;
            continue;
        }
        if tok.kind == TokenKind::Whitespace && s.contains('\n') {
            let mut parts = s.split('\n').peekable();
            while let Some(part) = parts.next() {
                if parts.peek().is_some() {
                    line.push_str(part.strip_suffix('\r').unwrap_or(part));
                    flush(&mut out, &mut line, had_comment, true);
                    had_comment = false;
                } else {
                    line.push_str(part);
                }
            }
        } else {
            line.push_str(s);
        }
    }
    flush(&mut out, &mut line, had_comment, false);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtl::estimate_tokens;

    #[test]
    fn line_comment_removed() {
        assert_eq!(strip_comments("a = b; // note").unwrap(), "a = b;");
    }

    #[test]
    fn block_comments_removed() {
        assert_eq!(
            strip_comments("/*x*/module m;/*y*/endmodule").unwrap(),
            "module m;endmodule"
        );
    }

    #[test]
    fn comment_only_lines_dropped() {
        let src = "// header\nmodule m;\n  // inside\n  logic a; /* trailing */\nendmodule\n";
        assert_eq!(strip_comments(src).unwrap(), "module m;\n  logic a;\nendmodule\n");
    }

    #[test]
    fn strings_preserved() {
        let src = "$display(\"// keep /* me */\"); // drop";
        assert_eq!(strip_comments(src).unwrap(), "$display(\"// keep /* me */\");");
    }

    #[test]
    fn unterminated_block_comment() {
        assert_eq!(
            strip_comments("a;\n b /* no end"),
            Err(RtlError::UnterminatedBlockComment { line: 2, col: 4 })
        );
    }

    #[test]
    fn idempotent_on_mixed_input() {
        let src = "x /* a\n b */ y\n\n   \n// c\nz // d\n";
        let once = strip_comments(src).unwrap();
        assert_eq!(strip_comments(&once).unwrap(), once);
        // blank lines without comments are kept
        assert!(once.contains("\n\n"));
    }

    #[test]
    fn heavily_commented_text_gets_cheaper() {
        let mut src = String::new();
        for i in 0..20 {
            if i % 5 < 2 {
                src.push_str(&format!("// comment line number {i} describing the logic\n"));
            } else {
                src.push_str(&format!("assign w{i} = a{i} & b{i};\n"));
            }
        }
        let stripped = strip_comments(&src).unwrap();
        assert!(estimate_tokens(&stripped) < estimate_tokens(&src));
    }
}
