use super::lexer::{lex_lenient, significant, TokenKind};
use super::parser::Cursor;
use super::{FsmInfo, RtlModule, SignalKind};

/// Finds the first `case (sel)` whose selector is a register and whose item
/// labels are enum members or parameters.
pub fn detect_fsm(module: &RtlModule) -> Option<FsmInfo> {
    let text = module.stripped_text.as_str();
    let toks = significant(&lex_lenient(text));
    let mut cur = Cursor::new(text, toks);

    while !cur.at_end() {
        let is_case = matches!(cur.peek(), "case" | "casez" | "casex")
            && cur.kind_at(0) == Some(TokenKind::Ident);
        if !is_case {
            cur.pos += 1;
            continue;
        }
        let case_at = cur.pos;
        cur.pos += 1;
        if cur.peek() != "(" || cur.peek_at(2) != ")" || cur.kind_at(1) != Some(TokenKind::Ident) {
            continue;
        }
        let selector = cur.peek_at(1).to_string();
        cur.pos += 3;
        let states = case_item_states(&mut cur, module);
        let is_register = module
            .internal(&selector)
            .is_some_and(|s| s.kind == SignalKind::Register);
        if is_register && !states.is_empty() {
            let transitions_detected = assigns_state(module, &states);
            return Some(FsmInfo { state_signal: selector, states, transitions_detected });
        }
        cur.pos = case_at + 1;
    }
    None
}

/// Collects constant labels of the items of the case statement at the cursor.
fn case_item_states(cur: &mut Cursor<'_>, module: &RtlModule) -> Vec<String> {
    let mut states: Vec<String> = Vec::new();
    while !cur.at_end() {
        match cur.peek() {
            "endcase" => {
                cur.pos += 1;
                break;
            }
            "default" => {
                cur.pos += 1;
                cur.eat(":");
                cur.skip_statement();
            }
            _ => {
                // labels up to the `:` at depth 0
                let mut depth = 0usize;
                let mut label = Vec::new();
                while !cur.at_end() {
                    let t = cur.peek();
                    match t {
                        "(" | "[" | "{" => depth += 1,
                        ")" | "]" | "}" => depth = depth.saturating_sub(1),
                        ":" if depth == 0 => break,
                        "," if depth == 0 => {
                            push_label(&mut states, &label, module);
                            label.clear();
                            cur.pos += 1;
                            continue;
                        }
                        "endcase" => return states,
                        _ => {}
                    }
                    label.push(t);
                    cur.pos += 1;
                }
                push_label(&mut states, &label, module);
                cur.eat(":");
                cur.skip_statement();
            }
        }
    }
    states
}

fn push_label(states: &mut Vec<String>, label: &[&str], module: &RtlModule) {
    if let [name] = label {
        if module.is_constant(name) && !states.iter().any(|s| s == name) {
            states.push(name.to_string());
        }
    }
}

/// Any `x = STATE;` or `x <= STATE;` in the module body.
fn assigns_state(module: &RtlModule, states: &[String]) -> bool {
    let text = module.stripped_text.as_str();
    let toks = significant(&lex_lenient(text));
    toks.windows(3).any(|w| {
        matches!(w[0].text(text), "=" | "<=")
            && states.iter().any(|s| s == w[1].text(text))
            && w[2].text(text) == ";"
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rtl::{parse_module, SourceFile};

    fn module(text: &str) -> RtlModule {
        parse_module(&SourceFile::new("t.sv", text)).unwrap()
    }

    #[test]
    fn enum_state_machine() {
        let m = module(
            "module ptw(input clk, input rst_n, input rvalid);
               typedef enum logic [1:0] {IDLE, WAIT_RVALID, DONE} state_e;
               state_e state_q, state_d;
               always_comb begin
                 state_d = state_q;
                 unique case (state_q)
                   IDLE: state_d = WAIT_RVALID;
                   WAIT_RVALID: if (rvalid) state_d = DONE;
                   DONE, IDLE: begin state_d = IDLE; end
                   default: state_d = IDLE;
                 endcase
               end
               always_ff @(posedge clk) state_q <= state_d;
             endmodule",
        );
        let fsm = detect_fsm(&m).unwrap();
        assert_eq!(fsm.state_signal, "state_q");
        assert_eq!(fsm.states, ["IDLE", "WAIT_RVALID", "DONE"]);
        assert!(fsm.transitions_detected);
    }

    #[test]
    fn localparam_states() {
        let m = module(
            "module f(input clk);
               localparam S0 = 0, S1 = 1;
               logic cur_r;
               always @(posedge clk) case (cur_r) S0: cur_r <= S1; S1: cur_r <= S0; endcase
             endmodule",
        );
        let fsm = detect_fsm(&m).unwrap();
        assert_eq!(fsm.states, ["S0", "S1"]);
    }

    #[test]
    fn case_on_wire_is_not_an_fsm() {
        let m = module(
            "module f(input clk);
               localparam S0 = 0, S1 = 1;
               logic sel;
               logic out;
               always_comb case (sel) S0: out = 1; S1: out = 0; endcase
             endmodule",
        );
        assert_eq!(detect_fsm(&m), None);
    }

    #[test]
    fn numeric_labels_are_not_states() {
        let m = module(
            "module f(input clk);
               logic [1:0] ptr_r;
               logic out;
               always_comb case (ptr_r) 2'd0: out = 1; default: out = 0; endcase
             endmodule",
        );
        assert_eq!(detect_fsm(&m), None);
    }
}
