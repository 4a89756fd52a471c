//! Terminal styling, off when `FACET_NO_COLOR` is set or stderr is not a
//! terminal.

use std::io::IsTerminal;

fn enabled() -> bool {
    std::env::var_os("FACET_NO_COLOR").is_none() && std::io::stderr().is_terminal()
}

fn paint(text: &str, code: &str) -> String {
    if enabled() {
        format!("\x1b[{code}m{text}\x1b[0m")
    } else {
        text.to_string()
    }
}

pub fn error_label() -> String {
    paint("error:", "1;31")
}

pub fn warning_label() -> String {
    paint("warning:", "1;33")
}
