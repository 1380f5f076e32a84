use std::io::IsTerminal;

/// Status lines on stderr; coloured only on a terminal and when
/// `EMBPRED_NO_COLOR` is unset.
pub struct Ui {
    color: bool,
}

impl Ui {
    pub fn new() -> Self {
        let color = std::env::var_os("EMBPRED_NO_COLOR").is_none() && std::io::stderr().is_terminal();
        Self { color }
    }

    fn paint(&self, code: &str, text: &str) -> String {
        if self.color {
            format!("\x1b[{code}m{text}\x1b[0m")
        } else {
            text.to_string()
        }
    }

    pub fn info(&self, msg: &str) {
        eprintln!("{} {msg}", self.paint("1;32", "==>"));
    }

    pub fn progress(&self, msg: &str) {
        eprintln!("{} {msg}", self.paint("2", "  -"));
    }

    pub fn error(&self, msg: &str) {
        eprintln!("{} {msg}", self.paint("1;31", "error:"));
    }
}
