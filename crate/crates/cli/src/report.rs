use std::fmt::Display;
use std::fs;
use std::io::Write;
use std::path::Path;

use crate::commands::CliError;

/// Delimited text preceded by a `# key=value` block holding the resolved
/// configuration.
pub struct Report {
    config: Vec<(String, String)>,
    body: String,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Self {
            config: vec![("command".into(), command.into())],
            body: String::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.config.push((key.into(), value.to_string()));
    }

    pub fn line(&mut self, line: impl AsRef<str>) {
        self.body.push_str(line.as_ref());
        self.body.push('\n');
    }

    pub fn body(&mut self, text: &str) {
        self.body.push_str(text);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.config {
            out.push_str(&format!("# {k}={v}\n"));
        }
        out.push_str(&self.body);
        out
    }

    pub fn emit(&self, output: Option<&Path>) -> Result<(), CliError> {
        let text = self.render();
        match output {
            Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .map_err(|e| CliError::Data(mrcov::Error::Io(e)))
            }
        }
    }
}
