//! Measure files and artifact framing.
//!
//! CSV artifacts start with two comment lines, the tool version and the
//! resolved run configuration as one-line JSON. JSON artifacts wrap the
//! payload as `{"tool", "version", "config", "result"}`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::measure::{Measure, MeasureSpec};
use crate::VERSION;

pub fn parse_measure(text: &str) -> Result<Measure> {
    let spec: MeasureSpec = serde_json::from_str(text)?;
    Measure::new(spec)
}

pub fn load_measure(path: &Path) -> Result<Measure> {
    parse_measure(&fs::read_to_string(path)?)
}

/// Writes the `# typecount <version>` and `# config: {...}` preamble.
pub fn write_csv_preamble<W: Write, C: Serialize>(mut w: W, config: &C) -> Result<()> {
    writeln!(w, "# typecount {VERSION}")?;
    writeln!(w, "# config: {}", serde_json::to_string(config)?)?;
    Ok(())
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a C,
    result: &'a T,
}

pub fn write_json<W: Write, C: Serialize, T: Serialize>(mut w: W, config: &C, result: &T) -> Result<()> {
    let env = Envelope { tool: "typecount", version: VERSION, config, result };
    serde_json::to_writer_pretty(&mut w, &env)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn parses_both_kinds() {
        let m = parse_measure(r#"{"kind":"lambda","kingman_mass":1}"#).unwrap();
        assert_eq!(m.kingman_mass(), 1.0);
        let x = parse_measure(r#"{"kind":"xi","atoms":[{"x":[0.5,0.5],"weight":1}]}"#).unwrap();
        assert_eq!(x.components().len(), 1);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_atoms() {
        assert!(matches!(parse_measure(r#"{"kind":"lambda","kingman":1}"#), Err(Error::Parse(_))));
        assert!(matches!(
            parse_measure(r#"{"kind":"xi","atoms":[{"x":[0.5,0.6],"weight":1}]}"#),
            Err(Error::SimplexViolation(_))
        ));
    }

    #[test]
    fn preamble_lines() {
        let mut buf = Vec::new();
        write_csv_preamble(&mut buf, &serde_json::json!({"n": 3})).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, format!("# typecount {VERSION}\n# config: {{\"n\":3}}\n"));
    }
}
