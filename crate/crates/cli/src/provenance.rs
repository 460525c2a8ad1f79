//! Headers that make every output file reproducible from itself.

use nanolev::model::to_config_string;
use nanolev::SystemParams;

/// Prefix of the parameter lines inside a provenance header.
pub const CFG_TAG: &str = "cfg: ";

/// Header text without comment markers; writers prefix each line with `# `.
pub fn header(argv: &[String], seed: u64, params: &SystemParams, extra: &[String]) -> String {
    let mut h = format!(
        "nanolev-cli {} (nanolev {})\ncommand: {}\nseed: {}\n",
        env!("CARGO_PKG_VERSION"),
        nanolev::VERSION,
        argv.iter().map(|a| quote(a)).collect::<Vec<_>>().join(" "),
        seed
    );
    for line in to_config_string(params).lines() {
        h.push_str(CFG_TAG);
        h.push_str(line);
        h.push('\n');
    }
    for e in extra {
        h.push_str(e);
        h.push('\n');
    }
    h
}

fn quote(a: &str) -> String {
    if a.is_empty() || a.chars().any(|c| c.is_whitespace() || c == '\'' || c == '"') {
        format!("'{}'", a.replace('\'', "'\\''"))
    } else {
        a.to_string()
    }
}

/// Parameter lines recovered from a provenance header, if `text` has one.
pub fn extract_config(text: &str) -> Option<String> {
    let marker = format!("# {CFG_TAG}");
    let lines: Vec<&str> = text
        .lines()
        .filter_map(|l| l.strip_prefix(marker.as_str()))
        .collect();
    if lines.is_empty() {
        None
    } else {
        Some(lines.join("\n"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nanolev::presets::preset;

    #[test]
    fn header_round_trips_parameters() {
        let p = preset("fig6").unwrap();
        let h = header(&["nanolev".into(), "derive".into()], 7, &p, &["note".into()]);
        let commented: String = h.lines().map(|l| format!("# {l}\n")).collect();
        let cfg = extract_config(&commented).unwrap();
        let q: SystemParams = nanolev::model::parse_config(&cfg).unwrap();
        assert_eq!(p, q);
        assert!(h.contains("seed: 7"));
        assert!(extract_config("omega_z = 1\n").is_none());
    }

    #[test]
    fn quoting() {
        assert_eq!(quote("a b"), "'a b'");
        assert_eq!(quote("plain"), "plain");
    }
}
