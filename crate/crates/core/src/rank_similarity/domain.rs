use std::net::IpAddr;
use std::path::Path;

use publicsuffix::{List, Psl};
use url::Url;

use crate::error::{invalid, Error, Result};

/// Public-suffix rule set in the standard `public_suffix_list.dat` format.
#[derive(Debug)]
pub struct SuffixRules(List);

impl SuffixRules {
    /// Accepts the full list with its section markers, or a bare rule list,
    /// which is read as ICANN rules.
    pub fn parse(text: &str) -> Result<Self> {
        let text = if text.contains("===BEGIN ") {
            text.to_string()
        } else {
            format!("// ===BEGIN ICANN DOMAINS===\n{text}")
        };
        text.parse::<List>()
            .map(SuffixRules)
            .map_err(|e| invalid(format!("suffix rules: {e}")))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFixture(path.to_path_buf()));
        }
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

/// Reduces a URL or bare hostname to its registrable domain, lowercase.
///
/// With `rules` the public-suffix algorithm decides where the registrable
/// part starts; without them the last two labels are kept.
pub fn normalize_domain(url: &str, rules: Option<&SuffixRules>) -> Result<String> {
    let host = extract_host(url)?;
    if host.parse::<IpAddr>().is_ok() {
        return Ok(host);
    }
    match rules {
        Some(SuffixRules(list)) => list
            .domain(host.as_bytes())
            .map(|d| String::from_utf8_lossy(d.as_bytes()).into_owned())
            .ok_or_else(|| invalid(format!("`{host}` is itself a public suffix"))),
        None => {
            let labels: Vec<&str> = host.split('.').collect();
            let start = labels.len().saturating_sub(2);
            Ok(labels[start..].join("."))
        }
    }
}

fn extract_host(input: &str) -> Result<String> {
    let trimmed = input.trim();
    if trimmed.is_empty() {
        return Err(invalid("empty url"));
    }
    let parsed = if trimmed.contains("://") {
        Url::parse(trimmed)
    } else {
        Url::parse(&format!("http://{trimmed}"))
    }
    .map_err(|e| invalid(format!("malformed url `{trimmed}`: {e}")))?;
    let host = parsed
        .host_str()
        .ok_or_else(|| invalid(format!("no hostname in `{trimmed}`")))?
        .trim_end_matches('.')
        .trim_start_matches('[')
        .trim_end_matches(']')
        .to_ascii_lowercase();
    if host.is_empty() || host.split('.').any(str::is_empty) {
        return Err(invalid(format!("no hostname in `{trimmed}`")));
    }
    Ok(host)
}

#[cfg(test)]
mod tests {
    use super::*;

    const RULES: &str = "// test rules\ncom\nuk\nco.uk\ngov\n*.ck\n!www.ck\n";

    #[test]
    fn heuristic_fallback() {
        assert_eq!(normalize_domain("https://international.nytimes.com/2020/x", None).unwrap(), "nytimes.com");
        assert_eq!(normalize_domain("nytimes.com", None).unwrap(), "nytimes.com");
        assert_eq!(normalize_domain("WWW.CNN.com:443/path?q=1", None).unwrap(), "cnn.com");
        assert_eq!(normalize_domain("localhost", None).unwrap(), "localhost");
    }

    #[test]
    fn suffix_rules_apply() {
        let rules = SuffixRules::parse(RULES).unwrap();
        assert_eq!(normalize_domain("https://www.bbc.co.uk/news", Some(&rules)).unwrap(), "bbc.co.uk");
        assert_eq!(normalize_domain("https://atg.wa.gov/", Some(&rules)).unwrap(), "wa.gov");
        assert_eq!(normalize_domain("a.b.foo.ck", Some(&rules)).unwrap(), "b.foo.ck");
        assert_eq!(normalize_domain("www.ck", Some(&rules)).unwrap(), "www.ck");
        assert!(normalize_domain("co.uk", Some(&rules)).is_err());
    }

    #[test]
    fn malformed_inputs_error() {
        for bad in ["", "   ", "http://", "a..b", "http://:80/"] {
            assert!(normalize_domain(bad, None).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn ip_hosts_pass_through() {
        assert_eq!(normalize_domain("http://10.1.2.3/x", None).unwrap(), "10.1.2.3");
    }
}
