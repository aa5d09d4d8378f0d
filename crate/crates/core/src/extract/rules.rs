//! The externally editable rules file.
//!
//! ```text
//! lexicon roles:
//! soberano
//! emir
//!
//! rule role.lexicon
//! kind Role
//! priority 50
//! pattern (?i)\b(?P<value>{roles})\b
//! capture value -> value
//!
//! rule place.locative
//! kind Place
//! priority 30
//! detector locative-place
//! option prepositions locatives
//! ```
//!
//! Stanzas are separated by blank lines; lines starting with `#` are
//! comments. `{name}` inside a pattern expands to the alternation of the
//! named lexicon.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::registry::{Detector, DetectorRegistry};
use super::EntityKind;

/// Which fact field a named capture feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FactField {
    Value,
    Day,
    Month,
    Year,
}

impl FromStr for FactField {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "value" => Ok(FactField::Value),
            "day" => Ok(FactField::Day),
            "month" => Ok(FactField::Month),
            "year" => Ok(FactField::Year),
            _ => Err(()),
        }
    }
}

/// One rule stanza as written in the rules file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleSpec {
    pub rule_id: String,
    pub kind: EntityKind,
    pub priority: i64,
    /// Name of the registered detector strategy; `pattern` unless stated.
    pub detector: String,
    /// Pattern with lexicon placeholders already expanded.
    pub pattern: Option<String>,
    pub captures: Vec<(String, FactField)>,
    pub options: BTreeMap<String, String>,
    /// 1-based line of the `rule` header.
    pub line: usize,
}

impl RuleSpec {
    pub fn option(&self, key: &str) -> Option<&str> {
        self.options.get(key).map(String::as_str)
    }
}

/// Named term lists declared in the rules file.
pub type Lexicons = BTreeMap<String, Vec<String>>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RuleError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("rule {rule_id} (line {line}): invalid pattern: {message}")]
    Pattern {
        rule_id: String,
        line: usize,
        message: String,
    },
    #[error("rule {rule_id} (line {line}): duplicate rule id")]
    DuplicateRule { rule_id: String, line: usize },
    #[error("rule {rule_id}: {message}")]
    Invalid { rule_id: String, message: String },
    #[error("rule {rule_id}: unknown detector {name:?}")]
    UnknownDetector { rule_id: String, name: String },
}

/// A rule compiled into its detector strategy.
#[derive(Debug)]
pub struct Rule {
    pub spec: RuleSpec,
    pub detector: Box<dyn Detector>,
}

/// Immutable, ordered set of compiled rules plus the lexicons they use.
#[derive(Debug, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
    lexicons: Lexicons,
}

pub const DEFAULT_RULES: &str = include_str!("../../resources/default.rules");

impl RuleSet {
    /// Parse a rules file using the built-in detector strategies.
    pub fn load(text: &str) -> Result<RuleSet, RuleError> {
        Self::load_with(text, &DetectorRegistry::with_builtins())
    }

    pub fn load_bytes(bytes: &[u8]) -> Result<RuleSet, RuleError> {
        let text = std::str::from_utf8(bytes).map_err(|e| RuleError::Syntax {
            line: 1 + bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count(),
            message: "rules file is not valid UTF-8".into(),
        })?;
        Self::load(text)
    }

    /// The rules file shipped with the crate.
    pub fn default_rules() -> RuleSet {
        Self::load(DEFAULT_RULES).expect("shipped rules file is valid")
    }

    pub fn load_with(text: &str, registry: &DetectorRegistry) -> Result<RuleSet, RuleError> {
        let (specs, lexicons) = parse_rules(text)?;
        let mut rules = Vec::with_capacity(specs.len());
        for spec in specs {
            let detector = registry.create(&spec, &lexicons)?;
            rules.push(Rule { spec, detector });
        }
        rules.sort_by(|a, b| {
            b.spec
                .priority
                .cmp(&a.spec.priority)
                .then_with(|| a.spec.rule_id.cmp(&b.spec.rule_id))
        });
        Ok(RuleSet { rules, lexicons })
    }

    /// Rules in evaluation order: priority descending, then rule id.
    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn lexicons(&self) -> &Lexicons {
        &self.lexicons
    }

    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rule(&self, id: &str) -> Option<&Rule> {
        self.rules.iter().find(|r| r.spec.rule_id == id)
    }

    /// Keep only the rules for which `keep` holds.
    pub fn retain(mut self, mut keep: impl FnMut(&RuleSpec) -> bool) -> RuleSet {
        self.rules.retain(|r| keep(&r.spec));
        self
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

fn placeholder() -> &'static Regex {
    static P: OnceLock<Regex> = OnceLock::new();
    P.get_or_init(|| Regex::new(r"\{([A-Za-z_][A-Za-z0-9_]*)\}").unwrap())
}

/// Expand `{lexicon}` placeholders. An empty lexicon expands to a class
/// that matches nothing.
fn expand_pattern(raw: &str, lexicons: &Lexicons) -> Result<String, String> {
    let mut out = String::new();
    let mut last = 0;
    for caps in placeholder().captures_iter(raw) {
        let whole = caps.get(0).unwrap();
        let name = &caps[1];
        // `\p{Lu}`-style Unicode classes are not placeholders
        if raw[..whole.start()].ends_with("\\p") || raw[..whole.start()].ends_with("\\P") {
            continue;
        }
        let terms = lexicons
            .get(name)
            .ok_or_else(|| format!("unknown lexicon {{{name}}}"))?;
        out.push_str(&raw[last..whole.start()]);
        if terms.is_empty() {
            out.push_str(r"[^\s\S]");
        } else {
            let mut sorted: Vec<&String> = terms.iter().collect();
            sorted.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)));
            let alternation: Vec<String> = sorted.iter().map(|t| regex::escape(t)).collect();
            out.push_str("(?:");
            out.push_str(&alternation.join("|"));
            out.push(')');
        }
        last = whole.end();
    }
    out.push_str(&raw[last..]);
    Ok(out)
}

struct RawRule {
    line: usize,
    fields: Vec<(usize, String, String)>,
}

/// Parse the stanza syntax into specs and lexicons. Patterns are expanded
/// and syntax-checked here; detector construction happens in the registry.
pub fn parse_rules(text: &str) -> Result<(Vec<RuleSpec>, Lexicons), RuleError> {
    let mut stanzas: Vec<Vec<(usize, &str)>> = vec![vec![]];
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('#') {
            continue;
        }
        if trimmed.is_empty() {
            if !stanzas.last().unwrap().is_empty() {
                stanzas.push(vec![]);
            }
            continue;
        }
        stanzas.last_mut().unwrap().push((i + 1, trimmed));
    }

    let mut lexicons = Lexicons::new();
    let mut raw_rules = Vec::new();
    for stanza in stanzas.into_iter().filter(|s| !s.is_empty()) {
        let (line, head) = stanza[0];
        if let Some(rest) = head.strip_prefix("lexicon ") {
            let name = rest
                .trim()
                .strip_suffix(':')
                .map(str::trim)
                .filter(|n| !n.is_empty() && !n.contains(char::is_whitespace))
                .ok_or_else(|| RuleError::Syntax {
                    line,
                    message: "expected `lexicon <name>:`".into(),
                })?;
            if lexicons.contains_key(name) {
                return Err(RuleError::Syntax {
                    line,
                    message: format!("duplicate lexicon {name}"),
                });
            }
            let terms = stanza[1..].iter().map(|(_, t)| t.to_string()).collect();
            lexicons.insert(name.to_string(), terms);
        } else if head.starts_with("rule ") || head == "rule" {
            let fields = stanza
                .iter()
                .map(|&(l, t)| {
                    let (key, value) = t.split_once(char::is_whitespace).unwrap_or((t, ""));
                    (l, key.to_string(), value.trim().to_string())
                })
                .collect();
            raw_rules.push(RawRule { line, fields });
        } else {
            return Err(RuleError::Syntax {
                line,
                message: format!("expected `rule <id>` or `lexicon <name>:`, found {head:?}"),
            });
        }
    }

    let mut specs: Vec<RuleSpec> = Vec::new();
    for raw in raw_rules {
        let spec = build_spec(raw, &lexicons)?;
        if specs.iter().any(|s| s.rule_id == spec.rule_id) {
            return Err(RuleError::DuplicateRule {
                rule_id: spec.rule_id,
                line: spec.line,
            });
        }
        specs.push(spec);
    }
    Ok((specs, lexicons))
}

fn build_spec(raw: RawRule, lexicons: &Lexicons) -> Result<RuleSpec, RuleError> {
    let mut rule_id = None;
    let mut kind = None;
    let mut priority = 0i64;
    let mut detector = None;
    let mut pattern = None;
    let mut captures = Vec::new();
    let mut options = BTreeMap::new();
    for (line, key, value) in raw.fields {
        let syntax = |message: String| RuleError::Syntax { line, message };
        match key.as_str() {
            "rule" => {
                if value.is_empty() || value.contains(char::is_whitespace) {
                    return Err(syntax("rule id must be a single word".into()));
                }
                rule_id = Some(value);
            }
            "kind" => {
                kind = Some(
                    value
                        .parse::<EntityKind>()
                        .map_err(|_| syntax(format!("unknown kind {value:?}")))?,
                )
            }
            "priority" => {
                priority = value
                    .parse()
                    .map_err(|_| syntax(format!("priority must be an integer, got {value:?}")))?
            }
            "detector" => detector = Some(value),
            "pattern" => pattern = Some((line, value)),
            "capture" => {
                let (name, field) = value
                    .split_once("->")
                    .map(|(n, f)| (n.trim(), f.trim()))
                    .ok_or_else(|| syntax("expected `capture <name> -> <field>`".into()))?;
                let field = field
                    .parse::<FactField>()
                    .map_err(|_| syntax(format!("unknown fact field {field:?}")))?;
                captures.push((name.to_string(), field));
            }
            "option" => {
                let (k, v) = value
                    .split_once(char::is_whitespace)
                    .ok_or_else(|| syntax("expected `option <key> <value>`".into()))?;
                options.insert(k.to_string(), v.trim().to_string());
            }
            other => return Err(syntax(format!("unknown rule field {other:?}"))),
        }
    }
    let rule_id = rule_id.expect("stanza header is the rule line");
    let kind = kind.ok_or_else(|| RuleError::Invalid {
        rule_id: rule_id.clone(),
        message: "missing `kind`".into(),
    })?;
    let detector = detector.unwrap_or_else(|| "pattern".to_string());

    let pattern = match pattern {
        Some((line, raw_pattern)) => {
            let expanded = expand_pattern(&raw_pattern, lexicons).map_err(|message| {
                RuleError::Pattern {
                    rule_id: rule_id.clone(),
                    line,
                    message,
                }
            })?;
            let compiled = Regex::new(&expanded).map_err(|e| RuleError::Pattern {
                rule_id: rule_id.clone(),
                line,
                message: e.to_string(),
            })?;
            let names: Vec<&str> = compiled.capture_names().flatten().collect();
            if let Some((missing, _)) = captures.iter().find(|(n, _)| !names.contains(&n.as_str())) {
                return Err(RuleError::Invalid {
                    rule_id,
                    message: format!("capture {missing:?} does not appear in the pattern"),
                });
            }
            Some(expanded)
        }
        None => None,
    };
    Ok(RuleSpec {
        rule_id,
        kind,
        priority,
        detector,
        pattern,
        captures,
        options,
        line: raw.line,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_empty_ruleset() {
        assert!(RuleSet::load("").unwrap().is_empty());
        assert!(RuleSet::load("# only a comment\n\n").unwrap().is_empty());
    }

    #[test]
    fn shipped_rules_cover_every_kind() {
        let rules = RuleSet::default_rules();
        for kind in EntityKind::ALL {
            assert!(
                rules.rules().iter().any(|r| r.spec.kind == kind),
                "no shipped rule of kind {kind}"
            );
        }
        assert!(rules.len() >= 6);
        assert_eq!(rules.lexicons()["months"].len(), 12);
    }

    #[test]
    fn malformed_pattern_names_rule() {
        let text = "rule good\nkind Role\npattern soberano\n\nrule broken.one\nkind Date\npattern (?P<year>\\d{4}\n";
        match RuleSet::load(text).unwrap_err() {
            RuleError::Pattern { rule_id, line, .. } => {
                assert_eq!(rule_id, "broken.one");
                assert_eq!(line, 7);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_rule_id() {
        let text = "rule a\nkind Role\npattern x\n\nrule a\nkind Place\npattern y\n";
        assert_eq!(
            RuleSet::load(text).unwrap_err(),
            RuleError::DuplicateRule {
                rule_id: "a".into(),
                line: 5
            }
        );
    }

    #[test]
    fn capture_must_exist_in_pattern() {
        let text = "rule a\nkind Date\npattern (?P<year>\\d{4})\ncapture yr -> year\n";
        assert!(matches!(
            RuleSet::load(text).unwrap_err(),
            RuleError::Invalid { .. }
        ));
    }

    #[test]
    fn lexicon_expansion() {
        let text = "lexicon roles:\nrey\nsoberano\n\nrule r\nkind Role\npattern \\b(?P<value>{roles})\\b\\d{2}\n";
        let (specs, _) = parse_rules(text).unwrap();
        assert_eq!(
            specs[0].pattern.as_deref(),
            Some(r"\b(?P<value>(?:soberano|rey))\b\d{2}")
        );
        let err = parse_rules("rule r\nkind Role\npattern {nope}\n").unwrap_err();
        assert!(err.to_string().contains("unknown lexicon"));
    }

    #[test]
    fn empty_lexicon_never_matches() {
        let text = "lexicon instruments:\n\nrule i\nkind Instrument\npattern \\b{instruments}\\b\n";
        let (specs, _) = parse_rules(text).unwrap();
        let re = Regex::new(specs[0].pattern.as_ref().unwrap()).unwrap();
        assert!(!re.is_match("anything at all"));
    }

    #[test]
    fn unknown_detector() {
        let text = "rule x\nkind Place\ndetector telepathy\n";
        assert!(matches!(
            RuleSet::load(text).unwrap_err(),
            RuleError::UnknownDetector { .. }
        ));
    }
}
