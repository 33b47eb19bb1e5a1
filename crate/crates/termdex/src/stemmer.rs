//! Rule-driven suffix-stripping stemmer.
//!
//! A ruleset is a sequence of phases; each phase is a group of
//! `(suffix, replacement, minstem)` rules. For one token, every phase
//! fires at most once: among the rules whose suffix matches and whose
//! residual stem keeps at least `minstem` characters, the one with the
//! longest suffix wins. Phases run in declared order. The rule language
//! is data (see `data/stemming/*.rules`), so languages are swappable.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub suffix: String,
    pub replacement: String,
    /// Minimum residual stem length, in characters, for the rule to apply.
    pub min_stem: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase {
    pub number: u32,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StemmerRuleset {
    pub language: String,
    pub phases: Vec<Phase>,
}

/// One row of a stem trace: what a single phase did to the token.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceStep {
    pub phase: u32,
    /// `(suffix, replacement)` of the rule that fired, if any.
    pub rule: Option<(String, String)>,
    pub output: String,
}

impl StemmerRuleset {
    /// Applies all phases to one already-normalized token. Never returns
    /// an empty string and never lengthens the token.
    pub fn stem(&self, token: &str) -> String {
        let mut t = token.to_string();
        for phase in &self.phases {
            if let Some(rule) = best_rule(phase, &t) {
                apply(&mut t, rule);
            }
        }
        t
    }

    /// Like `stem`, but records the per-phase outcomes.
    pub fn trace(&self, token: &str) -> Vec<TraceStep> {
        let mut t = token.to_string();
        let mut steps = Vec::with_capacity(self.phases.len());
        for phase in &self.phases {
            let rule = best_rule(phase, &t);
            if let Some(rule) = rule {
                apply(&mut t, rule);
            }
            steps.push(TraceStep {
                phase: phase.number,
                rule: rule.map(|r| (r.suffix.clone(), r.replacement.clone())),
                output: t.clone(),
            });
        }
        steps
    }
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

fn best_rule<'a>(phase: &'a Phase, token: &str) -> Option<&'a Rule> {
    let mut best: Option<&Rule> = None;
    for rule in &phase.rules {
        if !token.ends_with(&rule.suffix) {
            continue;
        }
        let residual = &token[..token.len() - rule.suffix.len()];
        let residual_chars = char_len(residual);
        if residual_chars < rule.min_stem {
            continue;
        }
        if residual_chars == 0 && rule.replacement.is_empty() {
            continue; // the result must never be empty
        }
        // Two distinct suffixes of one token cannot have equal length,
        // so "longest" is unique.
        if best.is_none_or(|b| char_len(&rule.suffix) > char_len(&b.suffix)) {
            best = Some(rule);
        }
    }
    best
}

fn apply(token: &mut String, rule: &Rule) {
    token.truncate(token.len() - rule.suffix.len());
    token.push_str(&rule.replacement);
}

pub fn load_ruleset(path: &Path) -> Result<StemmerRuleset> {
    parse_ruleset(&read_to_string(path)?, path)
}

/// Parses the rule file format:
///
/// ```text
/// language fr
/// phase 1
/// eaux -> eau minstem=1
/// es ->  minstem=4        # empty replacement drops the suffix
/// ```
///
/// Phase numbers must strictly increase; a duplicate suffix within one
/// phase and a replacement longer than its suffix are both rejected.
pub fn parse_ruleset(source: &str, origin: &Path) -> Result<StemmerRuleset> {
    let err = |line: usize, message: String| Error::DataFormat {
        path: origin.to_path_buf(),
        line,
        message,
    };

    let mut language = String::from("unspecified");
    let mut saw_language = false;
    let mut phases: Vec<Phase> = Vec::new();

    for (idx, raw_line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }

        if let Some(rest) = line.strip_prefix("language ") {
            if saw_language {
                return Err(err(lineno, "language declared twice".into()));
            }
            if !phases.is_empty() {
                return Err(err(lineno, "language must precede the first phase".into()));
            }
            language = rest.trim().to_string();
            saw_language = true;
            continue;
        }

        if let Some(rest) = line.strip_prefix("phase ") {
            let number: u32 = rest
                .trim()
                .parse()
                .map_err(|_| err(lineno, format!("bad phase number {:?}", rest.trim())))?;
            if let Some(last) = phases.last() {
                if number <= last.number {
                    return Err(err(
                        lineno,
                        format!("phase {number} out of order after phase {}", last.number),
                    ));
                }
            }
            phases.push(Phase { number, rules: Vec::new() });
            continue;
        }

        let Some((lhs, rhs)) = line.split_once("->") else {
            return Err(err(lineno, format!("expected \"suffix -> replacement\", got {line:?}")));
        };
        let suffix = lhs.trim();
        if suffix.is_empty() {
            return Err(err(lineno, "empty suffix".into()));
        }
        if suffix.split_whitespace().count() != 1 {
            return Err(err(lineno, format!("suffix {suffix:?} contains whitespace")));
        }

        let mut replacement = String::new();
        let mut min_stem = 1usize;
        let mut saw_minstem = false;
        for part in rhs.split_whitespace() {
            if let Some(v) = part.strip_prefix("minstem=") {
                if saw_minstem {
                    return Err(err(lineno, "minstem given twice".into()));
                }
                min_stem = v
                    .parse()
                    .map_err(|_| err(lineno, format!("bad minstem value {v:?}")))?;
                saw_minstem = true;
            } else if replacement.is_empty() && !saw_minstem {
                replacement = part.to_string();
            } else {
                return Err(err(lineno, format!("unexpected token {part:?}")));
            }
        }

        if char_len(&replacement) > char_len(suffix) {
            return Err(err(
                lineno,
                format!("replacement {replacement:?} longer than suffix {suffix:?}"),
            ));
        }

        let Some(phase) = phases.last_mut() else {
            return Err(err(lineno, "rule before the first phase header".into()));
        };
        if phase.rules.iter().any(|r| r.suffix == suffix) {
            return Err(err(
                lineno,
                format!("duplicate suffix {suffix:?} in phase {}", phase.number),
            ));
        }
        phase.rules.push(Rule {
            suffix: suffix.to_string(),
            replacement,
            min_stem,
        });
    }

    Ok(StemmerRuleset { language, phases })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ruleset(src: &str) -> StemmerRuleset {
        parse_ruleset(src, Path::new("<test>")).unwrap()
    }

    #[test]
    fn longest_suffix_wins_within_a_phase() {
        let rs = ruleset("phase 1\ns ->  minstem=2\nsses -> ss minstem=1\n");
        assert_eq!(rs.stem("caresses"), "caress");
    }

    #[test]
    fn minstem_blocks_short_residuals() {
        let rs = ruleset("phase 1\ns ->  minstem=4\n");
        assert_eq!(rs.stem("bras"), "bras");
        assert_eq!(rs.stem("inondations"), "inondation");
    }

    #[test]
    fn phases_run_sequentially() {
        let rs = ruleset("phase 1\ne ->  minstem=4\nphase 2\ni ->  minstem=5\n");
        assert_eq!(rs.stem("hémorragie"), "hémorrag");
    }

    #[test]
    fn never_empty_even_when_suffix_covers_token() {
        let rs = ruleset("phase 1\nabc ->  minstem=0\n");
        assert_eq!(rs.stem("abc"), "abc");
    }

    #[test]
    fn trace_reports_each_phase() {
        let rs = ruleset("phase 1\née ->  minstem=4\nphase 2\nx ->  minstem=9\n");
        let steps = rs.trace("méningée");
        assert_eq!(steps.len(), 2);
        assert_eq!(steps[0].rule, Some(("ée".into(), String::new())));
        assert_eq!(steps[0].output, "méning");
        assert_eq!(steps[1].rule, None);
        assert_eq!(steps[1].output, "méning");
    }

    #[test]
    fn rejects_out_of_order_phases() {
        let e = parse_ruleset("phase 2\na -> \nphase 1\nb -> \n", Path::new("<t>")).unwrap_err();
        assert!(e.to_string().contains("out of order"), "{e}");
    }

    #[test]
    fn rejects_duplicate_suffix_in_phase() {
        let e = parse_ruleset("phase 1\nes -> \nes -> e\n", Path::new("<t>")).unwrap_err();
        assert!(e.to_string().contains("duplicate suffix"), "{e}");
    }

    #[test]
    fn rejects_lengthening_replacement() {
        let e = parse_ruleset("phase 1\ni -> ies\n", Path::new("<t>")).unwrap_err();
        assert!(e.to_string().contains("longer than suffix"), "{e}");
    }

    #[test]
    fn rejects_rule_before_phase() {
        let e = parse_ruleset("es -> \n", Path::new("<t>")).unwrap_err();
        assert!(e.to_string().contains("before the first phase"), "{e}");
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let rs = ruleset("# header\nlanguage fr\n\nphase 1  # plurals\ns ->  minstem=2 # drop\n");
        assert_eq!(rs.language, "fr");
        assert_eq!(rs.stem("cats"), "cat");
    }
}
