//! System prompt and greeting templates.

use std::fmt::Write as _;

use emllm_core::monitor::{Episode, StressSummary};
use serde::{Deserialize, Serialize};

pub const PERSONA_CLAUSE: &str =
    "You are EmLLM, a supportive conversational companion. Act like a trained psychologist: listen carefully, \
     reflect the user's feelings back to them and respond with warmth and without judgement.";

pub const CBT_CLAUSE: &str =
    "Follow the principles of cognitive behavioral therapy (CBT): help the user notice their thoughts, \
     identify unhelpful thinking patterns, and gently explore more balanced alternatives and small practical steps.";

pub const REFUSAL_CLAUSE: &str =
    "Whenever you cannot answer a question or help with a request, say so and provide a reasonable explanation \
     of why. If the user may be in danger, encourage them to contact local emergency services or a professional.";

/// The clause fragment used when the summary covers no windows.
pub const NO_DATA_PHRASE: &str = "no physiological data was recorded today";

/// Directives every prompt carries, in prompt order.
pub const MANDATED_DIRECTIVES: [&str; 3] = [PERSONA_CLAUSE, CBT_CLAUSE, REFUSAL_CLAUSE];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptContext {
    pub user_name: String,
    pub summary: StressSummary,
    pub persona_directives: Vec<String>,
    pub locale: String,
}

impl PromptContext {
    pub fn new(user_name: impl Into<String>, summary: StressSummary) -> Self {
        Self {
            user_name: user_name.into(),
            summary,
            persona_directives: MANDATED_DIRECTIVES.iter().map(|s| s.to_string()).collect(),
            locale: "en".to_string(),
        }
    }

    /// Name used in text, "there" when blank.
    pub fn display_name(&self) -> &str {
        let name = self.user_name.trim();
        if name.is_empty() {
            "there"
        } else {
            name
        }
    }
}

fn language_name(locale: &str) -> &'static str {
    let primary = locale.split(['-', '_']).next().unwrap_or("").to_ascii_lowercase();
    match primary.as_str() {
        "de" => "German",
        "es" => "Spanish",
        "fr" => "French",
        "it" => "Italian",
        "nl" => "Dutch",
        "pt" => "Portuguese",
        _ => "English",
    }
}

/// The response-language directive for a locale tag. Unknown tags map to
/// English.
pub fn language_directive(locale: &str) -> String {
    let lang = language_name(locale);
    format!("Always respond in {lang} only, even if the user writes in another language or the conversation drifts.")
}

/// `HH:MM` of a timestamp in seconds, wrapped to one day.
pub fn clock(t_s: f64) -> String {
    let secs = t_s.rem_euclid(86_400.0).floor() as u64;
    format!("{:02}:{:02}", secs / 3600, secs % 3600 / 60)
}

pub fn episode_phrase(count: usize) -> String {
    if count == 1 {
        "1 stress episode".to_string()
    } else {
        format!("{count} stress episodes")
    }
}

pub fn percent(fraction: f64) -> String {
    format!("{:.1}%", fraction * 100.0)
}

fn episode_times(episodes: &[Episode]) -> String {
    episodes
        .iter()
        .map(|e| format!("{} to {}", clock(e.start_s), clock(e.end_s)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// The clause that injects the monitor's inference about the user.
pub fn stress_clause(ctx: &PromptContext) -> String {
    let name = ctx.display_name();
    let s = &ctx.summary;
    if s.windows_total == 0 {
        return format!(
            "About the user, {name}: {NO_DATA_PHRASE}, so you know nothing about their stress levels. \
             Do not guess them."
        );
    }
    let mut out = format!(
        "About the user, {name}: their wearable sensors were monitored today and stress was predicted in {} of \
         the analysed time windows, with {}",
        percent(s.stressed_fraction),
        episode_phrase(s.episodes.len())
    );
    if s.episodes.is_empty() {
        out.push('.');
    } else {
        let _ = write!(out, " (at {}).", episode_times(&s.episodes));
    }
    out.push_str(
        " This is an estimate from physiological signals, not a diagnosis. Bring it up gently, \
         ask how they experienced those moments and let them correct it.",
    );
    out
}

/// Persona, CBT and refusal clauses, any extra directives, the stress
/// clause and the language directive, one per paragraph.
pub fn build_system_prompt(ctx: &PromptContext) -> String {
    let mut parts: Vec<String> = MANDATED_DIRECTIVES.iter().map(|s| s.to_string()).collect();
    parts.extend(
        ctx.persona_directives
            .iter()
            .filter(|d| !MANDATED_DIRECTIVES.contains(&d.as_str()) && !d.trim().is_empty())
            .cloned(),
    );
    parts.push(stress_clause(ctx));
    parts.push(language_directive(&ctx.locale));
    parts.join("\n\n")
}

/// The first assistant message, rendered locally.
pub fn greeting(ctx: &PromptContext) -> String {
    let name = ctx.display_name();
    let s = &ctx.summary;
    let mut out = format!(
        "Hello {name}! I'm EmLLM, a chatbot here to listen and to help you reflect on how you are feeling. "
    );
    if s.windows_total == 0 {
        out.push_str("I did not receive any data from your wearable today, so I can't tell how stressed you were. ");
    } else if s.episodes.is_empty() {
        let _ = write!(
            out,
            "Based on your wearable data, I did not detect any stress episodes today (stress signs in {} of the monitored time). ",
            percent(s.stressed_fraction)
        );
    } else {
        let _ = write!(
            out,
            "Based on your wearable data, it looks like you experienced some stress today: I detected {} ({}), \
             with stress signs in {} of the monitored time. ",
            episode_phrase(s.episodes.len()),
            episode_times(&s.episodes),
            percent(s.stressed_fraction)
        );
    }
    out.push_str("Would you like to talk about your day?");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use emllm_core::monitor::Period;
    use proptest::prelude::*;

    fn summary(fraction: f64, episodes: usize) -> StressSummary {
        StressSummary {
            period: Some(Period { start_s: 0.0, end_s: 3600.0 }),
            windows_total: 100,
            windows_stressed: (fraction * 100.0).round() as usize,
            stressed_fraction: fraction,
            episodes: (0..episodes)
                .map(|i| Episode {
                    start_s: 900.0 + 1800.0 * i as f64,
                    end_s: 1500.0 + 1800.0 * i as f64,
                    windows: 109,
                })
                .collect(),
            peak_probability: 0.99,
        }
    }

    #[test]
    fn renders_name_fraction_and_episodes() {
        let p = build_system_prompt(&PromptContext::new("Alice", summary(0.30, 2)));
        assert!(p.contains("Alice"));
        assert!(p.contains("30.0%"));
        assert!(p.contains("2 stress episodes"));
        assert!(p.contains("00:15 to 00:25"));
        assert!(p.contains("00:45 to 00:55"));
    }

    #[test]
    fn no_data_fallback() {
        let p = build_system_prompt(&PromptContext::new("Bo", StressSummary::empty()));
        assert!(p.contains(NO_DATA_PHRASE));
    }

    #[test]
    fn clause_order() {
        let p = build_system_prompt(&PromptContext::new("Cy", summary(0.1, 1)));
        let at = |s: &str| p.find(s).unwrap();
        assert!(at(PERSONA_CLAUSE) < at(CBT_CLAUSE));
        assert!(at(CBT_CLAUSE) < at(REFUSAL_CLAUSE));
        assert!(at(REFUSAL_CLAUSE) < at("1 stress episode"));
        assert!(at("1 stress episode") < at("respond in English"));
    }

    #[test]
    fn greeting_branches() {
        let g = greeting(&PromptContext::new("Alice", summary(0.3, 2)));
        assert!(g.starts_with("Hello Alice!"));
        assert!(g.contains("experienced some stress") && g.contains("2 stress episodes"));
        assert!(g.ends_with("Would you like to talk about your day?"));
        let g = greeting(&PromptContext::new("Alice", summary(0.05, 0)));
        assert!(g.contains("did not detect any stress episodes"));
        assert!(g.contains("talk about your day"));
        let g = greeting(&PromptContext::new("  ", summary(0.0, 0)));
        assert!(g.starts_with("Hello there!"));
    }

    #[test]
    fn locales() {
        assert!(language_directive("en-US").contains("English"));
        assert!(language_directive("es").contains("Spanish"));
        assert!(language_directive("xx").contains("English"));
    }

    #[test]
    fn clock_wraps_days() {
        assert_eq!(clock(0.0), "00:00");
        assert_eq!(clock(3600.0 * 25.0 + 59.0), "01:00");
        assert_eq!(clock(-60.0), "23:59");
    }

    proptest! {
        #[test]
        fn extra_directives_never_drop_mandated_ones(extra in prop::collection::vec("[a-z ]{0,20}", 0..4), keep in any::<bool>()) {
            let mut ctx = PromptContext::new("Dee", summary(0.2, 1));
            if !keep {
                ctx.persona_directives.clear();
            }
            ctx.persona_directives.extend(extra);
            let p = build_system_prompt(&ctx);
            for clause in MANDATED_DIRECTIVES {
                prop_assert_eq!(p.matches(clause).count(), 1);
            }
        }
    }
}
