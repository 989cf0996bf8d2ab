use emllm_chat::prompt::{build_system_prompt, episode_phrase, greeting, MANDATED_DIRECTIVES, NO_DATA_PHRASE};
use emllm_chat::PromptContext;
use emllm_core::monitor::{summarize, PredictionRecord};
use proptest::prelude::*;

fn context() -> impl Strategy<Value = PromptContext> {
    (
        "[A-Za-z][a-z]{0,11}( [A-Z][a-z]{1,8})?|",
        prop::collection::vec(0u8..2, 0..200),
        1usize..5,
        prop::sample::select(vec!["en", "en-GB", "es", "de", "zz"]),
    )
        .prop_map(|(name, labels, min, locale)| {
            let records: Vec<PredictionRecord> = labels
                .iter()
                .enumerate()
                .map(|(i, &l)| PredictionRecord {
                    t_start_s: 28_800.0 + 5.0 * i as f64,
                    t_end_s: 28_860.0 + 5.0 * i as f64,
                    probability: if l == 1 { 0.8 } else { 0.2 },
                    label: l,
                })
                .collect();
            let mut ctx = PromptContext::new(name, summarize(&records, min));
            ctx.locale = locale.to_string();
            ctx
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mandated_clauses_present_and_deterministic(ctx in context()) {
        let p = build_system_prompt(&ctx);
        prop_assert_eq!(&p, &build_system_prompt(&ctx.clone()));
        for clause in MANDATED_DIRECTIVES {
            prop_assert!(p.contains(clause));
        }
        prop_assert!(p.contains(ctx.display_name()));
        let s = &ctx.summary;
        if s.windows_total == 0 {
            prop_assert!(p.contains(NO_DATA_PHRASE));
        } else {
            let pct = format!("{:.1}%", s.stressed_fraction * 100.0);
            prop_assert!(p.contains(&pct));
            prop_assert!(p.contains(&episode_phrase(s.episodes.len())));
        }
        let g = greeting(&ctx);
        prop_assert!(g.contains(ctx.display_name()));
        prop_assert!(g.ends_with("Would you like to talk about your day?"));
    }
}
