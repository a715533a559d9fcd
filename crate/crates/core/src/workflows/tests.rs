use super::*;
use crate::model::{ClaimVersion, FeatureReferences, NoveltyLabel, Passage, Span};
use proptest::prelude::*;

fn doc() -> PriorArtDocument {
    PriorArtDocument {
        doc_id: "D1".to_string(),
        passages: vec![
            Passage {
                id: PassageId::Abstract,
                text: "A sealing assembly is disclosed.".to_string(),
            },
            Passage { id: PassageId::Claim(1), text: "A valve assembly.".to_string() },
            Passage {
                id: PassageId::Paragraph(1),
                text: "The valve opens under pressure.".to_string(),
            },
            Passage {
                id: PassageId::Paragraph(2),
                text: "A seal closes the outlet.".to_string(),
            },
            Passage { id: PassageId::Paragraph(3), text: "Optional heater element.".to_string() },
        ],
    }
}

fn record(claim: &str) -> ExaminationRecord {
    ExaminationRecord {
        application_id: "APP1".to_string(),
        claim_version: ClaimVersion::Initial,
        claim_text: claim.to_string(),
        novelty_label: NoveltyLabel::NotNovel,
        prior_art_doc_id: "D1".to_string(),
        gold_segmentation: None,
        gold_references: None,
        added_spans: None,
        domain_classes: Vec::new(),
    }
}

fn single_step_config() -> WorkflowConfig {
    WorkflowConfig::default()
}

fn hierarchical_config() -> WorkflowConfig {
    WorkflowConfig { mode: WorkflowMode::Hierarchical, ..WorkflowConfig::default() }
}

#[test]
fn config_rejects_even_and_zero_k() {
    let mut config = single_step_config();
    config.self_consistency_k = 0;
    assert!(matches!(config.validate(), Err(WorkflowError::Config(_))));
    config.self_consistency_k = 4;
    assert!(matches!(config.validate(), Err(WorkflowError::Config(_))));
    config.self_consistency_k = 5;
    assert!(config.validate().is_ok());
}

#[test]
fn config_rejects_gold_references_outside_hierarchical() {
    let mut config = single_step_config();
    config.use_gold_references = true;
    assert!(matches!(config.validate(), Err(WorkflowError::Config(_))));
    config.mode = WorkflowMode::Hierarchical;
    assert!(config.validate().is_ok());
}

#[test]
fn config_rejects_dropping_prior_art_outside_single_step() {
    let mut config = hierarchical_config();
    config.include_prior_art = false;
    assert!(matches!(config.validate(), Err(WorkflowError::Config(_))));
    config.mode = WorkflowMode::SingleStep;
    assert!(config.validate().is_ok());
}

#[test]
fn temperature_defaults_depend_on_sampling() {
    let mut config = single_step_config();
    assert_eq!(config.effective_temperature(), 0.0);
    config.self_consistency_k = 3;
    assert_eq!(config.effective_temperature(), 0.7);
    config.temperature = Some(0.2);
    assert_eq!(config.effective_temperature(), 0.2);
}

#[test]
fn render_document_tags_parse_back_to_ids() {
    let rendered = render_document(&doc());
    let lines: Vec<&str> = rendered.lines().collect();
    assert_eq!(lines.len(), 5);
    assert_eq!(lines[0], "[abstract] A sealing assembly is disclosed.");
    assert_eq!(lines[1], "[claim 1] A valve assembly.");
    assert_eq!(lines[2], "[par 1] The valve opens under pressure.");
    for (line, passage) in lines.iter().zip(&doc().passages) {
        let tag = &line[1..line.find(']').unwrap()];
        let parsed = parse_reference_string(tag).unwrap();
        assert_eq!(parsed.into_iter().collect::<Vec<_>>(), vec![passage.id]);
    }
}

#[test]
fn single_step_passthrough_builds_result() {
    let claim = "intro: a valve opens; a seal closes.";
    let client = ScriptedClient::default().with_default(
        "single_step_examination",
        serde_json::json!({
            "features": [
                {"text": "a valve opens", "passages": ["par 1"], "verdict": "fully_disclosed"},
                {"text": "a seal closes.", "passages": [], "verdict": "not_disclosed"}
            ],
            "claim_verdict": "novel"
        }),
    );
    let (result, trace) =
        examine(&record(claim), &doc(), &client, &single_step_config()).unwrap();

    let texts: Vec<&str> =
        result.predicted_segmentation.features.iter().map(|f| f.text.as_str()).collect();
    assert_eq!(texts, ["a valve opens", "a seal closes."]);
    assert_eq!(result.feature_results.len(), 2);
    assert_eq!(result.feature_results[0].passages, vec![PassageId::Paragraph(1)]);
    assert_eq!(result.feature_results[0].verdict, FeatureVerdict::FullyDisclosed);
    assert!(result.feature_results[1].passages.is_empty());
    assert_eq!(result.claim_verdict, ClaimVerdict::Novel);
    assert_eq!(result.record_id, "APP1:initial");

    assert_eq!(trace.calls.len(), 1);
    assert_eq!(trace.calls[0].kind, "single_step_examination");
    assert!(trace.prompt_tokens > 0);
    assert_eq!(trace.dropped_ids, 0);
    assert_eq!(trace.dropped_features, 0);
}

#[test]
fn hallucinated_and_garbled_citations_are_dropped() {
    let claim = "intro: a valve opens; a seal closes.";
    let client = ScriptedClient::default().with_default(
        "single_step_examination",
        serde_json::json!({
            "features": [{
                "text": "a valve opens",
                "passages": ["par 999", "par 1", "the gist of it", "par 1", "claim 1"],
                "verdict": "fully_disclosed"
            }],
            "claim_verdict": "not_novel"
        }),
    );
    let (result, trace) =
        examine(&record(claim), &doc(), &client, &single_step_config()).unwrap();

    // "par 999" resolves to nothing, "the gist of it" never parses, and the
    // duplicate "par 1" collapses without counting as a drop.
    assert_eq!(
        result.feature_results[0].passages,
        vec![PassageId::Paragraph(1), PassageId::Claim(1)]
    );
    assert_eq!(trace.dropped_ids, 2);
    assert!(trace.notes.iter().any(|n| n.contains("par 999")));
    assert!(trace.notes.iter().any(|n| n.contains("the gist of it")));
}

#[test]
fn unanchorable_features_are_dropped_but_counted() {
    let claim = "a valve opens; a seal closes.";
    let client = ScriptedClient::default().with_default(
        "single_step_examination",
        serde_json::json!({
            "features": [
                {"text": "xylophone quartz zeppelin", "passages": [], "verdict": "not_disclosed"},
                {"text": "a seal closes.", "passages": ["par 2"], "verdict": "fully_disclosed"}
            ],
            "claim_verdict": "novel"
        }),
    );
    let (result, trace) =
        examine(&record(claim), &doc(), &client, &single_step_config()).unwrap();

    assert_eq!(result.predicted_segmentation.len(), 1);
    assert_eq!(result.predicted_segmentation.features[0].text, "a seal closes.");
    assert_eq!(result.feature_results.len(), 1);
    assert_eq!(result.feature_results[0].passages, vec![PassageId::Paragraph(2)]);
    assert_eq!(trace.dropped_features, 1);
}

#[test]
fn malformed_output_gets_one_repair_round() {
    let claim = "a valve opens; a seal closes.";
    let good = serde_json::json!({
        "features": [{"text": "a valve opens", "passages": [], "verdict": "not_disclosed"}],
        "claim_verdict": "novel"
    });
    let client = ScriptedClient::default().with_kind_sequence(
        "single_step_examination",
        vec![serde_json::json!({"features": "not an array"}), good],
    );
    let (result, trace) =
        examine(&record(claim), &doc(), &client, &single_step_config()).unwrap();

    assert_eq!(result.claim_verdict, ClaimVerdict::Novel);
    assert_eq!(trace.schema_repairs, 1);
    assert_eq!(client.calls(), 2);
    assert_eq!(trace.calls.len(), 2);
}

#[test]
fn malformed_output_twice_is_a_schema_error() {
    let claim = "a valve opens.";
    let bad = serde_json::json!({"claim_verdict": "maybe"});
    let client = ScriptedClient::default()
        .with_kind_sequence("single_step_examination", vec![bad.clone(), bad]);
    let err = examine(&record(claim), &doc(), &client, &single_step_config()).unwrap_err();
    assert!(matches!(err, WorkflowError::Schema(_)));
    assert_eq!(client.calls(), 2);
}

#[test]
fn prior_art_ablation_changes_the_prompt() {
    let claim = "a valve opens.";
    let messages = single_step_messages(None, claim);
    assert!(messages[1].content.starts_with("Claim under examination (no prior art provided):"));
    let client = ScriptedClient::default().with_response(
        prompt_digest(&messages),
        serde_json::json!({
            "features": [{"text": "a valve opens.", "passages": [], "verdict": "not_disclosed"}],
            "claim_verdict": "novel"
        }),
    );
    let config = WorkflowConfig { include_prior_art: false, ..single_step_config() };
    let (result, _) = examine(&record(claim), &doc(), &client, &config).unwrap();
    assert_eq!(result.claim_verdict, ClaimVerdict::Novel);
}

#[test]
fn llm_segmentation_anchors_lightly_garbled_features() {
    let claim = "a valve opens; a seal closes.";
    let client = ScriptedClient::default().with_kind_sequence(
        "segmentation",
        vec![serde_json::json!({"features": ["a valve ppens", "a seal closes."]})],
    );
    let mut trace = WorkflowTrace::default();
    let segmentation = segment_claim_llm(claim, &client, 0.0, 0, &mut trace).unwrap();
    let texts: Vec<&str> = segmentation.features.iter().map(|f| f.text.as_str()).collect();
    assert_eq!(texts, ["a valve opens", "a seal closes."]);
    assert_eq!(trace.dropped_features, 0);
}

#[test]
fn llm_segmentation_falls_back_to_heuristic_when_nothing_anchors() {
    let claim = "a valve opens; a seal closes.";
    let client = ScriptedClient::default().with_kind_sequence(
        "segmentation",
        vec![serde_json::json!({"features": ["xylophone quartz zeppelin"]})],
    );
    let mut trace = WorkflowTrace::default();
    let segmentation = segment_claim_llm(claim, &client, 0.0, 0, &mut trace).unwrap();
    assert_eq!(segmentation, segment_claim_heuristic(claim).unwrap());
    assert_eq!(trace.dropped_features, 1);
    assert!(trace.notes.iter().any(|n| n.contains("heuristic fallback")));
}

#[test]
fn feature_prompts_share_a_byte_identical_prefix() {
    let document_text = render_document(&doc());
    let claim = "a valve opens; a seal closes.";
    let first = feature_messages(&document_text, claim, "a valve opens");
    let second = feature_messages(&document_text, claim, "a seal closes.");
    let prefix = format!(
        "Prior art document:\n{document_text}\n\nClaim under examination:\n{claim}\n\nFeature to examine:\n"
    );
    assert!(first[1].content.starts_with(&prefix));
    assert!(second[1].content.starts_with(&prefix));
    assert_eq!(first[0], second[0]);
    assert_ne!(first[1], second[1]);
}

#[test]
fn hierarchical_budget_is_features_plus_aggregation() {
    let claim = "intro: one; two";
    let client = ScriptedClient::default()
        .with_default(
            "feature_examination",
            serde_json::json!({"passages": ["par 1"], "verdict": "partially_disclosed"}),
        )
        .with_default("claim_aggregation", serde_json::json!({"verdict": "novel"}));
    let (result, trace) =
        examine(&record(claim), &doc(), &client, &hierarchical_config()).unwrap();

    // Three heuristic features, one call each, plus the aggregation call.
    assert_eq!(client.calls(), 4);
    assert_eq!(trace.calls.len(), 4);
    assert_eq!(trace.calls[3].kind, "claim_aggregation");
    assert_eq!(result.feature_results.len(), 3);
    assert_eq!(result.claim_verdict, ClaimVerdict::Novel);
    for fr in &result.feature_results {
        assert_eq!(fr.passages, vec![PassageId::Paragraph(1)]);
        assert_eq!(fr.verdict, FeatureVerdict::PartiallyDisclosed);
    }
}

#[test]
fn llm_segmentation_adds_one_call_to_the_budget() {
    let claim = "one; two";
    let client = ScriptedClient::default()
        .with_default("segmentation", serde_json::json!({"features": ["one", "two"]}))
        .with_default(
            "feature_examination",
            serde_json::json!({"passages": [], "verdict": "not_disclosed"}),
        )
        .with_default("claim_aggregation", serde_json::json!({"verdict": "novel"}));
    let config =
        WorkflowConfig { segmentation: SegmentationMode::Llm, ..hierarchical_config() };
    let (result, trace) = examine(&record(claim), &doc(), &client, &config).unwrap();
    assert_eq!(client.calls(), 4);
    assert_eq!(trace.calls[0].kind, "segmentation");
    assert_eq!(result.feature_results.len(), 2);
}

#[test]
fn errored_feature_is_excluded_and_recorded() {
    let claim = "intro: one; two";
    let document_text = render_document(&doc());
    let reply = serde_json::json!({"passages": ["par 2"], "verdict": "fully_disclosed"});
    // Scripts exist for the preamble and "two" but not "one": its call fails
    // with a transport-style error and the feature drops out.
    let client = ScriptedClient::default()
        .with_response(
            prompt_digest(&feature_messages(&document_text, claim, "intro:")),
            reply.clone(),
        )
        .with_response(prompt_digest(&feature_messages(&document_text, claim, "two")), reply)
        .with_default("claim_aggregation", serde_json::json!({"verdict": "not_novel"}));
    let (result, trace) =
        examine(&record(claim), &doc(), &client, &hierarchical_config()).unwrap();

    assert_eq!(trace.errored_features, vec![1]);
    let texts: Vec<&str> =
        result.predicted_segmentation.features.iter().map(|f| f.text.as_str()).collect();
    assert_eq!(texts, ["intro:", "two"]);
    assert_eq!(result.feature_results.len(), 2);
    // Four attempts reach the client but only three succeed into the trace.
    assert_eq!(client.calls(), 4);
    assert_eq!(trace.calls.len(), 3);
}

#[test]
fn all_features_erroring_is_no_features() {
    let claim = "one; two";
    let client =
        ScriptedClient::default().with_default("claim_aggregation", serde_json::json!({"verdict": "novel"}));
    let err = examine(&record(claim), &doc(), &client, &hierarchical_config()).unwrap_err();
    assert!(matches!(err, WorkflowError::NoFeatures));
}

#[test]
fn aggregation_prompt_filters_to_gold_references_without_summaries() {
    let claim = "intro: one; two";
    let mut refs = FeatureReferences::default();
    refs.insert(1, [PassageId::Paragraph(2)]);
    let mut rec = record(claim);
    rec.gold_references = Some(refs);

    let shared = FeatureResult {
        passages: vec![PassageId::Paragraph(1)],
        verdict: FeatureVerdict::PartiallyDisclosed,
        summary: Some("sum".to_string()),
    };
    let findings: Vec<(&str, &FeatureResult)> =
        vec![("intro:", &shared), ("one", &shared), ("two", &shared)];
    let filtered = PriorArtDocument {
        doc_id: "D1".to_string(),
        passages: vec![Passage {
            id: PassageId::Paragraph(2),
            text: "A seal closes the outlet.".to_string(),
        }],
    };
    let expected = aggregation_messages(
        claim,
        &render_document(&filtered),
        &render_findings(&findings, false),
    );
    assert!(!expected[1].content.contains("summary:"));

    let client = ScriptedClient::default()
        .with_default(
            "feature_examination",
            serde_json::json!({"passages": ["par 1"], "verdict": "partially_disclosed", "summary": "sum"}),
        )
        .with_response(prompt_digest(&expected), serde_json::json!({"verdict": "not_novel"}));
    let config = WorkflowConfig {
        use_gold_references: true,
        include_summaries: false,
        ..hierarchical_config()
    };
    // Resolving only by the expected digest proves the aggregation prompt was
    // built from the gold-filtered document and summary-free findings.
    let (result, _) = examine(&rec, &doc(), &client, &config).unwrap();
    assert_eq!(result.claim_verdict, ClaimVerdict::NotNovel);
}

#[test]
fn aggregation_prompt_uses_retrieved_passages_and_summaries() {
    let claim = "intro: one; two";
    let shared = FeatureResult {
        passages: vec![PassageId::Paragraph(1)],
        verdict: FeatureVerdict::PartiallyDisclosed,
        summary: Some("sum".to_string()),
    };
    let findings: Vec<(&str, &FeatureResult)> =
        vec![("intro:", &shared), ("one", &shared), ("two", &shared)];
    let filtered = PriorArtDocument {
        doc_id: "D1".to_string(),
        passages: vec![Passage {
            id: PassageId::Paragraph(1),
            text: "The valve opens under pressure.".to_string(),
        }],
    };
    let expected = aggregation_messages(
        claim,
        &render_document(&filtered),
        &render_findings(&findings, true),
    );
    assert!(expected[1].content.contains("summary: sum"));

    let client = ScriptedClient::default()
        .with_default(
            "feature_examination",
            serde_json::json!({"passages": ["par 1"], "verdict": "partially_disclosed", "summary": "sum"}),
        )
        .with_response(prompt_digest(&expected), serde_json::json!({"verdict": "novel"}));
    let (result, _) =
        examine(&record(claim), &doc(), &client, &hierarchical_config()).unwrap();
    assert_eq!(result.claim_verdict, ClaimVerdict::Novel);
}

fn canned(
    claim: &str,
    spans: &[Span],
    features: &[(FeatureVerdict, Vec<PassageId>)],
    claim_verdict: ClaimVerdict,
) -> ExaminationResult {
    assert_eq!(spans.len(), features.len());
    ExaminationResult {
        record_id: "APP1:initial".to_string(),
        predicted_segmentation: Segmentation::from_spans(claim, spans.iter().copied()),
        feature_results: features
            .iter()
            .map(|(verdict, passages)| FeatureResult {
                passages: passages.clone(),
                verdict: *verdict,
                summary: None,
            })
            .collect(),
        claim_verdict,
    }
}

#[test]
fn self_consistency_votes_on_verdicts_and_passages() {
    let claim = "aa; bb";
    let full = [Span::new(0, 2), Span::new(4, 6)];
    let short = [Span::new(0, 2)];
    let p1 = PassageId::Paragraph(1);
    let p2 = PassageId::Paragraph(2);
    let p3 = PassageId::Paragraph(3);
    use FeatureVerdict::*;
    let runs = [
        canned(
            claim,
            &full,
            &[(FullyDisclosed, vec![p2, p1, p3]), (FullyDisclosed, vec![p1])],
            ClaimVerdict::Novel,
        ),
        canned(
            claim,
            &full,
            &[(NotDisclosed, vec![p1, p2, p3]), (NotDisclosed, vec![p1])],
            ClaimVerdict::Novel,
        ),
        canned(claim, &short, &[(NotDisclosed, vec![p2])], ClaimVerdict::NotNovel),
    ];
    let (result, _) = self_consistency(3, 0, |seed| {
        Ok((runs[seed as usize].clone(), WorkflowTrace::default()))
    })
    .unwrap();

    // Claim verdict: novel wins 2 of 3.
    assert_eq!(result.claim_verdict, ClaimVerdict::Novel);
    // Feature 0: not_disclosed wins 2 of 3; p2 cited 3 times outranks p1 and
    // p3 (2 each, canonical order breaks the tie).
    assert_eq!(result.feature_results[0].verdict, NotDisclosed);
    assert_eq!(result.feature_results[0].passages, vec![p2, p1, p3]);
    // Feature 1 aligns in two runs only: a 1-1 verdict tie resolves toward
    // the stronger disclosure, and p1's two citations still meet the quorum.
    assert_eq!(result.feature_results[1].verdict, FullyDisclosed);
    assert_eq!(result.feature_results[1].passages, vec![p1]);
    // Segmentation comes from the first run.
    assert_eq!(result.predicted_segmentation.len(), 2);
}

#[test]
fn self_consistency_skips_failed_runs() {
    let claim = "aa";
    let spans = [Span::new(0, 2)];
    let p1 = PassageId::Paragraph(1);
    let novel = canned(
        claim,
        &spans,
        &[(FeatureVerdict::NotDisclosed, vec![p1])],
        ClaimVerdict::Novel,
    );
    let not_novel = canned(
        claim,
        &spans,
        &[(FeatureVerdict::NotDisclosed, vec![p1])],
        ClaimVerdict::NotNovel,
    );
    let (result, trace) = self_consistency(3, 10, |seed| match seed {
        10 => Err(WorkflowError::Client(ClientError::Transport("down".to_string()))),
        11 => Ok((novel.clone(), WorkflowTrace::default())),
        _ => Ok((not_novel.clone(), WorkflowTrace::default())),
    })
    .unwrap();

    // One novel vote out of two effective runs is not a majority.
    assert_eq!(result.claim_verdict, ClaimVerdict::NotNovel);
    assert!(trace.notes.iter().any(|n| n.contains("run 0 failed")));

    let err = self_consistency(3, 0, |_| {
        Err::<(ExaminationResult, WorkflowTrace), _>(WorkflowError::Client(
            ClientError::Transport("down".to_string()),
        ))
    })
    .unwrap_err();
    assert!(matches!(err, WorkflowError::AllRunsFailed(3)));
}

#[test]
fn examine_with_sampling_votes_across_scripted_runs() {
    let claim = "one; two";
    let shape = |p_one: Vec<&str>, verdict: &str, claim_verdict: &str| {
        serde_json::json!({
            "features": [
                {"text": "one", "passages": p_one, "verdict": verdict},
                {"text": "two", "passages": [], "verdict": "not_disclosed"}
            ],
            "claim_verdict": claim_verdict
        })
    };
    let client = ScriptedClient::default().with_kind_sequence(
        "single_step_examination",
        vec![
            shape(vec!["par 1"], "fully_disclosed", "novel"),
            shape(vec!["par 1", "par 2"], "not_disclosed", "not_novel"),
            shape(vec!["par 2"], "not_disclosed", "not_novel"),
        ],
    );
    let config = WorkflowConfig { self_consistency_k: 3, ..single_step_config() };
    let (result, trace) = examine(&record(claim), &doc(), &client, &config).unwrap();

    assert_eq!(client.calls(), 3);
    assert_eq!(trace.calls.len(), 3);
    assert_eq!(result.claim_verdict, ClaimVerdict::NotNovel);
    assert_eq!(result.feature_results[0].verdict, FeatureVerdict::NotDisclosed);
    // Both passages reach the two-vote quorum; equal counts fall back to
    // canonical order.
    assert_eq!(
        result.feature_results[0].passages,
        vec![PassageId::Paragraph(1), PassageId::Paragraph(2)]
    );
}

#[test]
fn examine_is_deterministic_for_a_fixed_script() {
    let claim = "intro: one; two";
    let build_client = || {
        ScriptedClient::default()
            .with_default(
                "feature_examination",
                serde_json::json!({"passages": ["par 1", "par 3"], "verdict": "partially_disclosed"}),
            )
            .with_default("claim_aggregation", serde_json::json!({"verdict": "novel"}))
    };
    let run = |client: &ScriptedClient| {
        examine(&record(claim), &doc(), client, &hierarchical_config()).unwrap()
    };
    let (r1, t1) = run(&build_client());
    let (r2, t2) = run(&build_client());
    assert_eq!(r1, r2);
    // Latency jitters, so compare everything else.
    assert_eq!(t1.prompt_tokens, t2.prompt_tokens);
    assert_eq!(t1.completion_tokens, t2.completion_tokens);
    assert_eq!(t1.dropped_ids, t2.dropped_ids);
    assert_eq!(t1.notes, t2.notes);
    let digests =
        |t: &WorkflowTrace| t.calls.iter().map(|c| c.prompt_digest.clone()).collect::<Vec<_>>();
    assert_eq!(digests(&t1), digests(&t2));
}

proptest! {
    // Independent re-derivation of the voting rules for runs that all share
    // one feature span: majority claim verdict with ties to not novel,
    // max-vote feature verdict with ties to the stronger disclosure, and a
    // half-of-k citation quorum ranked by count then canonical order.
    #[test]
    fn prop_self_consistency_matches_hand_counted_votes(
        k in prop::sample::select(vec![1usize, 3, 5]),
        seeds in prop::collection::vec((0..2u8, 0..3u8, 0..16u8), 5),
    ) {
        let claim = "aa";
        let spans = [Span::new(0, 2)];
        let ids =
            [PassageId::Paragraph(1), PassageId::Paragraph(2), PassageId::Paragraph(3), PassageId::Abstract];
        let verdicts = FeatureVerdict::ALL;
        let runs: Vec<ExaminationResult> = seeds[..k]
            .iter()
            .map(|(novel, v, mask)| {
                let passages: Vec<PassageId> = (0..4)
                    .filter(|b| mask & (1 << b) != 0)
                    .map(|b| ids[b as usize])
                    .collect();
                canned(
                    claim,
                    &spans,
                    &[(verdicts[*v as usize], passages)],
                    if *novel == 1 { ClaimVerdict::Novel } else { ClaimVerdict::NotNovel },
                )
            })
            .collect();

        let (result, _) = self_consistency(k, 0, |seed| {
            Ok((runs[seed as usize].clone(), WorkflowTrace::default()))
        })
        .unwrap();

        let novel_votes =
            runs.iter().filter(|r| r.claim_verdict == ClaimVerdict::Novel).count();
        let expected_claim = if novel_votes * 2 > k {
            ClaimVerdict::Novel
        } else {
            ClaimVerdict::NotNovel
        };
        prop_assert_eq!(result.claim_verdict, expected_claim);

        if k == 1 {
            prop_assert_eq!(&result, &runs[0]);
            return Ok(());
        }

        let count_of = |v: FeatureVerdict| {
            runs.iter().filter(|r| r.feature_results[0].verdict == v).count()
        };
        let best = verdicts.iter().map(|v| count_of(*v)).max().unwrap();
        let expected_verdict =
            *verdicts.iter().find(|v| count_of(**v) == best).unwrap();
        prop_assert_eq!(result.feature_results[0].verdict, expected_verdict);

        let quorum = k.div_ceil(2);
        let cites = |id: PassageId| {
            runs.iter().filter(|r| r.feature_results[0].passages.contains(&id)).count()
        };
        let mut expected: Vec<PassageId> =
            ids.iter().copied().filter(|id| cites(*id) >= quorum).collect();
        expected.sort_by(|a, b| cites(*b).cmp(&cites(*a)).then(a.cmp(b)));
        prop_assert_eq!(&result.feature_results[0].passages, &expected);
    }
}
