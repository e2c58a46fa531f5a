mod support;

use std::collections::BTreeSet;

use amrsum_core::amr::{merge_graphs, AmrGraph};
use amrsum_core::corpus::Document;
use amrsum_core::decode::{generate, FusionConfig};
use amrsum_core::s2s::{train, Dims, Seq2SeqParams, TrainConfig, Vocab};
use amrsum_core::side_info::{select_side_sentences, SideMode};
use amrsum_core::summarize::{
    extract_summary_graph, realize, score_subgraph, summarize_document, DefaultFeaturizer, GenerationSettings, Guidance,
    Featurizer, ObjectiveConfig, SearchMode, SubgraphObjective,
};
use amrsum_core::{bleu, linearize, parse_penman, Error, LinearizeOptions, TokenSeq};

fn toy_model(lang: &support::ToyLanguage) -> Seq2SeqParams {
    let opts = LinearizeOptions::default();
    let pairs: Vec<(TokenSeq, TokenSeq)> = lang
        .training_records(800, 21)
        .into_iter()
        .map(|(g, s)| (linearize(&parse_penman(&g).unwrap(), &opts).unwrap(), TokenSeq::from_text(&s)))
        .collect();
    let init = Seq2SeqParams::init(
        Vocab::build(pairs.iter().map(|p| &p.0), None).unwrap(),
        Vocab::build(pairs.iter().map(|p| &p.1), None).unwrap(),
        Dims { embed: 16, hidden: 32 },
        21,
    )
    .unwrap();
    let cfg = TrainConfig { learning_rate: 0.01, epochs: 15, clip: 5.0, batch_size: 16, seed: 21 };
    train(&init, &pairs, &cfg).unwrap().params
}

fn settings() -> GenerationSettings {
    GenerationSettings { fusion: FusionConfig { max_length: 20, ..FusionConfig::default() }, ..GenerationSettings::default() }
}

fn documents(lang: &support::ToyLanguage, n: usize) -> Vec<Document> {
    lang.documents(n, 6, 22).into_iter().map(|r| r.into_document(true).unwrap()).collect()
}

#[test]
fn pipeline_guidance_and_determinism() {
    let lang = support::ToyLanguage::new();
    let model = toy_model(&lang);
    let docs = documents(&lang, 50);
    let objective = ObjectiveConfig { budget: Some(4), ..ObjectiveConfig::default() };
    let s = settings();
    let run = |g: &dyn Fn(&Document) -> Guidance| -> Vec<TokenSeq> {
        docs.iter().map(|d| summarize_document(&d.sentences, &objective, &model, &g(d), &s).unwrap().1).collect()
    };
    let refs: Vec<TokenSeq> = docs.iter().map(Document::summary_tokens).collect();
    let none = run(&|_| Guidance::None);
    let oracle = run(&|d| Guidance::Oracle { gold: d.summary.clone() });
    assert!(bleu(&oracle, &refs).unwrap() >= bleu(&none, &refs).unwrap());
    assert_eq!(none, run(&|_| Guidance::None));

    // no guidance is plain beam search over the extracted graph
    let d = &docs[0];
    let (graph, text) = summarize_document(&d.sentences, &objective, &model, &Guidance::None, &s).unwrap();
    let direct = generate(&model, &linearize(&graph, &s.linearize).unwrap(), None, &s.fusion).unwrap();
    assert_eq!(text, direct);
    assert!(graph.len() <= 4 && graph.is_connected());
}

#[test]
fn single_sentence_document_uses_its_sentence() {
    let g = parse_penman("(v / act1-01 :ARG0 (x / thing2) :ARG1 (y / thing3))").unwrap();
    let sentence = TokenSeq::from_text("the thing2a act1b the thing3c .");
    let side = select_side_sentences(&[(sentence.clone(), g.clone())], &g, 1, &LinearizeOptions::default()).unwrap();
    assert_eq!(side.sentences, vec![sentence]);
    assert_eq!(side.mode, SideMode::LcsPruned { k: 1 });
}

#[test]
fn errors_are_tagged_with_their_stage() {
    let lang = support::ToyLanguage::new();
    let docs = documents(&lang, 1);
    let model = Seq2SeqParams::init(
        Vocab::build([TokenSeq::from_text("a")].iter(), None).unwrap(),
        Vocab::build([TokenSeq::from_text("b")].iter(), None).unwrap(),
        Dims { embed: 2, hidden: 2 },
        0,
    )
    .unwrap();
    let stage_of = |e: Error| match e {
        Error::Stage { stage, .. } => stage,
        other => panic!("untagged error {other}"),
    };
    let s = settings();
    let err = summarize_document(&[], &ObjectiveConfig::default(), &model, &Guidance::None, &s).unwrap_err();
    assert_eq!(stage_of(err), "merge");
    let bad = ObjectiveConfig { node_weights: vec![1.0], ..ObjectiveConfig::default() };
    let err = summarize_document(&docs[0].sentences, &bad, &model, &Guidance::None, &s).unwrap_err();
    assert_eq!(stage_of(err), "extract");
    let err = summarize_document(&docs[0].sentences, &ObjectiveConfig::default(), &model, &Guidance::Oracle { gold: vec![] }, &s)
        .unwrap_err();
    assert_eq!(stage_of(err), "side information");
    let zero_beam = GenerationSettings { fusion: FusionConfig { beam_width: 0, ..s.fusion }, ..s.clone() };
    let err = realize(&model, docs[0].summary_graph.as_ref().unwrap(), &[], &Guidance::None, &zero_beam).unwrap_err();
    assert_eq!(stage_of(err), "decode");
}

struct Counting;

impl Featurizer for Counting {
    fn node_dim(&self) -> usize {
        1
    }
    fn edge_dim(&self) -> usize {
        1
    }
    fn node_features(&self, _: &AmrGraph, _: usize) -> amrsum_core::Result<Vec<f64>> {
        Ok(vec![1.0])
    }
    fn edge_features(&self, _: &AmrGraph, _: usize) -> amrsum_core::Result<Vec<f64>> {
        Ok(vec![1.0])
    }
}

#[test]
fn objective_is_a_sum_over_nodes_and_edges() {
    let g = parse_penman("(w / want-01 :ARG0 (b / boy) :ARG1 (g / go-02 :ARG0 b))").unwrap();
    let obj = SubgraphObjective::new(vec![2.0], vec![0.5], Box::new(Counting), 2).unwrap();
    assert_eq!(score_subgraph(&obj, &g).unwrap(), 2.0 * 3.0 + 0.5 * 3.0);
    let sub = g.induced(&[0, 1].into()).unwrap();
    assert_eq!(score_subgraph(&obj, &sub).unwrap(), 2.0 * 2.0 + 0.5);
}

#[test]
fn extraction_is_bounded_and_beats_the_root() {
    let lang = support::ToyLanguage::new();
    for d in documents(&lang, 10) {
        let parses: Vec<AmrGraph> = d.sentences.iter().map(|(_, g)| g.clone()).collect();
        let merged = merge_graphs(&parses).unwrap();
        let o = ObjectiveConfig::default();
        let obj =
            SubgraphObjective::new(o.node_weights, o.edge_weights, Box::new(DefaultFeaturizer::fit(&merged, &parses)), 5).unwrap();

        // features are keyed by node id, so a subgraph scores the same
        // however it was cut out
        let outer: BTreeSet<usize> = (0..merged.len()).filter(|i| i % 3 != 2 || *i == merged.root()).collect();
        let mid = merged.induced(&outer).unwrap();
        let inner: BTreeSet<usize> = (0..mid.len()).filter(|i| i % 2 == 0 || *i == mid.root()).collect();
        let direct: BTreeSet<usize> = inner.iter().map(|&i| *outer.iter().nth(i).unwrap()).collect();
        let a = score_subgraph(&obj, &mid.induced(&inner).unwrap()).unwrap();
        let b = score_subgraph(&obj, &merged.induced(&direct).unwrap()).unwrap();
        assert!((a - b).abs() < 1e-12);

        let root_only = merged.induced(&[merged.root()].into()).unwrap();
        for mode in [SearchMode::Greedy, SearchMode::Auto] {
            let out = extract_summary_graph(&obj, &merged, mode).unwrap();
            assert!(out.is_connected() && out.len() <= 5);
            assert!(score_subgraph(&obj, &out).unwrap() >= score_subgraph(&obj, &root_only).unwrap());
        }
    }
}
