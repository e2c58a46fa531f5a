use std::path::PathBuf;

use amrsum_core::amr::{self, to_penman};
use amrsum_core::corpus::tokenize;
use amrsum_core::metrics::{rouge_l, rouge_n, Prf};
use amrsum_core::s2s::{train, Dims, Vocab};
use amrsum_core::summarize::{self, GenerationSettings, Guidance, ObjectiveConfig};
use amrsum_core::{Error, FusionConfig, LinearizeOptions, Seq2SeqParams, TokenSeq, TrainConfig};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    match e.root_cause() {
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        Error::NonFiniteLoss { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn seq(tokens: Vec<String>) -> PyResult<TokenSeq> {
    TokenSeq::new(tokens).map_err(to_py)
}

fn seqs(lines: Vec<Vec<String>>) -> PyResult<Vec<TokenSeq>> {
    lines.into_iter().map(seq).collect()
}

fn options(reentrancy_depth: usize, keep_senses: bool, keep_wiki: bool, keep_case: bool) -> LinearizeOptions {
    LinearizeOptions { max_reentrancy_depth: reentrancy_depth, strip_senses: !keep_senses, strip_wiki: !keep_wiki, lowercase: !keep_case }
}

#[pyclass(name = "AmrGraph", module = "amrsum", frozen, from_py_object)]
#[derive(Clone)]
struct PyAmrGraph {
    inner: amr::AmrGraph,
}

#[pymethods]
impl PyAmrGraph {
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(Self { inner: amr::parse_penman(text).map_err(to_py)? })
    }

    fn to_penman(&self) -> String {
        to_penman(&self.inner)
    }

    #[pyo3(signature = (reentrancy_depth=1, keep_senses=false, keep_wiki=false, keep_case=false))]
    fn linearize(&self, reentrancy_depth: usize, keep_senses: bool, keep_wiki: bool, keep_case: bool) -> PyResult<Vec<String>> {
        let out = amr::linearize(&self.inner, &options(reentrancy_depth, keep_senses, keep_wiki, keep_case)).map_err(to_py)?;
        Ok(out.tokens().to_vec())
    }

    /// Concept of every node, in node order.
    fn concepts(&self) -> Vec<String> {
        self.inner.nodes().iter().map(|n| n.concept.clone()).collect()
    }

    /// `(source, role, target)` node indices.
    fn edges(&self) -> Vec<(usize, String, usize)> {
        self.inner.edges().iter().map(|e| (e.source, e.role.clone(), e.target)).collect()
    }

    #[getter]
    fn root(&self) -> usize {
        self.inner.root()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("AmrGraph({} nodes, {} edges)", self.inner.len(), self.inner.edges().len())
    }
}

#[pyfunction]
fn merge_graphs(graphs: Vec<PyAmrGraph>) -> PyResult<PyAmrGraph> {
    let gs: Vec<amr::AmrGraph> = graphs.into_iter().map(|g| g.inner).collect();
    Ok(PyAmrGraph { inner: amr::merge_graphs(&gs).map_err(to_py)? })
}

#[pyfunction]
fn lcs_length(a: Vec<String>, b: Vec<String>) -> usize {
    amrsum_core::lcs_length(&a, &b)
}

#[pyfunction]
#[pyo3(signature = (text, lowercase=true))]
fn tokenize_text(text: &str, lowercase: bool) -> Vec<String> {
    tokenize(text, lowercase).tokens().to_vec()
}

#[pyfunction]
fn lambdas_from_theta(theta: f64) -> PyResult<(f64, f64, f64)> {
    let [l1, l2, l3] = amrsum_core::lambdas_from_theta(theta).map_err(to_py)?.lambdas;
    Ok((l1, l2, l3))
}

#[pyfunction]
fn fused_score(a: f64, b: f64, psi: f64) -> f64 {
    amrsum_core::fused_score(a, b, psi)
}

#[pyclass(name = "NGramModel", module = "amrsum", frozen)]
struct PyNGramModel {
    inner: amrsum_core::NGramModel,
}

#[pymethods]
impl PyNGramModel {
    #[new]
    #[pyo3(signature = (sentences, max_order=4))]
    fn new(sentences: Vec<Vec<String>>, max_order: usize) -> PyResult<Self> {
        Ok(Self { inner: amrsum_core::NGramModel::from_sentences(&seqs(sentences)?, max_order).map_err(to_py)? })
    }

    fn count(&self, ngram: Vec<String>) -> u64 {
        self.inner.count(&ngram)
    }

    fn p_lm(&self, word: &str, context: Vec<String>) -> f64 {
        self.inner.p_lm(word, &context)
    }

    #[pyo3(signature = (word, history, theta=2.5))]
    fn p_side(&self, word: &str, history: Vec<String>, theta: f64) -> PyResult<f64> {
        let w = amrsum_core::lambdas_from_theta(theta).map_err(to_py)?;
        Ok(self.inner.p_side(word, &history, &w))
    }

    fn vocab(&self) -> Vec<String> {
        self.inner.vocab().into_iter().map(String::from).collect()
    }
}

#[pyfunction]
fn bleu(hypotheses: Vec<Vec<String>>, references: Vec<Vec<String>>) -> PyResult<f64> {
    amrsum_core::bleu(&seqs(hypotheses)?, &seqs(references)?).map_err(to_py)
}

fn prf(p: Prf) -> (f64, f64, f64) {
    (p.precision, p.recall, p.f1)
}

/// `(precision, recall, f1)` of ROUGE-n for one pair.
#[pyfunction]
fn rouge(hypothesis: Vec<String>, reference: Vec<String>, n: usize) -> PyResult<(f64, f64, f64)> {
    Ok(prf(rouge_n(&seq(hypothesis)?, &seq(reference)?, n)))
}

#[pyfunction]
fn rouge_lcs(hypothesis: Vec<String>, reference: Vec<String>) -> PyResult<(f64, f64, f64)> {
    Ok(prf(rouge_l(&seq(hypothesis)?, &seq(reference)?)))
}

#[pyclass(name = "MetricReport", module = "amrsum", frozen, get_all)]
struct PyMetricReport {
    bleu: f64,
    rouge1: (f64, f64, f64),
    rouge2: (f64, f64, f64),
    rouge_l: (f64, f64, f64),
}

#[pymethods]
impl PyMetricReport {
    #[new]
    fn new(hypotheses: Vec<Vec<String>>, references: Vec<Vec<String>>) -> PyResult<Self> {
        let r = amrsum_core::MetricReport::compute(&seqs(hypotheses)?, &seqs(references)?).map_err(to_py)?;
        Ok(Self { bleu: r.bleu, rouge1: prf(r.rouge1), rouge2: prf(r.rouge2), rouge_l: prf(r.rouge_l) })
    }

    fn __repr__(&self) -> String {
        format!("MetricReport(bleu={:.4}, rouge1_f={:.4}, rouge2_f={:.4}, rougeL_f={:.4})", self.bleu, self.rouge1.2, self.rouge2.2, self.rouge_l.2)
    }
}

fn guidance(kind: &str, k: usize, gold: Option<Vec<Vec<String>>>) -> PyResult<Guidance> {
    match kind {
        "none" => Ok(Guidance::None),
        "doc" => Ok(Guidance::LcsPruned { k }),
        "oracle" => Ok(Guidance::Oracle {
            gold: seqs(gold.ok_or_else(|| PyValueError::new_err("oracle guidance needs gold sentences"))?)?,
        }),
        other => Err(PyValueError::new_err(format!("unknown guidance {other:?}; expected none, doc or oracle"))),
    }
}

fn settings(psi: f64, theta: f64, beam_width: usize, max_length: usize) -> PyResult<GenerationSettings> {
    Ok(GenerationSettings {
        fusion: FusionConfig { psi, beam_width, max_length },
        lm_weights: amrsum_core::lambdas_from_theta(theta).map_err(to_py)?,
        linearize: LinearizeOptions::default(),
    })
}

fn document(sentences: Vec<(Vec<String>, PyAmrGraph)>) -> PyResult<Vec<(TokenSeq, amr::AmrGraph)>> {
    sentences.into_iter().map(|(s, g)| Ok((seq(s)?, g.inner))).collect()
}

/// Attention seq2seq model from a linearized graph to text.
#[pyclass(name = "Model", module = "amrsum", frozen)]
struct PyModel {
    inner: Seq2SeqParams,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: Seq2SeqParams::load(&path).map_err(to_py)? })
    }

    /// Trains a fresh model on `(source tokens, target tokens)` pairs and
    /// returns it with its per-epoch losses.
    #[staticmethod]
    #[pyo3(signature = (pairs, epochs=30, learning_rate=0.01, batch_size=8, embed=32, hidden=64, seed=0))]
    fn train(
        py: Python<'_>,
        pairs: Vec<(Vec<String>, Vec<String>)>,
        epochs: usize,
        learning_rate: f64,
        batch_size: usize,
        embed: usize,
        hidden: usize,
        seed: u64,
    ) -> PyResult<(Self, Vec<f64>)> {
        let pairs: Vec<(TokenSeq, TokenSeq)> = pairs.into_iter().map(|(s, t)| Ok((seq(s)?, seq(t)?))).collect::<PyResult<_>>()?;
        let cfg = TrainConfig { learning_rate, epochs, batch_size, seed, ..TrainConfig::default() };
        let report = py
            .detach(|| {
                let init = Seq2SeqParams::init(
                    Vocab::build(pairs.iter().map(|p| &p.0), None)?,
                    Vocab::build(pairs.iter().map(|p| &p.1), None)?,
                    Dims { embed, hidden },
                    seed,
                )?;
                train(&init, &pairs, &cfg)
            })
            .map_err(to_py)?;
        Ok((Self { inner: report.params }, report.epoch_losses))
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        std::fs::write(path, self.inner.to_checkpoint()).map_err(|e| PyIOError::new_err(e.to_string()))
    }

    fn sequence_loss(&self, source: Vec<String>, target: Vec<String>) -> PyResult<f64> {
        self.inner.sequence_loss(&seq(source)?, &seq(target)?).map_err(to_py)
    }

    /// Realizes one graph. `document` is a list of `(sentence tokens, graph)`
    /// pairs used by `doc` guidance; `gold` feeds `oracle` guidance.
    #[pyo3(signature = (graph, guidance="none", document=None, gold=None, k=5, psi=0.95, theta=2.5, beam_width=5, max_length=100))]
    #[allow(clippy::too_many_arguments)]
    fn generate(
        &self,
        py: Python<'_>,
        graph: PyAmrGraph,
        guidance: &str,
        document: Option<Vec<(Vec<String>, PyAmrGraph)>>,
        gold: Option<Vec<Vec<String>>>,
        k: usize,
        psi: f64,
        theta: f64,
        beam_width: usize,
        max_length: usize,
    ) -> PyResult<Vec<String>> {
        let g = self::guidance(guidance, k, gold)?;
        let doc = self::document(document.unwrap_or_default())?;
        let s = settings(psi, theta, beam_width, max_length)?;
        let out = py.detach(|| summarize::realize(&self.inner, &graph.inner, &doc, &g, &s)).map_err(to_py)?;
        Ok(out.tokens().to_vec())
    }

    /// Full pipeline over one document: merge, extract a summary subgraph
    /// and realize it. Returns the subgraph and the summary tokens.
    #[pyo3(signature = (document, guidance="doc", gold=None, k=5, budget=None, psi=0.95, theta=2.5, beam_width=5, max_length=100))]
    #[allow(clippy::too_many_arguments)]
    fn summarize(
        &self,
        py: Python<'_>,
        document: Vec<(Vec<String>, PyAmrGraph)>,
        guidance: &str,
        gold: Option<Vec<Vec<String>>>,
        k: usize,
        budget: Option<usize>,
        psi: f64,
        theta: f64,
        beam_width: usize,
        max_length: usize,
    ) -> PyResult<(PyAmrGraph, Vec<String>)> {
        let g = self::guidance(guidance, k, gold)?;
        let doc = self::document(document)?;
        let s = settings(psi, theta, beam_width, max_length)?;
        let objective = ObjectiveConfig { budget, ..ObjectiveConfig::default() };
        let (graph, text) = py.detach(|| summarize::summarize_document(&doc, &objective, &self.inner, &g, &s)).map_err(to_py)?;
        Ok((PyAmrGraph { inner: graph }, text.tokens().to_vec()))
    }

    fn __repr__(&self) -> String {
        let d = self.inner.dims;
        format!(
            "Model(src_vocab={}, tgt_vocab={}, embed={}, hidden={})",
            self.inner.src_vocab.len(),
            self.inner.tgt_vocab.len(),
            d.embed,
            d.hidden
        )
    }
}

#[pymodule]
fn amrsum(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyAmrGraph>()?;
    m.add_class::<PyNGramModel>()?;
    m.add_class::<PyMetricReport>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(merge_graphs, m)?)?;
    m.add_function(wrap_pyfunction!(lcs_length, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize_text, m)?)?;
    m.add_function(wrap_pyfunction!(lambdas_from_theta, m)?)?;
    m.add_function(wrap_pyfunction!(fused_score, m)?)?;
    m.add_function(wrap_pyfunction!(bleu, m)?)?;
    m.add_function(wrap_pyfunction!(rouge, m)?)?;
    m.add_function(wrap_pyfunction!(rouge_lcs, m)?)?;
    Ok(())
}
