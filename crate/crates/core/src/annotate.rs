//! Rubric-based exposure annotation through a pluggable classifier client.
//!
//! Each occupation is labelled `n_samples` times by one model. Every sample
//! is an independent request; responses that do not contain exactly one
//! category token are retried up to `max_retries` times. Samples can be
//! dispatched concurrently when the client declares itself shareable, and
//! are always reassembled in request order.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::table::{Table, TableError};
use crate::taxonomy::{OccupationCode, OccupationNode, Taxonomy};

pub const DEFAULT_SAMPLES: usize = 8;
pub const DEFAULT_MAX_RETRIES: usize = 3;

/// Rubric label for one occupation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExposureCategory {
    E0,
    E1,
    E2,
    E3,
}

impl ExposureCategory {
    pub const ALL: [ExposureCategory; 4] = [
        ExposureCategory::E0,
        ExposureCategory::E1,
        ExposureCategory::E2,
        ExposureCategory::E3,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExposureCategory::E0 => "E0",
            ExposureCategory::E1 => "E1",
            ExposureCategory::E2 => "E2",
            ExposureCategory::E3 => "E3",
        }
    }
}

impl fmt::Display for ExposureCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExposureCategory {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_category(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("no exposure category found in response")]
    NoCategoryFound,
    #[error("ambiguous response: found {0:?}")]
    AmbiguousResponse(Vec<ExposureCategory>),
}

/// Extracts the single category token from a model response.
///
/// Tokens are matched case-insensitively and must be bounded by non-ASCII-
/// alphanumeric characters, so `E2.` and `答案是E2。` match but `E20` and
/// `TE1` do not. Repeating the same token is fine; two distinct tokens are
/// ambiguous.
pub fn parse_category(response: &str) -> Result<ExposureCategory, ParseError> {
    let bytes = response.as_bytes();
    let mut found: Vec<ExposureCategory> = Vec::new();
    for i in 0..bytes.len().saturating_sub(1) {
        if !bytes[i].eq_ignore_ascii_case(&b'e') {
            continue;
        }
        let cat = match bytes[i + 1] {
            b'0' => ExposureCategory::E0,
            b'1' => ExposureCategory::E1,
            b'2' => ExposureCategory::E2,
            b'3' => ExposureCategory::E3,
            _ => continue,
        };
        let left_ok = i == 0 || !is_word_byte(bytes[i - 1]);
        let right_ok = i + 2 >= bytes.len() || !is_word_byte(bytes[i + 2]);
        if left_ok && right_ok && !found.contains(&cat) {
            found.push(cat);
        }
    }
    match found.len() {
        0 => Err(ParseError::NoCategoryFound),
        1 => Ok(found[0]),
        _ => {
            found.sort();
            Err(ParseError::AmbiguousResponse(found))
        }
    }
}

fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// Category definitions sent with every prompt. Loaded from configuration
/// or taken from [`Rubric::default`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rubric {
    pub preamble: String,
    pub definitions: BTreeMap<ExposureCategory, String>,
}

impl Default for Rubric {
    fn default() -> Self {
        let definitions = BTreeMap::from([
            (
                ExposureCategory::E0,
                "No exposure. A language model cannot cut the time needed for the occupation's work, \
                 for example because the work is mainly physical."
                    .to_owned(),
            ),
            (
                ExposureCategory::E1,
                "Direct exposure. Using an existing language model interface alone, the time to \
                 finish the occupation's work at equal quality can be cut by at least half."
                    .to_owned(),
            ),
            (
                ExposureCategory::E2,
                "Exposure through applications. The halving of completion time is possible only \
                 once extra software is built on top of the model or it is adapted with domain data."
                    .to_owned(),
            ),
            (
                ExposureCategory::E3,
                "Exposure through images. The halving of completion time additionally needs the \
                 model to process or produce images."
                    .to_owned(),
            ),
        ]);
        Self {
            preamble: "Assess how exposed the following occupation is to large language models.".to_owned(),
            definitions,
        }
    }
}

impl Rubric {
    /// Reads a rubric from TOML: `preamble = "..."` plus one key per category.
    pub fn from_toml(text: &str) -> Result<Self, AnnotateError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            preamble: String,
            #[serde(rename = "E0")]
            e0: String,
            #[serde(rename = "E1")]
            e1: String,
            #[serde(rename = "E2")]
            e2: String,
            #[serde(rename = "E3")]
            e3: String,
        }
        let raw: Raw = toml::from_str(text).map_err(|e| AnnotateError::Config(e.to_string()))?;
        Ok(Self {
            preamble: raw.preamble,
            definitions: BTreeMap::from([
                (ExposureCategory::E0, raw.e0),
                (ExposureCategory::E1, raw.e1),
                (ExposureCategory::E2, raw.e2),
                (ExposureCategory::E3, raw.e3),
            ]),
        })
    }

    pub fn text(&self) -> String {
        let mut s = self.preamble.clone();
        s.push('\n');
        for cat in ExposureCategory::ALL {
            let def = self.definitions.get(&cat).map(String::as_str).unwrap_or("");
            s.push_str(&format!("{cat}: {def}\n"));
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RubricPrompt {
    pub occupation_code: OccupationCode,
    pub occupation_title: String,
    pub occupation_description: String,
    pub rubric_text: String,
    pub language_tag: String,
}

impl RubricPrompt {
    /// Deterministic prompt text. The code line lets scripted clients key
    /// their answers by occupation.
    pub fn render(&self) -> String {
        format!(
            "[lang:{lang}]\n{rubric}\nOccupation code: {code}\nOccupation title: {title}\nOccupation description: {desc}\n\n\
             Answer with exactly one label from E0, E1, E2, E3 and nothing else.\n",
            lang = self.language_tag,
            rubric = self.rubric_text.trim_end(),
            code = self.occupation_code,
            title = self.occupation_title,
            desc = self.occupation_description,
        )
    }
}

pub fn render_prompt(
    node: &OccupationNode,
    rubric: &Rubric,
    language_tag: &str,
) -> Result<RubricPrompt, AnnotateError> {
    if !node.has_description() {
        return Err(AnnotateError::EmptyDescription(node.code.clone()));
    }
    Ok(RubricPrompt {
        occupation_code: node.code.clone(),
        occupation_title: node.title.clone(),
        occupation_description: node.description.clone(),
        rubric_text: rubric.text(),
        language_tag: language_tag.to_owned(),
    })
}

/// Extracts the code line written by [`RubricPrompt::render`].
pub fn prompt_code(prompt: &str) -> Option<&str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("Occupation code: "))
        .map(str::trim)
}

/// Decoding parameters forwarded to the client untouched.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DecodeConfig {
    pub temperature: Option<f64>,
    #[serde(default)]
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capability {
    /// Requests must be issued one at a time.
    Serial,
    /// Requests may overlap.
    Concurrent,
}

/// One completion request. `sample` and `attempt` identify the request for
/// replayable clients; live clients can ignore them.
#[derive(Debug, Clone, Copy)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub decode: &'a DecodeConfig,
    pub sample: usize,
    pub attempt: usize,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("client error: {0}")]
pub struct ClientError(pub String);

pub trait ClassifierClient: Send + Sync {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError>;

    fn capability(&self) -> Capability {
        Capability::Serial
    }
}

impl<C: ClassifierClient + ?Sized> ClassifierClient for &C {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        (**self).complete(request)
    }
    fn capability(&self) -> Capability {
        (**self).capability()
    }
}

impl<C: ClassifierClient + ?Sized> ClassifierClient for Box<C> {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        (**self).complete(request)
    }
    fn capability(&self) -> Capability {
        (**self).capability()
    }
}

#[derive(Debug, Error)]
pub enum AnnotateError {
    #[error("occupation `{0}` has an empty description and cannot be annotated")]
    EmptyDescription(OccupationCode),
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("occupation `{code}` sample {sample}: transport failure after {attempts} attempts: {source}")]
    Transport {
        code: OccupationCode,
        sample: usize,
        attempts: usize,
        source: ClientError,
    },
    #[error("occupation `{code}` sample {sample}: no parseable answer after {attempts} attempts: {source}")]
    Unparseable {
        code: OccupationCode,
        sample: usize,
        attempts: usize,
        source: ParseError,
    },
    #[error("mock client configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("annotation store {path}: {message}")]
    Store { path: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscardedResponse {
    pub sample: usize,
    pub attempt: usize,
    pub response: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationRun {
    pub model_id: String,
    pub occupation_code: OccupationCode,
    /// `samples[i]` is the parse of `raw_responses[i]`.
    pub samples: Vec<ExposureCategory>,
    pub raw_responses: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discarded: Vec<DiscardedResponse>,
}

#[derive(Debug, Clone)]
pub struct AnnotateOptions {
    pub model_id: String,
    pub n_samples: usize,
    pub max_retries: usize,
    pub max_in_flight: usize,
    pub decode: DecodeConfig,
    pub rubric: Rubric,
    pub language_tag: String,
}

impl Default for AnnotateOptions {
    fn default() -> Self {
        Self {
            model_id: "mock".to_owned(),
            n_samples: DEFAULT_SAMPLES,
            max_retries: DEFAULT_MAX_RETRIES,
            max_in_flight: 4,
            decode: DecodeConfig::default(),
            rubric: Rubric::default(),
            language_tag: "zh-CN".to_owned(),
        }
    }
}

struct SampleOutcome {
    category: ExposureCategory,
    response: String,
    discarded: Vec<DiscardedResponse>,
}

fn request_sample<C: ClassifierClient + ?Sized>(
    client: &C,
    prompt: &str,
    code: &OccupationCode,
    sample: usize,
    opts: &AnnotateOptions,
) -> Result<SampleOutcome, AnnotateError> {
    let attempts = opts.max_retries + 1;
    let mut discarded = Vec::new();
    let mut last_transport = None;
    let mut last_parse = None;
    for attempt in 0..attempts {
        let req = CompletionRequest {
            prompt,
            decode: &opts.decode,
            sample,
            attempt,
        };
        match client.complete(&req) {
            Ok(response) => match parse_category(&response) {
                Ok(category) => {
                    return Ok(SampleOutcome {
                        category,
                        response,
                        discarded,
                    })
                }
                Err(e) => {
                    discarded.push(DiscardedResponse {
                        sample,
                        attempt,
                        response,
                        reason: e.to_string(),
                    });
                    last_parse = Some(e);
                    last_transport = None;
                }
            },
            Err(e) => {
                log::warn!("{code} sample {sample} attempt {attempt}: {e}");
                last_transport = Some(e);
                last_parse = None;
            }
        }
    }
    match (last_transport, last_parse) {
        (Some(source), _) => Err(AnnotateError::Transport {
            code: code.clone(),
            sample,
            attempts,
            source,
        }),
        (None, Some(source)) => Err(AnnotateError::Unparseable {
            code: code.clone(),
            sample,
            attempts,
            source,
        }),
        (None, None) => unreachable!("at least one attempt is made"),
    }
}

/// Collects `n_samples` parsed labels for one occupation.
pub fn annotate_occupation<C: ClassifierClient + ?Sized>(
    client: &C,
    node: &OccupationNode,
    opts: &AnnotateOptions,
) -> Result<AnnotationRun, AnnotateError> {
    if opts.n_samples == 0 {
        return Err(AnnotateError::NoSamples);
    }
    let prompt = render_prompt(node, &opts.rubric, &opts.language_tag)?.render();
    let code = &node.code;
    let workers = match client.capability() {
        Capability::Serial => 1,
        Capability::Concurrent => opts.max_in_flight.clamp(1, opts.n_samples),
    };

    let outcomes: Vec<Result<SampleOutcome, AnnotateError>> = if workers == 1 {
        let mut out = Vec::with_capacity(opts.n_samples);
        for i in 0..opts.n_samples {
            let r = request_sample(client, &prompt, code, i, opts);
            let failed = r.is_err();
            out.push(r);
            if failed {
                break;
            }
        }
        out
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<SampleOutcome, AnnotateError>>>> =
            Mutex::new((0..opts.n_samples).map(|_| None).collect());
        std::thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    if i >= opts.n_samples {
                        break;
                    }
                    let r = request_sample(client, &prompt, code, i, opts);
                    slots.lock().expect("slot lock")[i] = Some(r);
                });
            }
        });
        slots
            .into_inner()
            .expect("slot lock")
            .into_iter()
            .map(|s| s.expect("every slot filled"))
            .collect()
    };

    let mut run = AnnotationRun {
        model_id: opts.model_id.clone(),
        occupation_code: code.clone(),
        samples: Vec::with_capacity(opts.n_samples),
        raw_responses: Vec::with_capacity(opts.n_samples),
        discarded: Vec::new(),
    };
    for outcome in outcomes {
        let o = outcome?;
        run.samples.push(o.category);
        run.raw_responses.push(o.response);
        run.discarded.extend(o.discarded);
    }
    Ok(run)
}

/// Result of annotating every scoreable leaf of a taxonomy.
#[derive(Debug, Default)]
pub struct TaxonomyAnnotation {
    pub runs: Vec<AnnotationRun>,
    /// Leaves skipped because they have no description.
    pub refused: Vec<OccupationCode>,
}

pub fn annotate_taxonomy<C: ClassifierClient + ?Sized>(
    client: &C,
    taxonomy: &Taxonomy,
    opts: &AnnotateOptions,
) -> Result<TaxonomyAnnotation, AnnotateError> {
    let mut out = TaxonomyAnnotation::default();
    for node in taxonomy.scored_leaves() {
        match annotate_occupation(client, node, opts) {
            Ok(run) => out.runs.push(run),
            Err(AnnotateError::EmptyDescription(code)) => out.refused.push(code),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Deterministic reference clients.
#[derive(Debug)]
pub enum MockClient {
    /// Always returns the same response.
    Fixed(String),
    /// Walks a response list in call order, wrapping around.
    Cycle { answers: Vec<String>, next: AtomicUsize },
    /// Per-occupation response lists, each walked in call order.
    Scripted {
        script: HashMap<String, Vec<String>>,
        cursors: Mutex<HashMap<String, usize>>,
    },
    /// Draws a label from fixed category weights with a stream derived from
    /// `(seed, model, occupation code, sample, attempt)`, so results do not
    /// depend on dispatch order.
    Seeded {
        seed: u64,
        model_id: String,
        weights: [f64; 4],
    },
}

impl MockClient {
    pub fn fixed(answer: impl Into<String>) -> Self {
        MockClient::Fixed(answer.into())
    }

    pub fn cycle<I, S>(answers: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        MockClient::Cycle {
            answers: answers.into_iter().map(Into::into).collect(),
            next: AtomicUsize::new(0),
        }
    }

    pub fn scripted(script: HashMap<String, Vec<String>>) -> Self {
        MockClient::Scripted {
            script,
            cursors: Mutex::new(HashMap::new()),
        }
    }

    /// Loads a `code,answer` table; rows for the same code are kept in order.
    pub fn scripted_from_table(text: &str) -> Result<Self, AnnotateError> {
        let table = Table::parse(text)?;
        let code_col = table.column("code")?;
        let ans_col = table.column("answer")?;
        let mut script: HashMap<String, Vec<String>> = HashMap::new();
        for row in &table.rows {
            script
                .entry(row.get(code_col).to_owned())
                .or_default()
                .push(row.get(ans_col).to_owned());
        }
        Ok(Self::scripted(script))
    }

    pub fn seeded(seed: u64, model_id: &str) -> Self {
        MockClient::Seeded {
            seed,
            model_id: model_id.to_owned(),
            weights: [0.4, 0.3, 0.2, 0.1],
        }
    }

    /// Parses `fixed:E1`, `cycle:E1,E0`, `script:<path>` or `seeded`.
    pub fn from_spec(spec: &str, seed: u64, model_id: &str) -> Result<Self, AnnotateError> {
        let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
        match kind {
            "fixed" if !arg.is_empty() => Ok(Self::fixed(arg)),
            "cycle" if !arg.is_empty() => Ok(Self::cycle(arg.split(',').map(str::trim))),
            "script" if !arg.is_empty() => {
                let text = std::fs::read_to_string(arg).map_err(|e| AnnotateError::Config(format!("{arg}: {e}")))?;
                Self::scripted_from_table(&text)
            }
            "seeded" => Ok(Self::seeded(seed, model_id)),
            _ => Err(AnnotateError::Config(format!(
                "unknown mock `{spec}` (expected fixed:<answer>, cycle:<a,b,..>, script:<file> or seeded)"
            ))),
        }
    }
}

impl ClassifierClient for MockClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        match self {
            MockClient::Fixed(a) => Ok(a.clone()),
            MockClient::Cycle { answers, next } => {
                if answers.is_empty() {
                    return Err(ClientError("empty answer cycle".into()));
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                Ok(answers[i % answers.len()].clone())
            }
            MockClient::Scripted { script, cursors } => {
                let code = prompt_code(request.prompt)
                    .ok_or_else(|| ClientError("prompt carries no occupation code".into()))?;
                let answers = script
                    .get(code)
                    .filter(|a| !a.is_empty())
                    .ok_or_else(|| ClientError(format!("no scripted answers for `{code}`")))?;
                let mut cursors = cursors.lock().expect("cursor lock");
                let cursor = cursors.entry(code.to_owned()).or_insert(0);
                let answer = answers[*cursor % answers.len()].clone();
                *cursor += 1;
                Ok(answer)
            }
            MockClient::Seeded {
                seed,
                model_id,
                weights,
            } => {
                let code = prompt_code(request.prompt).unwrap_or("");
                let mut h = Sha256::new();
                h.update(seed.to_le_bytes());
                h.update(model_id.as_bytes());
                h.update([0]);
                h.update(code.as_bytes());
                h.update([0]);
                h.update((request.sample as u64).to_le_bytes());
                h.update((request.attempt as u64).to_le_bytes());
                let digest = h.finalize();
                let mut key = [0u8; 32];
                key.copy_from_slice(&digest);
                let mut rng = ChaCha8Rng::from_seed(key);
                let dist = WeightedIndex::new(weights).map_err(|e| ClientError(e.to_string()))?;
                Ok(ExposureCategory::ALL[dist.sample(&mut rng)].to_string())
            }
        }
    }

    fn capability(&self) -> Capability {
        match self {
            MockClient::Fixed(_) | MockClient::Seeded { .. } => Capability::Concurrent,
            MockClient::Cycle { .. } | MockClient::Scripted { .. } => Capability::Serial,
        }
    }
}

/// Out-of-process client: runs a program with the prompt on stdin and takes
/// its stdout as the response. Decode parameters are passed as
/// `OCCEXPO_DECODE_*` environment variables.
#[derive(Debug, Clone)]
pub struct CommandClient {
    pub program: PathBuf,
    pub args: Vec<String>,
}

impl ClassifierClient for CommandClient {
    fn complete(&self, request: &CompletionRequest<'_>) -> Result<String, ClientError> {
        let mut cmd = Command::new(&self.program);
        cmd.args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .env("OCCEXPO_SAMPLE", request.sample.to_string())
            .env("OCCEXPO_ATTEMPT", request.attempt.to_string());
        if let Some(t) = request.decode.temperature {
            cmd.env("OCCEXPO_DECODE_TEMPERATURE", t.to_string());
        }
        for (k, v) in &request.decode.params {
            cmd.env(format!("OCCEXPO_DECODE_{}", k.to_ascii_uppercase()), v);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| ClientError(format!("{}: {e}", self.program.display())))?;
        child
            .stdin
            .take()
            .expect("piped stdin")
            .write_all(request.prompt.as_bytes())
            .map_err(|e| ClientError(e.to_string()))?;
        let out = child.wait_with_output().map_err(|e| ClientError(e.to_string()))?;
        if !out.status.success() {
            return Err(ClientError(format!(
                "{} exited with {}",
                self.program.display(),
                out.status
            )));
        }
        String::from_utf8(out.stdout).map_err(|e| ClientError(e.to_string()))
    }
}

/// One line of the append-only annotation store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub model_id: String,
    pub code: OccupationCode,
    pub timestamp: String,
    pub raw_responses: Vec<String>,
    pub samples: Vec<ExposureCategory>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discarded: Vec<DiscardedResponse>,
}

impl AnnotationRecord {
    pub fn from_run(run: &AnnotationRun, timestamp: &str) -> Self {
        Self {
            model_id: run.model_id.clone(),
            code: run.occupation_code.clone(),
            timestamp: timestamp.to_owned(),
            raw_responses: run.raw_responses.clone(),
            samples: run.samples.clone(),
            discarded: run.discarded.clone(),
        }
    }

    pub fn into_run(self) -> AnnotationRun {
        AnnotationRun {
            model_id: self.model_id,
            occupation_code: self.code,
            samples: self.samples,
            raw_responses: self.raw_responses,
            discarded: self.discarded,
        }
    }

    /// One JSON object followed by `\n`.
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("record serializes");
        s.push('\n');
        s
    }
}

/// Appends records to a JSON-lines store, creating it if needed.
pub fn append_records(path: &Path, records: &[AnnotationRecord]) -> Result<(), AnnotateError> {
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| AnnotateError::Store {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    let mut buf = String::new();
    for r in records {
        buf.push_str(&r.to_line());
    }
    f.write_all(buf.as_bytes()).map_err(|e| AnnotateError::Store {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn read_records(path: &Path) -> Result<Vec<AnnotationRecord>, AnnotateError> {
    let store_err = |message: String| AnnotateError::Store {
        path: path.display().to_string(),
        message,
    };
    let f = std::fs::File::open(path).map_err(|e| store_err(e.to_string()))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| store_err(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AnnotationRecord =
            serde_json::from_str(&line).map_err(|e| store_err(format!("line {}: {e}", i + 1)))?;
        if rec.samples.len() != rec.raw_responses.len() {
            return Err(store_err(format!(
                "line {}: {} samples but {} raw responses",
                i + 1,
                rec.samples.len(),
                rec.raw_responses.len()
            )));
        }
        out.push(rec);
    }
    Ok(out)
}
