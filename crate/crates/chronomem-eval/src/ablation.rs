//! Component-contribution matrix: the same 15-question dialogue scripted
//! against six engine configurations, grading answer accuracy and stale-
//! memory ordering anomalies per configuration.
//!
//! The fixture interleaves three failure surfaces:
//! - five *dialogue* facts stated earlier in the session, two of which are
//!   later corrected (the superseded statements stay semantically closer to
//!   the question than their corrections — only temporal weighting ranks
//!   the correction first);
//! - three *decoyed* knowledge facts whose queries are swamped by six
//!   hash-collision decoys each (more than the knowledge quota), so the
//!   embedding leg alone cannot deliver them;
//! - seven *plain* knowledge facts any configuration can retrieve.
//!
//! Correctness is automatic: the deterministic evaluation model answers
//! only from delivered evidence, so a lost chunk is a wrong answer. An
//! ordering anomaly is counted when a superseded statement is delivered
//! *above* its correction in a turn's candidate list.

use std::path::Path;
use std::sync::Arc;

use chronomem::clock::ManualClock;
use chronomem::config::EngineConfig;
use chronomem::embed::HashingEmbedder;
use chronomem::log::TurnRecord;
use chronomem::model::EvidenceGroundedMock;
use chronomem::store::IngestMeta;
use chronomem::{Engine, EngineError, SessionMeta};

use crate::corpus::{TokenMiner, EVAL_CHARACTER_ID, EVAL_USER_ID};

/// Words every knowledge query/document in the fixture is built from; they
/// must occupy distinct embedder slots for the decoy geometry to hold.
const FIXTURE_RESERVED: [&str; 10] = [
    "user",
    EVAL_USER_ID,
    "assistant",
    EVAL_CHARACTER_ID,
    "registry",
    "retrieval",
    "tag",
    "manifest",
    "storage",
    "bay",
];

const REGISTRY_WORDS: [&str; 3] = ["registry", "retrieval", "tag"];
const DECOYS_PER_REGISTRY_FACT: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationMode {
    Full,
    NoChat,
    NoBm25,
    NoTemporal,
    PureDialogue,
    StrongPreset,
}

impl AblationMode {
    pub const ALL: [AblationMode; 6] = [
        AblationMode::Full,
        AblationMode::NoChat,
        AblationMode::NoBm25,
        AblationMode::NoTemporal,
        AblationMode::PureDialogue,
        AblationMode::StrongPreset,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            AblationMode::Full => "full",
            AblationMode::NoChat => "no_chat_retrieval",
            AblationMode::NoBm25 => "no_bm25",
            AblationMode::NoTemporal => "no_temporal",
            AblationMode::PureDialogue => "pure_dialogue",
            AblationMode::StrongPreset => "strong_protocol_preset",
        }
    }
}

/// Fixture configuration: shared defaults with a relaxed chat similarity
/// gate (the conversational paraphrases here sit below the production gate
/// on purpose, so gating stays out of the measured variables), plus the
/// mode's toggle.
pub fn ablation_config(mode: AblationMode) -> EngineConfig {
    let mut cfg = EngineConfig {
        similarity_threshold: 0.35,
        fsync: false,
        ..EngineConfig::default()
    };
    match mode {
        AblationMode::Full => {}
        AblationMode::NoChat => cfg.toggles.enable_chat_retrieval = false,
        AblationMode::NoBm25 => cfg.toggles.enable_bm25 = false,
        AblationMode::NoTemporal => cfg.toggles.enable_temporal = false,
        AblationMode::PureDialogue => cfg.toggles.pure_dialogue = true,
        AblationMode::StrongPreset => cfg.toggles.strong_protocol = true,
    }
    cfg
}

/// A superseded-fact probe: the markers identifying the stale statement and
/// its correction inside candidate texts.
#[derive(Debug, Clone, Copy)]
pub struct SupersessionPair {
    pub old_marker: &'static str,
    pub new_marker: &'static str,
}

pub const SUPERSESSION_PAIRS: [SupersessionPair; 2] = [
    SupersessionPair {
        old_marker: "level b2",
        new_marker: "level b5",
    },
    SupersessionPair {
        old_marker: "4417",
        new_marker: "9920",
    },
];

/// Counts turns where a superseded statement was delivered above its
/// correction. Both must be present in the same candidate list to count.
pub fn stale_order_anomalies(records: &[TurnRecord], pairs: &[SupersessionPair]) -> usize {
    records
        .iter()
        .map(|r| {
            pairs
                .iter()
                .filter(|p| {
                    let pos = |marker: &str| r.candidates.iter().position(|c| c.text.contains(marker));
                    matches!(
                        (pos(p.old_marker), pos(p.new_marker)),
                        (Some(old), Some(new)) if old < new
                    )
                })
                .count()
        })
        .sum()
}

/// The scripted dialogue and knowledge base.
pub struct AblationFixture {
    /// Statements and fillers played before any question, in order.
    pub setup_turns: Vec<String>,
    /// (label, text) knowledge documents, facts first, then decoys.
    pub documents: Vec<(String, String)>,
    /// (question, expected answer fragment), asked in order after setup.
    pub questions: Vec<(String, String)>,
}

/// Builds the fixture. Deterministic; coined knowledge terms are mined
/// against the embedder so the decoy geometry is exact.
pub fn build_fixture(dim: usize) -> Result<AblationFixture, EngineError> {
    let reserved: Vec<&str> = FIXTURE_RESERVED.to_vec();
    let mut miner = TokenMiner::new(dim, &reserved)?;

    let setup_turns = vec![
        "i parked the car on level b2 today".to_string(),
        "my badge pin is 4417".to_string(),
        "my sister name is tamsin".to_string(),
        "the wifi password at home is fernlock22".to_string(),
        "my dentist appointment is on march ninth".to_string(),
        "noting that the weather stayed calm".to_string(),
        "the reading group met as usual".to_string(),
        "nothing unusual happened at the office".to_string(),
        "lunch was quiet and uneventful".to_string(),
        "the evening walk went fine".to_string(),
        "correction i parked the car on level b5 today not b2".to_string(),
        "i changed my badge pin to 9920".to_string(),
    ];

    let mut questions: Vec<(String, String)> = vec![
        ("where was the car parked today".into(), "level b5".into()),
        ("what is my badge pin".into(), "9920".into()),
        ("what is my sister name".into(), "tamsin".into()),
        ("what is the wifi password at home".into(), "fernlock22".into()),
        ("when is my dentist appointment".into(), "march ninth".into()),
    ];

    let mut documents: Vec<(String, String)> = Vec::new();

    // Three decoyed registry facts.
    let mut registry_rares = Vec::new();
    for i in 0..3 {
        let rare = miner.coin(&format!("qolveth{i:02}"));
        let answer = miner.coin(&format!("vaultrow{i:02}"));
        documents.push((
            format!("registry-{i}"),
            format!("registry {rare} retrieval tag {answer}"),
        ));
        questions.push((format!("registry {rare} retrieval tag"), answer));
        registry_rares.push(rare);
    }

    // Seven plain manifest facts.
    for i in 0..7 {
        let rare = miner.coin(&format!("drossel{i:02}"));
        let answer = miner.coin(&format!("binmark{i:02}"));
        documents.push((
            format!("manifest-{i}"),
            format!("manifest {rare} storage bay {answer}"),
        ));
        questions.push((format!("manifest {rare} storage bay"), answer));
    }

    // Decoys after the facts: six per registry fact, each four mined
    // colliders (three shared registry words + the fact's rare term); a
    // 4-token decoy outscores the 5-token fact on the embedding leg while
    // sharing no words with the query.
    for (i, rare) in registry_rares.iter().enumerate() {
        for j in 0..DECOYS_PER_REGISTRY_FACT {
            let mut toks = Vec::with_capacity(REGISTRY_WORDS.len() + 1);
            for (w, word) in REGISTRY_WORDS.iter().enumerate() {
                toks.push(miner.collide(&format!("r{i}d{j}w{w}n"), word));
            }
            let rare = rare.clone();
            toks.push(miner.collide(&format!("r{i}d{j}rn"), &rare));
            documents.push((format!("registry-decoy-{i}-{j}"), toks.join(" ")));
        }
    }

    Ok(AblationFixture {
        setup_turns,
        documents,
        questions,
    })
}

/// Outcome of one configuration's run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AblationOutcome {
    pub mode: AblationMode,
    pub correct: usize,
    pub total: usize,
    pub stale_order_anomalies: usize,
}

impl AblationOutcome {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

/// Runs the fixture under one configuration inside `data_dir` (which must
/// be empty) and grades it. Also returns the question-turn records so
/// callers can audit logs or check byte-determinism.
pub fn run_ablation(
    mode: AblationMode,
    data_dir: &Path,
) -> Result<(AblationOutcome, Vec<TurnRecord>), EngineError> {
    let cfg = ablation_config(mode);
    let fixture = build_fixture(cfg.embed_dim)?;
    let clock = Arc::new(ManualClock::new(1_704_067_200)); // 2024-01-01
    let embedder = Arc::new(HashingEmbedder::new(cfg.embed_dim));
    let mut engine = Engine::new(cfg, clock.clone(), embedder, data_dir)?;

    for (label, text) in &fixture.documents {
        engine.ingest_document(
            text,
            &IngestMeta {
                source_label: label.clone(),
                ..IngestMeta::default()
            },
        )?;
    }

    let meta = SessionMeta {
        session_id: format!("ablation-{}", mode.as_str()),
        user_id: EVAL_USER_ID.to_string(),
        character_id: EVAL_CHARACTER_ID.to_string(),
        persona: "You are a meticulous archivist for one user.".to_string(),
        model_identity: "eval-mock".to_string(),
        window_enabled: true,
    };
    let mut session = engine.create_session(&meta)?;
    let client = EvidenceGroundedMock::new("eval-mock").with_answers(&fixture.questions);

    for statement in &fixture.setup_turns {
        clock.advance(3_600);
        engine.run_turn(&mut session, &client, statement)?;
    }

    let mut records = Vec::with_capacity(fixture.questions.len());
    let mut correct = 0;
    for (question, expected) in &fixture.questions {
        clock.advance(3_600);
        let record = engine.run_turn(&mut session, &client, question)?;
        if record.anomaly.is_none() && record.assistant_reply.contains(expected) {
            correct += 1;
        }
        records.push(record);
    }

    let outcome = AblationOutcome {
        mode,
        correct,
        total: fixture.questions.len(),
        stale_order_anomalies: stale_order_anomalies(&records, &SUPERSESSION_PAIRS),
    };
    Ok((outcome, records))
}

/// Runs every mode, each in its own subdirectory of `root`.
pub fn run_matrix(root: &Path) -> Result<Vec<AblationOutcome>, EngineError> {
    let mut outcomes = Vec::with_capacity(AblationMode::ALL.len());
    for mode in AblationMode::ALL {
        let dir = root.join(mode.as_str());
        let (outcome, _) = run_ablation(mode, &dir)?;
        outcomes.push(outcome);
    }
    Ok(outcomes)
}
