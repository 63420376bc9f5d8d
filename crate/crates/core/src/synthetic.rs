//! A small deterministic corpus shaped like the twelve-group course cohort, used by
//! the `demo` command, examples and benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codebook::Code;
use crate::corpus::{GroupProfile, Homogeneity, ProblemType, Quality, Utterance, MAX_WEEK};

const PROFILES: [(&str, ProblemType, &str, Homogeneity, Quality, u32); 12] = [
    ("G1", ProblemType::SS, "Industry-mixed", Homogeneity::Hetero, Quality::Fail, 3),
    ("G2", ProblemType::DS, "Teacher-Student Mixed", Homogeneity::Hetero, Quality::Pass, 5),
    ("G3", ProblemType::SS, "Industry-mixed", Homogeneity::Hetero, Quality::Excellent, 3),
    ("G4", ProblemType::MS, "All Students", Homogeneity::Homo, Quality::Excellent, 4),
    ("G5", ProblemType::MS, "Teacher-Student Mixed", Homogeneity::Hetero, Quality::Pass, 5),
    ("G6", ProblemType::SS, "All Students", Homogeneity::Homo, Quality::Good, 7),
    ("G7", ProblemType::SS, "All Teachers", Homogeneity::Homo, Quality::Good, 3),
    ("G8", ProblemType::SS, "All Students", Homogeneity::Homo, Quality::Pass, 3),
    ("G9", ProblemType::SS, "Teacher-Student Mixed", Homogeneity::Hetero, Quality::Excellent, 6),
    ("G10", ProblemType::DS, "Industry-mixed", Homogeneity::Hetero, Quality::Good, 3),
    ("G11", ProblemType::SS, "Teacher-Student Mixed", Homogeneity::Hetero, Quality::Good, 5),
    ("G12", ProblemType::DS, "All Students", Homogeneity::Homo, Quality::Excellent, 5),
];

/// Group-weeks with no messages at all.
pub const SILENT_WEEKS: [(&str, u8); 5] = [("G4", 0), ("G7", 0), ("G8", 0), ("G8", 1), ("G8", 2)];

/// Message templates; the first word of each is a keyword unique to its code.
const TEMPLATES: [(Code, &[&str]); 10] = [
    (Code::I, &["withdrawn: message was withdrawn", "sticker [image]", "lol that meme"]),
    (Code::O1, &["created a new group, please join", "created the shared document for us"]),
    (Code::O2, &["screen sharing: how do I share the screen?", "screen recording settings are under tools"]),
    (Code::W1, &["hi everyone, nice to meet you", "hi, are you free tomorrow evening?"]),
    (Code::W2, &["link to a related paper I found", "link: here is the dataset page"]),
    (Code::W3, &["progress: I have finished my part, keep going!", "progress update, the survey is done"]),
    (Code::S1, &["suggest we try case analysis, it fits our problem", "suggest using interviews instead"]),
    (Code::S2, &["disagree, let's discuss the reasons", "disagree with the second point, why that source?"]),
    (Code::S3, &["plan: meet Wednesday to finalize the plan", "plan: Ana drafts section two, I review"]),
    (Code::C1, &["draft: here's the document we've put together", "draft merged: intro plus findings combined"]),
];

/// Keyword to code routing that recovers each template's code.
pub fn keyword_rules() -> Vec<(String, String)> {
    [
        ("withdrawn", "I"),
        ("sticker", "I"),
        ("meme", "I"),
        ("created", "O1"),
        ("screen", "O2"),
        ("hi", "W1"),
        ("link", "W2"),
        ("progress", "W3"),
        ("suggest", "S1"),
        ("disagree", "S2"),
        ("plan", "S3"),
        ("draft", "C1"),
    ]
    .into_iter()
    .map(|(k, c)| (k.to_string(), c.to_string()))
    .collect()
}

pub fn demo_profiles() -> Vec<GroupProfile> {
    PROFILES
        .iter()
        .map(|(id, pt, comp, homo, q, n)| GroupProfile {
            group_id: id.to_string(),
            problem_type: *pt,
            composition: comp.to_string(),
            homogeneity: *homo,
            quality: *q,
            n_members: *n,
        })
        .collect()
}

/// Relative code frequencies for a week, drifting from setup and greetings toward
/// sense-making and creation; stronger groups create more.
fn code_weights(week: u8, quality: Quality, problem: ProblemType) -> [f64; 10] {
    let t = week as f64 / MAX_WEEK as f64;
    let q = match quality {
        Quality::Excellent => 1.6,
        Quality::Good => 1.2,
        Quality::Pass => 0.9,
        Quality::Fail => 0.6,
    };
    let c_boost = if problem == ProblemType::SS { 1.3 } else { 1.0 };
    [
        1.5,
        3.0 * (1.0 - t) + 0.3,
        1.5,
        4.0 * (1.0 - t) + 0.8,
        2.0 + t,
        1.0 + 1.5 * t,
        1.5 + 2.0 * t * q,
        0.5 + 1.5 * t,
        1.0 + 1.5 * t,
        (0.2 + 2.5 * t) * q * c_boost,
    ]
}

fn draw_code(rng: &mut ChaCha8Rng, weights: &[f64; 10]) -> Code {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return Code::ALL[i];
        }
        x -= w;
    }
    Code::C1
}

/// Demo utterances for [`demo_profiles`]. `code_pred` equals `code_human` except for
/// a `noise` fraction of messages relabelled to another code.
pub fn demo_corpus(seed: u64, noise: f64) -> Vec<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for p in demo_profiles() {
        let mut seq = 0u64;
        for week in 0..=MAX_WEEK {
            if SILENT_WEEKS.contains(&(p.group_id.as_str(), week)) {
                continue;
            }
            let weights = code_weights(week, p.quality, p.problem_type);
            let n = p.n_members as usize * rng.random_range(3..8);
            for _ in 0..n {
                let code = draw_code(&mut rng, &weights);
                let templates = TEMPLATES[code as usize].1;
                let text = templates[rng.random_range(0..templates.len())];
                let pred = if rng.random::<f64>() < noise {
                    let shift = rng.random_range(1..Code::ALL.len());
                    Code::ALL[(code as usize + shift) % Code::ALL.len()]
                } else {
                    code
                };
                out.push(Utterance {
                    utterance_id: format!("{}-{:04}", p.group_id, seq),
                    group_id: p.group_id.clone(),
                    week,
                    seq,
                    speaker_id: format!("{}-m{}", p.group_id, rng.random_range(1..=p.n_members)),
                    text: text.to_string(),
                    code_human: Some(code),
                    code_pred: Some(pred),
                });
                seq += 1;
            }
        }
    }
    out
}
