//! Synthetic report corpus with ground truth.
//!
//! The generator picks every finding first, records it in a ground-truth
//! sidecar, and only then renders narrative text from templates. Truth is
//! therefore known independently of any extraction path and covers exactly
//! the default-schema fields that carry extraction rules.

pub mod pdf;

use std::collections::BTreeMap;

use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::{RngExt, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthStatus {
    Present,
    Missing,
    Ambiguous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthValue {
    Number(f64),
    Flag(bool),
    Token(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub status: TruthStatus,
    pub value: Option<TruthValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticReport {
    pub filename: String,
    pub text: String,
    pub truth: BTreeMap<String, TruthEntry>,
}

impl SyntheticReport {
    /// Renders the report as a PDF, wrapping lines and paginating.
    pub fn to_pdf(&self, lines_per_page: usize) -> Vec<u8> {
        let pages = paginate(&self.text, lines_per_page);
        let refs: Vec<&str> = pages.iter().map(String::as_str).collect();
        pdf::text_pdf(&refs)
    }
}

/// Splits text into pages of at most `lines_per_page` lines. Each page keeps
/// its trailing newline except the last, so concatenating the pages gives
/// back the input.
pub fn paginate(text: &str, lines_per_page: usize) -> Vec<String> {
    let lines: Vec<&str> = text.split('\n').collect();
    lines
        .chunks(lines_per_page.max(1))
        .enumerate()
        .map(|(i, chunk)| {
            let mut page = chunk.join("\n");
            if (i + 1) * lines_per_page.max(1) < lines.len() {
                page.push('\n');
            }
            page
        })
        .collect()
}

/// Field ids the generator emits truth for.
pub fn covered_fields() -> Vec<String> {
    let mut ids: Vec<String> = [
        "endometriosis_type",
        "right_usl_nodules",
        "left_usl_nodules",
        "pod_obliteration",
        "bowel_die",
        "uterus_position",
        "uterus_volume_ml",
        "endometrium_thickness_mm",
        "cervix_length_mm",
        "free_fluid_depth_mm",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for side in ["right", "left"] {
        ids.push(format!("{side}_ovary_visualised"));
        ids.push(format!("{side}_ovary_volume_ml"));
    }
    for prefix in [
        "uterus",
        "right_ovary",
        "left_ovary",
        "right_ovary_endometrioma_1",
        "left_ovary_endometrioma_1",
        "right_usl_nodule_1",
        "left_usl_nodule_1",
        "rectosigmoid_nodule_1",
    ] {
        for dim in ["length", "width", "height"] {
            ids.push(format!("{prefix}_{dim}_mm"));
        }
    }
    ids.sort();
    ids
}

struct Builder {
    rng: StdRng,
    truth: BTreeMap<String, TruthEntry>,
    paragraphs: Vec<Vec<String>>,
}

impl Builder {
    fn set(&mut self, field: &str, status: TruthStatus, value: Option<TruthValue>) {
        self.truth.insert(field.to_string(), TruthEntry { status, value });
    }

    fn present(&mut self, field: &str, value: TruthValue) {
        self.set(field, TruthStatus::Present, Some(value));
    }

    fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p)
    }

    fn pick<'a>(&mut self, options: &[&'a str]) -> &'a str {
        options.choose(&mut self.rng).copied().expect("non-empty")
    }

    fn say(&mut self, sentence: String) {
        self.paragraphs.last_mut().expect("paragraph open").push(sentence);
    }

    /// Three integer millimetre dimensions, rendered in mm or cm.
    fn dims(&mut self, field_prefix: &str, lo: [u32; 3], hi: [u32; 3], allow_cm: bool) -> String {
        let values: Vec<u32> = (0..3).map(|i| self.rng.random_range(lo[i]..=hi[i])).collect();
        for (dim, v) in ["length", "width", "height"].iter().zip(&values) {
            self.present(&format!("{field_prefix}_{dim}_mm"), TruthValue::Number(f64::from(*v)));
        }
        let sep = if self.chance(0.15) { " × " } else { " x " };
        if allow_cm && self.chance(0.3) {
            let cm: Vec<String> = values.iter().map(|v| format!("{}.{}", v / 10, v % 10)).collect();
            format!("{} cm", cm.join(sep))
        } else {
            let mm: Vec<String> = values.iter().map(u32::to_string).collect();
            format!("{} mm", mm.join(sep))
        }
    }

    fn volume(&mut self, field: &str, lo_tenths: u32, hi_tenths: u32) -> String {
        let tenths = self.rng.random_range(lo_tenths..=hi_tenths);
        self.present(field, TruthValue::Number(f64::from(tenths) / 10.0));
        let unit = self.pick(&["mL", "ml", "cc"]);
        format!("{}.{} {unit}", tenths / 10, tenths % 10)
    }

    fn token(&mut self, field: &str, token: &str) {
        self.present(field, TruthValue::Token(token.to_string()));
    }

    fn ambiguous(&mut self, field: &str) {
        self.set(field, TruthStatus::Ambiguous, None);
    }
}

/// Generates `count` reports deterministically from `seed`.
pub fn generate_corpus(seed: u64, count: usize) -> Vec<SyntheticReport> {
    (0..count)
        .map(|i| generate_report(seed.wrapping_mul(1_000_003).wrapping_add(i as u64), i))
        .collect()
}

pub fn generate_report(seed: u64, index: usize) -> SyntheticReport {
    let mut b = Builder {
        rng: StdRng::seed_from_u64(seed),
        truth: covered_fields()
            .into_iter()
            .map(|f| (f, TruthEntry { status: TruthStatus::Missing, value: None }))
            .collect(),
        paragraphs: vec![Vec::new()],
    };

    let history = b.pick(&[
        "Clinical history: chronic pelvic pain and dysmenorrhoea.",
        "Clinical history: subfertility, query endometriosis.",
        "Indication: deep dyspareunia.",
    ]);
    b.say(history.to_string());
    b.say("Transvaginal scan performed approx. 10 min after voiding.".into());
    b.paragraphs.push(Vec::new());

    uterus(&mut b);
    ovaries(&mut b);
    b.paragraphs.push(Vec::new());
    let usl_positive = usl(&mut b);
    pod(&mut b);
    let bowel_positive = bowel(&mut b);
    free_fluid(&mut b);
    b.say("The bladder is unremarkable.".into());
    b.paragraphs.push(Vec::new());
    let endometrioma = ["right", "left"].iter().any(|s| {
        b.truth[&format!("{s}_ovary_endometrioma_1_length_mm")].status == TruthStatus::Present
    });
    impression(&mut b, usl_positive || bowel_positive, endometrioma);
    if b.chance(0.3) {
        b.say("Report reviewed by Dr. Lee.".into());
    }

    let text = render(&mut b);
    SyntheticReport {
        filename: format!("report_{index:04}.txt"),
        text,
        truth: b.truth,
    }
}

fn render(b: &mut Builder) -> String {
    let mut paragraphs = Vec::new();
    let heading = b.chance(0.5);
    if heading {
        paragraphs.push("PELVIC ULTRASOUND REPORT".to_string());
    }
    let paras = std::mem::take(&mut b.paragraphs);
    for para in paras.into_iter().filter(|p| !p.is_empty()) {
        let joined = para.join(" ");
        paragraphs.push(wrap(&joined, 78));
    }
    paragraphs.join("\n\n")
}

fn wrap(text: &str, width: usize) -> String {
    let mut out = String::new();
    let mut line_len = 0;
    for word in text.split(' ') {
        let len = word.chars().count();
        if line_len > 0 && line_len + 1 + len > width {
            out.push('\n');
            line_len = 0;
        } else if line_len > 0 {
            out.push(' ');
            line_len += 1;
        }
        out.push_str(word);
        line_len += len;
    }
    out
}

fn uterus(b: &mut Builder) {
    let position = b.chance(0.9).then(|| b.pick(&["anteverted", "retroverted", "axial"]));
    if let Some(p) = position {
        b.token("uterus_position", p);
    }
    if b.chance(0.9) {
        let dims = b.dims("uterus", [55, 30, 30], [95, 55, 60], true);
        let sentence = match (position, b.chance(0.5)) {
            (Some(p), true) => format!("The uterus is {p} and measures {dims}."),
            (Some(p), false) => format!("Uterus {p}, measuring {dims}."),
            (None, _) => format!("The uterus measures {dims}."),
        };
        b.say(sentence);
    } else if let Some(p) = position {
        b.say(format!("The uterus is {p}."));
    }
    if b.chance(0.5) {
        let v = b.volume("uterus_volume_ml", 300, 1500);
        b.say(format!("Uterine volume is {v}."));
    }
    if b.chance(0.8) {
        let tenths = b.rng.random_range(4..=30u32) * 5;
        b.present("endometrium_thickness_mm", TruthValue::Number(f64::from(tenths) / 10.0));
        let t = if tenths % 10 == 0 {
            format!("{}", tenths / 10)
        } else {
            format!("{}.{}", tenths / 10, tenths % 10)
        };
        let s = if b.chance(0.5) {
            format!("The endometrium measures {t} mm in thickness.")
        } else {
            format!("Endometrial thickness is {t} mm.")
        };
        b.say(s);
    }
    if b.chance(0.3) {
        let c = b.rng.random_range(25..=40u32);
        b.present("cervix_length_mm", TruthValue::Number(f64::from(c)));
        b.say(format!("The cervix measures {c} mm in length."));
    }
}

fn ovaries(b: &mut Builder) {
    for side in ["right", "left"] {
        let field = format!("{side}_ovary_visualised");
        if b.chance(0.9) {
            b.present(&field, TruthValue::Flag(true));
            let verb = b.pick(&["visualised", "seen", "identified"]);
            let dims = b.dims(&format!("{side}_ovary"), [20, 15, 15], [40, 30, 30], false);
            if b.chance(0.6) {
                let v = b.volume(&format!("{side}_ovary_volume_ml"), 30, 150);
                b.say(format!(
                    "The {side} ovary is {verb} and measures {dims} with a volume of {v}."
                ));
            } else {
                b.say(format!("The {side} ovary is {verb} and measures {dims}."));
            }
            if b.chance(0.3) {
                let e = b.dims(&format!("{side}_ovary_endometrioma_1"), [10, 8, 8], [45, 35, 35], false);
                b.say(format!("A {e} endometrioma is seen in the {side} ovary."));
            }
        } else {
            b.present(&field, TruthValue::Flag(false));
            let verb = b.pick(&["not visualised", "not seen"]);
            b.say(format!("The {side} ovary is {verb}."));
        }
    }
}

/// Returns whether either side carries a definite nodule.
fn usl(b: &mut Builder) -> bool {
    let mut outcome = Vec::new();
    for side in ["right", "left"] {
        let field = format!("{side}_usl_nodules");
        let roll: f64 = b.rng.random();
        let kind = if roll < 0.25 {
            "nodule_dims"
        } else if roll < 0.35 {
            "nodularity"
        } else if roll < 0.45 {
            "hedged"
        } else if roll < 0.75 {
            "normal"
        } else {
            "missing"
        };
        outcome.push((side, field, kind));
    }
    let both_normal = outcome.iter().all(|(_, _, k)| *k == "normal") && b.chance(0.5);
    if both_normal {
        for (_, field, _) in &outcome {
            b.token(field, "no");
        }
        b.say("Both uterosacral ligaments appear normal.".into());
        return false;
    }
    let mut positive = false;
    for (side, field, kind) in outcome {
        match kind {
            "nodule_dims" => {
                positive = true;
                b.token(&field, "yes");
                let d = b.dims(&format!("{side}_usl_nodule_1"), [4, 3, 3], [20, 12, 12], false);
                b.say(format!("A {d} nodule is noted on the {side} uterosacral ligament."));
            }
            "nodularity" => {
                positive = true;
                b.token(&field, "yes");
                b.say(format!("Nodularity of the {side} uterosacral ligament is noted."));
            }
            "hedged" => {
                b.ambiguous(&field);
                let usl = b.pick(&["uterosacral ligament", "USL"]);
                b.say(format!("A possible nodule is seen along the {side} {usl}."));
            }
            "normal" => {
                b.token(&field, "no");
                let s = if b.chance(0.5) {
                    format!("The {side} uterosacral ligament appears normal.")
                } else {
                    format!("No nodules are seen on the {side} uterosacral ligament.")
                };
                b.say(s);
            }
            _ => {}
        }
    }
    positive
}

fn pod(b: &mut Builder) {
    let roll: f64 = b.rng.random();
    if roll < 0.3 {
        b.token("pod_obliteration", "yes");
        let s = b.pick(&[
            "The pouch of Douglas is obliterated.",
            "POD obliteration is noted.",
            "The sliding sign is negative.",
            "The pouch of Douglas is partially obliterated.",
            "There is obliteration of the pouch of Douglas.",
        ]);
        b.say(s.into());
    } else if roll < 0.7 {
        b.token("pod_obliteration", "no");
        let s = b.pick(&[
            "The pouch of Douglas is not obliterated.",
            "The sliding sign is positive.",
            "The POD is clear.",
        ]);
        b.say(s.into());
    } else if roll < 0.8 {
        b.ambiguous("pod_obliteration");
        b.say("The pouch of Douglas is possibly obliterated.".into());
    }
}

fn bowel(b: &mut Builder) -> bool {
    let roll: f64 = b.rng.random();
    if roll < 0.25 {
        b.token("bowel_die", "yes");
        let d = b.dims("rectosigmoid_nodule_1", [8, 5, 5], [35, 20, 25], true);
        b.say(format!("A {d} bowel DIE nodule is seen at the rectosigmoid."));
        true
    } else if roll < 0.3 {
        b.token("bowel_die", "yes");
        b.say("A rectosigmoid deep infiltrating endometriosis nodule is present.".into());
        true
    } else if roll < 0.4 {
        b.ambiguous("bowel_die");
        b.say("A possible bowel DIE nodule is seen at the rectosigmoid.".into());
        false
    } else if roll < 0.7 {
        b.token("bowel_die", "no");
        let s = b.pick(&[
            "No bowel DIE is seen.",
            "No evidence of bowel deep infiltrating endometriosis.",
        ]);
        b.say(s.into());
        false
    } else {
        false
    }
}

fn free_fluid(b: &mut Builder) {
    let roll: f64 = b.rng.random();
    if roll < 0.2 {
        let d = b.rng.random_range(3..=20u32);
        b.present("free_fluid_depth_mm", TruthValue::Number(f64::from(d)));
        b.say(format!("A small amount of free fluid is seen, measuring {d} mm in depth."));
    } else if roll < 0.4 {
        b.say("No free fluid.".into());
    }
}

fn impression(b: &mut Builder, deep: bool, endometrioma: bool) {
    let roll: f64 = b.rng.random();
    if roll < 0.1 {
        return;
    }
    if roll < 0.2 {
        b.ambiguous("endometriosis_type");
        b.say("Findings are suggestive of possible superficial endometriosis.".into());
        return;
    }
    let (token, phrase) = match (deep, endometrioma) {
        (true, true) => ("mixed", "mixed"),
        (true, false) => ("deep_infiltrating", "deep infiltrating"),
        (false, true) => ("ovarian", "ovarian"),
        (false, false) if b.chance(0.5) => ("superficial", "superficial"),
        (false, false) => {
            b.token("endometriosis_type", "none");
            b.say("No sonographic evidence of endometriosis.".into());
            return;
        }
    };
    b.token("endometriosis_type", token);
    let lead = b.pick(&["Findings are consistent with", "Appearances are in keeping with"]);
    b.say(format!("{lead} {phrase} endometriosis."));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate_corpus(7, 5), generate_corpus(7, 5));
        assert_ne!(generate_corpus(7, 5), generate_corpus(8, 5));
    }

    #[test]
    fn covered_fields_match_default_rules() {
        let schema = crate::schema::default_schema();
        let mut with_rules: Vec<String> = schema
            .fields
            .iter()
            .filter(|f| !f.extraction_rules.is_empty())
            .map(|f| f.field_id.clone())
            .collect();
        with_rules.sort();
        assert_eq!(with_rules, covered_fields());
    }

    #[test]
    fn pagination_concatenates_back() {
        let text = "a\nb\nc\nd\ne";
        let pages = paginate(text, 2);
        assert_eq!(pages, ["a\nb\n", "c\nd\n", "e"]);
        assert_eq!(pages.concat(), text);
        assert_eq!(paginate("a\nb", 2), ["a\nb"]);
    }
}
