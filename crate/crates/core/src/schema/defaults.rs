//! The shipped default schema.
//!
//! Five interpretive fields come first, in fixed order. The quantitative
//! fields are generated from a naming convention:
//!
//! * `{structure}_{dimension}_mm` for the three orthogonal lengths
//!   (`length`, `width`, `height`) and `{structure}_volume_ml` for volume;
//! * structures are the uterus, each ovary, up to three endometriomas per
//!   ovary (`{side}_ovary_endometrioma_{n}`) and up to two nodules per deep
//!   endometriosis site (`{site}_nodule_{n}`);
//! * a handful of single measurements (`endometrium_thickness_mm`,
//!   `cervix_length_mm`, `free_fluid_depth_mm`), the uterine position, ovary
//!   visualisation flags and a free-text `additional_findings` column.
//!
//! Extraction rules cover the measurements a typical narrative report states
//! explicitly. Fields without rules are always reported as missing by the
//! rule-based backend.

use std::collections::BTreeMap;

use super::{
    CanonicalUnit, ExtractionRule, FieldSpecDocument, Schema, SchemaDocument, TrustClass,
    ValueType,
};

pub const INTERPRETIVE_FIELD_IDS: [&str; 5] = [
    "endometriosis_type",
    "right_usl_nodules",
    "left_usl_nodules",
    "pod_obliteration",
    "bowel_die",
];

pub const DEFAULT_SCHEMA_ID: &str = "endometriosis_tvus";
pub const DEFAULT_SCHEMA_VERSION: &str = "1.0.0";

const NUM: &str = r"(\d+(?:\.\d+)?)";
const BY: &str = r"\s*[x×]\s*";
const LEN_UNIT: &str = r"(mm|cm)\b";
const VOL_UNIT: &str = r"(ml|cc|cm3|cm³)";
const HEDGE: &str = "(?:possible |probable |suspected )?";

pub const DIMENSIONS: [&str; 3] = ["length", "width", "height"];

pub const DIE_SITES: [&str; 15] = [
    "right_usl",
    "left_usl",
    "rectosigmoid",
    "rectum",
    "sigmoid",
    "bladder",
    "right_ureter",
    "left_ureter",
    "vaginal_wall",
    "rectovaginal_septum",
    "torus_uterinus",
    "right_parametrium",
    "left_parametrium",
    "appendix",
    "ileocaecal",
];

const YES_NO: [&str; 3] = ["yes", "no", "not_reported"];

fn rule(pattern: impl Into<String>, value: &str) -> ExtractionRule {
    ExtractionRule {
        pattern: pattern.into(),
        value: value.to_string(),
    }
}

fn humanize(id: &str) -> String {
    let words: Vec<&str> = id
        .split('_')
        .map(|w| if w == "usl" { "uterosacral ligament" } else { w })
        .collect();
    capitalise(&words.join(" "))
}

fn categorical(
    id: &str,
    label: &str,
    trust: TrustClass,
    allowed: &[&str],
    synonyms: &[(&str, &str)],
    rules: Vec<ExtractionRule>,
) -> FieldSpecDocument {
    FieldSpecDocument {
        field_id: id.to_string(),
        label: label.to_string(),
        trust_class: trust,
        value_type: ValueType::Categorical,
        canonical_unit: None,
        allowed_values: Some(allowed.iter().map(|s| s.to_string()).collect()),
        synonyms: synonyms
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        requires_review: None,
        extraction_rules: (!rules.is_empty()).then_some(rules),
    }
}

fn numeric(id: String, unit: CanonicalUnit, rules: Vec<ExtractionRule>) -> FieldSpecDocument {
    let label = format!(
        "{} ({})",
        humanize(id.trim_end_matches("_mm").trim_end_matches("_ml")),
        unit.suffix()
    );
    FieldSpecDocument {
        field_id: id,
        label,
        trust_class: TrustClass::Quantitative,
        value_type: ValueType::Numeric,
        canonical_unit: Some(unit),
        allowed_values: None,
        synonyms: BTreeMap::new(),
        requires_review: None,
        extraction_rules: (!rules.is_empty()).then_some(rules),
    }
}

/// Three dimension fields plus a volume field for one structure. The dims
/// rule must capture the three magnitudes in groups 1-3 and the unit in
/// group 4.
fn measured_structure(
    out: &mut Vec<FieldSpecDocument>,
    prefix: &str,
    dims_rule: Option<&str>,
    volume_rule: Option<&str>,
) {
    for (i, dim) in DIMENSIONS.iter().enumerate() {
        let rules = dims_rule
            .map(|pattern| vec![rule(pattern, &format!("${{{}}} ${{4}}", i + 1))])
            .unwrap_or_default();
        out.push(numeric(
            format!("{prefix}_{dim}_mm"),
            CanonicalUnit::Millimetre,
            rules,
        ));
    }
    let rules = volume_rule
        .map(|pattern| vec![rule(pattern, "${1} ${2}")])
        .unwrap_or_default();
    out.push(numeric(
        format!("{prefix}_volume_ml"),
        CanonicalUnit::Millilitre,
        rules,
    ));
}

fn measures(subject: &str) -> String {
    format!(r"(?i)\b{subject}\b.*?\bmeasur\w*\s+{NUM}{BY}{NUM}{BY}{NUM}\s*{LEN_UNIT}")
}

fn volume_of(subject: &str) -> String {
    format!(r"(?i)\b{subject}\b.*?\bvolume\b\D*?{NUM}\s*{VOL_UNIT}")
}

fn sized_then(object: &str, location: &str) -> String {
    format!(r"(?i)\b{NUM}{BY}{NUM}{BY}{NUM}\s*{LEN_UNIT}\s+{object}\b.*?\b{location}\b")
}

fn usl_field(side: &str) -> FieldSpecDocument {
    let usl = format!("{side} (?:uterosacral ligament|usl)");
    categorical(
        &format!("{side}_usl_nodules"),
        &format!("{} Uterosacral Ligament Nodules", capitalise(side)),
        TrustClass::Interpretive,
        &YES_NO,
        &[
            ("nodule", "yes"),
            ("nodules", "yes"),
            ("nodularity", "yes"),
            ("thickened", "yes"),
            ("normal", "no"),
            ("no nodules", "no"),
            ("not reported", "not_reported"),
        ],
        vec![
            rule(format!(r"(?i)\bno (?:nodules?|nodularity)\b.*?\b{usl}\b"), "no"),
            rule(
                format!(r"(?i)\b{usl}\b.*?\b(?:appears? normal|is normal|is unremarkable|is not thickened)"),
                "no",
            ),
            rule(
                r"(?i)\bboth uterosacral ligaments\b.*?\b(?:appear normal|are normal|are unremarkable)",
                "no",
            ),
            rule(
                format!(r"(?i)\b({HEDGE}(?:nodule|nodularity))\b.*?\b{usl}\b"),
                "${1}",
            ),
        ],
    )
}

fn capitalise(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn interpretive_fields() -> Vec<FieldSpecDocument> {
    let pod = r"(?:pouch of douglas|douglas pouch|pod)";
    vec![
        categorical(
            "endometriosis_type",
            "Endometriosis Type",
            TrustClass::Interpretive,
            &["none", "superficial", "ovarian", "deep_infiltrating", "mixed", "indeterminate"],
            &[
                ("deep infiltrating", "deep_infiltrating"),
                ("deep infiltrating endometriosis", "deep_infiltrating"),
                ("deep endometriosis", "deep_infiltrating"),
                ("die", "deep_infiltrating"),
                ("superficial endometriosis", "superficial"),
                ("ovarian endometriosis", "ovarian"),
                ("endometrioma", "ovarian"),
                ("mixed type", "mixed"),
                ("no endometriosis", "none"),
                ("normal", "none"),
                ("uncertain", "indeterminate"),
            ],
            vec![
                rule(r"(?i)\bno (?:sonographic )?evidence of endometriosis\b", "none"),
                rule(
                    format!(
                        r"(?i)\b(?:consistent with|in keeping with|suggestive of)\s+({HEDGE}(?:deep infiltrating|superficial|ovarian|mixed))\s+endometriosis\b"
                    ),
                    "${1}",
                ),
            ],
        ),
        usl_field("right"),
        usl_field("left"),
        categorical(
            "pod_obliteration",
            "Pouch of Douglas Obliteration",
            TrustClass::Interpretive,
            &YES_NO,
            &[
                ("obliterated", "yes"),
                ("partially obliterated", "yes"),
                ("pod obliteration", "yes"),
                ("obliterated pouch of douglas", "yes"),
                ("obliteration of the pouch of douglas", "yes"),
                ("negative sliding sign", "yes"),
                ("positive sliding sign", "no"),
                ("not obliterated", "no"),
                ("clear", "no"),
                ("patent", "no"),
                ("not reported", "not_reported"),
            ],
            vec![
                rule(
                    format!(r"(?i)\b{pod}\s+(?:is\s+)?(?:not obliterated|clear|patent|preserved)\b"),
                    "no",
                ),
                rule(
                    format!(r"(?i)\b{pod}\s+(?:is\s+)?((?:possibly |probably |partially )?obliterated)\b"),
                    "${1}",
                ),
                rule(
                    r"(?i)\b(pod obliteration|obliterated pouch of douglas|obliteration of the pouch of douglas)\b",
                    "${1}",
                ),
                rule(r"(?i)\bsliding sign\b.*?\b(negative|positive)\b", "${1} sliding sign"),
            ],
        ),
        categorical(
            "bowel_die",
            "Bowel Deep Infiltrating Endometriosis",
            TrustClass::Interpretive,
            &YES_NO,
            &[
                ("nodule", "yes"),
                ("present", "yes"),
                ("absent", "no"),
                ("not reported", "not_reported"),
            ],
            vec![
                rule(
                    r"(?i)\bno (?:evidence of )?bowel (?:die|deep infiltrating endometriosis|endometriosis)\b",
                    "no",
                ),
                rule(
                    format!(
                        r"(?i)\b({HEDGE})(?:bowel|rectosigmoid|rectal) (?:die|deep infiltrating endometriosis) nodule\b"
                    ),
                    "${1}nodule",
                ),
            ],
        ),
    ]
}

fn visualised_field(side: &str) -> FieldSpecDocument {
    FieldSpecDocument {
        field_id: format!("{side}_ovary_visualised"),
        label: format!("{} ovary visualised", capitalise(side)),
        trust_class: TrustClass::Quantitative,
        value_type: ValueType::Boolean,
        canonical_unit: None,
        allowed_values: None,
        synonyms: [
            ("visualised", "yes"),
            ("visualized", "yes"),
            ("seen", "yes"),
            ("identified", "yes"),
            ("not visualised", "no"),
            ("not visualized", "no"),
            ("not seen", "no"),
            ("not identified", "no"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect(),
        requires_review: None,
        extraction_rules: Some(vec![rule(
            format!(
                r"(?i)\b{side} ovary\b(?:\s+is)?\s+((?:not\s+)?(?:visuali[sz]ed|seen|identified))\b"
            ),
            "${1}",
        )]),
    }
}

fn quantitative_fields() -> Vec<FieldSpecDocument> {
    let mut out = Vec::new();
    out.push(categorical(
        "uterus_position",
        "Uterus position",
        TrustClass::Quantitative,
        &["anteverted", "retroverted", "axial"],
        &[("av", "anteverted"), ("rv", "retroverted")],
        vec![rule(
            r"(?i)\buterus\b(?:\s+is)?\s+(anteverted|retroverted|axial)\b",
            "${1}",
        )],
    ));
    measured_structure(
        &mut out,
        "uterus",
        Some(&measures("uterus")),
        Some(&volume_of("uter(?:us|ine)")),
    );
    out.push(numeric(
        "endometrium_thickness_mm".into(),
        CanonicalUnit::Millimetre,
        vec![rule(
            format!(r"(?i)\bendometri(?:um|al)\b.*?{NUM}\s*{LEN_UNIT}"),
            "${1} ${2}",
        )],
    ));
    out.push(numeric(
        "cervix_length_mm".into(),
        CanonicalUnit::Millimetre,
        vec![rule(
            format!(r"(?i)\bcervi(?:x|cal)\b.*?{NUM}\s*{LEN_UNIT}"),
            "${1} ${2}",
        )],
    ));
    for side in ["right", "left"] {
        out.push(visualised_field(side));
        let subject = format!("{side} ovary");
        measured_structure(
            &mut out,
            &format!("{side}_ovary"),
            Some(&measures(&subject)),
            Some(&volume_of(&subject)),
        );
        for n in 1..=3 {
            let dims = (n == 1).then(|| sized_then("endometrioma", &subject));
            measured_structure(
                &mut out,
                &format!("{side}_ovary_endometrioma_{n}"),
                dims.as_deref(),
                None,
            );
        }
    }
    for site in DIE_SITES {
        for n in 1..=2 {
            let dims = match (site, n) {
                ("right_usl", 1) => Some(sized_then("nodule", "right (?:uterosacral ligament|usl)")),
                ("left_usl", 1) => Some(sized_then("nodule", "left (?:uterosacral ligament|usl)")),
                ("rectosigmoid", 1) => Some(sized_then(
                    "(?:bowel\\s+)?(?:die\\s+|deep infiltrating endometriosis\\s+)?nodule",
                    "rectosigmoid",
                )),
                _ => None,
            };
            measured_structure(&mut out, &format!("{site}_nodule_{n}"), dims.as_deref(), None);
        }
    }
    out.push(numeric(
        "free_fluid_depth_mm".into(),
        CanonicalUnit::Millimetre,
        vec![rule(
            format!(r"(?i)\bfree fluid\b.*?{NUM}\s*{LEN_UNIT}"),
            "${1} ${2}",
        )],
    ));
    out.push(FieldSpecDocument {
        field_id: "additional_findings".into(),
        label: "Additional findings".into(),
        trust_class: TrustClass::Quantitative,
        value_type: ValueType::Text,
        canonical_unit: None,
        allowed_values: None,
        synonyms: BTreeMap::new(),
        requires_review: None,
        extraction_rules: None,
    });
    out
}

fn global_synonyms() -> BTreeMap<String, String> {
    [
        ("mass", "lesion"),
        ("masses", "lesion"),
        ("lesions", "lesion"),
        ("pod obliteration", "pouch_of_douglas_obliteration"),
        ("obliterated pouch of douglas", "pouch_of_douglas_obliteration"),
        ("obliteration of the pouch of douglas", "pouch_of_douglas_obliteration"),
        ("douglas pouch obliteration", "pouch_of_douglas_obliteration"),
        ("obliterated pod", "pouch_of_douglas_obliteration"),
        ("pouch of douglas", "pouch_of_douglas"),
        ("douglas pouch", "pouch_of_douglas"),
        ("pod", "pouch_of_douglas"),
        ("cul-de-sac", "pouch_of_douglas"),
        ("rectouterine pouch", "pouch_of_douglas"),
        ("recto-uterine pouch", "pouch_of_douglas"),
        ("usl", "uterosacral_ligament"),
        ("uterosacral ligament", "uterosacral_ligament"),
        ("uterosacral ligaments", "uterosacral_ligament"),
        ("rectosigmoid junction", "rectosigmoid"),
        ("recto-sigmoid", "rectosigmoid"),
    ]
    .iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

pub fn default_schema_document() -> SchemaDocument {
    let mut fields = interpretive_fields();
    fields.extend(quantitative_fields());
    SchemaDocument {
        schema_id: DEFAULT_SCHEMA_ID.into(),
        version: DEFAULT_SCHEMA_VERSION.into(),
        synonyms: global_synonyms(),
        fields,
    }
}

/// The default schema, validated through the same path as schema files.
pub fn default_schema() -> Schema {
    let bytes = serde_json::to_vec(&default_schema_document()).expect("serialisable");
    super::load_schema(&bytes).expect("default schema is valid")
}
