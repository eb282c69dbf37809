//! Probability-gated training pipeline, the validation pipeline, and audit
//! records that replay a sample byte-exactly.
//!
//! Applying a pipeline is split into planning and execution. Planning walks
//! the gates in order, each with its own stream
//! `make_rng(seed, epoch, sample_id, gate_name)`, and resolves every decision
//! and parameter into an [`AuditRecord`] without touching pixels. Execution
//! ([`replay`]) applies the recorded transforms and the final stage.
//!
//! Draw order within a gate stream: one draw for the gate itself (always
//! taken, even at probability 1). If the gate fires, a `one_of` gate takes one
//! draw to pick a member and then that member's parameter draws; an
//! `all_independent` gate takes, for each member in order, one draw for the
//! member and, if it fires, its parameter draws.

mod transform;

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use transform::{AppliedTransform, TransformRange};

use crate::error::{Error, Result};
use crate::geometric::{
    ElasticParams, GridDistortionParams, OpticalDistortionParams, ShiftScaleRotateLimits,
};
use crate::image::{
    center_crop, io::write_atomic, make_rng, normalize_imagenet, resize, Interpolation,
    NormalizedTensor, Patch, StreamKey, TENSOR_SIZE,
};
use crate::photometric::{ClaheParams, ColorJitterParams, HsvShiftLimits};

pub const DEFAULT_SEED: u64 = 42;

/// Gate names in application order.
pub const GATE_ORDER: [&str; 5] = ["geometric", "advanced_geometric", "color", "channel", "blur_noise"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateMode {
    /// One member is picked with the member probabilities as weights.
    OneOf,
    /// Every member fires on its own with its member probability.
    AllIndependent,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub name: String,
    pub probability: f64,
    pub transform: TransformRange,
}

impl Member {
    fn new(probability: f64, transform: TransformRange) -> Self {
        Self {
            name: transform.kind().to_string(),
            probability,
            transform,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateSpec {
    pub name: String,
    pub probability: f64,
    pub mode: GateMode,
    pub members: Vec<Member>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FinalStage {
    pub crop: usize,
    pub size: usize,
}

impl Default for FinalStage {
    fn default() -> Self {
        Self {
            crop: 60,
            size: TENSOR_SIZE,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub seed: u64,
    pub gates: Vec<GateSpec>,
    pub final_stage: FinalStage,
}

fn check_probability(path: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param(path, format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<()> {
        let mut last = None;
        for gate in &self.gates {
            let path = format!("gates.{}", gate.name);
            let pos = GATE_ORDER
                .iter()
                .position(|&g| g == gate.name)
                .ok_or_else(|| Error::param(&path, "unknown gate"))?;
            if last.is_some_and(|l| pos <= l) {
                return Err(Error::param(&path, "gates must be unique and in the fixed group order"));
            }
            last = Some(pos);
            check_probability(&format!("{path}.probability"), gate.probability)?;
            if gate.members.is_empty() {
                return Err(Error::param(format!("{path}.members"), "must not be empty"));
            }
            for (i, m) in gate.members.iter().enumerate() {
                let mpath = format!("{path}.members.{}", m.name);
                if gate.members[..i].iter().any(|o| o.name == m.name) {
                    return Err(Error::param(&mpath, "duplicate member"));
                }
                check_probability(&format!("{mpath}.probability"), m.probability)?;
                m.transform.validate().map_err(|e| e.under(&mpath))?;
            }
            if gate.mode == GateMode::OneOf {
                let total: f64 = gate.members.iter().map(|m| m.probability).sum();
                if (total - 1.0).abs() > 1e-9 {
                    return Err(Error::param(
                        format!("{path}.members"),
                        format!("one_of weights must sum to 1, got {total}"),
                    ));
                }
            }
        }
        if self.final_stage.crop == 0 {
            return Err(Error::param("final_stage.crop", "must be at least 1"));
        }
        if self.final_stage.size != TENSOR_SIZE {
            return Err(Error::param("final_stage.size", format!("must be {TENSOR_SIZE}")));
        }
        Ok(())
    }

    pub fn gate(&self, name: &str) -> Option<&GateSpec> {
        self.gates.iter().find(|g| g.name == name)
    }

    /// The pipeline as a JSON value.
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("pipeline spec serializes")
    }
}

fn default_gates() -> Vec<GateSpec> {
    let third = 1.0 / 3.0;
    vec![
        GateSpec {
            name: "geometric".into(),
            probability: 0.9,
            mode: GateMode::OneOf,
            members: vec![
                Member::new(third, TransformRange::D4),
                Member::new(third, TransformRange::Rotate { limit: 180.0 }),
                Member::new(third, TransformRange::Rotate90),
            ],
        },
        GateSpec {
            name: "advanced_geometric".into(),
            probability: 1.0,
            mode: GateMode::AllIndependent,
            members: vec![
                Member::new(0.8, TransformRange::ShiftScaleRotate(ShiftScaleRotateLimits::default())),
                Member::new(0.7, TransformRange::Elastic(ElasticParams::default())),
                Member::new(0.6, TransformRange::GridDistortion(GridDistortionParams::default())),
                Member::new(0.5, TransformRange::OpticalDistortion(OpticalDistortionParams::default())),
            ],
        },
        GateSpec {
            name: "color".into(),
            probability: 1.0,
            mode: GateMode::AllIndependent,
            members: vec![
                Member::new(0.8, TransformRange::ColorJitter(ColorJitterParams::default())),
                Member::new(0.8, TransformRange::HueSaturationValue(HsvShiftLimits::default())),
                Member::new(0.8, TransformRange::brightness_contrast()),
                Member::new(0.4, TransformRange::Clahe(ClaheParams::default())),
            ],
        },
        GateSpec {
            name: "channel".into(),
            probability: 0.4,
            mode: GateMode::AllIndependent,
            members: vec![
                Member::new(0.6, TransformRange::RgbShift { shift_limit: 20 }),
                Member::new(0.3, TransformRange::ChannelShuffle),
                Member::new(0.1, TransformRange::Grayscale),
            ],
        },
        GateSpec {
            name: "blur_noise".into(),
            probability: 1.0,
            mode: GateMode::AllIndependent,
            members: vec![
                Member::new(0.5, TransformRange::gaussian_blur()),
                Member::new(0.4, TransformRange::defocus()),
                Member::new(0.3, TransformRange::motion_blur()),
                Member::new(0.4, TransformRange::gauss_noise()),
                Member::new(0.3, TransformRange::iso_noise()),
                Member::new(0.2, TransformRange::multiplicative_noise()),
            ],
        },
    ]
}

fn as_probability(path: &str, v: &Value) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::param(path, "must be a number"))
}

fn as_object<'a>(path: &str, v: &'a Value) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| Error::param(path, "must be a JSON object"))
}

fn override_member(m: &mut Member, path: &str, cfg: &Value) -> Result<()> {
    let mut params = match serde_json::to_value(&m.transform).expect("transform serializes") {
        Value::Object(o) => o,
        _ => unreachable!("transforms serialize as objects"),
    };
    for (key, v) in as_object(path, cfg)? {
        let kpath = format!("{path}.{key}");
        match key.as_str() {
            "probability" => m.probability = as_probability(&kpath, v)?,
            "kind" => return Err(Error::param(kpath, "the member kind cannot be overridden")),
            _ if params.contains_key(key) => {
                params.insert(key.clone(), v.clone());
            }
            _ => return Err(Error::param(kpath, "unknown parameter")),
        }
    }
    m.transform = serde_json::from_value(Value::Object(params)).map_err(|e| Error::param(path, e.to_string()))?;
    Ok(())
}

fn override_gate(gate: &mut GateSpec, path: &str, cfg: &Value) -> Result<()> {
    for (key, v) in as_object(path, cfg)? {
        let kpath = format!("{path}.{key}");
        match key.as_str() {
            "probability" => gate.probability = as_probability(&kpath, v)?,
            "mode" => gate.mode = serde_json::from_value(v.clone()).map_err(|e| Error::param(&kpath, e.to_string()))?,
            "members" => {
                for (name, mv) in as_object(&kpath, v)? {
                    let mpath = format!("{kpath}.{name}");
                    let member = gate
                        .members
                        .iter_mut()
                        .find(|m| &m.name == name)
                        .ok_or_else(|| Error::param(&mpath, "unknown member"))?;
                    override_member(member, &mpath, mv)?;
                }
            }
            _ => return Err(Error::param(kpath, "unknown key")),
        }
    }
    Ok(())
}

/// The training pipeline with the given overrides applied to the defaults.
///
/// Overrides are a sparse JSON object:
/// `{"seed": 7, "gates": {"blur_noise": {"members": {"gauss_noise": {"std": [5, 20]}}}}}`.
/// A gate accepts `probability`, `mode` and `members`; a member accepts
/// `probability` and the parameter names of its kind. `null` or `{}` yields
/// the defaults.
pub fn build_training_pipeline(overrides: &Value) -> Result<PipelineSpec> {
    let mut spec = PipelineSpec {
        seed: DEFAULT_SEED,
        gates: default_gates(),
        final_stage: FinalStage::default(),
    };
    if !overrides.is_null() {
        for (key, v) in as_object("config", overrides)? {
            match key.as_str() {
                "seed" => {
                    spec.seed = v
                        .as_u64()
                        .ok_or_else(|| Error::param("seed", "must be a non-negative integer"))?
                }
                "gates" => {
                    for (name, gv) in as_object("gates", v)? {
                        let path = format!("gates.{name}");
                        let gate = spec
                            .gates
                            .iter_mut()
                            .find(|g| &g.name == name)
                            .ok_or_else(|| Error::param(&path, "unknown gate"))?;
                        override_gate(gate, &path, gv)?;
                    }
                }
                _ => return Err(Error::param(key.as_str(), "unknown key")),
            }
        }
    }
    spec.validate()?;
    Ok(spec)
}

/// Center crop, resize and normalization only.
pub fn build_validation_pipeline() -> PipelineSpec {
    PipelineSpec {
        seed: DEFAULT_SEED,
        gates: Vec::new(),
        final_stage: FinalStage::default(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub gate: String,
    pub stream: StreamKey,
    pub fired: bool,
    /// Members that fired (the chosen one for a `one_of` gate), in order.
    pub members: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_id: Option<String>,
    pub seed: u64,
    pub epoch: u64,
    pub sample_id: u64,
    pub gates: Vec<GateDecision>,
    pub transforms: Vec<AppliedTransform>,
    pub final_stage: FinalStage,
}

impl AuditRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("audit record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::Format {
            path: "<audit>".into(),
            message: e.to_string(),
        })
    }
}

/// Resolves every gate decision and transform parameter for one sample.
pub fn plan(spec: &PipelineSpec, epoch: u64, sample_id: u64) -> AuditRecord {
    let mut gates = Vec::with_capacity(spec.gates.len());
    let mut transforms = Vec::new();
    for gate in &spec.gates {
        let mut rng = make_rng(spec.seed, epoch, sample_id, &gate.name);
        let key = rng.key().clone();
        let fired = rng.chance(gate.probability);
        let mut members = Vec::new();
        if fired {
            let mut take = |m: &Member, rng: &mut crate::image::RngStream| {
                let sub = key.with_tag(format!("{}/{}", gate.name, m.name));
                transforms.push(m.transform.sample(rng, sub));
                members.push(m.name.clone());
            };
            match gate.mode {
                GateMode::OneOf => {
                    let u = rng.uniform();
                    let mut acc = 0.0;
                    let chosen = gate
                        .members
                        .iter()
                        .find(|m| {
                            acc += m.probability;
                            u < acc
                        })
                        .or_else(|| gate.members.iter().rev().find(|m| m.probability > 0.0))
                        .unwrap_or(&gate.members[0]);
                    take(chosen, &mut rng);
                }
                GateMode::AllIndependent => {
                    for m in &gate.members {
                        if rng.chance(m.probability) {
                            take(m, &mut rng);
                        }
                    }
                }
            }
        }
        gates.push(GateDecision {
            gate: gate.name.clone(),
            stream: key,
            fired,
            members,
        });
    }
    AuditRecord {
        record_id: None,
        seed: spec.seed,
        epoch,
        sample_id,
        gates,
        transforms,
        final_stage: spec.final_stage,
    }
}

/// Applies the recorded transforms in order, without the final stage.
pub fn augment(audit: &AuditRecord, src: &Patch) -> Result<Patch> {
    let mut out = src.clone();
    for (i, t) in audit.transforms.iter().enumerate() {
        out = t.apply(&out).map_err(|e| e.under(&format!("transforms.{i}")))?;
    }
    Ok(out)
}

/// Center crop then bilinear resize to the tensor size.
pub fn finalize(stage: &FinalStage, src: &Patch) -> Result<Patch> {
    let cropped = center_crop(src, stage.crop)?;
    resize(&cropped, stage.size, stage.size, Interpolation::Bilinear)
}

fn check_extent(stage: &FinalStage, src: &Patch) -> Result<()> {
    if src.width() < stage.crop || src.height() < stage.crop {
        return Err(Error::Shape(format!(
            "patch {}x{} is smaller than the {} px crop",
            src.width(),
            src.height(),
            stage.crop
        )));
    }
    Ok(())
}

/// Replays an audit record: the recorded transforms, then crop, resize and
/// normalization.
pub fn replay(audit: &AuditRecord, src: &Patch) -> Result<NormalizedTensor> {
    normalize_imagenet(&replay_preview(audit, src)?)
}

/// The final-stage patch before normalization.
pub fn replay_preview(audit: &AuditRecord, src: &Patch) -> Result<Patch> {
    check_extent(&audit.final_stage, src)?;
    finalize(&audit.final_stage, &augment(audit, src)?)
}

/// A pure function of `(spec, src, epoch, sample_id)`.
pub fn apply(spec: &PipelineSpec, src: &Patch, epoch: u64, sample_id: u64) -> Result<(NormalizedTensor, AuditRecord)> {
    check_extent(&spec.final_stage, src)?;
    let audit = plan(spec, epoch, sample_id);
    Ok((replay(&audit, src)?, audit))
}

pub fn write_audit_jsonl(path: &Path, records: &[AuditRecord]) -> Result<()> {
    let mut out = String::new();
    for r in records {
        out.push_str(&r.to_json_line());
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_audit_jsonl(path: &Path) -> Result<Vec<AuditRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                message: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}
