//! Shape bookkeeping for the four-stage residual U-Net: channels and spatial
//! dims per stage, with no learnable computation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Dims;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageSpec {
    pub features: usize,
    /// Downsampling factor on the encoder, upsampling factor on the decoder.
    pub stride: [usize; 3],
    pub blocks: usize,
}

impl StageSpec {
    pub fn new(features: usize, stride: usize, blocks: usize) -> Self {
        Self { features, stride: [stride; 3], blocks }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if self.features == 0 {
            return Err(shape_err(name, "features must be positive"));
        }
        if self.stride.iter().any(|s| !matches!(s, 1 | 2)) {
            return Err(shape_err(name, format!("stride {:?} has a component outside {{1, 2}}", self.stride)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchSpec {
    pub input_channels: usize,
    pub encoder: Vec<StageSpec>,
    pub decoder: Vec<StageSpec>,
    pub output_channels: usize,
    /// Descriptive only; not used by shape inference.
    #[serde(default = "default_kernel")]
    pub kernel_size: usize,
    #[serde(default = "default_norm")]
    pub normalization: String,
    #[serde(default = "default_act")]
    pub activation: String,
}

fn default_kernel() -> usize {
    3
}
fn default_norm() -> String {
    "instance".into()
}
fn default_act() -> String {
    "leaky_relu".into()
}

impl Default for ArchSpec {
    fn default() -> Self {
        Self {
            input_channels: 4,
            encoder: vec![
                StageSpec::new(32, 1, 1),
                StageSpec::new(64, 2, 3),
                StageSpec::new(128, 2, 4),
                StageSpec::new(256, 2, 4),
            ],
            decoder: vec![StageSpec::new(128, 2, 1), StageSpec::new(64, 2, 1), StageSpec::new(32, 2, 1)],
            output_channels: 1,
            kernel_size: default_kernel(),
            normalization: default_norm(),
            activation: default_act(),
        }
    }
}

/// One step of the shape algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Down { features: usize, stride: [usize; 3] },
    Up { features: usize, scale: [usize; 3] },
    Head { channels: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageShape {
    pub stage: String,
    pub channels: usize,
    pub dims: Dims,
}

impl StageShape {
    pub fn describe(&self) -> String {
        describe(self.channels, self.dims)
    }
}

fn describe(channels: usize, d: Dims) -> String {
    if d[0] == d[1] && d[1] == d[2] {
        format!("{channels}x{}^3", d[0])
    } else {
        format!("{channels}x{}x{}x{}", d[0], d[1], d[2])
    }
}

fn shape_err(stage: &str, reason: impl Into<String>) -> Error {
    Error::Shape { stage: stage.to_string(), reason: reason.into() }
}

impl ArchSpec {
    /// Stage names and operations in execution order. Decoder stages are
    /// numbered downward to sit next to the encoder stage they mirror.
    pub fn ops(&self) -> Vec<(String, Op)> {
        let mut ops = Vec::new();
        for (i, s) in self.encoder.iter().enumerate() {
            ops.push((format!("encoder{}", i + 1), Op::Down { features: s.features, stride: s.stride }));
        }
        let n = self.decoder.len();
        for (i, s) in self.decoder.iter().enumerate() {
            ops.push((format!("decoder{}", n - i), Op::Up { features: s.features, scale: s.stride }));
        }
        ops.push(("output".into(), Op::Head { channels: self.output_channels }));
        ops
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_channels == 0 || self.output_channels == 0 {
            return Err(shape_err("input", "channel counts must be positive"));
        }
        for (name, s) in self.ops().iter().map(|(n, _)| n.clone()).zip(self.encoder.iter().chain(&self.decoder)) {
            s.validate(&name)?;
        }
        Ok(())
    }
}

/// Apply `ops` to an input of spatial extent `dims`, returning the shape
/// after every op. Every op sets its own channel count.
pub fn apply_ops(ops: &[(String, Op)], dims: Dims) -> Result<Vec<StageShape>> {
    let mut c;
    let mut d = dims;
    let mut out = Vec::with_capacity(ops.len());
    for (name, op) in ops {
        match *op {
            Op::Down { features, stride } => {
                for a in 0..3 {
                    if stride[a] == 0 || !d[a].is_multiple_of(stride[a]) {
                        return Err(shape_err(
                            name,
                            format!("axis {a} extent {} not divisible by stride {}", d[a], stride[a]),
                        ));
                    }
                    d[a] /= stride[a];
                }
                c = features;
            }
            Op::Up { features, scale } => {
                for a in 0..3 {
                    d[a] *= scale[a];
                }
                c = features;
            }
            Op::Head { channels } => c = channels,
        }
        out.push(StageShape { stage: name.clone(), channels: c, dims: d });
    }
    Ok(out)
}

/// Output shape of every stage for an input of `input_dims`, led by the
/// input itself.
pub fn infer_shapes(arch: &ArchSpec, input_dims: Dims) -> Result<Vec<StageShape>> {
    arch.validate()?;
    if input_dims.contains(&0) {
        return Err(shape_err("input", "zero-sized input"));
    }
    let mut shapes = vec![StageShape { stage: "input".into(), channels: arch.input_channels, dims: input_dims }];
    shapes.extend(apply_ops(&arch.ops(), input_dims)?);
    Ok(shapes)
}

/// Reference table for the default architecture at 96^3: (stage, channels,
/// cubic extent).
pub const REFERENCE_TABLE: [(&str, usize, usize); 9] = [
    ("input", 4, 96),
    ("encoder1", 32, 96),
    ("encoder2", 64, 48),
    ("encoder3", 128, 24),
    ("encoder4", 256, 12),
    ("decoder3", 128, 24),
    ("decoder2", 64, 48),
    ("decoder1", 32, 96),
    ("output", 1, 96),
];

pub const REFERENCE_INPUT: Dims = [96, 96, 96];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub stage: String,
    pub expected: String,
    pub actual: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchReport {
    pub rows: Vec<ReportRow>,
    pub invariants: Vec<InvariantCheck>,
    pub error: Option<String>,
}

impl ArchReport {
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.rows.iter().all(|r| r.pass) && self.invariants.iter().all(|c| c.pass)
    }

    pub fn failing_rows(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:<12} {:<12} result", "stage", "expected", "actual");
        for r in &self.rows {
            let _ = writeln!(s, "{:<10} {:<12} {:<12} {}", r.stage, r.expected, r.actual, pass_str(r.pass));
        }
        for c in &self.invariants {
            let _ = writeln!(s, "invariant {:<20} {} ({})", c.name, pass_str(c.pass), c.detail);
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        s
    }
}

fn pass_str(p: bool) -> &'static str {
    if p {
        "PASS"
    } else {
        "FAIL"
    }
}

/// Compare `arch` at 96^3 against the reference table and check the
/// mirror and total-stride invariants.
pub fn validate_arch(arch: &ArchSpec) -> ArchReport {
    let shapes = infer_shapes(arch, REFERENCE_INPUT);
    let error = shapes.as_ref().err().map(|e| e.to_string());
    let shapes = shapes.unwrap_or_default();

    let mut rows: Vec<ReportRow> = REFERENCE_TABLE
        .iter()
        .map(|&(stage, c, e)| {
            let actual = shapes.iter().find(|s| s.stage == stage);
            let expected = describe(c, [e; 3]);
            let actual_s = actual.map(StageShape::describe).unwrap_or_else(|| "-".into());
            ReportRow { stage: stage.into(), pass: actual_s == expected, expected, actual: actual_s }
        })
        .collect();
    for s in &shapes {
        if !REFERENCE_TABLE.iter().any(|&(n, _, _)| n == s.stage) {
            rows.push(ReportRow { stage: s.stage.clone(), expected: "-".into(), actual: s.describe(), pass: false });
        }
    }

    let n = arch.encoder.len();
    let mirrored = arch.decoder.len() + 1 == n
        && arch.decoder.iter().enumerate().all(|(i, d)| d.features == arch.encoder[n - 2 - i].features);
    let dec: Vec<usize> = arch.decoder.iter().map(|d| d.features).collect();
    let enc: Vec<usize> = arch.encoder.iter().rev().skip(1).map(|e| e.features).collect();
    let mut invariants = vec![InvariantCheck {
        name: "decoder_mirrors_encoder".into(),
        pass: mirrored,
        detail: format!("decoder {dec:?} vs encoder {enc:?}"),
    }];
    for a in 0..3 {
        let down: usize = arch.encoder.iter().map(|s| s.stride[a]).product();
        let up: usize = arch.decoder.iter().map(|s| s.stride[a]).product();
        invariants.push(InvariantCheck {
            name: format!("total_stride_axis{a}"),
            pass: down == 8 && up == 8,
            detail: format!("down {down}, up {up}, expected 8"),
        });
    }
    ArchReport { rows, invariants, error }
}

pub fn validate_default() -> ArchReport {
    validate_arch(&ArchSpec::default())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_matches_reference() {
        let shapes = infer_shapes(&ArchSpec::default(), [96; 3]).unwrap();
        let got: Vec<(String, usize, Dims)> = shapes.into_iter().map(|s| (s.stage, s.channels, s.dims)).collect();
        let want: Vec<(String, usize, Dims)> =
            REFERENCE_TABLE.iter().map(|&(n, c, e)| (n.to_string(), c, [e; 3])).collect();
        assert_eq!(got, want);
        let r = validate_default();
        assert!(r.passed(), "{}", r.render());
    }

    #[test]
    fn bottleneck_at_64() {
        let shapes = infer_shapes(&ArchSpec::default(), [64; 3]).unwrap();
        let b = shapes.iter().find(|s| s.stage == "encoder4").unwrap();
        assert_eq!((b.channels, b.dims), (256, [8; 3]));
        assert_eq!(shapes.last().unwrap().dims, [64; 3]);
    }

    #[test]
    fn indivisible_input_names_stage() {
        // 50 -> 50 -> 25, then 25 / 2 fails.
        match infer_shapes(&ArchSpec::default(), [50; 3]) {
            Err(Error::Shape { stage, .. }) => assert_eq!(stage, "encoder3"),
            other => panic!("expected shape error, got {other:?}"),
        }
    }

    #[test]
    fn perturbations_are_caught() {
        let mut a = ArchSpec::default();
        a.encoder[1].features = 65;
        let r = validate_arch(&a);
        let bad = r.failing_rows();
        assert_eq!(bad.len(), 1);
        assert_eq!(bad[0].stage, "encoder2");

        let mut a = ArchSpec::default();
        a.decoder[2].features = 16;
        let r = validate_arch(&a);
        assert!(!r.passed());
        assert!(!r.invariants.iter().find(|c| c.name == "decoder_mirrors_encoder").unwrap().pass);
    }

    #[test]
    fn bad_stride_rejected() {
        let mut a = ArchSpec::default();
        a.encoder[2].stride = [3, 2, 2];
        assert!(matches!(infer_shapes(&a, [96; 3]), Err(Error::Shape { .. })));
    }

    #[test]
    fn json_round_trip() {
        let a = ArchSpec::default();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(serde_json::from_str::<ArchSpec>(&s).unwrap(), a);
        assert!(serde_json::from_str::<ArchSpec>(r#"{"input_channels":4}"#).is_err());
    }

    fn op_strategy() -> impl Strategy<Value = Op> {
        prop_oneof![
            (1usize..300, prop::array::uniform3(1usize..=2)).prop_map(|(features, stride)| Op::Down { features, stride }),
            (1usize..300, prop::array::uniform3(1usize..=2)).prop_map(|(features, scale)| Op::Up { features, scale }),
            (1usize..5).prop_map(|channels| Op::Head { channels }),
        ]
    }

    proptest! {
        #[test]
        fn composition_is_associative(
            ops in prop::collection::vec(op_strategy(), 1..8),
            k in 0usize..8,
            dims in prop::array::uniform3(1usize..5),
        ) {
            let ops: Vec<(String, Op)> = ops.into_iter().enumerate().map(|(i, o)| (format!("s{i}"), o)).collect();
            let k = k.min(ops.len());
            let dims = dims.map(|d| d * 16);
            let whole = apply_ops(&ops, dims);
            let first = apply_ops(&ops[..k], dims);
            let split = first.and_then(|mut a| {
                let d = a.last().map(|s| s.dims).unwrap_or(dims);
                a.extend(apply_ops(&ops[k..], d)?);
                Ok(a)
            });
            match (whole, split) {
                (Ok(w), Ok(s)) => prop_assert_eq!(w, s),
                (Err(a), Err(b)) => prop_assert_eq!(a.to_string(), b.to_string()),
                (w, s) => prop_assert!(false, "{:?} vs {:?}", w, s),
            }
        }
    }
}
