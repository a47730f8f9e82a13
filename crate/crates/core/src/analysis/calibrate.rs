//! Search over the widths and counts the architecture leaves open, scored
//! against the published parameter and Multi-Adds totals.

use std::fmt::Write;

use super::{param_count, reference_multi_adds};
use crate::model::{presets, ModelConfig, UpLayer};

// Published totals the search is scored against.
const X4_PARAMS: f64 = 342e3;
const X4_MACS: f64 = 19.5e9;
const X3_PARAMS: f64 = 337e3;
const X3_MACS: f64 = 33.6e9;
const X2_PARAMS: f64 = 329e3;
const X2_MACS: f64 = 74.0e9;
const S_PARAMS: f64 = 155e3;
const S_MACS: f64 = 9.0e9;
const VI_PARAMS: f64 = 241.1e3;
const VI_PLUS_PARAMS: f64 = 222.7e3;
const VII_PARAMS: f64 = 156.0e3;

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationChoice {
    pub target: String,
    /// Human-readable description of the winning candidate.
    pub chosen: String,
    pub candidates: usize,
    /// Sum of absolute relative deviations from the targets.
    pub deviation: f64,
    pub config: ModelConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CalibrationReport {
    pub choices: Vec<CalibrationChoice>,
}

fn rel(actual: f64, target: f64) -> f64 {
    (actual - target).abs() / target
}

fn score_main(cfg: &ModelConfig, params: f64, macs: f64) -> f64 {
    let m = reference_multi_adds(cfg).expect("candidate is valid") as f64;
    rel(param_count(cfg) as f64, params) + rel(m, macs)
}

/// Keeps the first candidate with the lowest score.
fn pick(
    target: &str,
    candidates: Vec<(String, ModelConfig)>,
    score: impl Fn(&ModelConfig) -> f64,
) -> CalibrationChoice {
    let n = candidates.len();
    let mut best: Option<(f64, String, ModelConfig)> = None;
    for (label, cfg) in candidates {
        if cfg.validate().is_err() {
            continue;
        }
        let s = score(&cfg);
        if best.as_ref().is_none_or(|(b, ..)| s < *b) {
            best = Some((s, label, cfg));
        }
    }
    let (deviation, chosen, config) = best.expect("at least one valid candidate");
    CalibrationChoice {
        target: target.to_owned(),
        chosen,
        candidates: n,
        deviation,
        config,
    }
}

fn up_widths() -> impl Iterator<Item = usize> + Clone {
    (32..=96).step_by(4)
}

fn x4_choice() -> CalibrationChoice {
    let mut cands = Vec::new();
    for up in up_widths() {
        for groups in [1, 2] {
            for bias in [true, false] {
                let cfg = ModelConfig {
                    up_layers: vec![UpLayer::new(up, 2), UpLayer::new(12, 2)],
                    tail_groups: groups,
                    bias,
                    ..presets::vapsr_x4()
                };
                cands.push((format!("up {up}, tail_groups {groups}, bias {bias}"), cfg));
            }
        }
    }
    pick("vapsr_x4", cands, |c| score_main(c, X4_PARAMS, X4_MACS))
}

fn small_choice() -> CalibrationChoice {
    let mut cands = Vec::new();
    for expand in [32, 48, 64, 96] {
        for up in up_widths() {
            for groups in [1, 2] {
                let cfg = ModelConfig {
                    expand_width: expand,
                    up_layers: vec![UpLayer::new(up, 2), UpLayer::new(12, 2)],
                    tail_groups: groups,
                    ..presets::vapsr_s()
                };
                cands.push((format!("expand {expand}, up {up}, tail_groups {groups}"), cfg));
            }
        }
    }
    pick("vapsr_s", cands, |c| score_main(c, S_PARAMS, S_MACS))
}

/// One up conv and one shuffle; only the block count moves.
fn single_shuffle_choice(scale: usize) -> CalibrationChoice {
    let (base, params, macs) = match scale {
        2 => (presets::vapsr_x2(), X2_PARAMS, X2_MACS),
        _ => (presets::vapsr_x3(), X3_PARAMS, X3_MACS),
    };
    let cands = (16..=28)
        .map(|n| {
            let cfg = ModelConfig {
                n_blocks: n,
                ..base.clone()
            };
            (format!("{n} blocks"), cfg)
        })
        .collect();
    pick(&base.variant_tag, cands, |c| score_main(c, params, macs))
}

/// Width of stage (vi) and the refinement group count of (vi)+, fitted jointly.
fn group_conv_choice() -> CalibrationChoice {
    let mut cands = Vec::new();
    for width in [48, 64] {
        for groups in [1, 2, 4, 8] {
            let cfg = ModelConfig {
                width,
                expand_width: width,
                tail_groups: groups,
                ..presets::preset("vi+").expect("catalog variant")
            };
            cands.push((format!("width {width}, tail_groups {groups}"), cfg));
        }
    }
    pick("vi+", cands, |c| {
        let base = ModelConfig {
            tail_groups: 1,
            ..c.clone()
        };
        rel(param_count(&base) as f64, VI_PARAMS) + rel(param_count(c) as f64, VI_PLUS_PARAMS)
    })
}

fn deeper_up_choice() -> CalibrationChoice {
    let cands = (16..=96)
        .step_by(4)
        .map(|up| {
            let cfg = ModelConfig {
                up_layers: vec![UpLayer::new(up, 2), UpLayer::new(12, 2)],
                ..presets::preset("vii").expect("catalog variant")
            };
            (format!("up {up}"), cfg)
        })
        .collect();
    pick("vii", cands, |c| rel(param_count(c) as f64, VII_PARAMS))
}

/// Runs every search.
pub fn calibrate() -> CalibrationReport {
    CalibrationReport {
        choices: vec![
            x4_choice(),
            single_shuffle_choice(3),
            single_shuffle_choice(2),
            small_choice(),
            group_conv_choice(),
            deeper_up_choice(),
        ],
    }
}

impl CalibrationReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from(
            "# target: chosen candidate (candidates searched, summed relative deviation)\n",
        );
        for c in &self.choices {
            writeln!(
                out,
                "{}: {} ({} candidates, deviation {:.4}; params {}, multi_adds {})",
                c.target,
                c.chosen,
                c.candidates,
                c.deviation,
                param_count(&c.config),
                reference_multi_adds(&c.config).expect("valid")
            )
            .unwrap();
        }
        out
    }
}
