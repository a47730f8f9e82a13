use std::fmt::Write;

use super::{attention_receptive_field, modcrop, param_count, reference_multi_adds, GT_HEIGHT, GT_WIDTH};
use crate::error::Result;
use crate::model::ModelConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub variant: String,
    pub scale: usize,
    pub params: u64,
    pub multi_adds: u64,
    /// Receptive field of the attention branch.
    pub attn_rf: usize,
    /// Change in params from the previous row.
    pub delta_params: Option<i64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

/// Params, Multi-Adds and receptive field per config, with deltas between consecutive rows.
pub fn roadmap_report(catalog: &[ModelConfig]) -> Result<Report> {
    let mut rows: Vec<ReportRow> = Vec::with_capacity(catalog.len());
    for cfg in catalog {
        cfg.validate()?;
        let params = param_count(cfg);
        let delta_params = rows.last().map(|prev| params as i64 - prev.params as i64);
        rows.push(ReportRow {
            variant: cfg.variant_tag.clone(),
            scale: cfg.scale,
            params,
            multi_adds: reference_multi_adds(cfg)?,
            attn_rf: attention_receptive_field(cfg),
            delta_params,
        });
    }
    Ok(Report { rows })
}

fn delta_str(d: Option<i64>) -> String {
    d.map_or_else(String::new, |d| format!("{d:+}"))
}

impl Report {
    pub fn row(&self, variant: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("variant,scale,params,multi_adds,attn_rf,delta_params\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.variant,
                r.scale,
                r.params,
                r.multi_adds,
                r.attn_rf,
                delta_str(r.delta_params)
            )
            .unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# Multi-Adds: one MAC per multiply, every conv at its own resolution, attention product\n\
             # counted as C*H*W, bias/GELU/norm excluded; output {GT_WIDTH}x{GT_HEIGHT} (modcropped\n\
             # to a multiple of the scale, e.g. {}x{} at x3)",
            modcrop(3, GT_HEIGHT, GT_WIDTH).1,
            modcrop(3, GT_HEIGHT, GT_WIDTH).0,
        )
        .unwrap();
        let header = ["variant", "scale", "params[K]", "multi_adds[G]", "attn_rf", "delta[K]"];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.variant.clone(),
                    format!("x{}", r.scale),
                    format!("{:.1}", r.params as f64 / 1e3),
                    format!("{:.2}", r.multi_adds as f64 / 1e9),
                    r.attn_rf.to_string(),
                    r.delta_params
                        .map_or_else(String::new, |d| format!("{:+.1}", d as f64 / 1e3)),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.len());
            }
        }
        let line = |out: &mut String, row: &[&str]| {
            let mut s = format!("{:<w$}", row[0], w = widths[0]);
            for (c, w) in row[1..].iter().zip(&widths[1..]) {
                write!(s, "  {c:>w$}").unwrap();
            }
            writeln!(out, "{}", s.trim_end()).unwrap();
        };
        line(&mut out, &header);
        for row in &cells {
            line(&mut out, &row.each_ref().map(String::as_str));
        }
        out
    }
}
