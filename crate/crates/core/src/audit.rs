//! Parameter and Multi-Adds accounting.
//!
//! Multi-Adds follow the convention that reproduces published lightweight-SR
//! complexity tables: every multiply-accumulate counts as two operations
//! (one multiply, one add), bias additions, activations, softmax and layer
//! norm are not counted, and every layer before the pixel shuffle is evaluated
//! on the LR grid (`hr / scale`). The two channel-attention products of MDTA
//! contribute `2·C²·HW/heads` multiply-accumulates.

use std::fmt::Write as _;

use thiserror::Error;

use crate::arch::{LayerCost, Resolution, ScetModel};
use crate::tensor::Real;

/// Standard 720p query size for Multi-Adds.
pub const HR_WIDTH: usize = 1280;
pub const HR_HEIGHT: usize = 720;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AuditError {
    #[error("HR size {width}x{height} is not divisible by scale {scale}")]
    NotDivisible { width: usize, height: usize, scale: usize },
}

/// Multiply-accumulates of one layer given LR and HR pixel counts.
pub fn layer_macs(cost: &LayerCost, lr_pixels: u64, hr_pixels: u64) -> u64 {
    match *cost {
        LayerCost::Conv { cin, cout, kernel, groups, at } => {
            let pixels = match at {
                Resolution::Low => lr_pixels,
                Resolution::High => hr_pixels,
            };
            (cout * (cin / groups) * kernel * kernel) as u64 * pixels
        }
        LayerCost::ChannelAttention { channels, heads } => {
            let c = (channels / heads) as u64;
            2 * c * c * lr_pixels * heads as u64
        }
    }
}

fn pixel_counts<T: Real>(model: &ScetModel<T>, hr_width: usize, hr_height: usize) -> Result<(u64, u64), AuditError> {
    let s = model.config().scale;
    if hr_width % s != 0 || hr_height % s != 0 || hr_width == 0 || hr_height == 0 {
        return Err(AuditError::NotDivisible { width: hr_width, height: hr_height, scale: s });
    }
    Ok((((hr_width / s) * (hr_height / s)) as u64, (hr_width * hr_height) as u64))
}

/// Number of scalar parameters in the registry.
pub fn count_params<T: Real>(model: &ScetModel<T>) -> u64 {
    model.registry().numel() as u64
}

/// Multiply-accumulate operations to produce one `hr_width × hr_height` output.
pub fn count_macs<T: Real>(model: &ScetModel<T>, hr_width: usize, hr_height: usize) -> Result<u64, AuditError> {
    Ok(report(model, hr_width, hr_height)?.rows.iter().map(|r| r.macs).sum())
}

/// Multi-Adds (two per multiply-accumulate) for one `hr_width × hr_height` output.
pub fn count_multiadds<T: Real>(model: &ScetModel<T>, hr_width: usize, hr_height: usize) -> Result<u64, AuditError> {
    Ok(2 * count_macs(model, hr_width, hr_height)?)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostRow {
    pub name: String,
    pub params: u64,
    pub macs: u64,
}

impl CostRow {
    pub fn multiadds(&self) -> u64 {
        2 * self.macs
    }
}

/// Per-submodule cost table, rows in registry order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub hr_width: usize,
    pub hr_height: usize,
    pub rows: Vec<CostRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

pub fn report<T: Real>(model: &ScetModel<T>, hr_width: usize, hr_height: usize) -> Result<CostReport, AuditError> {
    let (lr, hr) = pixel_counts(model, hr_width, hr_height)?;
    let rows = model
        .cost_layout()
        .into_iter()
        .map(|(name, layers)| CostRow {
            params: model.registry().numel_under(&name) as u64,
            macs: layers.iter().map(|l| layer_macs(l, lr, hr)).sum(),
            name,
        })
        .collect();
    Ok(CostReport { hr_width, hr_height, rows })
}

fn human(v: u64, unit: f64, suffix: &str) -> String {
    format!("{:.2}{suffix}", v as f64 / unit)
}

impl CostReport {
    pub fn total_params(&self) -> u64 {
        self.rows.iter().map(|r| r.params).sum()
    }

    pub fn total_multiadds(&self) -> u64 {
        self.rows.iter().map(CostRow::multiadds).sum()
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Text => self.render_text(),
            ReportFormat::Csv => self.render_csv(),
        }
    }

    pub fn render_csv(&self) -> String {
        let mut s = String::from("name,params,multiadds\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{}", r.name, r.params, r.multiadds());
        }
        let _ = writeln!(s, "total,{},{}", self.total_params(), self.total_multiadds());
        s
    }

    pub fn render_text(&self) -> String {
        let width = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(5).max(5);
        let mut s = format!("Multi-Adds at {}x{} HR\n", self.hr_width, self.hr_height);
        let _ = writeln!(s, "{:<width$}  {:>10}  {:>16}", "name", "params", "multiadds");
        let rule = "-".repeat(width + 30);
        let _ = writeln!(s, "{rule}");
        for r in &self.rows {
            let _ = writeln!(s, "{:<width$}  {:>10}  {:>16}", r.name, r.params, r.multiadds());
        }
        let _ = writeln!(s, "{rule}");
        let (p, m) = (self.total_params(), self.total_multiadds());
        let _ = writeln!(
            s,
            "{:<width$}  {:>10}  {:>16}  ({}, {})",
            "total",
            p,
            m,
            human(p, 1e3, "K"),
            human(m, 1e9, "G")
        );
        s
    }
}
