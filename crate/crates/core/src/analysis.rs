//! Attention-map similarity between models and its correlation with
//! multi-task results.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelBundle, ModelError};
use crate::numerics::Tensor;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("the encoder has no attention layers")]
    NoAttentionLayers,
    #[error("profiles cover different sentences: {0}")]
    SentenceSetMismatch(String),
    #[error("head {head} out of range ({heads} heads)")]
    HeadOutOfRange { head: usize, heads: usize },
    #[error("correlation needs at least two paired values with nonzero variance")]
    DegenerateVariance,
    #[error("grid file: {0}")]
    Format(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Attention maps of one model over a sentence set. `maps[s][k]` is the
/// `n x n` map of head `k` (layer-major) on sentence `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionProfile {
    pub task: String,
    pub layers: usize,
    pub heads: usize,
    pub sentences: Vec<Vec<String>>,
    pub maps: Vec<Vec<Tensor>>,
}

impl AttentionProfile {
    pub fn num_heads(&self) -> usize {
        self.layers * self.heads
    }
}

/// Eval-mode attention maps of every layer and head on each sentence.
pub fn extract_attention(bundle: &ModelBundle, task: &str, sentences: &[Vec<String>]) -> Result<AttentionProfile, AnalysisError> {
    let cfg = &bundle.encoder.config;
    if cfg.attn_layers == 0 {
        return Err(AnalysisError::NoAttentionLayers);
    }
    let maps = sentences
        .par_iter()
        .map(|s| bundle.attention_maps(s))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(AttentionProfile {
        task: task.to_string(),
        layers: cfg.attn_layers,
        heads: cfg.attn_heads,
        sentences: sentences.to_vec(),
        maps,
    })
}

fn check_pair(a: &AttentionProfile, b: &AttentionProfile) -> Result<(), AnalysisError> {
    if a.sentences != b.sentences {
        return Err(AnalysisError::SentenceSetMismatch(format!(
            "{} has {} sentences, {} has {}",
            a.task,
            a.sentences.len(),
            b.task,
            b.sentences.len()
        )));
    }
    if (a.layers, a.heads) != (b.layers, b.heads) {
        return Err(AnalysisError::SentenceSetMismatch(format!(
            "head layouts differ: {}x{} vs {}x{}",
            a.layers, a.heads, b.layers, b.heads
        )));
    }
    if a.sentences.is_empty() {
        return Err(AnalysisError::SentenceSetMismatch("empty sentence set".into()));
    }
    Ok(())
}

fn frobenius_distance(a: &Tensor, b: &Tensor) -> f64 {
    a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Negative mean Frobenius distance between the `k`-th maps (layer-major
/// head index) of two profiles over their shared sentences.
pub fn attention_similarity(a: &AttentionProfile, b: &AttentionProfile, k: usize) -> Result<f64, AnalysisError> {
    check_pair(a, b)?;
    if k >= a.num_heads() {
        return Err(AnalysisError::HeadOutOfRange { head: k, heads: a.num_heads() });
    }
    let total: f64 = a
        .maps
        .iter()
        .zip(&b.maps)
        .map(|(ma, mb)| frobenius_distance(&ma[k], &mb[k]))
        .sum();
    Ok(-total / a.sentences.len() as f64)
}

/// Layers x heads grid of similarities.
pub fn similarity_grid(a: &AttentionProfile, b: &AttentionProfile) -> Result<Vec<Vec<f64>>, AnalysisError> {
    check_pair(a, b)?;
    (0..a.layers)
        .map(|l| (0..a.heads).map(|h| attention_similarity(a, b, l * a.heads + h)).collect())
        .collect()
}

/// Mean over all heads of a grid.
pub fn mean_similarity(grid: &[Vec<f64>]) -> f64 {
    let n: usize = grid.iter().map(Vec::len).sum();
    if n == 0 {
        return 0.0;
    }
    grid.iter().flatten().sum::<f64>() / n as f64
}

/// CSV with one row per layer and one column per head.
pub fn grid_to_csv(grid: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for row in grid {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn grid_from_csv(text: &str) -> Result<Vec<Vec<f64>>, AnalysisError> {
    let grid: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.split(',')
                .map(|c| {
                    c.trim()
                        .parse::<f64>()
                        .map_err(|e| AnalysisError::Format(format!("row {}: {e}", i + 1)))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    if grid.windows(2).any(|w| w[0].len() != w[1].len()) {
        return Err(AnalysisError::Format("ragged rows".into()));
    }
    Ok(grid)
}

pub fn write_grid_csv(grid: &[Vec<f64>], path: &Path) -> Result<(), AnalysisError> {
    fs::write(path, grid_to_csv(grid))?;
    Ok(())
}

pub fn read_grid_csv(path: &Path) -> Result<Vec<Vec<f64>>, AnalysisError> {
    grid_from_csv(&fs::read_to_string(path)?)
}

/// Heatmap image of a grid: one `cell x cell` block per head, white at 0
/// shading to dark blue at the most negative value.
#[cfg(feature = "png")]
pub fn write_heatmap_png(grid: &[Vec<f64>], path: &Path, cell: u32) -> Result<(), AnalysisError> {
    let rows = grid.len() as u32;
    let cols = grid.first().map_or(0, Vec::len) as u32;
    if rows == 0 || cols == 0 {
        return Err(AnalysisError::Format("empty grid".into()));
    }
    let lo = grid.iter().flatten().cloned().fold(0.0, f64::min);
    let (w, h) = (cols * cell, rows * cell);
    let mut data = Vec::with_capacity((w * h * 3) as usize);
    for y in 0..h {
        for x in 0..w {
            let v = grid[(y / cell) as usize][(x / cell) as usize];
            let t = if lo < 0.0 { (v / lo).clamp(0.0, 1.0) } else { 0.0 };
            let shade = |full: f64, dark: f64| (full + (dark - full) * t).round() as u8;
            data.extend([shade(255.0, 8.0), shade(255.0, 48.0), shade(255.0, 107.0)]);
        }
    }
    let file = fs::File::create(path)?;
    let mut enc = png::Encoder::new(std::io::BufWriter::new(file), w, h);
    enc.set_color(png::ColorType::Rgb);
    enc.set_depth(png::BitDepth::Eight);
    let mut writer = enc.write_header().map_err(|e| AnalysisError::Format(e.to_string()))?;
    writer.write_image_data(&data).map_err(|e| AnalysisError::Format(e.to_string()))?;
    Ok(())
}

/// Pearson correlation coefficient.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64, AnalysisError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(AnalysisError::DegenerateVariance);
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(AnalysisError::DegenerateVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Source task, its mean attention similarity to the target, and the
/// target's dev metric after pairwise MTL with that source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatednessPoint {
    pub source: String,
    pub mean_similarity: f64,
    pub mtl_metric: f64,
}

/// Correlation between similarity and MTL outcome across sources.
pub fn relatedness_correlation(points: &[RelatednessPoint]) -> Result<f64, AnalysisError> {
    let xs: Vec<f64> = points.iter().map(|p| p.mean_similarity).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.mtl_metric).collect();
    pearson(&xs, &ys)
}
