//! File outputs: the training metrics CSV, evaluation summary JSON and
//! SVG charts. Every artifact carries the manifest hash of the run that
//! produced it.

use std::io::Write;
use std::path::Path;

use crate::harness::eval::EvalSummary;
use crate::harness::svg::{self, LineSeries};
use crate::learner::MetricsRow;
use crate::{Error, Result};

/// Streaming writer for the per-episode metrics CSV. The first line is
/// a `# manifest: <hash>` comment, then the fixed column header.
pub struct MetricsWriter {
    inner: csv::Writer<std::fs::File>,
}

impl MetricsWriter {
    pub fn create(path: &Path, manifest_hash: &str) -> Result<Self> {
        let mut file = std::fs::File::create(path)?;
        writeln!(file, "# manifest: {manifest_hash}")?;
        let mut inner = csv::WriterBuilder::new().from_writer(file);
        inner
            .write_record([
                "episode",
                "seed",
                "k",
                "mean_reward",
                "heuristic_reward",
                "r_d",
                "maxsnr_reward",
                "policy_entropy",
                "actor_loss",
                "critic_loss",
                "collisions",
                "wall_ms",
            ])
            .map_err(csv_err)?;
        Ok(Self { inner })
    }

    pub fn push(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner
            .write_record([
                row.episode.to_string(),
                row.seed.to_string(),
                row.k.to_string(),
                row.mean_reward.to_string(),
                row.heuristic_reward.to_string(),
                row.r_d.to_string(),
                row.maxsnr_reward.to_string(),
                row.policy_entropy.to_string(),
                row.actor_loss.to_string(),
                row.critic_loss.to_string(),
                row.collisions.to_string(),
                row.wall_ms.to_string(),
            ])
            .map_err(csv_err)?;
        self.inner.flush()?;
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Config(format!("csv: {e}"))
}

pub fn write_metrics_csv(path: &Path, rows: &[MetricsRow], manifest_hash: &str) -> Result<()> {
    let mut writer = MetricsWriter::create(path, manifest_hash)?;
    for row in rows {
        writer.push(row)?;
    }
    Ok(())
}

/// Reads a metrics CSV (comment lines ignored).
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(csv_err)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record.map_err(csv_err)?);
    }
    Ok(rows)
}

pub fn write_eval_summary(path: &Path, summary: &EvalSummary) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(summary).unwrap())?;
    Ok(())
}

/// Reward-curve chart: per-episode r_d plus its 100-episode rolling
/// mean, with the source CSV embedded for round-tripping.
pub fn reward_curve_svg(rows: &[MetricsRow], csv_text: &str) -> String {
    let rd: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r.episode as f64, r.r_d))
        .collect();
    let rolling: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| r.episode as f64)
        .zip(svg::rolling_mean(
            &rows.iter().map(|r| r.r_d).collect::<Vec<_>>(),
            100,
        ))
        .collect();
    svg::line_chart(
        "Training reward gap vs centralized heuristic",
        "episode",
        "r_d",
        &[
            LineSeries {
                label: "r_d per episode".into(),
                points: rd,
            },
            LineSeries {
                label: "r_d (100-episode rolling mean)".into(),
                points: rolling,
            },
        ],
        Some(csv_text),
    )
}

fn grouped_bars(
    summary: &EvalSummary,
    groups: Vec<usize>,
    select: impl Fn(&crate::harness::eval::EvalPoint) -> usize,
    title: &str,
    x_label: &str,
    label_prefix: &str,
) -> String {
    let methods = ["policy", "max_snr", "heuristic"];
    let series: Vec<(String, Vec<f64>)> = methods
        .iter()
        .filter(|m| summary.points.iter().any(|p| &p.method == *m))
        .map(|m| {
            let values = groups
                .iter()
                .map(|&g| {
                    summary
                        .points
                        .iter()
                        .find(|p| &p.method == m && select(p) == g)
                        .map_or(0.0, |p| p.mean_utility_bps)
                })
                .collect();
            (m.to_string(), values)
        })
        .collect();
    let labels: Vec<String> = groups.iter().map(|g| format!("{label_prefix}{g}")).collect();
    let meta = serde_json::to_string(summary).unwrap();
    svg::bar_chart(title, x_label, "utility", &labels, &series, Some(&meta))
}

/// Grouped per-K bar chart of mean utilities per method.
pub fn eval_bars_svg(summary: &EvalSummary) -> String {
    let mut ks: Vec<usize> = summary.points.iter().map(|p| p.k).collect();
    ks.sort_unstable();
    ks.dedup();
    grouped_bars(
        summary,
        ks,
        |p| p.k,
        "Mean network utility per deployment size",
        "deployment size",
        "K=",
    )
}

/// Grouped per-beam-budget bar chart of mean utilities per method.
pub fn beam_bars_svg(summary: &EvalSummary) -> String {
    let mut beams: Vec<usize> = summary.points.iter().map(|p| p.n_i).collect();
    beams.sort_unstable();
    beams.dedup();
    grouped_bars(
        summary,
        beams,
        |p| p.n_i,
        "Mean network utility per beam budget",
        "beams per SBS",
        "N_i=",
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(episode: usize, r_d: f64) -> MetricsRow {
        MetricsRow {
            episode,
            seed: 7,
            k: 6,
            mean_reward: 1.0,
            heuristic_reward: 2.0,
            r_d,
            maxsnr_reward: 0.5,
            policy_entropy: 1.0,
            actor_loss: 0.1,
            critic_loss: 0.2,
            collisions: 3,
            wall_ms: 12.0,
        }
    }

    #[test]
    fn metrics_csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![row(0, -1.0), row(1, 0.5)];
        write_metrics_csv(&path, &rows, "deadbeef").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# manifest: deadbeef\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("episode,seed,k,"));
        let back = read_metrics_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back[1].r_d, 0.5);
        assert_eq!(back[0].collisions, 3);
    }

    #[test]
    fn csv_svg_csv_roundtrip_preserves_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![row(0, -1.0), row(1, 0.5), row(2, 0.25)];
        write_metrics_csv(&path, &rows, "cafe").unwrap();
        let csv_text = std::fs::read_to_string(&path).unwrap();
        let chart = reward_curve_svg(&rows, &csv_text);
        let recovered = svg::extract_metadata(&chart).unwrap();
        assert_eq!(recovered, csv_text);
        let back_path = dir.path().join("back.csv");
        std::fs::write(&back_path, recovered).unwrap();
        let back = read_metrics_csv(&back_path).unwrap();
        assert_eq!(back.len(), rows.len());
        for (a, b) in back.iter().zip(&rows) {
            assert_eq!(a.r_d, b.r_d);
            assert_eq!(a.mean_reward, b.mean_reward);
        }
    }
}
