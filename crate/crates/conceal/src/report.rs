//! CSV outputs. Every file starts with a `# config-fingerprint: <sha256>`
//! comment line followed by a header row.

use std::io::Write;

use fse_core::cost::{count_ops, CostAlgorithm, OpCategory};
use fse_core::TraceRecord;

use crate::bench::BenchRow;
use crate::error::{ConcealError, Result};
use crate::pipeline::{ConcealmentReport, CurveTable, Histogram};

fn csv_err(e: csv::Error) -> ConcealError {
    ConcealError::Format(e.to_string())
}

fn writer(fingerprint: &str, header: &[&str]) -> Result<csv::Writer<Vec<u8>>> {
    let mut buf = Vec::new();
    writeln!(buf, "# config-fingerprint: {fingerprint}").expect("writing to memory");
    let mut w = csv::Writer::from_writer(buf);
    w.write_record(header).map_err(csv_err)?;
    Ok(w)
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| ConcealError::Format(e.to_string()))
}

fn num(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        format!("{v:.4}")
    }
}

pub const REPORT_HEADER: [&str; 6] = ["image", "algorithm", "gamma", "iterations", "psnr_db", "sec_per_block"];

pub fn report_csv(fingerprint: &str, reports: &[ConcealmentReport]) -> Result<Vec<u8>> {
    let mut w = writer(fingerprint, &REPORT_HEADER)?;
    for r in reports {
        w.write_record([
            r.image.clone(),
            r.algorithm.name().to_string(),
            r.algorithm.gamma().map_or(String::new(), |g| g.to_string()),
            r.config.iterations.to_string(),
            num(r.psnr_db()),
            format!("{:.6}", r.sec_per_block),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn curve_csv(fingerprint: &str, curves: &[(String, CurveTable)]) -> Result<Vec<u8>> {
    let mut w = writer(fingerprint, &["image", "series", "iteration", "psnr_db"])?;
    for (image, table) in curves {
        for s in &table.series {
            for (it, p) in table.iterations.iter().zip(&s.psnr) {
                w.write_record([image.clone(), s.algorithm.label(), it.to_string(), num(p.db())])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

/// Value at the last checkpoint and best value over the curve, per series.
pub fn curve_summary_csv(fingerprint: &str, curves: &[(String, CurveTable)]) -> Result<Vec<u8>> {
    let mut w = writer(
        fingerprint,
        &["image", "series", "final_iteration", "final_psnr_db", "peak_iteration", "peak_psnr_db"],
    )?;
    for (image, table) in curves {
        let Some(&last) = table.iterations.last() else {
            continue;
        };
        for (i, s) in table.series.iter().enumerate() {
            let (peak_it, peak) = table.peak(i).expect("non-empty curve");
            w.write_record([
                image.clone(),
                s.algorithm.label(),
                last.to_string(),
                num(table.at(i, last).expect("last checkpoint")),
                peak_it.to_string(),
                num(peak),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

pub fn trace_csv(fingerprint: &str, image: &str, traces: &[Vec<TraceRecord>]) -> Result<Vec<u8>> {
    let mut header = vec!["image", "block"];
    header.extend(TraceRecord::CSV_HEADER.split(','));
    let mut w = writer(fingerprint, &header)?;
    for (b, trace) in traces.iter().enumerate() {
        for rec in trace {
            let mut row = vec![image.to_string(), b.to_string()];
            row.extend(rec.to_csv_row().split(',').map(str::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    finish(w)
}

pub fn histogram_csv(fingerprint: &str, hists: &[(String, Histogram)]) -> Result<Vec<u8>> {
    let mut w = writer(fingerprint, &["image", "bin_start", "bin_end", "count"])?;
    for (image, h) in hists {
        for (i, c) in h.counts.iter().enumerate() {
            let start = h.lo + i as f64 * h.width;
            w.write_record([
                image.clone(),
                format!("{start:.3}"),
                format!("{:.3}", start + h.width),
                c.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    finish(w)
}

/// Operation counts for `blocks` blocks of `m x n` samples.
pub fn cost_csv(fingerprint: &str, m: usize, n: usize, t: usize, iterations: &[usize], blocks: usize) -> Result<Vec<u8>> {
    let mut w = writer(fingerprint, &["iterations", "algorithm", "category", "ops"])?;
    for &i in iterations {
        for (alg, name) in [(CostAlgorithm::Ofse, "ofse"), (CostAlgorithm::Fofse, "fofse")] {
            let report = count_ops(alg, m, n, t, i);
            let rows = OpCategory::ALL
                .iter()
                .map(|&c| (c.name(), report.get(c)))
                .chain([("TOTAL", report.total()), ("FFT", report.ffts)]);
            for (cat, ops) in rows {
                w.write_record([i.to_string(), name.to_string(), cat.to_string(), (ops * blocks as u128).to_string()])
                    .map_err(csv_err)?;
            }
        }
    }
    finish(w)
}

pub fn bench_csv(fingerprint: &str, rows: &[BenchRow]) -> Result<Vec<u8>> {
    let mut w = writer(
        fingerprint,
        &[
            "engine",
            "iterations",
            "blocks",
            "repetitions",
            "mean_sec_per_block",
            "stddev_sec_per_block",
            "cost_model_ops",
        ],
    )?;
    for r in rows {
        w.write_record([
            r.engine.label(),
            r.iterations.to_string(),
            r.blocks.to_string(),
            r.repetitions.to_string(),
            format!("{:.6e}", r.mean),
            format!("{:.6e}", r.stddev),
            r.cost_ops.map_or(String::new(), |c| c.to_string()),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}
