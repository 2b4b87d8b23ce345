//! CSV reports. Each file starts with a `#schema=<name>/<version>` line,
//! then a header row; column order is fixed per schema. Floats use six
//! decimals, `inf`/`-inf`/`nan` for non-finite values, and an empty field
//! for "not applicable".

use anyhow::Result;
use lwejscc_core::codec::FitReport;
use lwejscc_core::pipeline::SweepResult;
use lwejscc_core::security::{AdvantageEstimate, AttackReport, ErrorPolicy};

pub const SWEEP_SCHEMA: &str = "lwejscc-sweep/1";
pub const INDCPA_SCHEMA: &str = "lwejscc-indcpa/1";
pub const ATTACK_SCHEMA: &str = "lwejscc-attack/1";
pub const TRAIN_SCHEMA: &str = "lwejscc-train/1";

pub const SWEEP_COLUMNS: [&str; 13] = [
    "row_type",
    "image",
    "snr_db",
    "rho",
    "mse",
    "psnr",
    "psnr_std",
    "ssim",
    "ssim_std",
    "ms_ssim",
    "crypto_std",
    "channel_std",
    "compound_std",
];

pub fn float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.6}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(float).unwrap_or_default()
}

fn table(schema: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
    let mut out = format!("#schema={schema}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    Ok(String::from_utf8(out)?)
}

/// Per-image rows in sweep order, then one aggregate row per SNR.
pub fn sweep_csv(result: &SweepResult) -> Result<String> {
    let mut rows = Vec::new();
    for r in &result.records {
        rows.push(vec![
            "record".into(),
            r.image.to_string(),
            float(r.snr_db),
            float(r.rho),
            float(r.mse),
            float(r.psnr),
            String::new(),
            float(r.ssim),
            String::new(),
            opt(r.ms_ssim),
            float(r.crypto_std),
            float(r.channel_std),
            float(r.compound_std),
        ]);
    }
    for a in &result.aggregates {
        rows.push(vec![
            "aggregate".into(),
            String::new(),
            float(a.snr_db),
            float(a.rho),
            String::new(),
            float(a.psnr_mean),
            float(a.psnr_std),
            float(a.ssim_mean),
            float(a.ssim_std),
            opt(a.ms_ssim_mean),
            float(a.crypto_std),
            float(a.channel_std),
            float(a.compound_std),
        ]);
    }
    table(SWEEP_SCHEMA, &SWEEP_COLUMNS, rows)
}

/// One row of the IND-CPA report.
#[derive(Debug, Clone)]
pub struct GameRow {
    pub variant: String,
    pub oracle: &'static str,
    pub eve_knows_error_seed: bool,
    pub estimate: AdvantageEstimate,
}

pub fn indcpa_csv(rows: &[GameRow]) -> Result<String> {
    table(
        INDCPA_SCHEMA,
        &[
            "variant",
            "distinguisher",
            "oracle",
            "eve_knows_error_seed",
            "trials",
            "correct",
            "advantage",
            "ci_low",
            "ci_high",
            "features",
        ],
        rows.iter()
            .map(|r| {
                let e = &r.estimate;
                vec![
                    r.variant.clone(),
                    e.distinguisher.into(),
                    r.oracle.into(),
                    r.eve_knows_error_seed.to_string(),
                    e.trials.to_string(),
                    e.correct.to_string(),
                    float(e.advantage),
                    float(e.ci_low),
                    float(e.ci_high),
                    e.features.into(),
                ]
            })
            .collect(),
    )
}

pub fn policy_name(p: ErrorPolicy) -> &'static str {
    match p {
        ErrorPolicy::FreshPerMessage => "fresh",
        ErrorPolicy::Reused => "reused",
    }
}

pub fn attack_csv(reports: &[AttackReport]) -> Result<String> {
    table(
        ATTACK_SCHEMA,
        &[
            "model",
            "error_policy",
            "snr_e_db",
            "train_pairs",
            "test_pairs",
            "mse",
            "psnr",
            "ssim",
            "baseline_mse",
            "baseline_psnr",
            "baseline_ssim",
            "mse_ratio",
        ],
        reports
            .iter()
            .map(|r| {
                vec![
                    r.model.as_str().into(),
                    policy_name(r.error_policy).into(),
                    float(r.snr_e_db.unwrap_or(f64::INFINITY)),
                    r.train_pairs.to_string(),
                    r.test_pairs.to_string(),
                    float(r.mse),
                    float(r.psnr),
                    float(r.ssim),
                    float(r.baseline_mse),
                    float(r.baseline_psnr),
                    float(r.baseline_ssim),
                    float(r.mse_ratio()),
                ]
            })
            .collect(),
    )
}

pub fn train_csv(report: &FitReport) -> Result<String> {
    table(
        TRAIN_SCHEMA,
        &["epoch", "steps", "train_loss", "validation_loss", "learning_rate", "sigma_q"],
        report
            .epochs
            .iter()
            .map(|e| {
                vec![
                    e.epoch.to_string(),
                    e.steps.to_string(),
                    float(e.train_loss),
                    float(e.validation_loss),
                    format!("{:e}", e.learning_rate),
                    float(e.sigma_q),
                ]
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(float(1.0 / 3.0), "0.333333");
        assert_eq!(float(f64::INFINITY), "inf");
        assert_eq!(float(f64::NEG_INFINITY), "-inf");
        assert_eq!(float(f64::NAN), "nan");
        assert_eq!(float(-0.5), "-0.500000");
    }

    #[test]
    fn empty_sweep_is_header_only() {
        let text = sweep_csv(&SweepResult {
            records: vec![],
            aggregates: vec![],
        })
        .unwrap();
        assert_eq!(text, format!("#schema={SWEEP_SCHEMA}\n{}\n", SWEEP_COLUMNS.join(",")));
    }

    #[test]
    fn features_with_commas_are_quoted() {
        let row = GameRow {
            variant: "honest".into(),
            oracle: "honest",
            eve_knows_error_seed: false,
            estimate: AdvantageEstimate::from_counts("d", "a, b", 60, 100),
        };
        let text = indcpa_csv(&[row]).unwrap();
        assert!(text.lines().nth(2).unwrap().ends_with("\"a, b\""));
    }
}
