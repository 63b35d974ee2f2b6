use std::io::{self, Write};

use clap::ValueEnum;
use neardefect::certify::DefectiveCertificate;
use neardefect::implicit::ConvergenceRecord;
use num_complex::Complex64;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

/// C-style `%.4e`: five significant digits, signed two-digit exponent.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn sci_complex(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{} {sign} {}i", sci(z.re), sci(z.im.abs()))
}

/// The text table shows `|ε|`, the distance; CSV and JSON keep the signed iterate.
fn write_text_table<W: Write>(w: &mut W, records: &[ConvergenceRecord]) -> io::Result<()> {
    writeln!(
        w,
        "{:>3}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}",
        "i", "alpha", "beta", "|epsilon|", "|g|", "F_ab"
    )?;
    for r in records {
        writeln!(
            w,
            "{:>3}  {:>11}  {:>11}  {:>11}  {:>11}  {:>11}",
            r.iteration,
            sci(r.alpha),
            sci(r.beta),
            sci(r.epsilon.abs()),
            sci(r.g_norm),
            sci(r.f_alphabeta)
        )?;
    }
    Ok(())
}

fn write_csv_table<W: Write>(w: &mut W, records: &[ConvergenceRecord]) -> io::Result<()> {
    writeln!(w, "i,alpha,beta,epsilon,g_norm,F_alphabeta")?;
    for r in records {
        writeln!(
            w,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.iteration, r.alpha, r.beta, r.epsilon, r.g_norm, r.f_alphabeta
        )?;
    }
    Ok(())
}

fn records_json(records: &[ConvergenceRecord]) -> Value {
    Value::Array(
        records
            .iter()
            .map(|r| {
                json!({
                    "i": r.iteration,
                    "alpha": r.alpha,
                    "beta": r.beta,
                    "epsilon": r.epsilon,
                    "g_norm": r.g_norm,
                    "F_alphabeta": r.f_alphabeta,
                })
            })
            .collect(),
    )
}

/// Convergence history alone, used when Newton fails.
pub fn write_table<W: Write>(
    w: &mut W,
    format: OutputFormat,
    records: &[ConvergenceRecord],
) -> io::Result<()> {
    match format {
        OutputFormat::Text => write_text_table(w, records),
        OutputFormat::Csv => write_csv_table(w, records),
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *w, &json!({ "iterations": records_json(records) }))?;
            writeln!(w)
        }
    }
}

/// Convergence history followed by the certificate.
pub fn write_run<W: Write>(
    w: &mut W,
    format: OutputFormat,
    records: &[ConvergenceRecord],
    cert: &DefectiveCertificate,
    certified: bool,
) -> io::Result<()> {
    match format {
        OutputFormat::Text => {
            write_text_table(w, records)?;
            writeln!(w)?;
            writeln!(w, "z*              {}", sci_complex(cert.z_star))?;
            writeln!(w, "epsilon*        {}", sci(cert.epsilon_star))?;
            writeln!(w, "residual_right  {}", sci(cert.residual_right))?;
            writeln!(w, "residual_left   {}", sci(cert.residual_left))?;
            writeln!(w, "orthogonality   {}", sci(cert.orthogonality))?;
            if let Some(f) = cert.f_alphabeta {
                writeln!(w, "F_alphabeta     {}", sci(f))?;
            }
            if let Some([p, q]) = cert.coalescing_pair {
                writeln!(w, "coalescing pair {}, {}", sci_complex(p), sci_complex(q))?;
            }
            writeln!(
                w,
                "certified       {}",
                if certified { "yes" } else { "no" }
            )
        }
        OutputFormat::Csv => write_csv_table(w, records),
        OutputFormat::Json => {
            let pair = cert.coalescing_pair.map(|pair| {
                pair.iter()
                    .map(|z| json!({ "re": z.re, "im": z.im }))
                    .collect::<Vec<_>>()
            });
            let doc = json!({
                "z_star_re": cert.z_star.re,
                "z_star_im": cert.z_star.im,
                "epsilon_star": cert.epsilon_star,
                "residual_right": cert.residual_right,
                "residual_left": cert.residual_left,
                "orthogonality": cert.orthogonality,
                "F_alphabeta": cert.f_alphabeta,
                "coalescing_pair": pair,
                "certified": certified,
                "iterations": records_json(records),
            });
            serde_json::to_writer_pretty(&mut *w, &doc)?;
            writeln!(w)
        }
    }
}
