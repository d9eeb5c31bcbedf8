//! Two-sample t-test, Welch by default with the pooled variant behind a
//! flag.

use serde::Serialize;

use super::dist::t_p_value;
use super::EconError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarianceAssumption {
    /// Welch: unequal variances, Welch-Satterthwaite degrees of freedom.
    Unequal,
    /// Classic pooled-variance test.
    Pooled,
}

#[derive(Debug, Clone, Serialize)]
pub struct TTestResult {
    pub t_stat: f64,
    pub p_value: f64,
    pub df: f64,
    pub group_means: (f64, f64),
    pub group_sds: (f64, f64),
    pub group_ns: (usize, usize),
}

fn mean_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<TTestResult, EconError> {
    t_test(a, b, VarianceAssumption::Unequal)
}

pub fn t_test(
    a: &[f64],
    b: &[f64],
    assumption: VarianceAssumption,
) -> Result<TTestResult, EconError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(EconError::SampleTooSmall {
            needed: 2,
            got: a.len().min(b.len()),
        });
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);

    if va == 0.0 && vb == 0.0 {
        if ma == mb {
            // Identical constants: no evidence of difference.
            return Ok(TTestResult {
                t_stat: 0.0,
                p_value: 1.0,
                df: na + nb - 2.0,
                group_means: (ma, mb),
                group_sds: (0.0, 0.0),
                group_ns: (a.len(), b.len()),
            });
        }
        return Err(EconError::BothConstant);
    }

    let (t, df) = match assumption {
        VarianceAssumption::Unequal => {
            let se2 = va / na + vb / nb;
            let t = (ma - mb) / se2.sqrt();
            // Welch-Satterthwaite
            let df = se2 * se2
                / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
            (t, df)
        }
        VarianceAssumption::Pooled => {
            let df = na + nb - 2.0;
            let sp2 = ((na - 1.0) * va + (nb - 1.0) * vb) / df;
            let t = (ma - mb) / (sp2 * (1.0 / na + 1.0 / nb)).sqrt();
            (t, df)
        }
    };

    Ok(TTestResult {
        t_stat: t,
        p_value: t_p_value(t, df)?,
        df,
        group_means: (ma, mb),
        group_sds: (va.sqrt(), vb.sqrt()),
        group_ns: (a.len(), b.len()),
    })
}
