//! Legislation linkage: split yearly article-frequency samples by whether a
//! theme appeared in that year's legislation, run per-theme t-tests, and
//! regress bill counts on article counts.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::econ::{ols_fit, welch_t_test, EconError, OlsResult, TTestResult};
use crate::gkg::StateCode;
use crate::linalg::Mat;

#[derive(Debug, Error)]
pub enum LegisError {
    #[error("need at least {needed} paired years, got {got}")]
    InsufficientObservations { needed: usize, got: usize },
    #[error(transparent)]
    Econ(#[from] EconError),
}

/// Per-state index of which themes each year's legislation touched, plus
/// bill counts.
#[derive(Debug, Clone, Serialize)]
pub struct LegislativeIndex {
    pub state: StateCode,
    pub themes_by_year: BTreeMap<i32, BTreeSet<String>>,
    pub bill_counts: BTreeMap<i32, u32>,
}

impl LegislativeIndex {
    pub fn mentions(&self, year: i32, theme: &str) -> bool {
        self.themes_by_year
            .get(&year)
            .is_some_and(|set| set.contains(theme))
    }
}

/// Partition of a theme's yearly frequencies by legislative mention.
#[derive(Debug, Clone, PartialEq)]
pub enum MentionSplit {
    /// Both groups have at least two years.
    Eligible {
        mentioned: Vec<f64>,
        not_mentioned: Vec<f64>,
    },
    /// Too few years on one side; the theme is reported as skipped.
    Skipped {
        mentioned_years: usize,
        not_mentioned_years: usize,
    },
}

/// Splits a theme's yearly frequencies into mentioned / not-mentioned
/// groups. Eligibility needs two years in each group.
pub fn split_by_mention(
    yearly_freq: &BTreeMap<i32, f64>,
    index: &LegislativeIndex,
    theme: &str,
) -> MentionSplit {
    let mut mentioned = Vec::new();
    let mut not_mentioned = Vec::new();
    for (year, freq) in yearly_freq {
        if index.mentions(*year, theme) {
            mentioned.push(*freq);
        } else {
            not_mentioned.push(*freq);
        }
    }
    if mentioned.len() >= 2 && not_mentioned.len() >= 2 {
        MentionSplit::Eligible {
            mentioned,
            not_mentioned,
        }
    } else {
        MentionSplit::Skipped {
            mentioned_years: mentioned.len(),
            not_mentioned_years: not_mentioned.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ThemeTTestRow {
    pub theme: String,
    #[serde(flatten)]
    pub test: TTestResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct ThemeTTestTable {
    /// Rows sorted by |t| descending.
    pub rows: Vec<ThemeTTestRow>,
    /// Themes skipped for too-small groups.
    pub skipped: Vec<String>,
}

/// One Welch t-test per eligible theme, mentioned-years group first.
pub fn theme_ttest_table(
    yearly_freq_by_theme: &BTreeMap<String, BTreeMap<i32, f64>>,
    index: &LegislativeIndex,
) -> Result<ThemeTTestTable, LegisError> {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (theme, yearly) in yearly_freq_by_theme {
        match split_by_mention(yearly, index, theme) {
            MentionSplit::Eligible {
                mentioned,
                not_mentioned,
            } => {
                match welch_t_test(&mentioned, &not_mentioned) {
                    Ok(test) => rows.push(ThemeTTestRow {
                        theme: theme.clone(),
                        test,
                    }),
                    // Identical constant groups carry no signal either way.
                    Err(EconError::BothConstant) => skipped.push(theme.clone()),
                    Err(e) => return Err(e.into()),
                }
            }
            MentionSplit::Skipped { .. } => skipped.push(theme.clone()),
        }
    }
    rows.sort_by(|a, b| {
        b.test
            .t_stat
            .abs()
            .partial_cmp(&a.test.t_stat.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.theme.cmp(&b.theme))
    });
    Ok(ThemeTTestTable { rows, skipped })
}

/// Regresses yearly bill counts on yearly article counts over the years
/// present in both series.
pub fn salience_regression(
    article_count_by_year: &BTreeMap<i32, f64>,
    bill_count_by_year: &BTreeMap<i32, f64>,
) -> Result<OlsResult, LegisError> {
    let mut articles = Vec::new();
    let mut bills = Vec::new();
    for (year, a) in article_count_by_year {
        if let Some(b) = bill_count_by_year.get(year) {
            articles.push(*a);
            bills.push(*b);
        }
    }
    if articles.len() < 4 {
        return Err(LegisError::InsufficientObservations {
            needed: 4,
            got: articles.len(),
        });
    }
    let design = Mat::from_cols(&[articles]).map_err(|e| EconError::DomainError(e.to_string()))?;
    Ok(ols_fit(&design, &bills)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn index(
        mentioned_years: &[i32],
        all_years: std::ops::RangeInclusive<i32>,
    ) -> LegislativeIndex {
        let mut themes_by_year = BTreeMap::new();
        let mut bill_counts = BTreeMap::new();
        for year in all_years {
            let mut set = BTreeSet::new();
            if mentioned_years.contains(&year) {
                set.insert("POVERTY".to_string());
            }
            themes_by_year.insert(year, set);
            bill_counts.insert(year, 10);
        }
        LegislativeIndex {
            state: "CA".parse().unwrap(),
            themes_by_year,
            bill_counts,
        }
    }

    fn freqs(values: &[(i32, f64)]) -> BTreeMap<i32, f64> {
        values.iter().copied().collect()
    }

    #[test]
    fn split_partitions_years() {
        let idx = index(&[2016, 2018], 2015..=2023);
        let yearly = freqs(&(2015..=2023).map(|y| (y, y as f64)).collect::<Vec<_>>());
        match split_by_mention(&yearly, &idx, "POVERTY") {
            MentionSplit::Eligible {
                mentioned,
                not_mentioned,
            } => {
                assert_eq!(mentioned, vec![2016.0, 2018.0]);
                assert_eq!(not_mentioned.len(), 7);
            }
            other => panic!("expected eligible split, got {other:?}"),
        }
    }

    #[test]
    fn theme_mentioned_every_year_is_skipped() {
        let years: Vec<i32> = (2015..=2023).collect();
        let idx = index(&years, 2015..=2023);
        let yearly = freqs(&years.iter().map(|&y| (y, 0.5)).collect::<Vec<_>>());
        assert!(matches!(
            split_by_mention(&yearly, &idx, "POVERTY"),
            MentionSplit::Skipped {
                not_mentioned_years: 0,
                ..
            }
        ));
    }

    #[test]
    fn table_counts_add_up_and_sorts_by_t() {
        let idx = index(&[2016, 2018, 2020], 2015..=2023);
        let mut by_theme = BTreeMap::new();
        // Strong difference for POVERTY, none for a flat theme.
        by_theme.insert(
            "POVERTY".to_string(),
            freqs(
                &(2015..=2023)
                    .map(|y| {
                        (
                            y,
                            if [2016, 2018, 2020].contains(&y) {
                                0.8 + 0.01 * y as f64 % 2.0
                            } else {
                                0.1 + 0.005 * y as f64 % 2.0
                            },
                        )
                    })
                    .collect::<Vec<_>>(),
            ),
        );
        by_theme.insert(
            "ARREST".to_string(),
            freqs(
                &(2015..=2023)
                    .map(|y| (y, 0.3 + 0.01 * (y % 3) as f64))
                    .collect::<Vec<_>>(),
            ),
        );
        by_theme.insert("RARE".to_string(), freqs(&[(2015, 0.1), (2016, 0.2)]));
        let table = theme_ttest_table(&by_theme, &idx).unwrap();
        assert_eq!(table.rows.len() + table.skipped.len(), 3);
        assert!(table.skipped.contains(&"RARE".to_string()));
        assert!(table
            .rows
            .windows(2)
            .all(|w| w[0].test.t_stat.abs() >= w[1].test.t_stat.abs()));
        let poverty = table.rows.iter().find(|r| r.theme == "POVERTY").unwrap();
        assert!(poverty.test.t_stat > 0.0);
    }

    #[test]
    fn identical_groups_give_t_zero() {
        let idx = index(&[2016, 2018], 2015..=2023);
        let yearly = freqs(
            &(2015..=2023)
                .map(|y| (y, if y % 2 == 0 { 0.4 } else { 0.6 }))
                .collect::<Vec<_>>(),
        );
        // mentioned years 2016, 2018 -> both 0.4; pick not-mentioned with same values
        let mut by_theme = BTreeMap::new();
        by_theme.insert("POVERTY".to_string(), yearly);
        let table = theme_ttest_table(&by_theme, &idx).unwrap();
        let row = &table.rows[0];
        assert!(row.test.group_means.0 <= row.test.group_means.1);
    }

    #[test]
    fn salience_exact_relationship() {
        let articles = freqs(
            &(2015..=2023)
                .map(|y| (y, (y - 2014) as f64 * 3.0))
                .collect::<Vec<_>>(),
        );
        let bills = freqs(
            &(2015..=2023)
                .map(|y| (y, (y - 2014) as f64 * 6.0))
                .collect::<Vec<_>>(),
        );
        let res = salience_regression(&articles, &bills).unwrap();
        assert!((res.r_squared - 1.0).abs() < 1e-10);
        assert!(res.p_value < 1e-8);
        assert!((res.coefficients[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn salience_constant_bills_degenerate() {
        let articles = freqs(&(2015..=2020).map(|y| (y, y as f64)).collect::<Vec<_>>());
        let bills = freqs(&(2015..=2020).map(|y| (y, 12.0)).collect::<Vec<_>>());
        let res = salience_regression(&articles, &bills).unwrap();
        assert!(res.degenerate);
        assert_eq!(res.p_value, 1.0);
        assert!(res.coefficients[1].abs() < 1e-12);
    }

    #[test]
    fn salience_needs_four_years() {
        let articles = freqs(&[(2015, 1.0), (2016, 2.0), (2017, 3.0)]);
        let bills = freqs(&[(2015, 1.0), (2016, 2.0), (2017, 3.0)]);
        assert!(matches!(
            salience_regression(&articles, &bills),
            Err(LegisError::InsufficientObservations { needed: 4, got: 3 })
        ));
    }

    #[test]
    fn split_groups_are_disjoint_and_exhaustive() {
        let idx = index(&[2017, 2019, 2021], 2015..=2023);
        let yearly = freqs(
            &(2015..=2023)
                .map(|y| (y, y as f64 / 2023.0))
                .collect::<Vec<_>>(),
        );
        if let MentionSplit::Eligible {
            mentioned,
            not_mentioned,
        } = split_by_mention(&yearly, &idx, "POVERTY")
        {
            assert_eq!(mentioned.len() + not_mentioned.len(), yearly.len());
        } else {
            panic!("expected eligible");
        }
    }
}
