use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use super::{write_atomic, ReportError};
use crate::condition::{AttractorKind, EntitySetting, PositionVariant};
use crate::metrics::{aggregate, AggregateRow, BaseCompetenceRow, GroupKey, Measure, MetricRecord, Statistic};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TableMetric {
    Accuracy,
    RelprobMedian,
    RelprobMean,
}

impl TableMetric {
    pub const ALL: [TableMetric; 3] = [TableMetric::Accuracy, TableMetric::RelprobMedian, TableMetric::RelprobMean];

    pub fn as_str(self) -> &'static str {
        match self {
            TableMetric::Accuracy => "accuracy",
            TableMetric::RelprobMedian => "relprob_median",
            TableMetric::RelprobMean => "relprob_mean",
        }
    }

    pub fn measure(self) -> (Measure, Statistic) {
        match self {
            TableMetric::Accuracy => (Measure::Accuracy, Statistic::Mean),
            TableMetric::RelprobMedian => (Measure::RelativeProb, Statistic::Median),
            TableMetric::RelprobMean => (Measure::RelativeProb, Statistic::Mean),
        }
    }

    pub fn is_ratio(self) -> bool {
        self != TableMetric::Accuracy
    }
}

/// Which attractor kinds a table pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum KindFilter {
    /// B-type and T-type together.
    Related,
    Only(AttractorKind),
}

impl KindFilter {
    pub const ALL: [KindFilter; 4] = [
        KindFilter::Related,
        KindFilter::Only(AttractorKind::BType),
        KindFilter::Only(AttractorKind::TType),
        KindFilter::Only(AttractorKind::Unrelated),
    ];

    pub fn admits(self, kind: AttractorKind) -> bool {
        match self {
            KindFilter::Related => kind.is_related(),
            KindFilter::Only(k) => k == kind,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KindFilter::Related => "related",
            KindFilter::Only(k) => k.as_str(),
        }
    }
}

/// Coordinates of one figure-shaped table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TableSpec {
    pub metric: TableMetric,
    pub kinds: KindFilter,
    pub entity_setting: EntitySetting,
    pub position_variant: PositionVariant,
    pub n_fillers: usize,
}

impl TableSpec {
    /// File stem, e.g. `accuracy_related_multi_after_fact`; a `_f{n}`
    /// suffix marks filler-padded runs.
    pub fn name(&self) -> String {
        let mut s = format!(
            "{}_{}_{}_{}",
            self.metric.as_str(),
            self.kinds.as_str(),
            self.entity_setting,
            self.position_variant
        );
        if self.n_fillers > 0 {
            s.push_str(&format!("_f{}", self.n_fillers));
        }
        s
    }

    fn admits(&self, r: &MetricRecord) -> bool {
        self.kinds.admits(r.attractor_kind)
            && r.entity_setting == self.entity_setting
            && r.position_variant == self.position_variant
            && r.n_fillers == self.n_fillers
    }
}

impl fmt::Display for TableSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub n_attractors: usize,
    pub value: Option<f64>,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub spec: TableSpec,
    pub rows: Vec<TableRow>,
}

pub const TABLE_HEADER: [&str; 4] = ["model", "n_attractors", "value", "count"];

impl Table {
    /// Reshapes aggregate rows grouped by at least `scorer` and
    /// `n_attractors` into table rows.
    pub fn from_aggregate(spec: TableSpec, keys: &[GroupKey], rows: &[AggregateRow]) -> Result<Table, ReportError> {
        let find = |k: GroupKey| {
            keys.iter()
                .position(|x| *x == k)
                .ok_or_else(|| ReportError::MissingKey(k.as_str().to_string()))
        };
        let model = find(GroupKey::Scorer)?;
        let n = find(GroupKey::NAttractors)?;
        let rows = rows
            .iter()
            .map(|r| TableRow {
                model: r.keys[model].clone(),
                n_attractors: r.keys[n].parse().expect("n_attractors key is numeric"),
                value: r.value,
                count: r.count,
            })
            .collect();
        Ok(Table { spec, rows })
    }

    pub fn models(&self) -> Vec<&str> {
        let mut seen: Vec<&str> = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.model.as_str()) {
                seen.push(&r.model);
            }
        }
        seen
    }

    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TABLE_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.model.clone(),
                r.n_attractors.to_string(),
                format_value(r.value),
                r.count.to_string(),
            ])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }
}

/// Shortest round-trip decimal; empty for an empty group.
pub fn format_value(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

fn layouts() -> impl Iterator<Item = (EntitySetting, PositionVariant)> {
    [
        (EntitySetting::Multi, PositionVariant::AfterFact),
        (EntitySetting::Single, PositionVariant::AfterFact),
        (EntitySetting::Multi, PositionVariant::Between),
        (EntitySetting::Single, PositionVariant::Between),
        (EntitySetting::Multi, PositionVariant::LateEntity),
    ]
    .into_iter()
}

/// Every figure-shaped table: metric × kind pooling × setting × variant,
/// for zero fillers and for each filler count present in `records`.
/// Tables with no matching records are kept and come out header-only.
pub fn build_tables(records: &[MetricRecord]) -> Vec<Table> {
    let mut filler_counts: BTreeSet<usize> = records.iter().map(|r| r.n_fillers).collect();
    filler_counts.insert(0);
    let keys = [GroupKey::Scorer, GroupKey::NAttractors];
    let mut tables = Vec::new();
    for &n_fillers in &filler_counts {
        for metric in TableMetric::ALL {
            for kinds in KindFilter::ALL {
                for (entity_setting, position_variant) in layouts() {
                    let spec = TableSpec {
                        metric,
                        kinds,
                        entity_setting,
                        position_variant,
                        n_fillers,
                    };
                    let subset: Vec<MetricRecord> = records.iter().filter(|r| spec.admits(r)).cloned().collect();
                    let (measure, statistic) = metric.measure();
                    let rows = aggregate(&subset, &keys, measure, statistic);
                    tables.push(Table::from_aggregate(spec, &keys, &rows).expect("keys are present"));
                }
            }
        }
    }
    tables
}

/// Writes each table as `<dir>/<name>.csv`.
pub fn emit_tables(dir: &Path, tables: &[Table]) -> Result<Vec<PathBuf>, ReportError> {
    tables
        .iter()
        .map(|t| {
            let path = dir.join(format!("{}.csv", t.spec.name()));
            let text = t.to_csv().map_err(|source| ReportError::Csv {
                path: path.clone(),
                source,
            })?;
            write_atomic(&path, text.as_bytes())?;
            Ok(path)
        })
        .collect()
}

/// Grouping used for `aggregates.csv` unless configured otherwise.
pub const DEFAULT_AGGREGATE_KEYS: [GroupKey; 7] = [
    GroupKey::Scorer,
    GroupKey::SetId,
    GroupKey::AttractorKind,
    GroupKey::EntitySetting,
    GroupKey::PositionVariant,
    GroupKey::NFillers,
    GroupKey::NAttractors,
];

/// Accuracy and both ratio statistics for every group under `keys`.
pub fn aggregates_table(records: &[MetricRecord], keys: &[GroupKey]) -> Result<String, csv::Error> {
    let acc = aggregate(records, keys, Measure::Accuracy, Statistic::Mean);
    let median = aggregate(records, keys, Measure::RelativeProb, Statistic::Median);
    let mean = aggregate(records, keys, Measure::RelativeProb, Statistic::Mean);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = keys.iter().map(|k| k.as_str()).collect();
    header.extend(["accuracy", "relprob_median", "relprob_mean", "count", "excluded"]);
    w.write_record(&header)?;
    for ((a, md), mn) in acc.iter().zip(&median).zip(&mean) {
        debug_assert_eq!(a.keys, md.keys);
        let mut row = a.keys.clone();
        row.extend([
            format_value(a.value),
            format_value(md.value),
            format_value(mn.value),
            a.count.to_string(),
            md.excluded.to_string(),
        ]);
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

/// One line per base item and scorer, followed by a per-scorer total line
/// (`pair_index` = "total").
pub fn base_competence_table(rows: &[BaseCompetenceRow]) -> Result<String, csv::Error> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["scorer", "set_id", "pair_index", "target", "predicted", "correct"])?;
    let mut scorers: Vec<&str> = Vec::new();
    for r in rows {
        if !scorers.contains(&r.scorer.as_str()) {
            scorers.push(&r.scorer);
        }
        w.write_record([
            r.scorer.clone(),
            r.set_id.clone(),
            r.pair_index.to_string(),
            r.target_word.clone(),
            r.predicted.clone(),
            r.correct.to_string(),
        ])?;
    }
    for s in scorers {
        let mine: Vec<_> = rows.iter().filter(|r| r.scorer == s).collect();
        let correct: usize = mine.iter().map(|r| usize::from(r.correct)).sum();
        w.write_record([s, "", "total", "", "", &format!("{correct}/{}", mine.len())])?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(scorer: &str, kind: AttractorKind, n: usize, acc: u8, ratio: Option<f64>) -> MetricRecord {
        MetricRecord {
            item_id: format!("{scorer}{n}{acc}"),
            scorer: scorer.into(),
            accuracy: acc,
            target_prob_attr: 0.1,
            target_prob_base: 0.2,
            relative_prob: ratio,
            set_id: "sports".into(),
            attractor_kind: kind,
            n_attractors: n,
            entity_setting: EntitySetting::Multi,
            position_variant: PositionVariant::AfterFact,
            n_fillers: 0,
        }
    }

    #[test]
    fn empty_records_give_header_only_tables() {
        let tables = build_tables(&[]);
        assert_eq!(tables.len(), 3 * 4 * 5);
        for t in &tables {
            assert_eq!(t.to_csv().unwrap(), "model,n_attractors,value,count\n");
        }
    }

    #[test]
    fn related_pools_b_and_t() {
        let records = [
            rec("m", AttractorKind::BType, 1, 1, Some(0.5)),
            rec("m", AttractorKind::TType, 1, 0, Some(1.5)),
            rec("m", AttractorKind::Unrelated, 1, 1, Some(1.0)),
        ];
        let tables = build_tables(&records);
        let get = |name: &str| tables.iter().find(|t| t.spec.name() == name).unwrap();
        assert_eq!(
            get("accuracy_related_multi_after_fact").to_csv().unwrap(),
            "model,n_attractors,value,count\nm,1,0.5,2\n"
        );
        assert_eq!(
            get("relprob_median_related_multi_after_fact").to_csv().unwrap(),
            "model,n_attractors,value,count\nm,1,1,2\n"
        );
        assert_eq!(get("accuracy_unrelated_multi_after_fact").rows[0].value, Some(1.0));
        assert!(get("accuracy_related_single_after_fact").rows.is_empty());
    }

    #[test]
    fn all_excluded_group_has_blank_value() {
        let records = [rec("m", AttractorKind::BType, 2, 0, None)];
        let tables = build_tables(&records);
        let t = tables.iter().find(|t| t.spec.name() == "relprob_mean_b_type_multi_after_fact").unwrap();
        assert_eq!(t.to_csv().unwrap(), "model,n_attractors,value,count\nm,2,,0\n");
    }

    #[test]
    fn filler_tables_are_separate() {
        let mut r = rec("m", AttractorKind::BType, 0, 1, Some(1.0));
        r.n_fillers = 2;
        let tables = build_tables(&[r]);
        assert_eq!(tables.len(), 2 * 60);
        assert!(tables.iter().any(|t| t.spec.name() == "accuracy_related_multi_after_fact_f2" && t.rows.len() == 1));
    }

    #[test]
    fn from_aggregate_requires_keys() {
        let spec = build_tables(&[])[0].spec;
        let err = Table::from_aggregate(spec, &[GroupKey::Scorer], &[]).unwrap_err();
        assert!(err.to_string().contains("n_attractors"));
    }

    #[test]
    fn value_format_roundtrips() {
        for v in [0.1, 1.0 / 3.0, 1e-300, 12345.678] {
            assert_eq!(format_value(Some(v)).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_value(None), "");
    }
}
