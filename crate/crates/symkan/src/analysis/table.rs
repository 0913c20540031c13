//! Plain-text comparison tables for experiment summaries.

use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub model: String,
    pub data: String,
    pub rmse: f64,
    pub energy_error: f64,
}

impl ComparisonRow {
    pub fn new(model: &str, data: &str, rmse: f64, energy_error: f64) -> Self {
        Self {
            model: model.into(),
            data: data.into(),
            rmse,
            energy_error,
        }
    }
}

/// Render rows as an aligned monospace table with a header line.
pub fn format_comparison(rows: &[ComparisonRow]) -> String {
    let model_w = rows
        .iter()
        .map(|r| r.model.len())
        .chain(["model".len()])
        .max()
        .unwrap();
    let data_w = rows
        .iter()
        .map(|r| r.data.len())
        .chain(["data".len()])
        .max()
        .unwrap();
    let mut out = format!(
        "{:<model_w$}  {:<data_w$}  {:>12}  {:>12}\n",
        "model", "data", "rmse", "energy_err"
    );
    for row in rows {
        out.push_str(&format!(
            "{:<model_w$}  {:<data_w$}  {:>12.6}  {:>12.6}\n",
            row.model, row.data, row.rmse, row.energy_error
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_aligned_rows() {
        let rows = vec![
            ComparisonRow::new("kan", "clean", 0.00123, 0.00098),
            ComparisonRow::new("kan", "noisy", 0.01552, 0.01240),
            ComparisonRow::new("mlp", "clean", 0.00455, 0.00310),
            ComparisonRow::new("mlp", "noisy", 0.02411, 0.01997),
        ];
        let table = format_comparison(&rows);
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].contains("rmse"));
        assert!(lines[0].contains("energy_err"));
        assert!(lines[1].starts_with("kan"));
        assert!(lines[3].contains("0.00455") || lines[3].contains("0.004550"));
        // all rows align to the header width
        for line in &lines[1..] {
            assert_eq!(line.len(), lines[0].len(), "misaligned: {line}");
        }
    }

    #[test]
    fn empty_input_gives_header_only() {
        let table = format_comparison(&[]);
        assert_eq!(table.lines().count(), 1);
    }
}
